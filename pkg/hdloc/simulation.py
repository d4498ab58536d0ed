"""Monte Carlo size/power experiments and the uniform-over-dimension convergence check.

Models share the equicorrelated covariance sigma_ij = 0.5 + 0.5 * 1{i = j}:

    gaussian   N_p(0, Sigma)
    t4         elliptical t with 4 degrees of freedom
    cauchy     elliptical t with 1 degree of freedom

Group 1 is centred at zero; group 2 is shifted by delta * h for a direction h.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import isotonic_regression

from .baselines import bs1996, cq2010, hotelling_t2
from .errors import ConfigError, HdlocError, InputError
from .model import DIFFERENCE, SPATIAL_SIGN, GroupedSample, TestMethod, TestOutcome, WeightedChiSquare, validate_sample
from .nulldist import imhof_cdf, run_test
from .permutation import permutation_pvalue
from .rng import parallel_map, replicate_rng, resolve_workers

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["delta", "test", "rate", "se", "reps"]
# a test column is dropped when more replicates than this fail
ABORT_FAILURE_RATE = 0.01
GRID_POINTS = 9


# ---------------------------------------------------------------------------
# Models and shifts
# ---------------------------------------------------------------------------


class ModelKind(str, Enum):
    GAUSSIAN = "gaussian"
    STUDENT_T4 = "t4"
    CAUCHY = "cauchy"

    @property
    def dof(self) -> Optional[int]:
        return {ModelKind.GAUSSIAN: None, ModelKind.STUDENT_T4: 4, ModelKind.CAUCHY: 1}[self]

    @classmethod
    def parse(cls, name: str) -> "ModelKind":
        aliases = {"model1": cls.GAUSSIAN, "model2": cls.STUDENT_T4, "model3": cls.CAUCHY, "1": cls.GAUSSIAN,
                   "2": cls.STUDENT_T4, "3": cls.CAUCHY}
        key = name.strip().lower()
        return aliases.get(key) or cls(key)


@dataclass(frozen=True)
class ModelSpec:
    model: ModelKind = ModelKind.GAUSSIAN
    p: int = 30

    def __post_init__(self) -> None:
        if isinstance(self.model, str):
            object.__setattr__(self, "model", ModelKind.parse(self.model))
        if self.p < 1:
            raise ConfigError(f"dimension must be at least 1, got {self.p}")


class ShiftDirection(str, Enum):
    NORMALIZED_RAMP = "ramp"
    ONES_2D = "ones2d"
    E2_2D = "e2"


@dataclass(frozen=True)
class ShiftSpec:
    delta: float = 0.0
    direction: ShiftDirection = ShiftDirection.NORMALIZED_RAMP

    def __post_init__(self) -> None:
        object.__setattr__(self, "direction", ShiftDirection(self.direction))
        if not math.isfinite(self.delta) or self.delta < 0:
            raise ConfigError(f"delta must be finite and non-negative, got {self.delta}")

    def unit(self, p: int) -> np.ndarray:
        """Unit shift direction (unscaled by delta)."""
        if self.direction is ShiftDirection.NORMALIZED_RAMP:
            ramp = np.arange(1, p + 1, dtype=np.float64)
            return ramp / np.linalg.norm(ramp)
        if p != 2:
            raise ConfigError(f"direction {self.direction.value} is defined for p = 2 only, got p = {p}")
        return np.array([1.0, 1.0]) if self.direction is ShiftDirection.ONES_2D else np.array([0.0, 1.0])

    def vector(self, p: int) -> np.ndarray:
        return self.delta * self.unit(p)


def equicorr_factor(p: int) -> np.ndarray:
    """Symmetric F with F F^T = 0.5 I + 0.5 J.

    The matrix has eigenvalue (p + 1) / 2 along the ones vector and 1/2 on its
    complement, so F = sqrt(0.5) I + (sqrt((p + 1) / 2) - sqrt(0.5)) J / p.
    """
    if p < 1:
        raise ConfigError(f"dimension must be at least 1, got {p}")
    base = math.sqrt(0.5)
    along = math.sqrt((p + 1) / 2.0) - base
    return base * np.eye(p) + np.full((p, p), along / p)


def sample_group(model: ModelSpec, shift: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """n rows from the model, shifted by ``shift``; applies the factor in O(np)."""
    p = model.p
    z = rng.standard_normal((n, p))
    base = math.sqrt(0.5)
    along = math.sqrt((p + 1) / 2.0) - base
    rows = base * z + along * z.mean(axis=1, keepdims=True)
    if model.model.dof is not None:
        nu = model.model.dof
        rows /= np.sqrt(rng.chisquare(nu, size=n) / nu)[:, None]
    return rows + np.asarray(shift, dtype=np.float64)


# ---------------------------------------------------------------------------
# Test registry
# ---------------------------------------------------------------------------

# runner(sample, stream_seed, permutations); the seed only matters for randomised tests
TestRunner = Callable[[GroupedSample, int, int], TestOutcome]


def _ss(sample: GroupedSample, _seed: int, _b: int) -> TestOutcome:
    return run_test(sample, SPATIAL_SIGN, TestMethod.HALL_BUCKLEY_EAGLESON_3M)


def _zgzc(sample: GroupedSample, _seed: int, _b: int) -> TestOutcome:
    return run_test(sample, DIFFERENCE, TestMethod.HALL_BUCKLEY_EAGLESON_3M)


def _ss_perm(sample: GroupedSample, seed: int, b: int) -> TestOutcome:
    return permutation_pvalue(sample, SPATIAL_SIGN, b, seed, mode="sampled")


TEST_REGISTRY: Mapping[str, TestRunner] = {
    "ss": _ss,
    "zgzc": _zgzc,
    "ss-perm": _ss_perm,
    "bs1996": lambda sample, _seed, _b: bs1996(sample),
    "cq2010": lambda sample, _seed, _b: cq2010(sample),
    "ht2": lambda sample, _seed, _b: hotelling_t2(sample),
}


def resolve_tests(names: Sequence[str]) -> Tuple[str, ...]:
    unknown = [name for name in names if name not in TEST_REGISTRY]
    if unknown:
        raise ConfigError(f"unknown tests {unknown}; choose from {sorted(TEST_REGISTRY)}")
    if not names:
        raise ConfigError("at least one test is required")
    return tuple(names)


# ---------------------------------------------------------------------------
# Size and power
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    shift: ShiftSpec = field(default_factory=ShiftSpec)
    n1: int = 40
    n2: int = 50
    reps: int = 1000
    level: float = 0.05
    seed: int = 0
    tests: Tuple[str, ...] = ("ss",)
    permutations: int = 499
    workers: Optional[int] = None

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ConfigError(f"reps must be at least 1, got {self.reps}")
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"level must lie in (0, 1), got {self.level}")
        if min(self.n1, self.n2) < 2:
            raise ConfigError(f"group sizes must be at least 2, got ({self.n1}, {self.n2})")
        object.__setattr__(self, "tests", resolve_tests(tuple(self.tests)))

    def with_delta(self, delta: float) -> "SimulationConfig":
        return replace(self, shift=replace(self.shift, delta=float(delta)))


@dataclass(frozen=True, eq=False)
class SizePowerTable:
    """Rows (delta, test, rate, se, reps); ``aborted`` maps 'test@delta' to its failure rate."""

    frame: pd.DataFrame
    aborted: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        missing = [c for c in TABLE_COLUMNS if c not in self.frame.columns]
        if missing:
            raise ValueError(f"size/power table is missing columns {missing}")

    def rate(self, test: str, delta: float = 0.0) -> float:
        rows = self.frame[(self.frame["test"] == test) & np.isclose(self.frame["delta"], delta)]
        if rows.empty:
            raise KeyError(f"no row for test {test!r} at delta {delta}")
        return float(rows["rate"].iloc[0])

    def rates(self, test: str) -> pd.Series:
        rows = self.frame[self.frame["test"] == test].sort_values("delta")
        return rows.set_index("delta")["rate"]

    @classmethod
    def concat(cls, tables: Sequence["SizePowerTable"]) -> "SizePowerTable":
        frame = pd.concat([t.frame for t in tables], ignore_index=True)
        aborted: Dict[str, float] = {}
        for table in tables:
            aborted.update(table.aborted)
        return cls(frame, aborted)


def sample_groups(model: ModelSpec, shifts: Sequence[np.ndarray], sizes: Sequence[int], seed: int,
                  replicate: int = 0) -> GroupedSample:
    """K groups, group k shifted by shifts[k] and drawn from stream (seed, replicate, k)."""
    if len(shifts) != len(sizes):
        raise ConfigError(f"{len(shifts)} shifts for {len(sizes)} groups")
    blocks = [
        sample_group(model, shift, n, replicate_rng(seed, replicate, k))
        for k, (shift, n) in enumerate(zip(shifts, sizes))
    ]
    labels = np.repeat(np.arange(len(sizes)), sizes)
    return validate_sample(np.vstack(blocks), labels)


def draw_replicate(config: SimulationConfig, replicate: int) -> GroupedSample:
    """Both groups of replicate r; group 2 carries the shift.

    The draw does not depend on delta beyond the final shift, so every delta
    of a power curve reuses the same underlying noise.
    """
    p = config.model.p
    return sample_groups(config.model, [np.zeros(p), config.shift.vector(p)], [config.n1, config.n2],
                         config.seed, replicate)


def _stream_seed(config: SimulationConfig, replicate: int) -> int:
    return int(replicate_rng(config.seed, replicate, 2).integers(0, 2**63 - 1))


def _run_replicate(config: SimulationConfig, replicate: int) -> Dict[str, Optional[bool]]:
    sample = draw_replicate(config, replicate)
    decisions: Dict[str, Optional[bool]] = {}
    for name in config.tests:
        try:
            outcome = TEST_REGISTRY[name](sample, _stream_seed(config, replicate), config.permutations)
        except HdlocError as exc:
            logger.debug("replicate %d: %s failed: %s", replicate, name, exc)
            decisions[name] = None
            continue
        decisions[name] = outcome.rejects(config.level)
    return decisions


def estimate_size_power(config: SimulationConfig) -> SizePowerTable:
    """Rejection rates at ``config.shift.delta`` for every configured test.

    Deterministic for a fixed config whatever the worker count.
    """
    workers = resolve_workers(config.workers)
    logger.info(
        "simulating %s p=%d delta=%g: %d replicates on %d worker(s)",
        config.model.model.value, config.model.p, config.shift.delta, config.reps, workers,
    )
    results = parallel_map(lambda r: _run_replicate(config, r), range(config.reps), workers)

    rows: List[dict] = []
    aborted: Dict[str, float] = {}
    for name in config.tests:
        decisions = [res[name] for res in results]
        failures = sum(d is None for d in decisions)
        if failures > ABORT_FAILURE_RATE * config.reps:
            key = f"{name}@{config.shift.delta:g}"
            aborted[key] = failures / config.reps
            logger.warning("%s aborted: %d of %d replicates failed", key, failures, config.reps)
            continue
        ok = config.reps - failures
        rate = sum(bool(d) for d in decisions if d is not None) / ok
        rows.append({
            "delta": float(config.shift.delta),
            "test": name,
            "rate": rate,
            "se": math.sqrt(rate * (1.0 - rate) / ok),
            "reps": ok,
        })
    return SizePowerTable(pd.DataFrame(rows, columns=TABLE_COLUMNS), aborted)


def power_curve(config: SimulationConfig, delta_grid: Sequence[float]) -> SizePowerTable:
    grid = [float(d) for d in delta_grid]
    if not grid or grid[0] != 0.0 or any(b < a for a, b in zip(grid, grid[1:])):
        raise InputError("delta grid must be sorted ascending and start at 0")
    return SizePowerTable.concat([estimate_size_power(config.with_delta(d)) for d in grid])


# per-model top of the default grid; chosen so the SS power exceeds 0.9 there
DEFAULT_DELTA_MAX: Mapping[Tuple[ModelKind, ShiftDirection], float] = {
    (ModelKind.GAUSSIAN, ShiftDirection.NORMALIZED_RAMP): 4.0,
    (ModelKind.STUDENT_T4, ShiftDirection.NORMALIZED_RAMP): 5.5,
    (ModelKind.CAUCHY, ShiftDirection.NORMALIZED_RAMP): 8.0,
    (ModelKind.GAUSSIAN, ShiftDirection.ONES_2D): 1.0,
    (ModelKind.STUDENT_T4, ShiftDirection.ONES_2D): 1.4,
    (ModelKind.CAUCHY, ShiftDirection.ONES_2D): 2.0,
    (ModelKind.GAUSSIAN, ShiftDirection.E2_2D): 1.0,
    (ModelKind.STUDENT_T4, ShiftDirection.E2_2D): 1.4,
    (ModelKind.CAUCHY, ShiftDirection.E2_2D): 2.0,
}


def default_delta_grid(model: ModelKind, direction: ShiftDirection = ShiftDirection.NORMALIZED_RAMP,
                       points: int = GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, DEFAULT_DELTA_MAX[(model, direction)], points)


def isotonic_violation(rates: Sequence[float]) -> float:
    """Largest gap between a curve and its nondecreasing least-squares fit."""
    values = np.asarray(rates, dtype=np.float64)
    if values.size < 2:
        return 0.0
    fitted = isotonic_regression(values, increasing=True).x
    return float(np.max(np.abs(values - fitted)))


# ---------------------------------------------------------------------------
# Size-table presets
# ---------------------------------------------------------------------------

HIGH_DIM_TESTS = ("ss", "zgzc", "bs1996", "cq2010")
BIVARIATE_TESTS = ("ht2", "ss", "zgzc")
PRESETS = ("highdim", "bivariate")


def preset_configs(name: str, *, reps: int = 1000, seed: int = 0, level: float = 0.05,
                   permutations: int = 499, workers: Optional[int] = None) -> List[SimulationConfig]:
    """Null configurations for the size tables: 3 models x p in {30, 50, 100}, or p = 2."""
    common = dict(reps=reps, seed=seed, level=level, permutations=permutations, workers=workers)
    if name == "highdim":
        return [
            SimulationConfig(ModelSpec(kind, p), ShiftSpec(0.0), tests=HIGH_DIM_TESTS, **common)
            for kind in ModelKind for p in (30, 50, 100)
        ]
    if name == "bivariate":
        return [
            SimulationConfig(ModelSpec(kind, 2), ShiftSpec(0.0, ShiftDirection.ONES_2D), tests=BIVARIATE_TESTS,
                             **common)
            for kind in ModelKind
        ]
    raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")


def run_size_study(configs: Sequence[SimulationConfig]) -> SizePowerTable:
    """Size rows for several configs, tagged with model and p.

    Aborted columns keep their cell in the key, e.g. ``cauchy/p=2/ht2@0``.
    """
    frames = []
    aborted: Dict[str, float] = {}
    for config in configs:
        table = estimate_size_power(config)
        cell = f"{config.model.model.value}/p={config.model.p}"
        frame = table.frame.copy()
        frame.insert(0, "p", config.model.p)
        frame.insert(0, "model", config.model.model.value)
        frames.append(frame)
        aborted.update({f"{cell}/{key}": rate for key, rate in table.aborted.items()})
    return SizePowerTable(pd.concat(frames, ignore_index=True), aborted)


# ---------------------------------------------------------------------------
# Convergence diagnostic
# ---------------------------------------------------------------------------

INNOVATIONS = ("gaussian", "exponential", "sparse")
SPARSE_RATE = 0.05
CDF_NODES = 400


def geometric_profile(p: int) -> np.ndarray:
    return 0.5 ** np.arange(1, p + 1, dtype=np.float64)


def _standardized_sums(innovation: str, n: int, shape: Tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """n^-1/2 times the sum of n i.i.d. mean-zero unit-variance innovations, drawn exactly."""
    if innovation == "gaussian":
        return rng.standard_normal(shape)
    if innovation == "exponential":
        return (rng.gamma(float(n), 1.0, size=shape) - n) / math.sqrt(n)
    if innovation == "sparse":
        q = SPARSE_RATE
        counts = rng.binomial(n, q, size=shape)
        return (counts - n * q) / math.sqrt(n * q * (1.0 - q))
    raise ConfigError(f"unknown innovation {innovation!r}; choose from {INNOVATIONS}")


def simulate_centered_statistic(profile: np.ndarray, n: int, reps: int, rng: np.random.Generator,
                                innovation: str = "gaussian") -> np.ndarray:
    """Draws of (n ||Z-bar||^2 - sum delta) / sqrt(sum delta^2) with cov(Z) = diag(profile)."""
    root = np.sqrt(profile)
    scaled = _standardized_sums(innovation, n, (reps, profile.size), rng) * root
    raw = np.einsum("rp,rp->r", scaled, scaled)
    return (raw - profile.sum()) / math.sqrt(np.sum(profile**2))


def _limit_cdf(profile: np.ndarray, points: np.ndarray) -> np.ndarray:
    law = WeightedChiSquare(profile)
    centre, spread = profile.sum(), math.sqrt(np.sum(profile**2))
    return np.array([imhof_cdf(law, centre + spread * t) for t in points])


def kolmogorov_distance(draws: np.ndarray, nodes: np.ndarray, node_cdf: np.ndarray) -> float:
    """sup |F_emp - F| with F interpolated from its values at ``nodes``."""
    ordered = np.sort(draws)
    cdf = np.clip(np.interp(ordered, nodes, node_cdf, left=0.0, right=1.0), 0.0, 1.0)
    m = ordered.size
    upper = np.arange(1, m + 1) / m - cdf
    lower = cdf - np.arange(0, m) / m
    return float(max(upper.max(), lower.max()))


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """``cells`` holds (n, p, distance); ``sup_distance`` is d(n) = max over p."""

    cells: pd.DataFrame
    innovation: str
    reps: int

    @property
    def sup_distance(self) -> pd.Series:
        return self.cells.groupby("n")["distance"].max().sort_index()

    @property
    def tolerance(self) -> float:
        # 95% Kolmogorov band for one empirical CDF
        return 1.36 / math.sqrt(self.reps)

    @property
    def monotone(self) -> bool:
        d = self.sup_distance.to_numpy()
        return bool(np.all(np.diff(d) <= self.tolerance))

    def to_frame(self) -> pd.DataFrame:
        """Cells with d(n), the tolerance and the monotone verdict repeated on every row."""
        frame = self.cells.copy()
        frame["sup_distance"] = frame["n"].map(self.sup_distance)
        frame["tolerance"] = self.tolerance
        frame["monotone"] = self.monotone
        return frame

    def to_document(self) -> dict:
        return {
            "innovation": self.innovation,
            "reps": self.reps,
            "sup_distance": self.sup_distance.rename("d").rename_axis("n").reset_index().to_dict("records"),
            "tolerance": self.tolerance,
            "monotone": self.monotone,
            "cells": self.cells.to_dict("records"),
        }


def convergence_diagnostic(
    eigen_profile: Callable[[int], np.ndarray] = geometric_profile,
    n_grid: Sequence[int] = (20, 200),
    p_grid: Sequence[int] = (5, 20, 80),
    reps: int = 2000,
    *,
    innovation: str = "sparse",
    seed: int = 0,
    workers: Optional[int] = None,
) -> ConvergenceReport:
    """Distance between the finite-n law of the centred statistic and its limit, uniformly over p."""
    if reps < 10:
        raise ConfigError(f"reps must be at least 10, got {reps}")
    if innovation not in INNOVATIONS:
        raise ConfigError(f"unknown innovation {innovation!r}; choose from {INNOVATIONS}")
    if any(n < 1 for n in n_grid) or any(p < 1 for p in p_grid):
        raise ConfigError("n_grid and p_grid must hold positive integers")
    workers = resolve_workers(workers)

    rows: List[dict] = []
    for p in p_grid:
        profile = np.asarray(eigen_profile(int(p)), dtype=np.float64)
        if profile.shape != (p,) or np.any(profile < 0) or not np.any(profile > 0):
            raise ConfigError(f"eigen profile for p = {p} must be {p} non-negative values")
        draws = parallel_map(
            lambda n: simulate_centered_statistic(profile, int(n), reps, replicate_rng(seed, int(n), int(p)),
                                                  innovation),
            n_grid,
            workers,
        )
        pooled = np.sort(np.concatenate(draws))
        picks = np.unique(np.linspace(0, pooled.size - 1, min(CDF_NODES, pooled.size)).round().astype(int))
        nodes = np.unique(pooled[picks])
        node_cdf = np.maximum.accumulate(_limit_cdf(profile, nodes))
        for n, sample in zip(n_grid, draws):
            distance = kolmogorov_distance(sample, nodes, node_cdf)
            logger.debug("convergence n=%d p=%d: D=%.4f", n, p, distance)
            rows.append({"n": int(n), "p": int(p), "distance": distance})

    report = ConvergenceReport(pd.DataFrame(rows, columns=["n", "p", "distance"]), innovation, reps)
    if not report.monotone:
        logger.warning("sup-distance is not nonincreasing in n beyond %.3f", report.tolerance)
    return report


__all__ = [
    "ModelKind",
    "ModelSpec",
    "ShiftDirection",
    "ShiftSpec",
    "SimulationConfig",
    "SizePowerTable",
    "TEST_REGISTRY",
    "equicorr_factor",
    "sample_group",
    "sample_groups",
    "draw_replicate",
    "estimate_size_power",
    "power_curve",
    "default_delta_grid",
    "isotonic_violation",
    "preset_configs",
    "run_size_study",
    "geometric_profile",
    "simulate_centered_statistic",
    "kolmogorov_distance",
    "ConvergenceReport",
    "convergence_diagnostic",
]
