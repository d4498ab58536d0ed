"""Core domain types shared by the statistic, null-distribution and simulation modules."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, GroupTooSmall, NonFiniteEntry, NumericalError, SingleGroup

# ---------------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------------


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GroupedSample:
    """An n x p observation matrix whose rows are split into K labelled groups.

    Rows are observations, columns are coordinates. ``labels`` holds dense
    group ids 0..K-1; ``group_names`` keeps the original label of each id.
    Construct through :func:`validate_sample` unless the group-size invariants
    are deliberately relaxed (internal oracles do this).
    """

    data: np.ndarray
    labels: np.ndarray
    group_names: Tuple[Any, ...] = ()

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.intp)
        if data.ndim != 2:
            raise DimensionMismatch(f"data must be two-dimensional, got shape {data.shape}")
        if labels.shape != (data.shape[0],):
            raise DimensionMismatch(
                f"{labels.size} labels supplied for {data.shape[0]} rows"
            )
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "labels", _frozen(labels))
        if not self.group_names:
            names = tuple(range(int(labels.max()) + 1)) if labels.size else ()
            object.__setattr__(self, "group_names", names)

    @property
    def n(self) -> int:
        return int(self.data.shape[0])

    @property
    def p(self) -> int:
        return int(self.data.shape[1])

    @property
    def n_groups(self) -> int:
        return len(self.group_names)

    @property
    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_groups)

    def group(self, k: int) -> np.ndarray:
        return self.data[self.labels == k]

    def with_data(self, data: np.ndarray) -> "GroupedSample":
        """Same labels, new observation matrix (used by invariance checks and block scans)."""
        return GroupedSample(data, self.labels, self.group_names)

    def with_labels(self, labels: np.ndarray) -> "GroupedSample":
        return GroupedSample(self.data, labels, self.group_names)


def validate_sample(
    matrix: Sequence[Sequence[float]] | np.ndarray,
    labels: Sequence[Any] | np.ndarray,
    *,
    min_group_size: int = 2,
) -> GroupedSample:
    """Check raw inputs and return a :class:`GroupedSample` with dense group ids.

    Group ids follow the sorted order of the distinct raw labels, so labels
    ``[5, 5, 9, 9]`` become ``[0, 0, 1, 1]``.
    """
    try:
        data = np.asarray(matrix, dtype=np.float64)
    except ValueError as exc:
        raise DimensionMismatch(f"matrix is not rectangular: {exc}") from exc
    if data.ndim == 1 and data.size:
        data = data[:, None]
    if data.ndim != 2 or data.shape[1] < 1:
        raise DimensionMismatch(f"matrix must be n x p with p >= 1, got shape {data.shape}")

    raw = np.asarray(labels)
    if raw.ndim != 1 or raw.shape[0] != data.shape[0]:
        raise DimensionMismatch(f"{raw.size} labels supplied for {data.shape[0]} rows")

    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        row, col = (int(v) for v in bad[0])
        raise NonFiniteEntry(row, col)

    names, dense = np.unique(raw, return_inverse=True)
    if names.size < 2:
        raise SingleGroup()
    sizes = np.bincount(dense, minlength=names.size)
    for k, size in enumerate(sizes):
        if size < min_group_size:
            raise GroupTooSmall(k, int(size), min_group_size)

    group_names = tuple(name.item() if hasattr(name, "item") else name for name in names)
    return GroupedSample(data, dense.astype(np.intp), group_names)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


class KernelKind(str, Enum):
    DIFFERENCE = "diff"
    SPATIAL_SIGN = "ss"


@dataclass(frozen=True)
class KernelSpec:
    """Which antisymmetric kernel h to evaluate.

    ``zero_tol`` is the relative threshold below which two points count as
    coincident for the spatial-sign kernel; coincident pairs map to the zero
    vector.
    """

    kind: KernelKind = KernelKind.SPATIAL_SIGN
    zero_tol: float = 1e-12

    @classmethod
    def parse(cls, name: str) -> "KernelSpec":
        return cls(KernelKind(name.strip().lower()))

    @property
    def label(self) -> str:
        return self.kind.value


DIFFERENCE = KernelSpec(KernelKind.DIFFERENCE)
SPATIAL_SIGN = KernelSpec(KernelKind.SPATIAL_SIGN)


# ---------------------------------------------------------------------------
# Null spectrum and outcomes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    """Trace moments t_m = sum_i gamma_i^m of the estimated null covariance.

    ``weights`` optionally carries the explicit eigenvalues; ``clamped``
    counts negative eigenvalues that were set to zero for the exact path.
    """

    t1: float
    t2: float
    t3: Optional[float] = None
    weights: Optional[np.ndarray] = None
    clamped: int = 0

    def __post_init__(self) -> None:
        if self.weights is not None:
            object.__setattr__(self, "weights", _frozen(np.asarray(self.weights, dtype=np.float64)))

    @classmethod
    def from_weights(cls, weights: Sequence[float] | np.ndarray) -> "SpectrumEstimate":
        w = np.asarray(weights, dtype=np.float64)
        return cls(float(w.sum()), float(np.sum(w**2)), float(np.sum(w**3)), w)

    def consistent(self, rtol: float = 1e-8) -> bool:
        if self.weights is None:
            return True
        w = self.weights
        checks = [(self.t1, w.sum()), (self.t2, np.sum(w**2))]
        if self.t3 is not None:
            checks.append((self.t3, np.sum(w**3)))
        return all(np.isclose(a, b, rtol=rtol, atol=0.0) for a, b in checks)

    def as_dict(self) -> dict:
        return {"t1": self.t1, "t2": self.t2, "t3": self.t3}


class TestMethod(str, Enum):
    __test__ = False

    IMHOF_EXACT = "ImhofExact"
    WELCH_SATTERTHWAITE_2M = "WelchSatterthwaite2M"
    HALL_BUCKLEY_EAGLESON_3M = "HallBuckleyEagleson3M"
    PERMUTATION = "Permutation"
    F_EXACT = "FExact"
    NORMAL_APPROX = "NormalApprox"

    # CLI short names
    @classmethod
    def parse(cls, name: str) -> "TestMethod":
        short = {
            "hbe": cls.HALL_BUCKLEY_EAGLESON_3M,
            "ws": cls.WELCH_SATTERTHWAITE_2M,
            "imhof": cls.IMHOF_EXACT,
            "perm": cls.PERMUTATION,
        }
        key = name.strip()
        if key.lower() in short:
            return short[key.lower()]
        return cls(key)


@dataclass(frozen=True, eq=False)
class TestOutcome:
    __test__ = False

    statistic: float
    pvalue: float
    method: TestMethod
    kernel: Optional[KernelSpec] = None
    spectrum: Optional[SpectrumEstimate] = None
    n_permutations: Optional[int] = None
    diagnostics: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not np.isfinite(self.statistic):
            raise NumericalError(f"non-finite test statistic {self.statistic!r}")
        if not np.isfinite(self.pvalue):
            raise NumericalError(f"non-finite p-value {self.pvalue!r}")
        object.__setattr__(self, "statistic", float(self.statistic))
        object.__setattr__(self, "pvalue", float(min(1.0, max(0.0, self.pvalue))))

    def rejects(self, level: float) -> bool:
        return self.pvalue <= level


@dataclass(frozen=True, eq=False)
class WeightedChiSquare:
    """Law of sum_i w_i U_i with independent chi-square(1) variables U_i."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and non-negative")
        if not np.any(w > 0):
            raise ValueError("at least one weight must be positive")
        object.__setattr__(self, "weights", _frozen(w))

    def cumulants(self) -> Tuple[float, float, float]:
        w = self.weights
        return float(w.sum()), float(2.0 * np.sum(w**2)), float(8.0 * np.sum(w**3))

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Monte Carlo draws, generated in chunks to bound memory."""
        out = np.empty(size, dtype=np.float64)
        chunk = max(1, 2_000_000 // self.weights.size)
        for start in range(0, size, chunk):
            stop = min(size, start + chunk)
            draws = rng.chisquare(1.0, size=(stop - start, self.weights.size))
            out[start:stop] = draws @ self.weights
        return out


__all__ = [
    "GroupedSample",
    "validate_sample",
    "KernelKind",
    "KernelSpec",
    "DIFFERENCE",
    "SPATIAL_SIGN",
    "SpectrumEstimate",
    "TestMethod",
    "TestOutcome",
    "WeightedChiSquare",
]
