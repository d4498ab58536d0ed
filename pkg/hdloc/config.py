"""Run configuration assembled from CLI flags and an optional TOML file.

Precedence: explicit flag > TOML value > module default. Flags left unset
arrive as ``None`` so they never mask a file value.
"""

from __future__ import annotations

import argparse
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from .colon import DEFAULT_TESTS as COLON_TESTS
from .colon import MODES as COLON_MODES
from .errors import ConfigError
from .model import KernelSpec, TestMethod
from .permutation import MIN_PERMUTATIONS
from .simulation import (
    INNOVATIONS,
    PRESETS,
    TEST_REGISTRY,
    ModelKind,
    ModelSpec,
    ShiftDirection,
    ShiftSpec,
    SimulationConfig,
)

COMMANDS = ("test", "simulate", "powercurve", "realdata", "converge", "perm")
FORMATS = ("json", "csv")
PERM_MODES = ("auto", "exhaustive", "sampled")


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: Optional[Path] = None
    label_column: Optional[int] = None
    sidecar: Optional[Path] = None
    header: bool = False
    min_group_size: int = 2
    kernel: str = "ss"
    method: str = "hbe"
    seed: int = 0
    reps: int = 1000
    level: float = 0.05
    permutations: int = 999
    perm_mode: str = "auto"
    out: Optional[Path] = None
    fmt: str = "json"
    threads: Optional[int] = None
    timestamp: bool = True
    model: str = "gaussian"
    p: int = 30
    n1: int = 40
    n2: int = 50
    delta: float = 0.0
    direction: str = "ramp"
    tests: Optional[Tuple[str, ...]] = None
    preset: Optional[str] = None
    deltas: Optional[Tuple[float, ...]] = None
    points: int = 9
    mode: str = "full"
    matrix: Optional[Path] = None
    tissues: Optional[Path] = None
    log2: bool = False
    n_grid: Tuple[int, ...] = (20, 200)
    p_grid: Tuple[int, ...] = (5, 20, 80)
    innovation: str = "sparse"

    def __post_init__(self) -> None:
        for name in ("input", "sidecar", "out", "matrix", "tissues"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, Path):
                object.__setattr__(self, name, Path(value))
        for name, cast in (("tests", str), ("deltas", float), ("n_grid", int), ("p_grid", int)):
            value = getattr(self, name)
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            if value is not None:
                try:
                    object.__setattr__(self, name, tuple(cast(v) for v in value))
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{name}: {exc}") from exc
        self.validate()

    # ------------------------------------------------------------------ checks
    def validate(self) -> None:
        _choice("command", self.command, COMMANDS)
        _choice("kernel", self.kernel, ("diff", "ss"))
        try:
            TestMethod.parse(self.method)
        except ValueError as exc:
            raise ConfigError(f"unknown method {self.method!r}") from exc
        _choice("format", self.fmt, FORMATS)
        _choice("perm_mode", self.perm_mode, PERM_MODES)
        _choice("mode", self.mode, COLON_MODES)
        _choice("innovation", self.innovation, INNOVATIONS)
        _choice("direction", self.direction, tuple(d.value for d in ShiftDirection))
        try:
            ModelKind.parse(self.model)
        except ValueError as exc:
            raise ConfigError(f"unknown model {self.model!r}") from exc
        if self.preset is not None:
            _choice("preset", self.preset, PRESETS)
        if self.tests is not None:
            unknown = [t for t in self.tests if t not in TEST_REGISTRY]
            if unknown or not self.tests:
                raise ConfigError(f"unknown tests {unknown}; choose from {sorted(TEST_REGISTRY)}")

        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.reps < 1:
            raise ConfigError(f"reps must be at least 1, got {self.reps}")
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"level must lie in (0, 1), got {self.level}")
        if self.permutations < MIN_PERMUTATIONS:
            raise ConfigError(f"permutations must be at least {MIN_PERMUTATIONS}, got {self.permutations}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")
        if self.label_column is not None and self.label_column < 1:
            raise ConfigError("label column is 1-based")
        if self.min_group_size < 1:
            raise ConfigError("min_group_size must be at least 1")
        if self.p < 1 or min(self.n1, self.n2) < 2:
            raise ConfigError(f"need p >= 1 and group sizes >= 2, got p={self.p} n=({self.n1}, {self.n2})")
        if self.delta < 0:
            raise ConfigError(f"delta must be non-negative, got {self.delta}")
        if self.points < 2:
            raise ConfigError("a power curve needs at least 2 grid points")
        if any(int(v) < 1 for v in self.n_grid + self.p_grid):
            raise ConfigError("n_grid and p_grid must hold positive integers")

        if self.command in ("test", "perm") and self.input is None:
            raise ConfigError(f"{self.command} needs an input CSV (--input)")
        if self.command in ("test", "perm") and self.label_column is None and self.sidecar is None:
            raise ConfigError(f"{self.command} needs --label-column or --sidecar")
        if self.command == "realdata" and (self.matrix is None or self.tissues is None):
            raise ConfigError("realdata needs --matrix and --tissues")

    # ------------------------------------------------------------------ views
    @property
    def kernel_spec(self) -> KernelSpec:
        return KernelSpec.parse(self.kernel)

    @property
    def test_method(self) -> TestMethod:
        return TestMethod.parse(self.method)

    def simulation_config(self, tests: Tuple[str, ...] = ("ss",)) -> SimulationConfig:
        return SimulationConfig(
            model=ModelSpec(ModelKind.parse(self.model), self.p),
            shift=ShiftSpec(self.delta, ShiftDirection(self.direction)),
            n1=self.n1,
            n2=self.n2,
            reps=self.reps,
            level=self.level,
            seed=self.seed,
            tests=self.tests or tests,
            permutations=self.permutations,
            workers=self.threads,
        )

    def colon_tests(self) -> Tuple[str, ...]:
        return self.tests or COLON_TESTS

    def echo(self) -> Dict[str, Any]:
        """Plain mapping of every setting, for the result file."""
        return {k: (str(v) if isinstance(v, Path) else v) for k, v in asdict(self).items()}


FIELD_NAMES = tuple(f.name for f in fields(RunConfig))


def _choice(name: str, value: Any, allowed: Tuple[str, ...]) -> None:
    if value not in allowed:
        raise ConfigError(f"{name} must be one of {allowed}, got {value!r}")


def load_toml(path: Path) -> Dict[str, Any]:
    """Flat key-value settings; a table named after a subcommand is merged on top by the caller."""
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc


def _file_values(document: Mapping[str, Any], command: str) -> Dict[str, Any]:
    values = {k: v for k, v in document.items() if not isinstance(v, dict)}
    section = document.get(command, {})
    if isinstance(section, dict):
        values.update(section)
    sections = {k for k, v in document.items() if isinstance(v, dict)}
    stray = sections - set(COMMANDS)
    unknown = (set(values) - set(FIELD_NAMES)) | stray
    unknown.discard("command")
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    values.pop("command", None)
    return values


def build_config(namespace: argparse.Namespace) -> RunConfig:
    command = namespace.command
    values: Dict[str, Any] = {}
    config_path = getattr(namespace, "config", None)
    if config_path is not None:
        values.update(_file_values(load_toml(Path(config_path)), command))
    for name in FIELD_NAMES:
        flag = getattr(namespace, name, None)
        if flag is not None and name != "command":
            values[name] = flag
    try:
        return RunConfig(command=command, **values)
    except TypeError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


__all__ = ["RunConfig", "build_config", "load_toml", "COMMANDS", "FIELD_NAMES"]
