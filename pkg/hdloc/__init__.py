"""Kernel-based location tests for high-dimensional multi-sample data."""

from .errors import HdlocError, InputError, NumericalError
from .model import (
    DIFFERENCE,
    SPATIAL_SIGN,
    GroupedSample,
    KernelKind,
    KernelSpec,
    SpectrumEstimate,
    TestMethod,
    TestOutcome,
    WeightedChiSquare,
    validate_sample,
)
from .nulldist import run_test
from .permutation import permutation_pvalue
from .statistic import compute_statistic

__version__ = "0.1.0"

__all__ = [
    "HdlocError",
    "InputError",
    "NumericalError",
    "DIFFERENCE",
    "SPATIAL_SIGN",
    "GroupedSample",
    "KernelKind",
    "KernelSpec",
    "SpectrumEstimate",
    "TestMethod",
    "TestOutcome",
    "WeightedChiSquare",
    "validate_sample",
    "run_test",
    "permutation_pvalue",
    "compute_statistic",
]
