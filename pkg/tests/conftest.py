"""Shared fixtures: small reproducible samples."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import pytest

from hdloc.model import GroupedSample, validate_sample

SEED = 20240611


def make_sample(
    sizes: Sequence[int],
    p: int,
    shifts: Sequence[float] | None = None,
    seed: int = SEED,
) -> GroupedSample:
    """Gaussian groups; group k is shifted by shifts[k] in every coordinate."""
    rng = np.random.default_rng(seed)
    shifts = shifts if shifts is not None else [0.0] * len(sizes)
    blocks = [rng.standard_normal((n, p)) + shift for n, shift in zip(sizes, shifts)]
    labels = np.repeat(np.arange(len(sizes)), sizes)
    return validate_sample(np.vstack(blocks), labels)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(SEED)


@pytest.fixture
def two_groups() -> GroupedSample:
    return make_sample([12, 15], 4)


@pytest.fixture
def three_groups() -> GroupedSample:
    return make_sample([4, 3, 5], 3, seed=7)
