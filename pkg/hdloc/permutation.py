"""Permutation p-values for S.

Under H0 all groups share one distribution, so group labels are exchangeable
and relabelled statistics give a finite-sample valid reference distribution.
"""

from __future__ import annotations

import logging
import math
from itertools import combinations
from typing import Iterator, Literal

import numpy as np

from .errors import InputError
from .model import GroupedSample, KernelSpec, TestMethod, TestOutcome
from .rng import parallel_map, replicate_rng
from .statistic import aggregates_from_scores, observation_scores, statistic_S

logger = logging.getLogger(__name__)

MIN_PERMUTATIONS = 99
EXHAUSTIVE_LIMIT = 100_000
# relative slack when comparing relabelled statistics with the observed one
TIE_RTOL = 1e-12

Mode = Literal["auto", "exhaustive", "sampled"]


def count_assignments(group_sizes: np.ndarray) -> int:
    """Multinomial coefficient n! / prod(n_k!)."""
    total, remaining = 1, int(np.sum(group_sizes))
    for size in group_sizes:
        total *= math.comb(remaining, int(size))
        remaining -= int(size)
    return total


def enumerate_assignments(group_sizes: np.ndarray) -> Iterator[np.ndarray]:
    """Yield every distinct label vector with the given group sizes."""
    sizes = [int(s) for s in group_sizes]
    n = sum(sizes)

    def assign(labels: np.ndarray, free: tuple, k: int) -> Iterator[np.ndarray]:
        if k == len(sizes) - 1:
            labels[list(free)] = k
            yield labels.copy()
            return
        for chosen in combinations(free, sizes[k]):
            labels[list(chosen)] = k
            rest = tuple(i for i in free if i not in chosen)
            yield from assign(labels, rest, k + 1)

    yield from assign(np.zeros(n, dtype=np.intp), tuple(range(n)), 0)


def _canonical_order(sample: GroupedSample) -> np.ndarray:
    # sort by label, then by row values, so the result depends on the multiset only
    keys = [sample.data[:, j] for j in reversed(range(sample.p))]
    return np.lexsort(keys + [sample.labels])


def permutation_pvalue(
    sample: GroupedSample,
    spec: KernelSpec,
    B: int = 999,
    seed: int = 0,
    *,
    mode: Mode = "auto",
    workers: int = 1,
) -> TestOutcome:
    """Permutation test of equal locations.

    Sampled mode returns (1 + #{b: S_b >= S_obs}) / (B + 1) with replicate b
    drawn from the stream keyed (seed, b). Exhaustive mode (auto-selected
    when at most EXHAUSTIVE_LIMIT assignments exist) returns the exact
    proportion over all assignments, the observed one included.
    """
    order = _canonical_order(sample)
    scores = observation_scores(sample, spec)[order]
    labels = sample.labels[order]
    K = sample.n_groups
    s_obs = statistic_S(aggregates_from_scores(scores, labels, K))
    threshold = s_obs - TIE_RTOL * max(1.0, abs(s_obs))

    total = count_assignments(sample.group_sizes)
    exhaustive = mode == "exhaustive" or (mode == "auto" and total <= EXHAUSTIVE_LIMIT)

    if exhaustive:
        if total > 50 * EXHAUSTIVE_LIMIT:
            raise InputError(f"{total} label assignments are too many to enumerate")
        hits = sum(
            statistic_S(aggregates_from_scores(scores, relabel, K)) >= threshold
            for relabel in enumerate_assignments(sample.group_sizes)
        )
        pvalue = hits / total
        logger.debug("exhaustive permutation: %d of %d assignments", hits, total)
        return TestOutcome(
            s_obs, pvalue, TestMethod.PERMUTATION, spec,
            n_permutations=total, diagnostics={"mode": "exhaustive"},
        )

    if B < MIN_PERMUTATIONS:
        raise InputError(f"at least {MIN_PERMUTATIONS} permutations are required, got {B}")

    def replicate(b: int) -> bool:
        relabel = replicate_rng(seed, b).permutation(labels)
        return statistic_S(aggregates_from_scores(scores, relabel, K)) >= threshold

    hits = sum(parallel_map(replicate, range(B), workers))
    pvalue = (1 + hits) / (B + 1)
    return TestOutcome(
        s_obs, pvalue, TestMethod.PERMUTATION, spec,
        n_permutations=B, diagnostics={"mode": "sampled"},
    )


__all__ = [
    "permutation_pvalue",
    "count_assignments",
    "enumerate_assignments",
    "EXHAUSTIVE_LIMIT",
    "MIN_PERMUTATIONS",
]
