"""The group aggregates R-bar_k and the statistic S = sum_k n_k ||R-bar_k||^2."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import eval_kernel, pairwise_kernel
from .model import GroupedSample, KernelKind, KernelSpec


@dataclass(frozen=True, eq=False)
class GroupAggregates:
    """Row k of ``rbar`` holds R-bar_k; ``n_k`` are the group sizes."""

    rbar: np.ndarray
    n_k: np.ndarray


def group_aggregates_bruteforce(sample: GroupedSample, spec: KernelSpec) -> GroupAggregates:
    """Reference path: explicit double loop over all n^2 ordered pairs.

    Group-size invariants are not required here, so singleton groups work.
    """
    n, p = sample.n, sample.p
    scores = np.zeros((n, p))
    buffer = np.empty(p)
    for i in range(n):
        row_terms = []
        for j in range(n):
            eval_kernel(spec, sample.data[i], sample.data[j], out=buffer)
            row_terms.append(buffer.copy())
        # pairwise (block) summation keeps the n-term sums stable
        scores[i] = np.sum(np.asarray(row_terms), axis=0) / n
    return _aggregate(scores, sample)


def observation_scores(sample: GroupedSample, spec: KernelSpec) -> np.ndarray:
    """R(Y_i) = n^-1 sum_j h(Y_i, Y_j) for every observation, shape (n, p).

    The scores ignore the labels, which is what lets permutation replicates
    reuse them.
    """
    data = sample.data
    if spec.kind is KernelKind.DIFFERENCE:
        return data - data.mean(axis=0)
    table = pairwise_kernel(data, spec)
    return table.sum(axis=1) / sample.n


def group_aggregates_fast(sample: GroupedSample, spec: KernelSpec) -> GroupAggregates:
    """Closed form for the difference kernel (X-bar_k minus the grand mean) and a
    single pass over unordered pairs for the spatial-sign kernel."""
    return _aggregate(observation_scores(sample, spec), sample)


def aggregates_from_scores(scores: np.ndarray, labels: np.ndarray, n_groups: int) -> GroupAggregates:
    counts = np.bincount(labels, minlength=n_groups)
    sums = np.zeros((n_groups, scores.shape[1]))
    np.add.at(sums, labels, scores)
    return GroupAggregates(sums / counts[:, None], counts)


def _aggregate(scores: np.ndarray, sample: GroupedSample) -> GroupAggregates:
    return aggregates_from_scores(scores, sample.labels, sample.n_groups)


def statistic_S(aggregates: GroupAggregates) -> float:
    norms = np.einsum("kp,kp->k", aggregates.rbar, aggregates.rbar)
    return float(math.fsum(aggregates.n_k * norms))


def compute_statistic(sample: GroupedSample, spec: KernelSpec) -> float:
    return statistic_S(group_aggregates_fast(sample, spec))


__all__ = [
    "GroupAggregates",
    "group_aggregates_bruteforce",
    "group_aggregates_fast",
    "observation_scores",
    "aggregates_from_scores",
    "statistic_S",
    "compute_statistic",
]
