"""Classical two-sample location tests used as comparison baselines.

hotelling_t2
    T^2 = (n1 n2 / n) d^T S_pooled^-1 d with d = X-bar_1 - X-bar_2 and the
    pooled covariance (divisor n - 2). (n - p - 1) / (p (n - 2)) T^2 follows
    F(p, n - p - 1) exactly under Gaussian H0.

bs1996
    M = ||d||^2 - (n / (n1 n2)) tr(S), S pooled with divisor N = n - 2.
    Z = (n1 n2 / n) M / sqrt(2 (N + 1) / N * B^2) with
    B^2 = N^2 / ((N + 2)(N - 1)) * (tr(S^2) - tr(S)^2 / N); Z ~ N(0, 1).

cq2010
    T = sum_{i != j} X1i'X1j / (n1 (n1 - 1)) + sum_{i != j} X2i'X2j / (n2 (n2 - 1))
        - 2 sum_{i, j} X1i'X2j / (n1 n2),
    var(T) = (2 / (n1 (n1 - 1)) + 2 / (n2 (n2 - 1)) + 4 / (n1 n2)) B^2 under a common
    covariance, B^2 the pooled tr(S^2) estimate above. With covariance="separate",
    var(T) = 2 tr(S1^2) / (n1 (n1 - 1)) + 2 tr(S2^2) / (n2 (n2 - 1))
             + 4 tr(S1 S2) / (n1 n2),
    with the leave-out trace estimators
        tr(S_k^2)  = sum_{i != j} ((X_i - X-bar_(i,j))' X_j) ((X_j - X-bar_(i,j))' X_i) / (n_k (n_k - 1)),
        tr(S1 S2)  = sum_{i, j} ((X1i - X-bar_1(i))' X2j) ((X2j - X-bar_2(j))' X1i) / (n1 n2),
    where X-bar_(i,j) / X-bar_(i) drop the indexed observations; Z = T / sd ~ N(0, 1).
"""

from __future__ import annotations

import math
from typing import Literal, Tuple

import numpy as np
from scipy import linalg
from scipy.stats import f as f_dist
from scipy.stats import norm

from .errors import DegenerateSpectrum, InputError, SingularCovariance
from .model import GroupedSample, TestMethod, TestOutcome


def _two_groups(sample: GroupedSample, minimum: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    if sample.n_groups != 2:
        raise InputError(f"two-sample test needs K = 2, got K = {sample.n_groups}")
    x1, x2 = sample.group(0), sample.group(1)
    if min(x1.shape[0], x2.shape[0]) < minimum:
        raise InputError(f"each group needs at least {minimum} observations")
    return x1, x2


def _pooled_covariance(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    c1 = x1 - x1.mean(axis=0)
    c2 = x2 - x2.mean(axis=0)
    dof = x1.shape[0] + x2.shape[0] - 2
    return (c1.T @ c1 + c2.T @ c2) / dof


def hotelling_t2(sample: GroupedSample) -> TestOutcome:
    x1, x2 = _two_groups(sample)
    n1, n2 = x1.shape[0], x2.shape[0]
    n, p = n1 + n2, sample.p
    if n <= p + 1:
        raise SingularCovariance(f"pooled covariance is singular: n = {n} <= p + 1 = {p + 1}")

    pooled = _pooled_covariance(x1, x2)
    if np.linalg.matrix_rank(pooled) < p:
        raise SingularCovariance("pooled covariance is rank-deficient")
    diff = x1.mean(axis=0) - x2.mean(axis=0)
    try:
        factor = linalg.cho_factor(pooled)
    except linalg.LinAlgError as exc:
        raise SingularCovariance(f"pooled covariance is not positive definite: {exc}") from exc
    t2 = (n1 * n2 / n) * float(diff @ linalg.cho_solve(factor, diff))

    f_stat = (n - p - 1) / (p * (n - 2)) * t2
    pvalue = float(f_dist.sf(f_stat, p, n - p - 1))
    return TestOutcome(t2, pvalue, TestMethod.F_EXACT, diagnostics={"F": f_stat, "df": (p, n - p - 1)})


def _pooled_traces(x1: np.ndarray, x2: np.ndarray, name: str) -> Tuple[float, float]:
    """tr(S) and the unbiased B^2 estimate of tr(Sigma^2) from the pooled covariance."""
    dof = x1.shape[0] + x2.shape[0] - 2
    pooled = _pooled_covariance(x1, x2)
    tr_s = float(np.trace(pooled))
    tr_s2 = float(np.sum(pooled * pooled))
    b2 = dof**2 / ((dof + 2) * (dof - 1)) * (tr_s2 - tr_s**2 / dof)
    if not np.isfinite(b2) or b2 <= 0.0:
        raise DegenerateSpectrum(f"{name} variance estimate is not positive")
    return tr_s, b2


def bs1996(sample: GroupedSample) -> TestOutcome:
    x1, x2 = _two_groups(sample)
    n1, n2 = x1.shape[0], x2.shape[0]
    n = n1 + n2
    dof = n - 2

    tr_s, b2 = _pooled_traces(x1, x2, "BS1996")

    diff = x1.mean(axis=0) - x2.mean(axis=0)
    m_stat = float(diff @ diff) - n / (n1 * n2) * tr_s
    z = (n1 * n2 / n) * m_stat / math.sqrt(2.0 * (dof + 1) / dof * b2)
    return TestOutcome(z, float(norm.sf(z)), TestMethod.NORMAL_APPROX)


def _cq_within(x: np.ndarray) -> Tuple[float, float]:
    """Diagonal-free mean of X_i'X_j and the leave-two-out estimate of tr(Sigma^2)."""
    m = x.shape[0]
    gram = x @ x.T
    diag = np.diag(gram)
    row_total = gram.sum(axis=1)
    off = gram.sum() - diag.sum()
    cross = off / (m * (m - 1))

    # a[i, j] = (X_i - X-bar_(i,j))' X_j
    a = gram - (row_total[None, :] - gram - diag[None, :]) / (m - 2)
    prod = a * a.T
    np.fill_diagonal(prod, 0.0)
    return cross, float(prod.sum()) / (m * (m - 1))


def cq2010(sample: GroupedSample, covariance: Literal["pooled", "separate"] = "pooled") -> TestOutcome:
    """Chen-Qin U-statistic test.

    ``pooled`` (the default) standardises with one tr(Sigma^2) estimate for both
    groups; ``separate`` uses the per-group leave-out trace estimates.
    """
    x1, x2 = _two_groups(sample, minimum=3)
    n1, n2 = x1.shape[0], x2.shape[0]

    within1, tr1 = _cq_within(x1)
    within2, tr2 = _cq_within(x2)
    between = float(np.sum(x1 @ x2.T)) / (n1 * n2)
    t_stat = within1 + within2 - 2.0 * between

    if covariance == "pooled":
        _, b2 = _pooled_traces(x1, x2, "CQ2010")
        var = (2.0 / (n1 * (n1 - 1)) + 2.0 / (n2 * (n2 - 1)) + 4.0 / (n1 * n2)) * b2
        z = t_stat / math.sqrt(var)
        return TestOutcome(z, float(norm.sf(z)), TestMethod.NORMAL_APPROX,
                           diagnostics={"T": t_stat, "covariance": covariance})
    if covariance != "separate":
        raise InputError(f"covariance must be pooled or separate, got {covariance!r}")

    loo1 = (x1.sum(axis=0) - x1) / (n1 - 1)
    loo2 = (x2.sum(axis=0) - x2) / (n2 - 1)
    left = (x1 - loo1) @ x2.T
    right = x1 @ (x2 - loo2).T
    tr12 = float(np.sum(left * right)) / (n1 * n2)

    var = 2.0 * tr1 / (n1 * (n1 - 1)) + 2.0 * tr2 / (n2 * (n2 - 1)) + 4.0 * tr12 / (n1 * n2)
    if not np.isfinite(var) or var <= 0.0:
        raise DegenerateSpectrum("CQ2010 variance estimate is not positive")
    z = t_stat / math.sqrt(var)
    return TestOutcome(z, float(norm.sf(z)), TestMethod.NORMAL_APPROX,
                       diagnostics={"T": t_stat, "covariance": covariance})


__all__ = ["hotelling_t2", "bs1996", "cq2010"]
