"""Null distribution of S: plug-in spectrum estimate and weighted chi-square p-values.

Under H0, sqrt(n_k) * R-bar_k stacked over k is asymptotically Gaussian
with a pK x pK covariance Sigma assembled from

    C(i, j, k) = Cov(E[h(X_i, Z_k) | Z_k], E[h(X_j, Z_k) | Z_k]),

and S converges to sum_i gamma_i U_i (gamma_i the eigenvalues of
Sigma, U_i independent chi-square(1)).

The plug-in estimate writes Sigma-hat as A^T A, where A stacks one centred row
per observation (the observation's contribution to every block of
sqrt(n_k) R-bar_k). The traces tr(Sigma-hat^m) equal tr((A A^T)^m), so only the
n x n Gram matrix is ever formed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.stats import chi2

from .errors import DegenerateSpectrum, DimensionMismatch, InvalidMoments, QuadratureFailure
from .kernels import eval_kernel, pairwise_kernel
from .model import (
    GroupedSample,
    KernelKind,
    KernelSpec,
    SpectrumEstimate,
    TestMethod,
    TestOutcome,
    WeightedChiSquare,
)
from .statistic import group_aggregates_fast, statistic_S

logger = logging.getLogger(__name__)

MAX_EXPLICIT_DIM = 1000
IMHOF_TARGET = 1e-6
IMHOF_EPSABS = 1e-9
IMHOF_LIMIT = 500
IMHOF_CYCLES = 200
DEGENERATE_RTOL = 1e-10


# ---------------------------------------------------------------------------
# Influence vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InfluenceVectors:
    """Plug-in conditional means g-hat_{i,k}(z) = n_i^-1 sum_j h(Y_{i,j}, z).

    ``g[k]`` has shape (K, n_k, p): entry [i, m] is g-hat_{i,k} evaluated at
    the m-th observation of group k. ``lam`` holds n_k / n and ``scale`` the
    typical kernel magnitude used by the degeneracy check.
    """

    g: Tuple[np.ndarray, ...]
    lam: np.ndarray
    scale: float

    @property
    def n_groups(self) -> int:
        return len(self.g)

    @property
    def p(self) -> int:
        return int(self.g[0].shape[2])

    def block(self, i: int, k: int) -> np.ndarray:
        return self.g[k][i]


def _kernel_scale(sample: GroupedSample, spec: KernelSpec) -> float:
    if spec.kind is KernelKind.SPATIAL_SIGN:
        return 1.0
    return max(1.0, float(np.max(np.abs(sample.data))))


def influence_vectors(sample: GroupedSample, spec: KernelSpec) -> InfluenceVectors:
    K = sample.n_groups
    sizes = sample.group_sizes
    members = [sample.labels == k for k in range(K)]

    if spec.kind is KernelKind.DIFFERENCE:
        means = np.stack([sample.data[mask].mean(axis=0) for mask in members])
        g = tuple(
            means[:, None, :] - sample.data[mask][None, :, :] for mask in members
        )
    else:
        table = pairwise_kernel(sample.data, spec)
        # source_means[i, b] = n_i^-1 sum_{a in group i} h(Y_a, Y_b)
        source_means = np.stack([table[mask].mean(axis=0) for mask in members])
        g = tuple(source_means[:, mask, :] for mask in members)

    return InfluenceVectors(g, sizes / sizes.sum(), _kernel_scale(sample, spec))


def influence_vectors_bruteforce(sample: GroupedSample, spec: KernelSpec) -> InfluenceVectors:
    """Direct triple loop over (source group, source observation, target)."""
    K, p = sample.n_groups, sample.p
    sizes = sample.group_sizes
    blocks = []
    for k in range(K):
        targets = sample.group(k)
        block = np.zeros((K, targets.shape[0], p))
        for i in range(K):
            sources = sample.group(i)
            for m, z in enumerate(targets):
                acc = np.zeros(p)
                for y in sources:
                    acc += eval_kernel(spec, y, z)
                block[i, m] = acc / sources.shape[0]
        blocks.append(block)
    return InfluenceVectors(tuple(blocks), sizes / sizes.sum(), _kernel_scale(sample, spec))


# ---------------------------------------------------------------------------
# Spectrum estimation
# ---------------------------------------------------------------------------


def design_matrix(iv: InfluenceVectors) -> np.ndarray:
    """Rows of A with Sigma-hat = A^T A, shape (n, K * p).

    For an observation z of group m, block k of its row is
        sqrt(lam_k lam_m) g_{k,m}(z) - 1{k = m} sum_l lam_l g_{l,m}(z),
    centred within group m and scaled by (n_m - 1)^-1/2.
    """
    lam = iv.lam
    K, p = iv.n_groups, iv.p
    rows = []
    for m, g in enumerate(iv.g):
        n_m = g.shape[1]
        phi = np.sqrt(lam * lam[m])[:, None, None] * g
        phi[m] -= np.tensordot(lam, g, axes=1)
        flat = np.transpose(phi, (1, 0, 2)).reshape(n_m, K * p)
        flat = flat - flat.mean(axis=0)
        rows.append(flat / math.sqrt(n_m - 1))
    return np.vstack(rows)


def estimate_trace_moments(
    iv: InfluenceVectors,
    group_sizes: Optional[np.ndarray] = None,
    *,
    explicit: bool = False,
) -> SpectrumEstimate:
    """Estimate t_m = tr(Sigma-hat^m) for m = 1, 2, 3 from the n x n Gram matrix.

    With ``explicit`` the eigenvalues are returned as weights; they are the
    nonzero eigenvalues of Sigma-hat. Negative round-off eigenvalues are
    clamped to zero in ``weights`` only.
    """
    if group_sizes is not None:
        sizes = np.asarray(group_sizes)
        if sizes.size != iv.n_groups or any(g.shape[1] != s for g, s in zip(iv.g, sizes)):
            raise DimensionMismatch("group sizes do not match the influence vectors")

    design = design_matrix(iv)
    gram = design @ design.T
    t1 = float(np.trace(gram))
    t2 = float(np.sum(gram * gram))
    t3 = float(np.sum(gram * (gram @ gram)))

    floor = (DEGENERATE_RTOL * iv.scale) ** 2 * design.size
    if not np.isfinite(t2) or t2 <= 0.0 or t1 <= floor:
        raise DegenerateSpectrum(
            f"estimated null spectrum is degenerate (t1={t1:.3g}, t2={t2:.3g})"
        )

    if not explicit:
        return SpectrumEstimate(t1, t2, t3)

    eig = np.linalg.eigvalsh(gram)[::-1]
    negative = eig < -1e-10 * eig[0]
    clamped = int(np.count_nonzero(negative))
    if clamped:
        logger.warning("clamped %d negative eigenvalue(s) of the null covariance", clamped)
    weights = np.clip(eig, 0.0, None)
    return SpectrumEstimate(t1, t2, t3, weights, clamped)


def covariance_matrix(iv: InfluenceVectors) -> np.ndarray:
    """Materialise Sigma-hat (pK x pK); only for small pK cross-checks."""
    dim = iv.n_groups * iv.p
    if dim > MAX_EXPLICIT_DIM:
        raise DimensionMismatch(
            f"pK = {dim} exceeds {MAX_EXPLICIT_DIM}; use the Gram-matrix path"
        )
    design = design_matrix(iv)
    return design.T @ design


# ---------------------------------------------------------------------------
# Weighted chi-square tail probabilities
# ---------------------------------------------------------------------------


def imhof_cdf(law: WeightedChiSquare, x: float) -> float:
    """P(sum_i w_i U_i <= x) by numerical inversion of the characteristic function.

    The inversion integral is split at a = 2 pi / omega (omega = x / 2): the
    head [0, a] is integrated directly, and on [a, inf) the oscillating factor
    is separated with sin(phi - omega u) = sin(phi) cos(omega u) -
    cos(phi) sin(omega u), leaving Fourier integrals of smooth decaying
    amplitudes for QUADPACK's QAWF.
    """
    x = float(x)
    if not np.isfinite(x):
        raise QuadratureFailure(f"cannot evaluate the CDF at {x!r}")
    w = law.weights[law.weights > 0]
    if x <= 0.0:
        return 0.0

    omega = 0.5 * x
    half_total = 0.5 * float(w.sum())

    def phase(u: float) -> float:
        return 0.5 * float(np.sum(np.arctan(w * u)))

    def envelope(u: float) -> float:
        return u * float(np.prod((1.0 + (w * u) ** 2) ** 0.25))

    def head(u: float) -> float:
        if u == 0.0:
            return half_total - omega
        return math.sin(phase(u) - omega * u) / envelope(u)

    def sin_amplitude(u: float) -> float:
        return math.sin(phase(u)) / envelope(u)

    def cos_amplitude(u: float) -> float:
        return math.cos(phase(u)) / envelope(u)

    split = 2.0 * math.pi / omega
    opts = {"epsabs": IMHOF_EPSABS, "full_output": 1}
    head_val, head_err, *_ = integrate.quad(head, 0.0, split, epsrel=0.0, limit=IMHOF_LIMIT, **opts)
    cos_val, cos_err, *_ = integrate.quad(
        sin_amplitude, split, np.inf, weight="cos", wvar=omega, limlst=IMHOF_CYCLES, **opts
    )
    sin_val, sin_err, *_ = integrate.quad(
        cos_amplitude, split, np.inf, weight="sin", wvar=omega, limlst=IMHOF_CYCLES, **opts
    )

    error = (head_err + cos_err + sin_err) / math.pi
    if not np.isfinite(error) or error > IMHOF_TARGET:
        raise QuadratureFailure(
            f"Imhof inversion at x={x:.6g} reached error {error:.2e} > {IMHOF_TARGET:.0e}"
        )
    integral = head_val + cos_val - sin_val
    return float(min(1.0, max(0.0, 0.5 - integral / math.pi)))


def imhof_sf(law: WeightedChiSquare, x: float) -> float:
    return 1.0 - imhof_cdf(law, x)


def _check_moments(spec: SpectrumEstimate, need_t3: bool) -> None:
    values = [spec.t1, spec.t2] + ([spec.t3] if need_t3 else [])
    if any(v is None or not np.isfinite(v) or v <= 0.0 for v in values):
        raise InvalidMoments(
            f"moment matching needs positive finite moments, got {spec.as_dict()}"
        )


def pvalue_moment_matched(
    spec: SpectrumEstimate,
    s_obs: float,
    order: Literal["two", "three"] = "three",
) -> float:
    """Upper-tail probability of s_obs under a moment-matched chi-square.

    two:   sum gamma_i U_i ~ a * chi2_d with a = t2 / t1, d = t1^2 / t2.
    three: Hall-Buckley-Eagleson; cumulants (t1, 2 t2, 8 t3) matched by a
           shifted, scaled chi2 with nu = t2^3 / t3^2 degrees of freedom.
    """
    if order == "two":
        _check_moments(spec, need_t3=False)
        scale = spec.t2 / spec.t1
        dof = spec.t1**2 / spec.t2
        return float(chi2.sf(s_obs / scale, dof))
    if order == "three":
        _check_moments(spec, need_t3=True)
        nu = spec.t2**3 / spec.t3**2
        z = (s_obs - spec.t1) / math.sqrt(2.0 * spec.t2)
        return float(chi2.sf(nu + z * math.sqrt(2.0 * nu), nu))
    raise InvalidMoments(f"unknown moment order {order!r}")


# ---------------------------------------------------------------------------
# The asymptotic test
# ---------------------------------------------------------------------------


def run_test(
    sample: GroupedSample,
    spec: KernelSpec,
    method: TestMethod = TestMethod.HALL_BUCKLEY_EAGLESON_3M,
    *,
    permutations: int = 999,
    seed: int = 0,
) -> TestOutcome:
    """Kernel location test: S with the selected null calibration."""
    if method is TestMethod.PERMUTATION:
        from .permutation import permutation_pvalue

        return permutation_pvalue(sample, spec, permutations, seed)

    s_obs = statistic_S(group_aggregates_fast(sample, spec))
    iv = influence_vectors(sample, spec)
    explicit = method is TestMethod.IMHOF_EXACT
    moments = estimate_trace_moments(iv, sample.group_sizes, explicit=explicit)

    diagnostics: dict = {}
    if method is TestMethod.HALL_BUCKLEY_EAGLESON_3M:
        pvalue = pvalue_moment_matched(moments, s_obs, "three")
        diagnostics["dof"] = moments.t2**3 / moments.t3**2
    elif method is TestMethod.WELCH_SATTERTHWAITE_2M:
        pvalue = pvalue_moment_matched(moments, s_obs, "two")
        diagnostics["dof"] = moments.t1**2 / moments.t2
    elif method is TestMethod.IMHOF_EXACT:
        pvalue = imhof_sf(WeightedChiSquare(moments.weights), s_obs)
        diagnostics["clamped"] = moments.clamped
    else:
        raise ValueError(f"method {method.value} does not apply to the kernel test")

    return TestOutcome(s_obs, pvalue, method, spec, moments, diagnostics=diagnostics)


__all__ = [
    "InfluenceVectors",
    "influence_vectors",
    "influence_vectors_bruteforce",
    "design_matrix",
    "estimate_trace_moments",
    "covariance_matrix",
    "imhof_cdf",
    "imhof_sf",
    "pvalue_moment_matched",
    "run_test",
    "MAX_EXPLICIT_DIM",
]
