"""Antisymmetric kernels h(x, y) and their pairwise tables."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import DimensionMismatch
from .model import KernelKind, KernelSpec


def _coincident_threshold(spec: KernelSpec, norm_x: np.ndarray, norm_y: np.ndarray) -> np.ndarray:
    return spec.zero_tol * np.maximum(1.0, np.maximum(norm_x, norm_y))


def eval_kernel(
    spec: KernelSpec,
    x: np.ndarray,
    y: np.ndarray,
    out: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Return h(x, y); writes into ``out`` when a buffer of length p is given.

    Difference kernel: x - y. Spatial-sign kernel: (x - y) / ||x - y||, with
    coincident (or nearly coincident) points mapped to the zero vector.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape or x.size == 0:
        raise DimensionMismatch(f"kernel arguments have shapes {x.shape} and {y.shape}")
    if out is None:
        out = np.empty_like(x)
    elif out.shape != x.shape:
        raise DimensionMismatch(f"output buffer has shape {out.shape}, expected {x.shape}")

    np.subtract(x, y, out=out)
    if spec.kind is KernelKind.DIFFERENCE:
        return out

    dist = float(np.linalg.norm(out))
    limit = _coincident_threshold(spec, np.linalg.norm(x), np.linalg.norm(y))
    if dist < float(limit):
        out.fill(0.0)
    else:
        out /= dist
    return out


def pairwise_kernel(data: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Table H with H[a, b] = h(row a, row b), shape (n, n, p).

    For the spatial-sign kernel every unordered pair is evaluated once and
    stored with opposite signs, so H[a, b] == -H[b, a] bit for bit.
    """
    data = np.asarray(data, dtype=np.float64)
    n, p = data.shape
    if spec.kind is KernelKind.DIFFERENCE:
        return data[:, None, :] - data[None, :, :]

    table = np.zeros((n, n, p), dtype=np.float64)
    upper, lower = np.triu_indices(n, k=1)
    if upper.size == 0:
        return table
    diff = data[upper] - data[lower]
    dist = np.linalg.norm(diff, axis=1)
    row_norm = np.linalg.norm(data, axis=1)
    limit = _coincident_threshold(spec, row_norm[upper], row_norm[lower])
    keep = dist >= limit
    directions = np.zeros_like(diff)
    directions[keep] = diff[keep] / dist[keep, None]
    table[upper, lower] = directions
    table[lower, upper] = -directions
    return table


__all__ = ["eval_kernel", "pairwise_kernel"]
