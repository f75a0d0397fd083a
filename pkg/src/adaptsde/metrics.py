"""Distribution distances used in place of FID on analytic problems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GaussianSummary:
    mean: np.ndarray
    var_diag: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        var = np.atleast_1d(np.asarray(self.var_diag, dtype=np.float64))
        if mean.shape != var.shape:
            raise ValueError("mean and variance shapes differ")
        if np.any(var < 0):
            raise ValueError("variances must be non-negative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var_diag", var)

    @property
    def dim(self):
        return self.mean.shape[0]


def w2_gaussian_diag(a: GaussianSummary, b: GaussianSummary) -> float:
    """Exact 2-Wasserstein distance between diagonal Gaussians."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    dm = a.mean - b.mean
    ds = np.sqrt(a.var_diag) - np.sqrt(b.var_diag)
    return float(np.sqrt(dm @ dm + ds @ ds))


def empirical_gaussian_summary(samples) -> GaussianSummary:
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if x.shape[0] < 2:
        raise ValueError("need at least two samples")
    return GaussianSummary(x.mean(axis=0), x.var(axis=0, ddof=1))


def _w2_1d(a, b):
    a = np.sort(a)
    b = np.sort(b)
    if a.size == b.size:
        return float(np.sqrt(np.mean((a - b) ** 2)))
    # match quantile functions on the union of both breakpoint sets
    qa = np.arange(1, a.size + 1) / a.size
    qb = np.arange(1, b.size + 1) / b.size
    q = np.union1d(qa, qb)
    w = np.diff(np.concatenate(([0.0], q)))
    ia = np.minimum(np.searchsorted(qa, q, side="left"), a.size - 1)
    ib = np.minimum(np.searchsorted(qb, q, side="left"), b.size - 1)
    return float(np.sqrt(np.sum(w * (a[ia] - b[ib]) ** 2)))


def sliced_w2(samples_a, samples_b, n_projections=64, rng=None) -> float:
    """Mean over random unit directions of the 1-D W2 between projections."""
    a = np.atleast_2d(np.asarray(samples_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(samples_b, dtype=np.float64))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("sample sets must be non-empty")
    if a.shape[1] != b.shape[1]:
        raise ValueError("dimension mismatch")
    if n_projections < 1:
        raise ValueError("n_projections must be >= 1")
    d = a.shape[1]
    if d == 1:
        return _w2_1d(a[:, 0], b[:, 0])
    rng = np.random.default_rng(rng)
    dirs = rng.standard_normal((n_projections, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pa = a @ dirs.T
    pb = b @ dirs.T
    return float(np.mean([_w2_1d(pa[:, k], pb[:, k]) for k in range(n_projections)]))
