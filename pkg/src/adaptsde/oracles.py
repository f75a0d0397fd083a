"""Closed-form score functions standing in for trained score networks.

Every data model here is a (mixture of) diagonal Gaussian(s), so the noised
marginal p_t stays a mixture of diagonal Gaussians under both processes:
component means scale by m(t) and variances become m(t)^2 var + v(t).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .core import ConfigError


def _tcol(t, n):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        return np.full((n, 1), float(t))
    return t.reshape(-1, 1)


@dataclass(frozen=True)
class GaussianDataModel:
    mu0: np.ndarray
    var0: np.ndarray

    def __post_init__(self):
        mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=np.float64))
        var0 = np.broadcast_to(np.asarray(self.var0, dtype=np.float64), mu0.shape).copy()
        if np.any(var0 <= 0):
            raise ConfigError("data variances must be positive")
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "var0", var0)

    @property
    def dim(self) -> int:
        return self.mu0.shape[0]

    def marginal(self, t, process):
        """Per-component mean and variance of p_t."""
        m = np.asarray(process.mean_factor(t), dtype=np.float64)[..., None]
        v = np.asarray(process.kernel_variance(t), dtype=np.float64)[..., None]
        return m * self.mu0, m * m * self.var0 + v

    def log_density(self, x, t, process):
        x = np.atleast_2d(x)
        mean, var = self.marginal(np.broadcast_to(t, x.shape[:1]), process)
        return -0.5 * np.sum((x - mean) ** 2 / var + np.log(2 * np.pi * var), axis=1)

    def score(self, x, t, process):
        m = _tcol(process.mean_factor(t), x.shape[0])
        v = _tcol(process.kernel_variance(t), x.shape[0])
        return -(x - m * self.mu0) / (m * m * self.var0 + v)

    def sample(self, n, t, process, rng):
        mean, var = self.marginal(t, process)
        return mean + np.sqrt(var) * rng.standard_normal((n, self.dim))

    def moments(self, t, process):
        """Per-dimension mean and variance of p_t."""
        return self.marginal(t, process)


def gaussian_score_ve(x, t, model: GaussianDataModel, ve):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    s2 = _tcol(ve.kernel_variance(t), x.shape[0])
    return -(x - model.mu0) / (model.var0 + s2)


def gaussian_score_vp(x, t, model: GaussianDataModel, vp):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    m = _tcol(vp.mean_factor(t), x.shape[0])
    return -(x - m * model.mu0) / (m * m * model.var0 + 1.0 - m * m)


@dataclass(frozen=True)
class MixtureDataModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        var = np.broadcast_to(np.asarray(self.variances, dtype=np.float64), mu.shape).copy()
        if w.shape != (mu.shape[0],) or np.any(w <= 0):
            raise ConfigError("mixture weights must be positive, one per component")
        if not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-12):
            raise ConfigError("mixture weights must sum to 1")
        if np.any(var <= 0):
            raise ConfigError("mixture variances must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def _components(self, x, t, process):
        n = x.shape[0]
        m = _tcol(process.mean_factor(t), n)[:, :, None]          # (n,1,1)
        v = _tcol(process.kernel_variance(t), n)[:, :, None]
        mean = m * self.means[None]                                # (n,K,d)
        var = m * m * self.variances[None] + v
        diff = x[:, None, :] - mean
        logp = (np.log(self.weights)[None]
                - 0.5 * np.sum(diff * diff / var + np.log(2 * np.pi * var), axis=2))
        return logp, diff, var

    def log_density(self, x, t, process):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        logp, _, _ = self._components(x, t, process)
        top = logp.max(axis=1, keepdims=True)
        return top[:, 0] + np.log(np.exp(logp - top).sum(axis=1))

    def score(self, x, t, process):
        logp, diff, var = self._components(x, t, process)
        top = logp.max(axis=1, keepdims=True)
        w = np.exp(logp - top)
        w /= w.sum(axis=1, keepdims=True)
        return np.sum(w[:, :, None] * (-diff / var), axis=1)

    def moments(self, t, process):
        """Per-dimension mean and variance of p_t (exact, not a fit)."""
        m = float(np.asarray(process.mean_factor(t)))
        v = float(np.asarray(process.kernel_variance(t)))
        w = self.weights[:, None]
        means = m * self.means
        mean = np.sum(w * means, axis=0)
        second = np.sum(w * (m * m * self.variances + v + means * means), axis=0)
        return mean, second - mean * mean

    def sample(self, n, t, process, rng):
        k = rng.choice(len(self.weights), size=n, p=self.weights)
        m = float(np.asarray(process.mean_factor(t)))
        v = float(np.asarray(process.kernel_variance(t)))
        mean = m * self.means[k]
        std = np.sqrt(m * m * self.variances[k] + v)
        return mean + std * rng.standard_normal((n, self.dim))


def mixture_score(x, t, model: MixtureDataModel, process):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return model.score(x, t, process)


class AnalyticScore:
    """Exact score of ``model`` noised by ``process``; callable as ``s(x, t)``."""

    def __init__(self, model, process):
        self.model = model
        self.process = process
        self.dim = model.dim

    def __call__(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return self.model.score(x, t, self.process)


class CountingScore:
    """Wraps a score field and counts evaluations.

    ``calls`` counts invocations; ``rows`` counts per-sample evaluations, which
    is the unit used for NFE in run reports. Both are guarded by a lock so one
    wrapper can be shared by worker threads.
    """

    def __init__(self, score, record_times=False):
        self.score = score
        self.dim = score.dim
        self.calls = 0
        self.rows = 0
        self.record_times = record_times
        self.times = []
        self._lock = threading.Lock()

    def __call__(self, x, t):
        out = self.score(x, t)
        n = x.shape[0] if getattr(x, "ndim", 0) == 2 else 1
        if self.record_times:
            tt = np.array(t, dtype=np.float64)
            tt = np.full(n, float(tt)) if tt.ndim == 0 else tt.reshape(-1)
        with self._lock:
            self.calls += 1
            self.rows += n
            if self.record_times:
                self.times.append(tt)
        return out

    @property
    def min_time(self) -> float:
        if not self.times:
            return float("nan")
        return float(min(tt.min() for tt in self.times if tt.size))

    def reset(self):
        with self._lock:
            self.calls = 0
            self.rows = 0
            self.times = []


def counting_wrapper(score, record_times=False) -> CountingScore:
    return CountingScore(score, record_times=record_times)


class ZeroScore:
    def __init__(self, dim):
        self.dim = dim

    def __call__(self, x, t):
        return np.zeros_like(np.atleast_2d(np.asarray(x, dtype=np.float64)))


def random_gaussian_model(dim, rng, var_range=(0.5, 2.0)) -> GaussianDataModel:
    mu0 = rng.standard_normal(dim)
    var0 = rng.uniform(*var_range, size=dim)
    return GaussianDataModel(mu0, var0)
