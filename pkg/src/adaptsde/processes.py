"""Variance-exploding and variance-preserving diffusions.

Both processes are isotropic and dimension agnostic: ``drift`` acts on a batch
``x`` of shape ``(n, d)`` and scalar-in-time quantities accept either floats
or arrays of per-sample times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, DiffusionSpec, Direction
from . import kernels


def ve_sigma(t, sigma_min=0.01, sigma_max=50.0):
    return sigma_min * (sigma_max / sigma_min) ** np.asarray(t, dtype=np.float64)


def ve_diffusion(t, sigma_min=0.01, sigma_max=50.0):
    """sqrt(d sigma^2 / dt) for the geometric noise schedule."""
    return ve_sigma(t, sigma_min, sigma_max) * math.sqrt(2.0 * math.log(sigma_max / sigma_min))


def vp_beta(t, beta_min=0.1, beta_max=20.0):
    return beta_min + np.asarray(t, dtype=np.float64) * (beta_max - beta_min)


def vp_mean_factor(t, beta_min=0.1, beta_max=20.0):
    """exp(-1/2 * integral of beta from 0 to t)."""
    t = np.asarray(t, dtype=np.float64)
    return np.exp(-0.25 * t * t * (beta_max - beta_min) - 0.5 * t * beta_min)


def _col(v, n):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 0:
        return np.full((n, 1), float(v))
    return v.reshape(-1, 1)


@dataclass(frozen=True)
class VEProcess:
    sigma_min: float = 0.01
    sigma_max: float = 50.0
    # drop sigma_min^2 from the kernel variance unless exact_kernel is set
    exact_kernel: bool = False

    name = "ve"
    # fixed Tweedie variances: sigma_min^2 ("fixed") or sigma_min itself
    _fixed_tweedie = {"fixed": lambda p: p.sigma_min ** 2, "sigma_min": lambda p: p.sigma_min}

    def __post_init__(self):
        if not (0 < self.sigma_min < self.sigma_max):
            raise ConfigError("VE requires 0 < sigma_min < sigma_max")

    def sigma(self, t):
        return ve_sigma(t, self.sigma_min, self.sigma_max)

    def diffusion(self, t):
        return ve_diffusion(t, self.sigma_min, self.sigma_max)

    def drift(self, x, t):
        return np.zeros_like(x)

    def mean_factor(self, t):
        return np.ones_like(np.asarray(t, dtype=np.float64))

    def kernel_variance(self, t, exact=None):
        exact = self.exact_kernel if exact is None else exact
        s2 = self.sigma(t) ** 2
        return s2 - self.sigma_min ** 2 if exact else s2

    @property
    def prior_std(self) -> float:
        return float(self.sigma(1.0))

    def tweedie_variance(self, t, convention="kernel"):
        if convention == "kernel":
            return self.kernel_variance(t)
        try:
            return self._fixed_tweedie[convention](self)
        except KeyError:
            raise ConfigError(f"unknown Tweedie convention {convention!r}") from None

    def forward_spec(self, dim: int) -> DiffusionSpec:
        return DiffusionSpec(drift=self.drift, diffusion=lambda x, t: self.diffusion(t),
                             dim=dim, direction=Direction.FORWARD)


@dataclass(frozen=True)
class VPProcess:
    beta_min: float = 0.1
    beta_max: float = 20.0

    name = "vp"

    def __post_init__(self):
        if not (0 <= self.beta_min < self.beta_max):
            raise ConfigError("VP requires 0 <= beta_min < beta_max")

    def beta(self, t):
        return vp_beta(t, self.beta_min, self.beta_max)

    def diffusion(self, t):
        return np.sqrt(self.beta(t))

    def drift(self, x, t):
        return -0.5 * _col(self.beta(t), x.shape[0]) * x

    def mean_factor(self, t):
        return vp_mean_factor(t, self.beta_min, self.beta_max)

    def kernel_variance(self, t, exact=None):
        # -expm1 keeps precision near t = 0
        t = np.asarray(t, dtype=np.float64)
        return -np.expm1(-0.5 * t * t * (self.beta_max - self.beta_min) - t * self.beta_min)

    @property
    def prior_std(self) -> float:
        return 1.0

    def tweedie_variance(self, t, convention="kernel"):
        if convention == "kernel":
            return self.kernel_variance(t)
        if convention in ("fixed", "sigma_min"):
            return 1.0
        raise ConfigError(f"unknown Tweedie convention {convention!r}")

    def forward_spec(self, dim: int) -> DiffusionSpec:
        return DiffusionSpec(drift=self.drift, diffusion=lambda x, t: self.diffusion(t),
                             dim=dim, direction=Direction.FORWARD)


def reverse_spec(process, score, dim=None) -> DiffusionSpec:
    """Reverse-time spec whose drift is ``f - g^2 * score``."""
    sdim = score.dim
    if dim is not None and dim != sdim:
        raise ConfigError(f"score dimension {sdim} does not match process dimension {dim}")

    def drift(x, t):
        g2 = _col(process.diffusion(t), x.shape[0]) ** 2
        return process.drift(x, t) - g2 * score(x, t)

    def drift_and_diffusion(x, t):
        g = process.diffusion(t)
        gc = _col(g, x.shape[0])
        return process.drift(x, t) - gc ** 2 * score(x, t), g

    return DiffusionSpec(drift=drift, diffusion=lambda x, t: process.diffusion(t),
                         dim=sdim, direction=Direction.REVERSE,
                         drift_and_diffusion=drift_and_diffusion)


def probability_flow_drift(process, score):
    """Forward-time ODE drift ``f - 1/2 g^2 score`` sharing the SDE marginals."""

    def drift(x, t):
        g2 = _col(process.diffusion(t), x.shape[0]) ** 2
        return process.drift(x, t) - 0.5 * g2 * score(x, t)

    return drift


def sample_terminal_prior(process, n: int, dim: int, seed: int = 0, streams=None):
    """Draws from N(0, prior_std^2 I) using counter 0 of each sample stream."""
    if streams is None:
        streams = np.arange(n, dtype=np.uint64)
    if n == 0:
        return np.empty((0, dim))
    z = kernels.normals(seed, streams, np.zeros(n, dtype=np.uint64), dim)
    return process.prior_std * z


def baseline_time_grid(n_steps: int, eps: float) -> np.ndarray:
    """``n_steps + 1`` uniformly spaced times from 1 down to exactly ``eps``."""
    if n_steps < 1 or not (0 < eps < 1):
        raise ConfigError("baseline grid needs n_steps >= 1 and 0 < eps < 1")
    grid = 1.0 - np.arange(n_steps + 1) * ((1.0 - eps) / n_steps)
    grid[0] = 1.0
    grid[-1] = eps
    return grid


def denoise_tweedie(x, t, score, process, convention="kernel"):
    """x + Var[x(t) | x(0)] * score(x, t), evaluated once at the terminal time."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    tt = np.full(n, float(t))
    v = np.asarray(process.tweedie_variance(tt, convention), dtype=np.float64)
    return x + _col(np.broadcast_to(v, (n,)), n) * score(x, tt)


def clamp_time(t, t_end):
    return np.clip(t, t_end, 1.0)


def max_pairwise_distance(points) -> float:
    """Largest Euclidean distance between two rows (sigma_max heuristic)."""
    p = np.asarray(points, dtype=np.float64)
    if p.shape[0] < 2:
        return 0.0
    sq = np.einsum("ij,ij->i", p, p)
    best = 0.0
    for start in range(0, p.shape[0], 1024):
        blk = p[start:start + 1024]
        d2 = sq[start:start + 1024, None] + sq[None, :] - 2.0 * blk @ p.T
        best = max(best, float(d2.max()))
    return math.sqrt(max(best, 0.0))


def make_process(name: str, **params):
    name = name.lower()
    if name == "ve":
        return VEProcess(**params)
    if name == "vp":
        return VPProcess(**params)
    raise ConfigError(f"unknown process {name!r}; valid: ve, vp")
