"""Mean and mean-square behaviour of the scheme on the linear test SDE

    dx = lam * x dt + sigma dW.

Euler-Maruyama on this equation is the scalar recursion
``y <- (1 + h lam) y + z`` with ``Var(z) = sigma^2 h``. It is stable in mean iff
``|1 + h lam| < 1``, and its second moment then converges to
``-sigma^2 / (2 lam + lam^2 h)``, which tends to ``sigma^2 / (2 |lam|)`` as
``h -> 0``.

Notes
-----
The closed-form mean-square recursion uses the squared initial moment
``E[y0^2]``; writing ``E[|y0|]`` there would not satisfy the recursion.
Reverse-time stepping is analysed with the consecutive forward/backward
reading, i.e. elapsed time ``t = 2h`` in the factor ``1 + lam (t - h)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import DiffusionSpec, Direction

# Philox tags keep the Monte-Carlo families independent of each other
_EM_TAG = 2
_FB_TAG = 4
_WEAK_TAG = 5


class UnstableSchemeError(ValueError):
    pass


@dataclass(frozen=True)
class LinearTestSpec:
    lam: complex
    sigma: float
    h: float

    @property
    def factor(self):
        return 1.0 + self.lam * self.h

    @property
    def stable(self) -> bool:
        return abs(self.factor) < 1.0


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    second_moment: float
    mean_ci: float
    second_moment_ci: float
    n_paths: int

    def mean_contains(self, value) -> bool:
        return abs(self.mean - value) <= self.mean_ci

    def second_moment_contains(self, value) -> bool:
        return abs(self.second_moment - value) <= self.second_moment_ci


def em_scheme_step(y, spec: LinearTestSpec, z):
    return spec.factor * y + z


def _require_real(spec):
    if isinstance(spec.lam, complex) and spec.lam.imag != 0:
        raise NotImplementedError("complex lambda is not supported by the default suite")
    return float(np.real(spec.lam))


def stationary_moments_analytic(spec: LinearTestSpec, allow_complex=False):
    """Limits of E[y_n] and E[y_n^2] for a stable spec."""
    if not spec.stable:
        raise UnstableSchemeError(
            f"outside stability region: |1 + lam h| = {abs(spec.factor):.6g} >= 1")
    if allow_complex:
        lam = complex(spec.lam)
        return 0.0, -spec.sigma ** 2 / (2 * lam.real + abs(lam) ** 2 * spec.h)
    lam = _require_real(spec)
    return 0.0, -spec.sigma ** 2 / (2 * lam + lam * lam * spec.h)


def mean_square_after(spec: LinearTestSpec, n_steps: int, m0: float) -> float:
    """E[y_n^2] after n_steps from E[y_0^2] = m0, in closed form."""
    lam = _require_real(spec)
    a = spec.factor ** 2
    if a == 1.0:
        return m0 + n_steps * spec.sigma ** 2 * spec.h
    return (a ** n_steps * m0
            + (a ** n_steps - 1.0) / (2 * lam + lam * lam * spec.h) * spec.sigma ** 2)


def _estimate(y) -> MomentEstimate:
    n = y.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        y2 = y * y
        mean = float(np.mean(y))
        m2 = float(np.mean(y2))
        mean_ci = 3.0 * float(np.std(y, ddof=1)) / math.sqrt(n)
        m2_ci = 3.0 * float(np.std(y2, ddof=1)) / math.sqrt(n)
    return MomentEstimate(mean, m2, mean_ci, m2_ci, n)


def simulate_em_paths(spec, n_paths, n_steps, seed=0, y0=0.0, tag=_EM_TAG):
    lam = _require_real(spec)
    return kernels.linear_scheme_paths(1.0 + lam * spec.h, spec.sigma * math.sqrt(spec.h),
                                       y0, n_paths, n_steps, seed, tag)


def empirical_moments(spec: LinearTestSpec, n_paths: int, n_steps: int, seed=0,
                      y0=0.0) -> MomentEstimate:
    """Monte-Carlo moments after ``n_steps`` EM steps, with 3-sigma intervals."""
    return _estimate(simulate_em_paths(spec, n_paths, n_steps, seed, y0))


def forward_backward_factor(spec: LinearTestSpec, elapsed=None):
    """Factor ``1 + lam (t - h)`` of the reverse-time recursion; ``t = 2h`` by default."""
    t = 2.0 * spec.h if elapsed is None else elapsed
    return 1.0 + spec.lam * (t - spec.h)


def forward_backward_scheme_moments(spec: LinearTestSpec, n_paths: int, n_steps: int,
                                    seed=0, y0=0.0) -> MomentEstimate:
    _require_real(spec)
    factor = float(np.real(forward_backward_factor(spec)))
    if abs(factor) >= 1.0:
        raise UnstableSchemeError("outside stability region")
    y = kernels.linear_scheme_paths(factor, spec.sigma * math.sqrt(spec.h), y0,
                                    n_paths, n_steps, seed, _FB_TAG)
    return _estimate(y)


def h_limit_extrapolation(hs, second_moments, degree=1) -> float:
    """Intercept at h = 0 of a polynomial fit of second moments against h."""
    hs = np.asarray(hs, dtype=np.float64)
    m2 = np.asarray(second_moments, dtype=np.float64)
    if hs.size < 2 or hs.size != m2.size:
        raise ValueError("need at least two (h, second moment) pairs")
    if degree >= hs.size:
        raise ValueError("fit degree must be below the number of points")
    return float(np.polyfit(hs, m2, degree)[-1])


def classify_divergence(est: MomentEstimate, y0: float, half: MomentEstimate | None = None) -> bool:
    """True when the empirical moments have not settled.

    Divergent runs overflow, keep a mean of order ``|y0|``, or (on the
    boundary ``|1 + lam h| = 1``) show a second moment that keeps growing
    between the half-way and final step.
    """
    if not (math.isfinite(est.mean) and math.isfinite(est.second_moment)):
        return True
    if abs(est.mean) > est.mean_ci + 0.1 * abs(y0):
        return True
    if half is not None and math.isfinite(half.second_moment):
        return est.second_moment > 1.5 * half.second_moment + est.second_moment_ci
    return False


def stability_grid(lams, hs, sigma=1.0, n_paths=2000, n_steps=1000, seed=0, y0=1.0):
    """Rows of (lam, h, analytic_m2, empirical_m2, ci, stable, diverged)."""
    rows = []
    for lam in lams:
        for h in hs:
            spec = LinearTestSpec(float(lam), sigma, float(h))
            est = empirical_moments(spec, n_paths, n_steps, seed, y0)
            half = empirical_moments(spec, n_paths, n_steps // 2, seed, y0)
            analytic = (stationary_moments_analytic(spec)[1] if spec.stable
                        else float("nan"))
            rows.append((float(lam), float(h), analytic, est.second_moment,
                         est.second_moment_ci, spec.stable,
                         classify_divergence(est, y0, half)))
    return rows


def linear_sde_spec(lam: float, sigma: float) -> DiffusionSpec:
    return DiffusionSpec(drift=lambda x, t: lam * x,
                         diffusion=lambda x, t: np.full(x.shape[0], sigma),
                         dim=1, direction=Direction.FORWARD)


@dataclass(frozen=True)
class WeakErrorResult:
    hs: np.ndarray
    errors: np.ndarray
    stderr: np.ndarray
    slope: float


def _loglog_slope(hs, errs):
    return float(np.polyfit(np.log(hs), np.log(np.abs(errs)), 1)[0])


def weak_error_sweep(lam=-1.0, sigma=1.0, x0=0.0, T=1.0, hs=(0.2, 0.1, 0.05, 0.025),
                     n_paths=10**6, seed=0, chunk=250_000):
    """Weak error in E[X_T^2] for Euler-Maruyama and the extrapolated scheme.

    All step sizes share one Brownian path per sample (built from the finest
    increments), and the exact solution is simulated jointly from the same
    increments. The estimator averages ``X_h^2 - X_exact^2``, whose variance
    is far smaller than that of ``X_h^2`` alone.

    Returns ``{"em": WeakErrorResult, "extrapolated": WeakErrorResult}``.
    """
    from .adaptive import em_proposal, heun_proposal

    hs = np.asarray(sorted(hs, reverse=True), dtype=np.float64)
    h_f = hs[-1]
    n_fine = int(round(T / h_f))
    ratios = [int(round(h / h_f)) for h in hs]
    if any(abs(r * h_f - h) > 1e-12 for r, h in zip(ratios, hs)) or abs(n_fine * h_f - T) > 1e-12:
        raise ValueError("step sizes must divide T and be multiples of the finest step")
    spec = linear_sde_spec(lam, sigma)
    # exact transition over one fine step: X <- e^{lam h} X + sigma I, with (dW, I) jointly Gaussian
    decay = math.exp(lam * h_f)
    var_i = math.expm1(2 * lam * h_f) / (2 * lam)
    cov = math.expm1(lam * h_f) / lam
    b1 = cov / h_f
    b2 = math.sqrt(max(var_i - cov * cov / h_f, 0.0))

    sums = {k: np.zeros(len(hs)) for k in ("em", "extrapolated")}
    sq = {k: np.zeros(len(hs)) for k in ("em", "extrapolated")}
    for start in range(0, n_paths, chunk):
        n = min(chunk, n_paths - start)
        streams = np.arange(start, start + n, dtype=np.uint64)
        exact = np.full(n, float(x0))
        em = [np.full((n, 1), float(x0)) for _ in hs]
        ex = [np.full((n, 1), float(x0)) for _ in hs]
        acc_dw = [np.zeros(n) for _ in hs]
        for k in range(n_fine):
            g = kernels.normals(seed, streams, np.full(n, k, dtype=np.uint64), 2, _WEAK_TAG)
            dw = math.sqrt(h_f) * g[:, 0]
            exact = decay * exact + sigma * (b1 * dw + b2 * g[:, 1])
            for j, (h, r) in enumerate(zip(hs, ratios)):
                acc_dw[j] += dw
                if (k + 1) % r:
                    continue
                z = (acc_dw[j] / math.sqrt(h))[:, None]
                t = np.full(n, (k + 1 - r) * h_f)
                em[j] = em_proposal(em[j], t, h, z, spec)
                x1 = em_proposal(ex[j], t, h, z, spec)
                ex[j] = heun_proposal(ex[j], x1, t, h, z, spec)[1]
                acc_dw[j][:] = 0.0
        e2 = exact * exact
        for j in range(len(hs)):
            for key, arr in (("em", em[j]), ("extrapolated", ex[j])):
                diff = arr[:, 0] ** 2 - e2
                sums[key][j] += diff.sum()
                sq[key][j] += (diff * diff).sum()
    out = {}
    for key in sums:
        mean = sums[key] / n_paths
        var = sq[key] / n_paths - mean ** 2
        stderr = np.sqrt(np.maximum(var, 0.0) / n_paths)
        out[key] = WeakErrorResult(hs, mean, stderr, _loglog_slope(hs, mean))
    return out


def scheme_second_moment(lam, sigma, x0, T, h, extrapolated):
    """Exact E[X_T^2] of the (EM or extrapolated) recursion on the linear SDE."""
    n = int(round(T / h))
    if extrapolated:
        a = (1 + lam * h + 0.5 * (lam * h) ** 2) ** 2
        b = (1 + 0.5 * lam * h) ** 2 * sigma ** 2 * h
    else:
        a = (1 + lam * h) ** 2
        b = sigma ** 2 * h
    m = x0 * x0
    for _ in range(n):
        m = a * m + b
    return m


def exact_second_moment(lam, sigma, x0, T):
    e = math.exp(2 * lam * T)
    return x0 * x0 * e + sigma ** 2 / (2 * abs(lam)) * (1 - e)
