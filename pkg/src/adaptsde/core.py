"""Shared types: diffusion specs, solver configuration, batch state, RNG streams
and run reports."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels


class ConfigError(ValueError):
    """Raised when a configuration value violates its documented range."""


class SolverError(RuntimeError):
    """Base class for numerical aborts inside a solver run."""


class InstabilityError(SolverError):
    def __init__(self, message, sample_ids=()):
        super().__init__(message)
        self.sample_ids = tuple(int(i) for i in sample_ids)


class StepSizeCollapse(SolverError):
    pass


class Direction(enum.Enum):
    REVERSE = "reverse"
    FORWARD = "forward"

    @property
    def sign(self) -> float:
        return -1.0 if self is Direction.REVERSE else 1.0


class NoiseType(enum.Enum):
    ITO = "ito"
    STRATONOVICH = "stratonovich"


class NormOrder(enum.Enum):
    L2_SCALED = "l2"
    LINF = "linf"


class ToleranceVariant(enum.Enum):
    CURRENT_ONLY = "current"
    CURRENT_AND_PREVIOUS = "current_and_previous"


class Integrator(enum.Enum):
    STOCHASTIC_HEUN = "heun"
    # deterministic improved-Euler error estimate on the drift only
    LAMBA = "lamba"


@dataclass(frozen=True)
class DiffusionSpec:
    """Drift/diffusion pair, evaluated on batches.

    ``drift(x, t)`` takes ``x`` of shape ``(n, d)`` and ``t`` of shape ``(n,)``
    and returns ``(n, d)``. ``diffusion(x, t)`` returns ``(n,)`` for isotropic
    noise or ``(n, d)`` for diagonal state-dependent noise.

    For ``Direction.REVERSE`` the drift is the reverse-process drift written
    in forward-time convention, so one step of size ``h`` is
    ``x - h * drift(x, t) + sqrt(h) * g * z`` and the clock decreases.
    """

    drift: Callable[[np.ndarray, np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dim: int
    direction: Direction = Direction.REVERSE
    noise_type: NoiseType = NoiseType.ITO
    additive_noise: bool = True
    # optional fused evaluation returning (drift, diffusion) in one call
    drift_and_diffusion: Optional[Callable] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError(f"dim must be positive, got {self.dim}")

    def drift_g(self, x, t):
        """``(drift(x, t), g(x, t))``, using the fused callable when present."""
        if self.drift_and_diffusion is None:
            return self.drift(x, t), self.g(x, t)
        f, g = self.drift_and_diffusion(x, t)
        return f, self._shape_g(g, x)

    def g(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Diffusion broadcastable against ``x``."""
        return self._shape_g(self.diffusion(x, t), x)

    @staticmethod
    def _shape_g(g, x):
        g = np.asarray(g, dtype=np.float64)
        if g.ndim == 0:
            return np.full((x.shape[0], 1), float(g))
        if g.ndim == 1:
            return g[:, None]
        return g


@dataclass(frozen=True)
class SolverConfig:
    eps_abs: float
    eps_rel: float
    r: float = 0.9
    theta: float = 0.9
    h_init: float = 0.01
    norm_order: NormOrder = NormOrder.L2_SCALED
    tolerance_variant: ToleranceVariant = ToleranceVariant.CURRENT_AND_PREVIOUS
    extrapolate: bool = True
    t_end: float = 1e-3
    retain_noise_on_reject: bool = False
    integrator: Integrator = Integrator.STOCHASTIC_HEUN
    max_attempts: int = 10**6

    def __post_init__(self):
        checks = [
            (self.eps_abs > 0, "eps_abs must be > 0"),
            (self.eps_rel >= 0, "eps_rel must be >= 0"),
            (0 < self.theta <= 1, "theta must lie in (0, 1]"),
            (self.r > 0, "r must be > 0"),
            (0 < self.h_init <= 1, "h_init must lie in (0, 1]"),
            (0 < self.t_end < 1, "t_end must lie in (0, 1)"),
            (self.max_attempts >= 1, "max_attempts must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        for name, kind in (("norm_order", NormOrder),
                           ("tolerance_variant", ToleranceVariant),
                           ("integrator", Integrator)):
            value = getattr(self, name)
            if not isinstance(value, kind):
                try:
                    object.__setattr__(self, name, kind(value))
                except ValueError:
                    valid = ", ".join(m.value for m in kind)
                    raise ConfigError(f"{name} must be one of: {valid}") from None


@dataclass
class BatchState:
    """Per-sample solver state. Rows are samples, stored contiguously."""

    x: np.ndarray
    x_prev_proposal: np.ndarray
    t: np.ndarray
    h: np.ndarray
    active: np.ndarray
    noise_cache: Optional[np.ndarray] = None

    @classmethod
    def start(cls, x, t0: float, h_init: float, t_stop: float) -> "BatchState":
        x = np.array(x, dtype=np.float64, order="C", ndmin=2)
        n = x.shape[0]
        remaining = abs(t0 - t_stop)
        return cls(
            x=x,
            x_prev_proposal=x.copy(),
            t=np.full(n, float(t0)),
            h=np.full(n, min(h_init, remaining)),
            active=np.full(n, remaining > 0),
        )


@dataclass
class RngStream:
    """Counter-based normal stream (Philox4x32-10 keyed by the seed).

    Each draw event consumes one counter value; the values it produces depend
    only on ``(seed, stream_id, counter)``.
    """

    seed: int
    stream_id: int
    counter: int = 0

    def standard_normal(self, size: int = 1) -> np.ndarray:
        z = kernels.normals(self.seed, np.array([self.stream_id], dtype=np.uint64),
                            np.array([self.counter], dtype=np.uint64), size)[0]
        self.counter += 1
        return z

    def next(self) -> float:
        return float(self.standard_normal(1)[0])


def make_rng(seed: int, stream_id: int) -> RngStream:
    return RngStream(seed=int(seed), stream_id=int(stream_id))


def image_abs_tolerance(y_min: float, y_max: float) -> float:
    """Absolute tolerance of one 8-bit colour level for data in ``[y_min, y_max]``."""
    if not (math.isfinite(y_min) and math.isfinite(y_max)) or y_max <= y_min:
        raise ConfigError(f"invalid data range [{y_min}, {y_max}]")
    return (y_max - y_min) / 256.0


@dataclass
class StepLog:
    sample_id: np.ndarray
    t: np.ndarray
    h: np.ndarray
    error: np.ndarray
    accepted: np.ndarray
    noise_id: np.ndarray

    @classmethod
    def empty(cls) -> "StepLog":
        return cls(*(np.empty(0, dtype=dt) for dt in
                     (np.int64, float, float, float, bool, np.int64)))

    @classmethod
    def concat(cls, logs) -> "StepLog":
        logs = list(logs)
        if not logs:
            return cls.empty()
        return cls(*(np.concatenate([getattr(lg, f) for lg in logs])
                     for f in ("sample_id", "t", "h", "error", "accepted", "noise_id")))

    def __len__(self):
        return len(self.sample_id)

    def for_sample(self, i: int) -> "StepLog":
        m = self.sample_id == i
        return StepLog(self.sample_id[m], self.t[m], self.h[m], self.error[m],
                       self.accepted[m], self.noise_id[m])

    def sorted(self) -> "StepLog":
        # stable: per-sample chronological order is preserved
        order = np.argsort(self.sample_id, kind="stable")
        return StepLog(*(getattr(self, f)[order] for f in
                         ("sample_id", "t", "h", "error", "accepted", "noise_id")))


@dataclass
class RunReport:
    method: str
    samples: np.ndarray
    nfe_per_sample: np.ndarray
    steps_accepted: np.ndarray
    steps_rejected: np.ndarray
    denoise_evals: np.ndarray
    wall_time: float = 0.0
    t_final: Optional[np.ndarray] = None
    log: Optional[StepLog] = None
    trajectories: Optional[list] = field(default=None, repr=False)

    @property
    def nfe(self) -> int:
        """Total score evaluations, summed over samples (denoising included)."""
        return int(self.nfe_per_sample.sum())

    @property
    def nfe_mean(self) -> float:
        return float(self.nfe_per_sample.mean()) if len(self.nfe_per_sample) else 0.0

    @property
    def nfe_solver_mean(self) -> float:
        """Mean per-sample evaluations excluding the denoising step."""
        if not len(self.nfe_per_sample):
            return 0.0
        return float((self.nfe_per_sample - self.denoise_evals).mean())

    @property
    def attempts(self) -> np.ndarray:
        return self.steps_accepted + self.steps_rejected

    @classmethod
    def merge(cls, reports) -> "RunReport":
        reports = list(reports)
        logs = [r.log for r in reports if r.log is not None]
        trajs = None
        if any(r.trajectories is not None for r in reports):
            trajs = [tr for r in reports for tr in (r.trajectories or [])]
        t_final = None
        if all(r.t_final is not None for r in reports):
            t_final = np.concatenate([r.t_final for r in reports])
        return cls(
            method=reports[0].method,
            samples=np.concatenate([r.samples for r in reports]),
            nfe_per_sample=np.concatenate([r.nfe_per_sample for r in reports]),
            steps_accepted=np.concatenate([r.steps_accepted for r in reports]),
            steps_rejected=np.concatenate([r.steps_rejected for r in reports]),
            denoise_evals=np.concatenate([r.denoise_evals for r in reports]),
            wall_time=sum(r.wall_time for r in reports),
            t_final=t_final,
            log=StepLog.concat(logs) if logs else None,
            trajectories=trajs,
        )


def stream_ids(n: int, offset: int = 0) -> np.ndarray:
    return np.arange(offset, offset + n, dtype=np.uint64)


def check_finite(x: np.ndarray, ids: np.ndarray, where: str) -> None:
    bad = ~np.isfinite(x).all(axis=1)
    if bad.any():
        raise InstabilityError(
            f"non-finite state in {where} for samples {ids[bad][:10].tolist()}",
            ids[bad],
        )
