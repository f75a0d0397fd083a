"""Adaptive step-size extrapolated Euler-Maruyama.

Each attempted step builds an Euler-Maruyama proposal ``x_em`` and a
stochastic improved-Euler proposal ``x_heun`` from the same Gaussian draw.
Their difference, scaled by a mixed absolute/relative tolerance, drives
acceptance and the next step size; on acceptance the state moves to
``x_heun`` (extrapolation) or ``x_em``.

Samples carry their own clock and step size, so a batch is just many
independent solves advanced together.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import kernels
from .core import (
    BatchState,
    Direction,
    InstabilityError,
    Integrator,
    NoiseType,
    NormOrder,
    RunReport,
    SolverConfig,
    StepLog,
    StepSizeCollapse,
    ToleranceVariant,
    check_finite,
    stream_ids,
)
from .processes import denoise_tweedie, reverse_spec, sample_terminal_prior

# Philox tag for the Rademacher sign of the Ito correction term
_SIGN_TAG = 1


def _col(v, n):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 0:
        return np.full((n, 1), float(v))
    return v.reshape(-1, 1)


def _vec(v, n):
    v = np.asarray(v, dtype=np.float64)
    return np.full(n, float(v)) if v.ndim == 0 else v


def em_proposal(x, t, h, z, spec, s=0.0):
    """One Euler-Maruyama step of size ``h`` in the spec's time direction.

    ``s`` is the optional Rademacher shift of the noise (``z - s``); it is zero
    for additive noise.
    """
    x = np.atleast_2d(x)
    n = x.shape[0]
    tv, hv = _vec(t, n), _vec(h, n)
    sign = spec.direction.sign
    return (x + sign * hv[:, None] * spec.drift(x, tv)
            + np.sqrt(hv)[:, None] * spec.g(x, tv) * (z - s))


def heun_proposal(x, x_em, t, h, z, spec, s=0.0):
    """Stochastic improved-Euler stage; returns ``(x_tilde, x_heun)``.

    The drift and diffusion are re-evaluated at ``x_em`` and the end of the
    step, sharing the Gaussian draw ``z`` with the Euler-Maruyama stage.
    """
    x = np.atleast_2d(x)
    x_em = np.atleast_2d(x_em)
    n = x.shape[0]
    hv = _vec(h, n)
    sign = spec.direction.sign
    t1 = _vec(t, n) + sign * hv
    x_tilde = (x + sign * hv[:, None] * spec.drift(x_em, t1)
               + np.sqrt(hv)[:, None] * spec.g(x_em, t1) * (z + s))
    return x_tilde, 0.5 * (x_em + x_tilde)


def lamba_proposal(x, t, h, z, spec):
    """Drift-only improved-Euler pair: returns ``(x_em, x_heun)``.

    The error estimate compares explicit and improved Euler on the drift,
    with the noise increment added identically to both.
    """
    x = np.atleast_2d(x)
    n = x.shape[0]
    tv, hv = _vec(t, n), _vec(h, n)
    sign = spec.direction.sign
    h_col = hv[:, None]
    f0 = spec.drift(x, tv)
    noise = np.sqrt(h_col) * spec.g(x, tv) * z
    x_det = x + sign * h_col * f0
    f1 = spec.drift(x_det, tv + sign * hv)
    x_em = x_det + noise
    x_heun = x + sign * h_col * 0.5 * (f0 + f1) + noise
    return x_em, x_heun


def mixed_tolerance(x_em, x_prev, cfg: SolverConfig):
    """Element-wise max of the absolute and relative tolerances."""
    mag = np.abs(x_em)
    if cfg.tolerance_variant is ToleranceVariant.CURRENT_AND_PREVIOUS:
        mag = np.maximum(mag, np.abs(x_prev))
    return np.maximum(cfg.eps_abs, cfg.eps_rel * mag)


def scaled_error(x_em, x_heun, delta, norm_order=NormOrder.L2_SCALED):
    """RMS (or max) of ``(x_em - x_heun) / delta``, one value per sample row."""
    norm_order = NormOrder(norm_order)
    resid = (np.asarray(x_em) - np.asarray(x_heun)) / np.asarray(delta)
    single = resid.ndim == 1
    resid = np.atleast_2d(resid)
    if norm_order is NormOrder.LINF:
        out = np.max(np.abs(resid), axis=1)
    else:
        out = np.sqrt(np.sum(resid * resid, axis=1) / resid.shape[1])
    return float(out[0]) if single else out


def step_update(h, err, t_remaining, cfg: SolverConfig):
    """``min(t_remaining, theta * h * err**-r)``; zero error jumps to the cap."""
    h = np.asarray(h, dtype=np.float64)
    err = np.asarray(err, dtype=np.float64)
    t_remaining = np.asarray(t_remaining, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore"):
        grown = cfg.theta * h * np.power(err, -cfg.r)
    grown = np.where(err > 0, grown, np.inf)
    out = np.minimum(t_remaining, grown)
    return float(out) if out.ndim == 0 else out


def _pair(x, t, h, z, spec, s):
    """em_proposal + heun_proposal on already-shaped rows (same arithmetic)."""
    sign = spec.direction.sign
    hc = sign * h[:, None]
    sq = np.sqrt(h)[:, None]
    f0, g0 = spec.drift_g(x, t)
    x_em = x + hc * f0 + sq * g0 * (z - s)
    t1 = t + sign * h
    f1, g1 = spec.drift_g(x_em, t1)
    x_tilde = x + hc * f1 + sq * g1 * (z + s)
    return x_em, 0.5 * (x_em + x_tilde)


def _fused_error(x_em, x_heun, x_prev, cfg):
    prev = x_prev if cfg.tolerance_variant is ToleranceVariant.CURRENT_AND_PREVIOUS else None
    return kernels.scaled_error(x_em, x_heun, prev, cfg.eps_abs, cfg.eps_rel,
                                cfg.norm_order is NormOrder.LINF)


def _adaptive_loop(spec, state: BatchState, t_stop, cfg, seed, streams,
                   retain_noise, trace=False, trajectory=False):
    """Advance every active row of ``state`` to ``t_stop``.

    Returns per-sample (attempts, accepted) counts, an optional step log and
    optional accepted-state trajectories.
    """
    n, d = state.x.shape
    sign = spec.direction.sign
    attempts = np.zeros(n, dtype=np.int64)
    accepted = np.zeros(n, dtype=np.int64)
    # counter 0 of every stream is reserved for the initial (prior) draw
    noise_counter = np.ones(n, dtype=np.uint64)
    use_sign = (spec.noise_type is NoiseType.ITO and not spec.additive_noise)
    lamba = cfg.integrator is Integrator.LAMBA
    logs = []
    trajs = None
    if trajectory:
        trajs = [([float(state.t[i])], [state.x[i].copy()]) for i in range(n)]

    idx = np.flatnonzero(state.active)
    # every row starts together, so active rows have made exactly `it` attempts
    it = 0
    while idx.size:
        x = state.x[idx]
        t = state.t[idx]
        h = state.h[idx]
        ids = streams[idx]
        zc = noise_counter[idx]
        if retain_noise and state.noise_cache is not None:
            z = state.noise_cache[idx]
        else:
            z = kernels.normals(seed, ids, zc, d)
        if lamba:
            x_em, x_heun = lamba_proposal(x, t, h, z, spec)
        else:
            s = 0.0
            if use_sign:
                s = kernels.signs(seed, ids, attempts[idx].astype(np.uint64), _SIGN_TAG)[:, None]
            x_em, x_heun = _pair(x, t, h, z, spec, s)
        err = _fused_error(x_em, x_heun, state.x_prev_proposal[idx], cfg)
        # a non-finite entry in either proposal makes the scaled error non-finite
        if not np.isfinite(err).all():
            check_finite(x_em, streams[idx], "Euler-Maruyama proposal")
            check_finite(x_heun, streams[idx], "improved-Euler proposal")
            raise InstabilityError(f"non-finite local error for samples "
                                   f"{streams[idx][~np.isfinite(err)][:10].tolist()}",
                                   streams[idx][~np.isfinite(err)])

        ok = err <= 1.0
        remaining = np.abs(t - t_stop)
        t_new = np.where(h >= remaining, t_stop, t + sign * h)
        acc = idx[ok]
        state.x[acc] = x_heun[ok] if cfg.extrapolate else x_em[ok]
        state.t[acc] = t_new[ok]
        state.x_prev_proposal[acc] = x_em[ok]

        remaining = np.abs(state.t[idx] - t_stop)
        with np.errstate(divide="ignore", over="ignore"):
            grown = cfg.theta * h * err ** -cfg.r
        grown[err <= 0] = np.inf
        state.h[idx] = np.minimum(remaining, grown)
        attempts[idx] += 1
        accepted[acc] += 1

        if retain_noise:
            if state.noise_cache is None:
                state.noise_cache = np.zeros((n, d))
            state.noise_cache[idx] = z
            state.noise_cache[acc] = kernels.normals(seed, streams[acc],
                                                     noise_counter[acc] + 1, d)
            noise_counter[acc] += 1
        else:
            noise_counter[idx] += 1

        if trace:
            logs.append(StepLog(sample_id=ids.astype(np.int64), t=t, h=h, error=err,
                                accepted=ok, noise_id=zc.astype(np.int64)))
        if trajs is not None:
            for j in np.flatnonzero(ok):
                i = idx[j]
                trajs[i][0].append(float(state.t[i]))
                trajs[i][1].append(state.x[i].copy())

        it += 1
        if it >= cfg.max_attempts:
            bad = idx[attempts[idx] >= cfg.max_attempts]
            raise StepSizeCollapse(
                f"step-size collapse: samples {streams[bad][:10].tolist()} exceeded "
                f"{cfg.max_attempts} attempts")
        state.active[idx] = remaining > 0
        idx = idx[remaining > 0]

    log = StepLog.concat(logs) if trace else None
    return attempts, accepted, log, trajs


def _partitions(n, threads):
    threads = max(1, min(int(threads), n)) if n else 1
    bounds = np.linspace(0, n, threads + 1).astype(int)
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a] or [(0, 0)]


def run_partitioned(fn, n, threads, stream_offset=0):
    """Run ``fn(start, stop)`` over contiguous sample ranges and merge reports."""
    parts = _partitions(n, threads)
    if len(parts) == 1:
        return fn(*parts[0])
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        reports = list(pool.map(lambda ab: fn(*ab), parts))
    return RunReport.merge(reports)


def solve_reverse(process, score, cfg: SolverConfig, n_samples=None, x_init=None,
                  seed=0, stream_offset=0, trace=False, threads=1,
                  tweedie="kernel", denoise=True) -> RunReport:
    """Generate samples by integrating the reverse process from t=1 to ``cfg.t_end``.

    Sample ``i`` uses RNG stream ``stream_offset + i``: its prior draw is
    counter 0 and its step noise uses counters 1, 2, ... so any partition of
    the batch reproduces the same per-sample trajectories.
    """
    if x_init is not None:
        x_init = np.atleast_2d(np.asarray(x_init, dtype=np.float64))
        n_samples = x_init.shape[0]
    spec = reverse_spec(process, score)
    d = spec.dim

    def run(start, stop):
        t0 = time.perf_counter()
        streams = stream_ids(stop - start, stream_offset + start)
        if x_init is None:
            x = sample_terminal_prior(process, stop - start, d, seed, streams)
        else:
            x = x_init[start:stop]
        state = BatchState.start(x, 1.0, cfg.h_init, cfg.t_end)
        attempts, accepted, log, _ = _adaptive_loop(
            spec, state, cfg.t_end, cfg, seed, streams,
            retain_noise=cfg.retain_noise_on_reject, trace=trace)
        nfe = 2 * attempts
        den = np.zeros(stop - start, dtype=np.int64)
        out = state.x
        if denoise and out.shape[0]:
            out = denoise_tweedie(out, cfg.t_end, score, process, tweedie)
            den += 1
        return RunReport(
            method="adaptive", samples=out, nfe_per_sample=nfe + den,
            steps_accepted=accepted, steps_rejected=attempts - accepted,
            denoise_evals=den, wall_time=time.perf_counter() - t0,
            t_final=state.t, log=log)

    return run_partitioned(run, n_samples, threads)


def solve_forward_general(x0, t_begin, t_end, spec, cfg: SolverConfig, seed=0,
                          stream_offset=0, trace=False) -> RunReport:
    """Forward-time adaptive solve of a general SDE with full trajectories.

    The Gaussian draw is kept after a rejection and refreshed only after an
    acceptance. For Ito noise that depends on the state, a Rademacher sign
    ``s`` shifts the draws to ``z - s`` and ``z + s``; otherwise ``s = 0``.
    ``spec.direction`` must be forward. The x0 rows are consumed as-is;
    noise for row ``i`` comes from stream ``stream_offset + i`` starting at
    counter 1.
    """
    if spec.direction is not Direction.FORWARD:
        raise ValueError("solve_forward_general needs a forward-time spec")
    if not t_begin < t_end:
        raise ValueError("t_begin must be < t_end")
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    n, d = x0.shape
    t0 = time.perf_counter()
    streams = stream_ids(n, stream_offset)
    state = BatchState.start(x0, t_begin, cfg.h_init, t_end)
    state.noise_cache = kernels.normals(seed, streams, np.ones(n, dtype=np.uint64), d)
    attempts, accepted, log, trajs = _adaptive_loop(
        spec, state, t_end, cfg, seed, streams, retain_noise=True, trace=trace,
        trajectory=True)
    trajectories = [(np.array(ts), np.array(xs)) for ts, xs in trajs]
    # each attempt evaluates drift (and diffusion) at two points
    return RunReport(
        method="adaptive-forward", samples=state.x, nfe_per_sample=2 * attempts,
        steps_accepted=accepted, steps_rejected=attempts - accepted,
        denoise_evals=np.zeros(n, dtype=np.int64), wall_time=time.perf_counter() - t0,
        t_final=state.t, log=log, trajectories=trajectories)
