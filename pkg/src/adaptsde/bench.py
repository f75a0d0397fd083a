"""Experiment drivers shared by the CLI and the acceptance suite."""

from __future__ import annotations

import numpy as np

from .adaptive import solve_reverse
from .baselines import em_solve, ode_probability_flow, pc_solve
from .config import ExperimentConfig
from .metrics import GaussianSummary, empirical_gaussian_summary, sliced_w2, w2_gaussian_diag
from .stability import (
    LinearTestSpec,
    empirical_moments,
    h_limit_extrapolation,
    stability_grid,
)


class Problem:
    """Process, data model and score built once from a config."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.process = cfg.build_process()
        self.model = cfg.build_model()
        self.score = cfg.build_score()
        mean, var = self.model.moments(cfg.t_end, self.process)
        self.target = GaussianSummary(mean, var)
        self._ref = None

    def reference(self):
        """Exact draws from p_{t_end}, seeded independently of the solver streams."""
        if self._ref is None:
            rng = np.random.default_rng([self.cfg.seed, 1])
            self._ref = self.model.sample(self.cfg.n_samples, self.cfg.t_end, self.process, rng)
        return self._ref

    def quality(self, samples, n_projections=64):
        w2 = w2_gaussian_diag(empirical_gaussian_summary(samples), self.target)
        sw = sliced_w2(samples, self.reference(), n_projections,
                       rng=np.random.default_rng([self.cfg.seed, 2]))
        return w2, sw


def run_method(cfg: ExperimentConfig, method, problem=None, threads=None, trace=False,
               solver_overrides=None, n_steps=None):
    problem = problem or Problem(cfg)
    threads = threads or cfg.threads_or_default()
    common = dict(n_samples=cfg.n_samples, seed=cfg.seed, threads=threads,
                  tweedie=cfg.tweedie)
    if method == "adaptive":
        scfg = cfg.solver_config(**(solver_overrides or {}))
        return solve_reverse(problem.process, problem.score, scfg, trace=trace, **common)
    if method == "em":
        steps = n_steps or cfg.em_steps()
        return em_solve(problem.process, problem.score, steps, cfg.t_end, **common)
    if method == "pc":
        pc = cfg.pc_config()
        if n_steps:
            pc = type(pc)(n_steps, pc.corrector_steps_per_predictor, pc.corrector_step_scale)
        return pc_solve(problem.process, problem.score, pc, cfg.t_end, **common)
    if method == "ode":
        return ode_probability_flow(problem.process, problem.score, cfg.ode_config(), **common)
    raise ValueError(f"unknown method {method!r}")


def _row(label, eps, report, problem, n_proj, timing):
    w2, sw = problem.quality(report.samples, n_proj)
    return (label, eps, report.nfe_mean, w2, sw, int(report.steps_accepted.sum()),
            int(report.steps_rejected.sum()), report.wall_time if timing else 0.0)


def benchmark_rows(cfg: ExperimentConfig, threads=None, timing=True):
    """Adaptive runs per eps_rel, each followed by EM with the same mean NFE, then baselines."""
    problem = Problem(cfg)
    b = cfg.benchmark
    rows = []
    for eps in b.eps_rel:
        eps = float(eps)
        rep = run_method(cfg, "adaptive", problem, threads, solver_overrides={"eps_rel": eps})
        rows.append(_row("adaptive", eps, rep, problem, b.n_projections, timing))
        matched = max(1, int(round(rep.nfe_solver_mean)))
        em = run_method(cfg, "em", problem, threads, n_steps=matched)
        rows.append(_row("em_matched", eps, em, problem, b.n_projections, timing))
    for name in b.baselines:
        rep = run_method(cfg, name, problem, threads,
                         n_steps=b.em_steps if name == "em" else None)
        rows.append(_row(name, None, rep, problem, b.n_projections, timing))
    return rows


ABLATIONS = (
    ("baseline", {}),
    ("tolerance_variant=current", {"tolerance_variant": "current"}),
    ("extrapolate=off", {"extrapolate": False}),
    ("norm_order=linf", {"norm_order": "linf"}),
    ("integrator=lamba", {"integrator": "lamba"}),
)


def ablation_settings(cfg: ExperimentConfig):
    out = list(ABLATIONS)
    out += [(f"r={float(r):g}", {"r": float(r)}) for r in cfg.ablation.r_values]
    return out


def ablation_rows(cfg: ExperimentConfig, threads=None, timing=True, settings=None):
    problem = Problem(cfg)
    eps = float(cfg.ablation.eps_rel)
    rows = []
    for label, over in settings or ablation_settings(cfg):
        rep = run_method(cfg, "adaptive", problem, threads,
                         solver_overrides={"eps_rel": eps, **over})
        rows.append(_row(label, eps, rep, problem, cfg.benchmark.n_projections, timing))
    return rows


def stability_rows(cfg: ExperimentConfig):
    """Grid rows plus the step-size sweep used for the h -> 0 limit."""
    s = cfg.stability
    rows = stability_grid(s.lams, s.hs, s.sigma, s.n_paths, s.n_steps, cfg.seed, s.y0)
    sweep = []
    for h in s.limit_hs:
        spec = LinearTestSpec(float(s.limit_lam), s.sigma, float(h))
        est = empirical_moments(spec, s.limit_paths, s.limit_steps, cfg.seed)
        sweep.append((float(s.limit_lam), float(h), spec.factor, est))
    intercept = h_limit_extrapolation([r[1] for r in sweep],
                                      [r[3].second_moment for r in sweep])
    limit = (float(s.limit_lam), float(s.sigma), intercept,
             s.sigma ** 2 / (2 * abs(float(s.limit_lam))))
    return rows, sweep, limit
