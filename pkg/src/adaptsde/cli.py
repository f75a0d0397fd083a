"""Command-line entry point: ``adaptsde {solve,benchmark,ablate,stability}``.

Exit codes: 0 ok, 2 configuration error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import kernels
from .bench import Problem, ablation_rows, benchmark_rows, run_method, stability_rows
from .config import METHODS, ExperimentConfig
from .core import ConfigError, SolverError
from .outputs import (
    RESULT_COLUMNS,
    STABILITY_COLUMNS,
    write_csv,
    write_report,
    write_samples,
    write_trace,
)
from .stability import LinearTestSpec, classify_divergence, stationary_moments_analytic

log = logging.getLogger("adaptsde")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _eps_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty eps_rel list")
    return vals


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}")
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="adaptsde",
                                description="Adaptive reverse-diffusion SDE sampler toolkit.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment config")
    common.add_argument("--seed", type=_seed, help="override the config seed")
    common.add_argument("--threads", type=int, help="worker threads (default: available cores)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--method", help="solver: " + ", ".join(METHODS))
    common.add_argument("--eps-rel", type=_eps_list, help="relative tolerance(s), comma separated")
    common.add_argument("--steps", type=int, help="fixed step count for em / pc")
    common.add_argument("--n-samples", type=int, help="number of samples")
    common.add_argument("--trace", action="store_true", help="write per-step NDJSON trace")
    common.add_argument("--no-timing", action="store_true",
                        help="write 0 for wall times so outputs are byte-reproducible")
    common.add_argument("-v", "--verbose", action="store_true")
    for name, help_ in (("solve", "run one method and write samples"),
                        ("benchmark", "adaptive vs NFE-matched EM and baselines"),
                        ("ablate", "adaptive solver ablation grid"),
                        ("stability", "linear test equation stability lab")):
        sub.add_parser(name, parents=[common], help=help_)
    return p


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_dict({})
    d = cfg.to_dict()
    if args.seed is not None:
        d["seed"] = args.seed
    if args.threads is not None:
        d["threads"] = args.threads
    if args.out is not None:
        d["out"] = str(args.out)
    if args.method is not None:
        d["method"] = args.method
    if args.n_samples is not None:
        d["n_samples"] = args.n_samples
    if args.trace:
        d["trace"] = True
    if args.eps_rel is not None:
        if args.command == "benchmark":
            d["benchmark"]["eps_rel"] = args.eps_rel
        elif args.command == "ablate":
            d["ablation"]["eps_rel"] = args.eps_rel[0]
        else:
            d["solver"]["eps_rel"] = args.eps_rel[0]
    if args.steps is not None:
        d["em"]["n_steps"] = args.steps
        d["pc"]["n_predictor_steps"] = args.steps
        d["benchmark"]["em_steps"] = args.steps
    return ExperimentConfig.from_dict(d)


def cmd_solve(cfg: ExperimentConfig, out: Path, timing=True) -> int:
    problem = Problem(cfg)
    report = run_method(cfg, cfg.method, problem, trace=cfg.trace and cfg.method == "adaptive")
    w2, sw = problem.quality(report.samples, cfg.benchmark.n_projections)
    write_samples(out / "samples.bin", report.samples)
    write_report(out / "report.yaml", report, {"w2": w2, "sliced_w2": sw}, timing=timing)
    if report.log is not None:
        write_trace(out / "trace.ndjson", report.log)
    log.info("%s: mean NFE %.2f, W2 %.4g", report.method, report.nfe_mean, w2)
    return EXIT_OK


def cmd_benchmark(cfg: ExperimentConfig, out: Path, timing=True) -> int:
    rows = benchmark_rows(cfg, timing=timing)
    write_csv(out / "benchmark.csv", RESULT_COLUMNS, rows)
    return EXIT_OK


def cmd_ablate(cfg: ExperimentConfig, out: Path, timing=True) -> int:
    rows = ablation_rows(cfg, timing=timing)
    write_csv(out / "ablation.csv", RESULT_COLUMNS, rows)
    return EXIT_OK


def cmd_stability(cfg: ExperimentConfig, out: Path, timing=True) -> int:
    grid, sweep, limit = stability_rows(cfg)
    rows = list(grid)
    for lam, h, _, est in sweep:
        spec = LinearTestSpec(lam, cfg.stability.sigma, h)
        analytic = stationary_moments_analytic(spec)[1] if spec.stable else float("nan")
        rows.append((lam, h, analytic, est.second_moment, est.second_moment_ci,
                     spec.stable, classify_divergence(est, 0.0)))
    write_csv(out / "stability.csv", STABILITY_COLUMNS, rows)
    write_csv(out / "stability_limit.csv", ("lam", "sigma", "intercept", "analytic_limit"),
              [limit])
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "benchmark": cmd_benchmark, "ablate": cmd_ablate,
            "stability": cmd_stability}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    log.info("kernel backend: %s", kernels.BACKEND)
    try:
        return COMMANDS[args.command](cfg, out, timing=not args.no_timing)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
