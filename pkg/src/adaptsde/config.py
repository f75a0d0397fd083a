"""Experiment configuration: a YAML document with typed sections.

Every section is validated by building the objects it describes (process,
solver settings, data model) before any compute starts. Unknown keys are
errors so typos do not silently fall back to defaults.

Example::

    seed: 0
    n_samples: 4096
    dim: 64
    method: adaptive
    process: {name: vp, beta_min: 0.1, beta_max: 20.0}
    data: {kind: gaussian, seed: 0}
    solver: {eps_abs: 0.0078125, eps_rel: 0.01}
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .baselines import PCConfig, default_ode_config
from .core import ConfigError, SolverConfig
from .oracles import AnalyticScore, GaussianDataModel, MixtureDataModel
from .processes import make_process

METHODS = ("adaptive", "em", "pc", "ode")
TWEEDIE = ("kernel", "fixed", "sigma_min")


def _default_cores():
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity")
               else os.cpu_count() or 1)


@dataclass
class ProcessSection:
    name: str = "vp"
    params: dict = field(default_factory=dict)

    def build(self):
        try:
            return make_process(self.name, **self.params)
        except TypeError as exc:
            raise ConfigError(f"bad process parameters for {self.name!r}: {exc}") from None

    def to_dict(self):
        return {"name": self.name, **self.params}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        return cls(name=str(d.pop("name", "vp")), params=d)


@dataclass
class DataSection:
    kind: str = "gaussian"
    seed: int = 0
    # gaussian: mu0 ~ N(0, mean_scale^2), var0 ~ U(var_min, var_max)
    mean_scale: float = 1.0
    var_min: float = 0.5
    var_max: float = 2.0
    # mixture: component means ~ U(-mean_range, mean_range)
    n_components: int = 4
    mean_range: float = 0.6

    def build(self, dim):
        rng = np.random.default_rng(self.seed)
        if not 0 < self.var_min <= self.var_max:
            raise ConfigError("data variances need 0 < var_min <= var_max")
        if self.kind == "gaussian":
            mu0 = self.mean_scale * rng.standard_normal(dim)
            return GaussianDataModel(mu0, rng.uniform(self.var_min, self.var_max, dim))
        if self.kind == "mixture":
            k = self.n_components
            if k < 1:
                raise ConfigError("n_components must be >= 1")
            means = rng.uniform(-self.mean_range, self.mean_range, (k, dim))
            var = rng.uniform(self.var_min, self.var_max, (k, dim))
            return MixtureDataModel(np.full(k, 1.0 / k), means, var)
        raise ConfigError(f"unknown data kind {self.kind!r}; valid: gaussian, mixture")


@dataclass
class BenchmarkSection:
    eps_rel: list = field(default_factory=lambda: [0.01, 0.02, 0.05, 0.1, 0.5])
    baselines: list = field(default_factory=lambda: ["em", "ode"])
    em_steps: int = 1000
    n_projections: int = 64


@dataclass
class AblationSection:
    eps_rel: float = 0.05
    r_values: list = field(default_factory=lambda: [0.5, 0.8, 0.9, 1.0])


@dataclass
class StabilitySection:
    lams: list = field(default_factory=lambda: [-0.5 * k for k in range(1, 11)])
    hs: list = field(default_factory=lambda: [k / 8 for k in range(1, 11)])
    sigma: float = 1.0
    y0: float = 1.0
    n_paths: int = 2000
    n_steps: int = 1000
    limit_lam: float = -1.0
    limit_hs: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    limit_paths: int = 100_000
    limit_steps: int = 1000


_SECTIONS = {"data": DataSection, "benchmark": BenchmarkSection,
             "ablation": AblationSection, "stability": StabilitySection}


def _section_from(cls, d, where):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ConfigError(f"section {where!r} must be a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"unknown keys in {where!r}: {', '.join(unknown)}")
    return cls(**d)


@dataclass
class ExperimentConfig:
    seed: int = 0
    n_samples: int = 4096
    dim: int = 64
    method: str = "adaptive"
    threads: Optional[int] = None
    out: str = "out"
    trace: bool = False
    tweedie: str = "kernel"
    t_end: float = 1e-3
    process: ProcessSection = field(default_factory=ProcessSection)
    data: DataSection = field(default_factory=DataSection)
    solver: dict = field(default_factory=lambda: {"eps_abs": 0.0078125, "eps_rel": 0.01})
    em: dict = field(default_factory=lambda: {"n_steps": 1000})
    pc: dict = field(default_factory=dict)
    ode: dict = field(default_factory=dict)
    benchmark: BenchmarkSection = field(default_factory=BenchmarkSection)
    ablation: AblationSection = field(default_factory=AblationSection)
    stability: StabilitySection = field(default_factory=StabilitySection)

    # -- construction -----------------------------------------------------
    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        if d is None:
            d = {}
        if not isinstance(d, dict):
            raise ConfigError("config document must be a mapping")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kw = {}
        for k, v in d.items():
            if k == "process":
                if not isinstance(v, dict):
                    raise ConfigError("section 'process' must be a mapping")
                kw[k] = ProcessSection.from_dict(v)
            elif k in _SECTIONS:
                kw[k] = _section_from(_SECTIONS[k], v, k)
            elif k in ("solver", "em", "pc", "ode"):
                if v is not None and not isinstance(v, dict):
                    raise ConfigError(f"section {k!r} must be a mapping")
                # partial sections override the defaults key by key
                default = next(f for f in dataclasses.fields(cls) if f.name == k).default_factory()
                kw[k] = {**default, **(v or {})}
            else:
                kw[k] = v
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                doc = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, ProcessSection):
                v = v.to_dict()
            elif dataclasses.is_dataclass(v):
                v = dataclasses.asdict(v)
            elif isinstance(v, dict):
                v = dict(v)
            out[f.name] = v
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def replace(self, **changes) -> "ExperimentConfig":
        return ExperimentConfig.from_dict({**self.to_dict(), **changes})

    # -- validation and builders -----------------------------------------
    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; valid methods: "
                              + ", ".join(METHODS))
        if self.tweedie not in TWEEDIE:
            raise ConfigError(f"tweedie must be one of: {', '.join(TWEEDIE)}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an integer in [0, 2^64)")
        for name in ("n_samples", "dim"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.threads is not None and (not isinstance(self.threads, int) or self.threads < 1):
            raise ConfigError("threads must be a positive integer")
        if not 0 < self.t_end < 1:
            raise ConfigError("t_end must lie in (0, 1)")
        self.build_process()
        self.build_model()
        self.solver_config()
        self.em_steps()
        self.pc_config()
        self.ode_config()
        b = self.benchmark
        if not b.eps_rel or any(float(e) < 0 for e in b.eps_rel):
            raise ConfigError("benchmark.eps_rel must be a non-empty list of values >= 0")
        bad = [m for m in b.baselines if m not in ("em", "pc", "ode")]
        if bad:
            raise ConfigError(f"unknown benchmark baselines {bad}; valid: em, pc, ode")
        if b.em_steps < 1 or b.n_projections < 1:
            raise ConfigError("benchmark.em_steps and n_projections must be >= 1")
        for r in self.ablation.r_values:
            self.solver_config(r=float(r))
        s = self.stability
        if len(s.limit_hs) < 2:
            raise ConfigError("stability.limit_hs needs at least two step sizes")
        if s.n_paths < 2 or s.limit_paths < 2 or s.n_steps < 2 or s.limit_steps < 1:
            raise ConfigError("stability path and step counts are too small")
        if any(float(h) <= 0 for h in list(s.hs) + list(s.limit_hs)):
            raise ConfigError("stability step sizes must be > 0")

    def threads_or_default(self) -> int:
        return self.threads if self.threads is not None else _default_cores()

    def build_process(self):
        return self.process.build()

    def build_model(self):
        return self.data.build(self.dim)

    def build_score(self):
        return AnalyticScore(self.build_model(), self.build_process())

    def solver_config(self, **overrides) -> SolverConfig:
        kw = {"t_end": self.t_end, **self.solver, **overrides}
        try:
            return SolverConfig(**kw)
        except TypeError as exc:
            raise ConfigError(f"bad solver settings: {exc}") from None

    def em_steps(self) -> int:
        unknown = set(self.em) - {"n_steps"}
        if unknown:
            raise ConfigError(f"unknown keys in 'em': {', '.join(sorted(unknown))}")
        n = self.em.get("n_steps", 1000)
        if not isinstance(n, int) or n < 1:
            raise ConfigError("em.n_steps must be a positive integer")
        return n

    def pc_config(self) -> PCConfig:
        try:
            return PCConfig(**self.pc)
        except TypeError as exc:
            raise ConfigError(f"bad pc settings: {exc}") from None

    def ode_config(self) -> SolverConfig:
        unknown = set(self.ode) - {"eps_abs", "eps_rel"}
        if unknown:
            raise ConfigError(f"unknown keys in 'ode': {', '.join(sorted(unknown))}")
        return default_ode_config(t_end=self.t_end, **self.ode)
