"""Adaptive step-size extrapolated Euler-Maruyama for reverse diffusion sampling."""

from .adaptive import solve_forward_general, solve_reverse
from .baselines import PCConfig, em_solve, ode_probability_flow, pc_solve
from .core import (
    ConfigError,
    DiffusionSpec,
    Direction,
    InstabilityError,
    Integrator,
    NoiseType,
    NormOrder,
    RunReport,
    SolverConfig,
    SolverError,
    StepSizeCollapse,
    ToleranceVariant,
)
from .kernels import BACKEND
from .metrics import GaussianSummary, empirical_gaussian_summary, sliced_w2, w2_gaussian_diag
from .oracles import AnalyticScore, CountingScore, GaussianDataModel, MixtureDataModel
from .processes import VEProcess, VPProcess

__version__ = "0.1.0"
