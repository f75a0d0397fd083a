import numpy as np
import pytest

from adaptsde.core import (
    ConfigError,
    DiffusionSpec,
    InstabilityError,
    NormOrder,
    RunReport,
    SolverConfig,
    StepLog,
    check_finite,
    image_abs_tolerance,
    make_rng,
)


def test_solver_config_defaults_and_coercion():
    cfg = SolverConfig(eps_abs=0.01, eps_rel=0.05, norm_order="linf")
    assert (cfg.r, cfg.theta, cfg.h_init) == (0.9, 0.9, 0.01)
    assert cfg.norm_order is NormOrder.LINF
    assert cfg.extrapolate and not cfg.retain_noise_on_reject


@pytest.mark.parametrize("kw", [
    {"eps_abs": 0.0}, {"eps_rel": -1.0}, {"theta": 0.0}, {"theta": 1.5}, {"r": 0.0},
    {"h_init": 0.0}, {"h_init": 2.0}, {"t_end": 0.0}, {"t_end": 1.0}, {"max_attempts": 0},
    {"norm_order": "l3"}, {"integrator": "rk4"},
])
def test_solver_config_rejects(kw):
    base = dict(eps_abs=0.01, eps_rel=0.05)
    base.update(kw)
    with pytest.raises(ConfigError):
        SolverConfig(**base)


@pytest.mark.parametrize("lo,hi,expected", [(-1, 1, 0.0078125), (0, 1, 0.00390625),
                                            (0, 256, 1.0)])
def test_image_abs_tolerance(lo, hi, expected):
    assert image_abs_tolerance(lo, hi) == expected


@pytest.mark.parametrize("lo,hi", [(1, 1), (2, 1), (0, float("inf")), (float("nan"), 1)])
def test_image_abs_tolerance_invalid(lo, hi):
    with pytest.raises(ConfigError):
        image_abs_tolerance(lo, hi)


def test_rng_determinism_and_streams():
    a, b = make_rng(7, 0), make_rng(7, 0)
    assert a.next() == b.next()
    assert a.next() == b.next()
    c = make_rng(7, 1)
    assert [make_rng(7, 0).next() for _ in range(1)] != [c.next()]


def test_rng_statistics():
    z = make_rng(11, 3).standard_normal(10**6)
    assert abs(z.mean()) < 4 / np.sqrt(1e6)
    assert abs(z.var() - 1) < 0.01


def test_diffusion_spec_shapes():
    spec = DiffusionSpec(drift=lambda x, t: -x, diffusion=lambda x, t: 2.0 * np.ones(len(t)),
                         dim=3)
    x = np.ones((5, 3))
    t = np.zeros(5)
    f, g = spec.drift_g(x, t)
    assert f.shape == (5, 3) and g.shape == (5, 1)
    with pytest.raises(ConfigError):
        DiffusionSpec(drift=None, diffusion=None, dim=0)


def test_check_finite_names_samples():
    x = np.zeros((4, 2))
    x[2, 1] = np.nan
    with pytest.raises(InstabilityError) as exc:
        check_finite(x, np.arange(10, 14), "here")
    assert list(exc.value.sample_ids) == [12]


def _log(ids):
    n = len(ids)
    return StepLog(np.asarray(ids), np.arange(n, dtype=float), np.ones(n), np.zeros(n),
                   np.ones(n, bool), np.arange(n))


def test_steplog_sorted_is_stable():
    lg = _log([2, 1, 2, 1]).sorted()
    assert lg.sample_id.tolist() == [1, 1, 2, 2]
    assert lg.t.tolist() == [1.0, 3.0, 0.0, 2.0]
    assert len(_log([3, 3, 4]).for_sample(3)) == 2
    assert len(StepLog.concat([])) == 0


def test_run_report_merge_and_nfe():
    def rep(n, nfe):
        return RunReport("x", np.zeros((n, 2)), np.full(n, nfe), np.ones(n, int),
                         np.zeros(n, int), np.ones(n, int), wall_time=1.0)
    m = RunReport.merge([rep(2, 5), rep(3, 7)])
    assert m.samples.shape == (5, 2)
    assert m.nfe == 2 * 5 + 3 * 7
    assert m.nfe_mean == pytest.approx(31 / 5)
    assert m.nfe_solver_mean == pytest.approx(31 / 5 - 1)
    assert m.wall_time == 2.0
