import numpy as np
import pytest

from adaptsde.core import ConfigError
from adaptsde.oracles import (
    AnalyticScore,
    GaussianDataModel,
    MixtureDataModel,
    counting_wrapper,
    gaussian_score_ve,
    gaussian_score_vp,
    mixture_score,
)
from adaptsde.processes import VEProcess, VPProcess

RNG = np.random.default_rng(0)
GAUSS = GaussianDataModel(RNG.standard_normal(3), RNG.uniform(0.5, 2.0, 3))
MIX = MixtureDataModel(np.array([0.2, 0.5, 0.3]), RNG.uniform(-1, 1, (3, 3)),
                       RNG.uniform(0.05, 0.3, (3, 3)))


def _fd_score(model, x, t, process, h=1e-5):
    out = np.empty_like(x)
    for k in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[k] = h
        out[:, k] = (model.log_density(x + e, t, process)
                     - model.log_density(x - e, t, process)) / (2 * h)
    return out


@pytest.mark.parametrize("model", [GAUSS, MIX], ids=["gauss", "mixture"])
@pytest.mark.parametrize("process", [VEProcess(sigma_max=5.0), VPProcess()], ids=["ve", "vp"])
def test_score_matches_finite_difference(model, process):
    rng = np.random.default_rng(1)
    for _ in range(100):
        t = rng.uniform(0.01, 1.0)
        x = rng.standard_normal((1, 3)) * 1.5
        np.testing.assert_allclose(model.score(x, t, process), _fd_score(model, x, t, process),
                                   rtol=1e-5, atol=1e-6)


def test_gaussian_score_examples():
    ve = VEProcess()
    assert np.allclose(gaussian_score_ve(GAUSS.mu0[None], 0.4, GAUSS, ve), 0.0)
    m1 = GaussianDataModel(np.zeros(1), np.ones(1))

    class Fixed:  # sigma^2(t) = 3
        def kernel_variance(self, t):
            return np.full_like(np.asarray(t, dtype=float), 3.0)

    assert gaussian_score_ve(np.array([[2.0]]), 0.5, m1, Fixed())[0, 0] == pytest.approx(-0.5)
    x = RNG.standard_normal((4, 3))
    vp = VPProcess()
    np.testing.assert_allclose(gaussian_score_vp(x, 0.0, GAUSS, vp), -(x - GAUSS.mu0) / GAUSS.var0)
    m = vp.mean_factor(1.0)
    np.testing.assert_allclose(gaussian_score_vp(x, 1.0, GAUSS, vp), -(x - m * GAUSS.mu0),
                               rtol=1e-3)
    # closed forms agree with the generic model score
    for t in (0.1, 0.9):
        np.testing.assert_allclose(gaussian_score_ve(x, t, GAUSS, ve), GAUSS.score(x, t, ve))
        np.testing.assert_allclose(gaussian_score_vp(x, t, GAUSS, vp), GAUSS.score(x, t, vp))


def test_terminal_consistency():
    tiny = GaussianDataModel(np.zeros(2), np.full(2, 1e-8))
    x = RNG.standard_normal((5, 2))
    ve, vp = VEProcess(), VPProcess()
    np.testing.assert_allclose(tiny.score(x, 1.0, ve), -x / ve.sigma(1.0) ** 2, rtol=0.01)
    np.testing.assert_allclose(tiny.score(x, 1.0, vp), -x, rtol=0.01)


def test_single_component_mixture_is_gaussian():
    mix = MixtureDataModel(np.array([1.0]), GAUSS.mu0[None], GAUSS.var0[None])
    x = RNG.standard_normal((6, 3))
    for proc in (VEProcess(), VPProcess()):
        np.testing.assert_allclose(mixture_score(x, 0.3, mix, proc), GAUSS.score(x, 0.3, proc),
                                   rtol=1e-12, atol=1e-14)


def test_symmetric_mixture_midpoint():
    mix = MixtureDataModel(np.array([0.5, 0.5]), np.array([[1.0, 0.3], [-1.0, 0.3]]),
                           np.full((2, 2), 0.2))
    s = mix.score(np.array([[0.0, 0.7]]), 0.2, VPProcess())
    assert s[0, 0] == pytest.approx(0.0, abs=1e-14)


def test_mixture_moments_match_samples():
    proc = VPProcess()
    mean, var = MIX.moments(0.05, proc)
    x = MIX.sample(200_000, 0.05, proc, np.random.default_rng(4))
    np.testing.assert_allclose(x.mean(0), mean, atol=5 * np.sqrt(var.max() / 2e5))
    np.testing.assert_allclose(x.var(0), var, rtol=0.02)


def test_model_validation():
    with pytest.raises(ConfigError):
        GaussianDataModel(np.zeros(2), np.array([1.0, 0.0]))
    with pytest.raises(ConfigError):
        MixtureDataModel(np.array([0.5, 0.6]), np.zeros((2, 1)), np.ones((2, 1)))


def test_counting_wrapper():
    c = counting_wrapper(AnalyticScore(GAUSS, VPProcess()), record_times=True)
    x = np.zeros((4, 3))
    for _ in range(3):
        c(x, 0.5)
    assert c.calls == 3 and c.rows == 12
    c(x, np.array([0.1, 0.2, 0.3, 0.4]))
    assert c.min_time == pytest.approx(0.1)
    c.reset()
    assert c.calls == 0 and np.isnan(c.min_time)
