import numpy as np
import pytest

from adaptsde.metrics import (
    GaussianSummary,
    empirical_gaussian_summary,
    sliced_w2,
    w2_gaussian_diag,
)


def G(m, v):
    return GaussianSummary(np.atleast_1d(m), np.atleast_1d(v))


def test_w2_examples():
    a = G([1.0, 2.0], [0.5, 3.0])
    assert w2_gaussian_diag(a, a) == 0.0
    assert w2_gaussian_diag(G(0.0, 1.0), G(3.0, 1.0)) == pytest.approx(3.0)
    assert w2_gaussian_diag(G(0.0, 1.0), G(0.0, 4.0)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        w2_gaussian_diag(G([0, 0], [1, 1]), G(0, 1))
    with pytest.raises(ValueError):
        G(0.0, -1.0)


def test_w2_is_a_metric():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a, b, c = (G(rng.standard_normal(4), rng.uniform(0, 3, 4)) for _ in range(3))
        ab = w2_gaussian_diag(a, b)
        assert ab == pytest.approx(w2_gaussian_diag(b, a))
        assert ab > 0
        assert w2_gaussian_diag(a, c) <= ab + w2_gaussian_diag(b, c) + 1e-12


def test_empirical_summary():
    s = empirical_gaussian_summary(np.full((5, 2), 3.0))
    assert np.all(s.var_diag == 0) and np.all(s.mean == 3.0)
    s = empirical_gaussian_summary(np.array([[0.0], [2.0]]))
    assert s.mean[0] == 1.0 and s.var_diag[0] == 2.0
    x = np.random.default_rng(1).standard_normal((10**5, 10))
    assert w2_gaussian_diag(empirical_gaussian_summary(x), G(np.zeros(10), np.ones(10))) < 0.05
    with pytest.raises(ValueError):
        empirical_gaussian_summary(np.zeros((1, 3)))


def test_sliced_w2_examples():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((200, 3))
    assert sliced_w2(x, x, 16, rng=0) == 0.0
    a, b = rng.standard_normal(300), rng.standard_normal(300) + 0.5
    direct = np.sqrt(np.mean((np.sort(a) - np.sort(b)) ** 2))
    for k in (1, 64):
        assert sliced_w2(a[:, None], b[:, None], k) == pytest.approx(direct)
    assert sliced_w2(np.zeros((10, 1)), np.full((7, 1), 5.0)) == pytest.approx(5.0)


def test_sliced_w2_unequal_sizes_match_quantile_integral():
    a = np.array([0.0, 1.0])
    b = np.array([0.0, 1.0, 2.0])
    # quantile functions differ on (1/3,1/2]: 0 vs 1 and (2/3,1]: 1 vs 2
    expected = np.sqrt((0.5 - 1 / 3) * 1 + (1 - 2 / 3) * 1)
    assert sliced_w2(a[:, None], b[:, None]) == pytest.approx(expected)


def test_sliced_w2_reproducible_and_validates():
    rng = np.random.default_rng(3)
    a, b = rng.standard_normal((2, 100, 4))
    assert sliced_w2(a, b, 8, rng=5) == sliced_w2(a, b, 8, rng=5)
    with pytest.raises(ValueError):
        sliced_w2(a, b[:, :3])
    with pytest.raises(ValueError):
        sliced_w2(a, b, 0)
