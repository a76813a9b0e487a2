import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.stats import multivariate_normal, norm

from cfrobust.core import Dataset
from cfrobust.density import (
    GmmComponent,
    GmmDensity,
    choose_log_threshold,
    choose_threshold,
    component_constraint,
    fit_gmm,
    log_density,
)

LOG_2PI = np.log(2 * np.pi)


def one_class(X):
    return Dataset(X, np.zeros(len(X), dtype=int), n_classes=1)


def test_single_component_is_mean_and_covariance():
    X = np.random.default_rng(0).normal(size=(200, 3)) @ np.diag([1.0, 2.0, 0.5])
    gmm = fit_gmm(one_class(X), n_components=1, reg=1e-6)
    (c,) = gmm.class_components(0)
    assert_allclose(c.mean, X.mean(0), atol=1e-12)
    assert_allclose(c.cov, np.cov(X.T, bias=True) + 1e-6 * np.eye(3), atol=1e-10)
    assert c.weight == 1.0


def test_two_clusters_recovered():
    rng = np.random.default_rng(1)
    centers = np.array([[-4.0, 0.0], [4.0, 1.0]])
    X = np.vstack([rng.normal(m, 0.7, (150, 2)) for m in centers])
    (comps,) = fit_gmm(one_class(X), n_components=2, seed=3).components
    found = np.array(sorted((c.mean for c in comps), key=lambda m: m[0]))
    assert np.max(np.linalg.norm(found - centers, axis=1)) < 0.3
    assert sum(c.weight for c in comps) == pytest.approx(1.0)


def test_bic_prefers_two_components_for_two_clusters():
    rng = np.random.default_rng(2)
    X = np.vstack([rng.normal(m, 0.5, (100, 2)) for m in ([-5, 0], [5, 0])])
    assert fit_gmm(one_class(X), seed=0).n_components == (2,)


def test_too_many_components():
    with pytest.raises(ValueError):
        fit_gmm(one_class(np.zeros((2, 2)) + [[0, 0], [1, 1]]), n_components=3)


def test_reg_must_be_positive():
    with pytest.raises(ValueError):
        fit_gmm(one_class(np.random.default_rng(0).normal(size=(10, 2))), reg=0.0)


def test_degenerate_class_gets_ridge():
    X = np.ones((10, 2))
    gmm = fit_gmm(one_class(X), seed=0, reg=1e-6)
    (c,) = gmm.class_components(0)
    assert_allclose(c.cov, 1e-6 * np.eye(2), atol=1e-18)


@pytest.mark.parametrize("seed", range(20))
def test_em_objective_never_decreases(seed):
    rng = np.random.default_rng(100 + seed)
    k = int(rng.integers(2, 4))
    X = np.vstack([rng.normal(rng.normal(0, 3, 2), rng.uniform(0.3, 1.5), (60, 2)) for _ in range(k)])
    for reg in (1e-6, 1e-2):
        (hist,) = fit_gmm(one_class(X), n_components=3, seed=seed, reg=reg).history
        assert all(b >= a - 1e-10 * max(1.0, abs(a)) for a, b in zip(hist, hist[1:]))


def test_log_density_examples():
    std = GmmDensity(((GmmComponent(1.0, np.zeros(1), np.eye(1)),),))
    assert log_density(std, 0, [0.0]) == pytest.approx(-0.5 * LOG_2PI)
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    g = GmmDensity(((GmmComponent(1.0, np.ones(2), cov),),))
    assert log_density(g, 0, np.ones(2)) == pytest.approx(-0.5 * np.log(np.linalg.det(2 * np.pi * cov)))
    with pytest.raises(ValueError):
        log_density(g, 1, np.ones(2))


def test_log_density_matches_direct_sum():
    rng = np.random.default_rng(3)
    comps = []
    weights = rng.dirichlet(np.ones(3))
    for w in weights:
        L = rng.normal(size=(2, 2))
        comps.append(GmmComponent(w, rng.normal(size=2), L @ L.T + 0.2 * np.eye(2)))
    g = GmmDensity((tuple(comps),))
    X = rng.normal(size=(100, 2)) * 2
    ref = sum(c.weight * multivariate_normal(c.mean, c.cov).pdf(X) for c in comps)
    assert_allclose(log_density(g, 0, X), np.log(ref), rtol=1e-10)
    lower = np.max([np.log(c.weight) + c.log_pdf(X) for c in comps], axis=0)
    assert np.all(log_density(g, 0, X) >= lower - 1e-12)


def test_density_integrates_to_one_1d():
    g = GmmDensity(((GmmComponent(0.3, np.array([-1.0]), np.eye(1) * 0.5), GmmComponent(0.7, np.array([2.0]), np.eye(1) * 2.0)),))
    val, _ = quad(lambda t: np.exp(log_density(g, 0, np.array([t]))), -10 * np.sqrt(2) - 1, 10 * np.sqrt(2) + 2, limit=200)
    assert val == pytest.approx(1.0, abs=1e-4)


def test_component_constraint_examples():
    c = GmmComponent(1.0, np.zeros(1), np.eye(1))
    peak = np.exp(c.log_peak)
    assert component_constraint(c, peak).bound == pytest.approx(0.0, abs=1e-12)
    assert component_constraint(c, peak / np.e).bound == pytest.approx(2.0)
    assert component_constraint(c, peak * 1.01) is None
    with pytest.raises(ValueError):
        component_constraint(c, 0.0)


def test_component_constraint_is_inner_approximation():
    rng = np.random.default_rng(4)
    for _ in range(10):
        comps = []
        for w in rng.dirichlet(np.ones(3)):
            L = rng.normal(size=(3, 3))
            comps.append(GmmComponent(w, rng.normal(size=3) * 2, L @ L.T + 0.1 * np.eye(3)))
        g = GmmDensity((tuple(comps),))
        for c in comps:
            lt = c.log_peak - rng.uniform(0.1, 3.0)
            q = component_constraint(c, log_threshold=lt)
            # uniform samples inside the ellipsoid
            u = rng.normal(size=(2000, 3))
            u *= (rng.uniform(size=(2000, 1)) ** (1 / 3)) / np.linalg.norm(u, axis=1, keepdims=True)
            L = np.linalg.cholesky(c.cov)
            pts = c.mean + np.sqrt(q.bound) * u @ L.T
            assert np.all(q.value(pts) <= q.bound + 1e-9)
            assert np.all(log_density(g, 0, pts) >= lt - 1e-9)


def test_threshold_quantiles():
    sigma = 0.1
    c = GmmComponent(1.0, np.zeros(1), np.eye(1) * sigma**2)
    g = GmmDensity(((c,),))
    peak = np.exp(c.log_peak)
    xs = [sigma * np.sqrt(2 * np.log(peak / v)) for v in (1.0, 2.0, 3.0)]
    data = one_class(np.array(xs)[:, None])
    assert choose_threshold(g, data, 0.5)[0] == pytest.approx(2.0)
    dens = np.exp(log_density(g, 0, data.X))
    assert choose_threshold(g, data, 1e-9)[0] <= dens.min() + 1e-12
    with pytest.raises(ValueError):
        choose_threshold(g, data, 1.0)


def test_threshold_standard_normal_quartile():
    X = np.random.default_rng(5).normal(size=(20000, 1))
    gmm = fit_gmm(one_class(X), n_components=1)
    # density below its q-quantile  <=>  |x| above its (1 - q)-quantile
    analytic = norm.pdf(norm.ppf(1 - 0.25 / 2))
    assert choose_threshold(gmm, one_class(X), 0.25)[0] == pytest.approx(analytic, rel=0.1)
    assert choose_log_threshold(gmm, one_class(X), 0.25)[0] == pytest.approx(np.log(analytic), abs=0.1)


def test_serialization_roundtrip():
    g = fit_gmm(Dataset(np.random.default_rng(6).normal(size=(60, 2)), np.repeat([0, 1], 30)), seed=0)
    back = GmmDensity.from_dict(g.to_dict())
    x = np.array([0.3, -0.2])
    assert log_density(back, 1, x) == pytest.approx(log_density(g, 1, x), rel=1e-14)
