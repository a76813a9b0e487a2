import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from cfrobust.core import LabeledSample
from cfrobust.counterfactual import CounterfactualGenerator, closest_cf_linear
from cfrobust.models import LinearBinaryModel, SoftmaxModel
from cfrobust.perturbation import PerturbationSpec
from cfrobust.robustness import (
    CSV_COLUMNS,
    InstabilityReport,
    bound_general,
    bound_linear,
    estimate_instability,
    fairness_check,
    instability_gaussian_linear,
    instability_uniform_linear,
    perturbed_target,
    tail_bound_gaussian,
    tail_bound_uniform,
)


class Const:
    def __init__(self, c):
        self.c = c

    def predict(self, x):
        return self.c


def test_label_rule():
    assert perturbed_target(Const(0), None, 0, 1) == 1
    assert perturbed_target(Const(1), None, 0, 1) == 0
    assert perturbed_target(Const(2), None, 0, 1, return_flag=True) == (1, True)
    assert perturbed_target(lambda x: 0, None, 0, 2, return_flag=True) == (2, False)


def unit_linear(rng, d):
    w = rng.normal(size=d)
    return LinearBinaryModel(w / np.linalg.norm(w), 0.0)


def sample_for(model, rng, d):
    x = rng.normal(size=d) * 2
    return x, int(model.predict(x))


def test_zero_perturbation_gives_zero_distances(rng):
    m = unit_linear(rng, 3)
    x, y = sample_for(m, rng, 3)
    rep = estimate_instability(m, CounterfactualGenerator(m), x, -y, PerturbationSpec("gaussian", sigma=0.0), 50)
    assert rep.count == 50 and np.all(rep.distances == 0.0)


@pytest.mark.parametrize("d", [2, 4, 8])
def test_gaussian_mc_matches_closed_form(d):
    rng = np.random.default_rng(d)
    m = unit_linear(rng, d)
    x, y = sample_for(m, rng, d)
    rep = estimate_instability(m, CounterfactualGenerator(m), LabeledSample(x, y), -y,
                               PerturbationSpec("gaussian", sigma=1.0, seed=d), 20_000, store_points=False)
    assert abs(rep.mean - (d - 1)) <= 3 * rep.std_error


def test_gaussian_general_sigma():
    rng = np.random.default_rng(99)
    d = 5
    m = unit_linear(rng, d)
    sig = rng.uniform(0.1, 4, d)
    x, y = sample_for(m, rng, d)
    rep = estimate_instability(m, CounterfactualGenerator(m), x, -y,
                               PerturbationSpec("gaussian", sigma=sig, seed=1), 20_000, store_points=False)
    assert abs(rep.mean - instability_gaussian_linear(sig, m.w)) <= 3 * rep.std_error


@pytest.mark.parametrize("eps,d", [(0.5, 3), (1.0, 5)])
def test_uniform_mc_matches_closed_form(eps, d):
    rng = np.random.default_rng(int(eps * 10) + d)
    m = unit_linear(rng, d)
    x, y = sample_for(m, rng, d)
    rep = estimate_instability(m, CounterfactualGenerator(m), x, -y,
                               PerturbationSpec("uniform", eps=eps, seed=2), 20_000, store_points=False)
    assert abs(rep.mean - instability_uniform_linear(eps, d)) <= 3 * rep.std_error


def test_closed_form_examples():
    assert instability_gaussian_linear(1.0, np.eye(4)[0]) == 3.0
    assert instability_gaussian_linear([1.0, 4.0], [1.0, 0.0]) == 4.0
    assert instability_uniform_linear(0.3, 1) == 0.0
    assert instability_uniform_linear(math.sqrt(3), 2) == pytest.approx(1.0)
    oracle = [instability_gaussian_linear(1.0, np.eye(d)[0]) for d in range(1, 30)]
    assert np.all(np.diff(oracle) > 0)


def test_bound_examples():
    assert bound_general(0.0, [1.0, 2.0], [1.0, 2.0]) == 0.0
    assert bound_general(1.0, [0.0, 0.0], [2.0, 0.0]) == 6.0
    assert bound_linear(0.5, [1.0, 0.0], [0.0, 9.0]) == 1.0
    assert bound_linear(0.0, [1.0, 0.0], [3.0, 7.0]) == 6.0


def test_tail_examples():
    assert tail_bound_gaussian(3.0, 4) == 1.0
    assert tail_bound_gaussian(1e12, 4) < 1e-9
    assert tail_bound_uniform(0.5**2 * 4 / 3, 0.5, 5) == pytest.approx(1.0)
    assert tail_bound_uniform(1e6, 0.5, 5) < 1e-6
    assert tail_bound_gaussian(0.0, 4) == 1.0


def test_linear_bounds_hold_under_bounded_noise():
    rng = np.random.default_rng(5)
    for _ in range(2000):
        d = int(rng.integers(2, 8))
        m = unit_linear(rng, d)
        x = rng.normal(size=d) * 3
        eps = float(rng.uniform(0, 2))
        u = rng.normal(size=d)
        xp = x + eps * rng.uniform() * u / np.linalg.norm(u)
        cf, cfp = closest_cf_linear(x, m).point, closest_cf_linear(xp, m).point
        shift = np.linalg.norm(cf - cfp)
        assert shift <= bound_general(eps, x, cf) * (1 + 1e-9)
        assert shift <= bound_linear(eps, m.w, x) * (1 + 1e-9)


def test_gaussian_tail_is_below_markov():
    rng = np.random.default_rng(8)
    d = 6
    m = unit_linear(rng, d)
    noise = rng.standard_normal((100_000, d))
    sq = (noise**2).sum(1) - (noise @ m.w) ** 2
    for delta in (d, 2 * d, 5 * d):
        assert np.mean(sq >= delta) <= tail_bound_gaussian(delta, d)


def test_fairness_examples():
    m = LinearBinaryModel(np.array([1.0, 0.0]), 0.0)
    a = np.array([0.5, 0.0])
    assert fairness_check(a, a, m, 0.1, 0.0)
    assert fairness_check(a, np.array([10.0, 0.0]), m, 1.0, 0.0)
    assert not fairness_check(np.array([-0.01, 0.0]), np.array([0.01, 0.0]), m, 1.0, 0.5)
    with pytest.raises(ValueError):
        fairness_check(a, a, m, 0.0, 0.0)


@given(
    st.lists(st.floats(-3, 3), min_size=2, max_size=2),
    st.lists(st.floats(-3, 3), min_size=2, max_size=2),
    st.floats(0.01, 3),
    st.floats(0, 1),
)
def test_fairness_symmetric(x1, x2, e1, e2):
    m = SoftmaxModel(np.array([[1.0, 0.5], [-1.0, 0.2], [0.0, -1.0]]), np.zeros(3))
    assert fairness_check(x1, x2, m, e1, e2) == fairness_check(x2, x1, m, e1, e2)


def _report(rng):
    m = unit_linear(rng, 3)
    x, y = sample_for(m, rng, 3)
    return estimate_instability(m, CounterfactualGenerator(m), x, -y, PerturbationSpec("gaussian", seed=4), 30, metric="l1")


def test_report_roundtrip_and_aggregates(rng):
    rep = _report(rng)
    rep.records[3].skipped, rep.records[3].reason = True, "test"
    again = InstabilityReport.from_dict(json.loads(rep.to_json()))
    assert again.to_json() == rep.to_json()
    mean, median, records = rep
    d = np.array([r.distance for r in records if not r.skipped])
    assert rep.count == 29 and rep.skipped == 1
    assert mean == pytest.approx(d.mean()) and median == pytest.approx(np.median(d))
    assert np.all(d >= 0)
    rows = rep.to_csv().splitlines()
    assert rows[0] == ",".join(CSV_COLUMNS) and len(rows) == 31
    buf = io.StringIO()
    rep.to_csv(buf)
    assert buf.getvalue() == rep.to_csv()


def test_estimate_errors(rng):
    m = LinearBinaryModel(np.array([1.0, 0.0]), 0.0)
    gen = CounterfactualGenerator(m)
    spec = PerturbationSpec("gaussian")
    x = np.array([2.0, 0.0])
    with pytest.raises(ValueError):
        estimate_instability(m, gen, x, -1, spec, 0)
    with pytest.raises(ValueError):
        estimate_instability(m, gen, LabeledSample(x, -1), 1, spec, 5)
    with pytest.raises(ValueError):
        estimate_instability(m, gen, x, 1, spec, 5)
    infeasible = type("R", (), {"feasible": False, "point": None, "cost": math.inf})()
    with pytest.raises(ValueError):
        estimate_instability(m, lambda x, t: infeasible, x, -1, spec, 5)
