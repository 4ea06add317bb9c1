import warnings

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss

from conftest import atomic
from fellerlab.compare import crn_compatible, dominance_harness
from fellerlab.functions import coordinate_tanh
from fellerlab.kernel import Triplet
from fellerlab.simulate import SimulationScheme


def gh_tanh_difference(x, shift, t=1.0, scale=1.0, c=0.0, n=80):
    """E tanh(a(x+shift+sqrt(t)Z-c)) - E tanh(a(x+sqrt(t)Z-c)) by Gauss-Hermite."""
    z, w = hermegauss(n)
    w = w / w.sum()
    base = x + np.sqrt(t) * z - c
    return float(np.sum(w * (np.tanh(scale * (base + shift)) - np.tanh(scale * base))))


def tanh_suite():
    return [coordinate_tanh(0, 1), coordinate_tanh(0, 1, 2.0, 0.5), coordinate_tanh(0, 1, 0.5, -1.0)]


@pytest.fixture
def bm1():
    return Triplet.build(1, diffusion=np.eye(1), spatially_homogeneous=True)


def test_identical_triplets_exact_zero(bm1):
    rep = dominance_harness(bm1, bm1, tanh_suite(), [(0.0, 1.0)], [[0.0], [0.7]], 2000,
                            SimulationScheme(dt=0.05, seed=3))
    assert rep.verdict == "dominates-on-suite"
    assert rep.common_random_numbers
    assert all(r["difference"] == 0.0 and r["stderr"] == 0.0 for r in rep.rows)


def test_drift_shift_matches_quadrature_oracle(bm1):
    y = Triplet.build(1, drift=[1.0], diffusion=np.eye(1), spatially_homogeneous=True)
    suite = tanh_suite()
    rep = dominance_harness(bm1, y, suite, [(0.0, 1.0)], [[0.0], [0.5]], 20000,
                            SimulationScheme(dt=0.05, seed=11))
    assert rep.verdict == "dominates-on-suite"
    assert rep.hypothesis.holds
    for r in rep.rows:
        f = next(g for g in suite if g.name == r["function"])
        oracle = gh_tanh_difference(r["x0"][0], 1.0, scale=f.params["scale"], c=f.params["shift"])
        assert oracle > 0
        assert r["z"] >= -3
        assert abs(r["difference"] - oracle) <= 3 * r["stderr"] + 1e-12


def test_rate_gap_fails_hypothesis_without_simulation(monkeypatch):
    import fellerlab.compare as cmp

    def boom(*a, **k):
        raise AssertionError("simulation must not run")

    monkeypatch.setattr(cmp, "simulate", boom)
    x = atomic(1, [([1.0], 2.0)])
    y = atomic(1, [([1.0], 1.0)])
    rep = dominance_harness(x, y, tanh_suite(), [(0.0, 1.0)], [[0.0]], 100, SimulationScheme())
    assert rep.verdict == "hypothesis-failed"
    assert rep.rows == []
    assert rep.hypothesis.min_slack < 0
    # oracle: I(q)f - I(p)f = -(f(x+1) - f(x)) for unit rate gap
    assert rep.hypothesis.min_slack <= -(np.tanh(1.0) - np.tanh(0.0)) + 1e-9


def test_dimension_mismatch(bm1, brownian2):
    with pytest.raises(ValueError, match="dimension"):
        dominance_harness(bm1, brownian2, tanh_suite(), [(0.0, 1.0)], [[0.0]], 10, SimulationScheme())


def test_bad_time_pair(bm1):
    with pytest.raises(ValueError):
        dominance_harness(bm1, bm1, tanh_suite(), [(1.0, 1.0)], [[0.0]], 10, SimulationScheme())


def test_scheme_mismatch_warns_and_pools(bm1):
    y = Triplet.build(1, drift=[1.0], diffusion=np.eye(1), spatially_homogeneous=True)
    sx, sy = SimulationScheme(dt=0.05, seed=1), SimulationScheme(dt=0.1, seed=1)
    assert not crn_compatible(bm1, y, sx, sy)
    with pytest.warns(UserWarning, match="independent streams"):
        rep = dominance_harness(bm1, y, tanh_suite(), [(0.0, 1.0)], [[0.0]], 4000, sx, scheme_y=sy)
    assert not rep.common_random_numbers
    assert rep.verdict == "dominates-on-suite"
    assert all(r["stderr"] > 0 for r in rep.rows)


def test_checked_monotonicity_is_recorded(bm1):
    y = Triplet.build(1, drift=[0.5], diffusion=np.eye(1), spatially_homogeneous=True)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep = dominance_harness(bm1, y, tanh_suite(), [(0.0, 1.0)], [[0.0], [1.0]], 4000,
                                SimulationScheme(dt=0.05, seed=2), monotone="checked")
    assert rep.monotonicity == "checked"
    assert rep.notes == []
    assert rep.to_dict()["verdict"] == "dominates-on-suite"
