import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.stats import poisson

from fellerlab.catalog import get
from fellerlab.dependence import (
    DependenceReport,
    OrthantTest,
    SuiteError,
    check_stochastic_monotonicity,
    consistency,
    default_suite,
    estimate_dependence,
    independent_copy,
)
from fellerlab.functions import coordinate_tanh, plateau, threshold_indicator
from fellerlab.kernel import LinearDrift, Triplet
from fellerlab.simulate import SimulationScheme, simulate

O2 = np.zeros(2)


def poisson_cov_oracle(rate, direction, f, g, t=1.0, nmax=80):
    """Cov(f(N d), g(N d)) for N ~ Poisson(rate t), by truncated pmf summation."""
    n = np.arange(nmax)
    pmf = poisson.pmf(n, rate * t)
    pts = n[:, None] * np.asarray(direction, float)[None, :]
    fv, gv = f.value(pts), g.value(pts)
    return float(np.sum(pmf * fv * gv) - np.sum(pmf * fv) * np.sum(pmf * gv))


@pytest.fixture(scope="module")
def brownian_ensemble():
    t = Triplet.build(2, diffusion=np.eye(2), spatially_homogeneous=True)
    return simulate(t, 0.0, O2, 1.0, [1.0], 40_000, SimulationScheme(dt=1.0, seed=21))


@pytest.fixture(scope="module")
def concordant_ensemble():
    return simulate(get("atom_concordant").triplet, 0.0, O2, 1.0, [1.0], 40_000,
                    SimulationScheme(dt=1.0, seed=22))


@pytest.fixture(scope="module")
def discordant_ensemble():
    return simulate(get("atom_discordant").triplet, 0.0, O2, 1.0, [1.0], 40_000,
                    SimulationScheme(dt=1.0, seed=23))


def test_independent_brownian_puod(brownian_ensemble):
    rep = estimate_dependence(brownian_ensemble, 1.0, "PUOD")
    assert np.all(np.abs(rep.z_scores) <= 3)
    assert rep.verdict == "consistent"


def test_concordant_atom_associated(concordant_ensemble):
    rep = estimate_dependence(concordant_ensemble, 1.0, "A")
    assert rep.verdict == "consistent"
    assert np.nanmin(rep.z_scores) >= -3


def test_discordant_atom_violates_with_oracle(discordant_ensemble):
    f, g = plateau(0, 0.5, 0.25, 2), plateau(1, -0.5, 0.25, 2)
    rep = estimate_dependence(discordant_ensemble, 1.0, "A", [(f, g)])
    row = rep.tests[0]
    assert rep.verdict == "violated" and row["z"] < -3
    oracle = poisson_cov_oracle(0.7, (1, -1), f, g)
    assert oracle < 0
    assert abs(row["estimate"] - oracle) < 3 * row["stderr"]


def test_concordant_statistics_match_oracle(concordant_ensemble):
    pairs = [(plateau(0, 1.5, 1.0, 2), plateau(1, 2.5, 0.25, 2)), (coordinate_tanh(0, 2), plateau(1, 3.0, 1.0, 2))]
    rep = estimate_dependence(concordant_ensemble, 1.0, "A", pairs)
    for (f, g), row in zip(pairs, rep.tests):
        oracle = poisson_cov_oracle(3.0, (1, 1), f, g)
        assert oracle > 0
        assert abs(row["estimate"] - oracle) < 3 * row["stderr"]


def test_all_structures_on_concordant(concordant_ensemble):
    reports = [estimate_dependence(concordant_ensemble, 1.0, k) for k in ("A", "WA", "PSA", "PSD", "PUOD",
                                                                           "PLOD", "POD")]
    assert all(r.verdict == "consistent" for r in reports)
    assert consistency(reports).passed


def test_pod_is_conjunction(discordant_ensemble, brownian_ensemble):
    for ens in (discordant_ensemble, brownian_ensemble):
        up = estimate_dependence(ens, 1.0, "PUOD")
        lo = estimate_dependence(ens, 1.0, "PLOD")
        pod = estimate_dependence(ens, 1.0, "POD")
        assert pod.parts == {"PUOD": up.verdict, "PLOD": lo.verdict}
        expect = "violated" if "violated" in (up.verdict, lo.verdict) else (
            "consistent" if up.verdict == lo.verdict == "consistent" else "inconclusive")
        assert pod.verdict == expect
    assert estimate_dependence(discordant_ensemble, 1.0, "POD").verdict == "violated"


def test_psd_copy_preserves_marginals(concordant_ensemble):
    X = concordant_ensemble.at(1.0)
    Xh = independent_copy(X, seed=5)
    for j in range(2):
        assert np.array_equal(np.sort(X[:, j]), np.sort(Xh[:, j]))
    assert np.array_equal(Xh, independent_copy(X, seed=5))
    # the copy destroys the comonotone coupling
    assert np.mean(Xh[:, 0] == Xh[:, 1]) < 0.5


def test_degenerate_is_inconclusive():
    ens = simulate(Triplet.build(2, spatially_homogeneous=True), 0.0, O2, 1.0, [1.0], 100, SimulationScheme())
    rep = estimate_dependence(ens, 1.0, "A")
    assert rep.verdict == "inconclusive"
    assert all(r["status"] == "inconclusive" for r in rep.tests)


def test_suite_kind_mismatch():
    X = np.random.default_rng(0).normal(size=(100, 2))
    f, g = plateau(0, 0, 1, 2), plateau(1, 0, 1, 2)
    with pytest.raises(SuiteError):
        estimate_dependence(None, 1.0, "WA", [(f, plateau(0, 1, 1, 2))], samples=X)
    with pytest.raises(SuiteError):
        estimate_dependence(None, 1.0, "A", [(f, coordinate_tanh(1, 2).__class__(
            value=g.value, gradient=g.gradient, hessian=g.hessian, bound=1, dim=2, monotone=False))], samples=X)
    with pytest.raises(SuiteError):
        estimate_dependence(None, 1.0, "PUOD", [(f, g)], samples=X)
    with pytest.raises(SuiteError):
        estimate_dependence(None, 1.0, "PLOD", default_suite("PUOD", 2), samples=X)
    with pytest.raises(SuiteError):
        estimate_dependence(None, 1.0, "PUOD", [OrthantTest((coordinate_tanh(0, 2), plateau(1, 0, 1, 2)))],
                            samples=X)
    with pytest.raises(SuiteError):
        estimate_dependence(None, 1.0, "XYZ", [], samples=X)


def test_puod_indicator_statistic_exact():
    X = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]])
    t = OrthantTest((threshold_indicator(0, 0, 2), threshold_indicator(1, 0, 2)))
    rep = estimate_dependence(None, 0.0, "PUOD", [t], samples=X)
    assert rep.tests[0]["estimate"] == pytest.approx(2 / 5 - (3 / 5) * (3 / 5))


def test_independent_samples_calibration():
    """Direct product-law samples: almost all equality-case statistics fall within ±3 s.e.

    Same-coordinate pairs are strictly positively correlated even under
    independence, so the association suite here pairs distinct coordinates.
    """
    rng = np.random.default_rng(1)
    inside, total = 0, 0
    suites = {"A": default_suite("WA", 2), "PUOD": None, "PLOD": None, "PSD": None}
    for _ in range(20):
        X = rng.normal(size=(5000, 2))
        for kind, suite in suites.items():
            z = estimate_dependence(None, 0.0, kind, suite, samples=X, psd_seed=3).z_scores
            inside += int(np.sum(np.abs(z) <= 3))
            total += z.size
    assert inside / total >= 0.99


# --- stochastic monotonicity --------------------------------------------------


def test_monotonicity_additive_consistent():
    pairs = [(np.array([0.0, 0.0]), np.array([0.5, 0.0])), (np.array([-1.0, -1.0]), np.array([0.0, 1.0]))]
    rep = check_stochastic_monotonicity(get("square_annulus").triplet, pairs, 1.0,
                                        [plateau(0, 0.5, 1.0, 2), plateau(1, 0.0, 0.25, 2)], 5000,
                                        SimulationScheme(dt=0.25, seed=2))
    assert rep.verdict == "consistent"


def test_monotonicity_ode_deterministic():
    t = Triplet.build(1, drift=LinearDrift([[-1.0]]))
    rep = check_stochastic_monotonicity(t, [(np.array([-1.0]), np.array([0.5]))], 1.0,
                                        [coordinate_tanh(0, 1)], 10, SimulationScheme(dt=0.1))
    assert rep.verdict == "consistent"
    assert rep.rows[0]["stderr"] == 0.0 and rep.rows[0]["estimate"] > 0


def test_monotonicity_counterexample_with_ctmc_oracle():
    entry = get("switch_up")
    f = plateau(0, 2.0, 0.25, 1)
    t = 1.0
    rep = check_stochastic_monotonicity(entry.triplet, [(np.array([-0.5]), np.array([0.5]))], t, [f], 20_000,
                                        SimulationScheme(dt=0.05, rate_bound=entry.rate_bound, seed=9))
    # two-state chain: -0.5 jumps to 2.5 at rate 1 and then stays; 0.5 never moves
    P = expm(np.array([[-1.0, 1.0], [0.0, 0.0]]) * t)
    ef_low = P[0, 0] * f.value(np.array([-0.5])) + P[0, 1] * f.value(np.array([2.5]))
    oracle = float(f.value(np.array([0.5])) - ef_low)
    row = rep.rows[0]
    assert oracle < 0
    assert rep.verdict == "violated" and row["z"] < -3
    assert abs(row["estimate"] - oracle) < 3 * row["stderr"]


def test_monotonicity_unordered_pair_rejected():
    with pytest.raises(ValueError):
        check_stochastic_monotonicity(get("brownian").triplet, [(np.array([1.0, 0.0]), np.array([0.0, 1.0]))],
                                      1.0, [plateau(0, 0, 1, 2)], 10, SimulationScheme())


# --- implication map ----------------------------------------------------------


def _report(kind, verdict, z, ens=None):
    rows = [{"test": "t", "estimate": 0.0, "stderr": 1.0, "z": v, "status": "ok"} for v in z]
    return DependenceReport(kind, rows, verdict, "", ens or {"id": 1, "t": 1.0})


def test_consistency_examples():
    assert consistency([_report(k, "consistent", [0.5]) for k in ("A", "PSA", "PUOD")]).passed
    assert consistency([_report("A", "violated", [-4.0]), _report("PUOD", "violated", [-5.0])]).passed
    out = consistency([_report("A", "consistent", [4.0, 5.0]), _report("PSA", "violated", [-4.0])])
    assert not out.passed and out.offending_edges == ["A => PSA"]
    out = consistency([_report("A", "consistent", [4.0]), _report("PUOD", "violated", [-4.0])])
    assert out.offending_edges == ["A => PUOD"]
    # weak support is not enough to flag an edge
    assert consistency([_report("A", "consistent", [1.0, 5.0]), _report("PSA", "violated", [-4.0])]).passed


def test_consistency_mixed_ensembles_rejected():
    with pytest.raises(ValueError):
        consistency([_report("A", "consistent", [1.0]), _report("PSA", "consistent", [1.0], {"id": 2, "t": 1.0})])
