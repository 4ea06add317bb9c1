import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from fellerlab.catalog import get
from fellerlab.functions import constant, coordinate_tanh, plateau
from fellerlab.kernel import Atom, JumpKernel, LinearDrift, PolynomialDrift, Triplet
from fellerlab.simulate import (
    SimulationError,
    SimulationScheme,
    ck_check,
    evolution_estimate,
    load_ensemble,
    save_ensemble,
    simulate,
    simulate_additive,
    simulate_state_dependent,
)

from conftest import atomic

O2 = np.zeros(2)


def test_brownian_moments():
    t = Triplet.build(2, diffusion=np.eye(2), spatially_homogeneous=True)
    ens = simulate_additive(t, 0.0, O2, 1.0, [1.0], 100_000, SimulationScheme(dt=1.0, seed=1))
    X = ens.at(1.0)
    assert np.all(np.abs(X.mean(axis=0)) < 3 / math.sqrt(X.shape[0]))
    assert np.allclose(np.cov(X, rowvar=False), np.eye(2), atol=0.05)


def test_every_path_starts_at_x0():
    t = Triplet.build(2, diffusion=np.eye(2), spatially_homogeneous=True)
    ens = simulate(t, 0.0, [0.5, -1.0], 1.0, [0.0, 1.0], 50, SimulationScheme(dt=0.25))
    assert np.all(ens.at(0.0) == [0.5, -1.0])


def test_compound_poisson_count():
    t = atomic(2, [((1, 1), 2.0)])
    ens = simulate_additive(t, 0.0, O2, 1.0, [1.0], 20_000, SimulationScheme(dt=0.1, seed=2))
    counts = ens.at(1.0)[:, 0]
    assert np.array_equal(counts, ens.at(1.0)[:, 1])
    se = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - 2.0) < 3 * se
    assert np.array_equal(ens.stats["accepted"], counts.astype(int))


def test_state_dependent_matches_additive_ks():
    kw = dict(drift=[0.5, 0.0], diffusion=np.eye(2))
    add = atomic(2, [((1, 1), 2.0), ((0.5, 0.0), 1.0)], additive=True, **kw)
    sd = atomic(2, [((1, 1), 2.0), ((0.5, 0.0), 1.0)], additive=False, **kw)
    n = 10_000
    a = simulate_additive(add, 0.0, O2, 1.0, [1.0], n, SimulationScheme(dt=0.05, seed=3)).at(1.0)
    b = simulate_state_dependent(sd, 0.0, O2, 1.0, [1.0], n, SimulationScheme(dt=0.05, seed=4)).at(1.0)
    crit = 1.628 * math.sqrt(2 / n)  # 1% two-sample critical value
    for j in range(2):
        assert ks_2samp(a[:, j], b[:, j]).statistic < crit


def test_ode_flow_converges():
    t = Triplet.build(1, drift=LinearDrift([[-1.0]]))
    errs = []
    for dt in (0.2, 0.1, 0.05):
        ens = simulate_state_dependent(t, 0.0, [1.0], 1.0, [1.0], 4, SimulationScheme(dt=dt))
        errs.append(float(np.max(np.abs(ens.at(1.0) - math.exp(-1)))))
    assert errs[0] < 0.01
    assert errs[1] <= errs[0] / 2 and errs[2] <= errs[1] / 2


def test_thinning_acceptance_fraction():
    k = JumpKernel(1, atoms=(Atom([0.3], lambda s, x: 1.0 + (np.asarray(x)[..., 0] > 0)),))
    t = Triplet.build(1, jumps=k)
    ens = simulate_state_dependent(t, 0.0, [0.0], 1.0, [1.0], 20_000, SimulationScheme(dt=0.1, rate_bound=2.0))
    cand = ens.stats["candidates"].sum()
    acc = ens.stats["accepted"].sum()
    p_hat = acc / cand
    p_oracle = ens.stats["rate_sum_at_atom_candidates"].sum() / (2.0 * cand)
    se = math.sqrt(p_oracle * (1 - p_oracle) / cand)
    assert abs(p_hat - p_oracle) < 3 * se
    assert 0.5 < p_hat < 1.0


def test_rate_bound_violation_aborts():
    k = JumpKernel(1, atoms=(Atom([0.3], lambda s, x: 1.0 + (np.asarray(x)[..., 0] >= 0)),))
    t = Triplet.build(1, jumps=k)
    with pytest.raises(SimulationError, match="exceeds the declared bound"):
        simulate(t, 0.0, [0.0], 1.0, [1.0], 1000, SimulationScheme(rate_bound=1.5))
    with pytest.raises(SimulationError, match="rate_bound"):
        simulate(t, 0.0, [0.0], 1.0, [1.0], 10, SimulationScheme())


def test_density_without_sampler_rejected():
    k = JumpKernel(2, density=lambda s, x, y: np.ones(np.shape(y)[:-1]), boxes=(((1.0, 1.0), (2.0, 2.0)),))
    with pytest.raises(SimulationError, match="density_bound"):
        simulate(Triplet.build(2, jumps=k, spatially_homogeneous=True), 0.0, O2, 1.0, [1.0], 10,
                 SimulationScheme())


def test_box_density_jump_mean():
    t = get("concordant_boxes").triplet  # mass 2, mean jump 0 by symmetry, |y|^2 mean 14/3
    ens = simulate(t, 0.0, O2, 1.0, [1.0], 20_000, SimulationScheme(dt=1.0, seed=5))
    X = ens.at(1.0)
    # Var(X_1) = ∫ y y^T nu(dy): diagonal 2 * 7/3, off-diagonal 2 * 9/4
    C = np.cov(X, rowvar=False)
    assert C[0, 0] == pytest.approx(14 / 3, rel=0.05)
    assert C[0, 1] == pytest.approx(4.5, rel=0.05)


def test_singular_density_variance():
    """Discard mode: Var X_1 = ∫_{|y|>=eps} y y^T nu(dy)."""
    t = get("stable_concordant").triplet
    eps = 0.05
    ens = simulate(t, 0.0, O2, 1.0, [1.0], 20_000, SimulationScheme(dt=0.5, eps=eps, seed=6))
    X = ens.at(1.0)
    # ∫ r^2 * r^-2.5 * r dr over [eps, 2] times ∫ cos^2 over the two concordant quadrants (= pi/2)
    radial = (2**1.5 - eps**1.5) / 1.5
    var = radial * math.pi / 2
    v = X[:, 0].var(ddof=1)
    se = v * math.sqrt(2 / X.shape[0]) * 3  # heavy-ish tails: generous
    assert abs(v - var) < 3 * se
    assert abs(X[:, 0].mean()) < 4 * math.sqrt(var / X.shape[0])


def test_gaussian_substitute_adds_small_jump_variance():
    t = get("stable_concordant").triplet
    eps = 0.2
    disc = simulate(t, 0.0, O2, 1.0, [1.0], 20_000, SimulationScheme(dt=0.5, eps=eps, seed=7)).at(1.0)
    gau = simulate(t, 0.0, O2, 1.0, [1.0], 20_000,
                   SimulationScheme(dt=0.5, eps=eps, small_jumps="gaussian", seed=7)).at(1.0)
    small = (eps**1.5) / 1.5 * math.pi / 2
    diff = gau[:, 0].var() - disc[:, 0].var()
    assert diff == pytest.approx(small, abs=0.03)


def test_evolution_estimates():
    bm = Triplet.build(1, diffusion=np.eye(1), spatially_homogeneous=True)
    ens = simulate(bm, 0.0, [0.0], 1.0, [1.0], 20_000, SimulationScheme(dt=1.0, seed=8))
    one = evolution_estimate(ens, 1.0, constant(1.0, 1))
    assert one.estimate == 1.0 and one.stderr == 0.0
    odd = evolution_estimate(ens, 1.0, coordinate_tanh(0, 1))
    assert abs(odd.estimate) < 3 * odd.stderr
    drift = Triplet.build(1, drift=[1.0], spatially_homogeneous=True)
    det = evolution_estimate(simulate(drift, 0.0, [0.0], 1.0, [1.0], 100, SimulationScheme()), 1.0,
                             coordinate_tanh(0, 1))
    assert det.estimate == pytest.approx(math.tanh(1.0), abs=1e-12) and det.stderr == 0.0
    with pytest.raises(KeyError):
        evolution_estimate(ens, 0.5, one)


def test_contraction_bounds():
    ens = simulate(get("poisson1").triplet, 0.0, [0.0], 1.0, [1.0], 2000, SimulationScheme(dt=0.5))
    e = evolution_estimate(ens, 1.0, plateau(0, 1.0, 0.25, 1))
    assert 0.0 <= e.estimate <= 1.0


def test_shift_equivariance():
    t = atomic(1, [((1.0,), 1.5)], diffusion=[[0.5]])
    f = plateau(0, 1.0, 0.5, 1)
    a = simulate(t, 0.0, [0.0], 1.0, [1.0], 20_000, SimulationScheme(dt=0.5, seed=10))
    b = simulate(t, 0.0, [0.7], 1.0, [1.0], 20_000, SimulationScheme(dt=0.5, seed=11))
    shifted = plateau(0, 1.0 - 0.7, 0.5, 1)
    ea, eb = evolution_estimate(a, 1.0, shifted), evolution_estimate(b, 1.0, f)
    assert abs(ea.estimate - eb.estimate) < 3 * math.hypot(ea.stderr, eb.stderr)


def test_reproducible_and_worker_invariant():
    t = get("state_flip").triplet
    sch = SimulationScheme(dt=0.1, seed=42, rate_bound=2.0)
    a = simulate(t, 0.0, O2, 1.0, [0.5, 1.0], 3001, sch, workers=1)
    b = simulate(t, 0.0, O2, 1.0, [0.5, 1.0], 3001, sch, workers=4)
    c = simulate(t, 0.0, O2, 1.0, [0.5, 1.0], 3001, sch, workers=1)
    assert a.states.tobytes() == b.states.tobytes() == c.states.tobytes()
    d = simulate(t, 0.0, O2, 1.0, [0.5, 1.0], 3001, SimulationScheme(dt=0.1, seed=43, rate_bound=2.0))
    assert d.states.tobytes() != a.states.tobytes()


def test_worker_env_var(monkeypatch):
    t = Triplet.build(2, diffusion=np.eye(2), spatially_homogeneous=True)
    base = simulate(t, 0.0, O2, 1.0, [1.0], 501, SimulationScheme(dt=0.5, seed=1))
    monkeypatch.setenv("FELLERLAB_WORKERS", "3")
    again = simulate(t, 0.0, O2, 1.0, [1.0], 501, SimulationScheme(dt=0.5, seed=1))
    assert base.states.tobytes() == again.states.tobytes()


def test_prefix_paths_identical():
    t = get("poisson1").triplet
    sch = SimulationScheme(dt=0.25, seed=4)
    small = simulate(t, 0.0, [0.0], 1.0, [1.0], 100, sch)
    big = simulate(t, 0.0, [0.0], 1.0, [1.0], 1000, sch)
    assert np.array_equal(small.states, big.states[:100])


def test_save_load_roundtrip(tmp_path):
    t = get("atom_concordant").triplet
    ens = simulate(t, 0.0, O2, 1.0, [0.5, 1.0], 200, SimulationScheme(dt=0.25, seed=3))
    p = tmp_path / "e.bin"
    save_ensemble(ens, p)
    back = load_ensemble(p)
    assert np.array_equal(back.states, ens.states)
    assert back.times.tolist() == [0.5, 1.0] and back.scheme.seed == 3
    with open(p, "rb") as fh:
        assert fh.read(8) == b"FLENS001"
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nonsense")
    with pytest.raises(ValueError):
        load_ensemble(bad)


@pytest.mark.parametrize("name", ["brownian", "atom_concordant"])
def test_ck_passes(name):
    rep = ck_check(get(name).triplet, 0.0, 0.5, 1.0, [coordinate_tanh(0, 2), plateau(1, 1.0, 0.5, 2)], 10_000,
                   SimulationScheme(dt=0.05, seed=12))
    assert rep.passed, rep.rows


def test_ck_broken_restart_detected():
    t = Triplet.build(1, drift=PolynomialDrift([[0.0], [0.0], [12.0]]), diffusion=np.eye(1),
                      spatially_homogeneous=True)
    f = [coordinate_tanh(0, 1, scale=0.25)]
    sch = SimulationScheme(dt=0.05, seed=13)
    assert ck_check(t, 0.0, 0.5, 1.0, f, 10_000, sch).passed
    assert not ck_check(t, 0.0, 0.5, 1.0, f, 10_000, sch, broken_restart=True).passed


def test_ck_rejects_bad_times():
    with pytest.raises(ValueError):
        ck_check(get("brownian").triplet, 0.5, 0.5, 1.0, [coordinate_tanh(0, 2)], 10, SimulationScheme())


def test_scheme_validation():
    with pytest.raises(ValueError):
        SimulationScheme(dt=0.0)
    with pytest.raises(ValueError):
        SimulationScheme(small_jumps="exact")
    with pytest.raises(ValueError):
        SimulationScheme(eps=0.01).truncation(get("square_annulus").triplet.jumps)
