import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fellerlab.catalog import get
from fellerlab.functions import coordinate_tanh, plateau
from fellerlab.generator import apply_generator
from fellerlab.kernel import Atom, JumpKernel, PolynomialDrift, Triplet, eval_symbol
from fellerlab.orthant import mixed_orthant_mass
from fellerlab.regions import Region
from fellerlab.spacetime import (
    EMBEDDED_TAG,
    SpaceTimeFunction,
    apply_transformed_generator,
    embedded_mass,
    eval_transformed_symbol,
    transform_triplet,
    transformed_generator_split,
)

from conftest import atomic


def test_drift_embedding_sine():
    t = Triplet.build(1, drift=lambda s, x: np.sin(np.asarray(s))[..., None] * np.ones(np.shape(x)))
    st_ = transform_triplet(t)
    assert np.allclose(st_.drift([0.7, 3.0]), [1.0, math.sin(0.7)])


def test_diffusion_padding():
    st_ = transform_triplet(Triplet.build(1, diffusion=[[2.25]]))
    assert np.array_equal(st_.diffusion([1.0, 0.0]), [[0.0, 0.0], [0.0, 2.25]])


def test_atom_embedding():
    st_ = transform_triplet(atomic(2, [((1, 1), 1.5)]))
    assert np.array_equal(st_.atoms(0.0), [[0.0, 1.0, 1.0]])
    assert st_.kernel_tag == EMBEDDED_TAG
    assert st_.kernel is st_.source.jumps


class _TimeShift(Region):
    """{(r, y) : r >= 0.5}: no embedded jump lies here."""

    touches_origin = False

    def contains(self, y):
        return np.asarray(y)[..., 0] >= 0.5

    def min_radius(self):
        return 0.5


class _MixedSpace(Region):
    def contains(self, y):
        y = np.asarray(y)[..., 1:]
        return np.any(y > 0, axis=-1) & np.any(y < 0, axis=-1)


@pytest.mark.parametrize("name", ["atom_discordant", "square_annulus", "axis_atoms"])
def test_embedded_mass_invariants(name):
    t = get(name).triplet
    st_ = transform_triplet(t)
    x = np.zeros(2)
    assert embedded_mass(st_, 0.5, x, _TimeShift()) == 0.0
    assert embedded_mass(st_, 0.5, x, _MixedSpace()) == pytest.approx(mixed_orthant_mass(t, 0.5, x), abs=1e-8)


def test_symbol_drift_only():
    st_ = transform_triplet(Triplet.build(1, drift=[1.0]))
    assert eval_transformed_symbol(st_, [0.3, 0.0], [2.0, 0.5]) == pytest.approx(2.5j, abs=1e-15)


def test_symbol_reductions():
    t = atomic(2, [((0.4, 0.3), 1.0), ((2.0, -1.0), 0.5)], drift=[0.2, 0.1], diffusion=np.eye(2))
    st_ = transform_triplet(t)
    xt = [0.5, 0.1, 0.2]
    assert eval_transformed_symbol(st_, xt, [0.0, 0.7, -0.2]) == eval_symbol(t, 0.5, [0.1, 0.2], [0.7, -0.2])
    assert eval_transformed_symbol(st_, xt, [1.0, 0.0, 0.0]) == pytest.approx(1j, abs=1e-15)


locs = st.tuples(st.floats(-3, 3), st.floats(-3, 3)).filter(lambda v: max(map(abs, v)) > 0.01)


@settings(max_examples=60, deadline=None)
@given(st.lists(locs, min_size=1, max_size=3), st.floats(0, 5), st.floats(-3, 3), st.floats(-3, 3),
       st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_symbol_identity_randomized(ls, s, x1, x2, r, a, b):
    t = atomic(2, [(l, 0.2 + i) for i, l in enumerate(ls)], drift=[0.3, -0.6],
               diffusion=[[1.0, 0.5], [0.5, 1.0]], additive=False)
    st_ = transform_triplet(t)
    got = eval_transformed_symbol(st_, [s, x1, x2], [r, a, b], check=False)
    want = 1j * r + eval_symbol(t, s, [x1, x2], [a, b])
    assert abs(got - want) <= 1e-12


def test_generator_time_clipped_identity():
    """F(s, x) = s inside its plateau: only the time drift acts."""
    F = SpaceTimeFunction(value=lambda s, x: 5 * np.tanh(np.asarray(s) / 5) * np.ones(np.shape(x)[:-1]),
                          gradient=lambda s, x: np.zeros(np.shape(x)),
                          hessian=lambda s, x: np.zeros(np.shape(x) + (np.shape(x)[-1],)),
                          dim=1, bound=5.0, time_partial=None)
    st_ = transform_triplet(atomic(1, [((1.0,), 2.0)], drift=[0.4], diffusion=[[1.0]]))
    assert apply_transformed_generator(st_, F, [0.0, 0.3]) == pytest.approx(1.0, abs=1e-8)


def test_generator_time_constant_matches_source():
    t = atomic(2, [((1.0, 0.5), 1.2), ((0.3, -0.2), 0.7)], drift=[0.1, -0.3], diffusion=np.eye(2))
    st_ = transform_triplet(t)
    for f in (plateau(0, 0.5, 1.0, 2), coordinate_tanh(1, 2)):
        F = SpaceTimeFunction.from_spatial(f)
        for s, x in ((0.0, [0.1, 0.2]), (1.5, [-1.0, 0.4])):
            lhs = apply_transformed_generator(st_, F, [s, *x])
            assert abs(lhs - apply_generator(t, s, f, np.array(x))) <= 1e-9
            assert abs(lhs - transformed_generator_split(st_, F, [s, *x])) <= 1e-9


def test_generator_s_tanh():
    F = SpaceTimeFunction(value=lambda s, x: s * np.tanh(np.asarray(x)[..., 0]),
                          gradient=lambda s, x: s * np.stack([1 / np.cosh(np.asarray(x)[..., 0]) ** 2,
                                                              np.zeros(np.shape(x)[:-1])], -1),
                          hessian=lambda s, x: np.zeros(np.shape(x) + (2,)), dim=2, bound=10.0,
                          time_partial=lambda s, x: math.tanh(float(np.asarray(x)[0])))
    st_ = transform_triplet(Triplet.build(2, drift=[1.0, 0.0]))
    assert apply_transformed_generator(st_, F, [2.0, 0.0, 0.0]) == pytest.approx(2.0, abs=1e-14)
    # the finite-difference time partial agrees
    G = SpaceTimeFunction(F.value, F.gradient, F.hessian, 2, 10.0, None)
    assert apply_transformed_generator(st_, G, [2.0, 0.3, 0.0]) == pytest.approx(
        apply_transformed_generator(st_, F, [2.0, 0.3, 0.0]), abs=1e-8)


def test_missing_time_partial_without_fd():
    F = SpaceTimeFunction(lambda s, x: s, lambda s, x: np.zeros(1), lambda s, x: np.zeros((1, 1)), 1, 1.0,
                          time_partial=None, allow_fd=False)
    with pytest.raises(ValueError):
        F.dt(0.0, np.zeros(1))


def test_time_varying_drift_split():
    t = Triplet.build(1, drift=PolynomialDrift([[0.0], [2.0]]),
                      jumps=JumpKernel(1, atoms=(Atom([0.5], lambda s, x: 1 + np.asarray(s) * 0),)))
    st_ = transform_triplet(t)
    F = SpaceTimeFunction.from_spatial(coordinate_tanh(0, 1))
    xt = [0.75, 0.2]
    assert abs(apply_transformed_generator(st_, F, xt) - transformed_generator_split(st_, F, xt)) < 1e-12
