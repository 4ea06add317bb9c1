import math

import numpy as np
import pytest

from fellerlab.quadrature import (
    annular_nodes,
    box_nodes,
    gauss_legendre,
    shell_breaks,
    sphere_nodes,
    split_box_at_axes,
)


@pytest.mark.parametrize("d,area", [(1, 2.0), (2, 2 * math.pi), (3, 4 * math.pi)])
def test_sphere_area(d, area):
    u, w = sphere_nodes(d, 8)
    assert np.allclose(np.linalg.norm(u, axis=1), 1.0)
    assert w.sum() == pytest.approx(area, rel=1e-12)


def test_gauss_legendre_exact_for_polynomials():
    x, w = gauss_legendre(5)
    for k in range(10):
        assert np.sum(w * x**k) == pytest.approx((1 - (-1) ** (k + 1)) / (k + 1), abs=1e-13)


def test_shell_breaks_include_unit_sphere():
    b = shell_breaks(1e-4, 3.0)
    assert 1.0 in b and b[0] == 1e-4 and b[-1] == 3.0
    assert all(r2 / r1 <= 2.0 + 1e-12 for r1, r2 in zip(b[:-1], b[1:]))


def test_annulus_volume():
    y, w = annular_nodes(2, shell_breaks(1.0, 2.0), 8)
    assert w.sum() == pytest.approx(3 * math.pi, rel=1e-12)
    y, w = annular_nodes(3, shell_breaks(0.5, 2.0), 8)
    assert w.sum() == pytest.approx(4 / 3 * math.pi * (8 - 0.125), rel=1e-12)


def test_box_split_and_area():
    pieces = split_box_at_axes([-1.0, -2.0], [2.0, 1.0])
    assert len(pieces) == 4
    y, w = box_nodes((((-1.0, -2.0), (2.0, 1.0)),), 4)
    assert w.sum() == pytest.approx(9.0)
    # no node straddles an axis inside a piece: sign pattern is piecewise constant
    assert np.all(y != 0)
