"""Named example triplets.

Each entry records the expected mixed-orthant verdict so that the orthant
criterion and the generator scan can be cross-checked, and the thinning
bound needed to simulate it when atom rates are callables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import Atom, JumpKernel, Triplet

__all__ = ["CatalogEntry", "CATALOG", "get", "names", "jump_catalog", "square_annulus_boxes"]


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    triplet: Triplet
    criterion_holds: bool
    rate_bound: float | None = None
    space_grid: tuple = ((0.0, 0.0), (1.0, 1.0), (-1.0, -1.0), (-0.5, 0.5), (0.5, -0.5))
    time_grid: tuple = (0.0, 0.5, 1.0)
    note: str = ""
    tags: tuple = field(default_factory=tuple)


def square_annulus_boxes():
    """[-2,2]^2 minus (-1,1)^2 as eight axis-aligned boxes."""
    edges = [(-2.0, -1.0), (-1.0, 1.0), (1.0, 2.0)]
    out = []
    for ex in edges:
        for ey in edges:
            if ex == (-1.0, 1.0) and ey == (-1.0, 1.0):
                continue
            out.append(((ex[0], ey[0]), (ex[1], ey[1])))
    return tuple(out)


def _unit(s, x, y):
    return np.ones(np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1]))


def _concordant_stable(s, x, y):
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(y, axis=-1)
    same = (y[..., 0] * y[..., 1]) >= 0
    with np.errstate(divide="ignore"):
        val = np.where(same, r ** -2.5, 0.0)
    return np.broadcast_to(val, np.broadcast_shapes(np.shape(x)[:-1], val.shape))


def _time_rate(s, x):
    return np.broadcast_to(np.asarray(s, dtype=float), np.broadcast_shapes(np.shape(s), np.shape(x)[:-1]))


def _up_if_positive(s, x):
    return (np.asarray(x)[..., 0] > 0).astype(float)


def _down_if_nonpositive(s, x):
    return (np.asarray(x)[..., 0] <= 0).astype(float)


def _below_zero(s, x):
    return (np.asarray(x)[..., 0] <= 0).astype(float)


def _build():
    I2 = np.eye(2)
    entries = [
        CatalogEntry("brownian", Triplet.build(2, diffusion=I2, spatially_homogeneous=True, name="brownian"),
                     True, note="standard 2-D Brownian motion", tags=("additive", "diffusive")),
        CatalogEntry("brownian1", Triplet.build(1, diffusion=np.eye(1), spatially_homogeneous=True,
                                                name="brownian1"),
                     True, space_grid=((0.0,),), note="standard 1-D Brownian motion",
                     tags=("additive", "diffusive")),
        CatalogEntry("poisson1", Triplet.build(1, jumps=JumpKernel(1, atoms=(Atom([1.0], 2.0),)),
                                               spatially_homogeneous=True, name="poisson1"),
                     True, space_grid=((0.0,),), note="Poisson process with unit jumps, rate 2",
                     tags=("additive",)),
        CatalogEntry("atom_concordant",
                     Triplet.build(2, jumps=JumpKernel(2, atoms=(Atom([1.0, 1.0], 3.0),)),
                                   spatially_homogeneous=True, name="atom_concordant"),
                     True, note="atom (1,1) with rate 3", tags=("additive", "jump")),
        CatalogEntry("atom_discordant",
                     Triplet.build(2, jumps=JumpKernel(2, atoms=(Atom([1.0, -1.0], 0.7),)),
                                   spatially_homogeneous=True, name="atom_discordant"),
                     False, note="atom (1,-1) with rate 0.7", tags=("additive", "jump")),
        CatalogEntry("square_annulus",
                     Triplet.build(2, jumps=JumpKernel(2, density=_unit, boxes=square_annulus_boxes(),
                                                       density_bound=1.0),
                                   spatially_homogeneous=True, name="square_annulus"),
                     False, note="unit density on [-2,2]^2 minus (-1,1)^2", tags=("additive", "jump")),
        CatalogEntry("concordant_boxes",
                     Triplet.build(2, jumps=JumpKernel(2, density=_unit,
                                                       boxes=(((1.0, 1.0), (2.0, 2.0)),
                                                              ((-2.0, -2.0), (-1.0, -1.0))),
                                                       density_bound=1.0),
                                   spatially_homogeneous=True, name="concordant_boxes"),
                     True, note="unit density on [1,2]^2 and [-2,-1]^2", tags=("additive", "jump")),
        CatalogEntry("time_discordant",
                     Triplet.build(2, jumps=JumpKernel(2, atoms=(Atom([1.0, -1.0], _time_rate),)),
                                   spatially_homogeneous=True, name="time_discordant"),
                     False, rate_bound=2.0, note="atom (1,-1) with rate s (bound valid for s <= 2)",
                     tags=("additive", "jump")),
        CatalogEntry("state_flip",
                     Triplet.build(2, jumps=JumpKernel(2, atoms=(Atom([1.0, 1.0], _up_if_positive),
                                                                 Atom([1.0, -1.0], _down_if_nonpositive))),
                                   name="state_flip"),
                     False, rate_bound=2.0,
                     note="atom (1,1) when x1 > 0, atom (1,-1) when x1 <= 0", tags=("jump",)),
        CatalogEntry("stable_concordant",
                     Triplet.build(2, jumps=JumpKernel(2, density=_concordant_stable, inner_cutoff=0.0,
                                                       small_jump_index=0.5, support_radius=2.0,
                                                       density_bound=1.0),
                                   spatially_homogeneous=True, name="stable_concordant"),
                     True, note="|y|^-2.5 on the closed concordant orthants, |y| <= 2",
                     tags=("additive", "jump", "singular")),
        CatalogEntry("axis_atoms",
                     Triplet.build(2, jumps=JumpKernel(2, atoms=(Atom([1.0, 0.0], 1.0),
                                                                 Atom([0.0, -1.0], 1.0))),
                                   spatially_homogeneous=True, name="axis_atoms"),
                     True, note="atoms (1,0) and (0,-1) with unit rates", tags=("additive", "jump")),
        CatalogEntry("switch_up",
                     Triplet.build(1, jumps=JumpKernel(1, atoms=(Atom([3.0], _below_zero),)),
                                   name="switch_up"),
                     True, rate_bound=1.0, space_grid=((-0.5,), (0.5,)),
                     note="upward jump of size 3 at unit rate while x <= 0; not stochastically monotone",
                     tags=("jump",)),
    ]
    return {e.name: e for e in entries}


CATALOG = _build()


def names():
    return sorted(CATALOG)


def get(name) -> CatalogEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown catalog name {name!r}; available: {', '.join(names())}") from None


def jump_catalog():
    """The two-dimensional jump examples used for criterion cross-checks."""
    return [e for e in CATALOG.values() if "jump" in e.tags and e.triplet.dim == 2]
