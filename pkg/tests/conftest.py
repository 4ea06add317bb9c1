import numpy as np
import pytest

from fellerlab.kernel import Atom, JumpKernel, Triplet


def atomic(dim, atoms, drift=None, diffusion=None, additive=True):
    return Triplet.build(dim, drift=drift, diffusion=diffusion,
                         jumps=JumpKernel(dim, atoms=tuple(Atom(np.asarray(l, float), r) for l, r in atoms)),
                         spatially_homogeneous=additive)


@pytest.fixture
def brownian2():
    return Triplet.build(2, diffusion=np.eye(2), spatially_homogeneous=True)
