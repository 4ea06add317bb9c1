"""Positive dependence of time-inhomogeneous jump processes: triplets,
generators, orthant criteria, simulation and Monte Carlo dependence screens."""

__version__ = "0.1.0"

from .kernel import Atom, JumpKernel, Triplet, eval_symbol, levy_mass, validate_triplet  # noqa: E402
from .generator import apply_generator, gamma, check_association_generator  # noqa: E402
from .orthant import classify_dependence, mixed_orthant_mass  # noqa: E402
from .simulate import SimulationScheme, simulate  # noqa: E402

__all__ = [
    "__version__",
    "Atom",
    "JumpKernel",
    "Triplet",
    "eval_symbol",
    "levy_mass",
    "validate_triplet",
    "apply_generator",
    "gamma",
    "check_association_generator",
    "classify_dependence",
    "mixed_orthant_mass",
    "SimulationScheme",
    "simulate",
]
