"""Superposition-free stochastic unraveling of the von Neumann equation.

Trajectories carry a pair of states, each a single basis vector times a
complex prefactor.  Free evolution only rotates prefactors; the interaction
acts through Poisson-timed jumps between basis vectors.  The density matrix
is recovered as the compensated ensemble mean of the dyads ``|phi><psi|``
and can be checked against exact evolution with :mod:`unravel.oracle`.
"""

__version__ = "0.1.0"

from .initial import BasisPure, InitialSampler, Mixture, PureAmplitudes, parse_initial
from .jumps import JumpConfig, JumpTable, TrajectoryRecord, auto_rate, run_trajectory
from .models import epr_decay, random_hermitian, two_level
from .oracle import build_propagator, eigencheck, frobenius_distance, propagate
from .runner import compare_to_oracle, convergence_scan, run_ensemble
from .state import BasisState, DensityMatrix, DyadSample, SplitHamiltonian, Triplet, validate_hamiltonian

__all__ = [
    "BasisPure",
    "BasisState",
    "DensityMatrix",
    "DyadSample",
    "InitialSampler",
    "JumpConfig",
    "JumpTable",
    "Mixture",
    "PureAmplitudes",
    "SplitHamiltonian",
    "TrajectoryRecord",
    "Triplet",
    "auto_rate",
    "build_propagator",
    "compare_to_oracle",
    "convergence_scan",
    "eigencheck",
    "epr_decay",
    "frobenius_distance",
    "parse_initial",
    "propagate",
    "random_hermitian",
    "run_ensemble",
    "run_trajectory",
    "two_level",
    "validate_hamiltonian",
]
