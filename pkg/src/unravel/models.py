"""Preset models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .initial import BasisPure, InitialSpec
from .state import SplitHamiltonian, validate_hamiltonian


@dataclass(frozen=True, eq=False)
class ModelPreset:
    name: str
    hamiltonian: SplitHamiltonian
    default_initial: InitialSpec
    notes: str = ""


def two_level(eps: float = 0.0, delta: float = 1.0, hbar: float = 1.0) -> ModelPreset:
    """Energies ``(0, eps)`` coupled by a real off-diagonal ``delta``."""
    H = validate_hamiltonian(
        2, [0.0, eps], [[0.0, delta], [delta, 0.0]], hbar, labels=("level-0", "level-1")
    )
    return ModelPreset("two-level", H, BasisPure(0), f"eps={eps}, delta={delta}")


def epr_decay(eps_e: float = 0.0, eps_p: float = 0.0, g: complex = 0.5, hbar: float = 1.0) -> ModelPreset:
    """Single-collision decay of an excitation into an LL or RR photon pair.

    Basis: 0 excitation, 1 LL pair, 2 RR pair.  The excitation couples to
    both pair states with amplitude ``g``; pair states do not couple to
    each other.  Starts on the excitation.
    """
    h = np.zeros((3, 3), dtype=complex)
    h[1, 0] = h[2, 0] = g
    h[0, 1] = h[0, 2] = np.conj(g)
    H = validate_hamiltonian(
        3, [eps_e, eps_p, eps_p], h, hbar, labels=("Ca-excitation", "LL photon pair", "RR photon pair")
    )
    return ModelPreset("epr-decay", H, BasisPure(0), f"eps_e={eps_e}, eps_p={eps_p}, g={g}")


def random_hermitian(
    dim: int, seed: int, free_scale: float = 1.0, int_scale: float = 1.0, hbar: float = 1.0
) -> ModelPreset:
    """Seeded random model for fuzzing engine-vs-oracle agreement.

    Energies are uniform in ``[-free_scale, free_scale]``; the interaction
    is ``int_scale * (M + M^dagger) / 2`` with standard complex Gaussian ``M``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)
    eps = rng.uniform(-free_scale, free_scale, size=dim)
    M = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = int_scale * (M + M.conj().T) / 2
    H = validate_hamiltonian(dim, eps, h, hbar)
    return ModelPreset(
        "random", H, BasisPure(0), f"dim={dim}, seed={seed}, free_scale={free_scale}, int_scale={int_scale}"
    )


PRESETS = {
    "two-level": two_level,
    "epr-decay": epr_decay,
    "random": random_hermitian,
}
