"""Exact von Neumann evolution for small Hilbert spaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EigenFailure, NonHermitianObservable
from .state import DensityMatrix, SplitHamiltonian

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ExactPropagator:
    dim: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    hbar: float

    def unitary(self, t: float) -> np.ndarray:
        V = self.eigenvectors
        return (V * np.exp(-1j * self.eigenvalues * t / self.hbar)) @ V.conj().T


def build_propagator(H: SplitHamiltonian) -> ExactPropagator:
    Htot = H.total()
    try:
        lam, V = np.linalg.eigh(Htot)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(float("nan")) from exc
    scale = max(float(np.linalg.norm(Htot)), 1.0)
    recon = float(np.linalg.norm((V * lam) @ V.conj().T - Htot))
    unit = float(np.linalg.norm(V.conj().T @ V - np.eye(H.dim)))
    if recon > RESIDUAL_TOL * scale or unit > RESIDUAL_TOL:
        raise EigenFailure(max(recon / scale, unit))
    return ExactPropagator(H.dim, lam, V, H.hbar)


def propagate(p: ExactPropagator, rho0: DensityMatrix | np.ndarray, t: float) -> DensityMatrix:
    """``U rho0 U^dagger`` with ``U = exp(-i H t / hbar)``."""
    if not isinstance(rho0, DensityMatrix):
        rho0 = DensityMatrix(np.asarray(rho0, dtype=complex))
    if rho0.dim != p.dim:
        raise DimensionMismatch(f"rho0 has dimension {rho0.dim}, propagator {p.dim}")
    rho0.check_valid()
    if t == 0:
        return DensityMatrix(rho0.entries.copy(), exact=True, t=0.0)
    U = p.unitary(t)
    return DensityMatrix(U @ rho0.entries @ U.conj().T, exact=True, t=float(t))


def exact_densities(H: SplitHamiltonian, rho0: np.ndarray, times) -> list[DensityMatrix]:
    p = build_propagator(H)
    return [propagate(p, rho0, t) for t in times]


def frobenius_distance(a: DensityMatrix | np.ndarray, b: DensityMatrix | np.ndarray) -> float:
    x = a.entries if isinstance(a, DensityMatrix) else np.asarray(a)
    y = b.entries if isinstance(b, DensityMatrix) else np.asarray(b)
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {y.shape} differ")
    return float(np.linalg.norm(x - y))


@dataclass(frozen=True)
class EigenCheck:
    """Outcome of :func:`eigencheck`.

    ``value`` is the sharp eigenvalue when ``rho`` is a generalized
    eigenstate; otherwise None, with ``commutes`` telling a mixture of
    eigenvalues (True) apart from a non-commuting state (False).
    """

    value: float | None
    commutes: bool

    @property
    def is_eigenstate(self) -> bool:
        return self.value is not None


def eigencheck(rho: DensityMatrix | np.ndarray, A: np.ndarray, tol: float = 1e-9) -> EigenCheck:
    r = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    A = np.asarray(A, dtype=complex)
    if A.shape != r.shape:
        raise DimensionMismatch(f"observable shape {A.shape} vs density {r.shape}")
    if np.abs(A - A.conj().T).max() > 1e-12 * max(float(np.abs(A).max()), 1.0):
        raise NonHermitianObservable("observable is not Hermitian")
    comm = float(np.linalg.norm(A @ r - r @ A))
    if comm > tol * float(np.linalg.norm(A)) * float(np.linalg.norm(r)):
        return EigenCheck(None, False)
    a = complex(np.trace(A @ r) / np.trace(r)).real
    if float(np.linalg.norm(A @ r - a * r)) <= tol:
        return EigenCheck(a, True)
    return EigenCheck(None, True)
