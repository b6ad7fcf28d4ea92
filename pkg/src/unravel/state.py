"""Basis-restricted states, split Hamiltonians and density matrices.

Every trajectory state in this package is a single basis index carrying a
complex prefactor.  There is no type for a linear combination of basis
vectors, so superposition-freeness holds by construction; ``audit_state``
exists to check it at runtime on anything that claims to be a state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    InvalidDensityMatrix,
    NonHermitianInteraction,
    NonPositiveHbar,
)

HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class SplitHamiltonian:
    """``H = diag(free_energies) + interaction`` in the distinguished basis.

    Build instances through :func:`validate_hamiltonian`; the arrays are
    frozen (read-only) after construction.
    """

    dim: int
    free_energies: np.ndarray
    interaction: np.ndarray
    hbar: float = 1.0
    labels: tuple[str, ...] | None = None

    def total(self) -> np.ndarray:
        return np.diag(self.free_energies.astype(complex)) + self.interaction

    @property
    def has_interaction(self) -> bool:
        return bool(np.any(self.interaction != 0))


@dataclass(frozen=True, slots=True)
class BasisState:
    """A scalar multiple of one basis vector: ``prefactor * e(index)``."""

    index: int
    prefactor: complex

    def vector(self, dim: int) -> np.ndarray:
        v = np.zeros(dim, dtype=complex)
        v[self.index] = self.prefactor
        return v


@dataclass(frozen=True, slots=True)
class DyadSample:
    phi: BasisState
    psi: BasisState
    t: float
    jump_count: int = 0

    @property
    def weight(self) -> complex:
        return self.phi.prefactor * self.psi.prefactor.conjugate()


@dataclass(frozen=True, slots=True)
class Triplet:
    weight: complex
    phi_index: int
    psi_index: int


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Dense density matrix, either exact (oracle) or a Monte Carlo estimate.

    ``stderr`` is only set for estimates; it holds per-entry standard errors
    of the real part in ``.real`` and of the imaginary part in ``.imag``.
    """

    entries: np.ndarray
    exact: bool = True
    stderr: np.ndarray | None = None
    t: float | None = None

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def hermiticity_residual(self) -> float:
        return float(np.linalg.norm(self.entries - self.entries.conj().T))

    def combined_se(self) -> float:
        """Root-sum-square of all component standard errors."""
        if self.stderr is None:
            return 0.0
        return float(math.sqrt(np.sum(self.stderr.real**2 + self.stderr.imag**2)))

    def check_valid(self, atol_trace: float = 1e-12, atol_psd: float = 1e-10) -> None:
        """Raise InvalidDensityMatrix unless Hermitian, unit-trace and PSD."""
        rho = self.entries
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise InvalidDensityMatrix(f"not a square matrix: shape {rho.shape}")
        norm = float(np.linalg.norm(rho))
        if self.hermiticity_residual() > 1e-12 * max(norm, 1.0):
            raise InvalidDensityMatrix("density matrix is not Hermitian")
        if abs(self.trace() - 1.0) > atol_trace:
            raise InvalidDensityMatrix(f"trace is {self.trace():.15g}, expected 1")
        lo = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
        if lo < -atol_psd:
            raise InvalidDensityMatrix(f"not positive semidefinite (min eigenvalue {lo:.3e})")


def _as_array(values: Any, dtype: type) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def validate_hamiltonian(
    dim: int,
    free_energies: Any,
    interaction: Any,
    hbar: float = 1.0,
    labels: tuple[str, ...] | list[str] | None = None,
) -> SplitHamiltonian:
    """Check shapes, Hermiticity and ``hbar`` and return a SplitHamiltonian.

    The interaction is never symmetrized: a matrix whose worst residual
    ``|h[i,j] - conj(h[j,i])|`` exceeds ``1e-12 * max|h|`` is rejected.
    """
    if int(dim) != dim or dim < 1:
        raise DimensionMismatch(f"dim must be a positive integer, got {dim!r}")
    dim = int(dim)
    eps = np.asarray(free_energies, dtype=float)
    h = np.asarray(interaction, dtype=complex)
    if eps.shape != (dim,):
        raise DimensionMismatch(f"free_energies has shape {eps.shape}, expected ({dim},)")
    if h.shape != (dim, dim):
        raise DimensionMismatch(f"interaction has shape {h.shape}, expected ({dim}, {dim})")
    if not np.all(np.isfinite(eps)) or not np.all(np.isfinite(h)):
        raise ConfigError("Hamiltonian contains non-finite entries")
    if not (hbar > 0 and math.isfinite(hbar)):
        raise NonPositiveHbar(f"hbar must be positive, got {hbar!r}")
    if labels is not None and len(labels) != dim:
        raise DimensionMismatch(f"{len(labels)} labels for dimension {dim}")

    scale = float(np.abs(h).max()) if h.size else 0.0
    resid = np.abs(h - h.conj().T)
    worst = float(resid.max()) if h.size else 0.0
    if worst > HERMITIAN_RTOL * scale:
        i, j = np.unravel_index(int(np.argmax(resid)), resid.shape)
        raise NonHermitianInteraction(int(i), int(j), worst, scale)

    return SplitHamiltonian(
        dim=dim,
        free_energies=_as_array(eps, float),
        interaction=_as_array(h, complex),
        hbar=float(hbar),
        labels=tuple(labels) if labels is not None else None,
    )


def column_absolute_sums(H: SplitHamiltonian) -> np.ndarray:
    """``N_b = sum_b' |<b'|H_int|b>|`` for every basis column ``b``."""
    return np.abs(H.interaction).sum(axis=0)


def dyad_to_matrix(s: DyadSample, dim: int) -> np.ndarray:
    """Matrix of ``|phi><psi|``; it has at most one nonzero entry."""
    out = np.zeros((dim, dim), dtype=complex)
    out[s.phi.index, s.psi.index] = s.weight
    return out


def audit_state(s: Any, dim: int) -> bool:
    """True iff ``s`` is a BasisState on exactly one valid basis index."""
    return (
        isinstance(s, BasisState)
        and isinstance(s.index, (int, np.integer))
        and not isinstance(s.index, bool)
        and 0 <= s.index < dim
        and isinstance(s.prefactor, (complex, float, int))
    )


def basis_projector(dim: int, i: int, j: int | None = None) -> np.ndarray:
    """Matrix unit ``E_ij`` (``E_ii`` if ``j`` is omitted)."""
    out = np.zeros((dim, dim), dtype=complex)
    out[i, i if j is None else j] = 1.0
    return out


# --- model files -----------------------------------------------------------


def model_to_dict(H: SplitHamiltonian) -> dict[str, Any]:
    rows, cols = np.nonzero(H.interaction)
    entries = [
        [int(r), int(c), float(H.interaction[r, c].real), float(H.interaction[r, c].imag)]
        for r, c in zip(rows, cols)
    ]
    out: dict[str, Any] = {
        "dim": H.dim,
        "hbar": H.hbar,
        "free_energies": [float(e) for e in H.free_energies],
        "interaction": entries,
    }
    if H.labels is not None:
        out["labels"] = list(H.labels)
    return out


def model_from_dict(doc: Any) -> SplitHamiltonian:
    """Build a Hamiltonian from the JSON model-file layout.

    ``interaction`` lists ``[row, col, re, im]`` for nonzero elements only;
    duplicates are rejected and Hermitian closure is checked by
    :func:`validate_hamiltonian`.
    """
    if not isinstance(doc, dict):
        raise ConfigError("model document must be a JSON object")
    missing = [k for k in ("dim", "free_energies", "interaction") if k not in doc]
    if missing:
        raise ConfigError(f"model is missing field(s): {', '.join(missing)}")
    dim = doc["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ConfigError(f"model 'dim' must be a positive integer, got {dim!r}")
    h = np.zeros((dim, dim), dtype=complex)
    seen: set[tuple[int, int]] = set()
    for k, entry in enumerate(doc["interaction"]):
        if not (isinstance(entry, list) and len(entry) == 4):
            raise ConfigError(f"interaction entry {k} must be [row, col, re, im]")
        r, c, re, im = entry
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in (r, c)):
            raise ConfigError(f"interaction entry {k}: row/col must be integers")
        if not (0 <= r < dim and 0 <= c < dim):
            raise ConfigError(f"interaction entry {k}: index ({r}, {c}) out of range")
        if (r, c) in seen:
            raise ConfigError(f"interaction entry {k}: duplicate coordinate ({r}, {c})")
        seen.add((r, c))
        h[r, c] = complex(float(re), float(im))
    return validate_hamiltonian(
        dim, doc["free_energies"], h, float(doc.get("hbar", 1.0)), doc.get("labels")
    )


def load_model_file(path: str | Path) -> SplitHamiltonian:
    """Read a UTF-8 JSON model file; syntax errors report line and column."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read model file: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return model_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def save_model_file(H: SplitHamiltonian, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(H), indent=2) + "\n", encoding="utf-8")
