"""Superposition-free sampling of initial (phi, psi) pairs.

A pure target state ``sum_i a_i e(i)`` is represented by a random basis
state: index ``i`` with probability ``p_i = |a_i| / sum_k |a_k|`` and
prefactor ``a_i / p_i``.  The expectation of ``prefactor * e(index)`` is the
target vector, and ``|prefactor| = sum_k |a_k|`` whatever index is drawn.
Drawing phi and psi independently from the same vector gives a dyad whose
expectation is ``|a><a|``.  Mixtures pick one branch shared by phi and psi.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

from .errors import AllZeroAmplitudes, DimensionMismatch, InvalidInitialSpec
from .state import BasisState

NORM_TOL = 1e-12


@dataclass(frozen=True)
class BasisPure:
    index: int


@dataclass(frozen=True)
class PureAmplitudes:
    amplitudes: tuple[complex, ...]

    def __post_init__(self) -> None:
        amps = tuple(complex(a) for a in self.amplitudes)
        object.__setattr__(self, "amplitudes", amps)
        if not amps:
            raise InvalidInitialSpec("empty amplitude vector")
        norm = sum(abs(a) ** 2 for a in amps)
        if norm == 0:
            raise AllZeroAmplitudes("all amplitudes are zero")
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidInitialSpec(f"amplitudes not normalized: sum |a|^2 = {norm:.15g}")


@dataclass(frozen=True)
class Mixture:
    branches: tuple[tuple[float, PureAmplitudes], ...]

    def __post_init__(self) -> None:
        branches = tuple((float(w), s) for w, s in self.branches)
        object.__setattr__(self, "branches", branches)
        if not branches:
            raise InvalidInitialSpec("mixture has no branches")
        if any(w < 0 for w, _ in branches):
            raise InvalidInitialSpec("mixture weights must be nonnegative")
        total = sum(w for w, _ in branches)
        if abs(total - 1.0) > NORM_TOL:
            raise InvalidInitialSpec(f"mixture weights sum to {total:.15g}, expected 1")
        if len({len(s.amplitudes) for _, s in branches}) != 1:
            raise InvalidInitialSpec("mixture branches have different dimensions")


InitialSpec = Union[BasisPure, PureAmplitudes, Mixture]


def spec_dim(spec: InitialSpec) -> int | None:
    """Hilbert-space dimension implied by the spec (None for BasisPure)."""
    if isinstance(spec, PureAmplitudes):
        return len(spec.amplitudes)
    if isinstance(spec, Mixture):
        return len(spec.branches[0][1].amplitudes)
    return None


def check_spec_dim(spec: InitialSpec, dim: int) -> None:
    if isinstance(spec, BasisPure):
        if not 0 <= spec.index < dim:
            raise DimensionMismatch(f"basis index {spec.index} out of range for dim {dim}")
    elif spec_dim(spec) != dim:
        raise DimensionMismatch(f"initial state has dimension {spec_dim(spec)}, model has {dim}")


class PureSampler:
    """Precomputed cumulative table for one amplitude vector.

    Sampling consumes exactly one ``rng.random()`` draw, unless the
    support has a single index, in which case it consumes none.
    """

    __slots__ = ("indices", "cumulative", "prefactors")

    def __init__(self, amplitudes: Any):
        a = [complex(x) for x in amplitudes]
        total = sum(abs(x) for x in a)
        if total == 0:
            raise AllZeroAmplitudes("cannot sample from an all-zero amplitude vector")
        self.indices: list[int] = []
        self.prefactors: list[complex] = []
        probs: list[float] = []
        for i, x in enumerate(a):
            if x == 0:
                continue
            p = abs(x) / total
            self.indices.append(i)
            self.prefactors.append(x / p)
            probs.append(p)
        acc = 0.0
        self.cumulative: list[float] = []
        for p in probs:
            acc += p
            self.cumulative.append(acc)
        self.cumulative[-1] = 1.0

    def outcomes(self) -> list[tuple[float, BasisState]]:
        prev = 0.0
        out = []
        for i, c, cum in zip(self.indices, self.prefactors, self.cumulative):
            out.append((cum - prev, BasisState(i, c)))
            prev = cum
        return out

    def sample(self, rng: random.Random) -> BasisState:
        if len(self.indices) == 1:
            return BasisState(self.indices[0], self.prefactors[0])
        k = bisect.bisect_right(self.cumulative, rng.random())
        k = min(k, len(self.indices) - 1)
        return BasisState(self.indices[k], self.prefactors[k])


def sample_pure_vector(a: Any, rng: random.Random) -> BasisState:
    """Draw one basis state whose expectation is the amplitude vector ``a``."""
    return PureSampler(a).sample(rng)


class InitialSampler:
    """Compiled sampler for an InitialSpec; reuse it across trajectories."""

    def __init__(self, spec: InitialSpec):
        self.spec = spec
        if isinstance(spec, BasisPure):
            self._fixed = BasisState(int(spec.index), 1.0 + 0j)
            self._branches: list[PureSampler] = []
            self._cumulative: list[float] = []
        elif isinstance(spec, PureAmplitudes):
            self._fixed = None
            self._branches = [PureSampler(spec.amplitudes)]
            self._cumulative = [1.0]
        else:
            self._fixed = None
            live = [(w, s) for w, s in spec.branches if w > 0]
            self._branches = [PureSampler(s.amplitudes) for _, s in live]
            acc = 0.0
            self._cumulative = []
            for w, _ in live:
                acc += w
                self._cumulative.append(acc)
            self._cumulative[-1] = 1.0

    def sample(self, rng: random.Random) -> tuple[BasisState, BasisState]:
        if self._fixed is not None:
            return self._fixed, self._fixed
        if len(self._branches) == 1:
            branch = self._branches[0]
        else:
            k = bisect.bisect_right(self._cumulative, rng.random())
            branch = self._branches[min(k, len(self._branches) - 1)]
        return branch.sample(rng), branch.sample(rng)


def sample_initial_pair(spec: InitialSpec, rng: random.Random) -> tuple[BasisState, BasisState]:
    return InitialSampler(spec).sample(rng)


def enumerate_initial_outcomes(spec: InitialSpec) -> list[tuple[float, BasisState, BasisState]]:
    """Every (probability, phi, psi) outcome of the initial sampling.

    Probabilities are computed as ``w_k * (|a_i| / S) * (|a_j| / S)``
    directly from the amplitudes, independent of the sampler tables.
    """
    if isinstance(spec, BasisPure):
        s = BasisState(int(spec.index), 1.0 + 0j)
        return [(1.0, s, s)]
    branches = [(1.0, spec)] if isinstance(spec, PureAmplitudes) else list(spec.branches)
    out = []
    for w, pure in branches:
        if w == 0:
            continue
        a = pure.amplitudes
        total = sum(abs(x) for x in a)
        support = [(abs(x) / total, BasisState(i, x * total / abs(x))) for i, x in enumerate(a) if x != 0]
        for p, phi in support:
            for q, psi in support:
                out.append((w * p * q, phi, psi))
    return out


def initial_density(spec: InitialSpec, dim: int) -> np.ndarray:
    """Target ``rho_0 = sum_k w_k |a_k><a_k|``."""
    check_spec_dim(spec, dim)
    rho = np.zeros((dim, dim), dtype=complex)
    if isinstance(spec, BasisPure):
        rho[spec.index, spec.index] = 1.0
        return rho
    branches = [(1.0, spec)] if isinstance(spec, PureAmplitudes) else spec.branches
    for w, pure in branches:
        a = np.array(pure.amplitudes, dtype=complex)
        rho += w * np.outer(a, a.conj())
    return rho


# --- JSON layout -------------------------------------------------------------


def _parse_amplitudes(raw: Any) -> PureAmplitudes:
    if not isinstance(raw, list) or not raw:
        raise InvalidInitialSpec("'pure' must be a nonempty list of [re, im] pairs")
    amps = []
    for k, x in enumerate(raw):
        if isinstance(x, (int, float)) and not isinstance(x, bool):
            amps.append(complex(x))
        elif isinstance(x, list) and len(x) == 2:
            amps.append(complex(float(x[0]), float(x[1])))
        else:
            raise InvalidInitialSpec(f"amplitude {k} must be [re, im]")
    return PureAmplitudes(tuple(amps))


def parse_initial(doc: Any) -> InitialSpec:
    """Parse ``{"basis": k}``, ``{"pure": [[re, im], ...]}`` or ``{"mixture": [...]}``."""
    if not isinstance(doc, dict) or len(doc) != 1:
        raise InvalidInitialSpec("initial spec must be an object with one of 'basis', 'pure', 'mixture'")
    (key, value), = doc.items()
    if key == "basis":
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise InvalidInitialSpec("'basis' must be a nonnegative integer")
        return BasisPure(value)
    if key == "pure":
        return _parse_amplitudes(value)
    if key == "mixture":
        if not isinstance(value, list):
            raise InvalidInitialSpec("'mixture' must be a list")
        branches = []
        for item in value:
            if not isinstance(item, dict) or "w" not in item or "pure" not in item:
                raise InvalidInitialSpec("mixture branches look like {\"w\": 0.5, \"pure\": [...]}")
            branches.append((float(item["w"]), _parse_amplitudes(item["pure"])))
        return Mixture(tuple(branches))
    raise InvalidInitialSpec(f"unknown initial spec kind {key!r}")


def initial_to_json(spec: InitialSpec) -> dict[str, Any]:
    def amps(p: PureAmplitudes) -> list[list[float]]:
        return [[a.real, a.imag] for a in p.amplitudes]

    if isinstance(spec, BasisPure):
        return {"basis": spec.index}
    if isinstance(spec, PureAmplitudes):
        return {"pure": amps(spec)}
    return {"mixture": [{"w": w, "pure": amps(p)} for w, p in spec.branches]}


def equal_superposition(dim: int) -> PureAmplitudes:
    """``(e_0 + ... + e_{d-1}) / sqrt(d)``."""
    return PureAmplitudes(tuple([1 / math.sqrt(dim)] * dim))
