"""Triplet unraveling ``(c, b_phi, b_psi)`` and ensemble compression.

The weight is ``c = c_phi * conj(c_psi)``.  A jump on the psi side therefore
multiplies ``c`` by the conjugate of the ket jump factor.  Trajectories
consume random numbers in the same order as :func:`unravel.jumps.run_trajectory`,
so a shared stream reproduces the two-process weights exactly.
"""

from __future__ import annotations

import cmath
import json
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import EmptyEnsemble, MixedTimes
from .initial import InitialSampler, InitialSpec, check_spec_dim
from .jumps import JumpConfig, JumpTable, _cached_table, _check_inputs, sample_waiting_time
from .state import DensityMatrix, DyadSample, SplitHamiltonian, Triplet

PRUNE_RTOL = 1e-15


@dataclass
class TripletEnsemble:
    entries: list[Triplet]
    t: float
    rate: float
    hbar: float = 1.0
    trajectories: int = field(default=-1)

    def __post_init__(self) -> None:
        if self.trajectories < 0:
            self.trajectories = len(self.entries)


def from_dyad(s: DyadSample) -> Triplet:
    return Triplet(s.phi.prefactor * s.psi.prefactor.conjugate(), s.phi.index, s.psi.index)


def evolve_free_triplet(tr: Triplet, H: SplitHamiltonian, dt: float) -> Triplet:
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if tr.phi_index == tr.psi_index or dt == 0:
        return tr
    de = float(H.free_energies[tr.phi_index] - H.free_energies[tr.psi_index])
    return Triplet(tr.weight * cmath.exp(-1j * de * dt / H.hbar), tr.phi_index, tr.psi_index)


def jump_triplet(
    tr: Triplet, H: SplitHamiltonian, rate: float, rng: random.Random, table: JumpTable | None = None
) -> Triplet:
    table = table or _cached_table(H, float(rate))
    if rng.random() < 0.5:
        b2, f = table.draw(tr.phi_index, rng)
        return Triplet(tr.weight * f, b2, tr.psi_index)
    b2, f = table.draw(tr.psi_index, rng)
    return Triplet(tr.weight * f.conjugate(), tr.phi_index, b2)


def run_triplet_trajectory(
    H: SplitHamiltonian,
    spec: InitialSpec,
    cfg: JumpConfig,
    rng: random.Random,
    *,
    table: JumpTable | None = None,
    sampler: InitialSampler | None = None,
) -> list[Triplet]:
    """One triplet trajectory, returned as one Triplet per sample time."""
    _check_inputs(H, cfg)
    if sampler is None:
        check_spec_dim(spec, H.dim)
        sampler = InitialSampler(spec)
    rate = cfg.rate
    if table is None and rate > 0:
        table = _cached_table(H, rate)
    omega = [float(e) / H.hbar for e in H.free_energies]

    phi, psi = sampler.sample(rng)
    pi, qi = phi.index, psi.index
    w = phi.prefactor * psi.prefactor.conjugate()
    t = 0.0
    next_jump = math.inf if (w == 0 or rate == 0) else sample_waiting_time(rng, rate)
    out = []
    for ts in cfg.sample_times:
        while next_jump <= ts:
            if pi != qi:
                w *= cmath.exp(-1j * (omega[pi] - omega[qi]) * (next_jump - t))
            t = next_jump
            if rng.random() < 0.5:
                pi, f = table.draw(pi, rng)
            else:
                qi, f = table.draw(qi, rng)
                f = f.conjugate()
            w *= f
            next_jump = math.inf if f == 0 else t + sample_waiting_time(rng, rate)
        if pi != qi and ts != t:
            w *= cmath.exp(-1j * (omega[pi] - omega[qi]) * (ts - t))
        t = ts
        out.append(Triplet(w, pi, qi))
    return out


def compress(e: TripletEnsemble, times: Sequence[float] | None = None) -> TripletEnsemble:
    """Sum weights per ``(phi_index, psi_index)`` bucket.

    Buckets whose summed weight is below ``1e-15 * max|weight|`` are pruned.
    ``times`` optionally gives the per-entry times; all must equal ``e.t``.
    """
    if times is not None and any(t != e.t for t in times):
        raise MixedTimes("compress needs entries from a single time")
    buckets: dict[tuple[int, int], complex] = defaultdict(complex)
    for tr in e.entries:
        buckets[(tr.phi_index, tr.psi_index)] += tr.weight
    big = max((abs(w) for w in buckets.values()), default=0.0)
    entries = [
        Triplet(w, i, j)
        for (i, j), w in sorted(buckets.items())
        if big == 0 or abs(w) >= PRUNE_RTOL * big
    ]
    return TripletEnsemble(entries, e.t, e.rate, e.hbar, e.trajectories)


def merge_ensembles(parts: Iterable[TripletEnsemble]) -> TripletEnsemble:
    """Concatenate ensembles taken at the same time, then compress."""
    parts = list(parts)
    if not parts:
        raise EmptyEnsemble("nothing to merge")
    first = parts[0]
    if any(p.t != first.t or p.rate != first.rate or p.hbar != first.hbar for p in parts):
        raise MixedTimes("ensembles differ in time, rate or hbar")
    entries = [tr for p in parts for tr in p.entries]
    total = sum(p.trajectories for p in parts)
    return compress(TripletEnsemble(entries, first.t, first.rate, first.hbar, total))


def estimate_density_triplet(e: TripletEnsemble, dim: int | None = None) -> DensityMatrix:
    if not e.entries or e.trajectories <= 0:
        raise EmptyEnsemble("empty triplet ensemble")
    if dim is None:
        dim = 1 + max(max(tr.phi_index, tr.psi_index) for tr in e.entries)
    rho = np.zeros((dim, dim), dtype=complex)
    for tr in e.entries:
        rho[tr.phi_index, tr.psi_index] += tr.weight
    return DensityMatrix(math.exp(e.rate * e.t) * rho / e.trajectories, exact=False, t=e.t)


def ensemble_to_json(e: TripletEnsemble) -> dict[str, Any]:
    return {
        "t": e.t,
        "M": e.trajectories,
        "rate": e.rate,
        "hbar": e.hbar,
        "entries": [[tr.phi_index, tr.psi_index, tr.weight.real, tr.weight.imag] for tr in e.entries],
    }


def ensemble_from_json(doc: dict[str, Any]) -> TripletEnsemble:
    entries = [Triplet(complex(re, im), int(i), int(j)) for i, j, re, im in doc["entries"]]
    return TripletEnsemble(entries, float(doc["t"]), float(doc["rate"]), float(doc.get("hbar", 1.0)), int(doc["M"]))


def dumps_ensemble(e: TripletEnsemble) -> str:
    return json.dumps(ensemble_to_json(e))
