"""Two-process unraveling: free phase evolution plus Poisson-timed jumps.

Jump law for a ket sitting on basis vector ``b`` with ``N_b = sum_b' |h[b', b]|``:
the target ``b'`` is drawn with probability ``|h[b', b]| / N_b`` and the
prefactor is multiplied by ``(-2i / (rate * hbar)) * N_b * h[b', b] / |h[b', b]|``.
The mean of that outcome is ``(-2i / (rate * hbar)) * H_int |ket>``.  Either
side jumps with probability 1/2, so per unit time the expected dyad changes
by ``-(i/hbar) [H_int, rho] - rate * rho``.  Estimators undo the last term
with a factor ``exp(rate * t)``.  A column with ``N_b = 0`` sends the state to
a zero prefactor ("dead" trajectory).
"""

from __future__ import annotations

import bisect
import cmath
import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import EmptyEnsemble, GridMismatch, NonHermitianObservable
from .initial import InitialSampler, InitialSpec, check_spec_dim
from .state import BasisState, DensityMatrix, DyadSample, SplitHamiltonian, column_absolute_sums
from .stats import MomentAccumulator, accumulate, finalize, finalize_mean


@dataclass(frozen=True)
class JumpConfig:
    rate: float
    sample_times: tuple[float, ...]
    hbar: float = 1.0

    def __post_init__(self) -> None:
        times = tuple(float(t) for t in self.sample_times)
        object.__setattr__(self, "sample_times", times)
        object.__setattr__(self, "rate", float(self.rate))
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be a finite nonnegative number, got {self.rate!r}")
        if not times:
            raise ValueError("sample_times is empty")
        if times[0] < 0:
            raise ValueError("sample_times must start at t >= 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("sample_times must be strictly increasing")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")


@dataclass(frozen=True)
class TrajectoryRecord:
    samples: tuple[DyadSample, ...]
    jump_count: int
    seed_id: int = 0
    # (time, side, from_index, to_index) per jump; filled only on request
    events: tuple[tuple[float, str, int, int], ...] = field(default=(), repr=False)


def auto_rate(H: SplitHamiltonian) -> float:
    """Smallest rate with every jump factor of magnitude <= 1.

    Zero for a model without interaction, in which case no jumps occur.
    """
    n = column_absolute_sums(H)
    return float(2.0 / H.hbar * n.max()) if n.size else 0.0


def resolve_rate(H: SplitHamiltonian, rate: float | str) -> float:
    if rate == "auto":
        return auto_rate(H)
    rate = float(rate)
    if rate == 0 and H.has_interaction:
        raise ValueError("rate must be positive for a model with nonzero interaction")
    return rate


class JumpTable:
    """Per-column jump targets, probabilities and prefactor multipliers.

    ``factor_scale`` multiplies every jump factor; anything other than 1
    breaks unbiasedness and exists only for mutation tests.
    """

    def __init__(self, H: SplitHamiltonian, rate: float, factor_scale: float = 1.0):
        if rate <= 0:
            raise ValueError("jump table needs a positive rate")
        self.dim = H.dim
        self.rate = float(rate)
        self.hbar = H.hbar
        self.norms = column_absolute_sums(H)
        h = H.interaction
        pref = -2j / (rate * H.hbar)
        self.targets: list[list[int]] = []
        self.probs: list[list[float]] = []
        self.cumulative: list[list[float]] = []
        self.factors: list[list[complex]] = []
        for b in range(H.dim):
            nb = float(self.norms[b])
            tg, pr, cu, fa = [], [], [], []
            acc = 0.0
            if nb > 0:
                for b2 in range(H.dim):
                    x = complex(h[b2, b])
                    if x == 0:
                        continue
                    p = abs(x) / nb
                    acc += p
                    tg.append(b2)
                    pr.append(p)
                    cu.append(acc)
                    fa.append(factor_scale * pref * nb * (x / abs(x)))
                cu[-1] = 1.0
            self.targets.append(tg)
            self.probs.append(pr)
            self.cumulative.append(cu)
            self.factors.append(fa)

    def is_dead(self, b: int) -> bool:
        return not self.targets[b]

    def draw(self, b: int, rng: random.Random) -> tuple[int, complex]:
        """Sample ``(b', factor)`` for a ket on ``b``; ``(b, 0)`` for a dead column.

        A live column always consumes exactly one uniform draw.
        """
        tg = self.targets[b]
        if not tg:
            return b, 0j
        k = bisect.bisect_right(self.cumulative[b], rng.random())
        if k >= len(tg):
            k = len(tg) - 1
        return tg[k], self.factors[b][k]

    def outcomes(self, b: int) -> list[tuple[float, int, complex]]:
        """All ``(probability, b', factor)`` outcomes for a ket on ``b``."""
        if not self.targets[b]:
            return [(1.0, b, 0j)]
        return list(zip(self.probs[b], self.targets[b], self.factors[b]))


@lru_cache(maxsize=64)
def _cached_table(H: SplitHamiltonian, rate: float) -> JumpTable:
    return JumpTable(H, rate)


def evolve_free(s: BasisState, H: SplitHamiltonian, dt: float) -> BasisState:
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    eps = float(H.free_energies[s.index])
    return BasisState(s.index, s.prefactor * cmath.exp(-1j * eps * dt / H.hbar))


def sample_waiting_time(rng: random.Random, rate: float) -> float:
    """Exponential waiting time with mean ``1/rate``; never returns 0."""
    while True:
        u = rng.random()
        if u > 0.0:
            return -math.log(u) / rate


def apply_jump(
    s: BasisState, H: SplitHamiltonian, rate: float, rng: random.Random, table: JumpTable | None = None
) -> BasisState:
    table = table or _cached_table(H, float(rate))
    b2, f = table.draw(s.index, rng)
    return BasisState(b2, s.prefactor * f)


def run_trajectory(
    H: SplitHamiltonian,
    spec: InitialSpec,
    cfg: JumpConfig,
    rng: random.Random,
    *,
    seed_id: int = 0,
    table: JumpTable | None = None,
    sampler: InitialSampler | None = None,
    log_events: bool = False,
) -> TrajectoryRecord:
    """Simulate one (phi, psi) trajectory and snapshot it at ``cfg.sample_times``.

    RNG draw order: initial pair, then per event: waiting time, side,
    target.  The triplet engine follows the same order.
    """
    _check_inputs(H, cfg)
    if sampler is None:
        check_spec_dim(spec, H.dim)
        sampler = InitialSampler(spec)
    rate = cfg.rate
    if table is None and rate > 0:
        table = _cached_table(H, rate)
    omega = [float(e) / H.hbar for e in H.free_energies]

    phi, psi = sampler.sample(rng)
    pi, pc = phi.index, phi.prefactor
    qi, qc = psi.index, psi.prefactor
    t = 0.0
    jumps = 0
    events = []
    dead = pc == 0 or qc == 0
    next_jump = math.inf if (dead or rate == 0) else t + sample_waiting_time(rng, rate)
    samples = []
    for ts in cfg.sample_times:
        while next_jump <= ts:
            dt = next_jump - t
            pc *= cmath.exp(-1j * omega[pi] * dt)
            qc *= cmath.exp(-1j * omega[qi] * dt)
            t = next_jump
            if rng.random() < 0.5:
                b2, f = table.draw(pi, rng)
                if log_events:
                    events.append((t, "phi", pi, b2))
                pi, pc = b2, pc * f
            else:
                b2, f = table.draw(qi, rng)
                if log_events:
                    events.append((t, "psi", qi, b2))
                qi, qc = b2, qc * f
            jumps += 1
            if f == 0:
                next_jump = math.inf
            else:
                next_jump = t + sample_waiting_time(rng, rate)
        dt = ts - t
        if dt:
            pc *= cmath.exp(-1j * omega[pi] * dt)
            qc *= cmath.exp(-1j * omega[qi] * dt)
        t = ts
        samples.append(DyadSample(BasisState(pi, pc), BasisState(qi, qc), ts, jumps))
    return TrajectoryRecord(tuple(samples), jumps, seed_id, tuple(events))


def _check_inputs(H: SplitHamiltonian, cfg: JumpConfig) -> None:
    if cfg.hbar != H.hbar:
        raise ValueError(f"config hbar {cfg.hbar} differs from model hbar {H.hbar}")
    if cfg.rate == 0 and H.has_interaction:
        raise ValueError("rate must be positive for a model with nonzero interaction")


def audit_record(record: TrajectoryRecord, dim: int) -> bool:
    """Every recorded phi and psi is a single basis index in range."""
    from .state import audit_state

    return all(audit_state(s.phi, dim) and audit_state(s.psi, dim) for s in record.samples)


# --- estimators ----------------------------------------------------------------


def _time_index_ok(records: Sequence[TrajectoryRecord], cfg: JumpConfig, time_index: int) -> None:
    if not records:
        raise EmptyEnsemble("no trajectories")
    if not 0 <= time_index < len(cfg.sample_times):
        raise GridMismatch(f"time index {time_index} outside grid of {len(cfg.sample_times)}")


def records_accumulator(records: Sequence[TrajectoryRecord], cfg: JumpConfig, dim: int) -> MomentAccumulator:
    acc = MomentAccumulator(dim, cfg.sample_times, cfg.rate, cfg.hbar)
    for rec in records:
        accumulate(acc, rec)
    return acc


def estimate_density(
    records: Sequence[TrajectoryRecord], cfg: JumpConfig, time_index: int, dim: int | None = None
) -> DensityMatrix:
    """``exp(rate t) * mean(c_phi conj(c_psi) E[b_phi, b_psi])`` at one grid time.

    Standard errors are attached when at least two trajectories are given.
    """
    _time_index_ok(records, cfg, time_index)
    if dim is None:
        dim = 1 + max(max(s.phi.index, s.psi.index) for r in records for s in r.samples)
    acc = records_accumulator(records, cfg, dim)
    t = cfg.sample_times[time_index]
    if acc.count >= 2:
        mean, se = finalize(acc, time_index)
    else:
        mean, se = finalize_mean(acc, time_index), None
    return DensityMatrix(mean, exact=False, stderr=se, t=t)


@dataclass(frozen=True)
class ObservableEstimate:
    value: complex
    se_re: float
    se_im: float


def estimate_observable(
    records: Sequence[TrajectoryRecord], cfg: JumpConfig, A: np.ndarray, time_index: int
) -> ObservableEstimate:
    """Estimate ``tr(rho_t A)`` with per-component standard errors.

    For a sample mean the jackknife SE coincides with the plain
    ``std / sqrt(M)`` computed here.  A nonzero imaginary part beyond its SE
    signals a bug, since ``tr(rho A)`` is real for Hermitian ``A``.
    """
    A = np.asarray(A, dtype=complex)
    scale = max(float(np.abs(A).max()), 1.0) if A.size else 1.0
    if A.ndim != 2 or A.shape[0] != A.shape[1] or np.abs(A - A.conj().T).max() > 1e-12 * scale:
        raise NonHermitianObservable("observable must be a Hermitian square matrix")
    _time_index_ok(records, cfg, time_index)
    vals = np.empty(len(records), dtype=complex)
    for m, rec in enumerate(records):
        s = rec.samples[time_index]
        if s.t != cfg.sample_times[time_index]:
            raise GridMismatch(f"record sampled at {s.t}, grid has {cfg.sample_times[time_index]}")
        vals[m] = s.weight * A[s.psi.index, s.phi.index]
    g = math.exp(cfg.rate * cfg.sample_times[time_index])
    n = len(vals)
    mean = complex(vals.mean())
    if n < 2:
        return ObservableEstimate(g * mean, math.nan, math.nan)
    se_re = float(vals.real.std(ddof=1) / math.sqrt(n))
    se_im = float(vals.imag.std(ddof=1) / math.sqrt(n))
    return ObservableEstimate(g * mean, g * se_re, g * se_im)


# --- exact expectation of the stochastic dynamics -------------------------------


def jump_drift(table: JumpTable, phi: BasisState, psi: BasisState) -> np.ndarray:
    """Exact ``rate * (E[dyad after one event] - dyad)`` by outcome enumeration.

    Equals ``-(i/hbar) [H_int, dyad] - rate * dyad`` when the table is sound.
    """
    d = table.dim
    out = np.zeros((d, d), dtype=complex)
    base = phi.prefactor * psi.prefactor.conjugate()
    for p, b2, f in table.outcomes(phi.index):
        out[b2, psi.index] += 0.5 * p * f * base
    for p, b2, f in table.outcomes(psi.index):
        out[phi.index, b2] += 0.5 * p * f.conjugate() * base
    out[phi.index, psi.index] -= base
    return table.rate * out


def expected_dyad_generator(H: SplitHamiltonian, rate: float, table: JumpTable | None = None) -> np.ndarray:
    """Superoperator ``L`` (row-major vec) with ``d/dt E[dyad] = L E[dyad]``.

    Built from the jump table's outcome enumeration plus the free phases,
    so ``exp(rate t) * expm(t L)`` is the exact mean of the engine, without
    sampling.
    """
    d = H.dim
    L = np.zeros((d * d, d * d), dtype=complex)
    omega = np.asarray(H.free_energies) / H.hbar
    if rate > 0:
        table = table or JumpTable(H, rate)
    for a in range(d):
        for b in range(d):
            col = a * d + b
            L[col, col] += -1j * (omega[a] - omega[b])
            if rate == 0:
                continue
            L[col, col] -= rate
            for p, a2, f in table.outcomes(a):
                L[a2 * d + b, col] += 0.5 * rate * p * f
            for p, b2, f in table.outcomes(b):
                L[a * d + b2, col] += 0.5 * rate * p * f.conjugate()
    return L


def expected_density(H: SplitHamiltonian, rho0: np.ndarray, rate: float, t: float, table: JumpTable | None = None) -> np.ndarray:
    """Exact compensated mean of the engine at time ``t``."""
    from scipy.linalg import expm

    d = H.dim
    L = expected_dyad_generator(H, rate, table)
    vec = expm(t * L) @ np.asarray(rho0, dtype=complex).reshape(d * d)
    return math.exp(rate * t) * vec.reshape(d, d)
