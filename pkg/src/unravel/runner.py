"""Ensemble orchestration: chunked trajectory runs, oracle comparison, scans.

Trajectory ``k`` always uses the stream ``trajectory_rng(seed, k)`` and
trajectories are grouped into fixed-size chunks by id.  Chunk accumulators
are merged in chunk order, so the result does not depend on how many
worker processes ran the chunks.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .initial import InitialSampler, InitialSpec, check_spec_dim, initial_density
from .jumps import JumpConfig, JumpTable, TrajectoryRecord, _check_inputs, audit_record, run_trajectory
from .oracle import build_propagator, frobenius_distance, propagate
from .seeding import stream_seed, trajectory_rng
from .state import SplitHamiltonian, Triplet
from .stats import MomentAccumulator, accumulate_weights, combined_se, finalize, finalize_mean, merge
from .triplets import TripletEnsemble, compress, merge_ensembles, run_triplet_trajectory

CHUNK_SIZE = 2048
ENGINES = ("two-process", "triplet")


@dataclass
class EnsembleResult:
    acc: MomentAccumulator
    jumps: int = 0
    audited: int = 0
    audit_failures: int = 0
    ensembles: list[TripletEnsemble] | None = None

    def density(self, time_index: int) -> tuple[np.ndarray, np.ndarray]:
        """(mean, se); se is all zeros for a single trajectory."""
        if self.acc.count >= 2:
            return finalize(self.acc, time_index)
        mean = finalize_mean(self.acc, time_index)
        return mean, np.zeros_like(mean)


@dataclass(frozen=True)
class _Chunk:
    H: SplitHamiltonian
    spec: InitialSpec
    cfg: JumpConfig
    seed: int
    start: int
    stop: int
    engine: str
    factor_scale: float = 1.0


def _run_chunk(ch: _Chunk) -> EnsembleResult:
    H, cfg = ch.H, ch.cfg
    table = JumpTable(H, cfg.rate, ch.factor_scale) if cfg.rate > 0 else None
    sampler = InitialSampler(ch.spec)
    rows: list[list[int]] = []
    cols: list[list[int]] = []
    weights: list[list[complex]] = []
    jumps = failures = 0
    rng = random.Random()
    for tid in range(ch.start, ch.stop):
        trajectory_rng(ch.seed, tid, reuse=rng)
        if ch.engine == "two-process":
            rec = run_trajectory(H, ch.spec, cfg, rng, seed_id=tid, table=table, sampler=sampler)
            jumps += rec.jump_count
            if not audit_record(rec, H.dim):
                failures += 1
            rows.append([s.phi.index for s in rec.samples])
            cols.append([s.psi.index for s in rec.samples])
            weights.append([s.weight for s in rec.samples])
        else:
            trs = run_triplet_trajectory(H, ch.spec, cfg, rng, table=table, sampler=sampler)
            rows.append([tr.phi_index for tr in trs])
            cols.append([tr.psi_index for tr in trs])
            weights.append([tr.weight for tr in trs])
    acc = MomentAccumulator(H.dim, cfg.sample_times, cfg.rate, cfg.hbar)
    n = ch.stop - ch.start
    audited = n * len(cfg.sample_times) if ch.engine == "two-process" else 0
    if n:
        accumulate_weights(
            acc, np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp), np.array(weights, dtype=complex)
        )
    ensembles = None
    if ch.engine == "triplet":
        ensembles = []
        for ti, t in enumerate(cfg.sample_times):
            entries = [Triplet(w[ti], r[ti], c[ti]) for r, c, w in zip(rows, cols, weights)]
            ensembles.append(compress(TripletEnsemble(entries, t, cfg.rate, cfg.hbar, n)))
    return EnsembleResult(acc, jumps, audited, failures, ensembles)


def run_ensemble(
    H: SplitHamiltonian,
    spec: InitialSpec,
    cfg: JumpConfig,
    trajectories: int,
    seed: int,
    *,
    engine: str = "two-process",
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
    factor_scale: float = 1.0,
) -> EnsembleResult:
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; choose from {ENGINES}")
    if trajectories < 1:
        raise ValueError("need at least one trajectory")
    _check_inputs(H, cfg)
    check_spec_dim(spec, H.dim)
    chunks = [
        _Chunk(H, spec, cfg, seed, lo, min(lo + chunk_size, trajectories), engine, factor_scale)
        for lo in range(0, trajectories, chunk_size)
    ]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, chunks))
    else:
        parts = [_run_chunk(c) for c in chunks]

    out = parts[0]
    for p in parts[1:]:
        out = EnsembleResult(
            merge(out.acc, p.acc),
            out.jumps + p.jumps,
            out.audited + p.audited,
            out.audit_failures + p.audit_failures,
            None,
        )
    if engine == "triplet":
        out.ensembles = [merge_ensembles([p.ensembles[ti] for p in parts]) for ti in range(len(cfg.sample_times))]
    return out


def simulate_records(
    H: SplitHamiltonian, spec: InitialSpec, cfg: JumpConfig, trajectories: int, seed: int
) -> list[TrajectoryRecord]:
    """Full per-trajectory records (memory-heavy; for analysis and tests)."""
    check_spec_dim(spec, H.dim)
    sampler = InitialSampler(spec)
    table = JumpTable(H, cfg.rate) if cfg.rate > 0 else None
    return [
        run_trajectory(H, spec, cfg, trajectory_rng(seed, k), seed_id=k, table=table, sampler=sampler)
        for k in range(trajectories)
    ]


def simulate_triplets(H: SplitHamiltonian, spec: InitialSpec, cfg: JumpConfig, trajectories: int, seed: int):
    """Per-sample-time TripletEnsembles (uncompressed) on the same streams as :func:`simulate_records`."""
    check_spec_dim(spec, H.dim)
    sampler = InitialSampler(spec)
    table = JumpTable(H, cfg.rate) if cfg.rate > 0 else None
    runs = [
        run_triplet_trajectory(H, spec, cfg, trajectory_rng(seed, k), table=table, sampler=sampler)
        for k in range(trajectories)
    ]
    return [
        TripletEnsemble([r[ti] for r in runs], t, cfg.rate, cfg.hbar, trajectories)
        for ti, t in enumerate(cfg.sample_times)
    ]


# --- oracle comparison -----------------------------------------------------------


@dataclass(frozen=True)
class CompareRow:
    t: float
    frobenius_error: float
    combined_se: float
    ratio: float


def _ratio(err: float, se: float) -> float:
    if se > 0:
        return err / se
    return 0.0 if err <= 1e-12 else math.inf


def compare_to_oracle(H: SplitHamiltonian, spec: InitialSpec, result: EnsembleResult) -> list[CompareRow]:
    prop = build_propagator(H)
    rho0 = initial_density(spec, H.dim)
    rows = []
    for ti, t in enumerate(result.acc.sample_times):
        mean, se = result.density(ti)
        exact = propagate(prop, rho0, t)
        err = frobenius_distance(mean, exact)
        cse = combined_se(se)
        rows.append(CompareRow(t, err, cse, _ratio(err, cse)))
    return rows


# --- convergence scan -------------------------------------------------------------


@dataclass(frozen=True)
class ScanRow:
    M: int
    t: float
    error: float
    combined_se: float


@dataclass
class ScanTable:
    rows: list[ScanRow] = field(default_factory=list)
    repeats: int = 1

    def slope(self, t: float) -> float:
        """Least-squares slope of log(error) against log(M) at time ``t``."""
        pts = [(math.log(r.M), math.log(r.error)) for r in self.rows if r.t == t and r.error > 0]
        if len(pts) < 2:
            return math.nan
        x, y = np.array(pts).T
        return float(np.polyfit(x, y, 1)[0])

    def to_markdown(self) -> str:
        lines = [
            f"Frobenius error vs exact evolution (RMS over {self.repeats} independent ensemble(s))",
            "",
            "| M | t | error | combined SE |",
            "|---:|---:|---:|---:|",
        ]
        for r in self.rows:
            lines.append(f"| {r.M} | {r.t:g} | {r.error:.4e} | {r.combined_se:.4e} |")
        times = sorted({r.t for r in self.rows})
        if len({r.M for r in self.rows}) > 1:
            lines.append("")
            for t in times:
                lines.append(f"log-log slope at t={t:g}: {self.slope(t):.3f}")
        return "\n".join(lines) + "\n"


def convergence_scan(
    H: SplitHamiltonian,
    spec: InitialSpec,
    cfg: JumpConfig,
    M_list: Sequence[int],
    seed: int,
    *,
    repeats: int = 1,
    workers: int = 1,
    engine: str = "two-process",
) -> ScanTable:
    """Frobenius error against the oracle for each ensemble size.

    Each (M, repeat) pair gets its own master seed derived from ``seed``;
    with ``repeats > 1`` the reported error is the root-mean-square over
    the independent ensembles.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    prop = build_propagator(H)
    rho0 = initial_density(spec, H.dim)
    exact = [propagate(prop, rho0, t).entries for t in cfg.sample_times]
    table = ScanTable(repeats=repeats)
    for k, M in enumerate(M_list):
        sq = np.zeros(len(cfg.sample_times))
        se2 = np.zeros(len(cfg.sample_times))
        for j in range(repeats):
            sub_seed = stream_seed(seed, (k << 16) | j)
            res = run_ensemble(H, spec, cfg, M, sub_seed, engine=engine, workers=workers)
            for ti in range(len(cfg.sample_times)):
                mean, se = res.density(ti)
                sq[ti] += frobenius_distance(mean, exact[ti]) ** 2
                se2[ti] += combined_se(se) ** 2
        for ti, t in enumerate(cfg.sample_times):
            table.rows.append(ScanRow(int(M), t, math.sqrt(sq[ti] / repeats), math.sqrt(se2[ti] / repeats)))
    return table
