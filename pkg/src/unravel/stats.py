"""Mergeable moment accumulators for dyad ensembles.

Accumulators store raw (uncompensated) sums of per-trajectory dyad weights.
The ``exp(rate * t)`` compensation is applied only in :func:`finalize`, which
is why accumulators built with different rates refuse to merge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import GridMismatch, InsufficientSamples, MetadataMismatch


@dataclass
class MomentAccumulator:
    dim: int
    sample_times: tuple[float, ...]
    rate: float
    hbar: float = 1.0
    count: int = 0
    total: np.ndarray = field(init=False, repr=False)
    sumsq_re: np.ndarray = field(init=False, repr=False)
    sumsq_im: np.ndarray = field(init=False, repr=False)
    trace_total: np.ndarray = field(init=False, repr=False)
    trace_sumsq_re: np.ndarray = field(init=False, repr=False)
    trace_sumsq_im: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.sample_times = tuple(float(t) for t in self.sample_times)
        shape = (len(self.sample_times), self.dim, self.dim)
        self.total = np.zeros(shape, dtype=complex)
        self.sumsq_re = np.zeros(shape)
        self.sumsq_im = np.zeros(shape)
        n = len(self.sample_times)
        self.trace_total = np.zeros(n, dtype=complex)
        self.trace_sumsq_re = np.zeros(n)
        self.trace_sumsq_im = np.zeros(n)

    @property
    def metadata(self) -> tuple:
        return (self.dim, self.sample_times, self.rate, self.hbar)

    def compensation(self, time_index: int) -> float:
        return math.exp(self.rate * self.sample_times[time_index])


def _check_grid(acc: MomentAccumulator, samples: Sequence) -> None:
    if len(samples) != len(acc.sample_times):
        raise GridMismatch(
            f"record has {len(samples)} samples, accumulator expects {len(acc.sample_times)}"
        )
    for s, t in zip(samples, acc.sample_times):
        if s.t != t:
            raise GridMismatch(f"record sample at t={s.t!r}, accumulator expects t={t!r}")


def accumulate(acc: MomentAccumulator, record) -> MomentAccumulator:
    """Add one trajectory record (one sample per grid time) in place."""
    _check_grid(acc, record.samples)
    for ti, s in enumerate(record.samples):
        w = s.weight
        i, j = s.phi.index, s.psi.index
        acc.total[ti, i, j] += w
        acc.sumsq_re[ti, i, j] += w.real * w.real
        acc.sumsq_im[ti, i, j] += w.imag * w.imag
        if i == j:
            acc.trace_total[ti] += w
            acc.trace_sumsq_re[ti] += w.real * w.real
            acc.trace_sumsq_im[ti] += w.imag * w.imag
    acc.count += 1
    return acc


def accumulate_weights(
    acc: MomentAccumulator, rows: np.ndarray, cols: np.ndarray, weights: np.ndarray
) -> MomentAccumulator:
    """Bulk version of :func:`accumulate` for pre-flattened trajectories.

    ``rows``, ``cols`` and ``weights`` have shape (n_trajectories, n_times);
    entries are added in trajectory order so the result matches repeated
    :func:`accumulate` calls.
    """
    n, nt = weights.shape
    if nt != len(acc.sample_times):
        raise GridMismatch(f"weights have {nt} time columns, expected {len(acc.sample_times)}")
    for ti in range(nt):
        r, c, w = rows[:, ti], cols[:, ti], weights[:, ti]
        np.add.at(acc.total[ti], (r, c), w)
        np.add.at(acc.sumsq_re[ti], (r, c), w.real * w.real)
        np.add.at(acc.sumsq_im[ti], (r, c), w.imag * w.imag)
        diag = r == c
        wd = w[diag]
        if wd.size:
            acc.trace_total[ti] += _ordered_sum(wd)
            acc.trace_sumsq_re[ti] += _ordered_sum(wd.real * wd.real)
            acc.trace_sumsq_im[ti] += _ordered_sum(wd.imag * wd.imag)
    acc.count += n
    return acc


def _ordered_sum(x: np.ndarray):
    # np.sum uses pairwise summation; keep left-to-right order instead
    out = np.zeros(1, dtype=x.dtype)
    np.add.at(out, np.zeros(x.size, dtype=np.intp), x)
    return out[0]


def merge(a: MomentAccumulator, b: MomentAccumulator) -> MomentAccumulator:
    if a.metadata != b.metadata:
        raise MetadataMismatch(f"cannot merge accumulators {a.metadata} and {b.metadata}")
    out = MomentAccumulator(a.dim, a.sample_times, a.rate, a.hbar)
    out.count = a.count + b.count
    for name in ("total", "sumsq_re", "sumsq_im", "trace_total", "trace_sumsq_re", "trace_sumsq_im"):
        setattr(out, name, getattr(a, name) + getattr(b, name))
    return out


def merge_all(accs: Iterable[MomentAccumulator]) -> MomentAccumulator:
    accs = list(accs)
    if not accs:
        raise InsufficientSamples("nothing to merge")
    out = accs[0]
    for acc in accs[1:]:
        out = merge(out, acc)
    return out


def _component_se(mean: np.ndarray, sumsq: np.ndarray, n: int) -> np.ndarray:
    var = sumsq / n - mean * mean
    return np.sqrt(np.clip(var, 0.0, None) / (n - 1))


def finalize(acc: MomentAccumulator, time_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Compensated mean density matrix and its per-entry standard error.

    The SE array is complex: ``.real`` holds the SE of the real parts and
    ``.imag`` the SE of the imaginary parts.
    """
    n = acc.count
    if n < 2:
        raise InsufficientSamples(f"need at least 2 trajectories, have {n}")
    g = acc.compensation(time_index)
    raw = acc.total[time_index] / n
    se_re = _component_se(raw.real, acc.sumsq_re[time_index], n)
    se_im = _component_se(raw.imag, acc.sumsq_im[time_index], n)
    return g * raw, g * (se_re + 1j * se_im)


def finalize_mean(acc: MomentAccumulator, time_index: int) -> np.ndarray:
    """Compensated mean only; valid for a single trajectory."""
    if acc.count < 1:
        raise InsufficientSamples("empty accumulator")
    return acc.compensation(time_index) * acc.total[time_index] / acc.count


def finalize_trace(acc: MomentAccumulator, time_index: int) -> tuple[complex, complex]:
    n = acc.count
    if n < 2:
        raise InsufficientSamples(f"need at least 2 trajectories, have {n}")
    g = acc.compensation(time_index)
    raw = acc.trace_total[time_index] / n
    se_re = float(_component_se(np.float64(raw.real), acc.trace_sumsq_re[time_index], n))
    se_im = float(_component_se(np.float64(raw.imag), acc.trace_sumsq_im[time_index], n))
    return complex(g * raw), complex(g * se_re, g * se_im)


def combined_se(se: np.ndarray) -> float:
    """Root-sum-square of the component SEs, the scale of a Frobenius error."""
    return float(np.sqrt(np.sum(se.real**2 + se.imag**2)))
