"""Per-trajectory random streams.

Stream seed for trajectory ``k`` under master seed ``s``::

    seed(s, k) = splitmix64(splitmix64(s) ^ k)

where ``splitmix64`` is the standard finalizer (golden-gamma increment,
multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB, shifts 30/27/31).
The 64-bit result seeds a ``random.Random`` (Mersenne Twister), so any
implementation with those two primitives reproduces the streams.
"""

from __future__ import annotations

import random

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_seed(master_seed: int, trajectory_id: int) -> int:
    return splitmix64(splitmix64(master_seed & MASK64) ^ (trajectory_id & MASK64))


def trajectory_rng(
    master_seed: int, trajectory_id: int, reuse: random.Random | None = None
) -> random.Random:
    """Stream for one trajectory; ``reuse`` is reseeded in place when given."""
    if reuse is None:
        return random.Random(stream_seed(master_seed, trajectory_id))
    reuse.seed(stream_seed(master_seed, trajectory_id))
    return reuse
