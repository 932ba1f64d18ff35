"""Deterministic read schedule: g(t) = min(k + (t - 1) * s, |X|)."""
from __future__ import annotations

from dataclasses import dataclass

from onlinest.config import PolicyConfig
from onlinest.errors import ArgumentError


@dataclass(frozen=True)
class Schedule:
    """A policy applied to a source of src_len frames."""
    policy: PolicyConfig
    src_len: int

    def __post_init__(self):
        if self.src_len < 1:
            raise ArgumentError(f"src_len must be >= 1, got {self.src_len}")


def frames_at_step(sched: Schedule, t: int) -> int:
    """Number of source frames read before decoding step t."""
    if t < 1:
        raise ArgumentError(f"step index must be >= 1, got {t}")
    p = sched.policy
    return min(p.k + (t - 1) * p.s, sched.src_len)


def cutoff_step(sched: Schedule) -> int:
    """Smallest t with g(t) = |X|."""
    p = sched.policy
    if p.k >= sched.src_len:
        return 1
    remaining = sched.src_len - p.k
    return 1 + -(-remaining // p.s)
