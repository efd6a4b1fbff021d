"""Adaptive selection of the (classifier, batch size) combination.

Given the live traffic rate, the memory budget, and the profile table,
the scheduler keeps the combinations that satisfy the optional minimum
performance requirement (falling back to the highest-F1 entries when none
does), drops those whose total memory requirement exceeds the budget, and
returns the survivor with the highest F1-to-TTD ratio. When nothing fits
in memory it returns the cheapest candidate flagged as overcommitted, so
a deployment always has something to run.
"""

from __future__ import annotations

from dataclasses import dataclass

from .profiling import ProfileEntry, concurrent_instances, total_memory

__all__ = ["SchedulerInput", "SchedulerDecision", "feasible", "select"]


@dataclass(frozen=True)
class SchedulerInput:
    rate: float
    mem_available: float
    profiles: tuple[ProfileEntry, ...]
    mpr: float | None = None

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"rate must be > 0, got {self.rate}")
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if not self.profiles:
            raise ValueError("profile table must be non-empty")


@dataclass(frozen=True)
class SchedulerDecision:
    classifier_id: str
    batch_size: int
    instances: int
    total_mem: float
    expected_f1: float
    ratio: float
    overcommit: bool


def _requirement(entry: ProfileEntry, rate: float) -> tuple[int, float]:
    n = concurrent_instances(entry.batch_size, rate, entry.ttd)
    return n, total_memory(n, entry.unit_mem)


def feasible(entry: ProfileEntry, rate: float, mem_available: float) -> bool:
    """True iff the entry's total memory requirement fits the budget."""
    _, mem = _requirement(entry, rate)
    return mem <= mem_available


def select(inp: SchedulerInput) -> SchedulerDecision:
    """Pick the best combination for the current rate and memory budget.

    Order of business: (a) apply the MPR filter, restricting to the
    max-F1 entries if it would empty the table; (b) drop combinations
    whose total memory requirement exceeds the budget; (c) return the
    survivor with the highest f1/ttd ratio, ties resolved by lower total
    memory, then lower batch size, then classifier id; (d) with no
    memory-feasible survivor, return the candidate with the smallest
    total requirement, flagged overcommit.
    """
    candidates = list(inp.profiles)
    if inp.mpr is not None:
        meeting = [e for e in candidates if e.f1 >= inp.mpr]
        if meeting:
            candidates = meeting
        else:
            best_f1 = max(e.f1 for e in candidates)
            candidates = [e for e in candidates if e.f1 == best_f1]

    scored = [(e, *_requirement(e, inp.rate)) for e in candidates]
    fits = [(e, n, m) for e, n, m in scored if m <= inp.mem_available]
    if fits:
        e, n, m = min(fits, key=lambda t: (-t[0].ratio, t[2], t[0].batch_size, t[0].classifier_id))
        overcommit = False
    else:
        e, n, m = min(scored, key=lambda t: (t[2], t[0].batch_size, t[0].classifier_id))
        overcommit = True
    return SchedulerDecision(
        classifier_id=e.classifier_id,
        batch_size=e.batch_size,
        instances=n,
        total_mem=m,
        expected_f1=e.f1,
        ratio=e.ratio,
        overcommit=overcommit,
    )
