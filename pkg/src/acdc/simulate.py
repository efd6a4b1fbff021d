"""Deterministic time-stepped traffic replay driving the scheduler.

Time advances in 1-second ticks. Arrivals for a tick join the backlog up
front, the scheduler is consulted once per tick (rates and budgets may
change every tick), and batches dispatch whenever the backlog holds a
full batch and one more instance fits in the memory budget. Instances
complete at sub-tick resolution after their profiled decision time (plus
the switch cost for the first batch after a classifier change), freeing
memory that may admit further dispatches inside the same tick.

Scenario schedule values may be a constant, a per-tick list, or
``{"steps": [[tick, value], ...]}`` holding each value from its start
tick onward.
"""

from __future__ import annotations

import csv
import heapq
import json
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import ConfigError
from .profiling import ProfileEntry
from .scheduler import SchedulerInput, select

__all__ = [
    "Scenario",
    "TickRecord",
    "DecisionRecord",
    "SimulationTrace",
    "run_simulation",
    "throughput_report",
    "trend_check",
    "TrendVerdict",
]

TRACE_SCHEMA = "acdc-trace/1"
TRACE_COLUMNS = [
    "tick",
    "arrivals",
    "dispatched_batches",
    "completed_flows",
    "backlog",
    "inflight_flows",
    "concurrent_instances",
    "mem_in_use",
    "classifier_id",
    "batch_size",
    "overcommit",
]
DECISION_COLUMNS = ["tick", "rate", "mem_available", "classifier_id", "B", "N", "M", "f1", "ratio", "overcommit"]


def _expand_schedule(value, duration: int, name: str) -> list:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [value] * duration
    if isinstance(value, (list, tuple)) and value and not isinstance(value[0], (list, tuple)):
        if len(value) < duration:
            raise ConfigError(f"{name}: schedule has {len(value)} entries for {duration} ticks")
        return list(value[:duration])
    if isinstance(value, dict) and "steps" in value:
        steps = sorted((int(t), v) for t, v in value["steps"])
        if not steps or steps[0][0] != 0:
            raise ConfigError(f"{name}: step schedule must start at tick 0")
        out = []
        idx = 0
        for tick in range(duration):
            while idx + 1 < len(steps) and steps[idx + 1][0] <= tick:
                idx += 1
            out.append(steps[idx][1])
        return out
    raise ConfigError(f"{name}: expected a number, per-tick list, or step schedule")


@dataclass
class Scenario:
    duration: int
    rates: list[float]
    mems: list[float]
    mpr: float | None = None
    switch_cost: float = 0.0

    def __post_init__(self):
        if self.duration < 1:
            raise ConfigError(f"duration must be >= 1, got {self.duration}")
        if len(self.rates) != self.duration or len(self.mems) != self.duration:
            raise ConfigError("rate and memory schedules must cover every tick")
        if any(not r > 0 for r in self.rates):
            raise ConfigError("rates must be > 0 at every tick")
        if any(m < 0 for m in self.mems):
            raise ConfigError("memory budgets must be >= 0")
        if self.switch_cost < 0:
            raise ConfigError(f"switch_cost must be >= 0, got {self.switch_cost}")

    @classmethod
    def constant(cls, duration: int, rate: float, mem: float, mpr: float | None = None,
                 switch_cost: float = 0.0) -> "Scenario":
        return cls(duration, [rate] * duration, [mem] * duration, mpr, switch_cost)

    @classmethod
    def from_dict(cls, obj: dict) -> "Scenario":
        try:
            duration = int(obj["duration"])
        except KeyError:
            raise ConfigError("scenario must declare 'duration'") from None
        if duration < 1:
            raise ConfigError(f"duration must be >= 1, got {duration}")
        rates = _expand_schedule(obj.get("rate"), duration, "rate")
        mems = _expand_schedule(obj.get("mem"), duration, "mem")
        mpr = obj.get("mpr")
        return cls(
            duration,
            [float(r) for r in rates],
            [float(m) for m in mems],
            None if mpr is None else float(mpr),
            float(obj.get("switch_cost", 0.0)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TickRecord:
    tick: int
    arrivals: int
    dispatched_batches: int
    completed_flows: int
    backlog: int
    inflight_flows: int
    concurrent_instances: int
    mem_in_use: float
    classifier_id: str
    batch_size: int
    overcommit: bool


@dataclass(frozen=True)
class DecisionRecord:
    tick: int
    rate: float
    mem_available: float
    classifier_id: str
    batch_size: int
    instances: int
    total_mem: float
    f1: float
    ratio: float
    overcommit: bool


@dataclass
class SimulationTrace:
    ticks: list[TickRecord]
    decisions: list[DecisionRecord]

    @property
    def duration(self) -> int:
        return len(self.ticks)

    def total_completed(self) -> int:
        return sum(t.completed_flows for t in self.ticks)

    def median_batch_size(self) -> float:
        return statistics.median(t.batch_size for t in self.ticks)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            fh.write(f"# schema: {TRACE_SCHEMA}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_COLUMNS)
            for t in self.ticks:
                writer.writerow(
                    [
                        t.tick,
                        t.arrivals,
                        t.dispatched_batches,
                        t.completed_flows,
                        t.backlog,
                        t.inflight_flows,
                        t.concurrent_instances,
                        repr(t.mem_in_use),
                        t.classifier_id,
                        t.batch_size,
                        int(t.overcommit),
                    ]
                )

    @classmethod
    def from_csv(cls, path: str | Path) -> "SimulationTrace":
        lines = Path(path).read_text().splitlines()
        if not lines or lines[0] != f"# schema: {TRACE_SCHEMA}":
            raise ConfigError(f"{path}: missing trace schema header")
        reader = csv.DictReader(lines[1:])
        if reader.fieldnames != TRACE_COLUMNS:
            raise ConfigError(f"{path}: unexpected trace columns {reader.fieldnames}")
        ticks = [
            TickRecord(
                tick=int(r["tick"]),
                arrivals=int(r["arrivals"]),
                dispatched_batches=int(r["dispatched_batches"]),
                completed_flows=int(r["completed_flows"]),
                backlog=int(r["backlog"]),
                inflight_flows=int(r["inflight_flows"]),
                concurrent_instances=int(r["concurrent_instances"]),
                mem_in_use=float(r["mem_in_use"]),
                classifier_id=r["classifier_id"],
                batch_size=int(r["batch_size"]),
                overcommit=bool(int(r["overcommit"])),
            )
            for r in reader
        ]
        return cls(ticks, [])

    def decisions_to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(DECISION_COLUMNS)
            for d in self.decisions:
                writer.writerow(
                    [
                        d.tick,
                        repr(d.rate),
                        repr(d.mem_available),
                        d.classifier_id,
                        d.batch_size,
                        d.instances,
                        repr(d.total_mem),
                        repr(d.f1),
                        repr(d.ratio),
                        int(d.overcommit),
                    ]
                )


def _validate_coverage(profiles: Sequence[ProfileEntry], member_ids) -> None:
    if member_ids is None:
        return
    by_member: dict[str, set[int]] = {}
    for e in profiles:
        by_member.setdefault(e.classifier_id, set()).add(e.batch_size)
    missing = sorted(set(member_ids) - set(by_member))
    if missing:
        raise ConfigError(f"profile table has no entries for pool members {missing}")
    grids = {frozenset(by_member[m]) for m in member_ids}
    if len(grids) > 1:
        raise ConfigError("profile table offers different batch-size grids per pool member")


def run_simulation(
    profiles: Sequence[ProfileEntry],
    scenario: Scenario,
    seed: int = 0,
    member_ids: Sequence[str] | None = None,
) -> SimulationTrace:
    """Replay the scenario; fully deterministic for fixed inputs.

    ``seed`` is part of the interface for forward compatibility but the
    replay itself introduces no randomness.
    """
    _validate_coverage(profiles, member_ids)
    entry_index = {(e.classifier_id, e.batch_size): e for e in profiles}

    ticks: list[TickRecord] = []
    decisions: list[DecisionRecord] = []
    running: list[tuple[float, int, int, int, str]] = []  # (done_at, seq, flows, mem, cid)
    seq = 0
    backlog = 0
    mem_in_use = 0.0
    inflight_flows = 0
    cum_arrivals = 0
    cum_completed = 0
    last_classifier: str | None = None

    for tick in range(scenario.duration):
        rate = scenario.rates[tick]
        budget = scenario.mems[tick]
        arrivals = int(round(rate))
        backlog += arrivals
        cum_arrivals += arrivals

        decision = select(SchedulerInput(rate, budget, tuple(profiles), scenario.mpr))
        entry = entry_index[(decision.classifier_id, decision.batch_size)]
        decisions.append(
            DecisionRecord(
                tick=tick,
                rate=rate,
                mem_available=budget,
                classifier_id=decision.classifier_id,
                batch_size=decision.batch_size,
                instances=decision.instances,
                total_mem=decision.total_mem,
                f1=decision.expected_f1,
                ratio=decision.ratio,
                overcommit=decision.overcommit,
            )
        )

        completed = 0
        dispatched = 0

        def try_dispatch(now: float):
            nonlocal backlog, mem_in_use, inflight_flows, dispatched, seq, last_classifier
            while backlog >= entry.batch_size and mem_in_use + entry.unit_mem <= budget:
                ttd = entry.ttd
                if last_classifier is not None and last_classifier != entry.classifier_id:
                    ttd += scenario.switch_cost
                last_classifier = entry.classifier_id
                heapq.heappush(
                    running,
                    (now + ttd, seq, entry.batch_size, entry.unit_mem, entry.classifier_id),
                )
                seq += 1
                backlog -= entry.batch_size
                inflight_flows += entry.batch_size
                mem_in_use += entry.unit_mem
                dispatched += 1

        try_dispatch(float(tick))
        while running and running[0][0] < tick + 1.0:
            done_at, _, flows, mem, _cid = heapq.heappop(running)
            mem_in_use -= mem
            inflight_flows -= flows
            completed += flows
            try_dispatch(done_at)
        cum_completed += completed

        if cum_arrivals != cum_completed + backlog + inflight_flows:
            raise RuntimeError(
                f"flow conservation violated at tick {tick}: "
                f"{cum_arrivals} != {cum_completed} + {backlog} + {inflight_flows}"
            )

        ticks.append(
            TickRecord(
                tick=tick,
                arrivals=arrivals,
                dispatched_batches=dispatched,
                completed_flows=completed,
                backlog=backlog,
                inflight_flows=inflight_flows,
                concurrent_instances=len(running),
                mem_in_use=mem_in_use,
                classifier_id=decision.classifier_id,
                batch_size=decision.batch_size,
                overcommit=decision.overcommit,
            )
        )
    return SimulationTrace(ticks, decisions)


def throughput_report(trace: SimulationTrace, window: int) -> list[float]:
    """Completed flows per second over consecutive windows of ticks."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if window > trace.duration:
        raise ValueError(f"window {window} exceeds trace duration {trace.duration}")
    out = []
    for start in range(0, trace.duration - window + 1, window):
        chunk = trace.ticks[start : start + window]
        out.append(sum(t.completed_flows for t in chunk) / window)
    return out


@dataclass(frozen=True)
class TrendVerdict:
    expect: str  # "increasing" | "decreasing"
    medians: tuple[float, ...]
    violations: int

    @property
    def monotone(self) -> bool:
        return self.violations == 0


def trend_check(traces: Sequence[SimulationTrace], expect: str) -> TrendVerdict:
    """Weak monotonicity of median selected batch size across a sweep."""
    if expect not in ("increasing", "decreasing"):
        raise ValueError(f"expect must be 'increasing' or 'decreasing', got {expect!r}")
    if len(traces) < 3:
        raise ValueError(f"need >= 3 sweep points, got {len(traces)}")
    medians = tuple(t.median_batch_size() for t in traces)
    violations = 0
    for a, b in zip(medians, medians[1:]):
        if expect == "increasing" and b < a:
            violations += 1
        elif expect == "decreasing" and b > a:
            violations += 1
    return TrendVerdict(expect, medians, violations)
