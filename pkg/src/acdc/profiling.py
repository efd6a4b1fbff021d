"""Per-(classifier, batch size) efficiency profiles and capacity math.

A profile entry records what one classifier instance costs at a given
batch size: time-to-decision (seconds from the start of loading staged
raw features to the last prediction) and unit memory (bytes for one
instance). Entries are either measured on the local machine or derived
from an affine cost model in aggregate bits x batch size, which is the
quantity the measured costs track almost perfectly.

Capacity math: with batch size B filling every B/R seconds at rate R,
a classifier whose decision takes ttd seconds needs

    instances N = ceil(ttd / (B / R))        (concurrent instances)
    memory    M = N * unit_mem               (total requirement)

Memory figures are plain bytes throughout (MB/GB meaning 1e6/1e9).
"""

from __future__ import annotations

import csv
import io
import json
import math
import pickle
import time
import tracemalloc
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .encoding import FeatureSubset, encode_staged, stage_batch
from .fields import FieldRegistry
from .metrics import weighted_f1

__all__ = [
    "MEASURED",
    "MODELED",
    "ProfileEntry",
    "CostModel",
    "concurrent_instances",
    "total_memory",
    "throughput",
    "handled_throughput",
    "calibrate_cost_model",
    "model_profile",
    "measure_profile",
    "write_profile_csv",
    "read_profile_csv",
]

MEASURED = "measured"
MODELED = "modeled"

PROFILE_COLUMNS = ["classifier_id", "subset", "batch_size", "f1", "ttd_s", "unit_mem_bytes", "mode"]

MEM_SAFETY_FACTOR = 1.2


@dataclass(frozen=True)
class ProfileEntry:
    classifier_id: str
    subset: str
    batch_size: int
    f1: float
    ttd: float
    unit_mem: int
    mode: str

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.ttd > 0:
            raise ValueError(f"ttd must be > 0, got {self.ttd}")
        if not self.unit_mem > 0:
            raise ValueError(f"unit_mem must be > 0, got {self.unit_mem}")
        if not 0.0 <= self.f1 <= 1.0:
            raise ValueError(f"f1 must be in [0, 1], got {self.f1}")
        if self.mode not in (MEASURED, MODELED):
            raise ValueError(f"mode must be '{MEASURED}' or '{MODELED}', got {self.mode!r}")

    @property
    def ratio(self) -> float:
        return self.f1 / self.ttd


def concurrent_instances(batch_size: int, rate: float, ttd: float) -> int:
    """ceil(ttd / (B / rate)): instances running at once in steady state."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if not rate > 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    if not ttd > 0:
        raise ValueError(f"ttd must be > 0, got {ttd}")
    q = ttd * rate / batch_size
    # Guard against float noise flipping an exact integer quotient
    # (e.g. 3.0000000000000004) across the ceiling boundary; 1e-12
    # relative covers accumulated representation error only.
    nearest = round(q)
    if nearest >= 1 and abs(q - nearest) <= 1e-12 * max(1.0, abs(q)):
        return int(nearest)
    return max(1, math.ceil(q))


def total_memory(instances: int, unit_mem: int | float):
    """N instances x unit memory, in bytes."""
    if instances < 1:
        raise ValueError(f"instances must be >= 1, got {instances}")
    if not unit_mem > 0:
        raise ValueError(f"unit_mem must be > 0, got {unit_mem}")
    return instances * unit_mem


def throughput(rate: float, ttd: float) -> float:
    """Flows preprocessed and classified per second: rate / ttd."""
    if not rate > 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    if not ttd > 0:
        raise ValueError(f"ttd must be > 0, got {ttd}")
    return rate / ttd


def handled_throughput(rate: float, ttd: float) -> float:
    """Throughput capped at the arrival rate (handled fraction <= 100%)."""
    return min(rate, throughput(rate, ttd))


@dataclass(frozen=True)
class CostModel:
    """Affine TTD/memory cost in x = subset bits x batch size."""

    ttd_intercept: float
    ttd_per_bitflow: float
    mem_intercept: float
    mem_per_bitflow: float
    pearson_ttd: float = 1.0
    pearson_mem: float = 1.0

    def __post_init__(self):
        if self.ttd_per_bitflow < 0 or self.mem_per_bitflow < 0:
            raise ValueError("cost model slopes must be >= 0")
        for r in (self.pearson_ttd, self.pearson_mem):
            if not -1.0 <= r <= 1.0:
                raise ValueError(f"pearson coefficient {r} outside [-1, 1]")

    def ttd(self, bits: int, batch_size: int) -> float:
        return self.ttd_intercept + self.ttd_per_bitflow * bits * batch_size

    def mem(self, bits: int, batch_size: int) -> int:
        return max(1, int(round(self.mem_intercept + self.mem_per_bitflow * bits * batch_size)))

    def to_dict(self) -> dict:
        return {
            "format": "acdc-costmodel/1",
            "ttd_intercept": self.ttd_intercept,
            "ttd_per_bitflow": self.ttd_per_bitflow,
            "mem_intercept": self.mem_intercept,
            "mem_per_bitflow": self.mem_per_bitflow,
            "pearson_ttd": self.pearson_ttd,
            "pearson_mem": self.pearson_mem,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CostModel":
        if d.get("format") != "acdc-costmodel/1":
            raise ValueError(f"unsupported cost model format {d.get('format')!r}")
        return cls(
            ttd_intercept=float(d["ttd_intercept"]),
            ttd_per_bitflow=float(d["ttd_per_bitflow"]),
            mem_intercept=float(d["mem_intercept"]),
            mem_per_bitflow=float(d["mem_per_bitflow"]),
            pearson_ttd=float(d["pearson_ttd"]),
            pearson_mem=float(d["pearson_mem"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), separators=(",", ":")))

    @classmethod
    def load(cls, path: str | Path) -> "CostModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _affine_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares (intercept, slope, pearson); slope clamped at zero."""
    slope, intercept = np.polyfit(x, y, 1)
    if y.std() == 0:
        pearson = 0.0
    else:
        pearson = float(np.corrcoef(x, y)[0, 1])
    if slope < 0:
        slope, intercept = 0.0, float(y.mean())
    return float(intercept), float(slope), pearson


def calibrate_cost_model(samples: Iterable[tuple[float, float, float]]) -> CostModel:
    """Fit the affine cost model from (bits x B, ttd_s, mem_bytes) triples."""
    rows = list(samples)
    if len(rows) < 3:
        raise ValueError(f"need >= 3 calibration samples, got {len(rows)}")
    x = np.array([r[0] for r in rows], dtype=np.float64)
    ttd = np.array([r[1] for r in rows], dtype=np.float64)
    mem = np.array([r[2] for r in rows], dtype=np.float64)
    if x.std() == 0:
        raise ValueError("degenerate fit: bits x batch values are constant")
    ti, ts, tr = _affine_fit(x, ttd)
    mi, ms, mr = _affine_fit(x, mem)
    return CostModel(
        ttd_intercept=ti,
        ttd_per_bitflow=ts,
        mem_intercept=mi,
        mem_per_bitflow=ms,
        pearson_ttd=tr,
        pearson_mem=mr,
    )


def model_profile(
    classifier_id: str,
    subset_name: str,
    bits: int,
    batch_sizes: Sequence[int],
    cost_model: CostModel,
    f1: float,
) -> list[ProfileEntry]:
    """Deterministic modeled entries for one classifier across batch sizes."""
    return [
        ProfileEntry(
            classifier_id=classifier_id,
            subset=subset_name,
            batch_size=b,
            f1=f1,
            ttd=cost_model.ttd(bits, b),
            unit_mem=cost_model.mem(bits, b),
            mode=MODELED,
        )
        for b in batch_sizes
    ]


def _run_instance(staged: bytes, subset: FeatureSubset, model, k_packets: int):
    """One classifier instance: load staged raw features, encode, predict."""
    batch = pickle.loads(staged)
    X = encode_staged(batch, subset, k_packets)
    return model.predict(X)


def measure_profile(
    classifier_id: str,
    model,
    subset: FeatureSubset,
    flows,
    labels,
    batch_sizes: Sequence[int],
    repeats: int = 3,
    mem_safety: float = MEM_SAFETY_FACTOR,
    k_packets: int = 3,
    registry: FieldRegistry | None = None,
) -> list[ProfileEntry]:
    """Wall-clock profile of one member over the given batch sizes.

    The timed section covers deserializing the staged raw features,
    encoding, and prediction (median of ``repeats`` runs). Unit memory is
    the tracemalloc peak of one instance run times a safety factor; the
    memory probe runs separately so the tracer does not skew timings.
    """
    labels = np.asarray(labels)
    if max(batch_sizes) > len(flows):
        raise ValueError(
            f"largest batch size {max(batch_sizes)} exceeds {len(flows)} available flows"
        )
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    subset_name = "&".join(subset.dotted_names(registry))
    entries = []
    for b in batch_sizes:
        staged = pickle.dumps(stage_batch(flows[:b], k_packets), protocol=pickle.HIGHEST_PROTOCOL)
        timings = []
        pred = None
        for _ in range(repeats):
            t0 = time.perf_counter()
            pred = _run_instance(staged, subset, model, k_packets)
            timings.append(time.perf_counter() - t0)
        tracemalloc.start()
        try:
            _run_instance(staged, subset, model, k_packets)
            _, peak = tracemalloc.get_traced_memory()
        finally:
            tracemalloc.stop()
        entries.append(
            ProfileEntry(
                classifier_id=classifier_id,
                subset=subset_name,
                batch_size=int(b),
                f1=weighted_f1(labels[:b], pred),
                ttd=float(np.median(timings)),
                unit_mem=max(1, int(peak * mem_safety)),
                mode=MEASURED,
            )
        )
    return entries


def write_profile_csv(entries: Sequence[ProfileEntry], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PROFILE_COLUMNS)
        for e in entries:
            writer.writerow(
                [e.classifier_id, e.subset, e.batch_size, repr(e.f1), repr(e.ttd), e.unit_mem, e.mode]
            )


def read_profile_csv(path: str | Path) -> list[ProfileEntry]:
    path = Path(path)
    entries = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != PROFILE_COLUMNS:
            raise ValueError(f"{path}: not a profile table (columns {reader.fieldnames})")
        for rec in reader:
            entries.append(
                ProfileEntry(
                    classifier_id=rec["classifier_id"],
                    subset=rec["subset"],
                    batch_size=int(rec["batch_size"]),
                    f1=float(rec["f1"]),
                    ttd=float(rec["ttd_s"]),
                    unit_mem=int(rec["unit_mem_bytes"]),
                    mode=rec["mode"],
                )
            )
    if not entries:
        raise ValueError(f"{path}: profile table is empty")
    return entries
