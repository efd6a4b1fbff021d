"""Heuristic feature exploration and classifier-pool construction.

Fields are ranked by importance-per-bit; for every requested subset size
the top ``num_combos`` subsets by summed ratio are enumerated exactly with
a best-first search (indices into the descending ranking advance one step
at a time, so candidate sums never increase), and one ensemble is trained
per subset. Candidate sums are always recomputed from scratch in index
order so that equal-sum ties compare bit-identically with a brute-force
enumeration.
"""

from __future__ import annotations

import csv
import heapq
import json
from dataclasses import dataclass
from math import comb
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .boosting import BoostedTernaryClassifier
from .encoding import FeatureSubset, encode_flows
from .errors import ConfigError
from .fields import FieldRegistry, field_registry
from .flows import FlowRecord
from .metrics import weighted_f1

__all__ = [
    "RankedFeature",
    "rank_features",
    "k_best_subsets",
    "PoolConfig",
    "PoolMember",
    "ClassifierPool",
    "build_pool",
    "save_pool",
    "load_pool",
    "read_manifest",
    "ManifestRow",
]

MEMBER_FORMAT = "acdc-member/1"
MANIFEST_COLUMNS = ["member_id", "subset", "heuristic_score", "model_path", "holdout_f1"]


@dataclass(frozen=True)
class RankedFeature:
    field_id: int
    fi: float
    bits: int
    ratio: float


def rank_features(
    importances: Mapping[int, float], registry: FieldRegistry | None = None
) -> list[RankedFeature]:
    """Sort fields by FI/bits descending; ties go to fewer bits, then id."""
    registry = registry or field_registry()
    ranked = []
    for field_id, fi in importances.items():
        if field_id not in registry:
            raise ValueError(f"unknown field id {field_id} in importance mapping")
        spec = registry[field_id]
        ranked.append(RankedFeature(field_id, float(fi), spec.bits, float(fi) / spec.bits))
    ranked.sort(key=lambda r: (-r.ratio, r.bits, r.field_id))
    return ranked


def k_best_subsets(
    ranked: Sequence[RankedFeature], n: int, k: int
) -> list[tuple[tuple[int, ...], float]]:
    """The k highest-sum size-n subsets of a descending ranking.

    Returns (field_ids, ratio_sum) pairs, sums non-increasing; fewer than
    k pairs come back when C(len(ranked), n) < k.
    """
    m = len(ranked)
    if n < 1 or n > m:
        raise ValueError(f"subset size {n} out of range for {m} ranked features")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    ratios = [r.ratio for r in ranked]

    def sum_of(combo: tuple[int, ...]) -> float:
        return sum(ratios[i] for i in combo)

    start = tuple(range(n))
    heap = [(-sum_of(start), start)]
    seen = {start}
    out: list[tuple[tuple[int, ...], float]] = []
    while heap and len(out) < k:
        neg, combo = heapq.heappop(heap)
        out.append((tuple(ranked[i].field_id for i in combo), -neg))
        for pos in range(n):
            nxt = combo[pos] + 1
            if nxt >= m or (pos + 1 < n and nxt == combo[pos + 1]):
                continue
            succ = combo[:pos] + (nxt,) + combo[pos + 1 :]
            if succ not in seen:
                seen.add(succ)
                heapq.heappush(heap, (-sum_of(succ), succ))
    return out


@dataclass(frozen=True)
class PoolConfig:
    sizes: tuple[int, ...] = tuple(range(1, 10))
    num_combos: int = 10

    def __post_init__(self):
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise ConfigError(f"pool sizes must be >= 1, got {self.sizes}")
        if len(set(self.sizes)) != len(self.sizes):
            raise ConfigError(f"duplicate pool sizes: {self.sizes}")
        if self.num_combos < 1:
            raise ConfigError(f"num_combos must be >= 1, got {self.num_combos}")
        object.__setattr__(self, "sizes", tuple(sorted(self.sizes)))

    @property
    def pool_size(self) -> int:
        return len(self.sizes) * self.num_combos


@dataclass
class PoolMember:
    member_id: str
    subset: FeatureSubset
    model: BoostedTernaryClassifier
    heuristic_score: float
    holdout_f1: float | None = None

    def subset_name(self, registry: FieldRegistry | None = None) -> str:
        return "&".join(self.subset.dotted_names(registry))


@dataclass
class ClassifierPool:
    members: list[PoolMember]
    config: PoolConfig

    def __len__(self) -> int:
        return len(self.members)

    def member(self, member_id: str) -> PoolMember:
        for m in self.members:
            if m.member_id == member_id:
                return m
        raise KeyError(f"no pool member {member_id!r}")


def build_pool(
    flows: Sequence[FlowRecord],
    labels,
    importances: Mapping[int, float],
    config: PoolConfig,
    seed: int = 0,
    hyperparams: Mapping | None = None,
    eval_flows: Sequence[FlowRecord] | None = None,
    eval_labels=None,
    k_packets: int = 3,
    registry: FieldRegistry | None = None,
) -> ClassifierPool:
    """Train one ensemble per k-best subset per requested size.

    ``importances`` normally comes from permutation importance of the
    all-feature model and is computed once, upstream. When eval data is
    provided each member also gets a held-out F1 for its manifest row.
    """
    registry = registry or field_registry()
    labels = np.asarray(labels)
    ranked = rank_features(importances, registry)
    if max(config.sizes) > len(ranked):
        raise ConfigError(
            f"max subset size {max(config.sizes)} exceeds {len(ranked)} ranked features"
        )
    for n in config.sizes:
        if comb(len(ranked), n) < config.num_combos:
            raise ConfigError(
                f"cannot generate {config.num_combos} distinct subsets of size {n} "
                f"from {len(ranked)} features"
            )
    hp = dict(hyperparams or {})
    hp.setdefault("random_state", seed)

    members: list[PoolMember] = []
    for n in config.sizes:
        for ids, score in k_best_subsets(ranked, n, config.num_combos):
            member_id = f"m{len(members):03d}"
            subset = FeatureSubset(ids)
            try:
                X = encode_flows(flows, subset, k_packets, registry)
                model = BoostedTernaryClassifier(**hp).fit(X, labels)
            except ValueError as e:
                names = "&".join(subset.dotted_names(registry))
                raise type(e)(f"training member {member_id} ({names}) failed: {e}") from e
            holdout = None
            if eval_flows is not None and eval_labels is not None:
                Xe = encode_flows(eval_flows, subset, k_packets, registry)
                holdout = weighted_f1(np.asarray(eval_labels), model.predict(Xe))
            members.append(PoolMember(member_id, subset, model, score, holdout))

    distinct = {frozenset(m.subset.field_ids) for m in members}
    if len(distinct) != len(members):
        raise RuntimeError("pool invariant violated: duplicate subsets generated")
    return ClassifierPool(members, config)


@dataclass(frozen=True)
class ManifestRow:
    member_id: str
    subset: str
    heuristic_score: float
    model_path: str
    holdout_f1: float | None


def save_pool(pool: ClassifierPool, outdir: str | Path, registry: FieldRegistry | None = None) -> Path:
    """Write manifest.csv plus one model JSON per member; returns manifest path."""
    registry = registry or field_registry()
    outdir = Path(outdir)
    (outdir / "models").mkdir(parents=True, exist_ok=True)
    manifest = outdir / "manifest.csv"
    with manifest.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for m in pool.members:
            rel = f"models/{m.member_id}.json"
            doc = {
                "format": MEMBER_FORMAT,
                "member_id": m.member_id,
                "subset": list(m.subset.field_ids),
                "heuristic_score": m.heuristic_score,
                "holdout_f1": m.holdout_f1,
                "model": m.model.to_dict(),
            }
            (outdir / rel).write_text(json.dumps(doc, separators=(",", ":")))
            writer.writerow(
                [
                    m.member_id,
                    m.subset_name(registry),
                    repr(m.heuristic_score),
                    rel,
                    "" if m.holdout_f1 is None else repr(m.holdout_f1),
                ]
            )
    return manifest


def read_manifest(path: str | Path) -> list[ManifestRow]:
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_COLUMNS:
            raise ConfigError(f"{path}: not a pool manifest (columns {reader.fieldnames})")
        for rec in reader:
            rows.append(
                ManifestRow(
                    member_id=rec["member_id"],
                    subset=rec["subset"],
                    heuristic_score=float(rec["heuristic_score"]),
                    model_path=rec["model_path"],
                    holdout_f1=float(rec["holdout_f1"]) if rec["holdout_f1"] else None,
                )
            )
    return rows


def load_pool(outdir: str | Path, config: PoolConfig | None = None) -> ClassifierPool:
    outdir = Path(outdir)
    manifest = read_manifest(outdir / "manifest.csv")
    members = []
    for row in manifest:
        doc = json.loads((outdir / row.model_path).read_text())
        if doc.get("format") != MEMBER_FORMAT:
            raise ConfigError(f"{row.model_path}: unsupported member format {doc.get('format')!r}")
        members.append(
            PoolMember(
                member_id=doc["member_id"],
                subset=FeatureSubset(tuple(doc["subset"])),
                model=BoostedTernaryClassifier.from_dict(doc["model"]),
                heuristic_score=float(doc["heuristic_score"]),
                holdout_f1=doc["holdout_f1"],
            )
        )
    if config is None:
        sizes = tuple(sorted({len(m.subset) for m in members}))
        num_combos = max(1, len(members) // max(1, len(sizes)))
        config = PoolConfig(sizes=sizes, num_combos=num_combos)
    return ClassifierPool(members, config)
