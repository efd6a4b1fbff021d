"""Command-line pipeline: generate/ingest, train-pool, profile, simulate, report.

Stages communicate only through documented files (flowset JSON, pool
manifest + model JSONs, profile CSV, scenario JSON, trace/decision CSVs),
so each stage is independently re-runnable. All randomness hangs off
explicit ``--seed`` flags. When ``--config FILE`` is given, values from
the JSON file override the corresponding flags.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import explore, profiling, simulate
from .encoding import FeatureSubset, encode_flows, subset_bits
from .errors import AcdcError, ConfigError
from .fields import field_registry
from .flows import load_flowset, save_flowset, split_train_test
from .importance import permutation_importance
from .pcap import parse_pcap
from .boosting import BoostedTernaryClassifier
from .synthetic import default_generator_config, generate_synthetic, load_generator_config


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as e:
            click.echo(f"config error: {e}", err=True)
            sys.exit(2)
        except (AcdcError, ValueError, OSError, KeyError) as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(3)

    return wrapper


def _apply_config_file(config_path: str | None, params: dict) -> dict:
    """Config-file values take precedence over flag values."""
    if not config_path:
        return params
    overrides = json.loads(Path(config_path).read_text())
    if not isinstance(overrides, dict):
        raise ConfigError(f"{config_path}: config file must hold a JSON object")
    unknown = set(overrides) - set(params)
    if unknown:
        raise ConfigError(f"{config_path}: unknown config keys {sorted(unknown)}")
    params.update(overrides)
    return params


def _parse_sizes(text: str) -> tuple[int, ...]:
    sizes: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, _, hi = part.partition("-")
            sizes.extend(range(int(lo), int(hi) + 1))
        elif part:
            sizes.append(int(part))
    if not sizes:
        raise ConfigError(f"could not parse any sizes from {text!r}")
    return tuple(sizes)


def _parse_batches(text: str) -> tuple[int, ...]:
    try:
        batches = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"bad batch-size list {text!r}") from None
    if not batches:
        raise ConfigError("batch-size list is empty")
    return batches


@click.group()
def main():
    """Adaptive constraint-driven traffic classification toolkit."""


@main.command()
@click.option("--classes", default=10, show_default=True, help="Number of traffic classes.")
@click.option("--flows", default=50, show_default=True, help="Flows per class.")
@click.option("--seed", default=7, show_default=True, help="Generator seed.")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True),
              help="Generator config JSON; overrides --classes/--flows.")
@click.option("-o", "--out", required=True, type=click.Path(), help="Output directory.")
@_guarded
def generate(classes, flows, seed, config_path, out):
    """Generate a synthetic labeled flow set."""
    if config_path:
        config = load_generator_config(config_path)
    else:
        config = default_generator_config(classes, flows)
    flowset = generate_synthetic(config, seed)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "flows.json"
    save_flowset(flowset, path)
    click.echo(f"wrote {len(flowset)} flows across {len(flowset.label_names)} classes to {path}")


@main.command()
@click.option("-i", "--input", "inputs", multiple=True, required=True,
              type=click.Path(exists=True), help="pcap file; repeat per class.")
@click.option("--max-packets", default=4, show_default=True, help="Snapshots kept per flow.")
@click.option("-o", "--out", required=True, type=click.Path(), help="Output directory.")
@_guarded
def ingest(inputs, max_packets, out):
    """Ingest pcap files; each file becomes one labeled class."""
    merged_flows = []
    label_names = {}
    for label, path in enumerate(inputs):
        fs = parse_pcap(path, label=label, max_packets_per_flow=max_packets,
                        label_name=Path(path).stem)
        merged_flows.extend(fs.flows)
        label_names.update(fs.label_names)
    from .flows import FlowSet

    flowset = FlowSet(merged_flows, label_names)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "flows.json"
    save_flowset(flowset, path)
    click.echo(f"wrote {len(flowset)} flows from {len(inputs)} captures to {path}")


@main.command("registry-dump")
@click.option("-o", "--out", default=None, type=click.Path(), help="CSV path (default stdout).")
@_guarded
def registry_dump(out):
    """Dump the header-field registry as CSV."""
    text = field_registry().to_csv()
    if out:
        Path(out).write_text(text)
        click.echo(f"wrote registry to {out}")
    else:
        click.echo(text, nl=False)


@main.command("train-pool")
@click.option("--flows", "flows_path", required=True, type=click.Path(exists=True),
              help="Flow set JSON.")
@click.option("--sizes", default="1-9", show_default=True,
              help="Subset sizes, e.g. '1-9' or '1,2,4'.")
@click.option("--combos", default=10, show_default=True, help="Subsets per size.")
@click.option("--train-fraction", default=0.5, show_default=True)
@click.option("--seed", default=13, show_default=True)
@click.option("--rounds", default=50, show_default=True, help="Boosting rounds.")
@click.option("--depth", default=6, show_default=True, help="Max tree depth.")
@click.option("--learning-rate", default=0.1, show_default=True)
@click.option("--importance-repeats", default=3, show_default=True)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True),
              help="JSON overriding these flags.")
@click.option("-o", "--out", required=True, type=click.Path(), help="Pool output directory.")
@_guarded
def train_pool(flows_path, sizes, combos, train_fraction, seed, rounds, depth,
               learning_rate, importance_repeats, config_path, out):
    """Rank fields on the all-feature model and train the classifier pool."""
    params = _apply_config_file(config_path, {
        "flows_path": flows_path, "sizes": sizes, "combos": combos,
        "train_fraction": train_fraction, "seed": seed, "rounds": rounds,
        "depth": depth, "learning_rate": learning_rate,
        "importance_repeats": importance_repeats,
    })
    registry = field_registry()
    flowset = load_flowset(params["flows_path"])
    train, test = split_train_test(flowset, params["train_fraction"], params["seed"])
    hyper = {
        "n_rounds": params["rounds"],
        "max_depth": params["depth"],
        "learning_rate": params["learning_rate"],
    }

    all_fields = FeatureSubset.of([f.id for f in registry.preliminary_eligible()])
    X_train = encode_flows(train.flows, all_fields)
    X_test = encode_flows(test.flows, all_fields)
    full_model = BoostedTernaryClassifier(**hyper, random_state=params["seed"])
    full_model.fit(X_train, train.labels())
    report = permutation_importance(
        full_model, X_test, test.labels(), all_fields,
        n_repeats=params["importance_repeats"], seed=params["seed"],
    )

    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    with (outdir / "importances.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["field_id", "field", "fi", "bits", "ratio"])
        for r in explore.rank_features(report.importances, registry):
            writer.writerow([r.field_id, registry[r.field_id].dotted, repr(r.fi), r.bits, repr(r.ratio)])

    config = explore.PoolConfig(sizes=_parse_sizes(params["sizes"]), num_combos=params["combos"])
    pool = explore.build_pool(
        train.flows, train.labels(), report.importances, config,
        seed=params["seed"], hyperparams=hyper,
        eval_flows=test.flows, eval_labels=test.labels(),
    )
    manifest = explore.save_pool(pool, outdir)
    click.echo(f"trained {len(pool)} pool members; manifest at {manifest}")


@main.command()
@click.option("--pool", "pool_dir", required=True, type=click.Path(exists=True),
              help="Pool directory (with manifest.csv).")
@click.option("--flows", "flows_path", default=None, type=click.Path(exists=True),
              help="Flow set JSON (required for measured mode).")
@click.option("--batch-sizes", default="1,10,100,500", show_default=True)
@click.option("--mode", type=click.Choice([profiling.MEASURED, profiling.MODELED]),
              default=profiling.MODELED, show_default=True)
@click.option("--calibration", default=None, type=click.Path(exists=True),
              help="Cost model JSON (required for modeled mode).")
@click.option("--calibration-out", default=None, type=click.Path(),
              help="Fit a cost model from measured entries and save it here.")
@click.option("--train-fraction", default=0.5, show_default=True,
              help="Split used to pick measurement flows (test half).")
@click.option("--seed", default=13, show_default=True)
@click.option("--repeats", default=3, show_default=True, help="Timing repeats per point.")
@click.option("-o", "--out", required=True, type=click.Path(), help="Profile CSV path.")
@_guarded
def profile(pool_dir, flows_path, batch_sizes, mode, calibration, calibration_out,
            train_fraction, seed, repeats, out):
    """Produce the per-(classifier, batch size) profile table."""
    registry = field_registry()
    batches = _parse_batches(batch_sizes)
    pool = explore.load_pool(pool_dir)
    entries: list[profiling.ProfileEntry] = []

    if mode == profiling.MODELED:
        if not calibration:
            raise ConfigError("modeled mode needs --calibration COST_MODEL.json")
        cost_model = profiling.CostModel.load(calibration)
        for m in pool.members:
            if m.holdout_f1 is None:
                raise ConfigError(f"member {m.member_id} has no holdout F1 in the manifest")
            entries.extend(
                profiling.model_profile(
                    m.member_id, m.subset_name(registry), subset_bits(m.subset),
                    batches, cost_model, m.holdout_f1,
                )
            )
    else:
        if not flows_path:
            raise ConfigError("measured mode needs --flows FLOWSET.json")
        flowset = load_flowset(flows_path)
        _, test = split_train_test(flowset, train_fraction, seed)
        labels = test.labels()
        for m in pool.members:
            entries.extend(
                profiling.measure_profile(
                    m.member_id, m.model, m.subset, test.flows, labels,
                    batches, repeats=repeats,
                )
            )
        if calibration_out:
            samples = [
                (subset_bits(pool.member(e.classifier_id).subset) * e.batch_size, e.ttd, e.unit_mem)
                for e in entries
            ]
            profiling.calibrate_cost_model(samples).save(calibration_out)
            click.echo(f"wrote cost model to {calibration_out}")

    profiling.write_profile_csv(entries, out)
    click.echo(f"wrote {len(entries)} profile entries to {out}")


@main.command("simulate")
@click.option("--pool", "pool_manifest", default=None, type=click.Path(exists=True),
              help="Pool manifest.csv for coverage validation.")
@click.option("--profile", "profile_path", required=True, type=click.Path(exists=True))
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
@click.option("-o", "--out", required=True, type=click.Path(), help="Output directory.")
@_guarded
def simulate_cmd(pool_manifest, profile_path, scenario_path, seed, out):
    """Replay a rate/memory scenario against a profile table."""
    profiles = profiling.read_profile_csv(profile_path)
    scenario = simulate.Scenario.load(scenario_path)
    member_ids = None
    if pool_manifest:
        member_ids = [r.member_id for r in explore.read_manifest(pool_manifest)]
    trace = simulate.run_simulation(profiles, scenario, seed=seed, member_ids=member_ids)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    trace.to_csv(outdir / "trace.csv")
    trace.decisions_to_csv(outdir / "decisions.csv")
    last = trace.ticks[-1]
    click.echo(
        f"simulated {trace.duration} ticks: {trace.total_completed()} flows completed, "
        f"final backlog {last.backlog}; wrote {outdir / 'trace.csv'}"
    )


@main.command()
@click.option("--profile", "profile_path", default=None, type=click.Path(exists=True),
              help="Profile CSV to summarize per classifier.")
@click.option("--traces", multiple=True, type=click.Path(exists=True),
              help="Trace CSVs from a swept simulation, in sweep order.")
@click.option("--expect", type=click.Choice(["increasing", "decreasing", "none"]),
              default="none", show_default=True,
              help="Expected batch-size trend across the swept traces.")
@click.option("-o", "--out", required=True, type=click.Path(), help="Output directory.")
@_guarded
def report(profile_path, traces, expect, out):
    """Summaries: per-classifier trade-offs and sweep trend verdicts."""
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    wrote = []

    if profile_path:
        entries = profiling.read_profile_csv(profile_path)
        by_id: dict[str, list[profiling.ProfileEntry]] = {}
        for e in entries:
            by_id.setdefault(e.classifier_id, []).append(e)
        with (outdir / "classifiers.csv").open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["classifier_id", "subset", "f1", "min_ttd_s", "max_ttd_s",
                 "min_unit_mem_bytes", "max_unit_mem_bytes", "best_ratio"]
            )
            for cid in sorted(by_id):
                es = by_id[cid]
                writer.writerow(
                    [cid, es[0].subset, repr(max(e.f1 for e in es)),
                     repr(min(e.ttd for e in es)), repr(max(e.ttd for e in es)),
                     min(e.unit_mem for e in es), max(e.unit_mem for e in es),
                     repr(max(e.ratio for e in es))]
                )
        wrote.append("classifiers.csv")

    if traces:
        loaded = [simulate.SimulationTrace.from_csv(p) for p in traces]
        with (outdir / "sweep.csv").open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["sweep_point", "trace", "median_batch_size", "completed_flows",
                 "mean_throughput", "final_backlog", "overcommit_ticks"]
            )
            for i, (path, tr) in enumerate(zip(traces, loaded)):
                writer.writerow(
                    [i, path, repr(tr.median_batch_size()), tr.total_completed(),
                     repr(tr.total_completed() / tr.duration), tr.ticks[-1].backlog,
                     sum(1 for t in tr.ticks if t.overcommit)]
                )
        wrote.append("sweep.csv")
        if expect != "none":
            verdict = simulate.trend_check(loaded, expect)
            click.echo(
                f"trend {expect}: medians {list(verdict.medians)}, "
                f"violations {verdict.violations}, monotone {verdict.monotone}"
            )

    if not wrote:
        raise ConfigError("report needs --profile and/or --traces")
    click.echo(f"wrote {', '.join(wrote)} to {outdir}")


if __name__ == "__main__":
    main()
