"""End-to-end pipeline through the command-line interface."""

import json

import pytest
from click.testing import CliRunner

import acdc
from acdc.cli import main
from acdc.profiling import CostModel

from conftest import DATA_DIR


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory, runner):
    """generate -> train-pool once for the CLI tests that need a pool."""
    root = tmp_path_factory.mktemp("pipeline")
    r = runner.invoke(main, ["generate", "--classes", "3", "--flows", "40", "--seed", "7",
                             "-o", str(root / "data")])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, [
        "train-pool", "--flows", str(root / "data/flows.json"),
        "--sizes", "1,2", "--combos", "2", "--seed", "5",
        "--rounds", "4", "--depth", "2", "--importance-repeats", "1",
        "-o", str(root / "pool"),
    ])
    assert r.exit_code == 0, r.output
    cm = CostModel(0.04, 2.5e-7, 4e7, 120.0)
    cm.save(root / "cost_model.json")
    return root


def test_generate_writes_flows(tmp_path, runner):
    out = tmp_path / "brand" / "new"  # missing directories are created
    r = runner.invoke(main, ["generate", "--classes", "2", "--flows", "10", "--seed", "3",
                             "-o", str(out)])
    assert r.exit_code == 0, r.output
    fs = acdc.load_flowset(out / "flows.json")
    assert len(fs) == 20


def test_generate_rejects_bad_class_count(tmp_path, runner):
    r = runner.invoke(main, ["generate", "--classes", "0", "--flows", "10", "-o", str(tmp_path)])
    assert r.exit_code == 2
    assert "class" in r.output


def test_generate_deterministic(tmp_path, runner):
    for d in ("a", "b"):
        r = runner.invoke(main, ["generate", "--classes", "2", "--flows", "15", "--seed", "9",
                                 "-o", str(tmp_path / d)])
        assert r.exit_code == 0
    assert (tmp_path / "a/flows.json").read_bytes() == (tmp_path / "b/flows.json").read_bytes()


def test_generate_config_file_overrides_flags(tmp_path, runner, separable_ttl_config):
    cfg = tmp_path / "gen.json"
    cfg.write_text(json.dumps(separable_ttl_config))
    r = runner.invoke(main, ["generate", "--classes", "9", "--flows", "99", "--seed", "1",
                             "--config", str(cfg), "-o", str(tmp_path / "out")])
    assert r.exit_code == 0, r.output
    fs = acdc.load_flowset(tmp_path / "out/flows.json")
    assert fs.class_counts() == {0: 60, 1: 60}


def test_registry_dump(tmp_path, runner):
    out = tmp_path / "registry.csv"
    r = runner.invoke(main, ["registry-dump", "-o", str(out)])
    assert r.exit_code == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 38


def test_train_pool_manifest(pipeline_dir):
    manifest = acdc.read_manifest(pipeline_dir / "pool/manifest.csv")
    assert len(manifest) == 4  # 2 sizes x 2 combos
    assert all((pipeline_dir / "pool" / row.model_path).exists() for row in manifest)
    assert (pipeline_dir / "pool/importances.csv").exists()
    assert all(row.holdout_f1 is not None for row in manifest)


def test_train_pool_rerun_identical(tmp_path, runner, pipeline_dir):
    r = runner.invoke(main, [
        "train-pool", "--flows", str(pipeline_dir / "data/flows.json"),
        "--sizes", "1,2", "--combos", "2", "--seed", "5",
        "--rounds", "4", "--depth", "2", "--importance-repeats", "1",
        "-o", str(tmp_path / "pool2"),
    ])
    assert r.exit_code == 0, r.output
    assert (tmp_path / "pool2/manifest.csv").read_bytes() == (
        pipeline_dir / "pool/manifest.csv"
    ).read_bytes()


def test_profile_modeled_deterministic(tmp_path, runner, pipeline_dir):
    args = [
        "profile", "--pool", str(pipeline_dir / "pool"),
        "--mode", "modeled", "--calibration", str(pipeline_dir / "cost_model.json"),
        "--batch-sizes", "1,10,100",
    ]
    r1 = runner.invoke(main, args + ["-o", str(tmp_path / "p1.csv")])
    r2 = runner.invoke(main, args + ["-o", str(tmp_path / "p2.csv")])
    assert r1.exit_code == 0, r1.output
    assert (tmp_path / "p1.csv").read_bytes() == (tmp_path / "p2.csv").read_bytes()
    entries = acdc.read_profile_csv(tmp_path / "p1.csv")
    assert len(entries) == 4 * 3
    assert all(e.mode == "modeled" for e in entries)


def test_profile_modeled_requires_calibration(tmp_path, runner, pipeline_dir):
    r = runner.invoke(main, ["profile", "--pool", str(pipeline_dir / "pool"),
                             "--mode", "modeled", "-o", str(tmp_path / "p.csv")])
    assert r.exit_code == 2


def test_profile_measured(tmp_path, runner, pipeline_dir):
    r = runner.invoke(main, [
        "profile", "--pool", str(pipeline_dir / "pool"),
        "--flows", str(pipeline_dir / "data/flows.json"),
        "--mode", "measured", "--batch-sizes", "1,20", "--repeats", "1",
        "--calibration-out", str(tmp_path / "cm.json"),
        "-o", str(tmp_path / "measured.csv"),
    ])
    assert r.exit_code == 0, r.output
    entries = acdc.read_profile_csv(tmp_path / "measured.csv")
    assert all(e.mode == "measured" and e.ttd > 0 for e in entries)
    CostModel.load(tmp_path / "cm.json")  # parseable cost model


def test_simulate_against_reference_profile(tmp_path, runner):
    scenario = {"duration": 5, "rate": 1000, "mem": 2_000_000_000}
    spath = tmp_path / "scenario.json"
    spath.write_text(json.dumps(scenario))
    r = runner.invoke(main, [
        "simulate", "--profile", str(DATA_DIR / "pool_profile_b500.csv"),
        "--scenario", str(spath), "-o", str(tmp_path / "sim"),
    ])
    assert r.exit_code == 0, r.output
    decisions = (tmp_path / "sim/decisions.csv").read_text().strip().splitlines()
    # first decision matches the scheduler's choice on the same inputs
    assert decisions[1].startswith("0,")
    assert ",c00," in decisions[1]
    assert decisions[1].rstrip().endswith(",0")
    trace = acdc.SimulationTrace.from_csv(tmp_path / "sim/trace.csv")
    assert trace.duration == 5


def test_simulate_pool_coverage_mismatch(tmp_path, runner, pipeline_dir):
    spath = tmp_path / "scenario.json"
    spath.write_text(json.dumps({"duration": 2, "rate": 10, "mem": 1e9}))
    r = runner.invoke(main, [
        "simulate", "--pool", str(pipeline_dir / "pool/manifest.csv"),
        "--profile", str(DATA_DIR / "pool_profile_b500.csv"),
        "--scenario", str(spath), "-o", str(tmp_path / "sim"),
    ])
    assert r.exit_code == 2


def test_report_over_traces(tmp_path, runner):
    spath = tmp_path / "scenario.json"
    traces = []
    for i, mem in enumerate((3, 2, 1)):
        spath.write_text(json.dumps({"duration": 4, "rate": 1000, "mem": mem * 1e9}))
        r = runner.invoke(main, [
            "simulate", "--profile", str(DATA_DIR / "pool_profile_b500.csv"),
            "--scenario", str(spath), "-o", str(tmp_path / f"sim{i}"),
        ])
        assert r.exit_code == 0
        traces.append(str(tmp_path / f"sim{i}/trace.csv"))
    r = runner.invoke(main, [
        "report", "--profile", str(DATA_DIR / "pool_profile_b500.csv"),
        "--traces", traces[0], "--traces", traces[1], "--traces", traces[2],
        "--expect", "increasing", "-o", str(tmp_path / "rep"),
    ])
    assert r.exit_code == 0, r.output
    sweep = (tmp_path / "rep/sweep.csv").read_text().strip().splitlines()
    assert len(sweep) == 4  # header + one row per swept point
    classifiers = (tmp_path / "rep/classifiers.csv").read_text().strip().splitlines()
    assert len(classifiers) == 16
    assert "trend increasing" in r.output


def test_report_needs_inputs(tmp_path, runner):
    r = runner.invoke(main, ["report", "-o", str(tmp_path)])
    assert r.exit_code == 2


def test_ingest_pcaps(tmp_path, runner):
    from test_pcap import build_pcap, eth_ipv4_frame

    p1 = tmp_path / "app_a.pcap"
    p2 = tmp_path / "app_b.pcap"
    p1.write_bytes(build_pcap([(1.0, eth_ipv4_frame("10.0.0.1", "10.0.0.2", 40000, 443))]))
    p2.write_bytes(build_pcap([(2.0, eth_ipv4_frame("10.0.9.1", "10.0.9.2", 41000, 80))]))
    r = runner.invoke(main, ["ingest", "-i", str(p1), "-i", str(p2), "-o", str(tmp_path / "out")])
    assert r.exit_code == 0, r.output
    fs = acdc.load_flowset(tmp_path / "out/flows.json")
    assert len(fs) == 2
    assert fs.label_names == {0: "app_a", 1: "app_b"}
