import json

import pytest

import acdc
from acdc.errors import ConfigError
from acdc.synthetic import GeneratorConfig, default_generator_config, generate_synthetic


def test_deterministic_for_equal_seed(tmp_path):
    cfg = default_generator_config(2, 100)
    a = generate_synthetic(cfg, seed=7)
    b = generate_synthetic(cfg, seed=7)
    pa, pb = tmp_path / "a.json", tmp_path / "b.json"
    acdc.save_flowset(a, pa)
    acdc.save_flowset(b, pb)
    assert len(a) == 200
    assert pa.read_bytes() == pb.read_bytes()


def test_label_histogram_exact():
    fs = generate_synthetic(default_generator_config(10, 50), seed=3)
    assert fs.class_counts() == {i: 50 for i in range(10)}
    assert len(fs.label_names) == 10


def test_every_flow_has_at_least_four_packets():
    fs = generate_synthetic(default_generator_config(3, 30), seed=11)
    assert all(len(f.packets) >= 4 for f in fs.flows)


def test_different_seeds_differ():
    cfg = default_generator_config(2, 50)
    a = generate_synthetic(cfg, seed=1)
    b = generate_synthetic(cfg, seed=2)
    assert {f.key for f in a.flows} != {f.key for f in b.flows}


def test_separable_ttl_classes_reach_perfect_f1(separable_ttl_config):
    fs = generate_synthetic(separable_ttl_config, seed=5)
    train, test = acdc.split_train_test(fs, 0.5, seed=1)
    subset = acdc.FeatureSubset.of(["ipv4.ttl"])
    Xtr = acdc.encode_flows(train.flows, subset)
    Xte = acdc.encode_flows(test.flows, subset)
    clf = acdc.BoostedTernaryClassifier(n_rounds=10, max_depth=2).fit(Xtr, train.labels())
    assert acdc.weighted_f1(train.labels(), clf.predict(Xtr)) == 1.0
    assert acdc.weighted_f1(test.labels(), clf.predict(Xte)) == 1.0


def test_config_errors():
    with pytest.raises(ConfigError):
        GeneratorConfig.from_dict({"classes": []})
    with pytest.raises(ConfigError):
        GeneratorConfig.from_dict({"classes": [{"flows": 10}]})
    with pytest.raises(ConfigError):
        GeneratorConfig.from_dict({"classes": [{"flows": 0}, {"flows": 1}]})
    with pytest.raises(ConfigError):
        default_generator_config(1, 10)
    with pytest.raises(ConfigError):
        default_generator_config(2, 0)


def test_distribution_spec_errors():
    bad = {"classes": [{"flows": 1, "ttl": {"values": []}}, {"flows": 1}]}
    with pytest.raises(ConfigError):
        GeneratorConfig.from_dict(bad)
    bad = {"classes": [{"flows": 1, "ttl": {"nope": 3}}, {"flows": 1}]}
    with pytest.raises(ConfigError):
        GeneratorConfig.from_dict(bad)
    bad = {"classes": [{"flows": 1, "iat": {"mean": -1}}, {"flows": 1}]}
    with pytest.raises(ConfigError):
        GeneratorConfig.from_dict(bad)
    bad = {"classes": [{"flows": 1, "tcp_options": {"templates": [["warp"]]}}, {"flows": 1}]}
    with pytest.raises(ConfigError):
        GeneratorConfig.from_dict(bad)


def test_config_file_loading(tmp_path, separable_ttl_config):
    p = tmp_path / "gen.json"
    p.write_text(json.dumps(separable_ttl_config))
    cfg = acdc.load_generator_config(p)
    fs = generate_synthetic(cfg, seed=2)
    assert fs.class_counts() == {0: 60, 1: 60}
    assert fs.label_names == {0: "ttl64", 1: "ttl128"}


def test_udp_fraction_produces_udp_flows():
    cfg = GeneratorConfig.from_dict(
        {"classes": [{"flows": 40, "udp_fraction": 1.0}, {"flows": 40, "udp_fraction": 0.0}]}
    )
    fs = generate_synthetic(cfg, seed=9)
    protos = {label: {f.key.proto for f in fs.flows if f.label == label} for label in (0, 1)}
    assert protos[0] == {17}
    assert protos[1] == {6}


def test_headers_parse_back():
    """Generated header bytes are structurally valid IPv4/TCP."""
    fs = generate_synthetic(default_generator_config(4, 10), seed=21)
    for flow in fs.flows:
        for p in flow.packets:
            assert p.ip_header[0] >> 4 == 4
            ihl = p.ip_header[0] & 0xF
            assert len(p.ip_header) == ihl * 4
            total_len = int.from_bytes(p.ip_header[2:4], "big")
            assert total_len == 20 + len(p.transport_header) + p.payload_len
            if p.transport_proto == 6:
                doff = p.transport_header[12] >> 4
                assert len(p.transport_header) == doff * 4
            else:
                assert int.from_bytes(p.transport_header[4:6], "big") == 8 + p.payload_len
