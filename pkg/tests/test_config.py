import pytest

from relsift.config import ConfigError, RunConfig, load_config, parse_config


def test_defaults_serialize_and_round_trip():
    cfg = RunConfig()
    text = cfg.serialize()
    again = parse_config(text)
    assert again.serialize() == text
    # canonical form is a fixed point byte-for-byte
    assert parse_config(again.serialize()).serialize() == text


def test_round_trip_preserves_overrides():
    cfg = RunConfig()
    cfg.set("train", "alpha", "16")
    cfg.set("train", "backtracking", "false")
    cfg.set("data", "class_balance", "0.7, 0.3")
    text = cfg.serialize()
    again = parse_config(text)
    assert again.get("train", "alpha") == 16
    assert again.get("train", "backtracking") is False
    assert again.get("data", "class_balance") == [0.7, 0.3]
    assert again.serialize() == text


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[nope]\nkey = 1\n")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_config("[train]\nbogus = 1\n")


def test_malformed_line_rejected():
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        parse_config("[train]\nnot a pair\n")


def test_key_outside_section_rejected():
    with pytest.raises(ConfigError, match="outside any section"):
        parse_config("alpha = 10\n")


def test_bad_value_types_rejected():
    with pytest.raises(ConfigError):
        parse_config("[train]\nbacktracking = maybe\n")
    with pytest.raises(ConfigError):
        parse_config("[data]\nclass_balance = a, b\n")


def test_comments_and_blanks_ignored():
    cfg = parse_config("# top\n\n[train]\n# inner\nalpha = 4\n")
    assert cfg.get("train", "alpha") == 4


def test_synthetic_spec_construction():
    cfg = RunConfig()
    cfg.set("data", "nodes", "120")
    cfg.set("data", "edges", "300, 500")
    cfg.set("data", "homophily", "0.8, 0.2")
    cfg.set("train", "seed", "5")
    spec = cfg.synthetic_spec()
    assert spec.num_nodes == 120
    assert [r.edge_count for r in spec.relations] == [300, 500]
    assert spec.seed == 5


def test_synthetic_spec_mismatched_relations():
    cfg = RunConfig()
    cfg.set("data", "edges", "100")
    cfg.set("data", "homophily", "0.5, 0.5")
    with pytest.raises(ConfigError, match="lengths differ"):
        cfg.synthetic_spec()


def test_train_config_validation_routed():
    cfg = RunConfig()
    cfg.set("train", "alpha", "1")
    with pytest.raises(ConfigError):
        cfg.train_config()


def test_files_source_requires_paths():
    cfg = RunConfig()
    cfg.set("data", "source", "files")
    with pytest.raises(ConfigError, match="needs features"):
        cfg.load_graph()


def test_load_config_from_disk(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("[train]\nepochs = 7\n[output]\ndir = results\n")
    cfg = load_config(path)
    assert cfg.get("train", "epochs") == 7
    assert cfg.get("output", "dir") == "results"
