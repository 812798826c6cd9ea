from __future__ import annotations

import sys

import pytest

from parlens.config import ConfigError, load_config, parse_config

from conftest import BUNDLE


def test_bundle_config_resolves_relative_paths():
    cfg = load_config(BUNDLE / "config.yaml")
    assert cfg.name == "babel-mini"
    assert cfg.rfc == [BUNDLE / "rfc-babel-mini.txt"]
    assert cfg.workdir == BUNDLE / "out"
    assert cfg.gateway.fixtures == BUNDLE / "fixtures.jsonl"
    assert cfg.format_file == BUNDLE / "out" / "format.pform"
    assert cfg.reports == BUNDLE / "out" / "reports"
    assert cfg.array_counts == (0, 1)
    assert cfg.parser_target().command[:3] == (sys.executable, "-m", "parlens.refparsers")


def test_defaults(tmp_path):
    cfg = parse_config({}, tmp_path)
    assert cfg.workdir == tmp_path / "parlens-out"
    assert (cfg.gateway.mode, cfg.max_cycles, cfg.max_paths) == ("replay", 3, 10_000)
    with pytest.raises(ConfigError, match="no target"):
        cfg.parser_target()


def test_single_rfc_and_absolute_paths(tmp_path):
    cfg = parse_config({"rfc": "a.txt", "workdir": "/abs/out", "format": "f.pform"}, tmp_path)
    assert cfg.rfc == [tmp_path / "a.txt"]
    assert cfg.workdir.as_posix() == "/abs/out"
    assert cfg.format_file == tmp_path / "f.pform"


@pytest.mark.parametrize(
    "data, message",
    [
        ({"nmae": "x"}, "unknown key.*in config: nmae"),
        ({"gateway": {"mdoe": "replay"}}, "in gateway"),
        ({"generation": {"counts": [0]}}, "in generation"),
        ({"triage": {"cycles": 2}}, "in triage"),
        ({"gateway": "replay"}, "must be a mapping"),
        ({"gateway": {"mode": "offline"}}, "gateway.mode"),
        ({"generation": {"array_counts": []}}, "array_counts"),
        ({"generation": {"array_counts": [0, -1]}}, "array_counts"),
        ({"triage": {"max_cycles": 0}}, "positive"),
        ({"target": {"command": "x", "input_mode": "pipe"}}, "input_mode"),
    ],
)
def test_bad_configs(tmp_path, data, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(data, tmp_path)


def test_unreadable_or_invalid_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: [unclosed\n")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_config(bad)
