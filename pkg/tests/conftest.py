from __future__ import annotations

import shutil
from dataclasses import replace
from pathlib import Path

import pytest

from parlens.config import PipelineConfig, load_config
from parlens.format import parse_format

ROOT = Path(__file__).resolve().parents[1]
BUNDLE = ROOT / "fixtures" / "babel_mini"

BABEL = """\
struct TLV {
    UINT8 Type;
    switch (Type) {
        case 0: Pad1;
        case 6: RouterIdTLV;
    } Payload;
}
struct Pad1 { }
struct RouterIdTLV {
    UINT8 Length;
    Length >= 10;
    UINT16 Reserved;
    Reserved == 0;
    UINT64 RouterId;
    RouterId != 0;
    RouterId != 0xFFFFFFFFFFFFFFFF;
}
"""


@pytest.fixture
def babel():
    return parse_format(BABEL)


def bundle_config(workdir: Path, variant: str | None = None, **changes) -> PipelineConfig:
    """The Babel-mini bundle config with its work directory moved to ``workdir``."""
    cfg = replace(load_config(BUNDLE / "config.yaml"), workdir=Path(workdir), **changes)
    if variant is not None:
        cfg.target = dict(cfg.target, command=f"{{python}} -m parlens.refparsers {variant}")
    return cfg


@pytest.fixture
def bundle_copy(tmp_path):
    """A private copy of the bundle, for tests that drive the CLI."""
    dst = tmp_path / "bundle"
    shutil.copytree(BUNDLE, dst, ignore=shutil.ignore_patterns("out", "__pycache__"))
    return dst


# -- acceptance summary ---------------------------------------------------------

_criteria: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion exercised by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = _markers.get(report.nodeid)
    if marker is None:
        return
    n, title = marker
    _criteria.setdefault(n, (title, []))[1].append(report.outcome)


_markers: dict[str, tuple[int, str]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _markers[item.nodeid] = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, outcomes = _criteria[n]
        ok = outcomes and all(o == "passed" for o in outcomes)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
