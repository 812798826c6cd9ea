"""Pipeline configuration, read from a single YAML file.

Relative paths are resolved against the directory holding the config
file.  Unknown keys are rejected at every level so that typos fail loudly
before any stage runs.  Example::

    name: babel-mini
    rfc: [rfc-babel-mini.txt]
    workdir: out
    gateway: {mode: replay, fixtures: fixtures.jsonl}
    generation: {array_counts: [0, 1], max_paths: 10000, solver_timeout: 10}
    target: {command: "{python} -m parlens.refparsers omitting", timeout_ms: 5000}
    triage: {max_cycles: 3}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .harness import HarnessConfigError, ParserTarget
from .llm.gateway import MODES


class ConfigError(ValueError):
    pass


_TOP = {"name", "rfc", "workdir", "format", "reports", "gateway", "generation", "target", "triage", "workers"}
_GATEWAY = {"mode", "fixtures", "model", "base_url", "max_retries"}
_GENERATION = {"array_counts", "max_paths", "solver_timeout", "structural"}
_TRIAGE = {"max_cycles"}


def _check_keys(block: Any, allowed: set[str], where: str) -> dict:
    if block is None:
        return {}
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(map(str, unknown)))}")
    return block


@dataclass
class GatewayConfig:
    mode: str = "replay"
    fixtures: Optional[Path] = None
    model: str = "gpt-4o"
    base_url: str = "https://api.openai.com/v1"
    max_retries: int = 3


@dataclass
class PipelineConfig:
    name: str
    rfc: list[Path]
    workdir: Path
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    format_path: Optional[Path] = None
    reports_dir: Optional[Path] = None
    array_counts: tuple[int, ...] = (0, 1)
    max_paths: int = 10_000
    solver_timeout: float = 10.0
    structural: bool = True
    target: Optional[dict] = None
    max_cycles: int = 3
    workers: Optional[int] = None

    @property
    def format_file(self) -> Path:
        return self.format_path or self.workdir / "format.pform"

    @property
    def reports(self) -> Path:
        return self.reports_dir or self.workdir / "reports"

    def parser_target(self) -> ParserTarget:
        if not self.target:
            raise ConfigError("no target parser configured")
        try:
            return ParserTarget.from_config(self.target)
        except HarnessConfigError as exc:
            raise ConfigError(str(exc)) from exc


def parse_config(data: Any, base: Path) -> PipelineConfig:
    top = _check_keys(data, _TOP, "config")
    gw = _check_keys(top.get("gateway"), _GATEWAY, "gateway")
    gen = _check_keys(top.get("generation"), _GENERATION, "generation")
    tri = _check_keys(top.get("triage"), _TRIAGE, "triage")

    def path(value) -> Path:
        p = Path(str(value)).expanduser()
        return p if p.is_absolute() else (base / p)

    rfc = top.get("rfc", [])
    if isinstance(rfc, (str, Path)):
        rfc = [rfc]
    mode = gw.get("mode", "replay")
    if mode not in MODES:
        raise ConfigError(f"gateway.mode must be one of {', '.join(MODES)}")
    gateway = GatewayConfig(
        mode,
        path(gw["fixtures"]) if gw.get("fixtures") else None,
        str(gw.get("model", GatewayConfig.model)),
        str(gw.get("base_url", GatewayConfig.base_url)),
        int(gw.get("max_retries", 3)),
    )
    counts = tuple(int(n) for n in gen.get("array_counts", (0, 1)))
    if not counts or any(n < 0 for n in counts):
        raise ConfigError("generation.array_counts must be a non-empty list of non-negative integers")
    cfg = PipelineConfig(
        name=str(top.get("name", "protocol")),
        rfc=[path(p) for p in rfc],
        workdir=path(top.get("workdir", "parlens-out")),
        gateway=gateway,
        format_path=path(top["format"]) if top.get("format") else None,
        reports_dir=path(top["reports"]) if top.get("reports") else None,
        array_counts=counts,
        max_paths=int(gen.get("max_paths", 10_000)),
        solver_timeout=float(gen.get("solver_timeout", 10.0)),
        structural=bool(gen.get("structural", True)),
        target=top.get("target"),
        max_cycles=int(tri.get("max_cycles", 3)),
        workers=top.get("workers"),
    )
    if cfg.max_paths < 1 or cfg.solver_timeout <= 0 or cfg.max_cycles < 1:
        raise ConfigError("max_paths, solver_timeout and max_cycles must be positive")
    if cfg.target is not None:
        cfg.parser_target()  # validate early
    return cfg


def load_config(path: str | Path) -> PipelineConfig:
    p = Path(path)
    try:
        data = yaml.safe_load(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {p}: {exc}") from exc
    return parse_config(data or {}, p.resolve().parent)
