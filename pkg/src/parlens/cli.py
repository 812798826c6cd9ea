"""Command line entry point: ``parlens <stage> --config FILE``.

Exit status: 0 when no implementation error was found, 2 when bugs were
found, 1 on any tool error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from . import pipeline
from .config import ConfigError, PipelineConfig, load_config
from .doctree import DocTreeError, ExtractionError, IngestError
from .format import FormatError
from .graph import PathCapError
from .harness import HarnessConfigError
from .llm.gateway import MODES, GatewayError
from .triage import TriageError

EXIT_OK, EXIT_ERROR, EXIT_BUGS = 0, 1, 2

TOOL_ERRORS = (
    ConfigError,
    DocTreeError,
    ExtractionError,
    FileNotFoundError,
    FormatError,
    GatewayError,
    HarnessConfigError,
    IngestError,
    PathCapError,
    pipeline.PipelineError,
    TriageError,
)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parlens", description="Test protocol parsers against formats extracted from RFCs.")
    p.add_argument("stage", choices=(*pipeline.STAGES, "all"))
    p.add_argument("--config", required=True, help="pipeline configuration (YAML)")
    p.add_argument("--from", dest="from_stage", help="resume point: 'merge' for extract, any stage for all")
    p.add_argument("--dot", action="store_true", help="also write graph.dot")
    p.add_argument("--emit-smt", action="store_true", help="also write one SMT-LIB file per path")
    p.add_argument("--fixtures", help="model fixture file (overrides the config)")
    p.add_argument("--mode", choices=MODES, help="model gateway mode (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _stages(stage: str, from_stage: Optional[str]) -> list[str]:
    if stage != "all":
        return [stage]
    if from_stage is None:
        return list(pipeline.STAGES)
    start = "extract" if from_stage == "merge" else from_stage
    if start not in pipeline.STAGES:
        raise ConfigError(f"unknown stage {from_stage!r}")
    return list(pipeline.STAGES[pipeline.STAGES.index(start) :])


def run(cfg: PipelineConfig, stages: list[str], args: argparse.Namespace) -> int:
    gateway = None

    def gw():
        nonlocal gateway
        if gateway is None:
            gateway = pipeline.make_gateway(cfg)
        return gateway

    status = EXIT_OK
    try:
        for stage in stages:
            if stage == "extract":
                resume = args.from_stage if args.from_stage == "merge" else None
                _, spec, index = pipeline.stage_extract(cfg, gw(), from_stage=resume)
                print(f"extract: {len(spec.structs)} structs, {len(index.entries)} trace entries -> {cfg.workdir}")
            elif stage == "graph":
                print(f"graph: {pipeline.stage_graph(cfg, dot=args.dot)} paths")
            elif stage == "gen":
                corpus = pipeline.stage_gen(cfg, emit_smt=args.emit_smt)
                print(f"gen: {corpus.summary_line()}")
            elif stage == "run":
                c = pipeline.stage_run(cfg).counts()
                print(
                    f"run: {c['cases']} cases, {c['inconsistencies']} inconsistencies"
                    f" ({c['parser-accepts-invalid']} accepts-invalid, {c['parser-rejects-valid']} rejects-valid,"
                    f" {c['crash']} crash)"
                )
            elif stage == "triage":
                out = pipeline.stage_triage(cfg, gw())
                print(
                    f"triage: {len(out.implementation_errors)} implementation errors, {len(out.audit)} refinements,"
                    f" {len(out.undetermined)} undetermined, {out.cycles} cycle(s)"
                    + ("" if out.fixed_point else ", no fixed point")
                )
                for d in out.undetermined:
                    print(f"  needs manual review: {d.case_id}")
                status = EXIT_BUGS if out.implementation_errors else EXIT_OK
            elif stage == "report":
                reports = pipeline.stage_report(cfg)
                print(f"report: {len(reports)} bug report(s) in {cfg.reports}")
                for r in reports:
                    print(f"  {r.case_id}: {r.description} (section {r.section_id})")
                status = EXIT_BUGS if reports else EXIT_OK
    finally:
        if gateway is not None:
            gateway.close()
    return status


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.mode:
            cfg.gateway.mode = args.mode
        if args.fixtures:
            cfg.gateway.fixtures = Path(args.fixtures).resolve()
        if args.from_stage and args.stage not in ("all", "extract"):
            raise ConfigError("--from applies to the extract and all commands only")
        return run(cfg, _stages(args.stage, args.from_stage), args)
    except TOOL_ERRORS as exc:
        print(f"parlens: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
