"""Pipeline stages with their artifacts on disk.

Each stage reads what the previous one wrote to the work directory, so
stages can be rerun, resumed or inspected on their own.

  extract  doctree.json, format.pform, trace.json
  graph    graph.txt (path count), graph.dot with ``dot=True``
  gen      corpus/ (one .bin per case + manifest.json), smt/ with ``emit_smt=True``
  run      runrecords.jsonl, timings.json
  triage   diagnoses.jsonl, refinement.jsonl, triage.json and, after a
           refinement, format.refined.pform, trace.refined.json,
           corpus.refined/, runrecords.refined.jsonl
  report   reports/<case>.json, .md, .bin and reports/index.json
"""

from __future__ import annotations

import json
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .config import PipelineConfig
from .doctree import DocTree, TraceIndex, build_initial_tree, load_rfc, merge_formats, run_extraction
from .format import FormatSpec, parse_format, print_format
from .graph import build_graph, count_paths, enumerate_paths, to_dot
from .harness import (
    Inconsistency,
    ParserTarget,
    SuiteResult,
    classify,
    read_records,
    run_suite,
    write_records,
)
from .llm import Gateway
from .testgen import Corpus, TestCase, generate_corpus, load_corpus, path_to_formula, to_smtlib, write_corpus
from .triage import (
    FORMAT_EXTRACTION_ERROR,
    IMPLEMENTATION_ERROR,
    UNDETERMINED,
    AuditEntry,
    Diagnosis,
    TriageError,
    diagnose,
    emit_report,
    read_jsonl,
    refine_format,
    write_jsonl,
)

log = logging.getLogger(__name__)

STAGES = ("extract", "graph", "gen", "run", "triage", "report")

DOCTREE = "doctree.json"
TRACE = "trace.json"
CORPUS = "corpus"
RECORDS = "runrecords.jsonl"
TIMINGS = "timings.json"
DIAGNOSES = "diagnoses.jsonl"
AUDIT = "refinement.jsonl"
TRIAGE = "triage.json"


class PipelineError(RuntimeError):
    pass


def make_gateway(cfg: PipelineConfig) -> Gateway:
    gw = cfg.gateway
    return Gateway(gw.mode, gw.fixtures, model=gw.model, base_url=gw.base_url)


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise PipelineError(f"missing {what}: {path} (run the earlier stage first)")
    return path


def load_format(path: Path) -> FormatSpec:
    return parse_format(_require(path, "format").read_text())


# -- extract -----------------------------------------------------------------


def stage_extract(cfg: PipelineConfig, gateway: Gateway, *, from_stage: Optional[str] = None) -> tuple[DocTree, FormatSpec, TraceIndex]:
    """Build the DocTree and the merged format.  ``from_stage="merge"``
    reuses the fragments stored in an existing doctree.json."""
    work = cfg.workdir
    work.mkdir(parents=True, exist_ok=True)
    if from_stage == "merge":
        tree = DocTree.load(_require(work / DOCTREE, "doctree"))
        tree, spec, index = merge_formats(tree, gateway, max_retries=cfg.gateway.max_retries)
    elif from_stage in (None, "extract"):
        if not cfg.rfc:
            raise PipelineError("no RFC input configured")
        doc = load_rfc(cfg.rfc)
        tree = build_initial_tree(doc.toc, doc.sections)
        tree, spec, index = run_extraction(tree, gateway, max_retries=cfg.gateway.max_retries)
    else:
        raise PipelineError(f"extract cannot resume from {from_stage!r}")
    tree.save(work / DOCTREE)
    cfg.format_file.parent.mkdir(parents=True, exist_ok=True)
    cfg.format_file.write_text(print_format(spec))
    index.save(work / TRACE)
    return tree, spec, index


# -- graph -------------------------------------------------------------------


def stage_graph(cfg: PipelineConfig, *, dot: bool = False) -> int:
    spec = load_format(cfg.format_file)
    graph = build_graph(spec, cfg.array_counts)
    n = count_paths(graph)
    (cfg.workdir / "graph.txt").write_text(f"{n} paths\n")
    if dot:
        (cfg.workdir / "graph.dot").write_text(to_dot(graph))
    return n


# -- gen ---------------------------------------------------------------------


def _generate(cfg: PipelineConfig, spec: FormatSpec, index: TraceIndex, out: Path, emit_smt: bool = False) -> Corpus:
    corpus = generate_corpus(
        spec,
        array_counts=cfg.array_counts,
        max_paths=cfg.max_paths,
        timeout=cfg.solver_timeout,
        section_of=index.section_for,
        structural=cfg.structural,
    )
    write_corpus(out, corpus)
    if emit_smt:
        smt = cfg.workdir / "smt"
        if smt.exists():
            shutil.rmtree(smt)
        smt.mkdir(parents=True)
        for path in enumerate_paths(build_graph(spec, cfg.array_counts), cfg.max_paths):
            (smt / f"{path.id}.smt2").write_text(to_smtlib(path_to_formula(path)))
    return corpus


def stage_gen(cfg: PipelineConfig, *, emit_smt: bool = False) -> Corpus:
    spec = load_format(cfg.format_file)
    index = TraceIndex.load(_require(cfg.workdir / TRACE, "trace index"))
    return _generate(cfg, spec, index, cfg.workdir / CORPUS, emit_smt)


# -- run ---------------------------------------------------------------------


def _run(cfg: PipelineConfig, target: ParserTarget, cases: list[TestCase], records_path: Path) -> SuiteResult:
    result = run_suite(target, cases, workers=cfg.workers)
    write_records(records_path, result.records, cfg.workdir / TIMINGS)
    return result


def stage_run(cfg: PipelineConfig) -> SuiteResult:
    cases = load_corpus(_require(cfg.workdir / CORPUS, "corpus"))
    return _run(cfg, cfg.parser_target(), cases, cfg.workdir / RECORDS)


def inconsistencies_from_disk(corpus_dir: Path, records_path: Path) -> list[Inconsistency]:
    cases = {c.id: c for c in load_corpus(_require(corpus_dir, "corpus"))}
    out = []
    for rec in read_records(_require(records_path, "run records")):
        inc = classify(cases[rec.case_id], rec)
        if inc is not None:
            out.append(inc)
    return out


# -- triage ------------------------------------------------------------------


@dataclass
class TriageOutcome:
    cycles: int
    fixed_point: bool
    spec: FormatSpec
    index: TraceIndex
    diagnoses: list[tuple[int, Diagnosis]] = field(default_factory=list)
    audit: list[AuditEntry] = field(default_factory=list)
    final: list[Diagnosis] = field(default_factory=list)
    corpus_dir: Optional[Path] = None
    records_path: Optional[Path] = None

    @property
    def implementation_errors(self) -> list[Diagnosis]:
        return [d for d in self.final if d.classification == IMPLEMENTATION_ERROR]

    @property
    def undetermined(self) -> list[Diagnosis]:
        return [d for d in self.final if d.classification == UNDETERMINED]


def refinement_loop(
    cfg: PipelineConfig,
    gateway: Gateway,
    tree: DocTree,
    spec: FormatSpec,
    index: TraceIndex,
    inconsistencies: list[Inconsistency],
    *,
    target: Optional[ParserTarget] = None,
    regen_dir: Optional[Path] = None,
    regen_records: Optional[Path] = None,
) -> TriageOutcome:
    """Diagnose, refine the format on extraction errors, regenerate and rerun.

    Stops at a fixed point (a cycle without applicable format corrections)
    or after ``cfg.max_cycles`` cycles.
    """
    target = target or cfg.parser_target()
    regen_dir = regen_dir or cfg.workdir / "corpus.refined"
    regen_records = regen_records or cfg.workdir / "runrecords.refined.jsonl"
    out = TriageOutcome(0, False, spec, index)
    incs = inconsistencies
    for cycle in range(1, cfg.max_cycles + 1):
        out.cycles = cycle
        diags = [diagnose(inc, tree, out.index, gateway, out.spec) for inc in sorted(incs, key=lambda i: i.case_id)]
        out.diagnoses += [(cycle, d) for d in diags]
        out.final = diags
        edits: dict[tuple[str, str], Diagnosis] = {}
        for d in diags:
            if d.classification != FORMAT_EXTRACTION_ERROR:
                continue
            if not d.property_id:
                log.warning("%s: format judged wrong on a structural property; no constraint to refine", d.case_id)
                continue
            edits.setdefault((d.struct, d.property_id), d)
        if not edits:
            out.fixed_point = True
            break
        if cycle == cfg.max_cycles:
            log.warning("refinement stopped after %d cycles without reaching a fixed point", cycle)
            break
        for d in edits.values():
            try:
                out.spec, out.index, entry = refine_format(d, out.spec, out.index, gateway=gateway, tree=tree, cycle=cycle)
            except TriageError as exc:
                log.warning("%s", exc)
                continue
            out.audit.append(entry)
        corpus = _generate(cfg, out.spec, out.index, regen_dir)
        out.corpus_dir = regen_dir
        result = _run(cfg, target, corpus.cases, regen_records)
        out.records_path = regen_records
        incs = result.inconsistencies
    return out


def stage_triage(cfg: PipelineConfig, gateway: Gateway) -> TriageOutcome:
    work = cfg.workdir
    tree = DocTree.load(_require(work / DOCTREE, "doctree"))
    spec = load_format(cfg.format_file)
    index = TraceIndex.load(_require(work / TRACE, "trace index"))
    for stale in ("format.refined.pform", "trace.refined.json", "runrecords.refined.jsonl"):
        (work / stale).unlink(missing_ok=True)
    if (work / "corpus.refined").exists():
        shutil.rmtree(work / "corpus.refined")
    incs = inconsistencies_from_disk(work / CORPUS, work / RECORDS)
    out = refinement_loop(cfg, gateway, tree, spec, index, incs)
    write_jsonl(work / DIAGNOSES, [dict(d.to_json(), cycle=c) for c, d in out.diagnoses])
    write_jsonl(work / AUDIT, [e.to_json() for e in out.audit])
    summary = {
        "cycles": out.cycles,
        "fixed_point": out.fixed_point,
        "format": cfg.format_file.name,
        "corpus": CORPUS,
        "records": RECORDS,
        "implementation_errors": [d.case_id for d in out.implementation_errors],
        "undetermined": [d.case_id for d in out.undetermined],
        "refinements": len(out.audit),
    }
    if out.corpus_dir is not None:
        (work / "format.refined.pform").write_text(print_format(out.spec))
        out.index.save(work / "trace.refined.json")
        summary.update(format="format.refined.pform", corpus=out.corpus_dir.name, records=out.records_path.name)
    (work / TRIAGE).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out


# -- report ------------------------------------------------------------------


def stage_report(cfg: PipelineConfig) -> list:
    work = cfg.workdir
    summary = json.loads(_require(work / TRIAGE, "triage summary").read_text())
    tree = DocTree.load(_require(work / DOCTREE, "doctree"))
    target = cfg.parser_target()
    incs = {i.case_id: i for i in inconsistencies_from_disk(work / summary["corpus"], work / summary["records"])}
    final_cycle = summary["cycles"]
    diags = [
        Diagnosis.from_json(row)
        for row in read_jsonl(_require(work / DIAGNOSES, "diagnoses"))
        if row.get("cycle") == final_cycle and row["classification"] == IMPLEMENTATION_ERROR
    ]
    out_dir = cfg.reports
    if out_dir.exists():
        shutil.rmtree(out_dir)
    out_dir.mkdir(parents=True)
    reports = []
    for d in diags:
        inc = incs.get(d.case_id)
        if inc is None:
            log.warning("%s: diagnosed case no longer inconsistent; skipped", d.case_id)
            continue
        rep = emit_report(inc, d, target, protocol=cfg.name, tree=tree, out_dir=out_dir)
        if rep is not None:
            reports.append(rep)
    index = [{"case": r.case_id, "description": r.description, "section": r.section_id} for r in reports]
    (out_dir / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return reports


__all__ = [
    "STAGES",
    "PipelineError",
    "TriageOutcome",
    "inconsistencies_from_disk",
    "load_format",
    "make_gateway",
    "refinement_loop",
    "stage_extract",
    "stage_gen",
    "stage_graph",
    "stage_report",
    "stage_run",
    "stage_triage",
]
