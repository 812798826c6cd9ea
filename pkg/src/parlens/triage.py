"""Classify inconsistencies, refine the format, and write bug reports.

An inconsistency is either a parser bug or a mistake in the extracted
format.  Crashes are always parser bugs.  Everything else is put to the
model together with the one section the offending property was traced to;
its answer ends in ``VERDICT: myformat`` (the format is right, so the
parser is wrong) or ``VERDICT: parser`` (the format is wrong).
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .doctree import DocTree, TraceIndex
from .format import FormatError, FormatSpec, format_constraint, print_format, validate
from .format.checker import has_errors
from .format.diagnostics import render_diagnostics
from .format.naming import constraint_ids
from .format.parser import parse_constraint_text
from .harness import CRASH, PARSER_ACCEPTS_INVALID, Inconsistency, ParserTarget, run_case
from .llm import DSL_CARD, NO_FORMAT, Gateway

log = logging.getLogger(__name__)

IMPLEMENTATION_ERROR = "ImplementationError"
FORMAT_EXTRACTION_ERROR = "FormatExtractionError"
UNDETERMINED = "Undetermined"

EXCERPT_LINES = 12


class TriageError(RuntimeError):
    pass


@dataclass(frozen=True)
class Diagnosis:
    case_id: str
    classification: str
    rationale: str = ""
    evidence: str = ""
    correction: Optional[str] = None  # replacement constraint text, "REMOVE", or None
    struct: str = ""
    property_id: Optional[str] = None  # base property id, when a field property is involved
    section_id: Optional[str] = None
    direction: str = ""
    exchanges: int = 0

    def to_json(self) -> dict:
        return {
            "case": self.case_id,
            "classification": self.classification,
            "direction": self.direction,
            "struct": self.struct,
            "property": self.property_id,
            "section": self.section_id,
            "evidence": self.evidence,
            "correction": self.correction,
            "rationale": self.rationale,
            "exchanges": self.exchanges,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Diagnosis":
        return cls(
            obj["case"],
            obj["classification"],
            obj.get("rationale", ""),
            obj.get("evidence", ""),
            obj.get("correction"),
            obj.get("struct", ""),
            obj.get("property"),
            obj.get("section"),
            obj.get("direction", ""),
            obj.get("exchanges", 0),
        )


# -- diagnosis ---------------------------------------------------------------

_LINE = re.compile(r"^\W*(VERDICT|EVIDENCE|CORRECTION)\W*:\s*(.*?)\s*$", re.I | re.M)


@dataclass(frozen=True)
class ParsedAnswer:
    verdict: str  # myformat | parser
    evidence: str
    correction: Optional[str]
    rationale: str


def parse_diagnosis(text: str) -> Optional[ParsedAnswer]:
    """Read the trailing VERDICT/EVIDENCE/CORRECTION lines; None if there is no verdict."""
    found: dict[str, str] = {}
    first = None
    for m in _LINE.finditer(text):
        found[m.group(1).upper()] = m.group(2)
        first = m.start() if first is None else first
    raw = found.get("VERDICT", "").strip("`*\"' .").lower()
    if raw not in ("myformat", "parser"):
        return None
    evidence = found.get("EVIDENCE", "").strip().strip('"')
    correction = found.get("CORRECTION", "").strip().strip("`").strip()
    if correction.lower() in ("", "none", "n/a", "-"):
        correction = None
    elif correction.upper() == "REMOVE":
        correction = "REMOVE"
    return ParsedAnswer(raw, evidence, correction, text[:first].strip())


def _property_text(spec: FormatSpec, struct: str, prop: Optional[str]) -> str:
    if not spec.has_struct(struct):
        return print_format(spec)
    s = spec.struct(struct)
    if prop:
        for c, pid in zip(s.constraints, constraint_ids(s)):
            if pid == prop:
                return f"`{format_constraint(c)}` in struct {struct}"
    return print_format(FormatSpec((s,), s.name)).strip()


def _question(inc: Inconsistency) -> tuple[str, str, str]:
    """(constraint wording, who allows it, who rejects it) for the prompt."""
    case = inc.case
    if case.mutation == "field":
        what = case.notes.get("witness") or f"Violating {case.notes.get('negated', case.base_property)}"
    elif case.mutation == "structural":
        desc = case.notes.get("description", f"a packet with mutation {case.property_id}")
        what = desc[:1].upper() + desc[1:]
    else:
        what = f"The packet {case.data.hex()}"
    if inc.direction == PARSER_ACCEPTS_INVALID:
        return what, "parser", "myformat"
    return what, "myformat", "parser"


def diagnose(
    inc: Inconsistency,
    tree: DocTree,
    index: TraceIndex,
    gateway: Gateway,
    spec: FormatSpec,
) -> Diagnosis:
    case = inc.case
    prop = case.base_property if case.mutation == "field" else None
    struct = case.struct or spec.entry
    if inc.direction == CRASH:
        return Diagnosis(
            case.id,
            IMPLEMENTATION_ERROR,
            f"parser crashed ({inc.record.verdict.evidence()}); crashes are always implementation errors",
            struct=struct,
            property_id=prop,
            section_id=case.section,
            direction=inc.direction,
        )
    section = index.section_for(struct, prop or "")
    if section is None:
        raise TriageError(f"{case.id}: cannot trace {struct}:{prop or ''} to a section")
    content = tree.node(section).content
    what, allowed, rejected = _question(inc)
    bindings = {
        "Constraint": what,
        "Allowed": allowed,
        "Rejected": rejected,
        "Section": f"{section}\n{content}",
        "Property": _property_text(spec, struct, prop),
    }
    parsed = None
    calls = 0
    for _ in range(2):  # one retry on an unparseable answer
        answer = gateway.complete("diagnose", bindings)
        calls += 1
        parsed = parse_diagnosis(answer)
        if parsed is not None:
            break
    if parsed is None:
        log.warning("%s: diagnosis unparseable twice; needs manual review", case.id)
        return Diagnosis(case.id, UNDETERMINED, "no verdict line in the answer", struct=struct,
                         property_id=prop, section_id=section, direction=inc.direction, exchanges=calls)
    if parsed.verdict == "myformat":
        cls, correction = IMPLEMENTATION_ERROR, None
    else:
        cls, correction = FORMAT_EXTRACTION_ERROR, parsed.correction
    return Diagnosis(case.id, cls, parsed.rationale, parsed.evidence, correction, struct, prop, section,
                     inc.direction, calls)


# -- refinement --------------------------------------------------------------


@dataclass(frozen=True)
class AuditEntry:
    property_id: str
    action: str  # remove | replace
    before: str
    after: Optional[str]
    diagnosis: str  # case id of the diagnosis that triggered the edit
    cycle: int = 0
    warning: str = ""

    def to_json(self) -> dict:
        return {
            "cycle": self.cycle,
            "property": self.property_id,
            "action": self.action,
            "before": self.before,
            "after": self.after,
            "diagnosis": self.diagnosis,
            "warning": self.warning,
        }


def _try_replacement(spec: FormatSpec, struct: str, index_in_struct: int, text: str) -> tuple[Optional[FormatSpec], str]:
    try:
        new = parse_constraint_text(text)
    except FormatError as exc:
        return None, render_diagnostics(exc.diagnostics)
    s = spec.struct(struct)
    kept = s.constraints[:index_in_struct] + s.constraints[index_in_struct + 1 :]
    candidate = spec.replace_struct(replace(s, constraints=kept + (new,)))
    diags = validate(candidate)
    if has_errors(diags):
        return None, render_diagnostics(diags)
    return candidate, ""


def refine_format(
    diag: Diagnosis,
    spec: FormatSpec,
    index: TraceIndex,
    *,
    gateway: Optional[Gateway] = None,
    tree: Optional[DocTree] = None,
    cycle: int = 0,
) -> tuple[FormatSpec, TraceIndex, AuditEntry]:
    """Remove or replace the one constraint a FormatExtractionError names.

    A replacement is accepted only if it passes the checker; otherwise one
    repair is requested and, failing that, the constraint is removed.
    """
    if diag.classification != FORMAT_EXTRACTION_ERROR:
        raise TriageError(f"{diag.case_id}: not a format extraction error")
    if not diag.property_id:
        raise TriageError(f"{diag.case_id}: diagnosis names no field property")
    s = spec.struct(diag.struct)
    ids = constraint_ids(s)
    if diag.property_id not in ids:
        raise TriageError(f"{diag.case_id}: {diag.property_id} is not in the current format")
    pos = ids.index(diag.property_id)
    before = format_constraint(s.constraints[pos])
    index = TraceIndex(dict(index.entries))
    section = index.get(diag.struct, diag.property_id)

    correction = diag.correction
    warning = ""
    if correction and correction != "REMOVE":
        candidate, problems = _try_replacement(spec, diag.struct, pos, correction)
        if candidate is None and gateway is not None:
            answer = gateway.complete(
                "refine_syntax",
                {
                    "SectionId": diag.section_id or "",
                    "Section": tree.node(diag.section_id).content if tree and diag.section_id else "",
                    "DSL": DSL_CARD,
                    "Format": correction,
                    "Diagnostics": problems,
                    "NoFormat": NO_FORMAT,
                },
            )
            candidate, problems = _try_replacement(spec, diag.struct, pos, answer.strip().strip("`"))
        if candidate is not None:
            new_struct = candidate.struct(diag.struct)
            new_ids = set(constraint_ids(new_struct)) - (set(ids) - {diag.property_id})
            new_id = next(iter(new_ids), diag.property_id)
            index.remove(diag.struct, diag.property_id)
            _reindex(index, spec.struct(diag.struct), new_struct, section)
            after = next(format_constraint(c) for c, pid in zip(new_struct.constraints, constraint_ids(new_struct)) if pid == new_id)
            return candidate, index, AuditEntry(diag.property_id, "replace", before, after, diag.case_id, cycle)
        warning = f"replacement {correction!r} rejected ({problems.splitlines()[0] if problems else 'invalid'}); constraint removed"
        log.warning("%s: %s", diag.property_id, warning)

    kept = s.constraints[:pos] + s.constraints[pos + 1 :]
    new_struct = replace(s, constraints=kept)
    index.remove(diag.struct, diag.property_id)
    _reindex(index, s, new_struct, section)
    return spec.replace_struct(new_struct), index, AuditEntry(diag.property_id, "remove", before, None, diag.case_id, cycle, warning)


def _reindex(index: TraceIndex, old, new, section: Optional[str]):
    """Keep trace entries aligned when duplicate-suffixed ids shift."""
    old_by_text: dict[str, list[str]] = {}
    for c, pid in zip(old.constraints, constraint_ids(old)):
        old_by_text.setdefault(format_constraint(c), []).append(pid)
    fallback = index.get(old.name, "")
    saved = {pid: index.get(old.name, pid) for pid in constraint_ids(old)}
    for pid in constraint_ids(old):
        index.remove(old.name, pid)
    for c, pid in zip(new.constraints, constraint_ids(new)):
        olds = old_by_text.get(format_constraint(c), [])
        src = saved.get(olds.pop(0)) if olds else section
        index.add(new.name, pid, src or section or fallback)


# -- reports -----------------------------------------------------------------


@dataclass(frozen=True)
class BugReport:
    protocol: str
    case_id: str
    description: str
    poc_hex: str
    reproduction: str
    section_id: Optional[str]
    excerpt: str
    direction: str
    evidence: str
    severity: str = "unassessed"
    diagnosis: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "protocol": self.protocol,
            "case": self.case_id,
            "description": self.description,
            "direction": self.direction,
            "poc_hex": self.poc_hex,
            "reproduction": self.reproduction,
            "section": self.section_id,
            "excerpt": self.excerpt,
            "parser_evidence": self.evidence,
            "severity": self.severity,
            "diagnosis": self.diagnosis,
        }

    def to_markdown(self) -> str:
        quoted = "\n".join("> " + l if l else ">" for l in self.excerpt.splitlines())
        lines = [
            f"# {self.protocol}: {self.description}",
            "",
            f"- Case: `{self.case_id}`",
            f"- Outcome: {self.direction} ({self.evidence})",
            f"- Severity: {self.severity}",
            f"- Proof of concept (hex): `{self.poc_hex}`",
            "",
            "## Reproduce",
            "",
            "```sh",
            self.reproduction,
            "```",
            "",
        ]
        if self.section_id:
            lines += [f"## RFC section {self.section_id}", "", quoted, ""]
        if self.diagnosis.get("rationale"):
            lines += ["## Diagnosis", "", self.diagnosis["rationale"], ""]
        return "\n".join(lines)


def _describe(inc: Inconsistency) -> str:
    case = inc.case
    if inc.direction == CRASH:
        return f"parser crashes ({inc.record.verdict.evidence()}) on case {case.property_id}"
    if case.mutation == "field":
        return f"parser accepts a packet violating {case.notes.get('negated', case.base_property)}"
    if case.mutation == "structural":
        return f"parser accepts a malformed packet: {case.notes.get('description', case.property_id)}"
    return "parser rejects a well-formed packet"


def _excerpt(content: str, evidence: str) -> str:
    probe = " ".join(evidence.split())[:40]
    if probe:
        for para in content.split("\n\n"):
            if probe in " ".join(para.split()):
                return para.strip()
    lines = content.splitlines()
    return "\n".join(lines[:EXCERPT_LINES])


def emit_report(
    inc: Inconsistency,
    diag: Diagnosis,
    target: ParserTarget,
    *,
    protocol: str,
    tree: Optional[DocTree] = None,
    out_dir: Optional[str | Path] = None,
) -> Optional[BugReport]:
    """Build (and optionally write) a report after confirming the PoC reproduces."""
    if diag.classification != IMPLEMENTATION_ERROR:
        raise TriageError(f"{diag.case_id}: only implementation errors are reported")
    again = run_case(target, inc.case)
    if again.verdict.kind != inc.record.verdict.kind:
        log.warning(
            "%s: flaky inconsistency (was %s, now %s); report suppressed",
            inc.case.id, inc.record.verdict.kind, again.verdict.kind,
        )
        return None
    bin_name = inc.case.id + ".bin"
    content = tree.node(diag.section_id).content if tree is not None and diag.section_id in tree.nodes else ""
    report = BugReport(
        protocol,
        inc.case.id,
        _describe(inc),
        inc.case.data.hex(),
        target.repro_command(bin_name),
        diag.section_id,
        _excerpt(content, diag.evidence),
        inc.direction,
        again.verdict.evidence(),
        diagnosis=diag.to_json(),
    )
    if out_dir is not None:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / bin_name).write_bytes(inc.case.data)
        (d / f"{inc.case.id}.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
        (d / f"{inc.case.id}.md").write_text(report.to_markdown())
    return report


def write_jsonl(path: str | Path, rows) -> Path:
    p = Path(path)
    with p.open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return p


def read_jsonl(path: str | Path) -> list[dict]:
    return [json.loads(l) for l in Path(path).read_text().splitlines() if l.strip()]


__all__ = [
    "FORMAT_EXTRACTION_ERROR",
    "IMPLEMENTATION_ERROR",
    "UNDETERMINED",
    "AuditEntry",
    "BugReport",
    "Diagnosis",
    "ParsedAnswer",
    "TriageError",
    "diagnose",
    "emit_report",
    "parse_diagnosis",
    "refine_format",
]
