"""Positive packets, property-level mutants and the corpus they form."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from ..format.ast import FormatSpec
from ..format.evaluator import evaluate_packet
from ..format.naming import base_property, leaf
from ..graph import (
    DEFAULT_ARRAY_COUNTS,
    DEFAULT_MAX_PATHS,
    GraphPath,
    build_graph,
    enumerate_paths,
)
from .formula import NODE, PathFormula, path_to_formula
from .serialize import field_offsets, serialize_packet
from .solver import DEFAULT_TIMEOUT, solve

POSITIVE = "positive"

# (struct name, property id or "" for the struct itself) -> section id
SectionLookup = Callable[[str, str], Optional[str]]


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # keep pytest from collecting this class

    path_id: str
    data: bytes
    expectation: str  # pass | fail
    property_id: str = POSITIVE  # property instance id, or a structural mutation id
    mutation: str = "none"  # none | field | structural
    section: Optional[str] = None
    struct: str = ""
    notes: dict = field(default_factory=dict, compare=False)

    @property
    def id(self) -> str:
        kind = "pos" if self.expectation == "pass" else "neg"
        return f"{self.path_id}__{kind}__{self.property_id}"

    @property
    def base_property(self) -> str:
        return base_property(self.property_id)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "file": self.id + ".bin",
            "path": self.path_id,
            "expectation": self.expectation,
            "property": self.property_id,
            "mutation": self.mutation,
            "struct": self.struct,
            "section": self.section,
            "hex": self.data.hex(),
            "notes": self.notes,
        }

    @classmethod
    def from_json(cls, obj: dict, data: Optional[bytes] = None) -> "TestCase":
        return cls(
            obj["path"],
            bytes.fromhex(obj["hex"]) if data is None else data,
            obj["expectation"],
            obj["property"],
            obj["mutation"],
            obj.get("section"),
            obj.get("struct", ""),
            obj.get("notes", {}),
        )


@dataclass(frozen=True)
class Skip:
    path_id: str
    property: str
    reason: str  # unsat | timeout | oracle-pass
    detail: str = ""

    def to_json(self) -> dict:
        return {"path": self.path_id, "property": self.property, "reason": self.reason, "detail": self.detail}


# -- positives -------------------------------------------------------------


def generate_positive(
    formula: PathFormula, *, timeout: float = DEFAULT_TIMEOUT
) -> tuple[Optional[TestCase], Optional[dict], Optional[Skip]]:
    """Solve ``formula`` and serialize the model as a positive case.

    Returns ``(case, assignment, None)`` or ``(None, None, skip)``.
    """
    path = formula.path
    result = solve(formula, timeout=timeout)
    if not result.sat:
        return None, None, Skip(path.id, POSITIVE, result.status, formula.render())
    data = serialize_packet(path, result.assignment)
    return TestCase(path.id, data, "pass"), result.assignment, None


# -- field-level mutation ----------------------------------------------------


def _show(value: int) -> str:
    return f"{value:#x}" if value >= 1 << 16 else str(value)


def mutate_field_level(
    formula: PathFormula,
    base: dict[str, int],
    target: str,
    *,
    timeout: float = DEFAULT_TIMEOUT,
) -> tuple[Optional[TestCase], Optional[Skip]]:
    """Negate the node conjunct ``target`` while pinning every field the
    target does not mention to its value in ``base``."""
    conj = formula.conjunct(target)
    if conj.origin != NODE:
        raise ValueError(f"{target} is a {conj.origin} conjunct; only field-level properties are mutated")
    mutated = formula.replace(target, conj.constraint.negated())
    free = conj.constraint.refs()
    pins = {name: value for name, value in base.items() if name not in free}
    result = solve(mutated, pins, timeout=timeout)
    path = formula.path
    if not result.sat:
        return None, Skip(path.id, target, result.status, f"not ({conj.render()})")
    data = serialize_packet(path, result.assignment)
    witness = ", ".join(f"{leaf(v)} = {_show(result.assignment[v])}" for v in free)
    notes = {"negated": conj.render(), "unpinned": list(free), "witness": witness}
    return TestCase(path.id, data, "fail", target, "field", struct=conj.struct, notes=notes), None


# -- structural mutation -----------------------------------------------------


def _element_spans(path: GraphPath, var: str, count: int) -> Optional[list[tuple[int, int]]]:
    """Byte spans of each element of array ``var`` along ``path``, or None
    when some element occupies no bytes."""
    spans = []
    for k in range(count):
        prefix = f"{var}.{k}"
        bits = [(s, e) for name, s, e in field_offsets(path) if name == prefix or name.startswith(prefix + ".")]
        if not bits:
            return None
        spans.append((bits[0][0] // 8, bits[-1][1] // 8))
    return spans


def _array_start(path: GraphPath, var: str) -> int:
    """Byte offset at which array ``var`` begins (or would begin if empty)."""
    offsets = field_offsets(path)
    for i, (kind, item) in enumerate(path.steps):
        if kind == "edge" and item.kind == "length" and item.var == var:
            later = [n for k, n in path.steps[i + 1:] if k == "node"]
            if later:
                start = next(s for name, s, _ in offsets if name == later[0].name)
                return start // 8
            return path.bit_length // 8
    raise KeyError(var)


def structural_candidates(path: GraphPath, data: bytes) -> list[tuple[str, bytes, str]]:
    """(mutation id, bytes, description) for every structural mutation of a
    positive packet on ``path``.  Length fields are deliberately left as
    they were so that the declared and actual sizes disagree."""
    out = []
    offsets = field_offsets(path)
    seen = set()
    for name, _, end in offsets[:-1]:
        if end % 8 or end // 8 in seen:
            continue
        seen.add(end // 8)
        out.append((f"trunc@{name}", data[: end // 8], f"a packet truncated after {name}"))
    out.append(("trailing", data + b"\x00", "a packet with one extra trailing byte"))
    for var, count in path.arrays:
        cond = next(c for c in path.conds if c.kind == "length" and c.var == var)
        spans = _element_spans(path, var, count)
        if spans is None:
            continue
        if spans:
            s, e = spans[-1]
            extra = data[s:e]
            at = e
        else:
            extra = b"\x00" * max(1, (cond.elem_bits + 7) // 8)
            at = _array_start(path, var)
        out.append((f"count+1@{var}", data[:at] + extra + data[at:], f"a packet whose {var} carries {count + 1} elements"))
        if spans:
            s, e = spans[-1]
            out.append((f"count-1@{var}", data[:s] + data[e:], f"a packet whose {var} carries {count - 1} elements"))
    return out


def mutate_structural(spec: FormatSpec, path: GraphPath, base_case: TestCase) -> tuple[list[TestCase], list[Skip]]:
    cases, skips = [], []
    for mid, data, desc in structural_candidates(path, base_case.data):
        verdict = evaluate_packet(spec, data)
        if verdict.passed:
            skips.append(Skip(path.id, mid, "oracle-pass", desc))
            continue
        notes = {"description": desc, "oracle": verdict.violation.property, "length_fields_updated": False}
        cases.append(TestCase(path.id, data, "fail", mid, "structural", struct=verdict.violation.struct, notes=notes))
    return cases, skips


# -- corpus ------------------------------------------------------------------


@dataclass
class Corpus:
    cases: list[TestCase]
    skips: list[Skip]
    paths: int

    @property
    def positives(self) -> list[TestCase]:
        return [c for c in self.cases if c.expectation == "pass"]

    @property
    def negatives(self) -> list[TestCase]:
        return [c for c in self.cases if c.expectation == "fail"]

    def summary(self) -> dict:
        return {
            "paths": self.paths,
            "positives": len(self.positives),
            "negatives": len(self.negatives),
            "field_negatives": sum(c.mutation == "field" for c in self.cases),
            "structural_negatives": sum(c.mutation == "structural" for c in self.cases),
            "skipped_unsat": sum(s.reason == "unsat" for s in self.skips),
            "skipped_timeout": sum(s.reason == "timeout" for s in self.skips),
        }

    def summary_line(self) -> str:
        s = self.summary()
        return (
            f"{s['paths']} paths, {s['positives']} positives, {s['negatives']} negatives"
            f" ({s['field_negatives']} field, {s['structural_negatives']} structural),"
            f" {s['skipped_unsat']} skipped unsat, {s['skipped_timeout']} timed out"
        )


def generate_corpus(
    spec: FormatSpec,
    *,
    array_counts: Sequence[int] = DEFAULT_ARRAY_COUNTS,
    max_paths: int = DEFAULT_MAX_PATHS,
    timeout: float = DEFAULT_TIMEOUT,
    section_of: Optional[SectionLookup] = None,
    structural: bool = True,
) -> Corpus:
    """One positive per path, one negative per field-level property on the
    path, plus the structural mutants of each positive."""
    paths = enumerate_paths(build_graph(spec, array_counts), max_paths)
    cases: list[TestCase] = []
    skips: list[Skip] = []
    for path in paths:
        formula = path_to_formula(path)
        positive, base, skip = generate_positive(formula, timeout=timeout)
        if skip is not None:
            skips.append(skip)
            continue
        cases.append(positive)
        for conj in formula.field_properties:
            neg, skip = mutate_field_level(formula, base, conj.id, timeout=timeout)
            if skip is not None:
                skips.append(skip)
            else:
                cases.append(neg)
        if structural:
            more, more_skips = mutate_structural(spec, path, positive)
            cases += more
            skips += more_skips
    if section_of is not None:
        cases = [_with_section(c, spec, section_of) for c in cases]
    return Corpus(cases, skips, len(paths))


def _with_section(case: TestCase, spec: FormatSpec, section_of: SectionLookup) -> TestCase:
    if case.mutation == "none":
        return case
    section = None
    if case.mutation == "field":
        section = section_of(case.struct, case.base_property)
    if section is None:
        section = section_of(case.struct or spec.entry, "")
    return TestCase(
        case.path_id, case.data, case.expectation, case.property_id, case.mutation, section, case.struct, case.notes
    )
