"""Format extraction over a DocTree.

Stages, each returning a new tree:

1. ``summarize_all``: one summary per section.
2. ``refine_hierarchy``: per sibling group, ask which sections elaborate
   on which and re-parent accordingly.
3. ``extract_formats``: one format fragment per section, each pushed
   through the syntax checker with a bounded repair loop.
4. ``merge_formats``: bottom-up merge of child fragments into their
   parents, ending with the complete format at the root and a trace
   index from every struct and constraint to the section it came from.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Optional

from ..format import FormatError, FormatSpec, check_syntax, parse_format, print_format
from ..format.diagnostics import render_diagnostics
from ..format.naming import constraint_ids
from ..llm import DSL_CARD, NO_FORMAT, Gateway
from .tree import EMPTY_SUMMARY, SYNTHETIC_ROOT, DocTree, DocTreeError, TraceIndex

log = logging.getLogger(__name__)

DEFAULT_MAX_RETRIES = 3
SIBLING_WINDOW = 20


class ExtractionError(RuntimeError):
    def __init__(self, section_id: str, message: str, diagnostics: Optional[list] = None):
        self.section_id = section_id
        self.diagnostics = diagnostics or []
        super().__init__(f"section {section_id}: {message}")


# -- summaries ---------------------------------------------------------------


def _section_text(tree: DocTree, sid: str) -> str:
    node = tree.nodes[sid]
    head = f"Section {sid}" + (f" ({node.title})" if node.title else "")
    return f"{head}\n{node.content}"


def summarize_all(tree: DocTree, gateway: Gateway) -> DocTree:
    out = tree.copy()
    for sid in out.preorder():
        node = out.nodes[sid]
        if not node.content.strip():
            node.summary = EMPTY_SUMMARY
            continue
        bindings = {"Section": _section_text(out, sid)}
        summary = ""
        for _ in range(2):  # one retry on a blank answer
            try:
                summary = gateway.complete("summarize", bindings).strip()
            except Exception as exc:
                raise ExtractionError(sid, f"summary request failed: {exc}") from exc
            if summary:
                break
        if not summary:
            raise ExtractionError(sid, "model returned a blank summary twice")
        node.summary = summary
    return out


# -- hierarchy ---------------------------------------------------------------

_PAIR = re.compile(r"([0-9A-Za-z][\w.]*?)\.?\s+(?:is\s+(?:the\s+)?)?parent\s+of\s+(?:section\s+)?([0-9A-Za-z][\w.]*?)\.?(?=[\s;,:)]|$)", re.I)


def parse_hierarchy(text: str) -> Optional[list[tuple[str, str]]]:
    """Parent/child pairs in answer order; [] for NONE; None if unparseable."""
    cleaned = text.replace("`", "").replace("Section ", "").replace("section ", "")
    pairs = [(m.group(1), m.group(2)) for m in _PAIR.finditer(cleaned)]
    if pairs:
        return pairs
    if re.fullmatch(r"\s*none\.?\s*", text, re.I):
        return []
    return None


def _windows(group: list[str]) -> list[list[str]]:
    if len(group) <= SIBLING_WINDOW:
        return [group]
    out, start = [], 0
    while start < len(group) - 1:
        out.append(group[start : start + SIBLING_WINDOW])
        start += SIBLING_WINDOW - 1
    return out


def refine_hierarchy(tree: DocTree, gateway: Gateway) -> DocTree:
    """Apply the parent/child relations the model reports within each sibling group.

    Moves are restricted to the members of the group being examined, and a
    move that would make a section its own ancestor is rejected.
    """
    out = tree.copy()
    groups = [list(out.nodes[sid].children) for sid in out.preorder()]
    for group in groups:
        if len(group) < 2:
            continue
        for window in _windows(group):
            listing = "\n".join(f"Section {sid} ({out.nodes[sid].title}): {out.nodes[sid].summary}" for sid in window)
            answer = gateway.complete("hierarchy", {"Summaries": "\n" + listing})
            pairs = parse_hierarchy(answer)
            if pairs is None:
                out.warn(f"unparseable hierarchy answer for sections {', '.join(window)}; left unchanged")
                continue
            members = set(window)
            for parent, child in pairs:
                if parent not in members or child not in members or parent == child:
                    out.warn(f"ignored relation {parent} parent of {child}: not within sibling group {', '.join(window)}")
                    continue
                if out.is_ancestor(child, parent):
                    out.warn(f"rejected relation {parent} parent of {child}: it would create a cycle")
                    continue
                if out.parent_of(child) == parent:
                    continue
                out.move(child, parent)
    out.validate()
    return out


# -- per-node extraction ---------------------------------------------------------


def clean_format_answer(text: str) -> str:
    """Strip code fences and surrounding chatter from a format answer."""
    fence = re.search(r"```[\w-]*\n(.*?)```", text, re.S)
    body = fence.group(1) if fence else text
    return body.strip()


def is_no_format(text: str) -> bool:
    return clean_format_answer(text).strip().rstrip(".") == NO_FORMAT


@dataclass
class ExtractionResult:
    format_text: Optional[str]
    status: str  # ok | no-format | retry-exhausted
    attempts: int
    diagnostics: list[dict] = field(default_factory=list)  # of the last failed attempt
    history: list[list[dict]] = field(default_factory=list)  # diagnostics per failed attempt

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "attempts": self.attempts,
            "diagnostics": self.diagnostics,
            "history": self.history,
        }


def _check(text: str) -> tuple[Optional[str], list]:
    ok, diags = check_syntax(text)
    if ok:
        return print_format(parse_format(text)), diags
    return None, diags


def repair_loop(
    answer: str,
    gateway: Gateway,
    section_id: str,
    section_text: str,
    dsl: str,
    max_retries: int,
) -> ExtractionResult:
    """Syntax-check ``answer`` and ask for corrections up to ``max_retries`` times."""
    history: list[list[dict]] = []
    attempts = 1
    current = answer
    while True:
        if is_no_format(current):
            return ExtractionResult(None, "no-format", attempts, [], history)
        text = clean_format_answer(current)
        canonical, diags = _check(text)
        if canonical is not None:
            return ExtractionResult(canonical, "ok", attempts, [], history)
        as_json = [d.to_json() for d in diags]
        history.append(as_json)
        log.info("section %s: attempt %d rejected: %s", section_id, attempts, render_diagnostics(diags))
        if attempts > max_retries:
            return ExtractionResult(None, "retry-exhausted", attempts, as_json, history)
        current = gateway.complete(
            "refine_syntax",
            {
                "SectionId": section_id,
                "Section": section_text,
                "DSL": dsl,
                "Format": text,
                "Diagnostics": render_diagnostics(diags),
                "NoFormat": NO_FORMAT,
            },
        )
        attempts += 1


def extract_node_format(
    tree: DocTree,
    section_id: str,
    gateway: Gateway,
    dsl: str = DSL_CARD,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> ExtractionResult:
    node = tree.node(section_id)
    if not node.content.strip():
        return ExtractionResult(None, "no-format", 0)
    answer = gateway.complete(
        "generate_format",
        {"SectionId": section_id, "Section": node.content, "DSL": dsl, "NoFormat": NO_FORMAT},
    )
    return repair_loop(answer, gateway, section_id, node.content, dsl, max_retries)


def extract_formats(
    tree: DocTree,
    gateway: Gateway,
    dsl: str = DSL_CARD,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> DocTree:
    """Extract a fragment for every section (the synthetic root is skipped)."""
    out = tree.copy()
    for sid in out.preorder():
        if sid == SYNTHETIC_ROOT:
            continue
        node = out.nodes[sid]
        try:
            result = extract_node_format(out, sid, gateway, dsl, max_retries)
        except Exception as exc:
            node.extraction = {"status": "error", "attempts": 0, "diagnostics": [], "error": str(exc)}
            out.warn(f"section {sid}: extraction failed: {exc}")
            continue
        node.format_text = result.format_text
        node.extraction = result.to_json()
        if result.status == "retry-exhausted":
            out.warn(f"section {sid}: no valid format after {result.attempts} attempts")
    return out


# -- merge -----------------------------------------------------------------------

_MERGE_SECTION = re.compile(r"^\s*(FORMAT|SUMMARY|TRACE)\s*:\s*(.*)$")
_TRACE_LINE = re.compile(r"^\s*[-*]?\s*`?([A-Za-z_]\w*)`?\s*(?:<-|<=|:|->|from)\s*(?:section\s+)?([0-9][\w.]*?)\.?\s*$", re.I)


@dataclass
class MergeAnswer:
    format: str
    summary: str
    trace: dict[str, str]


def parse_merge_answer(text: str) -> MergeAnswer:
    parts: dict[str, list[str]] = {"FORMAT": [], "SUMMARY": [], "TRACE": []}
    current = None
    for line in text.splitlines():
        m = _MERGE_SECTION.match(line)
        if m:
            current = m.group(1).upper()
            if m.group(2).strip():
                parts[current].append(m.group(2))
            continue
        if current is not None:
            parts[current].append(line)
    if current is None:
        # No headings: treat the whole answer as the format.
        parts["FORMAT"] = text.splitlines()
    trace = {}
    for line in parts["TRACE"]:
        m = _TRACE_LINE.match(line)
        if m:
            trace[m.group(1)] = m.group(2)
    return MergeAnswer("\n".join(parts["FORMAT"]).strip(), "\n".join(parts["SUMMARY"]).strip(), trace)


def _render_children(tree: DocTree, sid: str) -> str:
    blocks = []
    for child in tree.nodes[sid].children:
        node = tree.nodes[child]
        fmt = node.merged_format_text or "(none)"
        blocks.append(f"Section {child} ({node.title})\nSummary: {node.summary}\nFormat:\n{fmt}")
    return "\n\n" + "\n\n".join(blocks) + "\n"


def _spec(text: Optional[str]) -> Optional[FormatSpec]:
    if not text:
        return None
    try:
        return parse_format(text)
    except FormatError:
        return None


def _resolve_struct_sources(tree: DocTree, sid: str, spec: FormatSpec, claimed: dict[str, str]) -> dict[str, str]:
    """Map each struct of ``spec`` (merged at ``sid``) to the deepest section
    it comes from.  ``claimed`` is the model's struct -> section answer."""
    below = set(tree.subtree(sid)) - {sid}
    out = {}
    for s in spec.structs:
        src = claimed.get(s.name)
        if src in below:
            deeper = tree.nodes[src].struct_sources.get(s.name)
            out[s.name] = deeper or src
        else:
            out[s.name] = sid
    return out


def merge_formats(
    tree: DocTree,
    gateway: Gateway,
    dsl: str = DSL_CARD,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> tuple[DocTree, FormatSpec, TraceIndex]:
    """Merge fragments bottom-up; returns the tree, the root format and its trace index."""
    out = tree.copy()
    for sid in out.postorder():
        node = out.nodes[sid]
        own = _spec(node.format_text)
        if not node.children:
            node.merged_format_text = node.format_text
            node.merged_summary = node.summary
            node.struct_sources = {s.name: sid for s in own.structs} if own else {}
            continue
        if node.format_text is None and not any(out.nodes[c].merged_format_text for c in node.children):
            node.merged_format_text = None
            node.merged_summary = node.summary
            node.struct_sources = {}
            continue
        answer = gateway.complete(
            "merge",
            {
                "Section": _section_text(out, sid),
                "Format": node.format_text or "(none)",
                "Children": _render_children(out, sid),
                "DSL": dsl,
                "NoFormat": NO_FORMAT,
            },
        )
        parsed = parse_merge_answer(answer)
        result = repair_loop(parsed.format, gateway, sid, node.content, dsl, max_retries)
        node.merged_summary = parsed.summary or node.summary
        if result.status == "retry-exhausted":
            if sid == out.root:
                raise ExtractionError(sid, "merged root format never passed the syntax check", result.diagnostics)
            out.warn(f"section {sid}: merged format rejected after {result.attempts} attempts; keeping own format")
            node.extraction = dict(node.extraction, merge=result.to_json())
            node.merged_format_text = node.format_text
            node.struct_sources = {s.name: sid for s in own.structs} if own else {}
            continue
        node.extraction = dict(node.extraction, merge=result.to_json())
        node.merged_format_text = result.format_text
        merged = _spec(result.format_text)
        node.struct_sources = _resolve_struct_sources(out, sid, merged, parsed.trace) if merged else {}
    root = out.nodes[out.root]
    spec = _spec(root.merged_format_text)
    if spec is None:
        raise ExtractionError(out.root, "no format was extracted for the document")
    return out, spec, build_trace_index(out, spec)


def build_trace_index(tree: DocTree, spec: FormatSpec) -> TraceIndex:
    """Attribute every struct and constraint of the root format to a section.

    A struct goes to the section recorded during merging.  A constraint
    goes to the deepest section whose own fragment states that same
    constraint on that struct, or else to its struct's section.
    """
    root = tree.nodes[tree.root]
    index = TraceIndex()
    rank = {sid: i for i, sid in enumerate(tree.order)}
    fragments = []
    for sid in tree.preorder():
        frag = _spec(tree.nodes[sid].format_text)
        if frag is not None:
            fragments.append((tree.depth(sid), -rank.get(sid, -1), sid, frag))
    fragments.sort(reverse=True)  # deepest first, then document order
    for s in spec.structs:
        home = root.struct_sources.get(s.name, tree.root)
        index.add(s.name, "", home)
        for c, pid in zip(s.constraints, constraint_ids(s)):
            section = home
            for _, _, sid, frag in fragments:
                if frag.has_struct(s.name) and c in frag.struct(s.name).constraints:
                    section = sid
                    break
            index.add(s.name, pid, section)
    return index


def run_extraction(
    tree: DocTree,
    gateway: Gateway,
    dsl: str = DSL_CARD,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> tuple[DocTree, FormatSpec, TraceIndex]:
    tree = summarize_all(tree, gateway)
    tree = refine_hierarchy(tree, gateway)
    tree = extract_formats(tree, gateway, dsl, max_retries)
    return merge_formats(tree, gateway, dsl, max_retries)


__all__ = [
    "DocTreeError",
    "ExtractionError",
    "ExtractionResult",
    "MergeAnswer",
    "build_trace_index",
    "extract_formats",
    "extract_node_format",
    "merge_formats",
    "parse_hierarchy",
    "parse_merge_answer",
    "refine_hierarchy",
    "run_extraction",
    "summarize_all",
]
