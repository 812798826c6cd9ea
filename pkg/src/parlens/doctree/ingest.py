"""Split plain-text RFCs into numbered sections.

The table of contents is located by its heading and read line by line;
body headings are lines that start in column 0 with a dotted section
number listed in the table of contents.  Page footers (``[Page N]``),
running headers (``RFC NNNN ... Month YYYY``) and form feeds are removed
before segmentation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

_FOOTER = re.compile(r"^.*\[Page \d+\]\s*$")
_HEADER = re.compile(r"^RFC \d+\s{2,}.*\s{2,}\S.*\d{4}\s*$")
_TOC_HEAD = re.compile(r"^\s*Table of Contents\s*$", re.IGNORECASE)
_TOC_LINE = re.compile(r"^\s+(\d+(?:\.\d+)*)\.?\s+(.*?)(?:\s*(?:\.\s?){2,}\s*\d+|\s{2,}\d+)?\s*$")
_BODY_HEAD = re.compile(r"^(\d+(?:\.\d+)*)\.?\s+(\S.*?)\s*$")


class IngestError(ValueError):
    pass


@dataclass
class RfcDocument:
    toc: list[tuple[str, str]]  # (section id, title) in document order
    sections: dict[str, str]  # section id -> body text


def strip_page_furniture(text: str) -> list[str]:
    lines = []
    for raw in text.replace("\r\n", "\n").split("\n"):
        line = raw.replace("\f", "")
        if _FOOTER.match(line) or _HEADER.match(line):
            continue
        lines.append(line.rstrip())
    return lines


def _dedent_block(lines: list[str]) -> str:
    while lines and not lines[0].strip():
        lines = lines[1:]
    while lines and not lines[-1].strip():
        lines = lines[:-1]
    indents = [len(l) - len(l.lstrip()) for l in lines if l.strip()]
    cut = min(indents) if indents else 0
    out = []
    blank = False
    for l in lines:
        if not l.strip():
            if not blank:
                out.append("")
            blank = True
            continue
        blank = False
        out.append(l[cut:])
    return "\n".join(out)


def parse_rfc(text: str) -> RfcDocument:
    lines = strip_page_furniture(text)
    start = next((i for i, l in enumerate(lines) if _TOC_HEAD.match(l)), None)
    if start is None:
        raise IngestError("no table of contents found")
    toc: list[tuple[str, str]] = []
    i = start + 1
    while i < len(lines):
        line = lines[i]
        if line.strip() and not line[0].isspace():
            break  # first column-0 line ends the table of contents
        m = _TOC_LINE.match(line)
        if m:
            toc.append((m.group(1), m.group(2).strip()))
        i += 1
    if not toc:
        raise IngestError("table of contents lists no numbered sections")
    ids = [sid for sid, _ in toc]
    dupes = sorted({s for s in ids if ids.count(s) > 1})
    if dupes:
        raise IngestError(f"duplicate section id(s) in table of contents: {', '.join(dupes)}")
    known = set(ids)
    sections: dict[str, list[str]] = {}
    current = None
    for line in lines[i:]:
        m = _BODY_HEAD.match(line)
        if m and m.group(1) in known and m.group(1) not in sections:
            current = m.group(1)
            sections[current] = []
            continue
        if current is not None:
            sections[current].append(line)
    missing = [sid for sid in ids if sid not in sections]
    if missing:
        raise IngestError(f"section(s) listed in the table of contents but not found: {', '.join(missing)}")
    return RfcDocument(toc, {sid: _dedent_block(body) for sid, body in sections.items()})


def load_rfc(paths: list[str | Path]) -> RfcDocument:
    """Ingest one or more documents into a single section namespace."""
    toc: list[tuple[str, str]] = []
    sections: dict[str, str] = {}
    for p in paths:
        doc = parse_rfc(Path(p).read_text(encoding="utf-8"))
        for sid, title in doc.toc:
            if sid in sections:
                raise IngestError(f"section {sid} appears in more than one document")
            toc.append((sid, title))
            sections[sid] = doc.sections[sid]
    return RfcDocument(toc, sections)
