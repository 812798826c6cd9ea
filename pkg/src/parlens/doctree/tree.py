"""DocTree data model, construction from a table of contents, persistence
and the trace index linking format elements back to sections."""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

log = logging.getLogger(__name__)

SYNTHETIC_ROOT = "0"
EMPTY_SUMMARY = "(empty section)"


class DocTreeError(ValueError):
    pass


@dataclass
class DocNode:
    section_id: str
    title: str = ""
    content: str = ""
    summary: str = ""
    format_text: Optional[str] = None  # extracted fragment, canonical text
    children: list[str] = field(default_factory=list)
    merged_format_text: Optional[str] = None
    merged_summary: str = ""
    struct_sources: dict[str, str] = field(default_factory=dict)  # struct -> section after merge
    extraction: dict = field(default_factory=dict)  # status, attempts, diagnostics

    def to_json(self) -> dict:
        return {
            "section_id": self.section_id,
            "title": self.title,
            "content": self.content,
            "summary": self.summary,
            "format_text": self.format_text,
            "children": list(self.children),
            "merged_format_text": self.merged_format_text,
            "merged_summary": self.merged_summary,
            "struct_sources": dict(self.struct_sources),
            "extraction": self.extraction,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DocNode":
        return cls(
            obj["section_id"],
            obj.get("title", ""),
            obj.get("content", ""),
            obj.get("summary", ""),
            obj.get("format_text"),
            list(obj.get("children", [])),
            obj.get("merged_format_text"),
            obj.get("merged_summary", ""),
            dict(obj.get("struct_sources", {})),
            obj.get("extraction", {}),
        )


@dataclass
class DocTree:
    nodes: dict[str, DocNode]
    root: str
    order: list[str] = field(default_factory=list)  # document order of section ids
    warnings: list[str] = field(default_factory=list)

    def copy(self) -> "DocTree":
        return copy.deepcopy(self)

    def node(self, sid: str) -> DocNode:
        try:
            return self.nodes[sid]
        except KeyError:
            raise DocTreeError(f"unknown section {sid!r}") from None

    def warn(self, message: str):
        log.warning(message)
        self.warnings.append(message)

    def parent_of(self, sid: str) -> Optional[str]:
        for node in self.nodes.values():
            if sid in node.children:
                return node.section_id
        return None

    def is_ancestor(self, anc: str, sid: str) -> bool:
        cur = self.parent_of(sid)
        while cur is not None:
            if cur == anc:
                return True
            cur = self.parent_of(cur)
        return False

    def preorder(self) -> list[str]:
        out, stack = [], [self.root]
        while stack:
            sid = stack.pop()
            out.append(sid)
            stack.extend(reversed(self.nodes[sid].children))
        return out

    def postorder(self) -> list[str]:
        out: list[str] = []
        stack = [(self.root, False)]
        while stack:
            sid, done = stack.pop()
            if done:
                out.append(sid)
                continue
            stack.append((sid, True))
            stack.extend((c, False) for c in reversed(self.nodes[sid].children))
        return out

    def depth(self, sid: str) -> int:
        d, cur = 0, self.parent_of(sid)
        while cur is not None:
            d, cur = d + 1, self.parent_of(cur)
        return d

    def subtree(self, sid: str) -> list[str]:
        out, stack = [], [sid]
        while stack:
            cur = stack.pop()
            out.append(cur)
            stack.extend(reversed(self.nodes[cur].children))
        return out

    def validate(self) -> None:
        """Raise unless the children lists form a tree spanning every node."""
        seen: set[str] = set()
        stack = [self.root]
        while stack:
            sid = stack.pop()
            if sid in seen:
                raise DocTreeError(f"section {sid} is reachable twice")
            seen.add(sid)
            stack.extend(self.nodes[sid].children)
        if seen != set(self.nodes):
            missing = sorted(set(self.nodes) - seen)
            raise DocTreeError(f"unreachable section(s): {', '.join(missing)}")

    def move(self, child: str, parent: str) -> None:
        old = self.parent_of(child)
        if old is not None:
            self.nodes[old].children.remove(child)
        kids = self.nodes[parent].children
        kids.append(child)
        rank = {sid: i for i, sid in enumerate(self.order)}
        kids.sort(key=lambda s: rank.get(s, len(rank)))

    def render_toc(self) -> str:
        return "\n".join(
            "  " * (self.depth(sid) - 1) + f"{sid} {self.nodes[sid].title}".rstrip()
            for sid in self.preorder()
            if sid != self.root
        )

    # -- persistence -------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "root": self.root,
            "order": list(self.order),
            "nodes": {sid: n.to_json() for sid, n in self.nodes.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DocTree":
        nodes = {sid: DocNode.from_json(n) for sid, n in obj["nodes"].items()}
        tree = cls(nodes, obj["root"], list(obj.get("order", nodes)))
        tree.validate()
        return tree

    def save(self, path: str | Path) -> Path:
        p = Path(path)
        p.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True, ensure_ascii=False) + "\n")
        return p

    @classmethod
    def load(cls, path: str | Path) -> "DocTree":
        return cls.from_json(json.loads(Path(path).read_text()))


def _dotted_parent(sid: str) -> Optional[str]:
    return sid.rsplit(".", 1)[0] if "." in sid else None


def build_initial_tree(toc: list[tuple[str, str]], sections: dict[str, str]) -> DocTree:
    """Mirror the dotted numbering of ``toc``.

    A section whose dotted parent is absent is attached to its nearest
    listed ancestor (with a warning).  When there is more than one
    top-level section a synthetic root ``0`` holding the rendered table
    of contents is added above them.
    """
    ids = [sid for sid, _ in toc]
    seen: set[str] = set()
    for sid in ids:
        if sid in seen:
            raise DocTreeError(f"duplicate section id {sid!r}")
        seen.add(sid)
    if not ids:
        raise DocTreeError("empty table of contents")
    nodes = {sid: DocNode(sid, title, sections.get(sid, "")) for sid, title in toc}
    warnings: list[str] = []
    top: list[str] = []
    for sid in ids:
        parent = _dotted_parent(sid)
        if parent is not None and parent not in nodes:
            anc = parent
            while anc is not None and anc not in nodes:
                anc = _dotted_parent(anc)
            where = f"section {anc}" if anc else "the top level"
            warnings.append(f"orphan section {sid}: parent {parent} is missing, attached to {where}")
            parent = anc
        if parent is None:
            top.append(sid)
        else:
            nodes[parent].children.append(sid)
    if len(top) == 1:
        root = top[0]
    else:
        root = SYNTHETIC_ROOT
        if root in nodes:
            raise DocTreeError("section id '0' is reserved for the document root")
        nodes[root] = DocNode(root, "Document", "", children=top)
    tree = DocTree(nodes, root, ids)
    for w in warnings:
        tree.warn(w)
    if root == SYNTHETIC_ROOT:
        nodes[root].content = tree.render_toc()
    tree.validate()
    return tree


# -- traceability --------------------------------------------------------------


@dataclass
class TraceIndex:
    """(struct, property id) -> section id.  The property id ``""`` stands
    for the struct itself."""

    entries: dict[tuple[str, str], str] = field(default_factory=dict)

    def add(self, struct: str, prop: str, section: str):
        self.entries[(struct, prop)] = section

    def lookup(self, struct: str, prop: str = "") -> str:
        key = (struct, prop)
        if key in self.entries:
            return self.entries[key]
        raise KeyError(f"unknown property {struct}:{prop}" if prop else f"unknown struct {struct}")

    def get(self, struct: str, prop: str = "") -> Optional[str]:
        return self.entries.get((struct, prop))

    def section_for(self, struct: str, prop: str = "") -> Optional[str]:
        """Section of a property, falling back to its struct's section."""
        return self.entries.get((struct, prop)) or self.entries.get((struct, ""))

    def rename(self, struct: str, old: str, new: str):
        section = self.entries.pop((struct, old))
        self.entries[(struct, new)] = section

    def remove(self, struct: str, prop: str):
        self.entries.pop((struct, prop), None)

    def to_json(self) -> list[dict]:
        return [
            {"struct": s, "property_id": p, "section_id": sec}
            for (s, p), sec in sorted(self.entries.items())
        ]

    @classmethod
    def from_json(cls, rows: list[dict]) -> "TraceIndex":
        return cls({(r["struct"], r["property_id"]): r["section_id"] for r in rows})

    def save(self, path: str | Path) -> Path:
        p = Path(path)
        p.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")
        return p

    @classmethod
    def load(cls, path: str | Path) -> "TraceIndex":
        return cls.from_json(json.loads(Path(path).read_text()))


def trace(index: TraceIndex, tree: DocTree, struct: str, prop: str = "") -> tuple[str, str]:
    """Section id and verbatim content a struct or property came from."""
    section = index.lookup(struct, prop)
    return section, tree.node(section).content
