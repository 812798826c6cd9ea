"""Format graph construction and path enumeration.

A format graph is a DAG whose nodes are primitive fields.  Complex types
become nested subgraphs: a struct instance is a sequential subgraph, a
case becomes one subgraph per arm gated by an edge condition on the
control field, and a variable-length array becomes one subgraph per
instantiated element count gated by a length condition.  Empty
subgraphs (``Pad1``, zero-element arrays) are represented by a junction
node so that they can still be connected.

Every complete path through the graph is one concrete layout; its node
sequence, in order, is the wire order of the fields.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .format.ast import (
    Array,
    Case,
    Constraint,
    Expr,
    FormatSpec,
    Num,
    Prim,
    Ref,
    StructDef,
    StructRef,
    TypeExpr,
    UndefinedValue,
    eval_expr,
    rename_expr,
)
from .format.naming import constraint_ids, instance_id, qualify
from .format.printer import format_constraint, format_expr

DEFAULT_ARRAY_COUNTS = (0, 1)
DEFAULT_MAX_PATHS = 10_000


class PathCapError(RuntimeError):
    """Raised when a graph has more complete paths than allowed."""

    def __init__(self, count: int, cap: int, choice_points: list[tuple[str, int]]):
        self.count = count
        self.cap = cap
        self.choice_points = choice_points
        listing = ", ".join(f"{name} ({n} ways)" for name, n in choice_points)
        super().__init__(f"{count} paths exceed the cap of {cap}; choice points: {listing}")


@dataclass(frozen=True)
class NodeConstraint:
    property_id: str  # instance id, e.g. RouterIdTLV.RouterId_ne_0@Payload
    constraint: Constraint  # over qualified variable names


@dataclass(frozen=True)
class GraphNode:
    id: str
    name: str  # qualified field name
    type: Optional[Prim]  # None for junction nodes
    constraints: tuple[NodeConstraint, ...] = ()
    struct: str = ""

    @property
    def is_junction(self) -> bool:
        return self.type is None


@dataclass(frozen=True)
class EdgeCond:
    """A structural condition carried by an edge.

    ``kind`` is ``case`` (the control equals an arm constant),
    ``default`` (the control differs from one arm constant) or
    ``length`` (a length expression equals the instantiated size).
    For byte-measured arrays the size is only known once the path is
    fixed, so ``value`` is None and the width is summed per path.
    """

    kind: str
    var: str  # the case field or array the condition guards
    expr: Expr  # over qualified names
    value: Optional[int] = None
    unit: str = "elements"
    count: int = 0
    elem_bits: int = field(default=0, compare=False)  # narrowest element layout

    @property
    def property_id(self) -> str:
        if self.kind == "default":
            return f"default@{self.var}.{self.value}"
        return f"{'case' if self.kind == 'case' else 'len'}@{self.var}"

    def constraint(self, size: Optional[int] = None) -> Constraint:
        if self.kind == "default":
            return Constraint(self.expr, "!=", Num(self.value))
        if self.kind == "case":
            return Constraint(self.expr, "==", Num(self.value))
        return Constraint(self.expr, "==", Num(self.value if size is None else size))

    def label(self) -> str:
        if self.kind == "length" and self.unit == "bytes":
            return f"{format_expr(self.expr)} == bytes({self.var}) [{self.count}]"
        return format_constraint(self.constraint())


@dataclass(frozen=True)
class GraphEdge:
    src: str
    dst: str
    conds: tuple[EdgeCond, ...] = ()


@dataclass
class FormatGraph:
    name: str
    kind: str = "struct"  # struct | array | count | case | arm | element
    nodes: list[GraphNode] = field(default_factory=list)
    subgraphs: list["FormatGraph"] = field(default_factory=list)
    edges: list[GraphEdge] = field(default_factory=list)
    entries: list[tuple[str, tuple[EdgeCond, ...]]] = field(default_factory=list)
    exits: list[str] = field(default_factory=list)

    def all_nodes(self) -> list[GraphNode]:
        out = list(self.nodes)
        for sub in self.subgraphs:
            out += sub.all_nodes()
        return out

    def all_edges(self) -> list[GraphEdge]:
        out = list(self.edges)
        for sub in self.subgraphs:
            out += sub.all_edges()
        return out


@dataclass(frozen=True)
class GraphPath:
    id: str
    # Ordered steps: ("edge", EdgeCond) for each traversed condition and
    # ("node", GraphNode) for each primitive field.
    steps: tuple[tuple[str, object], ...]
    arrays: tuple[tuple[str, int], ...] = ()

    @property
    def nodes(self) -> list[GraphNode]:
        return [n for kind, n in self.steps if kind == "node"]

    @property
    def conds(self) -> list[EdgeCond]:
        return [c for kind, c in self.steps if kind == "edge"]

    @property
    def bit_length(self) -> int:
        return sum(n.type.bits for n in self.nodes)

    def array_bytes(self, var: str) -> int:
        prefix = var + "."
        return sum(n.type.bits for n in self.nodes if n.name.startswith(prefix)) // 8

    def describe(self) -> str:
        parts = []
        for c in self.conds:
            if c.kind == "length":
                parts.append(f"{c.var}[{c.count}]")
            elif c.kind == "case":
                parts.append(f"{c.var}:{c.value}")
            elif c.kind == "default":
                if not parts or parts[-1] != f"{c.var}:default":
                    parts.append(f"{c.var}:default")
        return ", ".join(parts) or "(single layout)"


# -- construction ------------------------------------------------------------


@dataclass
class _Fragment:
    entries: list[tuple[str, tuple[EdgeCond, ...]]]
    exits: list[str]


class _Builder:
    def __init__(self, spec: FormatSpec, array_counts: Sequence[int]):
        self.spec = spec
        self.array_counts = tuple(array_counts)
        self.counter = itertools.count()
        self.ids = {s.name: constraint_ids(s) for s in spec.structs}

    def new_id(self) -> str:
        return f"n{next(self.counter)}"

    def junction(self, g: FormatGraph, name: str) -> _Fragment:
        node = GraphNode(self.new_id(), name, None)
        g.nodes.append(node)
        return _Fragment([(node.id, ())], [node.id])

    @staticmethod
    def connect(g: FormatGraph, prev: list[str], frag: _Fragment, first: list) -> None:
        if not prev:
            first.extend(frag.entries)
            return
        for p in prev:
            for target, conds in frag.entries:
                g.edges.append(GraphEdge(p, target, conds))

    def sequence(self, g: FormatGraph, parts) -> _Fragment:
        """Chain fragments produced lazily by ``parts`` (callables taking ``g``)."""
        entries: list = []
        prev: list[str] = []
        for make in parts:
            frag = make(g)
            self.connect(g, prev, frag, entries)
            prev = frag.exits
        if not entries:
            return self.junction(g, g.name)
        return _Fragment(entries, prev)

    def struct(self, s: StructDef, prefix: str, outer: tuple, kind: str = "struct") -> tuple[FormatGraph, _Fragment]:
        g = FormatGraph(prefix or s.name, kind)
        local: dict[str, str] = {}
        scope = (local,) + outer
        checks: list[list[tuple[str, Constraint]]] = [[] for _ in s.fields]
        for c, pid in zip(s.constraints, self.ids[s.name]):
            idx = s.attach_index(c)
            if idx < len(s.fields):
                checks[idx].append((pid, c))

        def field_part(i):
            f = s.fields[i]
            var = qualify(prefix, f.name)

            def make(g: FormatGraph) -> _Fragment:
                if isinstance(f.type, Prim):
                    local[f.name] = var
                    cons = tuple(
                        NodeConstraint(instance_id(pid, prefix), c.rename(lambda n: local[n]))
                        for pid, c in checks[i]
                    )
                    node = GraphNode(self.new_id(), var, f.type, cons, s.name)
                    g.nodes.append(node)
                    return _Fragment([(node.id, ())], [node.id])
                return self.complex(g, f.type, var, s, scope)

            return make

        frag = self.sequence(g, [field_part(i) for i in range(len(s.fields))])
        g.entries, g.exits = list(frag.entries), list(frag.exits)
        return g, frag

    def complex(self, g: FormatGraph, t: TypeExpr, var: str, s: StructDef, scope: tuple) -> _Fragment:
        if isinstance(t, Prim):
            node = GraphNode(self.new_id(), var, t, (), s.name)
            g.nodes.append(node)
            return _Fragment([(node.id, ())], [node.id])
        if isinstance(t, StructRef):
            sub, frag = self.struct(self.spec.struct(t.name), var, scope)
            g.subgraphs.append(sub)
            return frag
        if isinstance(t, Array):
            return self.array(g, t, var, s, scope)
        if isinstance(t, Case):
            return self.case(g, t, var, s, scope)
        raise TypeError(t)

    def elements(self, g: FormatGraph, t: Array, var: str, count: int, s: StructDef, scope: tuple) -> _Fragment:
        def part(k):
            return lambda g: self.complex(g, t.elem, f"{var}.{k}", s, scope)

        return self.sequence(g, [part(k) for k in range(count)])

    def array(self, g: FormatGraph, t: Array, var: str, s: StructDef, scope: tuple) -> _Fragment:
        local = scope[0]
        if t.is_fixed:
            sub = FormatGraph(var, "array")
            try:
                count = max(0, eval_expr(t.length, {}))
            except UndefinedValue:
                count = 0
            frag = self.elements(sub, t, var, count, s, scope)
            sub.entries, sub.exits = list(frag.entries), list(frag.exits)
            g.subgraphs.append(sub)
            return frag
        length = rename_expr(t.length, lambda n: local[n])
        counts = self.array_counts
        constant = None
        if t.unit == "bytes" and isinstance(t.length, Num):
            constant = t.length.value
            width = _fixed_width(self.spec, t.elem)
            if width and (8 * constant) % width == 0:
                counts = (8 * constant // width,)
        entries: list = []
        exits: list = []
        for count in counts:
            sub = FormatGraph(f"{var}[{count}]", "count")
            frag = self.elements(sub, t, var, count, s, scope)
            value = count if t.unit == "elements" else None
            cond = EdgeCond("length", var, length, value, t.unit, count, _min_width(self.spec, t.elem))
            sub.entries = [(e, (cond,) + c) for e, c in frag.entries]
            sub.exits = list(frag.exits)
            g.subgraphs.append(sub)
            entries += sub.entries
            exits += sub.exits
        return _Fragment(entries, exits)

    def case(self, g: FormatGraph, t: Case, var: str, s: StructDef, scope: tuple) -> _Fragment:
        control = next(sc[t.control] for sc in scope if t.control in sc)
        ctl = Ref(control)
        arms = [(EdgeCond("case", var, ctl, const),) for const, _ in t.arms]
        bodies = [body for _, body in t.arms]
        if t.default is not None:
            arms.append(tuple(EdgeCond("default", var, ctl, const) for const, _ in t.arms))
            bodies.append(t.default)
        entries: list = []
        exits: list = []
        for conds, body in zip(arms, bodies):
            label = f"{var}:{conds[0].value}" if conds[0].kind == "case" else f"{var}:default"
            sub = FormatGraph(label, "arm")
            frag = self.complex(sub, body, var, s, scope)
            sub.entries = [(e, conds + c) for e, c in frag.entries]
            sub.exits = list(frag.exits)
            g.subgraphs.append(sub)
            entries += sub.entries
            exits += sub.exits
        return _Fragment(entries, exits)


def _min_width(spec: FormatSpec, t: TypeExpr) -> int:
    if isinstance(t, Prim):
        return t.bits
    if isinstance(t, StructRef):
        return sum(_min_width(spec, f.type) for f in spec.struct(t.name).fields)
    if isinstance(t, Array):
        if not t.is_fixed:
            return 0
        return _min_width(spec, t.elem) * max(0, eval_expr(t.length, {}))
    bodies = [b for _, b in t.arms] + ([t.default] if t.default is not None else [])
    return min(_min_width(spec, b) for b in bodies)


def _fixed_width(spec: FormatSpec, t: TypeExpr) -> Optional[int]:
    """Bit width of ``t`` if every layout of it has the same width."""
    if isinstance(t, Prim):
        return t.bits
    if isinstance(t, StructRef):
        total = 0
        for f in spec.struct(t.name).fields:
            w = _fixed_width(spec, f.type)
            if w is None:
                return None
            total += w
        return total
    if isinstance(t, Array):
        if not t.is_fixed:
            return None
        w = _fixed_width(spec, t.elem)
        return None if w is None else w * max(0, eval_expr(t.length, {}))
    bodies = [b for _, b in t.arms] + ([t.default] if t.default is not None else [])
    widths = {_fixed_width(spec, b) for b in bodies}
    return widths.pop() if len(widths) == 1 else None


def build_graph(spec: FormatSpec, array_counts: Sequence[int] = DEFAULT_ARRAY_COUNTS) -> FormatGraph:
    """Compile ``spec`` into a format graph rooted at its entry struct.

    Variable-length arrays are instantiated once per element count in
    ``array_counts``.
    """
    if not array_counts:
        raise ValueError("array_counts must not be empty")
    builder = _Builder(spec, array_counts)
    graph, _ = builder.struct(spec.entry_struct, "", ())
    graph.name = spec.entry
    return graph


# -- enumeration -------------------------------------------------------------


def _adjacency(graph: FormatGraph) -> dict[str, list[GraphEdge]]:
    adj: dict[str, list[GraphEdge]] = {n.id: [] for n in graph.all_nodes()}
    for e in graph.all_edges():
        adj[e.src].append(e)
    return adj


def count_paths(graph: FormatGraph) -> int:
    adj = _adjacency(graph)
    memo: dict[str, int] = {}
    order = _topological(adj)
    for nid in reversed(order):
        memo[nid] = sum(memo[e.dst] for e in adj[nid]) if adj[nid] else 1
    return sum(memo[e] for e, _ in graph.entries)


def _topological(adj: dict[str, list[GraphEdge]]) -> list[str]:
    indeg = {n: 0 for n in adj}
    for edges in adj.values():
        for e in edges:
            indeg[e.dst] += 1
    ready = [n for n in adj if indeg[n] == 0]
    order = []
    while ready:
        n = ready.pop()
        order.append(n)
        for e in adj[n]:
            indeg[e.dst] -= 1
            if indeg[e.dst] == 0:
                ready.append(e.dst)
    return order


def choice_points(graph: FormatGraph) -> list[tuple[str, int]]:
    """Case fields and variable arrays with their number of alternatives."""
    ways: dict[str, set] = {}

    def visit(g: FormatGraph):
        for _, conds in g.entries:
            for c in conds:
                key = c.count if c.kind == "length" else (c.value if c.kind == "case" else "default")
                ways.setdefault(c.var, set()).add(key)
        for sub in g.subgraphs:
            visit(sub)

    visit(graph)
    return [(var, len(v)) for var, v in ways.items()]


def enumerate_paths(
    graph: FormatGraph,
    max_paths: int = DEFAULT_MAX_PATHS,
) -> list[GraphPath]:
    """All complete paths of ``graph`` in deterministic order.

    Alternatives are explored in declaration order: case arms in source
    order (default last), array instantiations in count order.
    """
    total = count_paths(graph)
    if total > max_paths:
        raise PathCapError(total, max_paths, choice_points(graph))
    adj = _adjacency(graph)
    nodes = {n.id: n for n in graph.all_nodes()}
    paths: list[GraphPath] = []

    def emit(steps: list):
        arrays = tuple((c.var, c.count) for kind, c in steps if kind == "edge" and c.kind == "length")
        paths.append(GraphPath(f"p{len(paths):04d}", tuple(steps), arrays))

    # Iterative DFS so deep graphs do not hit the recursion limit.
    stack = [(e, conds, 0) for e, conds in reversed(graph.entries)]
    steps: list = []
    while stack:
        nid, conds, depth = stack.pop()
        del steps[depth:]
        steps.extend(("edge", c) for c in conds)
        node = nodes[nid]
        if not node.is_junction:
            steps.append(("node", node))
        out = adj[nid]
        if not out:
            emit(list(steps))
            continue
        here = len(steps)
        for e in reversed(out):
            stack.append((e.dst, e.conds, here))
    return paths


# -- export ------------------------------------------------------------------


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(graph: FormatGraph) -> str:
    """Render ``graph`` in Graphviz DOT with one cluster per subgraph."""
    lines = [f"digraph {_dot_quote(graph.name)} {{", "  rankdir=TB;", "  node [shape=box];"]
    counter = itertools.count()

    def emit_nodes(g: FormatGraph, indent: str):
        for n in g.nodes:
            if n.is_junction:
                lines.append(f"{indent}{n.id} [label={_dot_quote(n.name)}, shape=point];")
                continue
            label = f"{n.name}: {n.type}"
            for nc in n.constraints:
                label += "\\n" + format_constraint(nc.constraint)
            lines.append(f"{indent}{n.id} [label={_dot_quote(label)}];")
        for sub in g.subgraphs:
            lines.append(f"{indent}subgraph cluster_{next(counter)} {{")
            lines.append(f"{indent}  label={_dot_quote(sub.name)};")
            emit_nodes(sub, indent + "  ")
            lines.append(f"{indent}}}")

    emit_nodes(graph, "  ")
    for e in graph.all_edges():
        attrs = f" [label={_dot_quote(' && '.join(c.label() for c in e.conds))}]" if e.conds else ""
        lines.append(f"  {e.src} -> {e.dst}{attrs};")
    if any(conds for _, conds in graph.entries):
        lines.append("  start [shape=circle, label=\"\"];")
        for target, conds in graph.entries:
            label = " && ".join(c.label() for c in conds)
            lines.append(f"  start -> {target} [label={_dot_quote(label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


__all__ = [
    "DEFAULT_ARRAY_COUNTS",
    "DEFAULT_MAX_PATHS",
    "EdgeCond",
    "FormatGraph",
    "GraphEdge",
    "GraphNode",
    "GraphPath",
    "NodeConstraint",
    "PathCapError",
    "build_graph",
    "choice_points",
    "count_paths",
    "enumerate_paths",
    "to_dot",
]
