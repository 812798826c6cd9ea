"""Name resolution and well-formedness checks.

``parse_format`` and ``check_syntax`` are the public entry points; the
checks here are what the extraction loop feeds back to the model when a
generated format is rejected.
"""

from __future__ import annotations

from .ast import (
    Array,
    Case,
    Constraint,
    FormatSpec,
    Prim,
    StructDef,
    StructRef,
    TypeExpr,
    eval_expr,
    expr_ref_nodes,
    UndefinedValue,
)
from .diagnostics import Diagnostic, FormatError, error, warning
from .parser import parse_source


def _struct_refs(t: TypeExpr) -> list[StructRef]:
    if isinstance(t, StructRef):
        return [t]
    if isinstance(t, Array):
        return _struct_refs(t.elem)
    if isinstance(t, Case):
        out: list[StructRef] = []
        for _, body in t.arms:
            out += _struct_refs(body)
        if t.default is not None:
            out += _struct_refs(t.default)
        return out
    return []


class _Checker:
    def __init__(self, spec: FormatSpec):
        self.spec = spec
        self.diags: list[Diagnostic] = []
        self._seen: set[tuple] = set()
        self.structs: dict[str, StructDef] = {}
        self._min_bits: dict[str, int] = {}

    def err(self, message: str, line: int = 0, col: int = 0, code: str = "syntax"):
        key = ("error", message, line, col)
        if key not in self._seen:
            self._seen.add(key)
            self.diags.append(error(message, line, col, code))

    def warn(self, message: str, line: int = 0, col: int = 0, code: str = "warning"):
        key = ("warning", message, line, col)
        if key not in self._seen:
            self._seen.add(key)
            self.diags.append(warning(message, line, col, code))

    def run(self) -> list[Diagnostic]:
        for s in self.spec.structs:
            if s.name in self.structs:
                self.err(f"duplicate struct {s.name!r}", s.line, s.col, "duplicate-struct")
            else:
                self.structs[s.name] = s
        if self.spec.entry not in self.structs:
            self.err(f"entry struct {self.spec.entry!r} is not defined", code="unknown-type")
        for s in self.spec.structs:
            self.check_struct_local(s)
        cyclic = self.check_cycles()
        if not cyclic:
            for s in self.spec.structs:
                self.check_byte_arrays(s)
            reachable = self.walk_contexts()
            for s in self.spec.structs:
                if s.name not in reachable:
                    self.walk(s, (), set())
        return self.diags

    # -- per-struct checks -------------------------------------------------

    def check_struct_local(self, s: StructDef):
        names: dict[str, int] = {}
        for i, f in enumerate(s.fields):
            if f.name in names:
                self.err(f"duplicate field {f.name!r} in struct {s.name}", f.line, f.col, "duplicate-field")
            else:
                names[f.name] = i
            self.check_type(s, f.type, i, f.line, f.col, top=True)
        self.check_bit_runs(s)
        for c in s.constraints:
            self.check_constraint(s, c, names)

    def check_type(self, s: StructDef, t: TypeExpr, index: int, line: int, col: int, top: bool = False):
        if isinstance(t, Prim):
            if t.is_bit and not 1 <= t.bits <= 63:
                self.err(f"BIT width must be within 1..63, got {t.bits}", line, col, "bad-width")
            elif t.is_bit and not top:
                self.err(
                    "misaligned BIT packing: BIT fields may only appear directly in a struct",
                    line,
                    col,
                    "bit-alignment",
                )
        elif isinstance(t, StructRef):
            if t.name not in self.structs:
                self.err(f"unknown type name {t.name!r}", t.line or line, t.col or col, "unknown-type")
        elif isinstance(t, Array):
            self.check_type(s, t.elem, index, line, col)
            refs = expr_ref_nodes(t.length)
            for ref in refs:
                self.check_earlier_prim(s, ref.name, index, ref.line or line, ref.col or col, "array length")
            if not refs:
                try:
                    if eval_expr(t.length, {}) < 0:
                        self.err("array length must not be negative", line, col, "bad-length")
                except UndefinedValue:
                    self.err("array length divides by zero", line, col, "bad-length")
            if t.unit not in ("bytes", "elements"):
                self.err(f"unknown array unit {t.unit!r}", line, col)
        elif isinstance(t, Case):
            consts = [c for c, _ in t.arms]
            if len(set(consts)) != len(consts):
                self.err("duplicate case arm", t.line or line, t.col or col, "duplicate-arm")
            for _, body in t.arms:
                self.check_type(s, body, index, line, col)
            if t.default is not None:
                self.check_type(s, t.default, index, line, col)

    def check_earlier_prim(self, s: StructDef, name: str, index: int, line: int, col: int, what: str):
        for i, f in enumerate(s.fields[:index]):
            if f.name == name:
                if not isinstance(f.type, Prim):
                    self.err(f"{what} refers to non-integer field {name!r}", line, col, "bad-reference")
                return
        self.err(f"unresolved identifier {name!r} in {what}", line, col, "unresolved-identifier")

    def check_constraint(self, s: StructDef, c: Constraint, names: dict[str, int]):
        refs = expr_ref_nodes(c.lhs) + expr_ref_nodes(c.rhs)
        if not refs:
            self.err("constraint references no field", c.line, c.col, "bad-constraint")
        for ref in refs:
            if ref.name not in names:
                self.err(
                    f"unresolved identifier {ref.name!r} in constraint",
                    ref.line or c.line,
                    ref.col or c.col,
                    "unresolved-identifier",
                )
            elif not isinstance(s.fields[names[ref.name]].type, Prim):
                self.err(
                    f"constraint refers to non-integer field {ref.name!r}",
                    ref.line or c.line,
                    ref.col or c.col,
                    "bad-reference",
                )

    def check_bit_runs(self, s: StructDef):
        run_bits, run_start = 0, None
        for f in list(s.fields) + [None]:
            is_bit = f is not None and isinstance(f.type, Prim) and f.type.is_bit
            if is_bit:
                if run_start is None:
                    run_start = f
                run_bits += f.type.bits
                continue
            if run_start is not None and run_bits % 8:
                self.err(
                    f"misaligned BIT packing: run starting at {run_start.name!r} spans {run_bits} bits,"
                    " not a multiple of 8",
                    run_start.line,
                    run_start.col,
                    "bit-alignment",
                )
            run_bits, run_start = 0, None

    # -- struct graph ------------------------------------------------------

    def check_cycles(self) -> bool:
        state: dict[str, int] = {}
        found = False

        def visit(name: str, stack: list[str]):
            nonlocal found
            state[name] = 1
            for f in self.structs[name].fields:
                for ref in _struct_refs(f.type):
                    if ref.name not in self.structs:
                        continue
                    if state.get(ref.name) == 1:
                        cycle = stack[stack.index(ref.name):] + [ref.name] if ref.name in stack else [name, ref.name]
                        self.err(
                            "cyclic struct reference: " + " -> ".join(cycle),
                            ref.line or f.line,
                            ref.col or f.col,
                            "cyclic-struct",
                        )
                        found = True
                    elif ref.name not in state:
                        visit(ref.name, stack + [ref.name])
            state[name] = 2

        for name in self.structs:
            if name not in state:
                visit(name, [name])
        return found

    def min_bits(self, t: TypeExpr) -> int:
        if isinstance(t, Prim):
            return t.bits
        if isinstance(t, StructRef):
            if t.name not in self.structs:
                return 0
            if t.name not in self._min_bits:
                self._min_bits[t.name] = sum(self.min_bits(f.type) for f in self.structs[t.name].fields)
            return self._min_bits[t.name]
        if isinstance(t, Array):
            if t.is_fixed:
                try:
                    return max(0, eval_expr(t.length, {})) * self.min_bits(t.elem)
                except UndefinedValue:
                    return 0
            return 0
        bodies = [b for _, b in t.arms] + ([t.default] if t.default is not None else [])
        return min(self.min_bits(b) for b in bodies)

    def check_byte_arrays(self, s: StructDef):
        def visit(t: TypeExpr, f):
            if isinstance(t, Array):
                if t.unit == "bytes" and self.min_bits(t.elem) == 0:
                    self.err(
                        f"byte-measured array {f.name!r} has elements that may be zero bytes wide",
                        f.line,
                        f.col,
                        "bad-length",
                    )
                visit(t.elem, f)
            elif isinstance(t, Case):
                for _, b in t.arms:
                    visit(b, f)
                if t.default is not None:
                    visit(t.default, f)

        for f in s.fields:
            visit(f.type, f)

    # -- case-control resolution in context --------------------------------

    def walk_contexts(self) -> set[str]:
        reachable: set[str] = set()
        if self.spec.entry in self.structs:
            self.walk(self.structs[self.spec.entry], (), reachable)
        return reachable

    def walk(self, s: StructDef, outer: tuple, reachable: set[str], _memo: set | None = None):
        """Resolve switch controls of ``s`` against its own earlier fields and
        the ``outer`` scopes of enclosing struct instances."""
        memo = _memo if _memo is not None else set()
        if (s.name, outer) in memo:
            return
        memo.add((s.name, outer))
        reachable.add(s.name)
        for i, f in enumerate(s.fields):
            local = tuple((g.name, g.type if isinstance(g.type, Prim) else None) for g in s.fields[:i])
            self.walk_type(f.type, f, (local,) + outer, reachable, memo)

    def walk_type(self, t: TypeExpr, f, scopes: tuple, reachable: set[str], memo: set):
        if isinstance(t, StructRef) and t.name in self.structs:
            self.walk(self.structs[t.name], scopes, reachable, memo)
        elif isinstance(t, Array):
            self.walk_type(t.elem, f, scopes, reachable, memo)
        elif isinstance(t, Case):
            self.check_control(t, f, scopes)
            for _, body in t.arms:
                self.walk_type(body, f, scopes, reachable, memo)
            if t.default is not None:
                self.walk_type(t.default, f, scopes, reachable, memo)

    def check_control(self, t: Case, f, scopes: tuple):
        line, col = t.line or f.line, t.col or f.col
        for scope in scopes:
            found = dict(scope)
            if t.control in found:
                ctype = found[t.control]
                break
        else:
            self.err(f"unresolved identifier {t.control!r} in switch control", line, col, "unresolved-identifier")
            return
        if ctype is None:
            self.err(f"switch control {t.control!r} is not an integer field", line, col, "bad-reference")
            return
        for const, _ in t.arms:
            if const >> ctype.bits:
                self.warn(
                    f"case arm {const} can never match {ctype.bits}-bit control {t.control!r}",
                    line,
                    col,
                    "unreachable-arm",
                )


def validate(spec: FormatSpec) -> list[Diagnostic]:
    """Resolution diagnostics for an already-built spec."""
    return _Checker(spec).run()


def has_errors(diagnostics: list[Diagnostic]) -> bool:
    return any(d.severity == "error" for d in diagnostics)


def parse_format(text: str) -> FormatSpec:
    """Parse and resolve ``text``.  Raises :class:`FormatError` carrying the
    diagnostics when the source is invalid."""
    spec = parse_source(text)
    diags = validate(spec)
    if has_errors(diags):
        raise FormatError(diags)
    return spec


def check_syntax(text: str) -> tuple[bool, list[Diagnostic]]:
    try:
        spec = parse_source(text)
    except FormatError as exc:
        return False, exc.diagnostics
    diags = validate(spec)
    return not has_errors(diags), diags
