"""Canonical text rendering of format specs."""

from __future__ import annotations

from .ast import (
    Array,
    BinOp,
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
    default_unit,
)

INDENT = "    "
_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def format_expr(expr: Expr) -> str:
    if isinstance(expr, Num):
        return f"0x{expr.value:X}" if expr.hex else str(expr.value)
    if isinstance(expr, Ref):
        return expr.name
    prec = _PRECEDENCE[expr.op]
    left = format_expr(expr.left)
    right = format_expr(expr.right)
    if isinstance(expr.left, BinOp) and _PRECEDENCE[expr.left.op] < prec:
        left = f"({left})"
    if isinstance(expr.right, BinOp) and _PRECEDENCE[expr.right.op] <= prec:
        right = f"({right})"
    return f"{left} {expr.op} {right}"


def format_constraint(constraint: Constraint) -> str:
    return f"{format_expr(constraint.lhs)} {constraint.op} {format_expr(constraint.rhs)}"


def _length(arr: Array) -> str:
    text = format_expr(arr.length)
    if arr.unit != default_unit(arr.elem):
        text += f" {arr.unit}"
    return text


def format_type(t: TypeExpr, depth: int = 0) -> str:
    if isinstance(t, Prim):
        return str(t)
    if isinstance(t, StructRef):
        return t.name
    if isinstance(t, Array):
        return f"{format_type(t.elem, depth)}[{_length(t)}]"
    if isinstance(t, Case):
        pad = INDENT * (depth + 1)
        lines = [f"switch ({t.control}) {{"]
        for const, body in t.arms:
            lines.append(f"{pad}case {const}: {format_type(body, depth + 1)};")
        if t.default is not None:
            lines.append(f"{pad}default: {format_type(t.default, depth + 1)};")
        lines.append(f"{INDENT * depth}}}")
        return "\n".join(lines)
    raise TypeError(f"not a type: {t!r}")


def _format_struct(struct: StructDef) -> str:
    if not struct.fields and not struct.constraints:
        return f"struct {struct.name} {{ }}"
    pending = list(struct.constraints)
    lines = [f"struct {struct.name} {{"]
    for i, fld in enumerate(struct.fields):
        if isinstance(fld.type, Array):
            lines.append(f"{INDENT}{format_type(fld.type.elem, 1)} {fld.name}[{_length(fld.type)}];")
        else:
            lines.append(f"{INDENT}{format_type(fld.type, 1)} {fld.name};")
        while pending and struct.attach_index(pending[0]) <= i:
            lines.append(f"{INDENT}{format_constraint(pending.pop(0))};")
    for c in pending:
        lines.append(f"{INDENT}{format_constraint(c)};")
    lines.append("}")
    return "\n".join(lines)


def print_format(spec: FormatSpec) -> str:
    """Render ``spec`` as canonical source; the entry line is omitted when
    the entry is the first struct."""
    parts = []
    if spec.structs and spec.structs[0].name != spec.entry:
        parts.append(f"entry {spec.entry};")
    parts.extend(_format_struct(s) for s in spec.structs)
    return "\n\n".join(parts) + "\n"
