"""AST for the packet format language.

All nodes are frozen dataclasses.  Source positions are carried for
diagnostics but excluded from equality, so two specs compare equal when
they describe the same format regardless of layout in the source text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

PRIMITIVE_WIDTHS = {"UINT8": 8, "UINT16": 16, "UINT32": 32, "UINT64": 64}
MAX_BIT_WIDTH = 63

CMP_OPS = (">=", "<=", ">", "<", "==", "!=")
NEGATED_OP = {">=": "<", "<": ">=", "<=": ">", ">": "<=", "==": "!=", "!=": "=="}
ARITH_OPS = ("+", "-", "*", "/")


# -- arithmetic ------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: int
    hex: bool = False


@dataclass(frozen=True)
class Ref:
    name: str
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Ref, BinOp]


def expr_refs(expr: Expr) -> list[str]:
    """Identifiers referenced by ``expr`` in left-to-right order (with repeats)."""
    if isinstance(expr, Ref):
        return [expr.name]
    if isinstance(expr, BinOp):
        return expr_refs(expr.left) + expr_refs(expr.right)
    return []


def expr_ref_nodes(expr: Expr) -> list[Ref]:
    if isinstance(expr, Ref):
        return [expr]
    if isinstance(expr, BinOp):
        return expr_ref_nodes(expr.left) + expr_ref_nodes(expr.right)
    return []


def rename_expr(expr: Expr, mapping) -> Expr:
    """Return ``expr`` with every identifier replaced by ``mapping(name)``."""
    if isinstance(expr, Ref):
        return Ref(mapping(expr.name))
    if isinstance(expr, BinOp):
        return BinOp(expr.op, rename_expr(expr.left, mapping), rename_expr(expr.right, mapping))
    return expr


def trunc_div(a: int, b: int) -> int:
    """Integer division truncating toward zero (caller guarantees b != 0)."""
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


class UndefinedValue(ArithmeticError):
    """Raised when an expression divides by zero."""


def eval_expr(expr: Expr, env) -> int:
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Ref):
        return env[expr.name]
    left = eval_expr(expr.left, env)
    right = eval_expr(expr.right, env)
    if expr.op == "+":
        return left + right
    if expr.op == "-":
        return left - right
    if expr.op == "*":
        return left * right
    if right == 0:
        raise UndefinedValue("division by zero")
    return trunc_div(left, right)


def compare(value: int, op: str, other: int = 0) -> bool:
    if op == ">=":
        return value >= other
    if op == "<=":
        return value <= other
    if op == ">":
        return value > other
    if op == "<":
        return value < other
    if op == "==":
        return value == other
    if op == "!=":
        return value != other
    raise ValueError(f"unknown comparison operator {op!r}")


@dataclass(frozen=True)
class Constraint:
    """``lhs op rhs``; the normal form has ``rhs == Num(0)``."""

    lhs: Expr
    op: str
    rhs: Expr = Num(0)
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)

    def normalized(self) -> "Constraint":
        if self.rhs == Num(0):
            return self
        return Constraint(BinOp("-", self.lhs, self.rhs), self.op, Num(0), self.line, self.col)

    def negated(self) -> "Constraint":
        return Constraint(self.lhs, NEGATED_OP[self.op], self.rhs, self.line, self.col)

    def refs(self) -> list[str]:
        seen: dict[str, None] = {}
        for name in expr_refs(self.lhs) + expr_refs(self.rhs):
            seen.setdefault(name, None)
        return list(seen)

    def holds(self, env) -> bool:
        """Evaluate against ``env``; division by zero makes the constraint false."""
        try:
            return compare(eval_expr(self.lhs, env), self.op, eval_expr(self.rhs, env))
        except UndefinedValue:
            return False

    def rename(self, mapping) -> "Constraint":
        return Constraint(rename_expr(self.lhs, mapping), self.op, rename_expr(self.rhs, mapping))


# -- types -----------------------------------------------------------------


@dataclass(frozen=True)
class Prim:
    kind: str  # UINT8 | UINT16 | UINT32 | UINT64 | BIT
    bits: int

    @classmethod
    def named(cls, kind: str) -> "Prim":
        return cls(kind, PRIMITIVE_WIDTHS[kind])

    @classmethod
    def bit(cls, n: int) -> "Prim":
        return cls("BIT", n)

    @property
    def is_bit(self) -> bool:
        return self.kind == "BIT"

    @property
    def max_value(self) -> int:
        return (1 << self.bits) - 1

    def __str__(self) -> str:
        return f"BIT({self.bits})" if self.is_bit else self.kind


@dataclass(frozen=True)
class StructRef:
    name: str
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Array:
    elem: "TypeExpr"
    length: Expr
    unit: str  # "elements" | "bytes"

    @property
    def is_fixed(self) -> bool:
        return self.unit == "elements" and not expr_refs(self.length)


@dataclass(frozen=True)
class Case:
    control: str
    arms: tuple[tuple[int, "TypeExpr"], ...]
    default: Optional["TypeExpr"] = None
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


TypeExpr = Union[Prim, StructRef, Array, Case]


def default_unit(elem: TypeExpr) -> str:
    return "bytes" if isinstance(elem, StructRef) else "elements"


# -- declarations ----------------------------------------------------------


@dataclass(frozen=True)
class FieldDecl:
    name: str
    type: TypeExpr
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)


def _attach_index(constraint: Constraint, fields) -> int:
    """Index of the last field ``constraint`` references (its check point)."""
    positions = {f.name: i for i, f in enumerate(fields)}
    idx = [positions.get(name, len(fields)) for name in constraint.refs()]
    return max(idx) if idx else len(fields)


@dataclass(frozen=True)
class StructDef:
    """A struct.  Constraints live at struct scope, ordered by check point."""

    name: str
    fields: tuple[FieldDecl, ...] = ()
    constraints: tuple[Constraint, ...] = ()
    line: int = field(default=0, compare=False, repr=False)
    col: int = field(default=0, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        ordered = sorted(
            enumerate(self.constraints),
            key=lambda item: (_attach_index(item[1], self.fields), item[0]),
        )
        object.__setattr__(self, "constraints", tuple(c for _, c in ordered))

    def field(self, name: str) -> Optional[FieldDecl]:
        for f in self.fields:
            if f.name == name:
                return f
        return None

    def attach_index(self, constraint: Constraint) -> int:
        return _attach_index(constraint, self.fields)


@dataclass(frozen=True)
class FormatSpec:
    structs: tuple[StructDef, ...]
    entry: str

    def __post_init__(self):
        object.__setattr__(self, "structs", tuple(self.structs))

    def struct(self, name: str) -> StructDef:
        for s in self.structs:
            if s.name == name:
                return s
        raise KeyError(name)

    def has_struct(self, name: str) -> bool:
        return any(s.name == name for s in self.structs)

    @property
    def entry_struct(self) -> StructDef:
        return self.struct(self.entry)

    def replace_struct(self, new: StructDef) -> "FormatSpec":
        return FormatSpec(tuple(new if s.name == new.name else s for s in self.structs), self.entry)
