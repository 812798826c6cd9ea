"""Packet format language: AST, parser, printer, checker and reference evaluator."""

from .ast import (
    Array,
    BinOp,
    Case,
    Constraint,
    FieldDecl,
    FormatSpec,
    Num,
    Prim,
    Ref,
    StructDef,
    StructRef,
)
from .checker import check_syntax, parse_format, validate
from .diagnostics import Diagnostic, FormatError
from .printer import format_constraint, format_expr, print_format

__all__ = [
    "Array",
    "BinOp",
    "Case",
    "Constraint",
    "Diagnostic",
    "FieldDecl",
    "FormatError",
    "FormatSpec",
    "Num",
    "Prim",
    "Ref",
    "StructDef",
    "StructRef",
    "check_syntax",
    "format_constraint",
    "format_expr",
    "parse_format",
    "print_format",
    "validate",
]
