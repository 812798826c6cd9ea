"""SMT-LIB2 rendering of path formulas for cross-checking with an external solver.

Variables use the ``Int`` sort with explicit domain bounds, which matches
the unbounded-integer semantics of constraint expressions.  Division is
encoded as truncating division guarded by a non-zero divisor, mirroring
the rule that division by zero makes a constraint false.
"""

from __future__ import annotations

import re
from typing import Optional

from ..format.ast import BinOp, Constraint, Expr, Num, Ref
from .formula import DOMAIN, PathFormula

_PRELUDE = """(set-logic QF_NIA)
(define-fun tdiv ((a Int) (b Int)) Int
  (ite (>= a 0) (ite (> b 0) (div a b) (- (div a (- b))))
                (ite (> b 0) (- (div (- a) b)) (div (- a) (- b)))))
"""

_OPS = {"+": "+", "-": "-", "*": "*"}
_CMP = {">=": ">=", "<=": "<=", ">": ">", "<": "<", "==": "="}


def smt_symbol(name: str) -> str:
    return name if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.]*", name) else f"|{name}|"


def _divisors(expr: Expr) -> list[Expr]:
    if isinstance(expr, BinOp):
        inner = _divisors(expr.left) + _divisors(expr.right)
        return inner + [expr.right] if expr.op == "/" else inner
    return []


def smt_expr(expr: Expr) -> str:
    if isinstance(expr, Num):
        return str(expr.value)
    if isinstance(expr, Ref):
        return smt_symbol(expr.name)
    if expr.op == "/":
        return f"(tdiv {smt_expr(expr.left)} {smt_expr(expr.right)})"
    return f"({_OPS[expr.op]} {smt_expr(expr.left)} {smt_expr(expr.right)})"


def smt_constraint(c: Constraint) -> str:
    lhs, rhs = smt_expr(c.lhs), smt_expr(c.rhs)
    body = f"(not (= {lhs} {rhs}))" if c.op == "!=" else f"({_CMP[c.op]} {lhs} {rhs})"
    guards = [f"(not (= {smt_expr(d)} 0))" for d in _divisors(c.lhs) + _divisors(c.rhs)]
    return f"(and {' '.join(guards)} {body})" if guards else body


def to_smtlib(formula: PathFormula, pinned: Optional[dict[str, int]] = None) -> str:
    lines = [_PRELUDE]
    for name, bits in formula.variables:
        sym = smt_symbol(name)
        lines.append(f"(declare-fun {sym} () Int)")
        lines.append(f"(assert (and (<= 0 {sym}) (<= {sym} {(1 << bits) - 1})))")
    for conj in formula.conjuncts:
        if conj.origin == DOMAIN:
            continue
        lines.append(f"; {conj.id}")
        lines.append(f"(assert {smt_constraint(conj.constraint)})")
    for name, value in sorted((pinned or {}).items()):
        lines.append(f"(assert (= {smt_symbol(name)} {value}))")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"
