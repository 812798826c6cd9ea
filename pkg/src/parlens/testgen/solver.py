"""Deterministic search for minimal satisfying assignments.

Variables are assigned in wire order.  For each variable the solver looks
for the smallest value that keeps every constraint possible: constraints
whose variables are all assigned are evaluated exactly, the rest are
checked with interval arithmetic over the domains of the unassigned
variables.  The smallest candidate is found by bisecting the domain and
discarding halves that interval reasoning proves infeasible, so wide
fields (UINT64) cost a few dozen probes rather than a scan.  When a later
variable has no feasible value the search backtracks and resumes from
the next candidate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from ..format.ast import Constraint, Expr, Num, Ref, trunc_div
from .formula import DOMAIN, PathFormula

DEFAULT_TIMEOUT = 10.0

Interval = Optional[tuple[int, int]]  # None is the empty interval


class SolverTimeout(Exception):
    pass


@dataclass(frozen=True)
class SolveResult:
    status: str  # sat | unsat | timeout
    assignment: Optional[dict] = field(default=None, compare=False)

    @property
    def sat(self) -> bool:
        return self.status == "sat"


def _div_interval(n: tuple[int, int], d: tuple[int, int]) -> Interval:
    parts = []
    if d[0] <= -1:
        parts.append((d[0], min(d[1], -1)))
    if d[1] >= 1:
        parts.append((max(d[0], 1), d[1]))
    out: Interval = None
    for lo, hi in parts:
        qs = [trunc_div(a, b) for a in n for b in (lo, hi)]
        piece = (min(qs), max(qs))
        out = piece if out is None else (min(out[0], piece[0]), max(out[1], piece[1]))
    return out


def eval_interval(expr: Expr, env: dict[str, tuple[int, int]]) -> Interval:
    if isinstance(expr, Num):
        return (expr.value, expr.value)
    if isinstance(expr, Ref):
        return env[expr.name]
    left = eval_interval(expr.left, env)
    right = eval_interval(expr.right, env)
    if left is None or right is None:
        return None
    if expr.op == "+":
        return (left[0] + right[0], left[1] + right[1])
    if expr.op == "-":
        return (left[0] - right[1], left[1] - right[0])
    if expr.op == "*":
        ps = [a * b for a in left for b in right]
        return (min(ps), max(ps))
    return _div_interval(left, right)


def possible(c: Constraint, env: dict[str, tuple[int, int]]) -> bool:
    """Whether ``c`` may hold for some point of the box ``env`` (sound, not exact)."""
    lhs = eval_interval(c.lhs, env)
    rhs = eval_interval(c.rhs, env)
    if lhs is None or rhs is None:
        return False
    lo, hi = lhs[0] - rhs[1], lhs[1] - rhs[0]
    if c.op == "==":
        return lo <= 0 <= hi
    if c.op == "!=":
        return not (lo == hi == 0)
    if c.op == ">=":
        return hi >= 0
    if c.op == ">":
        return hi > 0
    if c.op == "<=":
        return lo <= 0
    return lo < 0


class _Search:
    def __init__(self, formula: PathFormula, pinned: dict[str, int], timeout: float):
        self.order = [name for name, _ in formula.variables]
        self.domains: dict[str, tuple[int, int]] = {}
        for name, bits in formula.variables:
            lo, hi = 0, (1 << bits) - 1
            if name in pinned:
                lo = hi = pinned[name]
            self.domains[name] = (lo, hi)
        position = {name: i for i, name in enumerate(self.order)}
        # watch[i]: the constraints that mention variable i
        self.watch: list[list[Constraint]] = [[] for _ in self.order]
        self.ground: list[Constraint] = []
        for c in formula.conjuncts:
            if c.origin == DOMAIN:
                continue  # encoded in self.domains
            refs = c.constraint.refs()
            if not refs:
                self.ground.append(c.constraint)
                continue
            for name in refs:
                self.watch[position[name]].append(c.constraint)
        self.deadline = time.monotonic() + timeout
        self.ticks = 0

    def tick(self):
        self.ticks += 1
        if self.ticks % 256 == 0 and time.monotonic() > self.deadline:
            raise SolverTimeout()

    def feasible(self, i: int, lo: int, hi: int, env: dict) -> bool:
        box = dict(env)
        box[self.order[i]] = (lo, hi)
        return all(possible(c, box) for c in self.watch[i])

    def smallest(self, i: int, lo: int, hi: int, env: dict) -> Optional[int]:
        """Smallest value in [lo, hi] for variable ``i`` that passes the box check."""
        stack = [(lo, hi)]
        while stack:
            self.tick()
            a, b = stack.pop()
            if not self.feasible(i, a, b, env):
                continue
            if a == b:
                return a
            mid = (a + b) // 2
            stack.append((mid + 1, b))
            stack.append((a, mid))
        return None

    def run(self) -> Optional[dict[str, int]]:
        if not all(c.holds({}) for c in self.ground):
            return None
        env = dict(self.domains)  # unassigned variables keep their full box
        if not all(possible(c, env) for cs in self.watch for c in cs):
            return None
        n = len(self.order)
        # A variable with no feasible value in the full box makes the path
        # unsat outright; without this check the search would rediscover it
        # under every assignment of the earlier variables.
        for i in range(n):
            if self.smallest(i, *self.domains[self.order[i]], env) is None:
                return None
        values: list[int] = []
        i = 0
        resume = self.domains[self.order[0]][0] if n else 0
        while True:
            if i == n:
                return dict(zip(self.order, values))
            name = self.order[i]
            lo, hi = self.domains[name]
            v = self.smallest(i, max(lo, resume), hi, env) if resume <= hi else None
            if v is None:
                env[name] = self.domains[name]
                if i == 0:
                    return None
                i -= 1
                prev = self.order[i]
                resume = values.pop() + 1
                env[prev] = self.domains[prev]
                continue
            values.append(v)
            env[name] = (v, v)
            i += 1
            if i < n:
                resume = self.domains[self.order[i]][0]


def solve(
    formula: PathFormula,
    pinned: Optional[dict[str, int]] = None,
    *,
    timeout: float = DEFAULT_TIMEOUT,
) -> SolveResult:
    """Find the lexicographically smallest assignment (in wire order) that
    satisfies ``formula`` and agrees with ``pinned``."""
    pinned = {k: v for k, v in (pinned or {}).items() if k in formula.widths}
    for name, value in pinned.items():
        if not 0 <= value < (1 << formula.widths[name]):
            return SolveResult("unsat")
    search = _Search(formula, pinned, timeout)
    try:
        found = search.run()
    except SolverTimeout:
        return SolveResult("timeout")
    if found is None:
        return SolveResult("unsat")
    assert formula.holds(found), "solver returned a non-model"
    return SolveResult("sat", found)


__all__ = ["DEFAULT_TIMEOUT", "SolveResult", "eval_interval", "possible", "solve"]
