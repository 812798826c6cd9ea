"""Reference interpretation of a format spec over raw bytes.

``evaluate_packet`` decodes a packet directly from the AST, without going
through the format graph, so it can serve as the oracle that generated
packets are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .ast import (
    Array,
    Case,
    FormatSpec,
    Prim,
    StructDef,
    StructRef,
    TypeExpr,
    UndefinedValue,
    eval_expr,
    expr_refs,
)
from .naming import constraint_ids, instance_id, qualify
from .printer import format_constraint


@dataclass(frozen=True)
class Violation:
    property: str  # property instance id, or a structural id
    kind: str  # "field" | "structural"
    message: str
    struct: str = ""

    @property
    def base(self) -> str:
        return self.property.split("@", 1)[0]


@dataclass(frozen=True)
class Evaluation:
    verdict: str  # "pass" | "fail"
    violation: Optional[Violation] = None
    violations: tuple[Violation, ...] = ()
    values: dict = field(default_factory=dict, compare=False)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def __str__(self) -> str:
        if self.passed:
            return "pass"
        return f"fail({self.violation.message})"


class _Stop(Exception):
    def __init__(self, violation: Violation):
        self.violation = violation


class _Decoder:
    def __init__(self, spec: FormatSpec, data: bytes, full_scan: bool):
        self.spec = spec
        self.total = len(data) * 8
        self.big = int.from_bytes(data, "big") if data else 0
        self.pos = 0
        self.limits: list[tuple[int, str]] = []
        self.values: dict[str, int] = {}
        self.violations: list[Violation] = []
        self.full_scan = full_scan
        self.checks: dict[str, list[list]] = {}
        for s in spec.structs:
            slots: list[list] = [[] for _ in range(len(s.fields) + 1)]
            for c, pid in zip(s.constraints, constraint_ids(s)):
                slots[min(s.attach_index(c), len(s.fields))].append((c, pid))
            self.checks[s.name] = slots

    def stop(self, prop: str, message: str, struct: str = ""):
        raise _Stop(Violation(prop, "structural", message, struct))

    def read(self, bits: int, var: str, struct: str) -> int:
        end = self.pos + bits
        if self.limits and end > self.limits[-1][0]:
            array = self.limits[-1][1]
            self.stop(f"length-mismatch@{array}", f"{var} overruns the declared length of {array}", struct)
        if end > self.total:
            self.stop(f"insufficient-bytes@{var}", f"insufficient bytes for {var}", struct)
        value = (self.big >> (self.total - end)) & ((1 << bits) - 1)
        self.pos = end
        return value

    def struct(self, s: StructDef, prefix: str, scopes: tuple):
        local: dict[str, str] = {}
        scope = (local,) + scopes
        slots = self.checks[s.name]
        for i, f in enumerate(s.fields):
            var = qualify(prefix, f.name)
            self.decode(f.type, var, s, scope)
            if isinstance(f.type, Prim):
                local[f.name] = var
            for c, pid in slots[i]:
                self.check(c, pid, s, prefix, local)
        for c, pid in slots[len(s.fields)]:
            self.check(c, pid, s, prefix, local)

    def check(self, c, pid: str, s: StructDef, prefix: str, local: dict):
        env = {name: self.values[local[name]] for name in c.refs()}
        if c.holds(env):
            return
        violation = Violation(instance_id(pid, prefix), "field", format_constraint(c), s.name)
        if not self.full_scan:
            raise _Stop(violation)
        self.violations.append(violation)

    def decode(self, t: TypeExpr, var: str, s: StructDef, scope: tuple):
        if isinstance(t, Prim):
            self.values[var] = self.read(t.bits, var, s.name)
        elif isinstance(t, StructRef):
            self.struct(self.spec.struct(t.name), var, scope)
        elif isinstance(t, Array):
            self.array(t, var, s, scope)
        elif isinstance(t, Case):
            self.case(t, var, s, scope)
        else:
            raise TypeError(t)

    def array(self, t: Array, var: str, s: StructDef, scope: tuple):
        local = scope[0]
        try:
            length = eval_expr(t.length, {n: self.values[local[n]] for n in _names(t.length)})
        except UndefinedValue:
            self.stop(f"bad-length@{var}", f"length of {var} divides by zero", s.name)
        if length < 0:
            self.stop(f"bad-length@{var}", f"length of {var} is negative ({length})", s.name)
        if t.unit == "elements":
            for k in range(length):
                self.decode(t.elem, f"{var}.{k}", s, scope)
            return
        end = self.pos + 8 * length
        if self.limits and end > self.limits[-1][0]:
            outer = self.limits[-1][1]
            self.stop(f"length-mismatch@{outer}", f"{var} overruns the declared length of {outer}", s.name)
        if end > self.total:
            self.stop(f"insufficient-bytes@{var}", f"insufficient bytes for {var} ({length} declared)", s.name)
        self.limits.append((end, var))
        k = 0
        while self.pos < end:
            self.decode(t.elem, f"{var}.{k}", s, scope)
            k += 1
        self.limits.pop()

    def case(self, t: Case, var: str, s: StructDef, scope: tuple):
        control = next(sc[t.control] for sc in scope if t.control in sc)
        value = self.values[control]
        for const, body in t.arms:
            if const == value:
                self.decode(body, var, s, scope)
                return
        if t.default is None:
            self.stop(f"unmatched-case@{var}", f"no case of {var} matches {t.control} = {value}", s.name)
        self.decode(t.default, var, s, scope)


def _names(expr) -> list[str]:
    return list(dict.fromkeys(expr_refs(expr)))


def evaluate_packet(spec: FormatSpec, data: bytes, *, full_scan: bool = False) -> Evaluation:
    """Decide whether ``data`` is a valid packet under ``spec``.

    On failure the first violated property in decode order is reported.
    With ``full_scan`` decoding continues past field-level violations so
    that every violated constraint is listed in ``violations``.
    """
    dec = _Decoder(spec, bytes(data), full_scan)
    try:
        dec.struct(spec.entry_struct, "", ())
        if dec.pos != dec.total:
            extra = (dec.total - dec.pos) // 8
            dec.stop("trailing-bytes", f"{extra} trailing byte(s)", spec.entry)
    except _Stop as stop:
        dec.violations.append(stop.violation)
    if not dec.violations:
        return Evaluation("pass", None, (), dec.values)
    return Evaluation("fail", dec.violations[0], tuple(dec.violations), dec.values)
