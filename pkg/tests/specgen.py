"""Random well-formed format specs for property tests.

``random_spec(rng)`` draws a spec from a ``random.Random``; hypothesis
drives it through ``st.randoms``.  With ``small=True`` the spec has at
most three choice points and every packet it accepts is at most 8 or 16 bits
long, which keeps exhaustive byte enumeration cheap.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from hypothesis import strategies as st

from parlens.format import Array, BinOp, Case, Constraint, FieldDecl, FormatSpec, Num, Prim, Ref, StructDef, StructRef
from parlens.format.ast import CMP_OPS, expr_refs

BIT_RUNS = ((4, 4), (1, 7), (3, 5), (2, 2, 4), (8,))


@dataclass
class _Builder:
    rng: random.Random
    small: bool
    budget: int  # remaining bits of the longest packet
    choices: int  # remaining choice points
    fields: list = field(default_factory=list)
    prims: list = field(default_factory=list)  # (name, bits) of integer fields so far
    constraints: list = field(default_factory=list)

    def name(self) -> str:
        return f"f{len(self.fields)}"

    def add(self, ftype, bits: int, name=None) -> str:
        name = name or self.name()
        self.fields.append(FieldDecl(name, ftype))
        if isinstance(ftype, Prim):
            self.prims.append((name, ftype.bits))
        self.budget -= bits
        return name


def _num(rng: random.Random, hi: int) -> Num:
    value = rng.randint(0, hi) if rng.random() < 0.3 else rng.randint(0, min(hi, 40))
    return Num(value, hex=rng.random() < 0.2)


def _expr(rng: random.Random, prims: list, depth: int = 0):
    roll = rng.random()
    if depth < 2 and roll < 0.3 and prims:
        op = rng.choice(("+", "-", "*", "/"))
        right = Num(rng.randint(1, 3)) if op in ("*", "/") else _expr(rng, prims, depth + 1)
        return BinOp(op, _expr(rng, prims, depth + 1), right)
    if prims and roll < 0.85:
        return Ref(rng.choice(prims)[0])
    return Num(rng.randint(0, 20))


def _constraint(rng: random.Random, prims: list) -> Constraint:
    name, bits = rng.choice(prims)
    op = rng.choice(CMP_OPS)
    hi = (1 << bits) - 1
    if rng.random() < 0.6:
        return Constraint(Ref(name), op, _num(rng, hi))
    lhs = _expr(rng, prims)
    if not expr_refs(lhs):
        lhs = Ref(name)
    return Constraint(lhs, op, _expr(rng, prims) if rng.random() < 0.3 else _num(rng, hi))


def _prim_fields(b: _Builder):
    """One UINT field or a byte-aligned run of BIT fields."""
    rng = b.rng
    if rng.random() < 0.3:
        run = rng.choice([r for r in BIT_RUNS if sum(r) <= b.budget] or [()])
        for bits in run:
            b.add(Prim.bit(bits), bits)
        return
    kinds = [k for k, w in (("UINT8", 8), ("UINT16", 16), ("UINT32", 32)) if w <= b.budget]
    if b.small:
        kinds = [k for k in kinds if k != "UINT32"]
    if kinds:
        kind = rng.choice(kinds)
        b.add(Prim.named(kind), Prim.named(kind).bits)


def _aux_struct(rng: random.Random, name: str, small: bool, max_bits: int) -> tuple[StructDef, int]:
    b = _Builder(rng, small, max_bits, 0)
    for _ in range(rng.randint(0, 2)):
        if b.budget >= 8:
            _prim_fields(b)
    if b.prims:
        for _ in range(rng.randint(0, 2)):
            b.constraints.append(_constraint(rng, b.prims))
    return StructDef(name, tuple(b.fields), tuple(b.constraints)), max_bits - b.budget


def random_spec(rng: random.Random, *, small: bool = False) -> FormatSpec:
    budget = rng.choice((8, 16)) if small else 160
    aux: list[tuple[StructDef, int]] = []
    for i in range(rng.randint(0, 2)):
        aux.append(_aux_struct(rng, f"S{i}", small, 8 if small else 24))
    if small:
        # An empty struct lets switches branch without spending bits.
        aux.append((StructDef(f"S{len(aux)}"), 0))
    b = _Builder(rng, small, budget, 3 if small else 4)
    if small:
        # A narrow first field leaves room for the choice points.
        for bits in rng.choice(((8,), *BIT_RUNS[:3])):
            b.add(Prim.named("UINT8") if bits == 8 else Prim.bit(bits), bits)
    else:
        _prim_fields(b)
    for _ in range(rng.randint(1 if small else 0, 4)):
        if b.budget < 8 and not (small and b.choices > 0):
            break
        roll = rng.random() * (0.8 if small else 1.0) + (0.2 if small else 0.0)
        if roll < 0.35 or not b.prims:
            _prim_fields(b)
        elif roll < 0.6 and b.choices > 0:
            _case_field(b, aux)
        elif roll < 0.8 and b.choices > 0:
            _array_field(b, aux)
        elif aux and rng.random() < 0.5:
            s, bits = rng.choice(aux)
            if bits <= b.budget:
                b.add(StructRef(s.name), bits)
        else:
            _prim_fields(b)
        if b.prims and rng.random() < 0.5:
            b.constraints.append(_constraint(rng, b.prims))
    if not b.fields:
        b.add(Prim.named("UINT8"), 8)
    entry = StructDef("Packet", tuple(b.fields), tuple(b.constraints))
    structs = [s for s, _ in aux]
    pos = rng.randint(0, len(structs))
    structs.insert(pos, entry)
    return FormatSpec(tuple(structs), "Packet")


def _case_field(b: _Builder, aux: list):
    rng = b.rng
    control, bits = rng.choice(b.prims)
    consts = rng.sample(range(0, min(1 << bits, 16)), k=min(1 << bits, rng.randint(1, 3)))
    options = [(Prim.named("UINT8"), 8)] + [(StructRef(s.name), w) for s, w in aux]
    options = [o for o in options if o[1] <= b.budget]
    if not options:
        return
    bodies = [rng.choice(options) for _ in consts]
    default = rng.choice(options) if rng.random() < 0.4 else None
    widest = max(w for _, w in bodies + ([default] if default else []))
    b.choices -= 1
    b.add(Case(control, tuple((c, t) for c, (t, _) in zip(consts, bodies)), default[0] if default else None), widest)


def _array_field(b: _Builder, aux: list):
    rng = b.rng
    if rng.random() < 0.3 or not b.small:
        # Fixed-size arrays are not choice points.
        n = rng.randint(0, 2)
        if 8 * n <= b.budget and rng.random() < 0.5:
            b.add(Array(Prim.named("UINT8"), Num(n), "elements"), 8 * n)
            return
    length, lbits = rng.choice(b.prims)
    if b.small:
        # Keep the count at 0 or 1 so every accepted packet stays in the bit budget.
        if b.budget < 8:
            return
        b.constraints.append(Constraint(Ref(length), "<=", Num(1)))
        b.choices -= 1
        b.add(Array(Prim.named("UINT8"), Ref(length), "elements"), 8)
        return
    sized = [(s, w) for s, w in aux if w > 0 and w % 8 == 0]
    if sized and rng.random() < 0.4:
        s, w = rng.choice(sized)
        b.constraints.append(Constraint(Ref(length), "<=", Num(2 * w // 8)))
        b.choices -= 1
        b.add(Array(StructRef(s.name), Ref(length), "bytes"), 2 * w)
        return
    b.constraints.append(Constraint(Ref(length), "<=", Num(3)))
    b.choices -= 1
    b.add(Array(Prim.named("UINT8"), Ref(length), "elements"), 24)


def specs(small: bool = False):
    return st.randoms(use_true_random=False).map(lambda rng: random_spec(rng, small=small))
