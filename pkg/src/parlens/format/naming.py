"""Stable identifiers for fields, struct instances and properties.

A property id names one constraint of one struct, e.g.
``RouterIdTLV.RouterId_ne_0``.  It is derived from the constraint text,
so ids survive the removal of unrelated constraints.  Inside a packet
the same constraint may be instantiated several times; an instance id
appends the struct-instance path: ``RouterIdTLV.RouterId_ne_0@Payload``.
Ids use only ``[A-Za-z0-9_.@+-]`` so they can be embedded in file names.
"""

from __future__ import annotations

from .ast import Constraint, StructDef
from .parser import tokenize
from .printer import format_constraint

_TOKEN_WORDS = {
    ">=": "ge",
    "<=": "le",
    ">": "gt",
    "<": "lt",
    "==": "eq",
    "!=": "ne",
    "+": "plus",
    "-": "minus",
    "*": "mul",
    "/": "div",
    "(": "lp",
    ")": "rp",
}


def constraint_slug(constraint: Constraint) -> str:
    words = []
    for tok in tokenize(format_constraint(constraint)):
        if tok.kind == "eof":
            break
        words.append(_TOKEN_WORDS.get(tok.value, tok.value))
    return "_".join(words)


def constraint_ids(struct: StructDef) -> list[str]:
    """Property ids aligned with ``struct.constraints``."""
    ids: list[str] = []
    counts: dict[str, int] = {}
    for c in struct.constraints:
        base = f"{struct.name}.{constraint_slug(c)}"
        counts[base] = counts.get(base, 0) + 1
        ids.append(base if counts[base] == 1 else f"{base}.{counts[base]}")
    return ids


def qualify(prefix: str, name: str) -> str:
    return f"{prefix}.{name}" if prefix else name


def instance_id(prop_id: str, prefix: str) -> str:
    return f"{prop_id}@{prefix}" if prefix else prop_id


def base_property(instance: str) -> str:
    """Strip the instance suffix from a property instance id."""
    return instance.split("@", 1)[0]


def leaf(var: str) -> str:
    return var.rsplit(".", 1)[-1]
