"""Path formulas: the conjunction of constraints describing one layout."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..format.ast import Constraint, Num, Ref
from ..format.printer import format_constraint
from ..graph import GraphPath

DOMAIN, NODE, EDGE = "domain", "node", "edge"


@dataclass(frozen=True)
class Conjunct:
    id: str
    constraint: Constraint
    origin: str  # domain | node | edge
    struct: str = ""  # declaring struct, for node conjuncts

    def render(self) -> str:
        if self.origin == DOMAIN:
            var = self.constraint.lhs.name
            bits = self.constraint.rhs.value.bit_length()
            return f"0 <= {var} <= 2^{bits}-1"
        return format_constraint(self.constraint)


@dataclass(frozen=True)
class PathFormula:
    variables: tuple[tuple[str, int], ...]  # (qualified name, bit width) in wire order
    conjuncts: tuple[Conjunct, ...]
    path: Optional[GraphPath] = None

    @property
    def widths(self) -> dict[str, int]:
        return dict(self.variables)

    def conjunct(self, cid: str) -> Conjunct:
        for c in self.conjuncts:
            if c.id == cid:
                return c
        raise KeyError(cid)

    @property
    def field_properties(self) -> list[Conjunct]:
        return [c for c in self.conjuncts if c.origin == NODE]

    def replace(self, cid: str, new: Constraint) -> "PathFormula":
        """A copy with conjunct ``cid`` replaced by ``new``."""
        self.conjunct(cid)
        conj = tuple(
            Conjunct(c.id, new, c.origin, c.struct) if c.id == cid else c for c in self.conjuncts
        )
        return PathFormula(self.variables, conj, self.path)

    def holds(self, assignment: dict[str, int]) -> bool:
        return all(c.constraint.holds(assignment) for c in self.conjuncts)

    def render(self) -> str:
        return " && ".join(c.render() for c in self.conjuncts) or "true"


def domain_conjunct(var: str, bits: int) -> Conjunct:
    return Conjunct(f"dom:{var}", Constraint(Ref(var), "<=", Num((1 << bits) - 1)), DOMAIN)


def path_to_formula(path: GraphPath) -> PathFormula:
    """Encode ``path`` as domain bounds, node constraints and edge conditions.

    Conjuncts follow the path: a field's domain bound and its own
    constraints come at the field, and the conditions on an edge come
    right before the field the edge leads into.
    """
    variables = []
    conjuncts: list[Conjunct] = []
    for kind, item in path.steps:
        if kind == "edge":
            size = path.array_bytes(item.var) if item.kind == "length" and item.unit == "bytes" else None
            conjuncts.append(Conjunct(item.property_id, item.constraint(size), EDGE))
            continue
        variables.append((item.name, item.type.bits))
        conjuncts.append(domain_conjunct(item.name, item.type.bits))
        for nc in item.constraints:
            conjuncts.append(Conjunct(nc.property_id, nc.constraint, NODE, item.struct))
    return PathFormula(tuple(variables), tuple(conjuncts), path)
