"""GBElimLin: bounded Groebner basis followed by elimination of linear variables."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .gfpoly import PolyRing, Polynomial, PolynomialError
from .groebner import EngineConfig, GeneratorSet, groebner_bounded, reduce_set

__all__ = [
    "FULLY_LINEAR",
    "REDUCED",
    "ElimOutcome",
    "CyclicSubstitution",
    "UnresolvedVariable",
    "gb_elim_lin",
    "eliminate_via",
    "extend_solution",
    "linear_records",
]

FULLY_LINEAR = "FullyLinear"
REDUCED = "Reduced"

Record = tuple[int, Polynomial]


class CyclicSubstitution(PolynomialError):
    pass


class UnresolvedVariable(PolynomialError):
    pass


@dataclass
class ElimOutcome:
    """Result of one GBElimLin call.

    ``nrv`` counts the variables left in a Reduced basis; it is 0 for
    FullyLinear outcomes, whose basis has no nonlinear part left to solve.
    """

    kind: str
    basis: GeneratorSet
    eliminated: list[Record] = field(default_factory=list)
    nrv: int = 0
    complete: bool = False

    @property
    def inconsistent(self) -> bool:
        return self.basis.is_one()

    def solution(self) -> dict[int, int] | None:
        """Assignment of every ring variable, when the outcome pins one down."""
        if self.kind != FULLY_LINEAR or self.inconsistent:
            return None
        ring = self.basis.ring
        partial = {}
        for var, tail in linear_records(self.basis):
            if not tail.is_constant():
                return None
            partial[var] = tail.constant_value()
        try:
            full = extend_solution(partial, self.eliminated)
        except UnresolvedVariable:
            return None
        if len(full) != ring.n:
            return None
        return full

    def to_json(self) -> dict:
        ring = self.basis.ring
        return {
            "kind": self.kind,
            "nrv": self.nrv,
            "complete": self.complete,
            "basis": self.basis.to_text(),
            "eliminated": [[ring.names[v], f.to_text()] for v, f in self.eliminated],
        }

    @classmethod
    def from_json(cls, data: Mapping, ring: PolyRing) -> "ElimOutcome":
        basis = GeneratorSet([ring.parse(s) for s in data["basis"]], ring)
        elim = [(ring.index[v], ring.parse(f)) for v, f in data["eliminated"]]
        return cls(data["kind"], basis, elim, int(data["nrv"]), bool(data.get("complete", False)))


def linear_records(G: Iterable[Polynomial]) -> list[Record]:
    """``(x, f)`` with ``x = f`` for each linear polynomial, ``x`` its leading variable."""
    out = []
    for g in G:
        if g.degree() != 1:
            continue
        g = g.monic()
        var = g.ring.mono_vars(g.leading_monomial())[0]
        lead = g.ring.var(var)
        out.append((var, -(g - lead)))
    out.sort(key=lambda r: r[0])
    return out


def gb_elim_lin(H, D: int, config: EngineConfig | None = None,
                eliminated: Sequence[Record] = ()) -> ElimOutcome:
    """Run GBElimLin on ``H`` with degree bound ``D``.

    ``eliminated`` holds records from earlier eliminations (for example guessed
    variables); they are kept in front of the records produced here.
    """
    if not isinstance(H, GeneratorSet):
        H = GeneratorSet(list(H))
    res = groebner_bounded(H, D, config)
    G = res.basis
    prior = list(eliminated)
    if G.max_degree() <= 1:
        return ElimOutcome(FULLY_LINEAR, G, prior, 0, res.complete)
    G1 = GeneratorSet([g for g in G if g.degree() <= 1], G.ring, G.order)
    G2 = GeneratorSet([g for g in G if g.degree() > 1], G.ring, G.order)
    # field equations of the occurring variables are implicit in the ring
    red = reduce_set(G2, G1)
    records = prior + linear_records(G1)
    if red.is_one():
        return ElimOutcome(FULLY_LINEAR, red, records, 0, True)
    if red.max_degree() <= 1:
        return ElimOutcome(FULLY_LINEAR, G1.union(red), prior, 0, res.complete)
    return ElimOutcome(REDUCED, red, records, len(red.variables()), res.complete)


def _resolve(explicit: Sequence[Record]) -> dict[int, Polynomial]:
    images: dict[int, Polynomial] = {}
    pending = {v: f for v, f in explicit}
    state: dict[int, int] = {}

    def visit(v: int) -> Polynomial:
        if v in images:
            return images[v]
        if state.get(v) == 1:
            raise CyclicSubstitution(f"cyclic substitution through variable {v}")
        state[v] = 1
        f = pending[v]
        deps = {u: visit(u) for u in f.variables() if u in pending}
        images[v] = f.substitute(deps) if deps else f
        state[v] = 2
        return images[v]

    for v in pending:
        visit(v)
    return images


def eliminate_via(explicit: Sequence[Record], J) -> GeneratorSet:
    """Apply the substitution homomorphism ``x -> f`` to every generator of ``J``."""
    if not isinstance(J, GeneratorSet):
        J = GeneratorSet(list(J))
    if not explicit:
        return J
    images = _resolve(explicit)
    return GeneratorSet([p.substitute(images) for p in J], J.ring, J.order)


def extend_solution(partial: Mapping[int, int], eliminated: Sequence[Record]) -> dict[int, int]:
    """Lift a solution of the eliminated system back through the recorded substitutions."""
    full = dict(partial)
    for var, f in reversed(eliminated):
        if var in full:
            continue
        v = f.evaluate(full)
        if not v.is_constant():
            names = [f.ring.names[i] for i in v.variables()]
            raise UnresolvedVariable(f"cannot resolve {f.ring.names[var]}: unassigned {names}")
        full[var] = v.constant_value()
    return full
