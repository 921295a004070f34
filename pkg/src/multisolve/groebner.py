"""Degree-bounded Groebner bases over GF(q)[x]/L via Macaulay-matrix rounds.

The engine keeps an interreduced *active* basis.  Each round picks every pending
critical pair of the smallest degree (at most the bound ``D``), expands them
into a Macaulay matrix by symbolic preprocessing, computes its reduced row
echelon form and adopts the rows whose leading monomial is new.  Field
equations never appear as polynomials: over GF(2) a monomial is squarefree by
construction, and the critical pairs ``(f, x^q - x)`` are generated directly as
the rows ``x^(q-e) * f``.

Bounded runs stop once no pair of degree ``<= D`` is left; the returned basis
still generates the input ideal because an active element is only dropped after
it has been reduced against its replacement.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .gfpoly import DEGREVLEX, MonomialOrder, PolyRing, Polynomial, PolynomialError

__all__ = [
    "GeneratorSet",
    "GBResult",
    "EngineConfig",
    "ResourceLimitError",
    "groebner_bounded",
    "groebner_complete",
    "reduce_set",
    "normal_form",
    "macaulay_bound",
    "gb_cost_estimate",
    "exp_bound",
]

DEFAULT_CAP = 2**22


class ResourceLimitError(RuntimeError):
    """Macaulay matrix exceeded the configured row or column cap."""

    def __init__(self, message: str, prefix=None):
        super().__init__(message)
        self.prefix = prefix


class GeneratorSet:
    """Finite generating set of an ideal of ``GF(q)[x]/L``.

    Zero polynomials are dropped, duplicates merged and generators made monic.
    A set containing a nonzero constant is canonicalized to ``{1}``.
    """

    __slots__ = ("polys", "ring", "order")

    def __init__(self, polys: Iterable[Polynomial], ring: PolyRing | None = None,
                 order: MonomialOrder = DEGREVLEX):
        polys = [p for p in polys if p]
        if ring is None:
            if not polys:
                raise PolynomialError("ring is required for an empty generator set")
            ring = polys[0].ring
        for p in polys:
            if p.ring != ring:
                raise PolynomialError("generators from different rings")
        self.ring = ring
        self.order = order
        if any(p.is_constant() for p in polys):
            self.polys: tuple[Polynomial, ...] = (ring.one(),)
            return
        key = order.key(ring)
        uniq = {}
        for p in polys:
            p = p.monic(order)
            uniq.setdefault(frozenset(p.terms.items()), p)
        self.polys = tuple(sorted(uniq.values(), key=lambda p: (key(p.leading_monomial(order)), len(p), sorted(p.terms)), reverse=True))

    def __iter__(self):
        return iter(self.polys)

    def __len__(self):
        return len(self.polys)

    def __eq__(self, other):
        if not isinstance(other, GeneratorSet):
            return NotImplemented
        return self.ring == other.ring and set(self.polys) == set(other.polys)

    def __hash__(self):
        return hash((self.ring, frozenset(self.polys)))

    def __repr__(self):
        return "{" + ", ".join(str(p) for p in self.polys) + "}"

    def __reduce__(self):
        return (GeneratorSet, (self.polys, self.ring, self.order))

    def is_one(self) -> bool:
        return len(self.polys) == 1 and self.polys[0].is_one()

    def max_degree(self) -> int:
        return max((p.degree() for p in self.polys), default=-1)

    def var_mask(self) -> int:
        mask = 0
        for p in self.polys:
            mask |= p.var_mask()
        return mask

    def variables(self) -> list[int]:
        mask = self.var_mask()
        return [i for i in range(mask.bit_length()) if mask >> i & 1]

    def union(self, other: Iterable[Polynomial]) -> "GeneratorSet":
        return GeneratorSet(list(self.polys) + list(other), self.ring, self.order)

    def evaluate(self, assignment) -> "GeneratorSet":
        return GeneratorSet([p.evaluate(assignment) for p in self.polys], self.ring, self.order)

    def to_text(self) -> list[str]:
        return [p.to_text() for p in self.polys]


@dataclass
class EngineConfig:
    max_rows: int = DEFAULT_CAP
    max_cols: int = DEFAULT_CAP
    trace: Callable[[dict], None] | None = None
    chain_criterion: bool = True


@dataclass
class GBResult:
    basis: GeneratorSet
    complete: bool
    max_degree_seen: int
    stats: dict = field(default_factory=dict)


class _Elem:
    __slots__ = ("id", "poly", "lm", "lm_deg", "lm_vars")

    def __init__(self, ident, poly, lm, ring):
        self.id = ident
        self.poly = poly
        self.lm = lm
        self.lm_deg = ring.mono_degree(lm)
        self.lm_vars = ring.var_mask(lm)


class _Engine:
    def __init__(self, ring: PolyRing, order: MonomialOrder, config: EngineConfig):
        self.ring = ring
        self.q = ring.q
        self.order = order
        self.key = order.key(ring)
        self.config = config
        self.active: dict[int, _Elem] = {}
        self.next_id = 0
        # pending pairs: (degree, kind, a, b_or_var, lcm)
        self.pairs: dict[tuple, tuple] = {}
        self.done: set[tuple[int, int]] = set()
        self.inconsistent = False
        self.stats = {"rounds": 0, "rows": 0, "cols": 0, "max_rows": 0, "max_cols": 0,
                      "pairs_reduced": 0, "elim_seconds": 0.0}
        self.max_degree_seen = 0

    # -- reduction -----------------------------------------------------------
    def find_reducer(self, m: int, skip: int = -1) -> _Elem | None:
        if self.q == 2:
            for e in self.active.values():
                if e.lm & ~m == 0 and e.id != skip:
                    return e
            return None
        divides = self.ring.mono_divides
        for e in self.active.values():
            if e.id != skip and divides(e.lm, m):
                return e
        return None

    def nf(self, p: Polynomial, skip: int = -1) -> Polynomial:
        """Full normal form of ``p`` with respect to the active basis."""
        if not p:
            return p
        key, ring = self.key, self.ring
        if self.q == 2:
            work = set(p.terms)
            heap = [(-key(m), m) for m in work]
            heapq.heapify(heap)
            result = {}
            while heap:
                _, m = heapq.heappop(heap)
                if m not in work:
                    continue
                work.discard(m)
                r = self.find_reducer(m, skip)
                if r is None:
                    result[m] = 1
                    continue
                u = m ^ r.lm
                for t in r.poly.terms:
                    mt = t | u
                    if mt == m:
                        continue
                    if mt in work:
                        work.discard(mt)
                    else:
                        work.add(mt)
                        heapq.heappush(heap, (-key(mt), mt))
            return Polynomial(ring, result)
        q, fld = self.q, ring.field
        work = dict(p.terms)
        heap = [(-key(m), m) for m in work]
        heapq.heapify(heap)
        result = {}
        while heap:
            _, m = heapq.heappop(heap)
            c = work.pop(m, 0)
            if not c:
                continue
            r = self.find_reducer(m, skip)
            if r is None:
                result[m] = c
                continue
            u = ring.mono_div(m, r.lm)
            f = fld.neg(c)  # r is monic
            for t, ct in r.poly.terms.items():
                mt = ring.mono_mul(t, u)
                if mt == m:
                    continue
                v = (work.get(mt, 0) + f * ct) % q
                if v:
                    if mt not in work:
                        heapq.heappush(heap, (-key(mt), mt))
                    work[mt] = v
                else:
                    work.pop(mt, None)
        return Polynomial(ring, result)

    # -- basis maintenance ----------------------------------------------------
    def insert(self, polys: Sequence[Polynomial]) -> None:
        """Reduce and adopt new polynomials, keeping the active set interreduced."""
        queue = list(polys)
        while queue and not self.inconsistent:
            p = self.nf(queue.pop(0))
            if not p:
                continue
            if p.is_constant():
                self.inconsistent = True
                return
            p = p.monic(self.order)
            lm = p.leading_monomial(self.order)
            e = _Elem(self.next_id, p, lm, self.ring)
            self.next_id += 1
            divides = self.ring.mono_divides
            displaced = [g for g in self.active.values() if divides(lm, g.lm)]
            for g in displaced:
                del self.active[g.id]
                self.pairs = {k: v for k, v in self.pairs.items() if g.id not in (v[2], v[3] if v[1] == 0 else -1)}
            self._add_pairs(e)
            self.active[e.id] = e
            queue.extend(g.poly for g in displaced)

    def _add_pairs(self, e: _Elem) -> None:
        ring = self.ring
        for g in self.active.values():
            if ring.mono_coprime(e.lm, g.lm):
                self.done.add((g.id, e.id))
                continue
            lcm = ring.mono_lcm(e.lm, g.lm)
            self.pairs[(0, g.id, e.id)] = (ring.mono_degree(lcm), 0, g.id, e.id, lcm)
        q = self.q
        for i, ex in ring.exponents(e.lm).items():
            deg = e.lm_deg + q - ex
            self.pairs[(1, e.id, i)] = (deg, 1, e.id, i, None)

    def _chain_skip(self, a: int, b: int, lcm: int) -> bool:
        divides = self.ring.mono_divides
        done = self.done
        for c in self.active.values():
            if c.id in (a, b) or not divides(c.lm, lcm):
                continue
            if (min(a, c.id), max(a, c.id)) in done and (min(b, c.id), max(b, c.id)) in done:
                return True
        return False

    # -- main loop ---------------------------------------------------------------
    def run(self, bound: int | None) -> None:
        while self.pairs and not self.inconsistent:
            d = min(v[0] for v in self.pairs.values())
            if bound is not None and d > bound:
                return
            selected = [(k, v) for k, v in self.pairs.items() if v[0] == d]
            for k, _ in selected:
                del self.pairs[k]
            rows = {}
            for _, (deg, kind, a, b, lcm) in sorted(selected, key=lambda kv: kv[0]):
                if kind == 0:
                    if self.config.chain_criterion and self._chain_skip(a, b, lcm):
                        self.done.add((a, b))
                        continue
                    for ident in (a, b):
                        g = self.active[ident]
                        u = self.ring.mono_div(lcm, g.lm)
                        rows.setdefault((ident, u), g.poly.mul_monomial(u) if u else g.poly)
                    self.done.add((a, b))
                else:
                    g = self.active[a]
                    ex = self.ring.exponents(g.lm)[b]
                    u = self.ring.monomial({b: self.q - ex})
                    rows.setdefault((a, u), g.poly.mul_monomial(u))
            self.stats["pairs_reduced"] += len(selected)
            if not rows:
                continue
            self.max_degree_seen = max(self.max_degree_seen, d)
            new = self._reduce_rows(rows, d)
            self.insert(new)

    def _reduce_rows(self, rows: dict, degree: int) -> list[Polynomial]:
        ring, key = self.ring, self.key
        monos = set()
        for p in rows.values():
            monos.update(p.terms)
        todo = list(monos)
        seen = set()
        reducible = set()
        cfg = self.config
        while todo:
            m = todo.pop()
            if m in seen:
                continue
            seen.add(m)
            r = self.find_reducer(m)
            if r is None:
                continue
            reducible.add(m)
            u = ring.mono_div(m, r.lm)
            k = (r.id, u)
            if k in rows:
                continue
            row = r.poly.mul_monomial(u) if u else r.poly
            rows[k] = row
            for t in row.terms:
                if t not in monos:
                    monos.add(t)
                    todo.append(t)
            if len(rows) > cfg.max_rows:
                raise ResourceLimitError(f"Macaulay matrix exceeds {cfg.max_rows} rows")
        if len(monos) > cfg.max_cols:
            raise ResourceLimitError(f"Macaulay matrix exceeds {cfg.max_cols} columns")
        cols = sorted(monos, key=key)  # ascending: bit position = index
        pos = {m: i for i, m in enumerate(cols)}
        nrows, ncols = len(rows), len(cols)
        st = self.stats
        st["rounds"] += 1
        st["rows"] += nrows
        st["cols"] += ncols
        st["max_rows"] = max(st["max_rows"], nrows)
        st["max_cols"] = max(st["max_cols"], ncols)
        t0 = time.perf_counter()
        if self.q == 2:
            ints = []
            for p in rows.values():
                r = 0
                for m in p.terms:
                    r |= 1 << pos[m]
                ints.append(r)
            old_leads = {pos[m] for m in reducible}
            echelon = _rref_gf2(ints)
            out = []
            for lead, r in echelon.items():
                if lead in old_leads:
                    continue
                terms = {}
                while r:
                    b = r.bit_length() - 1
                    terms[cols[b]] = 1
                    r ^= 1 << b
                out.append(Polynomial(ring, terms))
        else:
            dense = [{pos[m]: c for m, c in p.terms.items()} for p in rows.values()]
            old_leads = {pos[m] for m in reducible}
            echelon = _rref_gfq(dense, self.q)
            out = [Polynomial(ring, {cols[i]: c for i, c in r.items()})
                   for lead, r in echelon.items() if lead not in old_leads]
        elapsed = time.perf_counter() - t0
        st["elim_seconds"] += elapsed
        if cfg.trace is not None:
            cfg.trace({"degree": degree, "rows": nrows, "cols": ncols,
                       "new_pivots": len(out), "seconds": elapsed})
        out.sort(key=lambda p: key(p.leading_monomial(self.order)))
        return out

    def result_basis(self) -> GeneratorSet:
        ring = self.ring
        if self.inconsistent:
            return GeneratorSet([ring.one()], ring, self.order)
        reduced = []
        for e in list(self.active.values()):
            tail = e.poly - Polynomial(ring, {e.lm: 1})
            reduced.append(Polynomial(ring, {e.lm: 1}) + self.nf(tail, skip=e.id))
        return GeneratorSet(reduced, ring, self.order)


def _rref_gf2(rows: list[int]) -> dict[int, int]:
    pivots: dict[int, int] = {}
    for r in rows:
        while r:
            b = r.bit_length() - 1
            p = pivots.get(b)
            if p is None:
                pivots[b] = r
                break
            r ^= p
    mask = 0
    for b in sorted(pivots):
        r = pivots[b]
        x = r & mask
        while x:
            t = x.bit_length() - 1
            r ^= pivots[t]
            x ^= 1 << t
        pivots[b] = r
        mask |= 1 << b
    return pivots


def _rref_gfq(rows: list[dict[int, int]], q: int) -> dict[int, dict[int, int]]:
    pivots: dict[int, dict[int, int]] = {}
    for r in rows:
        r = dict(r)
        while r:
            lead = max(r)
            p = pivots.get(lead)
            if p is None:
                inv = pow(r[lead], q - 2, q)
                pivots[lead] = {i: (c * inv) % q for i, c in r.items()}
                break
            f = r[lead]
            for i, c in p.items():
                v = (r.get(i, 0) - f * c) % q
                if v:
                    r[i] = v
                else:
                    r.pop(i, None)
    for lead in sorted(pivots):
        r = pivots[lead]
        for b in sorted((i for i in r if i != lead and i in pivots), reverse=True):
            f = r.get(b, 0)
            if not f:
                continue
            for i, c in pivots[b].items():
                v = (r.get(i, 0) - f * c) % q
                if v:
                    r[i] = v
                else:
                    r.pop(i, None)
    return pivots


def _as_generator_set(H) -> GeneratorSet:
    return H if isinstance(H, GeneratorSet) else GeneratorSet(list(H))


def groebner_bounded(H, D: int | None, config: EngineConfig | None = None) -> GBResult:
    """Groebner basis truncated at critical-pair degree ``D`` (``None``: unbounded).

    Field equations for every variable are adjoined implicitly.
    """
    if D is not None and D < 1:
        raise ValueError("degree bound D must be >= 1")
    H = _as_generator_set(H)
    config = config or EngineConfig()
    eng = _Engine(H.ring, H.order, config)
    key = eng.key
    eng.insert(sorted(H.polys, key=lambda p: (key(p.leading_monomial(H.order)), len(p))))
    eng.run(D)
    basis = eng.result_basis()
    complete = eng.inconsistent or not eng.pairs
    return GBResult(basis, complete, eng.max_degree_seen, dict(eng.stats))


def groebner_complete(H, config: EngineConfig | None = None) -> GBResult:
    return groebner_bounded(H, None, config)


def normal_form(p: Polynomial, R: GeneratorSet) -> Polynomial:
    """Complete reduction of ``p`` by the set ``R`` (field equations implicit)."""
    eng = _Engine(R.ring, R.order, EngineConfig())
    for g in R.polys:
        g = g.monic(R.order)
        e = _Elem(eng.next_id, g, g.leading_monomial(R.order), R.ring)
        eng.next_id += 1
        eng.active[e.id] = e
    return eng.nf(p)


def reduce_set(G2, R) -> GeneratorSet:
    """Reduce every polynomial of ``G2`` completely by ``R``; zero results dropped."""
    G2, R = _as_generator_set(G2), _as_generator_set(R) if not isinstance(R, GeneratorSet) else R
    if R.is_one():
        return GeneratorSet([], G2.ring, G2.order)
    eng = _Engine(R.ring, R.order, EngineConfig())
    for g in R.polys:
        g = g.monic(R.order)
        e = _Elem(eng.next_id, g, g.leading_monomial(R.order), R.ring)
        eng.next_id += 1
        eng.active[e.id] = e
    return GeneratorSet([eng.nf(p) for p in G2.polys], G2.ring, G2.order)


# -- cost estimators ------------------------------------------------------------

def macaulay_bound(n: int, q: int, d: int | None = None) -> tuple[int, int]:
    """Solving-degree bounds ``((n+1)(d-1)+1, n^2(q-1)+n(q-2))``.

    ``d`` defaults to ``n(q-1)``, the largest degree of a normal-form polynomial.
    """
    if n < 2 or q < 2:
        raise ValueError("need n >= 2 and q >= 2")
    if d is None:
        d = n * (q - 1)
    if d < max(q, 1):
        raise ValueError("d must be at least max(q, 1)")
    return (n + 1) * (d - 1) + 1, n * n * (q - 1) + n * (q - 2)


def gb_cost_estimate(n: int, d_s: int, omega: float) -> float:
    """log2 of ``C(n + d_s, d_s) ** omega``."""
    if not 2 < omega <= 3:
        raise ValueError("omega must satisfy 2 < omega <= 3")
    if n < 0 or d_s < 0:
        raise ValueError("n and d_s must be nonnegative")
    return omega * math.log2(math.comb(n + d_s, d_s))


def exp_bound(n: int, q: int, omega: float) -> float:
    """log2 of ``k ** (k * omega)`` with ``k = n^2 q``."""
    if not 2 < omega <= 3:
        raise ValueError("omega must satisfy 2 < omega <= 3")
    if n < max(2, q - 1):
        raise ValueError("need n >= max(2, q - 1)")
    k = n * n * q
    return k * omega * math.log2(k)
