"""Shared oracles: brute-force solution sets and random planted systems."""

from __future__ import annotations

import functools
import itertools

import numpy as np

from multisolve.gfpoly import PolyRing, Polynomial
from multisolve.groebner import GeneratorSet


def points(ring: PolyRing) -> list[tuple[int, ...]]:
    return list(itertools.product(range(ring.q), repeat=ring.n))


def solutions(polys, ring: PolyRing) -> set[tuple[int, ...]]:
    """All common zeros in F^n by direct evaluation."""
    polys = list(polys)
    if ring.q == 2:
        return _solutions_gf2(polys, ring)
    return {pt for pt in points(ring) if all(p.value_at(pt) == 0 for p in polys)}


def _solutions_gf2(polys, ring):
    n = ring.n
    xs = np.arange(1 << n, dtype=np.int64)
    alive = np.ones(1 << n, dtype=bool)
    for p in polys:
        val = np.zeros(1 << n, dtype=bool)
        for m in p.terms:
            val ^= (xs & m) == m
        alive &= ~val
    return {tuple((int(x) >> i) & 1 for i in range(n)) for x in np.flatnonzero(alive)}


def random_poly(ring: PolyRing, rng: np.random.Generator, terms: int, degree: int) -> Polynomial:
    out = []
    for _ in range(int(rng.integers(1, terms + 1))):
        d = int(rng.integers(0, degree + 1))
        vars_ = rng.choice(ring.n, size=min(d, ring.n), replace=False)
        exps = {int(v): int(rng.integers(1, ring.q)) for v in vars_}
        out.append((int(rng.integers(1, ring.q)), exps))
    return ring.from_terms(out)


def planted_system(ring: PolyRing, rng: np.random.Generator, m: int, terms: int = 6, degree: int = 2):
    """``m`` random polynomials shifted so they vanish at a random point."""
    a = [int(v) for v in rng.integers(0, ring.q, size=ring.n)]
    polys = []
    for _ in range(m):
        p = random_poly(ring, rng, terms, degree)
        p = p - ring.const(p.value_at(a))
        if p:
            polys.append(p)
    return polys, a


def unique_planted(ring, rng, m, terms=6, degree=2, tries=200):
    for _ in range(tries):
        polys, a = planted_system(ring, rng, m, terms, degree)
        if polys and solutions(polys, ring) == {tuple(a)}:
            return polys, a
    raise RuntimeError("no uniquely solvable system found")


def inconsistent(ring, rng, m, terms=6, degree=2, tries=200):
    for _ in range(tries):
        polys = [random_poly(ring, rng, terms, degree) for _ in range(m)]
        polys = [p for p in polys if p]
        if polys and not solutions(polys, ring):
            return polys
    raise RuntimeError("no inconsistent system found")


def lifted_solutions(out, ring: PolyRing) -> set[tuple[int, ...]]:
    """Brute-force a GBElimLin outcome over its own variables, then extend to the full ring."""
    from multisolve.elimlin import extend_solution
    occurring = out.basis.variables() if not out.basis.is_one() else []
    eliminated = {v for v, _ in out.eliminated}
    free = [v for v in range(ring.n) if v not in eliminated and v not in occurring]
    sub = PolyRing([ring.names[v] for v in occurring + free], ring.q)
    idx = {v: i for i, v in enumerate(occurring + free)}
    polys = [p.to_ring(sub) for p in out.basis] if occurring else ([sub.one()] if out.basis.is_one() else [])
    result = set()
    for pt in solutions(polys, sub):
        full = extend_solution({v: pt[idx[v]] for v in idx}, out.eliminated)
        result.add(tuple(full[i] for i in range(ring.n)))
    return result


def linear_solution_basis(ring: PolyRing, a) -> GeneratorSet:
    return GeneratorSet([ring.var(i) - ring.const(v) for i, v in enumerate(a)], ring)


@functools.lru_cache(maxsize=None)
def reduced(seed: int, lengths=(7, 6, 8)):
    """Seeded reduced-Trivium instance, cached across tests (each costs a few seconds)."""
    from multisolve.trivium import reduced_instance, reduced_taps
    return reduced_instance(reduced_taps(*lengths), seed)
