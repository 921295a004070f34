"""Difference stream ciphers: registers driven by explicit difference equations.

Register ``i`` has cells ``name_i(0) .. name_i(r_i - 1)``.  One clock shifts
every register down by one cell and writes ``f_i`` (evaluated on the old state)
into the top cell; the keystream bit at clock ``t`` is ``g`` of the state.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .gfpoly import PolyRing, Polynomial, PolynomialError, UniverseMismatch, product_order
from .groebner import EngineConfig, GeneratorSet, groebner_complete

__all__ = [
    "DifferenceCipherSpec",
    "EndoMap",
    "NotInvertible",
    "shift",
    "transition_endo",
    "invert_endo",
    "clock",
    "keystream",
    "state_trajectory",
    "keystream_polynomials",
    "keystream_ideal",
    "format_stream",
    "parse_stream",
]

_CELL_RE = re.compile(r"^(?P<base>[A-Za-z_][A-Za-z0-9_']*)\((?P<idx>\d+)\)$")


class NotInvertible(PolynomialError):
    """The endomorphism has no polynomial inverse; ``basis`` is the offending GB."""

    def __init__(self, message: str, basis: GeneratorSet | None = None):
        super().__init__(message)
        self.basis = basis


@dataclass(frozen=True)
class DifferenceCipherSpec:
    registers: tuple[tuple[str, int], ...]
    updates: tuple[Polynomial, ...]
    keystream: Polynomial
    u: int = 0
    q: int = 2

    def __post_init__(self):
        if len(self.updates) != len(self.registers):
            raise PolynomialError("one update polynomial per register")
        ring = self.ring
        for p in (*self.updates, self.keystream):
            if p.ring != ring:
                raise UniverseMismatch("update and keystream polynomials must use the state variables")

    @property
    def ring(self) -> PolyRing:
        return self.updates[0].ring if self.updates else self.keystream.ring

    @property
    def r(self) -> int:
        return sum(length for _, length in self.registers)

    def offsets(self) -> list[int]:
        out, acc = [], 0
        for _, length in self.registers:
            out.append(acc)
            acc += length
        return out

    @staticmethod
    def state_ring(registers: Sequence[tuple[str, int]], q: int = 2) -> PolyRing:
        return PolyRing([f"{name}({j})" for name, length in registers for j in range(length)], q)

    @classmethod
    def build(cls, registers: Sequence[tuple[str, int]], updates: Sequence[str], keystream: str,
              u: int = 0, q: int = 2) -> "DifferenceCipherSpec":
        ring = cls.state_ring(registers, q)
        return cls(tuple((n, int(r)) for n, r in registers), tuple(ring.parse(f) for f in updates),
                   ring.parse(keystream), u, q)

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "u": self.u,
            "registers": [{"name": n, "length": r, "update": f.to_text()}
                          for (n, r), f in zip(self.registers, self.updates)],
            "keystream": self.keystream.to_text(),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "DifferenceCipherSpec":
        regs = [(r["name"], int(r["length"])) for r in data["registers"]]
        return cls.build(regs, [r["update"] for r in data["registers"]], data["keystream"],
                         int(data.get("u", 0)), int(data.get("q", 2)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DifferenceCipherSpec":
        return cls.from_json(json.loads(Path(path).read_text()))


def shift(p: Polynomial, t: int, ring: PolyRing | None = None) -> Polynomial:
    """Replace every cell ``name(s)`` by ``name(s + t)``.

    The result lives in ``ring``; by default the source ring extended with the
    shifted names.
    """
    if t < 0:
        raise ValueError("shift amount must be nonnegative")
    if t == 0 and ring is None:
        return p

    def rename(name: str) -> str:
        m = _CELL_RE.match(name)
        if m is None:
            raise UniverseMismatch(f"{name!r} is not a register cell")
        return f"{m['base']}({int(m['idx']) + t})"

    if ring is None:
        ring = p.ring.extended(rename(p.ring.names[i]) for i in p.variables())
    return p.to_ring(ring, rename)


class EndoMap:
    """Algebra endomorphism given by the image of every variable of ``ring``."""

    def __init__(self, ring: PolyRing, images: Mapping[int, Polynomial]):
        self.ring = ring
        self.images = {i: images.get(i, ring.var(i)) for i in range(ring.n)}

    def __call__(self, p: Polynomial) -> Polynomial:
        return self.apply(p)

    def __eq__(self, other):
        return isinstance(other, EndoMap) and self.ring == other.ring and self.images == other.images

    def apply(self, p: Polynomial) -> Polynomial:
        if p.is_constant():
            return p
        return p.substitute(self.images)

    def power(self, t: int, p: Polynomial) -> Polynomial:
        for _ in range(t):
            p = self.apply(p)
        return p

    def compose(self, other: "EndoMap") -> "EndoMap":
        """``self`` after ``other``: ``x -> self(other(x))``."""
        return EndoMap(self.ring, {i: self.apply(f) for i, f in other.images.items()})

    def image(self, name: str) -> Polynomial:
        return self.images[self.ring.var_index(name)]

    def to_text(self) -> list[str]:
        return [f"{self.ring.names[i]} -> {f.to_text()}" for i, f in self.images.items()]

    def to_json(self) -> dict:
        return {"variables": list(self.ring.names), "q": self.ring.q,
                "images": {self.ring.names[i]: f.to_text() for i, f in self.images.items()}}


def transition_endo(spec: DifferenceCipherSpec) -> EndoMap:
    ring = spec.ring
    images = {}
    for off, (_, length), f in zip(spec.offsets(), spec.registers, spec.updates):
        for j in range(length - 1):
            images[off + j] = ring.var(off + j + 1)
        if length:
            images[off + length - 1] = f
    return EndoMap(ring, images)


def invert_endo(m: EndoMap, config: EngineConfig | None = None) -> EndoMap:
    """Inverse of an endomorphism ``x_i -> g_i``, or :class:`NotInvertible`.

    Computes the reduced Groebner basis of ``<x'_i - g_i(x)>`` for a product
    order with the ``x`` block above the ``x'`` block; the map is invertible
    exactly when that basis is ``{x_i - g'_i(x')}``.
    """
    ring = m.ring
    n = ring.n
    primed = [f"{name}'" if not _CELL_RE.match(name) else _prime_cell(name) for name in ring.names]
    big = PolyRing(list(ring.names) + primed, ring.q)
    order = product_order(n)
    gens = [big.var(n + i) - m.images[i].to_ring(big) for i in range(n)]
    G = groebner_complete(GeneratorSet(gens, big, order), config).basis
    back = {name: ring.names[i] for i, name in enumerate(primed)}
    images = {}
    low = (1 << n) - 1
    for g in G:
        lm = g.leading_monomial(order)
        if big.mono_degree(lm) != 1:
            raise NotInvertible("basis has a leading term that is not a single variable", G)
        (v,) = big.mono_vars(lm)
        tail = -(g.monic(order) - big.var(v))
        if v >= n or tail.var_mask() & low:
            raise NotInvertible("basis element not of the form x_i - g'_i(x')", G)
        images[v] = tail.to_ring(ring, lambda s: back.get(s, s))
    if len(images) != n:
        raise NotInvertible("basis does not solve for every variable", G)
    return EndoMap(ring, images)


def _prime_cell(name: str) -> str:
    m = _CELL_RE.match(name)
    return f"{m['base']}'({m['idx']})"


# -- concrete semantics ------------------------------------------------------------

def clock(spec: DifferenceCipherSpec, state: Sequence[int]) -> list[int]:
    """One application of the transition map to a concrete state."""
    if len(state) != spec.r:
        raise ValueError(f"state must have {spec.r} cells")
    out = list(state)
    for off, (_, length), f in zip(spec.offsets(), spec.registers, spec.updates):
        if not length:
            continue
        out[off:off + length - 1] = state[off + 1:off + length]
        out[off + length - 1] = f.value_at(state)
    return out


def keystream(spec: DifferenceCipherSpec, state: Sequence[int], start: int, count: int) -> list[int]:
    """Clock ``start`` times silently, then emit ``count`` keystream values."""
    s = list(state)
    for _ in range(start):
        s = clock(spec, s)
    out = []
    for _ in range(count):
        out.append(spec.keystream.value_at(s))
        s = clock(spec, s)
    return out


# -- symbolic semantics --------------------------------------------------------------

def state_trajectory(spec: DifferenceCipherSpec, clocks: int,
                     initial: Sequence[Polynomial] | None = None) -> Iterable[list[Polynomial]]:
    """Yield the symbolic states ``T^t(x)`` for ``t = 0 .. clocks``.

    Each state lists, per cell, the polynomial in the initial variables giving
    that cell after ``t`` clocks.  ``initial`` may substitute the initial
    cells (for instance after eliminating some of them).
    """
    ring = spec.ring
    cells = list(initial) if initial is not None else ring.gens()
    target = cells[0].ring if cells else ring
    idx_upd = [(off, length, f) for off, (_, length), f in zip(spec.offsets(), spec.registers, spec.updates)]
    yield cells
    for _ in range(clocks):
        images = dict(enumerate(cells))
        new = list(cells)
        for off, length, f in idx_upd:
            if not length:
                continue
            new[off:off + length - 1] = cells[off + 1:off + length]
            new[off + length - 1] = f.substitute(images, target)
        cells = new
        yield cells


def keystream_polynomials(spec: DifferenceCipherSpec, start: int, count: int,
                          initial: Sequence[Polynomial] | None = None) -> list[Polynomial]:
    """``T^t(g)`` for ``start <= t < start + count``."""
    out = []
    if count <= 0:
        return out
    target = initial[0].ring if initial else spec.ring
    for t, cells in enumerate(state_trajectory(spec, start + count - 1, initial)):
        if t >= start:
            out.append(spec.keystream.substitute(dict(enumerate(cells)), target))
    return out


def keystream_ideal(spec: DifferenceCipherSpec, u: int, h: int, observed: Sequence[int]) -> GeneratorSet:
    """Generators ``T^t(g) - b(t)`` for ``u <= t < u + h``."""
    if len(observed) != h:
        raise ValueError("need exactly h observed values")
    polys = keystream_polynomials(spec, u, h)
    ring = spec.ring
    return GeneratorSet([p - ring.const(b) for p, b in zip(polys, observed)], ring)


# -- keystream text I/O -----------------------------------------------------------

def format_stream(values: Sequence[int], fmt: str = "bits") -> str:
    if fmt == "bits":
        return "".join(str(int(v)) for v in values)
    if fmt == "hex":
        if any(v not in (0, 1) for v in values):
            raise ValueError("hex output needs binary values")
        bits = "".join(str(int(v)) for v in values)
        pad = (-len(bits)) % 4
        return f"{len(bits)}:" + (format(int(bits + "0" * pad, 2), f"0{(len(bits) + pad) // 4}x") if bits else "")
    raise ValueError(f"unknown stream format {fmt!r}")


def parse_stream(text: str) -> list[int]:
    """Read a stream written by :func:`format_stream` (``bits`` or ``N:hex``)."""
    text = text.strip()
    if ":" in text:
        n, hexpart = text.split(":", 1)
        n = int(n)
        if n == 0:
            return []
        bits = format(int(hexpart, 16), f"0{len(hexpart) * 4}b")
        return [int(b) for b in bits[:n]]
    return [int(c) for c in text if not c.isspace()]
