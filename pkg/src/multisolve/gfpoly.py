"""Sparse multivariate polynomials over GF(q) in normal form modulo the field equations.

Monomials are packed integers: variable ``i`` owns a bit field of ``ring.width``
bits starting at bit ``i * ring.width``.  Over GF(2) the width is one bit, so a
monomial is the bitset of its variables and every monomial is squarefree.

Exponents are reduced eagerly with ``e -> ((e - 1) mod (q - 1)) + 1`` so a
polynomial is always the canonical representative of its class modulo
``<x_i^q - x_i>``.  Polynomials are immutable.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

__all__ = [
    "GF",
    "PolyRing",
    "Polynomial",
    "MonomialOrder",
    "DEGREVLEX",
    "LEX",
    "product_order",
    "compare",
    "PolynomialError",
    "ParseError",
    "UniverseMismatch",
]

SUPPORTED_Q = (2, 3, 5, 7)


class PolynomialError(ValueError):
    pass


class UniverseMismatch(PolynomialError, KeyError):
    pass


class ParseError(PolynomialError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class GF:
    """Prime field GF(q); inverses are tabulated, the rest is modular int arithmetic."""

    def __init__(self, q: int):
        if q not in SUPPORTED_Q:
            raise PolynomialError(f"unsupported field size q={q}; supported: {SUPPORTED_Q}")
        self.q = q
        self._inv = [0] + [pow(a, q - 2, q) for a in range(1, q)]

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def neg(self, a: int) -> int:
        return (-a) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def inv(self, a: int) -> int:
        if a % self.q == 0:
            raise ZeroDivisionError("inverse of zero in GF(q)")
        return self._inv[a % self.q]

    def elements(self) -> range:
        return range(self.q)

    def __eq__(self, other):
        return isinstance(other, GF) and other.q == self.q

    def __hash__(self):
        return hash(("GF", self.q))

    def __repr__(self):
        return f"GF({self.q})"


@dataclass(frozen=True)
class MonomialOrder:
    """A monomial order on a ring's variable universe.

    ``kind`` is ``"degrevlex"``, ``"lex"`` or ``"product"``.  Within every
    order ``x_i > x_j`` iff ``i < j``.  The product order compares the block
    ``[0, split)`` first (DegRevLex inside it) and breaks ties with DegRevLex on
    ``[split, n)``.
    """

    kind: str = "degrevlex"
    split: int | None = None

    def __post_init__(self):
        if self.kind not in ("degrevlex", "lex", "product"):
            raise PolynomialError(f"unknown monomial order {self.kind!r}")
        if (self.kind == "product") != (self.split is not None):
            raise PolynomialError("product order needs a split point (and only it)")

    def key(self, ring: "PolyRing") -> Callable[[int], int]:
        """Integer sort key: larger key means larger monomial."""
        cache = ring._order_keys
        fn = cache.get(self)
        if fn is None:
            fn = cache[self] = self._build_key(ring)
        return fn

    def _build_key(self, ring: "PolyRing") -> Callable[[int], int]:
        w, n = ring.width, ring.n
        if self.kind == "degrevlex":
            return _degrevlex_key(ring, 0, n)
        if self.kind == "lex":
            fmask = (1 << w) - 1

            def lex(m: int) -> int:
                k = 0
                for i in range(n):
                    k = (k << w) | ((m >> (i * w)) & fmask)
                return k

            if w == 1:
                def lex(m: int, _n=n) -> int:  # noqa: F811
                    return int(format(m, f"0{_n}b")[::-1], 2) if _n else 0
            return lex
        s = self.split
        if not 0 <= s <= n:
            raise PolynomialError(f"split {s} outside universe of size {n}")
        k1 = _degrevlex_key(ring, 0, s)
        k2 = _degrevlex_key(ring, s, n)
        shift = (n - s) * w + (n * (ring.q - 1)).bit_length() + 1
        low_mask = (1 << (s * w)) - 1

        def product(m: int) -> int:
            return (k1(m & low_mask) << shift) | k2(m >> (s * w))

        return product


def _degrevlex_key(ring: "PolyRing", lo: int, hi: int) -> Callable[[int], int]:
    # x_lo > ... > x_{hi-1}; the field of x_i sits at bit (i - lo) * width
    nb = (hi - lo) * ring.width
    full = (1 << nb) - 1
    if ring.q == 2:
        def key(m: int) -> int:
            return (m.bit_count() << nb) | (full ^ m)
    else:
        deg = ring._packed_degree

        def key(m: int) -> int:
            return (deg(m) << nb) | (full ^ m)
    return key


DEGREVLEX = MonomialOrder("degrevlex")
LEX = MonomialOrder("lex")


def product_order(split: int) -> MonomialOrder:
    return MonomialOrder("product", split)


_NAME_RE = r"[A-Za-z_][A-Za-z0-9_']*(?:\(\d+\))?"
_TOKEN_RE = re.compile(rf"\s*(?:(?P<int>\d+)|(?P<name>{_NAME_RE})|(?P<op>[-+*^]))")


class PolyRing:
    """Variable universe plus coefficient field: GF(q)[x_0, ..., x_{n-1}] / L."""

    def __init__(self, names: Sequence[str], q: int = 2):
        self.field = GF(q)
        self.q = q
        self.names = tuple(names)
        self.n = len(self.names)
        self.index = {name: i for i, name in enumerate(self.names)}
        if len(self.index) != self.n:
            raise PolynomialError("variable names must be unique")
        for name in self.names:
            if not re.fullmatch(_NAME_RE, name):
                raise PolynomialError(f"invalid variable name {name!r}")
        self.width = 1 if q == 2 else (q - 1).bit_length()
        self._fmask = (1 << self.width) - 1
        self._order_keys: dict = {}
        self._hash = hash((q, self.names))

    @classmethod
    def indexed(cls, n: int, q: int = 2, prefix: str = "x") -> "PolyRing":
        return cls([f"{prefix}{i}" for i in range(n)], q)

    def __eq__(self, other):
        return self is other or (
            isinstance(other, PolyRing) and self.q == other.q and self.names == other.names
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"PolyRing(q={self.q}, n={self.n})"

    def __reduce__(self):
        return (PolyRing, (self.names, self.q))

    # -- monomials -------------------------------------------------------
    def var_index(self, v) -> int:
        if isinstance(v, int):
            if not 0 <= v < self.n:
                raise UniverseMismatch(f"variable index {v} outside universe")
            return v
        if isinstance(v, Polynomial):
            if v.ring != self:
                raise UniverseMismatch("variable from another ring")
            return v.as_variable()
        try:
            return self.index[v]
        except KeyError:
            raise UniverseMismatch(f"unknown variable {v!r}") from None

    def reduce_exponent(self, e: int) -> int:
        if e <= 0:
            return 0
        return (e - 1) % (self.q - 1) + 1

    def monomial(self, exponents: Mapping) -> int:
        """Packed monomial from a {variable: exponent} map, exponents normalized."""
        m = 0
        w = self.width
        for v, e in exponents.items():
            i = self.var_index(v)
            e = self.reduce_exponent(e)
            if e:
                cur = (m >> (i * w)) & self._fmask
                if cur:
                    e = self.reduce_exponent(cur + e)
                    m &= ~(self._fmask << (i * w))
                m |= e << (i * w)
        return m

    def exponents(self, m: int) -> dict[int, int]:
        out = {}
        w, f = self.width, self._fmask
        i = 0
        while m:
            e = m & f
            if e:
                out[i] = e
            m >>= w
            i += 1
        return out

    def _packed_degree(self, m: int) -> int:
        d = 0
        f, w = self._fmask, self.width
        while m:
            d += m & f
            m >>= w
        return d

    def mono_degree(self, m: int) -> int:
        if self.q == 2:
            return m.bit_count()
        return self._packed_degree(m)

    def mono_vars(self, m: int) -> list[int]:
        """Indices of the variables dividing ``m``, ascending."""
        if self.q == 2:
            out = []
            while m:
                low = m & -m
                out.append(low.bit_length() - 1)
                m ^= low
            return out
        return sorted(self.exponents(m))

    def var_mask(self, m: int) -> int:
        """Bitset (one bit per variable) of the variables occurring in ``m``."""
        if self.q == 2:
            return m
        out = 0
        for i in self.exponents(m):
            out |= 1 << i
        return out

    def mono_mul(self, a: int, b: int) -> int:
        if self.q == 2:
            return a | b
        if not (a and b):
            return a | b
        ea = self.exponents(a)
        for i, e in self.exponents(b).items():
            ea[i] = ea.get(i, 0) + e
        return self.monomial(ea)

    def mono_divides(self, a: int, b: int) -> bool:
        """True iff monomial ``a`` divides ``b`` in the polynomial ring."""
        if self.q == 2:
            return a & ~b == 0
        eb = self.exponents(b)
        return all(eb.get(i, 0) >= e for i, e in self.exponents(a).items())

    def mono_div(self, b: int, a: int) -> int:
        """b / a, assuming a divides b."""
        if self.q == 2:
            return b ^ a
        return b - a  # fields never borrow when a | b

    def mono_lcm(self, a: int, b: int) -> int:
        if self.q == 2:
            return a | b
        ea, eb = self.exponents(a), self.exponents(b)
        return self.monomial({i: max(ea.get(i, 0), eb.get(i, 0)) for i in ea.keys() | eb.keys()})

    def mono_coprime(self, a: int, b: int) -> bool:
        if self.q == 2:
            return a & b == 0
        return self.var_mask(a) & self.var_mask(b) == 0

    def mono_str(self, m: int) -> str:
        parts = []
        for i, e in self.exponents(m).items():
            parts.append(self.names[i] if e == 1 else f"{self.names[i]}^{e}")
        return "*".join(parts) if parts else "1"

    # -- constructors -----------------------------------------------------
    def zero(self) -> "Polynomial":
        return Polynomial(self, {})

    def one(self) -> "Polynomial":
        return Polynomial(self, {0: 1})

    def const(self, c: int) -> "Polynomial":
        c %= self.q
        return Polynomial(self, {0: c} if c else {})

    def var(self, v) -> "Polynomial":
        i = self.var_index(v)
        return Polynomial(self, {1 << (i * self.width): 1})

    def gens(self) -> list["Polynomial"]:
        return [self.var(i) for i in range(self.n)]

    def from_terms(self, terms: Iterable[tuple[int, Mapping]]) -> "Polynomial":
        """Normalize raw ``(coeff, {var: exponent})`` terms into a Polynomial."""
        acc: dict[int, int] = {}
        q = self.q
        for c, exps in terms:
            c %= q
            if not c:
                continue
            m = self.monomial(exps)
            v = (acc.get(m, 0) + c) % q
            if v:
                acc[m] = v
            else:
                acc.pop(m, None)
        return Polynomial(self, acc)

    def normalize(self, raw: Mapping[tuple, int]) -> "Polynomial":
        """Normalize ``{((var, exp), ...): coeff}`` with arbitrary exponents."""
        return self.from_terms((c, dict(_merge_pairs(k))) for k, c in raw.items())

    def parse(self, text: str) -> "Polynomial":
        return _Parser(self, text).parse()

    def from_json(self, data) -> "Polynomial":
        terms = []
        for term in data:
            exps: dict = {}
            for f in term.get("monomial", []):
                name, e = (f, 1) if isinstance(f, str) else (f[0], int(f[1]))
                exps[name] = exps.get(name, 0) + e
            terms.append((int(term.get("coeff", 1)), exps))
        return self.from_terms(terms)

    def extended(self, names: Iterable[str]) -> "PolyRing":
        """Ring with extra variables appended (existing ones keep their index)."""
        extra = [n for n in dict.fromkeys(names) if n not in self.index]
        return PolyRing(self.names + tuple(extra), self.q) if extra else self


def _merge_pairs(pairs):
    out: dict = {}
    for v, e in pairs:
        out[v] = out.get(v, 0) + e
    return out.items()


class Polynomial:
    """Immutable element of GF(q)[x]/L stored as ``{monomial: coefficient}``."""

    __slots__ = ("ring", "terms", "_lm")

    def __init__(self, ring: PolyRing, terms: dict[int, int]):
        self.ring = ring
        self.terms = terms
        self._lm = None

    # -- basic protocol ----------------------------------------------------
    def __len__(self):
        return len(self.terms)

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if isinstance(other, int):
            return self == self.ring.const(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.ring == other.ring and self.terms == other.terms

    def __hash__(self):
        return hash((self.ring, frozenset(self.terms.items())))

    def __repr__(self):
        return f"Polynomial({self.to_text()!r})"

    def __str__(self):
        return self.to_text()

    def __reduce__(self):
        return (Polynomial, (self.ring, self.terms))

    # -- arithmetic --------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.ring != self.ring:
                raise UniverseMismatch("polynomials from different rings")
            return other
        if isinstance(other, int):
            return self.ring.const(other)
        raise TypeError(f"cannot combine Polynomial with {type(other).__name__}")

    def __add__(self, other):
        other = self._coerce(other)
        if self.ring.q == 2:
            return Polynomial(self.ring, dict.fromkeys(self.terms.keys() ^ other.terms.keys(), 1))
        q = self.ring.q
        acc = dict(self.terms)
        for m, c in other.terms.items():
            v = (acc.get(m, 0) + c) % q
            if v:
                acc[m] = v
            else:
                del acc[m]
        return Polynomial(self.ring, acc)

    __radd__ = __add__

    def __neg__(self):
        if self.ring.q == 2:
            return self
        q = self.ring.q
        return Polynomial(self.ring, {m: q - c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        return self + (-other)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, int):
            c = other % self.ring.q
            if not c:
                return self.ring.zero()
            return Polynomial(self.ring, {m: (v * c) % self.ring.q for m, v in self.terms.items()})
        other = self._coerce(other)
        a, b = self.terms, other.terms
        if not a or not b:
            return self.ring.zero()
        if self.ring.q == 2:
            if len(b) == 1:
                (u,) = b
                return self._times_monomial2(u)
            if len(a) == 1:
                (u,) = a
                return other._times_monomial2(u)
            cnt = Counter(x | y for x in a for y in b)
            return Polynomial(self.ring, {m: 1 for m, v in cnt.items() if v & 1})
        ring, q = self.ring, self.ring.q
        acc: dict[int, int] = {}
        for x, cx in a.items():
            for y, cy in b.items():
                m = ring.mono_mul(x, y)
                v = (acc.get(m, 0) + cx * cy) % q
                if v:
                    acc[m] = v
                else:
                    acc.pop(m, None)
        return Polynomial(ring, acc)

    __rmul__ = __mul__

    def _times_monomial2(self, u: int) -> "Polynomial":
        cnt = Counter(m | u for m in self.terms)
        return Polynomial(self.ring, {m: 1 for m, v in cnt.items() if v & 1})

    def mul_monomial(self, u: int, c: int = 1) -> "Polynomial":
        """Multiply by ``c * u`` where ``u`` is a packed monomial."""
        if self.ring.q == 2:
            return self._times_monomial2(u)
        return self * Polynomial(self.ring, {u: c % self.ring.q})

    def __pow__(self, e: int):
        if e < 0:
            raise ValueError("negative exponent")
        result = self.ring.one()
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    # -- structure -----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and 0 in self.terms)

    def is_one(self) -> bool:
        return self.terms == {0: 1}

    def constant_value(self) -> int:
        if not self.is_constant():
            raise PolynomialError("polynomial is not constant")
        return self.terms.get(0, 0)

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        md = self.ring.mono_degree
        return max(md(m) for m in self.terms)

    def var_mask(self) -> int:
        mask = 0
        if self.ring.q == 2:
            for m in self.terms:
                mask |= m
            return mask
        for m in self.terms:
            mask |= self.ring.var_mask(m)
        return mask

    def variables(self) -> list[int]:
        mask = self.var_mask()
        return [i for i in range(mask.bit_length()) if mask >> i & 1]

    def as_variable(self) -> int:
        if len(self.terms) == 1:
            ((m, c),) = self.terms.items()
            if c == 1 and m and m & (m - 1) == 0 and (m.bit_length() - 1) % self.ring.width == 0:
                return (m.bit_length() - 1) // self.ring.width
        raise PolynomialError(f"{self} is not a variable")

    def leading_monomial(self, order: MonomialOrder = DEGREVLEX) -> int:
        if not self.terms:
            raise PolynomialError("zero polynomial has no leading monomial")
        cached = self._lm
        if cached is not None and cached[0] is order:
            return cached[1]
        lm = max(self.terms, key=order.key(self.ring))
        self._lm = (order, lm)
        return lm

    def leading_coefficient(self, order: MonomialOrder = DEGREVLEX) -> int:
        return self.terms[self.leading_monomial(order)]

    def monic(self, order: MonomialOrder = DEGREVLEX) -> "Polynomial":
        c = self.leading_coefficient(order)
        return self if c == 1 else self * self.ring.field.inv(c)

    def sorted_terms(self, order: MonomialOrder = DEGREVLEX) -> list[tuple[int, int]]:
        key = order.key(self.ring)
        return sorted(self.terms.items(), key=lambda mc: key(mc[0]), reverse=True)

    # -- substitution --------------------------------------------------------
    def evaluate(self, assignment: Mapping) -> "Polynomial":
        """Substitute field values for some variables and re-normalize."""
        ring = self.ring
        values = {ring.var_index(v): int(a) % ring.q for v, a in assignment.items()}
        if ring.q == 2:
            ones = zeros = 0
            for i, a in values.items():
                if a:
                    ones |= 1 << i
                else:
                    zeros |= 1 << i
            keep = ~ones
            cnt = Counter(m & keep for m in self.terms if not m & zeros)
            return Polynomial(ring, {m: 1 for m, v in cnt.items() if v & 1})
        q, w, f = ring.q, ring.width, ring._fmask
        acc: dict[int, int] = {}
        for m, c in self.terms.items():
            rest = m
            for i, a in values.items():
                e = (m >> (i * w)) & f
                if e:
                    c = (c * pow(a, e, q)) % q
                    rest &= ~(f << (i * w))
                    if not c:
                        break
            if c:
                v = (acc.get(rest, 0) + c) % q
                if v:
                    acc[rest] = v
                else:
                    acc.pop(rest, None)
        return Polynomial(ring, acc)

    def value_at(self, point: Sequence[int]) -> int:
        """Value at a full point given as a sequence indexed like the ring."""
        ring = self.ring
        if ring.q == 2:
            ones = 0
            for i, a in enumerate(point):
                if a & 1:
                    ones |= 1 << i
            return sum(1 for m in self.terms if not m & ~ones) & 1
        q = ring.q
        total = 0
        for m, c in self.terms.items():
            for i, e in ring.exponents(m).items():
                c = (c * pow(point[i], e, q)) % q
            total += c
        return total % q

    def value_at_mask(self, ones: int) -> int:
        """GF(2) value at the point whose coordinates equal to 1 form ``ones``."""
        return sum(1 for m in self.terms if not m & ~ones) & 1

    def substitute(self, images: Mapping[int, "Polynomial"], target: PolyRing | None = None) -> "Polynomial":
        """Algebra homomorphism: variable ``i`` goes to ``images[i]``.

        Unmapped variables go to the same-named variable of ``target``.
        """
        target = target or self.ring
        src = self.ring
        img: dict[int, Polynomial] = {}
        for i in range(src.n):
            if i in images:
                img[i] = images[i]
            elif target is src:
                img[i] = src.var(i)
        memo: dict[int, Polynomial] = {0: target.one()}
        w = src.width

        def image(m: int) -> Polynomial:
            r = memo.get(m)
            if r is not None:
                return r
            top = (m.bit_length() - 1) // w
            e = (m >> (top * w)) & src._fmask
            rest = m & ~(src._fmask << (top * w))
            base = img.get(top)
            if base is None:
                base = img[top] = target.var(src.names[top])
            r = image(rest) * (base if e == 1 else base ** e)
            memo[m] = r
            return r

        if target.q == 2:
            cnt: Counter = Counter()
            for m in self.terms:
                cnt.update(image(m).terms.keys())
            return Polynomial(target, {m: 1 for m, v in cnt.items() if v & 1})
        acc = target.zero()
        for m, c in self.terms.items():
            acc = acc + image(m) * c
        return acc

    def to_ring(self, target: PolyRing, rename: Callable[[str], str] | None = None) -> "Polynomial":
        """Re-express in ``target`` by matching (optionally renamed) variable names."""
        src = self.ring
        if target == src and rename is None:
            return self
        if target.q != src.q:
            raise UniverseMismatch("rings over different fields")
        idx = []
        for name in src.names:
            tname = rename(name) if rename else name
            idx.append(target.index.get(tname))
        w, f = src.width, src._fmask
        out: dict[int, int] = {}
        for m, c in self.terms.items():
            t = 0
            i = 0
            mm = m
            while mm:
                e = mm & f
                if e:
                    j = idx[i]
                    if j is None:
                        raise UniverseMismatch(f"variable {src.names[i]!r} missing from target ring")
                    t |= e << (j * w)
                mm >>= w
                i += 1
            out[t] = c
        return Polynomial(target, out)

    # -- text and JSON ---------------------------------------------------------
    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        ring = self.ring
        for m, c in self.sorted_terms(DEGREVLEX):
            if m == 0:
                parts.append(str(c))
            elif c == 1:
                parts.append(ring.mono_str(m))
            else:
                parts.append(f"{c}*{ring.mono_str(m)}")
        return " + ".join(parts)

    def to_json(self) -> list:
        out = []
        ring = self.ring
        for m, c in self.sorted_terms(DEGREVLEX):
            mono = []
            for i, e in ring.exponents(m).items():
                mono.append(ring.names[i] if e == 1 else [ring.names[i], e])
            out.append({"coeff": c, "monomial": mono})
        return out


def compare(m1: int, m2: int, order: MonomialOrder, ring: PolyRing) -> int:
    """-1, 0 or 1 as ``m1`` is less than, equal to or greater than ``m2``."""
    key = order.key(ring)
    k1, k2 = key(m1), key(m2)
    return (k1 > k2) - (k1 < k2)


class _Parser:
    def __init__(self, ring: PolyRing, text: str):
        self.ring = ring
        self.text = text
        self.tokens = self._tokenize()
        self.pos = 0

    def _tokenize(self):
        toks = []
        i, text = 0, self.text
        while i < len(text):
            if text[i].isspace():
                i += 1
                continue
            mt = _TOKEN_RE.match(text, i)
            if not mt or mt.end() == i:
                raise ParseError(f"unexpected character {text[i]!r}", i)
            kind = mt.lastgroup
            start = mt.start(kind)
            toks.append((kind, mt.group(kind), start))
            i = mt.end()
        toks.append(("end", "", len(text)))
        return toks

    def _peek(self):
        return self.tokens[self.pos]

    def _next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def parse(self) -> Polynomial:
        terms = []
        sign = 1
        if self._peek()[1] in ("+", "-") and self._peek()[0] == "op":
            sign = -1 if self._next()[1] == "-" else 1
        terms.append(self._term(sign))
        while True:
            kind, val, off = self._peek()
            if kind == "end":
                break
            if kind == "op" and val in "+-":
                self._next()
                terms.append(self._term(-1 if val == "-" else 1))
                continue
            raise ParseError(f"expected '+' or end of input, got {val!r}", off)
        return self.ring.from_terms(terms)

    def _term(self, sign: int):
        coeff = sign
        exps: dict[str, int] = {}
        self._factor(exps, coeff_box := [coeff])
        while self._peek()[0] == "op" and self._peek()[1] == "*":
            self._next()
            self._factor(exps, coeff_box)
        return coeff_box[0], exps

    def _factor(self, exps, coeff_box):
        kind, val, off = self._next()
        if kind == "int":
            coeff_box[0] *= int(val)
            return
        if kind != "name":
            raise ParseError(f"expected a coefficient or variable, got {val or 'end of input'!r}", off)
        if val not in self.ring.index:
            raise UniverseMismatch(f"unknown variable {val!r} at offset {off}")
        e = 1
        if self._peek()[0] == "op" and self._peek()[1] == "^":
            self._next()
            k2, v2, o2 = self._next()
            if k2 != "int":
                raise ParseError("expected an exponent", o2)
            e = int(v2)
        exps[val] = exps.get(val, 0) + e
