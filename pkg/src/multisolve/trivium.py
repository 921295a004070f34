"""Trivium as a difference stream cipher, a packed bit-level twin, and attack set-up."""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from .dsc import DifferenceCipherSpec, NotInvertible, invert_endo, state_trajectory, transition_endo
from .gfpoly import PolyRing, Polynomial
from .groebner import GeneratorSet
from .multistep import GuessPlan, make_rng

__all__ = [
    "REGISTERS",
    "trivium_spec",
    "trivium_bits",
    "trivium_bits_inverse",
    "sliced_clock",
    "pack_lanes",
    "unpack_lanes",
    "evaluate_lanes",
    "AttackSystem",
    "attack_system",
    "trivium_attack_system",
    "trivium_guess_sets",
    "trivium_guess_plan",
    "TapLayout",
    "reduced_trivium",
    "random_state",
    "ReducedInstance",
    "keystream_table",
    "unique_prefix_length",
    "guess_order",
    "reduced_instance",
    "reduced_plan",
]

REGISTERS = (("x", 93), ("y", 84), ("z", 111))
U = 4 * 288


@dataclass(frozen=True)
class TapLayout:
    """Trivium-shaped taps: register ``i`` is fed by register ``i - 1`` (cyclically).

    ``own[i]`` is the tap into register ``i`` itself and ``cross[i]`` the
    second tap into the feeding register; the keystream adds cell 0 of every
    register and the cross tap each register supplies.
    """

    lengths: tuple[int, int, int]
    own: tuple[int, int, int]
    cross: tuple[int, int, int]

    def updates(self) -> list[str]:
        names = ("x", "y", "z")
        out = []
        for i, name in enumerate(names):
            src = names[i - 1]
            out.append(f"{src}(0) + {name}({self.own[i]}) + {src}({self.cross[i]}) + {src}(1)*{src}(2)")
        return out

    def keystream(self) -> str:
        # register j feeds register j+1 through cross[j+1]
        names = ("x", "y", "z")
        return " + ".join(f"{names[j]}(0) + {names[j]}({self.cross[(j + 1) % 3]})" for j in range(3))

    def spec(self, u: int | None = None) -> DifferenceCipherSpec:
        regs = list(zip(("x", "y", "z"), self.lengths))
        return DifferenceCipherSpec.build(regs, self.updates(), self.keystream(),
                                          4 * sum(self.lengths) if u is None else u)


TRIVIUM_TAPS = TapLayout((93, 84, 111), (24, 6, 24), (45, 27, 15))


def trivium_spec() -> DifferenceCipherSpec:
    return TRIVIUM_TAPS.spec(U)


# -- bit-level engine -------------------------------------------------------------------

def _split(state: Sequence[int], lengths) -> list[int]:
    regs, off = [], 0
    for n in lengths:
        v = 0
        for j in range(n):
            if state[off + j] & 1:
                v |= 1 << j
        regs.append(v)
        off += n
    return regs


def _join(regs, lengths) -> list[int]:
    out = []
    for v, n in zip(regs, lengths):
        out.extend((v >> j) & 1 for j in range(n))
    return out


def trivium_bits(state: Sequence[int], clocks: int, taps: TapLayout = TRIVIUM_TAPS) -> tuple[list[int], list[int]]:
    """Clock a concrete state ``clocks`` times; returns the final state and the
    keystream bits emitted before each clock."""
    L = taps.lengths
    if len(state) != sum(L):
        raise ValueError(f"state must have {sum(L)} bits")
    x, y, z = _split(state, L)
    ax, ay, az = taps.own
    bx, by, bz = taps.cross
    tx, ty, tz = L[0] - 1, L[1] - 1, L[2] - 1
    kx, ky, kz = by, bz, bx
    bits = []
    for _ in range(clocks):
        bits.append((x ^ (x >> kx) ^ y ^ (y >> ky) ^ z ^ (z >> kz)) & 1)
        nx = (z ^ (x >> ax) ^ (z >> bx) ^ ((z >> 1) & (z >> 2))) & 1
        ny = (x ^ (y >> ay) ^ (x >> by) ^ ((x >> 1) & (x >> 2))) & 1
        nz = (y ^ (z >> az) ^ (y >> bz) ^ ((y >> 1) & (y >> 2))) & 1
        x = (x >> 1) | (nx << tx)
        y = (y >> 1) | (ny << ty)
        z = (z >> 1) | (nz << tz)
    return _join((x, y, z), L), bits


def trivium_bits_inverse(state: Sequence[int], clocks: int, taps: TapLayout = TRIVIUM_TAPS) -> list[int]:
    """Run the inverse transition ``clocks`` times."""
    L = taps.lengths
    x, y, z = _split(state, L)
    ax, ay, az = taps.own
    bx, by, bz = taps.cross
    tx, ty, tz = L[0] - 1, L[1] - 1, L[2] - 1
    mx, my, mz = (1 << L[0]) - 1, (1 << L[1]) - 1, (1 << L[2]) - 1
    for _ in range(clocks):
        # the dropped cell 0 of the feeding register is recovered from the top cell it fed
        ox = ((y >> ty) ^ (y >> (ay - 1)) ^ (x >> (by - 1)) ^ (x & (x >> 1))) & 1
        oy = ((z >> tz) ^ (z >> (az - 1)) ^ (y >> (bz - 1)) ^ (y & (y >> 1))) & 1
        oz = ((x >> tx) ^ (x >> (ax - 1)) ^ (z >> (bx - 1)) ^ (z & (z >> 1))) & 1
        x = ((x << 1) & mx) | ox
        y = ((y << 1) & my) | oy
        z = ((z << 1) & mz) | oz
    return _join((x, y, z), L)


def pack_lanes(states: np.ndarray) -> list[int]:
    """Column ``c`` of an ``(N, r)`` 0/1 array becomes one int with bit ``s`` = state ``s``."""
    states = np.asarray(states, dtype=np.uint8)
    packed = np.packbits(states, axis=0, bitorder="little")
    return [int.from_bytes(packed[:, c].tobytes(), "little") for c in range(states.shape[1])]


def unpack_lanes(lanes: Sequence[int], n_states: int) -> np.ndarray:
    nbytes = (n_states + 7) // 8
    cols = [np.unpackbits(np.frombuffer(v.to_bytes(nbytes, "little"), dtype=np.uint8),
                          bitorder="little")[:n_states] for v in lanes]
    return np.stack(cols, axis=1) if cols else np.zeros((n_states, 0), dtype=np.uint8)


def sliced_clock(states: np.ndarray, clocks: int, taps: TapLayout = TRIVIUM_TAPS,
                 inverse: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Clock many states at once (bitsliced); returns final states and an
    ``(N, clocks)`` keystream array (zeros when running the inverse)."""
    n_states = states.shape[0]
    L = taps.lengths
    lanes = pack_lanes(states)
    x = deque(lanes[:L[0]])
    y = deque(lanes[L[0]:L[0] + L[1]])
    z = deque(lanes[L[0] + L[1]:])
    ax, ay, az = taps.own
    bx, by, bz = taps.cross
    out = []
    for _ in range(clocks):
        if inverse:
            ox = y[-1] ^ y[ay - 1] ^ x[by - 1] ^ (x[0] & x[1])
            oy = z[-1] ^ z[az - 1] ^ y[bz - 1] ^ (y[0] & y[1])
            oz = x[-1] ^ x[ax - 1] ^ z[bx - 1] ^ (z[0] & z[1])
            for reg, v in ((x, ox), (y, oy), (z, oz)):
                reg.pop()
                reg.appendleft(v)
            continue
        out.append(x[0] ^ x[by] ^ y[0] ^ y[bz] ^ z[0] ^ z[bx])
        nx = z[0] ^ x[ax] ^ z[bx] ^ (z[1] & z[2])
        ny = x[0] ^ y[ay] ^ x[by] ^ (x[1] & x[2])
        nz = y[0] ^ z[az] ^ y[bz] ^ (y[1] & y[2])
        for reg, v in ((x, nx), (y, ny), (z, nz)):
            reg.popleft()
            reg.append(v)
    final = unpack_lanes(list(x) + list(y) + list(z), n_states)
    bits = unpack_lanes(out, n_states) if out else np.zeros((n_states, 0), dtype=np.uint8)
    return final, bits


def evaluate_lanes(p: Polynomial, lanes: Sequence[int], mask: int) -> int:
    """GF(2) value of ``p`` at every state at once; ``lanes[i]`` is variable ``i``."""
    acc = 0
    for m in p.terms:
        v = mask
        while m:
            low = m & -m
            v &= lanes[low.bit_length() - 1]
            m ^= low
            if not v:
                break
        acc ^= v
    return acc


def random_state(rng: np.random.Generator, n: int) -> list[int]:
    return [int(b) for b in rng.integers(0, 2, size=n)]


# -- attack systems ------------------------------------------------------------------------

@dataclass
class AttackSystem:
    """Keystream system after eliminating the variables fixed by linear generators.

    ``eliminated`` maps full-state variables to polynomials over ``ring``.
    """

    spec: DifferenceCipherSpec
    observed: list[int]
    ring: PolyRing
    system: GeneratorSet
    eliminated: list[tuple[int, Polynomial]]
    linear_count: int
    kept: list[int] = field(default_factory=list)

    def lift(self, assignment: Mapping[int, int]) -> list[int]:
        """Full state from an assignment of the remaining variables."""
        full = self.spec.ring
        values = {self.kept[i]: int(v) for i, v in assignment.items()}
        for var, f in self.eliminated:
            values[var] = f.evaluate(assignment).constant_value()
        return [values[i] for i in range(full.n)]

    def restrict(self, state: Sequence[int]) -> list[int]:
        """Coordinates of a full state on the remaining variables."""
        return [int(state[i]) for i in self.kept]


def attack_system(spec: DifferenceCipherSpec, observed: Sequence[int], h: int | None = None,
                  max_linear: int | None = None) -> AttackSystem:
    """Build ``{T^t(g) - b(t) : t < h}`` and eliminate through its linear prefix.

    Each linear generator (in clock order, up to ``max_linear``) eliminates its
    highest-index variable after the earlier substitutions; the nonlinear
    generators are then rebuilt by clocking the substituted initial state.
    """
    h = len(observed) if h is None else h
    if len(observed) != h:
        raise ValueError("observed keystream must have length h")
    full = spec.ring
    subst: dict[int, Polynomial] = {}
    order: list[int] = []
    n_lin = 0
    for t, cells in enumerate(state_trajectory(spec, h - 1)):
        if max_linear is not None and n_lin >= max_linear:
            break
        g = spec.keystream.substitute(dict(enumerate(cells))) - full.const(observed[t])
        if g.degree() > 1:
            break
        g = g.substitute(subst) if subst else g
        if g.is_zero():
            n_lin += 1
            continue
        if g.is_constant():
            raise ValueError("observed keystream is inconsistent with the linear generators")
        var = g.variables()[-1]
        x = full.var(var)
        c = g.terms[next(iter(x.terms))]
        image = (g - x * c) * full.field.neg(full.field.inv(c))
        for v in list(subst):
            subst[v] = subst[v].substitute({var: image})
        subst[var] = image
        order.append(var)
        n_lin += 1
    kept = [i for i in range(full.n) if i not in subst]
    ring = PolyRing([full.names[i] for i in kept], full.q)
    init = [subst[i].to_ring(ring) if i in subst else ring.var(full.names[i]) for i in range(full.n)]
    gens = []
    for t, cells in enumerate(state_trajectory(spec, h - 1, init)):
        if t < n_lin:
            continue
        gens.append(spec.keystream.substitute(dict(enumerate(cells)), ring) - ring.const(observed[t]))
    elim = [(v, init[v]) for v in order]
    return AttackSystem(spec, list(observed), ring, GeneratorSet(gens, ring), elim, n_lin, kept)


def trivium_attack_system(observed: Sequence[int]) -> AttackSystem:
    if len(observed) != 240:
        raise ValueError("the Trivium attack uses exactly 240 keystream bits")
    return attack_system(trivium_spec(), observed, 240)


def trivium_guess_sets() -> tuple[list[str], list[str]]:
    """The two guess sets, checked against the stored checksum."""
    data = json.loads(resources.files("multisolve").joinpath("data", "trivium_attack.json").read_text())
    payload = {"V1": data["V1"], "V2": data["V2"]}
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()).hexdigest()
    if digest != data["sha256"]:
        raise ValueError("Trivium guess-set data failed its checksum")
    return list(data["V1"]), list(data["V2"])


def trivium_guess_plan(B: int, D: int = 3, k_first: int = 106, k_last: int = 116,
                       ring: PolyRing | None = None) -> GuessPlan:
    """Full multistep plan over ``V1`` then ``V2`` with steps ``k_first .. k_last``."""
    if not 106 <= k_first <= k_last <= 116:
        raise ValueError("Trivium steps must satisfy 106 <= k_first <= k_last <= 116")
    v1, v2 = trivium_guess_sets()
    if ring is None:
        full = trivium_spec().ring
        ring = PolyRing([n for n in full.names if not (n.startswith("z(") and int(n[2:-1]) >= 45)])
    guess = [ring.var_index(n) for n in v1 + v2]
    return GuessPlan(tuple(guess), tuple(range(k_first, k_last + 1)), B, D)


# -- reduced variants --------------------------------------------------------------------

def _scaled(tap: int, full_len: int, new_len: int) -> int:
    return min(max(tap * new_len // full_len, 1), new_len - 1)


def reduced_trivium(r1: int, r2: int, r3: int, seed: int = 0, max_tries: int = 64) -> DifferenceCipherSpec:
    """Trivium-shaped cipher with registers of lengths ``r1, r2, r3``.

    Taps are Trivium's scaled down to the new lengths; if the result is not
    invertible they are perturbed (driven by ``seed``) until it is.
    """
    return reduced_taps(r1, r2, r3, seed, max_tries).spec()


def reduced_taps(r1: int, r2: int, r3: int, seed: int = 0, max_tries: int = 64) -> TapLayout:
    lengths = (r1, r2, r3)
    if min(lengths) < 4:
        raise ValueError("reduced Trivium needs registers of length >= 4")
    full = TRIVIUM_TAPS.lengths
    own = tuple(_scaled(TRIVIUM_TAPS.own[i], full[i], lengths[i]) for i in range(3))
    # cross[i] indexes the feeding register i-1
    cross = tuple(_scaled(TRIVIUM_TAPS.cross[i], full[i - 1], lengths[i - 1]) for i in range(3))
    rng = make_rng(seed)
    layout = TapLayout(lengths, own, cross)
    for _ in range(max_tries):
        try:
            invert_endo(transition_endo(layout.spec()))
            return layout
        except NotInvertible:
            i = int(rng.integers(0, 3))
            own = tuple(o if j != i else int(rng.integers(1, lengths[j])) for j, o in enumerate(own))
            cross = tuple(c if j != i else int(rng.integers(1, lengths[j - 1])) for j, c in enumerate(cross))
            layout = TapLayout(lengths, own, cross)
    raise ValueError("could not find invertible taps for the requested lengths")


__all__.append("reduced_taps")


# -- desk-scale instances ------------------------------------------------------------------

_TABLES: dict = {}


def keystream_table(taps: TapLayout, clocks: int) -> np.ndarray:
    """Keystream of every state as packed ints (bit ``t`` = clock ``t``); cached per layout."""
    r = sum(taps.lengths)
    if r > 24 or clocks > 63:
        raise ValueError("exhaustive keystream tables need r <= 24 and clocks <= 63")
    key = (taps, clocks)
    if key not in _TABLES:
        states = ((np.arange(1 << r)[:, None] >> np.arange(r)[None, :]) & 1).astype(np.uint8)
        _, bits = sliced_clock(states, clocks, taps)
        _TABLES[key] = bits.astype(np.uint64) @ (np.uint64(1) << np.arange(clocks, dtype=np.uint64))
    return _TABLES[key]


def _state_index(state: Sequence[int]) -> int:
    return sum(int(b) << i for i, b in enumerate(state))


def unique_prefix_length(taps: TapLayout, state: Sequence[int], h_max: int) -> int | None:
    """Least ``h <= h_max`` such that only ``state`` produces its first ``h`` bits."""
    table = keystream_table(taps, h_max)
    own = table[_state_index(state)]
    alive = np.arange(len(table))
    for h in range(1, h_max + 1):
        mask = np.uint64((1 << h) - 1)
        alive = alive[((table[alive] ^ own) & mask) == 0]
        if len(alive) == 1:
            return h
    return None


def guess_order(H: GeneratorSet) -> list[int]:
    """Variables by number of generator terms they occur in, most first."""
    ring = H.ring
    count = [0] * ring.n
    for g in H:
        for m in g.terms:
            for v in ring.mono_vars(m):
                count[v] += 1
    return sorted(range(ring.n), key=lambda v: (-count[v], v))


@dataclass
class ReducedInstance:
    """A planted reduced-Trivium attack: state, observed bits and the eliminated system."""

    taps: TapLayout
    state: list[int]
    h: int
    attack: AttackSystem
    guess_vars: list[int]
    seed: int

    @property
    def system(self) -> GeneratorSet:
        return self.attack.system

    def planted(self) -> list[int]:
        return self.attack.restrict(self.state)


def reduced_instance(taps: TapLayout, seed: int, h_max: int = 22, max_tries: int = 256) -> ReducedInstance:
    """Draw planted states from ``seed`` until one is pinned down by at most ``h_max`` bits.

    ``h`` is the shorter of twice the state size and the first length at which
    the observed prefix has a unique preimage.
    """
    r = sum(taps.lengths)
    rng = make_rng(seed)
    spec = taps.spec()
    for _ in range(max_tries):
        state = random_state(rng, r)
        h = unique_prefix_length(taps, state, min(h_max, 2 * r))
        if h is None:
            continue
        _, bits = trivium_bits(state, h, taps)
        A = attack_system(spec, bits, h)
        return ReducedInstance(taps, state, h, A, guess_order(A.system), seed)
    raise ValueError(f"no state with a unique keystream prefix of length <= {h_max}")


def reduced_plan(inst: ReducedInstance, B: int, D: int = 2, k_first: int = 4,
                 k_last: int | None = None) -> GuessPlan:
    """Full multistep plan over the instance's guess order."""
    n = inst.attack.ring.n
    k_last = min(12, n) if k_last is None else k_last
    if not 1 <= k_first <= k_last <= n:
        raise ValueError("need 1 <= k_first <= k_last <= number of variables")
    return GuessPlan(tuple(inst.guess_vars[:k_last]), tuple(range(k_first, k_last + 1)), B, D)
