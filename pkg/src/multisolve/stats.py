"""Wild-guess probabilities and the complexity of multistep solving.

Probabilities are kept as exact fractions (``wild/total`` for measured tables,
the decimal string for published ones) so that sums like
``sum p(k) q**k`` at the 2^116 scale are exact; logarithms are taken last.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .elimlin import REDUCED, gb_elim_lin
from .groebner import EngineConfig, GeneratorSet
from .multistep import make_rng

__all__ = [
    "ProbEntry",
    "ProbabilityTable",
    "Instance",
    "RandomTestset",
    "CorrectTestset",
    "ExhaustiveTestset",
    "NoFinalStep",
    "MissingEntry",
    "EnumerationCap",
    "estimate_probabilities",
    "final_step",
    "median_final_step",
    "full_chain",
    "count_C1",
    "count_C2",
    "complexity_C1",
    "complexity_C2",
    "runtime_T",
    "optimality_check",
    "complexity_report",
    "render_report",
    "figure_csv",
    "log2_fraction",
]


class NoFinalStep(LookupError):
    pass


class MissingEntry(KeyError):
    pass


class EnumerationCap(ValueError):
    pass


def log2_fraction(x: Fraction | int) -> float:
    x = Fraction(x)
    if x <= 0:
        raise ValueError("log2 of a nonpositive value")
    return math.log2(x.numerator) - math.log2(x.denominator)


@dataclass(frozen=True)
class ProbEntry:
    p: Fraction
    wild: int | None = None
    total: int | None = None

    @classmethod
    def counted(cls, wild: int, total: int) -> "ProbEntry":
        if total < 1 or not 0 <= wild <= total:
            raise ValueError("need 0 <= wild <= total and total >= 1")
        return cls(Fraction(wild, total), wild, total)

    def p_text(self) -> str:
        if self.total is not None:
            return f"{float(self.p):.5f}"
        return _fraction_text(self.p)


def _fraction_text(p: Fraction) -> str:
    for places in range(13):
        scaled = p * 10**places
        if scaled.denominator == 1:
            digits = str(scaled.numerator).rjust(places + 1, "0")
            return digits if places == 0 else digits[:-places] + "." + digits[-places:]
    return repr(float(p))


class ProbabilityTable:
    """Map ``(B, k) -> ProbEntry`` with a kind (random / correct / exhaustive)."""

    def __init__(self, kind: str, entries: Mapping[tuple[int, int], ProbEntry] | None = None,
                 provenance: Mapping | None = None):
        self.kind = kind
        self.entries: dict[tuple[int, int], ProbEntry] = dict(entries or {})
        self.provenance = dict(provenance or {})
        for e in self.entries.values():
            if not 0 <= e.p <= 1:
                raise ValueError("probabilities must lie in [0, 1]")

    def __eq__(self, other):
        if not isinstance(other, ProbabilityTable):
            return NotImplemented
        return self.kind == other.kind and self.entries == other.entries

    def p(self, B: int, k: int) -> Fraction:
        try:
            return self.entries[B, k].p
        except KeyError:
            raise MissingEntry(f"no probability for B={B}, k={k}") from None

    def Bs(self) -> list[int]:
        return sorted({B for B, _ in self.entries})

    def ks(self, B: int | None = None) -> list[int]:
        return sorted({k for b, k in self.entries if B is None or b == B})

    def is_nonincreasing(self) -> bool:
        """``p`` nonincreasing in ``k`` for each ``B`` and in ``B`` for each ``k``."""
        for B in self.Bs():
            ps = [self.p(B, k) for k in self.ks(B)]
            if any(b > a for a, b in zip(ps, ps[1:])):
                return False
        for k in self.ks():
            ps = [self.entries[B, k].p for B in self.Bs() if (B, k) in self.entries]
            if any(b > a for a, b in zip(ps, ps[1:])):
                return False
        return True

    # -- serialization ----------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "B", "k", "wild", "total", "p"])
        for (B, k), e in sorted(self.entries.items()):
            w.writerow([self.kind, B, k, "" if e.wild is None else e.wild,
                        "" if e.total is None else e.total, e.p_text()])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, provenance: Mapping | None = None) -> "ProbabilityTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty probability table")
        kinds = {r["kind"] for r in rows}
        if len(kinds) != 1:
            raise ValueError("mixed table kinds")
        entries = {}
        for r in rows:
            B, k = int(r["B"]), int(r["k"])
            if r["wild"] and r["total"]:
                entries[B, k] = ProbEntry.counted(int(r["wild"]), int(r["total"]))
            else:
                entries[B, k] = ProbEntry(Fraction(r["p"]))
        return cls(kinds.pop(), entries, provenance or {"source": "external"})

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "provenance": self.provenance,
            "entries": [{"B": B, "k": k, "wild": e.wild, "total": e.total, "p": e.p_text()}
                        for (B, k), e in sorted(self.entries.items())],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ProbabilityTable":
        entries = {}
        for r in data["entries"]:
            if r.get("wild") is not None and r.get("total") is not None:
                entries[r["B"], r["k"]] = ProbEntry.counted(r["wild"], r["total"])
            else:
                entries[r["B"], r["k"]] = ProbEntry(Fraction(str(r["p"])))
        return cls(data["kind"], entries, data.get("provenance"))

    def save(self, path: str | Path) -> None:
        path = Path(path)
        if path.suffix == ".json":
            path.write_text(json.dumps(self.to_json(), indent=1))
        else:
            path.write_text(self.to_csv())

    @classmethod
    def load(cls, path: str | Path) -> "ProbabilityTable":
        path = Path(path)
        if path.suffix == ".json":
            return cls.from_json(json.loads(path.read_text()))
        return cls.from_csv(path.read_text(), {"source": "external", "file": path.name})

    @classmethod
    def trivium(cls, which: str) -> "ProbabilityTable":
        """Published Trivium tables: ``"random"`` (worst case) or ``"correct"``."""
        name = {"random": "trivium_table1.json", "correct": "trivium_table4.json"}[which]
        data = resources.files("multisolve").joinpath("data", name).read_text()
        return cls.from_json(json.loads(data))


# -- estimation --------------------------------------------------------------------

@dataclass
class Instance:
    """A system to guess on; ``planted`` holds the correct value of every variable."""

    system: GeneratorSet
    guess_vars: Sequence[int]
    planted: Sequence[int] | None = None


@dataclass
class RandomTestset:
    samples: int
    seed: int | None = 0
    instances: int = 1
    nested: bool = True


@dataclass
class CorrectTestset:
    instances: int
    seed: int | None = 0


@dataclass
class ExhaustiveTestset:
    seed: int | None = 0
    cap: int = 1 << 20


def _nrv(system: GeneratorSet, guess_vars, values, D, config) -> tuple[bool, int]:
    assign = {guess_vars[i]: int(a) for i, a in enumerate(values)}
    out = gb_elim_lin(system.evaluate(assign), D, config)
    return out.kind == REDUCED, out.nrv


def estimate_probabilities(source: Callable[[np.random.Generator], Instance] | Instance,
                           ks: Sequence[int], Bs: Sequence[int], D: int, testset,
                           config: EngineConfig | None = None) -> ProbabilityTable:
    """Estimate ``p_B(k)``: the share of ``k``-guesses whose GBElimLin NRV exceeds ``B``.

    ``source`` draws an instance from a generator (or is a fixed instance).
    Random testsets draw ``samples`` guesses per instance, either one vector
    whose prefixes serve every ``k`` (nested) or a fresh vector per ``k``.
    Correct testsets evaluate each planted instance on its own prefix.
    Exhaustive testsets enumerate all of ``F^k`` for one instance.
    """
    ks, Bs = sorted(ks), sorted(Bs)
    if not ks or not Bs:
        raise ValueError("need at least one k and one B")
    wild = {(B, k): 0 for B in Bs for k in ks}
    total = {k: 0 for k in ks}

    def draw(i: int) -> Instance:
        if isinstance(source, Instance):
            return source
        return source(make_rng(testset.seed, 1, i))

    def record(k, reduced, nrv):
        total[k] += 1
        if reduced:
            for B in Bs:
                if nrv > B:
                    wild[B, k] += 1

    if isinstance(testset, RandomTestset):
        if testset.samples < 1:
            raise ValueError("sample size must be >= 1")
        kind = "random"
        for i in range(testset.instances):
            inst = draw(i)
            q = inst.system.ring.q
            rng = make_rng(testset.seed, 2, i)
            if testset.nested:
                vals = rng.integers(0, q, size=(testset.samples, ks[-1]))
                for row in vals:
                    for k in ks:
                        record(k, *_nrv(inst.system, inst.guess_vars, row[:k], D, config))
            else:
                for k in ks:
                    for row in rng.integers(0, q, size=(testset.samples, k)):
                        record(k, *_nrv(inst.system, inst.guess_vars, row, D, config))
        prov = {"source": "sampled", "testset": "random", "seed": testset.seed,
                "samples": testset.samples, "instances": testset.instances, "nested": testset.nested, "D": D}
    elif isinstance(testset, CorrectTestset):
        kind = "correct"
        for i in range(testset.instances):
            inst = draw(i)
            if inst.planted is None:
                raise ValueError("correct testsets need planted instances")
            correct = [inst.planted[v] for v in inst.guess_vars]
            for k in ks:
                record(k, *_nrv(inst.system, inst.guess_vars, correct[:k], D, config))
        prov = {"source": "sampled", "testset": "correct", "seed": testset.seed,
                "instances": testset.instances, "D": D}
    elif isinstance(testset, ExhaustiveTestset):
        kind = "exhaustive"
        inst = draw(0)
        q = inst.system.ring.q
        if q ** ks[-1] > testset.cap:
            raise EnumerationCap(f"q^{ks[-1]} exceeds the enumeration cap {testset.cap}")
        for k in ks:
            for vals in itertools.product(range(q), repeat=k):
                record(k, *_nrv(inst.system, inst.guess_vars, vals, D, config))
        prov = {"source": "exhaustive", "seed": testset.seed, "D": D}
    else:
        raise TypeError("unknown testset")
    entries = {(B, k): ProbEntry.counted(wild[B, k], total[k]) for B in Bs for k in ks}
    return ProbabilityTable(kind, entries, prov)


# -- derived steps ------------------------------------------------------------------

def final_step(table: ProbabilityTable, B: int) -> int:
    """Least ``k`` with ``p_B(k) = 0``."""
    for k in table.ks(B):
        if table.p(B, k) == 0:
            return k
    raise NoFinalStep(f"no k with p_{B}(k) = 0")


def median_final_step(table: ProbabilityTable, B: int) -> int:
    """Least ``k`` with ``p_B(k) < 1/2``."""
    for k in table.ks(B):
        if table.p(B, k) < Fraction(1, 2):
            return k
    raise NoFinalStep(f"no k with p_{B}(k) < 0.5")


def full_chain(first: int, last: int) -> list[int]:
    return list(range(first, last + 1))


def _check_steps(steps: Sequence[int]) -> list[int]:
    steps = list(steps)
    if not steps or any(b <= a for a, b in zip(steps, steps[1:])):
        raise ValueError("steps must be nonempty and strictly increasing")
    return steps


def _p_chain(table, B, steps, final_zero):
    ps = [Fraction(1)] + [table.p(B, k) for k in steps]
    if final_zero:
        ps[-1] = Fraction(0)
    return ps


def count_C1(table: ProbabilityTable, B: int, steps: Sequence[int], q: int = 2) -> Fraction:
    """Expected number of GBElimLin calls, ``sum p(k_{i-1}) q^{k_i}`` with ``p(k_0) = 1``."""
    steps = _check_steps(steps)
    ps = _p_chain(table, B, steps, False)
    return sum((ps[i] * q ** k for i, k in enumerate(steps)), Fraction(0))


def count_C2(table: ProbabilityTable, B: int, steps: Sequence[int], q: int = 2,
             final_zero: bool = False) -> Fraction:
    """Expected number of tamed guesses, ``sum (p(k_{i-1}) - p(k_i)) q^{k_i}``.

    ``final_zero`` forces ``p(k_r) = 0`` (the last step leaves no wild guess).
    """
    steps = _check_steps(steps)
    ps = _p_chain(table, B, steps, final_zero)
    return sum(((ps[i] - ps[i + 1]) * q ** k for i, k in enumerate(steps)), Fraction(0))


def complexity_C1(table: ProbabilityTable, B: int, steps: Sequence[int], q: int = 2) -> float:
    return log2_fraction(count_C1(table, B, steps, q))


def complexity_C2(table: ProbabilityTable, B: int, steps: Sequence[int], q: int = 2,
                  final_zero: bool = False) -> float:
    return log2_fraction(count_C2(table, B, steps, q, final_zero))


def _timing(t, a: int, b: int) -> float:
    if callable(t):
        return float(t(a, b))
    if isinstance(t, Mapping):
        if (a, b) not in t:
            raise MissingEntry(f"no timing for steps ({a}, {b})")
        return float(t[a, b])
    return float(t)


def runtime_T(table: ProbabilityTable, B: int, steps: Sequence[int], sigma, tau,
              q: int = 2) -> tuple[float, float, float]:
    """Expected running time ``(T1, T2, T1 + T2)``.

    ``sigma`` / ``tau`` give the mean GBElimLin / GrobnerBasis time for the
    step pair ``(k_{i-1}, k_i)``, with ``k_0 = k_1 - 1`` standing for the
    first step; each may be a constant, a mapping or a callable.
    """
    steps = _check_steps(steps)
    ps = _p_chain(table, B, steps, False)
    prev = [steps[0] - 1] + steps[:-1]
    T1 = Fraction(0)
    T2 = Fraction(0)
    for i, k in enumerate(steps):
        T1 += Fraction(_timing(sigma, prev[i], k)) * ps[i] * q ** k
        T2 += Fraction(_timing(tau, prev[i], k)) * (ps[i] - ps[i + 1]) * q ** k
    return float(T1), float(T2), float(T1 + T2)


def optimality_check(table: ProbabilityTable, B: int, first: int, last: int, q: int = 2,
                     max_subsets: int = 1 << 12) -> dict:
    """Compare ``C2`` over every step chain ending at ``last`` with steps in ``[first, last]``."""
    inner = list(range(first, last))
    if 2 ** len(inner) > max_subsets:
        raise EnumerationCap(f"2^{len(inner)} subsets exceed the cap {max_subsets}")
    best = worst = None
    for mask in range(2 ** len(inner)):
        chain = [k for i, k in enumerate(inner) if mask >> i & 1] + [last]
        c = count_C2(table, B, chain, q)
        if best is None or c < best[0] or (c == best[0] and len(chain) > len(best[1])):
            best = (c, chain)
        if worst is None or c > worst[0] or (c == worst[0] and len(chain) < len(worst[1])):
            worst = (c, chain)
    full = count_C2(table, B, full_chain(first, last), q)
    return {
        "B": B,
        "subsets": 2 ** len(inner),
        "full_chain": log2_fraction(full),
        "min": log2_fraction(best[0]),
        "min_chain": best[1],
        "max": log2_fraction(worst[0]),
        "max_chain": worst[1],
        "full_is_min": full == best[0],
        "one_step_is_max": count_C2(table, B, [last], q) == worst[0],
    }


# -- reports -------------------------------------------------------------------------

@dataclass
class ComplexityReport:
    B: int
    first: int
    final: int
    log2_C: float
    log2_C1: float
    log2_C2: float
    median_final: int | None = None
    log2_C2_avg: float | None = None
    T: tuple[float, float, float] | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d.pop("extra")
        d.update(self.extra)
        return d


__all__.append("ComplexityReport")


def complexity_report(table: ProbabilityTable, correct: ProbabilityTable | None = None,
                      first: int | None = None, q: int = 2, Bs: Iterable[int] | None = None,
                      sigma=None, tau=None) -> list[ComplexityReport]:
    """Worst-case figures per ``B`` (full chain ``first..k''``) and, with a
    correct table, the average case truncated at ``median_final_step``."""
    out = []
    for B in (Bs or table.Bs()):
        k1 = first if first is not None else table.ks(B)[0]
        kpp = final_step(table, B)
        chain = full_chain(k1, kpp)
        rep = ComplexityReport(B, k1, kpp, float(kpp * math.log2(q)),
                               complexity_C1(table, B, chain, q), complexity_C2(table, B, chain, q))
        if correct is not None:
            kbar = median_final_step(correct, B)
            rep.median_final = kbar
            rep.log2_C2_avg = complexity_C2(table, B, full_chain(k1, kbar), q)
        if sigma is not None and tau is not None:
            rep.T = runtime_T(table, B, chain, sigma, tau, q)
        out.append(rep)
    return out


def render_report(reports: Sequence[ComplexityReport]) -> str:
    def row(label, vals):
        return f"{label:<14}" + "".join(f"{v:>9}" for v in vals)

    lines = [row("B", [r.B for r in reports]),
             row("k''", [r.final for r in reports]),
             row("log2(C)", [f"{r.log2_C:.0f}" for r in reports]),
             row("log2(C1)", [f"{r.log2_C1:.2f}" for r in reports]),
             row("log2(C2)", [f"{r.log2_C2:.2f}" for r in reports])]
    if all(r.median_final is not None for r in reports):
        lines.append(row("avg k''", [r.median_final for r in reports]))
        lines.append(row("log2(avg C2)", [f"{r.log2_C2_avg:.2f}" for r in reports]))
    return "\n".join(lines) + "\n"


def figure_csv(reports: Sequence[ComplexityReport]) -> str:
    """Bar-chart data: one-step vs multistep (worst and, if known, average case)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["B", "log2_one_step", "log2_C2_worst", "log2_C2_average"])
    for r in reports:
        w.writerow([r.B, f"{r.log2_C:.2f}", f"{r.log2_C2:.2f}",
                    "" if r.log2_C2_avg is None else f"{r.log2_C2_avg:.2f}"])
    return buf.getvalue()
