"""Stepwise guess-and-determine solving with wild-set propagation.

A guess prefix ``(a_1, ..., a_k)`` is stored as the integer whose base-q
digits are ``a_1 ... a_k`` (``a_1`` most significant), so integer order is
lexicographic order and extending a prefix by ``l - k`` values is
``prefix * q**(l-k) + j``.
"""

from __future__ import annotations

import logging
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .elimlin import FULLY_LINEAR, ElimOutcome, extend_solution, gb_elim_lin, linear_records
from .gfpoly import PolyRing
from .groebner import EngineConfig, GeneratorSet, ResourceLimitError, groebner_complete

__all__ = [
    "GuessPlan",
    "StepCounters",
    "Solution",
    "WildSet",
    "StepOutcome",
    "MultiSolveResult",
    "PlanViolation",
    "NonemptyFinalWildSet",
    "decode_prefix",
    "evaluate_guess",
    "step_solve",
    "multi_solve",
    "rank_guess_sets",
    "tamed_stability",
    "make_rng",
]

log = logging.getLogger(__name__)

EARLY_EXIT = "early-exit"
COUNT_ALL = "count-all"
WORKERS_ENV = "MULTISOLVE_WORKERS"


class PlanViolation(ValueError):
    pass


class NonemptyFinalWildSet(RuntimeError):
    """The final step still left wild guesses; ``result`` holds what was computed."""

    def __init__(self, message: str, result: "MultiSolveResult"):
        super().__init__(message)
        self.result = result


def make_rng(seed: int | None, *spawn_key: int) -> np.random.Generator:
    """Counter-based generator; ``spawn_key`` selects an independent substream."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(spawn_key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class GuessPlan:
    guess_vars: tuple[int, ...]
    steps: tuple[int, ...]
    B: int
    D: int

    def __post_init__(self):
        object.__setattr__(self, "guess_vars", tuple(int(v) for v in self.guess_vars))
        object.__setattr__(self, "steps", tuple(int(k) for k in self.steps))
        if not self.steps:
            raise PlanViolation("steps must be nonempty")
        if any(b <= a for a, b in zip(self.steps, self.steps[1:])) or self.steps[0] < 1:
            raise PlanViolation("steps must be strictly increasing positive integers")
        if self.steps[-1] > len(self.guess_vars):
            raise PlanViolation("last step exceeds the number of guess variables")
        if len(set(self.guess_vars)) != len(self.guess_vars):
            raise PlanViolation("guess variables must be distinct")
        if self.B < 0 or self.D < 1:
            raise PlanViolation("need B >= 0 and D >= 1")

    def check_ring(self, ring: PolyRing) -> None:
        if any(not 0 <= v < ring.n for v in self.guess_vars):
            raise PlanViolation("guess variable outside the ring")
        if self.B > ring.n:
            raise PlanViolation("B exceeds the number of variables")

    def to_json(self, ring: PolyRing | None = None) -> dict:
        gv = [ring.names[v] for v in self.guess_vars] if ring else list(self.guess_vars)
        return {"guess_vars": gv, "steps": list(self.steps), "B": self.B, "D": self.D}

    @classmethod
    def from_json(cls, data: dict, ring: PolyRing | None = None) -> "GuessPlan":
        gv = [ring.var_index(v) if ring else int(v) for v in data["guess_vars"]]
        return cls(tuple(gv), tuple(data["steps"]), int(data["B"]), int(data["D"]))


@dataclass
class StepCounters:
    step: int
    elim_calls: int = 0
    gb_calls: int = 0
    wild: int = 0
    tamed: int = 0
    inconsistent: int = 0
    solutions: int = 0
    resource_errors: int = 0

    def merge(self, other: "StepCounters") -> None:
        for f in ("elim_calls", "gb_calls", "wild", "tamed", "inconsistent", "solutions", "resource_errors"):
            setattr(self, f, getattr(self, f) + getattr(other, f))


@dataclass
class Solution:
    step: int
    prefix: int
    basis: GeneratorSet
    eliminated: list
    assignment: dict[int, int] | None

    def values(self, n: int) -> list[int] | None:
        if self.assignment is None:
            return None
        return [self.assignment[i] for i in range(n)]


_MAGIC = b"MSWS"
_VERSION = 1
_HEADER = struct.Struct("<4sHHII")


class WildSet:
    """Sorted prefixes of length ``k``, held in memory or in a spill file."""

    def __init__(self, k: int, q: int, prefixes: Iterable[int] = (), path: str | os.PathLike | None = None,
                 count: int | None = None):
        self.k = k
        self.q = q
        self.path = Path(path) if path is not None else None
        self._items: list[int] | None = None if path is not None else sorted(prefixes)
        self._count = count

    @property
    def record_size(self) -> int:
        return max(1, ((self.q ** self.k - 1).bit_length() + 7) // 8)

    def __len__(self) -> int:
        if self._items is not None:
            return len(self._items)
        return self._count

    def __iter__(self) -> Iterator[int]:
        if self._items is not None:
            return iter(self._items)
        return self._read_records()

    def to_list(self) -> list[int]:
        return list(self)

    def __eq__(self, other):
        if not isinstance(other, WildSet):
            return NotImplemented
        return (self.k, self.q) == (other.k, other.q) and self.to_list() == other.to_list()

    def spill(self, path: str | os.PathLike) -> "WildSet":
        """Write to ``path`` and return a file-backed wild set."""
        size = self.record_size
        items = list(self)
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, _VERSION, self.q, self.k, len(items)))
            for p in items:
                fh.write(p.to_bytes(size, "little"))
        return WildSet(self.k, self.q, path=path, count=len(items))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "WildSet":
        with open(path, "rb") as fh:
            magic, version, q, k, count = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC or version != _VERSION:
            raise ValueError(f"{path}: not a wild-set file")
        return cls(k, q, path=path, count=count)

    def _read_records(self) -> Iterator[int]:
        size = self.record_size
        with open(self.path, "rb") as fh:
            fh.seek(_HEADER.size)
            for _ in range(self._count):
                yield int.from_bytes(fh.read(size), "little")


@dataclass
class StepOutcome:
    kind: str  # "solution" or "wild_set"
    wild: WildSet
    counters: StepCounters
    solution: Solution | None = None
    solutions: list[Solution] = field(default_factory=list)


@dataclass
class MultiSolveResult:
    solution: Solution | None
    counters: list[StepCounters]
    wild_sizes: list[int]
    solutions: list[Solution] = field(default_factory=list)

    @property
    def inconsistent(self) -> bool:
        return self.solution is None

    def manifest(self, plan: GuessPlan, ring: PolyRing, seed=None, mode=EARLY_EXIT) -> dict:
        sol = None
        if self.solution is not None:
            sol = {"step": self.solution.step, "prefix": self.solution.prefix,
                   "values": self.solution.values(ring.n),
                   "basis": self.solution.basis.to_text()}
        return {"plan": plan.to_json(ring), "seed": seed, "mode": mode,
                "counters": [asdict(c) for c in self.counters],
                "wild_sizes": self.wild_sizes, "solution": sol}


def decode_prefix(prefix: int, k: int, q: int) -> list[int]:
    digits = [0] * k
    for i in range(k - 1, -1, -1):
        prefix, digits[i] = divmod(prefix, q)
    return digits


def evaluate_guess(H: GeneratorSet, plan: GuessPlan, values: Sequence[int],
                   config: EngineConfig | None = None) -> ElimOutcome:
    """GBElimLin on ``H`` with ``guess_vars[i] = values[i]`` fixed.

    The guess is substituted instead of adjoining ``x_i - a_i``; the two
    generate the same ideal once the guessed variables are eliminated.
    """
    assign = {plan.guess_vars[i]: int(a) for i, a in enumerate(values)}
    ring = H.ring
    guessed = [(v, ring.const(a)) for v, a in assign.items()]
    return gb_elim_lin(H.evaluate(assign), plan.D, config, eliminated=guessed)


def _classify(H, plan, l, prefix, config, counters: StepCounters) -> tuple[str, Solution | None]:
    values = decode_prefix(prefix, l, H.ring.q)
    counters.elim_calls += 1
    out = evaluate_guess(H, plan, values, config)
    if out.kind == FULLY_LINEAR:
        counters.tamed += 1
        if out.inconsistent:
            counters.inconsistent += 1
            return "inconsistent", None
        counters.solutions += 1
        return "solution", Solution(l, prefix, out.basis, out.eliminated, out.solution())
    if out.nrv > plan.B:
        counters.wild += 1
        return "wild", None
    counters.tamed += 1
    counters.gb_calls += 1
    res = groebner_complete(out.basis, config).basis
    if res.is_one():
        counters.inconsistent += 1
        return "inconsistent", None
    if res.max_degree() <= 1:
        counters.solutions += 1
        recs = out.eliminated + linear_records(res)
        assign = _solve_linear(res, out.eliminated, H.ring)
        return "solution", Solution(l, prefix, res, recs, assign)
    log.warning("prefix %d at step %d has several solutions; treated as tamed", prefix, l)
    return "ambiguous", None


def _solve_linear(G: GeneratorSet, eliminated, ring) -> dict[int, int] | None:
    partial = {}
    for var, tail in linear_records(G):
        if not tail.is_constant():
            return None
        partial[var] = tail.constant_value()
    try:
        full = extend_solution(partial, eliminated)
    except Exception:
        return None
    return full if len(full) == ring.n else None


def _children(W: WildSet | None, l: int, q: int) -> Iterator[int]:
    if W is None:
        yield from range(q ** l)
        return
    span = q ** (l - W.k)
    for p in W:
        base = p * span
        yield from range(base, base + span)


def _run_chunk(H, plan, l, prefixes, early, config):
    counters = StepCounters(l)
    wild, sols = [], []
    for p in prefixes:
        try:
            kind, sol = _classify(H, plan, l, p, config, counters)
        except ResourceLimitError as exc:
            exc.prefix = decode_prefix(p, l, H.ring.q)
            raise
        if kind == "wild":
            wild.append(p)
        elif kind == "solution":
            sols.append(sol)
            if early:
                break
    return wild, counters, sols


def _worker_count(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return max(1, workers)


def step_solve(H: GeneratorSet, W: WildSet | None, l: int, plan: GuessPlan, *,
               mode: str = EARLY_EXIT, workers: int | None = None,
               config: EngineConfig | None = None, chunk_size: int = 4096) -> StepOutcome:
    """One StepSolve call: extend every prefix of ``W`` to length ``l`` and classify.

    ``W=None`` enumerates all of ``F^l``.
    """
    if l not in plan.steps:
        raise PlanViolation(f"{l} is not a step of the plan")
    q = H.ring.q
    if W is not None and W.k >= l:
        raise PlanViolation("wild-set prefixes must be shorter than the next step")
    early = mode == EARLY_EXIT
    workers = _worker_count(workers)
    counters = StepCounters(l)
    wild: list[int] = []
    sols: list[Solution] = []
    if workers == 1:
        w, c, s = _run_chunk(H, plan, l, _children(W, l, q), early, config)
        wild, sols = w, s
        counters.merge(c)
    else:
        it = _children(W, l, q)
        chunks = []
        while True:
            chunk = [p for _, p in zip(range(chunk_size), it)]
            if not chunk:
                break
            chunks.append(chunk)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, H, plan, l, ch, early, config) for ch in chunks]
            for fut in futures:  # merged in chunk order for determinism
                w, c, s = fut.result()
                wild.extend(w)
                counters.merge(c)
                sols.extend(s)
                if early and sols:
                    for rest in futures:
                        rest.cancel()
                    break
    wset = WildSet(l, q, wild)
    if sols:
        return StepOutcome("solution", wset, counters, sols[0], sols)
    return StepOutcome("wild_set", wset, counters)


def multi_solve(H: GeneratorSet, plan: GuessPlan, *, mode: str = EARLY_EXIT,
                workers: int | None = None, config: EngineConfig | None = None,
                spill_dir: str | os.PathLike | None = None,
                spill_threshold: int = 1 << 20) -> MultiSolveResult:
    """MultiSolve: thread wild sets through the plan's steps.

    Returns the first solution in early-exit mode; in count-all mode every
    step is enumerated so the counters are unbiased.  A result without a
    solution means the system is inconsistent (basis ``{1}``).
    """
    plan.check_ring(H.ring)
    counters: list[StepCounters] = []
    sizes: list[int] = []
    found: list[Solution] = []
    W: WildSet | None = None
    for l in plan.steps:
        out = step_solve(H, W, l, plan, mode=mode, workers=workers, config=config)
        counters.append(out.counters)
        found.extend(out.solutions)
        W = out.wild
        if spill_dir is not None and len(W) > spill_threshold:
            W = W.spill(Path(spill_dir) / f"wild_k{l}.bin")
        sizes.append(len(W))
        if out.kind == "solution" and mode == EARLY_EXIT:
            return MultiSolveResult(out.solution, counters, sizes, found)
        if len(W) == 0:
            break
    result = MultiSolveResult(found[0] if found else None, counters, sizes, found)
    if W is not None and len(W):
        raise NonemptyFinalWildSet(f"{len(W)} wild guesses remain after step {plan.steps[-1]}", result)
    return result


def rank_guess_sets(H: GeneratorSet, candidates: Sequence[Sequence[int]], samples: int, D: int,
                    seed: int | None = 0, values: np.ndarray | None = None) -> list[tuple[int, float]]:
    """Rank candidate guess sets by mean NRV after GBElimLin, lowest first.

    Every candidate is evaluated on the same sampled value rows; ``values``
    overrides the random rows (for example the correct values of planted
    instances).  Returns ``(candidate index, mean NRV)`` pairs.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    sizes = {len(c) for c in candidates}
    if len(sizes) > 1:
        raise ValueError("candidate sets must have equal size")
    size = sizes.pop() if sizes else 0
    q = H.ring.q
    if values is None:
        values = make_rng(seed).integers(0, q, size=(samples, size))
    scores = []
    for idx, cand in enumerate(candidates):
        plan = GuessPlan(tuple(cand), (max(1, size),), H.ring.n, D) if size else None
        total = 0
        for row in values[:samples]:
            out = evaluate_guess(H, plan, row) if plan else gb_elim_lin(H, D)
            total += out.nrv
        scores.append((idx, total / samples))
    return sorted(scores, key=lambda s: (s[1], s[0]))


def tamed_stability(H: GeneratorSet, plan: GuessPlan, k: int, l: int, samples: int,
                    seed: int | None = 0, config: EngineConfig | None = None) -> dict:
    """Check that sampled tamed ``k``-prefixes only have tamed ``l``-extensions."""
    q = H.ring.q
    rng = make_rng(seed)
    tamed_checked = 0
    violations = []
    for p in rng.integers(0, q ** k, size=samples):
        p = int(p)
        c = StepCounters(k)
        kind, _ = _classify(H, plan, k, p, config, c)
        if kind == "wild":
            continue
        tamed_checked += 1
        span = q ** (l - k)
        for child in range(p * span, (p + 1) * span):
            cc = StepCounters(l)
            if _classify(H, plan, l, child, config, cc)[0] == "wild":
                violations.append((p, child))
                log.info("tamed prefix %d has wild extension %d", p, child)
    return {"tamed_checked": tamed_checked, "violations": violations}
