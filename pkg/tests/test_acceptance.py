"""Acceptance criteria 1-9, each at its stated tolerance and runtime budget."""

import time
from pathlib import Path

import numpy as np
import pytest

from acceptance_log import verdict
from helpers import inconsistent, lifted_solutions, linear_solution_basis, random_poly, reduced, solutions, \
    unique_planted
from multisolve.dsc import invert_endo, keystream_polynomials, transition_endo
from multisolve.elimlin import REDUCED, gb_elim_lin
from multisolve.gfpoly import PolyRing
from multisolve.groebner import GeneratorSet, groebner_complete
from multisolve.multistep import COUNT_ALL, multi_solve
from multisolve.stats import (ExhaustiveTestset, Instance, ProbabilityTable, complexity_C2, count_C1, count_C2,
                              estimate_probabilities, final_step, median_final_step, optimality_check)
from multisolve.trivium import (evaluate_lanes, pack_lanes, random_state, reduced_plan, sliced_clock,
                                trivium_attack_system, trivium_bits, trivium_spec, unpack_lanes)

BS = list(range(32, 39))
FINAL = [116, 115, 115, 114, 114, 113, 112]
MEDIAN_FINAL = [111, 111, 110, 109, 109, 108, 108]
WORST = [111.63, 111.13, 110.47, 109.93, 109.37, 108.85, 108.29]
AVERAGE = [108.79, 108.88, 107.67, 107.06, 107.13, 106.20, 106.35]
TOL = 0.02


# -- 1. published tables ------------------------------------------------------------------------

def test_criterion_1_final_steps():
    t0 = time.perf_counter()
    table, correct = ProbabilityTable.trivium("random"), ProbabilityTable.trivium("correct")
    kpp = [final_step(table, B) for B in BS]
    kbar = [median_final_step(correct, B) for B in BS]
    elapsed = time.perf_counter() - t0
    ok = kpp == FINAL and kbar == MEDIAN_FINAL and elapsed < 1
    verdict("criterion 1 (final steps)", ok, f"k''={kpp} k-bar''={kbar} in {elapsed:.3f}s")
    assert ok


@pytest.mark.parametrize("B,expected", list(zip(BS, WORST)))
def test_criterion_1_worst_case(B, expected):
    t0 = time.perf_counter()
    table = ProbabilityTable.trivium("random")
    got = complexity_C2(table, B, range(106, final_step(table, B) + 1))
    elapsed = time.perf_counter() - t0
    ok = abs(got - expected) <= TOL and elapsed < 1
    verdict(f"criterion 1 (worst case B={B})", ok, f"log2 C2={got:.3f} expected {expected} +/- {TOL}")
    assert ok


@pytest.mark.parametrize("B,expected", list(zip(BS, AVERAGE)))
def test_criterion_1_average_case(B, expected):
    t0 = time.perf_counter()
    table, correct = ProbabilityTable.trivium("random"), ProbabilityTable.trivium("correct")
    got = complexity_C2(table, B, range(106, median_final_step(correct, B) + 1))
    elapsed = time.perf_counter() - t0
    ok = abs(got - expected) <= TOL and elapsed < 1
    verdict(f"criterion 1 (average case B={B})", ok, f"log2 avg C2={got:.3f} expected {expected} +/- {TOL}")
    assert ok


# -- 2. optimality of the full chain --------------------------------------------------------------

def test_criterion_2_published():
    t0 = time.perf_counter()
    rep = optimality_check(ProbabilityTable.trivium("random"), 32, 106, 116)
    elapsed = time.perf_counter() - t0
    ok = (rep["subsets"] == 1024 and rep["full_is_min"] and rep["one_step_is_max"]
          and rep["max"] == 116.0 and elapsed < 1)
    verdict("criterion 2 (B=32 published)", ok,
            f"{rep['subsets']} subsets, min {rep['min']:.2f} at full chain, max {rep['max']:.0f}, {elapsed:.3f}s")
    assert ok


# -- 3. exact counts on reduced Trivium -----------------------------------------------------------

EXACT_B, EXACT_D, EXACT_FIRST = 4, 3, 4


def _exhaustive_to_final(inst):
    """Exhaustive table from the first step up to the least ``k`` with ``p = 0``."""
    src = Instance(inst.system, inst.guess_vars)
    k_hi = EXACT_FIRST + 3
    while True:
        table = estimate_probabilities(src, range(EXACT_FIRST, k_hi + 1), [EXACT_B], EXACT_D,
                                       ExhaustiveTestset(cap=1 << 14))
        if table.p(EXACT_B, k_hi) == 0:
            return table, final_step(table, EXACT_B)
        k_hi += 1


@pytest.fixture(scope="module")
def exact_runs():
    t0 = time.perf_counter()
    runs = []
    for seed in range(5):
        inst = reduced(seed)
        table, kpp = _exhaustive_to_final(inst)
        plan = reduced_plan(inst, EXACT_B, EXACT_D, EXACT_FIRST, kpp)
        runs.append((seed, inst, table, kpp, multi_solve(inst.system, plan, mode=COUNT_ALL)))
    return runs, time.perf_counter() - t0


def test_criterion_3_exact_counts(exact_runs):
    runs, elapsed = exact_runs
    ok = len(runs) >= 5 and elapsed < 600
    details = []
    for seed, inst, table, kpp, res in runs:
        steps = list(range(EXACT_FIRST, kpp + 1))
        c1, c2 = count_C1(table, EXACT_B, steps), count_C2(table, EXACT_B, steps)
        calls = sum(c.elim_calls for c in res.counters)
        tamed = sum(c.tamed for c in res.counters)
        same = (c1.denominator == 1 and c2.denominator == 1 and c1 == calls and c2 == tamed
                and 2**kpp <= 2**14)
        found = res.solution is not None and inst.attack.lift(res.solution.assignment) == inst.state
        ok &= same and found
        details.append(f"seed {seed}: k''={kpp} C1={c1}/{calls} C2={c2}/{tamed}")
    verdict("criterion 3 (exact counts)", ok, "; ".join(details) + f"; {elapsed:.1f}s")
    assert ok


def test_criterion_2_exhaustive_tables(exact_runs):
    runs, _ = exact_runs
    ok = True
    for _, _, table, kpp, _ in runs:
        if kpp > EXACT_FIRST:
            rep = optimality_check(table, EXACT_B, EXACT_FIRST, kpp)
            ok &= rep["full_is_min"] and rep["one_step_is_max"]
        ok &= table.is_nonincreasing()
    verdict("criterion 2 (exhaustive toy tables)", ok, f"{len(runs)} tables")
    assert ok


# -- 4. Groebner correctness ------------------------------------------------------------------------

def test_criterion_4_groebner():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    unique_ok = empty_ok = 0
    for i in range(200):
        n = int(rng.integers(4, 17))
        ring = PolyRing.indexed(n)
        polys, a = unique_planted(ring, rng, n + 2, terms=12)
        assert solutions(polys, ring) == {tuple(a)}
        unique_ok += groebner_complete(GeneratorSet(polys, ring)).basis == linear_solution_basis(ring, a)
        ring = PolyRing.indexed(int(rng.integers(4, 17)))
        polys = inconsistent(ring, rng, ring.n + 2, terms=12)
        assert not solutions(polys, ring)
        empty_ok += groebner_complete(GeneratorSet(polys, ring)).basis.is_one()
    elapsed = time.perf_counter() - t0
    ok = unique_ok == 200 and empty_ok == 200 and elapsed < 300
    verdict("criterion 4 (Groebner correctness)", ok,
            f"{unique_ok}/200 planted, {empty_ok}/200 inconsistent, {elapsed:.1f}s")
    assert ok


# -- 5. elimination soundness ------------------------------------------------------------------------

def test_criterion_5_elimination():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    checked = agree = 0
    while checked < 200:
        n = int(rng.integers(5, 15))
        ring = PolyRing.indexed(n)
        polys = [random_poly(ring, rng, 5, 2) for _ in range(n - 3)]
        polys += [random_poly(ring, rng, 3, 1) for _ in range(2)]
        H = GeneratorSet([p for p in polys if p], ring)
        out = gb_elim_lin(H, 2)
        if out.kind != REDUCED:
            continue
        checked += 1
        agree += lifted_solutions(out, ring) == solutions(H, ring)
    elapsed = time.perf_counter() - t0
    ok = agree == checked and elapsed < 300
    verdict("criterion 5 (elimination soundness)", ok, f"{agree}/{checked} reduced outcomes, {elapsed:.1f}s")
    assert ok


# -- 6. Trivium symbolic / bit-level consistency -------------------------------------------------------

def test_criterion_6_trivium_consistency():
    t0 = time.perf_counter()
    spec = trivium_spec()
    rng = np.random.default_rng(6)
    states = rng.integers(0, 2, size=(100, 288)).astype(np.uint8)
    lanes = pack_lanes(states)
    mask = (1 << 100) - 1
    polys = keystream_polynomials(spec, 0, 300)
    symbolic = unpack_lanes([evaluate_lanes(p, lanes, mask) for p in polys], 100)
    bitlevel = np.array([trivium_bits(list(s), 300)[1] for s in states], dtype=np.uint8)
    stream_ok = bool((symbolic == bitlevel).all())

    inv = invert_endo(transition_endo(spec))
    parse = spec.ring.parse
    display = {"x(0)": "y(5) + x(26) + y(83) + x(0)*x(1)",
               "y(0)": "y(14) + z(23) + z(110) + y(0)*y(1)",
               "z(0)": "x(23) + z(44) + x(92) + z(0)*z(1)"}
    inv_ok = True
    for name, length in spec.registers:
        for j in range(length):
            cell = f"{name}({j})"
            want = parse(display[cell]) if j == 0 else parse(f"{name}({j - 1})")
            inv_ok &= inv.image(cell) == want

    many = rng.integers(0, 2, size=(10_000, 288)).astype(np.uint8)
    T = transition_endo(spec)
    full = (1 << 10_000) - 1
    lanes = pack_lanes(many)
    fwd = [evaluate_lanes(T.images[i], lanes, full) for i in range(288)]
    back = [evaluate_lanes(inv.images[i], fwd, full) for i in range(288)]
    one_clock = back == lanes and (unpack_lanes(fwd, 10_000) == sliced_clock(many, 1)[0]).all()
    moved, _ = sliced_clock(many, 1000)
    restored, _ = sliced_clock(moved, 1000, inverse=True)
    round_trip = bool(one_clock and (restored == many).all())
    elapsed = time.perf_counter() - t0
    ok = stream_ok and inv_ok and round_trip and elapsed < 600
    verdict("criterion 6 (Trivium consistency)", ok,
            f"keystream 100x300 {stream_ok}, inverse display {inv_ok}, 10^4 round trips {round_trip}, "
            f"{elapsed:.1f}s")
    assert ok


# -- 7. attack-system shape ------------------------------------------------------------------------------

def test_criterion_7_attack_system():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    ok = True
    degrees = []
    for _ in range(20):
        state = random_state(rng, 288)
        _, bits = trivium_bits(state, 240)
        A = trivium_attack_system(bits)
        point = A.restrict(state)
        degrees.append(A.system.max_degree())
        ok &= (A.ring.n == 222 and len(A.eliminated) == 66 and len(A.system.variables()) == 222
               and A.system.max_degree() <= 5 and all(g.value_at(point) == 0 for g in A.system))
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    verdict("criterion 7 (attack-system shape)", ok,
            f"20 states, 222 variables, max degree {max(degrees)}, {elapsed:.1f}s")
    assert ok


# -- 8. desk-scale attack -------------------------------------------------------------------------------

def test_criterion_8_reduced_attack():
    t0 = time.perf_counter()
    recovered = regenerated = 0
    for seed in range(20):
        inst = reduced(seed)
        res = multi_solve(inst.system, reduced_plan(inst, 4))
        if res.solution is None:
            continue
        state = inst.attack.lift(res.solution.assignment)
        recovered += state == inst.state
        regenerated += trivium_bits(state, inst.h, inst.taps)[1] == inst.attack.observed
    elapsed = time.perf_counter() - t0
    ok = recovered == 20 and regenerated == 20 and elapsed < 600
    verdict("criterion 8 (reduced (7,6,8) attack)", ok,
            f"{recovered}/20 states recovered, {regenerated}/20 keystreams regenerated, {elapsed:.1f}s")
    assert ok


# -- 9. scope note --------------------------------------------------------------------------------------

def test_criterion_9_scope_note():
    readme = (Path(__file__).resolve().parents[1] / "README.md").read_text()
    ok = "not executed" in readme and "criteria 1" in readme
    verdict("criterion 9 (non-reproducibility note)", ok,
            "the full 2^106.2 attack is not executed; its figures rest on criteria 1-3")
    assert ok
