import itertools
from fractions import Fraction

import numpy as np
import pytest

from helpers import reduced
from multisolve.elimlin import REDUCED, gb_elim_lin
from multisolve.gfpoly import PolyRing
from multisolve.groebner import GeneratorSet
from multisolve.stats import (CorrectTestset, EnumerationCap, ExhaustiveTestset, Instance, MissingEntry,
                              NoFinalStep, ProbabilityTable, ProbEntry, RandomTestset, complexity_C1,
                              complexity_C2, complexity_report, count_C1, count_C2, estimate_probabilities,
                              figure_csv, final_step, median_final_step, optimality_check, render_report,
                              runtime_T)

TABLE1 = ProbabilityTable.trivium("random")
TABLE4 = ProbabilityTable.trivium("correct")
BS = list(range(32, 39))


def table(values, B=0, kind="exhaustive"):
    """Build a one-B table from ``{k: p}``."""
    return ProbabilityTable(kind, {(B, k): ProbEntry(Fraction(p)) for k, p in values.items()})


# -- shipped data ---------------------------------------------------------------------------

def test_shipped_values():
    assert TABLE1.p(32, 106) == Fraction("0.63153")
    assert TABLE1.Bs() == BS and TABLE4.Bs() == BS
    assert TABLE1.ks(32) == list(range(106, 117))
    assert TABLE1.provenance["source"] == "external"


def test_final_steps_match_published():
    assert [final_step(TABLE1, B) for B in BS] == [116, 115, 115, 114, 114, 113, 112]
    assert [median_final_step(TABLE4, B) for B in BS] == [111, 111, 110, 109, 109, 108, 108]


def test_final_step_edge_cases():
    assert final_step(table({3: 0, 4: 0}), 0) == 3
    assert median_final_step(table({3: "0.4", 4: "0.4"}), 0) == 3
    with pytest.raises(NoFinalStep):
        final_step(table({3: "0.5"}), 0)
    with pytest.raises(NoFinalStep):
        median_final_step(table({3: "0.5"}), 0)


def test_missing_entry():
    with pytest.raises(MissingEntry):
        TABLE1.p(31, 106)
    with pytest.raises(MissingEntry):
        count_C2(TABLE1, 32, [100, 116])


# -- complexity formulas ------------------------------------------------------------------------

def test_single_step():
    t = table({10: 0})
    assert complexity_C2(t, 0, [10]) == 10.0
    assert count_C1(t, 0, [10]) == 1024


def test_worst_case_b32():
    assert complexity_C2(TABLE1, 32, range(106, 117)) == pytest.approx(111.63, abs=0.02)


def test_average_case_b37():
    assert complexity_C2(TABLE1, 37, range(106, 109)) == pytest.approx(106.20, abs=0.02)


def test_counts_by_hand():
    # p(2) = 1/2, p(3) = 0: C1 = 4 + 8/2, C2 = (1 - 1/2) 4 + (1/2) 8
    t = table({2: Fraction(1, 2), 3: 0})
    assert count_C1(t, 0, [2, 3]) == 8
    assert count_C2(t, 0, [2, 3]) == 6
    assert count_C2(t, 0, [2, 3]) <= count_C1(t, 0, [2, 3])


def test_final_zero_override():
    t = table({2: Fraction(1, 2), 3: Fraction(1, 4)})
    assert count_C2(t, 0, [2, 3], final_zero=True) == 2 + 8 * Fraction(1, 2)
    assert count_C2(t, 0, [2, 3]) == 2 + 8 * Fraction(1, 4)


def test_steps_must_increase():
    with pytest.raises(ValueError):
        count_C1(TABLE1, 32, [108, 107])


@pytest.mark.parametrize("B", BS)
def test_report_invariants(B):
    chain = range(106, final_step(TABLE1, B) + 1)
    c1, c2 = count_C1(TABLE1, B, chain), count_C2(TABLE1, B, chain)
    assert c2 <= c1 and c2 >= 2**106


def test_runtime_unit_timings_collapse_to_counts():
    chain = list(range(106, 117))
    T1, T2, T = runtime_T(TABLE1, 32, chain, 1, 1)
    assert T1 == pytest.approx(float(count_C1(TABLE1, 32, chain)))
    assert T2 == pytest.approx(float(count_C2(TABLE1, 32, chain)))
    T1b, T2b, Tb = runtime_T(TABLE1, 32, chain, 1, 0)
    assert T2b == 0 and Tb == T1b


def test_runtime_timing_maps():
    t = table({2: Fraction(1, 2), 3: 0})
    T1, T2, _ = runtime_T(t, 0, [2, 3], {(1, 2): 2.0, (2, 3): 1.0}, lambda a, b: 3.0)
    assert T1 == 2.0 * 4 + 1.0 * 4
    assert T2 == 3.0 * 6
    with pytest.raises(MissingEntry):
        runtime_T(t, 0, [2, 3], {(1, 2): 1.0}, 0)


# -- optimality -------------------------------------------------------------------------------------

def test_optimality_on_published_b32():
    rep = optimality_check(TABLE1, 32, 106, 116)
    assert rep["subsets"] == 1024
    assert rep["full_is_min"] and rep["one_step_is_max"]
    assert rep["min"] == pytest.approx(111.63, abs=0.02)
    assert rep["max"] == 116.0


def test_optimality_constant_p():
    t = table({**{k: Fraction(3, 10) for k in range(2, 9)}, 9: 0})
    rep = optimality_check(t, 0, 3, 9)
    assert rep["full_is_min"] and rep["min_chain"] == list(range(3, 10))


def test_optimality_two_step_range():
    for p in (Fraction(0), Fraction(1, 3), Fraction(1)):
        t = table({4: p, 5: 0})
        rep = optimality_check(t, 0, 4, 5)
        assert rep["subsets"] == 2 and rep["full_is_min"]
        # 1 - p(l) >= (1 - p(k)) q^(k-l) + (p(k) - p(l)) with k = 4, l = 5
        assert 1 >= (1 - p) * Fraction(1, 2) + p


def test_optimality_cap():
    with pytest.raises(EnumerationCap):
        optimality_check(TABLE1, 32, 106, 116, max_subsets=512)


# -- reports ----------------------------------------------------------------------------------------

def test_report_rendering():
    reps = complexity_report(TABLE1, TABLE4)
    text = render_report(reps)
    assert "116" in text.splitlines()[1]
    assert "111.63" in text and "106.20" in text
    csv = figure_csv(reps)
    assert csv.splitlines()[0] == "B,log2_one_step,log2_C2_worst,log2_C2_average"
    row = csv.splitlines()[6].split(",")
    assert row[:2] == ["37", "113.00"]
    assert row[2] == f"{reps[5].log2_C2:.2f}" and row[3] == "106.20"
    assert reps[5].log2_C2 == pytest.approx(108.85, abs=0.02)


def test_single_b_report():
    reps = complexity_report(TABLE1, Bs=[35])
    assert len(reps) == 1 and reps[0].final == 114 and reps[0].median_final is None


# -- serialization ----------------------------------------------------------------------------------

def test_csv_and_json_round_trip(tmp_path):
    assert ProbabilityTable.from_csv(TABLE1.to_csv()) == TABLE1
    assert ProbabilityTable.from_json(TABLE4.to_json()) == TABLE4
    counted = ProbabilityTable("random", {(2, 5): ProbEntry.counted(3, 7)}, {"seed": 1})
    for name in ("t.csv", "t.json"):
        counted.save(tmp_path / name)
        back = ProbabilityTable.load(tmp_path / name)
        assert back == counted and back.entries[2, 5].wild == 3


def test_invalid_probability():
    with pytest.raises(ValueError):
        table({1: Fraction(3, 2)})
    with pytest.raises(ValueError):
        ProbEntry.counted(5, 4)


# -- estimation ---------------------------------------------------------------------------------

def test_all_linear_system_gives_zero():
    ring = PolyRing.indexed(4)
    H = GeneratorSet([ring.parse("x0 + x1"), ring.parse("x2 + x3 + 1"), ring.parse("x0*x2 + x1")], ring)
    t = estimate_probabilities(Instance(H, [0, 1, 2]), [1, 2], [0, 1], 2, RandomTestset(8, seed=0))
    assert all(e.p == 0 for e in t.entries.values())


def _recount(inst, ks, Bs, D):
    """Second counting path: substitute each guess and read NRV directly."""
    out = {}
    for k in ks:
        nrvs = []
        for vals in itertools.product((0, 1), repeat=k):
            res = gb_elim_lin(inst.system.evaluate(dict(zip(inst.guess_vars, vals))), D)
            nrvs.append(res.nrv if res.kind == REDUCED else 0)
        for B in Bs:
            out[B, k] = Fraction(sum(n > B for n in nrvs), 2**k)
    return out


def test_exhaustive_matches_recount():
    inst = reduced(0)
    src = Instance(inst.system, inst.guess_vars)
    t = estimate_probabilities(src, range(3, 7), range(2, 5), 2, ExhaustiveTestset())
    ref = _recount(inst, range(3, 7), range(2, 5), 2)
    assert {key: e.p for key, e in t.entries.items()} == ref
    assert t.is_nonincreasing()


@pytest.mark.parametrize("seed", range(3))
def test_exhaustive_monotone_and_optimal(seed):
    inst = reduced(seed)
    t = estimate_probabilities(Instance(inst.system, inst.guess_vars), range(3, 9), [2, 4, 6], 3,
                               ExhaustiveTestset())
    assert t.is_nonincreasing()
    for B in t.Bs():
        try:
            kpp = final_step(t, B)
        except NoFinalStep:
            continue
        if kpp > 3:
            rep = optimality_check(t, B, 3, kpp)
            assert rep["full_is_min"] and rep["one_step_is_max"]


def test_exhaustive_cap():
    inst = reduced(0)
    with pytest.raises(EnumerationCap):
        estimate_probabilities(Instance(inst.system, inst.guess_vars), [12], [4], 2, ExhaustiveTestset(cap=1024))


def test_random_testset_is_reproducible():
    inst = reduced(0)
    src = Instance(inst.system, inst.guess_vars)
    a = estimate_probabilities(src, [4, 6], [4], 2, RandomTestset(6, seed=5))
    b = estimate_probabilities(src, [4, 6], [4], 2, RandomTestset(6, seed=5))
    assert a == b and a.provenance["seed"] == 5 and a.kind == "random"
    fresh = estimate_probabilities(src, [4, 6], [4], 2, RandomTestset(6, seed=5, nested=False))
    assert fresh.entries[4, 4].total == 6


def test_correct_testset_uses_planted_prefix():
    inst = reduced(1)
    src = Instance(inst.system, inst.guess_vars, inst.planted())
    t = estimate_probabilities(src, [4, 12], [4], 2, CorrectTestset(1))
    assert t.kind == "correct" and t.entries[4, 12].total == 1
    with pytest.raises(ValueError):
        estimate_probabilities(Instance(inst.system, inst.guess_vars), [4], [4], 2, CorrectTestset(1))


def test_sample_size_must_be_positive():
    inst = reduced(0)
    with pytest.raises(ValueError):
        estimate_probabilities(Instance(inst.system, inst.guess_vars), [4], [4], 2, RandomTestset(0))


def test_instance_generator_source():
    ring = PolyRing.indexed(3)

    def draw(rng: np.random.Generator) -> Instance:
        c = int(rng.integers(0, 2))
        H = GeneratorSet([ring.parse("x0*x1 + x2" + (" + 1" if c else ""))], ring)
        return Instance(H, [0, 1])

    t = estimate_probabilities(draw, [1, 2], [0], 2, RandomTestset(4, seed=0, instances=3))
    assert t.entries[0, 1].total == 12
