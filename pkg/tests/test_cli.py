import json

import pytest

from multisolve.cli import main
from multisolve.dsc import parse_stream
from multisolve.stats import ProbabilityTable
from multisolve.trivium import reduced_taps, trivium_bits


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    assert run("make-reduced", 7, 6, 8, "--seed", 3, "--out", out) == 0
    return out


def write_system(path, variables, generators):
    path.write_text(json.dumps({"q": 2, "variables": variables, "generators": generators}))
    return path


# -- report ------------------------------------------------------------------------------------

def test_report_shipped(tmp_path, capsys):
    assert run("report", "--shipped", "--optimality", "--out", tmp_path) == 0
    text = capsys.readouterr().out
    lines = text.splitlines()
    assert lines[1].split()[1:] == ["116", "115", "115", "114", "114", "113", "112"]
    assert lines[5].split()[2:] == ["111", "111", "110", "109", "109", "108", "108"]
    data = json.loads((tmp_path / "report.json").read_text())
    avg = {r["B"]: r["log2_C2_avg"] for r in data["reports"]}
    assert avg[37] == pytest.approx(106.20, abs=0.02)
    assert all(o["full_is_min"] and o["one_step_is_max"] for o in data["optimality"])
    assert (tmp_path / "figure.csv").read_text().startswith("B,log2_one_step")


def test_report_single_b(capsys):
    assert run("report", "--shipped", "--Bs", "34") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["B", "34"] and lines[1].split() == ["k''", "115"]


def test_report_missing_table():
    assert run("report") == 1


# -- keystream / invert ---------------------------------------------------------------------------

def test_keystream_zero_state(capsys):
    assert run("keystream", "--trivium", "--count", 64) == 0
    assert capsys.readouterr().out.strip() == "0" * 64


def test_keystream_matches_bit_engine(tmp_path):
    out = tmp_path / "ks.txt"
    assert run("keystream", "--reduced", 7, 6, 8, "--random-state", "--seed", 5, "--count", 40,
               "--out", out) == 0
    state_out = tmp_path / "state.txt"
    # the same state, given explicitly, reproduces the stream
    from multisolve.multistep import make_rng
    state = [int(b) for b in make_rng(5).integers(0, 2, size=21)]
    state_out.write_text("".join(map(str, state)))
    bits = trivium_bits(state, 40, reduced_taps(7, 6, 8))[1]
    assert parse_stream(out.read_text()) == bits
    out2 = tmp_path / "ks2.txt"
    assert run("keystream", "--reduced", 7, 6, 8, "--state-file", state_out, "--count", 40,
               "--format", "hex", "--out", out2) == 0
    assert parse_stream(out2.read_text()) == bits


def test_keystream_bad_state_length():
    assert run("keystream", "--reduced", 7, 6, 8, "--state", "0101", "--count", 4) == 1


def test_invert_trivium(tmp_path):
    out = tmp_path / "inverse.txt"
    assert run("invert", "--trivium", "--out", out) == 0
    lines = set(out.read_text().splitlines())
    assert "x(0) -> x(0)*x(1) + x(26) + y(5) + y(83)" in lines
    assert "y(0) -> y(0)*y(1) + y(14) + z(23) + z(110)" in lines
    assert "z(0) -> z(0)*z(1) + x(23) + x(92) + z(44)" in lines
    assert json.loads(out.with_suffix(".json").read_text())["images"]["x(5)"] == "x(4)"


def test_invert_not_invertible(tmp_path):
    spec = {"q": 2, "u": 0, "keystream": "a(0)",
            "registers": [{"name": "a", "length": 2, "update": "a(0)*a(1)"}]}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(spec))
    assert run("invert", "--spec", path) == 2


# -- make-reduced / solve ----------------------------------------------------------------------------

def test_bundle_contents(bundle):
    for name in ("cipher.json", "system.json", "plan.json", "keystream.txt", "planted.txt"):
        assert (bundle / name).exists()
    sysd = json.loads((bundle / "system.json").read_text())
    assert len(sysd["variables"]) == 16 and len(sysd["planted"]) == 16


def test_solve_recovers_planted_state(bundle, tmp_path):
    out = tmp_path / "run"
    assert run("solve", bundle / "system.json", "--plan", bundle / "plan.json", "--out", out) == 0
    sol = json.loads((out / "solution.json").read_text())
    assert sol["status"] == "solution"
    assert sol["state_bits"] == (bundle / "planted.txt").read_text().strip()
    taps = reduced_taps(7, 6, 8)
    observed = parse_stream((bundle / "keystream.txt").read_text())
    assert trivium_bits(sol["state"], len(observed), taps)[1] == observed


def test_count_all_manifests_are_byte_identical(bundle, tmp_path):
    args = ["solve", bundle / "system.json", "--plan", bundle / "plan.json", "--mode", "count-all", "--seed", 1]
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--out", tmp_path / "b") == 0
    a = (tmp_path / "a" / "manifest.json").read_bytes()
    assert a == (tmp_path / "b" / "manifest.json").read_bytes()
    assert json.loads(a)["config"]["seed"] == 1


def test_solve_inconsistent(tmp_path):
    path = write_system(tmp_path / "s.json", ["a", "b"], ["a*b + 1", "a + b + 1"])
    out = tmp_path / "run"
    assert run("solve", path, "--steps", "1", "--B", 0, "--out", out) == 2
    sol = json.loads((out / "solution.json").read_text())
    assert sol["status"] == "no-solution" and sol["basis"] == ["1"]


def test_solve_plan_violation(tmp_path):
    path = write_system(tmp_path / "s.json", [f"x{i}" for i in range(5)],
                        ["x1*x2 + x3*x4 + x0", "x2*x3 + x1*x4 + 1", "x1*x3 + x2*x4 + x0"])
    out = tmp_path / "run"
    assert run("solve", path, "--guess-vars", "x0", "--steps", "1", "--B", 0, "--D", 1, "--out", out) == 3
    assert json.loads((out / "manifest.json").read_text())["status"] == "plan-violation"


def test_solve_resource_limit(bundle, tmp_path):
    out = tmp_path / "run"
    code = run("solve", bundle / "system.json", "--guess-vars", "x(0)", "--steps", "1", "--B", 15,
               "--max-rows", 2, "--max-cols", 2, "--out", out)
    assert code == 4
    assert json.loads((out / "manifest.json").read_text())["status"] == "resource-limit"


def test_solve_needs_plan(bundle, tmp_path):
    assert run("solve", bundle / "system.json", "--out", tmp_path) == 1


# -- estimate / rank ---------------------------------------------------------------------------------

def test_estimate_empty_range(bundle, tmp_path):
    assert run("estimate", "--system", bundle / "system.json", "--ks", "", "--Bs", "4",
               "--testset", "random", "--seed", 0, "--out", tmp_path / "t") == 1


def test_estimate_exhaustive(bundle, tmp_path):
    prefix = tmp_path / "t"
    assert run("estimate", "--system", bundle / "system.json", "--ks", "3:5", "--Bs", "2,4",
               "--testset", "exhaustive", "--seed", 0, "--out", prefix) == 0
    t = ProbabilityTable.load(prefix.with_suffix(".csv"))
    assert t.kind == "exhaustive" and t.ks() == [3, 4, 5] and t.is_nonincreasing()
    assert all(e.total == 2**k for (_, k), e in t.entries.items())
    assert ProbabilityTable.load(prefix.with_suffix(".json")).provenance["config"]["seed"] == 0


def test_estimate_exhaustive_cap(bundle, tmp_path):
    assert run("estimate", "--system", bundle / "system.json", "--ks", "12", "--Bs", "4",
               "--testset", "exhaustive", "--cap", 16, "--seed", 0, "--out", tmp_path / "t") == 1


def test_estimate_random_is_reproducible(bundle, tmp_path):
    args = ["estimate", "--system", bundle / "system.json", "--ks", "4,6", "--Bs", "4",
            "--testset", "random", "--samples", 8, "--seed", 2]
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--out", tmp_path / "b") == 0
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


def test_rank_subsets(bundle, tmp_path, capsys):
    sysd = json.loads((bundle / "system.json").read_text())
    order = sysd["guess_order"]
    cands = tmp_path / "c.json"
    cands.write_text(json.dumps([order[:4], order[-4:], order[:4]]))
    out = tmp_path / "rank.json"
    assert run("rank-subsets", bundle / "system.json", "--candidates", cands, "--samples", 8,
               "--seed", 0, "--out", out) == 0
    rows = json.loads(out.read_text())["ranking"]
    assert sorted(r["candidate"] for r in rows) == [0, 1, 2]
    scores = [r["mean_nrv"] for r in rows]
    assert scores == sorted(scores)
