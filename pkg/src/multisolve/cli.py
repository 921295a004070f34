"""Command-line interface: ``multisolve <subcommand> ...``.

Every JSON artifact embeds the resolved configuration (``config``), the seed
and the package version.  Exit codes: 0 ok, 2 no solution, 3 plan violation,
4 resource limit, 1 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .dsc import DifferenceCipherSpec, NotInvertible, format_stream, invert_endo, keystream, \
    parse_stream, transition_endo
from .gfpoly import PolyRing, PolynomialError
from .groebner import DEFAULT_CAP, EngineConfig, GeneratorSet, ResourceLimitError
from .multistep import COUNT_ALL, EARLY_EXIT, GuessPlan, NonemptyFinalWildSet, PlanViolation, make_rng, \
    multi_solve, rank_guess_sets
from .stats import (CorrectTestset, EnumerationCap, ExhaustiveTestset, Instance, MissingEntry, NoFinalStep,
                    ProbabilityTable, RandomTestset, complexity_report, estimate_probabilities, figure_csv,
                    optimality_check, render_report)
from .trivium import reduced_instance, reduced_plan, reduced_taps, trivium_spec

log = logging.getLogger("multisolve")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_SOLUTION = 2
EXIT_PLAN = 3
EXIT_RESOURCE = 4


class UsageError(ValueError):
    pass


# -- file formats ----------------------------------------------------------------------

def dump_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def load_system(path: str | Path) -> dict:
    """Read a system file.

    ``{"q", "variables", "generators"}`` plus optional ``planted`` (values of
    ``variables``) and ``lift`` (``state_variables`` and ``eliminated``, the
    images of the removed state cells over ``variables``).
    """
    data = json.loads(Path(path).read_text())
    try:
        ring = PolyRing(data["variables"], int(data.get("q", 2)))
        gens = GeneratorSet([ring.parse(s) for s in data["generators"]], ring)
    except KeyError as exc:
        raise UsageError(f"system file lacks {exc}") from None
    return {"ring": ring, "system": gens, "planted": data.get("planted"), "lift": data.get("lift"),
            "guess_order": data.get("guess_order")}


def system_json(ring: PolyRing, gens: GeneratorSet, planted=None, lift=None, guess_order=None) -> dict:
    out = {"q": ring.q, "variables": list(ring.names), "generators": gens.to_text()}
    if planted is not None:
        out["planted"] = [int(v) for v in planted]
    if lift is not None:
        out["lift"] = lift
    if guess_order is not None:
        out["guess_order"] = list(guess_order)
    return out


def _lift_state(lift: dict, ring: PolyRing, values: Sequence[int]) -> list[int]:
    assign = dict(enumerate(int(v) for v in values))
    images = {name: ring.parse(text) for name, text in lift["eliminated"].items()}
    state = []
    for name in lift["state_variables"]:
        if name in images:
            state.append(images[name].evaluate(assign).constant_value())
        else:
            state.append(assign[ring.var_index(name)])
    return state


def _range(text: str) -> list[int]:
    """``a:b`` (inclusive), ``a,b,c`` or a single integer."""
    text = text.strip()
    if ":" in text:
        a, b = (int(t) for t in text.split(":", 1))
        return list(range(a, b + 1))
    return [int(t) for t in text.split(",") if t.strip()]


def _engine(args) -> EngineConfig:
    return EngineConfig(max_rows=args.max_rows, max_cols=args.max_cols)


def _config(args, **extra) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "verbose", "out")}
    cfg.update(extra)
    cfg["version"] = __version__
    return cfg


def _load_spec(args) -> DifferenceCipherSpec:
    if getattr(args, "trivium", False):
        return trivium_spec()
    if getattr(args, "reduced", None):
        r1, r2, r3 = args.reduced
        return reduced_taps(r1, r2, r3, args.taps_seed).spec()
    if getattr(args, "spec", None):
        return DifferenceCipherSpec.load(args.spec)
    raise UsageError("give --spec FILE, --trivium or --reduced R1 R2 R3")


# -- solve -----------------------------------------------------------------------------

def _plan_from_args(args, ring: PolyRing, order) -> GuessPlan:
    if args.plan:
        data = json.loads(Path(args.plan).read_text())
        return GuessPlan.from_json(data.get("plan", data), ring)
    if args.guess_vars:
        names = [s.strip() for s in args.guess_vars.split(",") if s.strip()]
    elif order:
        names = list(order)
    else:
        names = list(ring.names)
    if args.steps is None or args.B is None:
        raise UsageError("need --plan, or --steps and --B")
    steps = _range(args.steps)
    names = names[:steps[-1]] if steps else names
    return GuessPlan(tuple(ring.var_index(n) for n in names), tuple(steps), args.B, args.D)


def cmd_solve(args) -> int:
    sysd = load_system(args.system)
    ring, H = sysd["ring"], sysd["system"]
    plan = _plan_from_args(args, ring, sysd["guess_order"])
    out = Path(args.out)
    cfg = _config(args, plan=plan.to_json(ring))
    mode = COUNT_ALL if args.mode == "count-all" else EARLY_EXIT
    code = EXIT_OK
    try:
        res = multi_solve(H, plan, mode=mode, workers=args.workers, config=_engine(args),
                          spill_dir=out if args.spill_threshold else None,
                          spill_threshold=args.spill_threshold or 1 << 62)
    except NonemptyFinalWildSet as exc:
        dump_json(out / "manifest.json", {"config": cfg, "seed": args.seed, "version": __version__,
                                           "status": "plan-violation", "error": str(exc),
                                           **exc.result.manifest(plan, ring, args.seed, mode)})
        log.error("%s", exc)
        return EXIT_PLAN
    except ResourceLimitError as exc:
        dump_json(out / "manifest.json", {"config": cfg, "seed": args.seed, "version": __version__,
                                           "status": "resource-limit", "error": str(exc),
                                           "prefix": exc.prefix})
        log.error("%s", exc)
        return EXIT_RESOURCE
    manifest = res.manifest(plan, ring, args.seed, mode)
    if res.solution is None:
        sol = {"status": "no-solution", "basis": ["1"]}
        code = EXIT_NO_SOLUTION
    else:
        values = res.solution.values(ring.n)
        sol = {"status": "solution", "basis": res.solution.basis.to_text(),
               "assignment": None if values is None else dict(zip(ring.names, values))}
        if values is not None and sysd["lift"]:
            state = _lift_state(sysd["lift"], ring, values)
            sol["state"] = state
            sol["state_bits"] = format_stream(state)
        if mode == COUNT_ALL:
            sol["solutions"] = [s.values(ring.n) for s in res.solutions]
    sol.update({"config": cfg, "seed": args.seed, "version": __version__})
    manifest.update({"config": cfg, "version": __version__, "status": sol["status"]})
    dump_json(out / "solution.json", sol)
    dump_json(out / "manifest.json", manifest)
    print(sol["status"])
    return code


# -- estimate --------------------------------------------------------------------------

def _reduced_source(args):
    taps = reduced_taps(*args.reduced, args.taps_seed)

    def draw(rng: np.random.Generator) -> Instance:
        inst = reduced_instance(taps, int(rng.integers(0, 2**31)), args.h_max)
        return Instance(inst.system, inst.guess_vars, inst.planted())

    return draw


def cmd_estimate(args) -> int:
    ks, Bs = _range(args.ks), _range(args.Bs)
    if not ks or not Bs:
        raise UsageError("empty k or B range")
    if args.system:
        sysd = load_system(args.system)
        ring = sysd["ring"]
        names = args.guess_vars.split(",") if args.guess_vars else (sysd["guess_order"] or list(ring.names))
        source = Instance(sysd["system"], [ring.var_index(n) for n in names], sysd["planted"])
    elif args.reduced:
        source = _reduced_source(args)
    else:
        raise UsageError("give --system FILE or --reduced R1 R2 R3")
    if args.testset == "random":
        testset = RandomTestset(args.samples, args.seed, args.instances, not args.fresh)
    elif args.testset == "correct":
        testset = CorrectTestset(args.instances, args.seed)
    else:
        testset = ExhaustiveTestset(args.seed, args.cap)
    table = estimate_probabilities(source, ks, Bs, args.D, testset, _engine(args))
    table.provenance["config"] = _config(args)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    table.save(prefix.with_suffix(".csv"))
    table.save(prefix.with_suffix(".json"))
    print(f"wrote {prefix.with_suffix('.csv')} and {prefix.with_suffix('.json')}")
    return EXIT_OK


# -- report ----------------------------------------------------------------------------

def cmd_report(args) -> int:
    if args.shipped:
        table, correct = ProbabilityTable.trivium("random"), ProbabilityTable.trivium("correct")
    else:
        if not args.table:
            raise UsageError("give --table FILE or --shipped")
        table = ProbabilityTable.load(args.table)
        correct = ProbabilityTable.load(args.correct) if args.correct else None
    Bs = _range(args.Bs) if args.Bs else table.Bs()
    reports = complexity_report(table, correct, args.first, args.q, Bs)
    text = render_report(reports)
    data = {"config": _config(args), "version": __version__, "seed": None,
            "reports": [r.to_json() for r in reports]}
    if args.optimality:
        data["optimality"] = [optimality_check(table, r.B, r.first, r.final, args.q, args.max_subsets)
                              for r in reports]
        text += "".join(f"B={o['B']}: full chain minimal={o['full_is_min']}, one-step maximal="
                        f"{o['one_step_is_max']} over {o['subsets']} subsets\n" for o in data["optimality"])
    if args.out:
        out = Path(args.out)
        dump_json(out / "report.json", data)
        (out / "report.txt").write_text(text)
        (out / "figure.csv").write_text(figure_csv(reports))
    sys.stdout.write(text)
    return EXIT_OK


# -- keystream / invert ------------------------------------------------------------------

def _state_from_args(args, r: int) -> list[int]:
    if args.state_file:
        text = Path(args.state_file).read_text()
    elif args.state is not None:
        text = args.state
    elif args.random_state:
        if args.seed is None:
            raise UsageError("--random-state needs --seed")
        return [int(b) for b in make_rng(args.seed).integers(0, 2, size=r)]
    else:
        return [0] * r
    state = parse_stream(text)
    if len(state) != r:
        raise UsageError(f"state has {len(state)} cells, the cipher has {r}")
    return state


def cmd_keystream(args) -> int:
    spec = _load_spec(args)
    state = _state_from_args(args, spec.r)
    bits = keystream(spec, state, args.start, args.count)
    text = format_stream(bits, args.format)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_invert(args) -> int:
    spec = _load_spec(args)
    try:
        inv = invert_endo(transition_endo(spec), _engine(args))
    except NotInvertible as exc:
        log.error("%s", exc)
        return EXIT_NO_SOLUTION
    lines = inv.to_text()
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text("\n".join(lines) + "\n")
        dump_json(out.with_suffix(".json"), {**inv.to_json(), "config": _config(args), "version": __version__})
    else:
        print("\n".join(lines))
    return EXIT_OK


# -- rank-subsets ------------------------------------------------------------------------

def cmd_rank(args) -> int:
    sysd = load_system(args.system)
    ring = sysd["ring"]
    cands = json.loads(Path(args.candidates).read_text())
    idx = [[ring.var_index(n) for n in c] for c in cands]
    ranking = rank_guess_sets(sysd["system"], idx, args.samples, args.D, args.seed)
    rows = [{"candidate": i, "mean_nrv": score, "variables": cands[i]} for i, score in ranking]
    data = {"config": _config(args), "seed": args.seed, "version": __version__, "ranking": rows}
    if args.out:
        dump_json(Path(args.out), data)
    for r in rows:
        print(f"{r['candidate']}\t{r['mean_nrv']:.4f}")
    return EXIT_OK


# -- make-reduced ------------------------------------------------------------------------

def cmd_make_reduced(args) -> int:
    r1, r2, r3 = args.lengths
    taps = reduced_taps(r1, r2, r3, args.taps_seed)
    inst = reduced_instance(taps, args.seed, args.h_max)
    A = inst.attack
    out = Path(args.out)
    cfg = _config(args)
    spec = taps.spec()
    dump_json(out / "cipher.json", spec.to_json())
    elim = {spec.ring.names[v]: f.to_text() for v, f in A.eliminated}
    lift = {"state_variables": list(spec.ring.names), "eliminated": elim}
    sysd = system_json(A.ring, A.system, inst.planted(), lift, [A.ring.names[v] for v in inst.guess_vars])
    sysd.update({"config": cfg, "version": __version__, "h": inst.h})
    dump_json(out / "system.json", sysd)
    k_last = args.k_last if args.k_last is not None else min(12, A.ring.n)
    plan = reduced_plan(inst, args.B, args.D, args.k_first, k_last)
    dump_json(out / "plan.json", {"plan": plan.to_json(A.ring), "config": cfg, "version": __version__})
    (out / "keystream.txt").write_text(format_stream(A.observed) + "\n")
    (out / "planted.txt").write_text(format_stream(inst.state) + "\n")
    print(f"wrote bundle to {out} (h={inst.h}, {A.ring.n} variables)")
    return EXIT_OK


# -- parser -------------------------------------------------------------------------------

def _add_engine(p):
    p.add_argument("--max-rows", type=int, default=DEFAULT_CAP, help="Macaulay matrix row cap")
    p.add_argument("--max-cols", type=int, default=DEFAULT_CAP, help="Macaulay matrix column cap")


def _add_spec(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--spec", help="cipher spec JSON")
    g.add_argument("--trivium", action="store_true", help="full Trivium")
    g.add_argument("--reduced", type=int, nargs=3, metavar=("R1", "R2", "R3"), help="reduced Trivium lengths")
    p.add_argument("--taps-seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="multisolve", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the multistep solver on a system file")
    p.add_argument("system")
    p.add_argument("--plan", help="plan JSON (as written by make-reduced)")
    p.add_argument("--guess-vars", help="comma-separated guess variables")
    p.add_argument("--steps", help="steps, e.g. 4:12")
    p.add_argument("--B", type=int)
    p.add_argument("--D", type=int, default=2)
    p.add_argument("--mode", choices=("early-exit", "count-all"), default="early-exit")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--spill-threshold", type=int, default=0, help="spill wild sets above this size")
    p.add_argument("--out", required=True, help="output directory")
    _add_engine(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("estimate", help="estimate wild-guess probabilities")
    p.add_argument("--system")
    p.add_argument("--reduced", type=int, nargs=3, metavar=("R1", "R2", "R3"))
    p.add_argument("--taps-seed", type=int, default=0)
    p.add_argument("--h-max", type=int, default=22)
    p.add_argument("--guess-vars")
    p.add_argument("--ks", required=True)
    p.add_argument("--Bs", required=True)
    p.add_argument("--D", type=int, default=2)
    p.add_argument("--testset", choices=("random", "correct", "exhaustive"), required=True)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--instances", type=int, default=1)
    p.add_argument("--fresh", action="store_true", help="fresh guesses per k instead of nested prefixes")
    p.add_argument("--cap", type=int, default=1 << 20)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output prefix; writes .csv and .json")
    _add_engine(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("report", help="complexity report from probability tables")
    p.add_argument("--table")
    p.add_argument("--correct")
    p.add_argument("--shipped", action="store_true", help="use the shipped Trivium tables")
    p.add_argument("--Bs")
    p.add_argument("--first", type=int)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--optimality", action="store_true")
    p.add_argument("--max-subsets", type=int, default=1 << 12)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("keystream", help="generate keystream from a state")
    _add_spec(p)
    p.add_argument("--state", help="state as 0/1 string or N:hex")
    p.add_argument("--state-file")
    p.add_argument("--random-state", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--format", choices=("bits", "hex"), default="bits")
    p.add_argument("--out")
    p.set_defaults(func=cmd_keystream)

    p = sub.add_parser("invert", help="inverse of the state transition map")
    _add_spec(p)
    p.add_argument("--out")
    _add_engine(p)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("rank-subsets", help="rank candidate guess sets by mean NRV")
    p.add_argument("system")
    p.add_argument("--candidates", required=True, help="JSON list of variable-name lists")
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--D", type=int, default=2)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("make-reduced", help="write a planted reduced-Trivium bundle")
    p.add_argument("lengths", type=int, nargs=3, metavar="R")
    p.add_argument("--taps-seed", type=int, default=0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--h-max", type=int, default=22)
    p.add_argument("--B", type=int, default=4)
    p.add_argument("--D", type=int, default=2)
    p.add_argument("--k-first", type=int, default=4)
    p.add_argument("--k-last", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_reduced)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (PlanViolation,) as exc:
        log.error("plan violation: %s", exc)
        return EXIT_PLAN
    except ResourceLimitError as exc:
        log.error("resource limit: %s", exc)
        return EXIT_RESOURCE
    except (UsageError, EnumerationCap, NoFinalStep, MissingEntry, PolynomialError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
