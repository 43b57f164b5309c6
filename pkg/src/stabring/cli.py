"""Command line: ``stabring run | verify | markov``.

Exit codes: 0 success, 1 assertion or verdict failure, 2 usage, 3 resource limit.
"""
from __future__ import annotations

import argparse
import json
import random
import shlex
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .analysis import (
    ResourceLimit, check_lasso, closure_check, exhaustive_convergence, replay_scenario,
)
from .markov import (
    NonConvergence, build_transition_matrix, check_against_reference, equilibrium, legitimate_mass,
    parse_probability, render_fraction, vector_csv, vector_dict,
)
from .markov import ResourceLimit as MarkovResourceLimit
from .protocols import KINDS, ConfigurationError, make_protocol
from .registers import ScenarioError
from .ring import SAFE_CONFIG_CHECKS, label_multiset, privilege_count, render
from .scheduler import MODES, Schedule, config_from_rendering, drive, render_event

REVISION = f"stabring-{__version__}"
OK, FAILED, USAGE, RESOURCE = 0, 1, 2, 3
SCENARIOS = ("lowerbound-n5.scn", "fig1-naive-regular.scn", "lemma1-safe-1w1r.scn")


class UsageError(Exception):
    pass


def _report(args, argv, outcome: dict, artifacts=()) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("func", "command") and v is not None}
    return {"command": "stabring " + " ".join(shlex.quote(a) for a in argv), "revision": REVISION,
            "seed": getattr(args, "seed", None), "parameters": params, "outcome": outcome,
            "artifacts": list(artifacts)}


def _emit(report: dict, out: str | None = None) -> None:
    text = json.dumps(report, indent=2, default=str)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def _protocol(args):
    opts = {}
    if getattr(args, "L", None) is not None:
        opts["L"] = args.L
    if getattr(args, "paper_width", False):
        opts["paper_width"] = True
    try:
        return make_protocol(args.protocol, args.n, args.k, **opts)
    except ConfigurationError as e:
        raise UsageError(str(e)) from e


# -- run --------------------------------------------------------------------

def cmd_run(args, argv) -> int:
    proto = _protocol(args)
    if args.seed is None:
        args.seed = random.SystemRandom().randrange(2**32)
    rng = random.Random(args.seed)
    if args.init:
        cfg = config_from_rendering(proto, args.init)
    else:
        cfg = proto.random_config(rng)
    init = cfg.copy()
    counter_kind = "dijkstra-rw" if proto.kind == "dijkstra-rw" else "dijkstra-central"
    safe = SAFE_CONFIG_CHECKS.get(proto.kind)
    first = {"legit": None, "safe": None}

    def check(c):
        if first["legit"] is None and privilege_count(c, counter_kind) == 1:
            first["legit"] = c.tick
        if safe is not None and first["safe"] is None and safe(c):
            first["safe"] = c.tick

    check(cfg)
    sched = Schedule(args.schedule, seed=args.seed, resolution=args.resolution)
    events: list = []
    steps = drive(proto, cfg, sched, rng, args.budget,
                  on_step=lambda c, ev: check(c), record=events if args.trace else None)
    artifacts = []
    if args.trace:
        lines = [f"# {REVISION} protocol={proto.kind} n={proto.n} k={proto.K} seed={args.seed}",
                 f"init {render(init)}"]
        lines += [render_event(e, init) for e in events]
        lines.append(f"final {render(cfg)}")
        Path(args.trace).write_text("\n".join(lines) + "\n")
        artifacts.append(args.trace)
    outcome = {"steps": steps, "first_exactly_one_privileged": first["legit"],
               "final": render(cfg), "final_privileged": privilege_count(cfg, counter_kind)}
    if safe is not None:
        outcome["first_safe_configuration"] = first["safe"]
    if proto.kind != "dijkstra-central" and args.schedule == "fair-daemon":
        outcome["note"] = "fair-daemon activation of fine-grained micro-steps is an extension"
    outcome["converged"] = (first["safe"] if safe is not None else first["legit"]) is not None
    _emit(_report(args, argv, outcome, artifacts), args.out)
    return OK


# -- verify -----------------------------------------------------------------

def _bundled(name: str) -> str:
    return resources.files("stabring").joinpath("scenarios", name).read_text()


def verify_lowerbound(args, argv) -> int:
    proto = make_protocol("dijkstra-central", args.n, args.k)
    v = exhaustive_convergence(proto)
    outcome = v.to_dict(proto)
    if v.kind == "lasso":
        problems = check_lasso(proto, v)
        all_labels = all(len(label_multiset(proto.config_of(s))) == proto.K for s in v.cycle)
        outcome.update(certificate_valid=not problems, problems=problems,
                       every_cycle_state_uses_all_labels=all_labels)
        ok = not problems
    else:
        ok = False
    _emit(_report(args, argv, outcome), args.out)
    return OK if ok else FAILED


def verify_exhaustive(args, argv) -> int:
    proto = _protocol(args)
    if not proto.coarse:
        raise UsageError(f"{proto.kind} is fine-grained; exhaustive search covers dijkstra-central and dijkstra-rw")
    v = exhaustive_convergence(proto, bound=args.bound)
    outcome = v.to_dict(proto)
    if proto.kind == "dijkstra-rw":
        outcome["model"] = "2n-position ring under a central daemon; program counters abstracted"
    if v.kind == "lasso":
        outcome["certificate_problems"] = check_lasso(proto, v)
    _emit(_report(args, argv, outcome), args.out)
    return OK if v.kind == "converges" and v.closure else FAILED


def verify_closure(args, argv) -> int:
    if args.seed is None:
        raise UsageError("verify closure needs --seed")
    proto = _protocol(args)
    rep = closure_check(proto, args.trials, args.budget, args.seed, resolution=args.resolution,
                        stress=args.stress, jobs=args.jobs)
    outcome = rep.to_dict()
    if proto.kind == "safe-unary":
        outcome["writes_per_change_ok"] = rep.max_writes_per_change <= 2
    ok = rep.ok and outcome.get("writes_per_change_ok", True)
    _emit(_report(args, argv, outcome), args.out)
    return OK if ok else FAILED


def verify_scenarios(args, argv) -> int:
    results = []
    ok = True
    files = args.file or [None]
    for path in files:
        names = SCENARIOS if path is None else [path]
        for name in names:
            text = _bundled(name) if path is None else Path(name).read_text()
            try:
                res = replay_scenario(text, name)
            except ScenarioError as e:
                results.append({"scenario": name, "ok": False, "error": str(e)})
                ok = False
                continue
            d = res.to_dict()
            if d["lasso"] is not None:
                d["lasso"]["label"] = "demonstration: one scripted execution, not a proof"
            results.append(d)
            ok &= res.ok
    _emit(_report(args, argv, {"scenarios": results, "all_passed": ok}), args.out)
    return OK if ok else FAILED


# -- markov -----------------------------------------------------------------

def cmd_markov(args, argv) -> int:
    try:
        p = parse_probability(args.p)
    except (ValueError, ZeroDivisionError) as e:
        raise UsageError(f"bad probability {args.p!r}: {e}") from e
    mat = build_transition_matrix(args.n, p, args.k, extended=args.extended)
    vec = equilibrium(mat) if args.emit != "matrix" else None
    text = ""
    outcome: dict = {"n": mat.n, "K": mat.K, "p": render_fraction(p)}
    if args.emit == "matrix":
        text = mat.to_csv()
        outcome["matrix"] = mat.to_dict()["matrix"]
    elif args.emit == "equilibrium":
        text = vector_csv(vec, mat)
        outcome.update(vector_dict(vec, mat))
    else:
        mass = legitimate_mass(vec, mat)
        shown = render_fraction(mass) if vec.exact else repr(mass)
        text = f"p,mass\n{render_fraction(p)},{shown}\n"
        outcome["mass"] = shown
        outcome["mass_above_half"] = bool(mass > 0.5)
    ok = True
    if args.check_paper:
        if vec is None:
            vec = equilibrium(mat)
        chk = check_against_reference(p, vec)
        outcome["check"] = chk
        ok = bool(chk.get("match", False))
    artifacts = []
    if args.csv:
        Path(args.csv).write_text(text)
        artifacts.append(args.csv)
    if args.format == "csv":
        sys.stdout.write(text)
        if args.out:
            Path(args.out).write_text(json.dumps(_report(args, argv, outcome, artifacts), indent=2) + "\n")
    else:
        _emit(_report(args, argv, outcome, artifacts), args.out)
    return OK if ok else FAILED


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stabring", description="Dijkstra's token ring over weak registers")
    ap.add_argument("--version", action="version", version=REVISION)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, protocol=True, kinds=KINDS + ("naive-safe",)):
        if protocol:
            p.add_argument("--protocol", choices=kinds, required=True)
        p.add_argument("--n", type=int, default=3)
        p.add_argument("--k", type=int, default=None, help="label count (protocol default if omitted)")
        p.add_argument("--L", type=int, default=None, help="composite-safe label width")
        p.add_argument("--paper-width", action="store_true", help="composite-safe width 2(n+1)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", default=None, help="also write the JSON report here")

    r = sub.add_parser("run", help="simulate one execution")
    common(r)
    r.add_argument("--schedule", choices=MODES, default="fine-random")
    r.add_argument("--resolution", choices=("uniform", "adversarial"), default="uniform")
    r.add_argument("--budget", type=int, default=10_000)
    r.add_argument("--init", default=None, help="configuration rendering, e.g. x=[0,0,2]")
    r.add_argument("--trace", default=None, help="write the canonical trace to this file")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run a verification suite")
    vs = v.add_subparsers(dest="suite", required=True)
    lb = vs.add_parser("lowerbound")
    common(lb, protocol=False)
    lb.set_defaults(func=verify_lowerbound, n=5, k=3)
    ce = vs.add_parser("converge-exhaustive")
    common(ce, kinds=("dijkstra-central", "dijkstra-rw"))
    ce.add_argument("--bound", type=int, default=10**7)
    ce.set_defaults(func=verify_exhaustive)
    cl = vs.add_parser("closure")
    common(cl)
    cl.add_argument("--trials", type=int, default=1000)
    cl.add_argument("--budget", type=int, default=10_000)
    cl.add_argument("--resolution", choices=("uniform", "adversarial"), default="adversarial")
    cl.add_argument("--stress", type=float, default=0.5)
    cl.set_defaults(func=verify_closure)
    sc = vs.add_parser("scenarios")
    sc.add_argument("--file", action="append", help="scenario file (default: the bundled set)")
    sc.add_argument("--seed", type=int, default=None)
    sc.add_argument("--jobs", type=int, default=1)
    sc.add_argument("--out", default=None)
    sc.set_defaults(func=verify_scenarios)

    m = sub.add_parser("markov", help="fair-daemon Markov chain with unreliable reads")
    m.add_argument("--n", type=int, default=3)
    m.add_argument("--k", type=int, default=2)
    m.add_argument("--p", required=True, help="read correctness, a/b or decimal")
    m.add_argument("--emit", choices=("matrix", "equilibrium", "mass"), default="equilibrium")
    m.add_argument("--format", choices=("json", "csv"), default="json")
    m.add_argument("--csv", default=None, help="also write the CSV here")
    m.add_argument("--check-paper", action="store_true", help="compare with the reference equilibria")
    m.add_argument("--extended", action="store_true", help="allow chains other than the binary 3-ring")
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--jobs", type=int, default=1)
    m.add_argument("--out", default=None)
    m.set_defaults(func=cmd_markov)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return USAGE if e.code else OK
    try:
        return args.func(args, argv)
    except UsageError as e:
        print(f"stabring: {e}", file=sys.stderr)
        return USAGE
    except (ResourceLimit, MarkovResourceLimit, MemoryError) as e:
        print(f"stabring: resource limit: {e}", file=sys.stderr)
        return RESOURCE
    except (ScenarioError, NonConvergence) as e:
        print(f"stabring: {e}", file=sys.stderr)
        return FAILED
    except (ConfigurationError, ValueError, OSError) as e:
        print(f"stabring: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
