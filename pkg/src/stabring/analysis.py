"""Convergence and closure checks, scenario replay, exhaustive search with
lasso certificates, and empirical legitimacy fractions.
"""
from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field

import numpy as np

from .protocols import EngineError, Protocol, make_protocol, proto_step, regular_safe_configuration
from .registers import ScenarioError
from .ring import (
    EXACTLY_ONE, MARKOV, SAFE_CONFIG_CHECKS, Configuration, LegitimacyPredicate, is_legitimate,
    privilege_count, privileged, privileged_positions, render, rendering_diff, succ_of,
)
from .scheduler import (
    Act, Schedule, Trace, configs_along, drive, execute, parse_directive, parse_scenario,
    config_from_rendering, render_event,
)

DEFAULT_STATE_BOUND = 10**7


class ResourceLimit(RuntimeError):
    """The requested analysis exceeds its configured size bound."""


@dataclass
class Verdict:
    kind: str  # converges | lasso | timeout
    steps: int | None = None
    cycle: list = field(default_factory=list)
    entry: list = field(default_factory=list)
    actors: list = field(default_factory=list)  # labels of the cycle's edges
    entry_actors: list = field(default_factory=list)
    states: int = 0
    closure: bool | None = None
    note: str = ""

    def to_dict(self, proto: Protocol | None = None) -> dict:
        out: dict = {"kind": self.kind}
        if self.steps is not None:
            out["steps"] = self.steps
        if self.kind == "lasso":
            show = (lambda s: render(proto.config_of(s))) if proto is not None else list
            out["cycle"] = [show(s) for s in self.cycle]
            out["entry"] = [show(s) for s in self.entry]
            out["actors"] = list(self.actors)
            out["entry_actors"] = list(self.entry_actors)
        if self.states:
            out["states"] = self.states
        if self.closure is not None:
            out["closure"] = self.closure
        if self.note:
            out["note"] = self.note
        return out

    def to_json(self, proto: Protocol | None = None) -> str:
        return json.dumps(self.to_dict(proto), indent=2)


# -- traces -----------------------------------------------------------------

def steps_to_legitimacy(trace: Trace, pred: LegitimacyPredicate, proto: Protocol) -> int | None:
    """Index of the first configuration of ``trace`` satisfying ``pred``; None on timeout."""
    for i, cfg in enumerate(configs_along(proto, trace)):
        if is_legitimate(cfg, pred):
            return i
    return None


# -- exhaustive search over coarse protocols --------------------------------

def state_legit(proto: Protocol, state: tuple) -> bool:
    """Exactly one privileged position, straight from a searcher state tuple."""
    if proto.kind == "dijkstra-rw":
        n = proto.n
        ring = []
        for i in range(1, n + 1):
            ring.append(state[i - 1])
            ring.append(state[n + succ_of(i, n) - 1])
        return len(privileged_positions(ring)) == 1
    return len(privileged_positions(state)) == 1


def exhaustive_convergence(proto: Protocol, pred: LegitimacyPredicate | None = None,
                           bound: int = DEFAULT_STATE_BOUND) -> Verdict:
    """Decide convergence under every central-daemon schedule.

    Converges iff the illegitimate states induce an acyclic graph with no
    dead ends; otherwise a lasso (or deadlock) certificate is returned.
    ``steps`` is then the longest possible run to legitimacy.
    """
    if not getattr(proto, "coarse", False):
        raise ValueError(f"{proto.kind} is not a coarse-atomicity protocol")
    if pred is not None and pred.kind != EXACTLY_ONE:
        raise ValueError("exhaustive search decides exactly-one-privileged legitimacy")
    size = proto.state_space()
    if size > bound:
        raise ResourceLimit(f"{size} states exceed the bound of {bound}")
    width = len(proto.state_of(proto.initial()))
    K = proto.K
    states = list(itertools.product(range(K), repeat=width))
    legit = {s: state_legit(proto, s) for s in states}

    closure = True
    for s in states:
        if legit[s] and not all(legit[t] for _, t in proto.moves(s)):
            closure = False
            break

    # DFS restricted to illegitimate states, all-labels states first
    order = sorted((s for s in states if not legit[s]), key=lambda s: len(set(s)) != K)
    WHITE, GREY, BLACK = 0, 1, 2
    color: dict = {}
    depth: dict = {}  # longest path to legitimacy
    for root in order:
        if color.get(root, WHITE) != WHITE:
            continue
        color[root] = GREY
        path = [root]
        labels: list = []
        stack = [iter(list(proto.moves(root)))]
        while stack:
            nxt = next(stack[-1], None)
            u = path[-1]
            if nxt is None:
                stack.pop()
                path.pop()
                succs = [t for _, t in proto.moves(u)]
                if not succs:
                    return Verdict("lasso", cycle=[u], entry=path[:], actors=[],
                                   entry_actors=labels[:], states=size, closure=closure,
                                   note="deadlock: no processor is enabled")
                depth[u] = 1 + max(0 if legit[t] else depth[t] for t in succs)
                color[u] = BLACK
                if labels:
                    labels.pop()
                continue
            label, v = nxt
            if legit[v]:
                continue
            c = color.get(v, WHITE)
            if c == GREY:
                i = path.index(v)
                return Verdict("lasso", cycle=path[i:], entry=path[:i], actors=labels[i:] + [label],
                               entry_actors=labels[:i], states=size, closure=closure,
                               note="illegitimate cycle")
            if c == WHITE:
                color[v] = GREY
                path.append(v)
                labels.append(label)
                stack.append(iter(list(proto.moves(v))))
    worst = max(depth.values(), default=0)
    return Verdict("converges", steps=worst, states=size, closure=closure)


def _move_config(proto: Protocol, state, label: str):
    cfg = proto.config_of(state)
    pid_text, _, phase = label.partition(":")
    pid = int(pid_text[1:])
    if phase == "write":
        cfg.procs[pid - 1].pc = 1
    return cfg, pid


def check_lasso(proto: Protocol, verdict: Verdict) -> list:
    """Independently re-validate a lasso; returns a list of problems (empty = valid)."""
    problems = []
    pred = LegitimacyPredicate(EXACTLY_ONE, proto.kind)
    cyc = verdict.cycle
    if not cyc:
        return ["empty cycle"]
    if len(verdict.actors) != len(cyc):
        return ["cycle and actor lists differ in length"]
    for s in cyc:
        if is_legitimate(proto.config_of(s), pred):
            problems.append(f"cycle state {s} is legitimate")
    hops = list(zip(verdict.entry, verdict.entry_actors, verdict.entry[1:] + [cyc[0]]))
    hops += [(s, a, cyc[(i + 1) % len(cyc)]) for i, (s, a) in enumerate(zip(cyc, verdict.actors))]
    for s, label, t in hops:
        cfg, pid = _move_config(proto, s, label)
        if proto.kind == "dijkstra-central" and pid not in privileged(cfg):
            problems.append(f"{label} is not privileged in {s}")
            continue
        got = proto.state_of(proto_step(proto, cfg, pid))
        if got != tuple(t):
            problems.append(f"{label} from {s} gives {got}, certificate says {t}")
    return problems


# -- fine-grained simulation ------------------------------------------------

def _counter_kind(proto):
    return "dijkstra-rw" if proto.kind == "dijkstra-rw" else "dijkstra-central"


@dataclass
class ClosureReport:
    trials: int
    steps: int
    violations: int = 0
    first_violation: dict | None = None
    max_writes_per_change: int = 0

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {"trials": self.trials, "steps": self.steps, "violations": self.violations,
                "first_violation": self.first_violation,
                "max_writes_per_change": self.max_writes_per_change}


def closure_start(proto: Protocol, rng: random.Random) -> Configuration:
    """A legitimate starting point: a safe configuration when the protocol
    defines one, otherwise a consistent one-token configuration."""
    if proto.kind in SAFE_CONFIG_CHECKS:
        return proto.initial([rng.randrange(proto.K)] * proto.n)
    return proto.legit_config(rng)


def _closure_trial(proto, tseed, budget, resolution, stress, init, schedule, record=False):
    """One closure run; returns (steps, first bad tick or None, max writes per change, cfg, start, events)."""
    kind = _counter_kind(proto)
    rng = random.Random(tseed)
    cfg = (init if init is not None else closure_start(proto, rng)).copy()
    start = cfg.copy()
    if schedule is not None:
        sched = Schedule(schedule.mode, list(schedule.script), tseed, schedule.resolution, schedule.stress)
    else:
        mode = "central-random" if proto.kind == "dijkstra-central" else "fine-random"
        sched = Schedule(mode, seed=tseed, resolution=resolution, stress=stress)
    writes = [0] * proto.n
    most = [0]
    bad: list = []

    def monitor(c, ev):
        pid, action = ev[0], ev[1]
        if action == "write-begin":
            writes[pid - 1] += 1
        elif action == "internal" and ev[3] == "decide":
            if writes[pid - 1] > most[0]:
                most[0] = writes[pid - 1]
            writes[pid - 1] = 0
        if privilege_count(c, kind) != 1:
            bad.append(c.tick)
            return True
        return False

    events: list | None = [] if record else None
    steps = drive(proto, cfg, sched, rng, budget, on_step=monitor, record=events)
    return steps, (bad[0] if bad else None), most[0], cfg, start, events


def _closure_worker(args):
    steps, bad, most, *_ = _closure_trial(*args)
    return steps, bad, most


def closure_check(proto: Protocol, trials: int = 1000, budget: int = 10_000, seed: int = 0,
                  resolution: str = "adversarial", stress: float = 0.5,
                  init: Configuration | None = None, schedule: Schedule | None = None,
                  jobs: int = 1) -> ClosureReport:
    """Run from legitimate configurations and report any step where the
    counters do not have exactly one privileged processor.

    ``init``/``schedule`` replace the sampled start and random daemon, which
    turns the check into a replay of one given execution. Each trial has its
    own seed drawn up front, so the report does not depend on ``jobs``.
    """
    master = random.Random(seed)
    seeds = [master.getrandbits(64) for _ in range(trials)]
    args = [(proto, t, budget, resolution, stress, init, schedule) for t in seeds]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_closure_worker, args, chunksize=max(1, trials // (4 * jobs))))
    else:
        results = [_closure_worker(a) for a in args]
    report = ClosureReport(trials=trials, steps=0)
    for trial, (steps, bad, most) in enumerate(results):
        report.steps += steps
        report.max_writes_per_change = max(report.max_writes_per_change, most)
        if bad is None:
            continue
        report.violations += 1
        if report.first_violation is None:
            # re-run the offending trial with recording on; it is deterministic
            _, tick, _, cfg, start, events = _closure_trial(*args[trial], record=True)
            kind = _counter_kind(proto)
            report.first_violation = {
                "trial": trial, "seed": seeds[trial], "tick": tick, "init": render(start),
                "config": render(cfg), "privileged": sorted(privileged(cfg, kind)),
                "trace": [render_event(e, start) for e in events],
            }
    return report


@dataclass
class TrialResult:
    converged: bool
    steps: int | None  # micro-steps until the stable (or safe) phase began
    closure_ok: bool = True


def run_until_stable(proto: Protocol, cfg: Configuration, rng: random.Random, budget: int = 10**6,
                     window: int = 10_000, mode: str = "fine-random", resolution: str = "uniform") -> TrialResult:
    """Drive ``cfg`` in place until it has visibly converged.

    Protocols with a safe-configuration predicate must reach it, then keep
    exactly one privileged processor for ``window`` more steps. The others
    must keep exactly one privileged processor for ``window`` consecutive
    steps; the reported step is where that run began.
    """
    kind = _counter_kind(proto)
    sched = Schedule(mode, resolution=resolution)
    safe_check = SAFE_CONFIG_CHECKS.get(proto.kind)
    if safe_check is not None:
        hit = [None]

        def until_safe(c, ev):
            if safe_check(c):
                hit[0] = True
                return True
            return False

        used = 0
        if safe_check(cfg):
            hit[0] = True
        else:
            used = drive(proto, cfg, sched, rng, budget, on_step=until_safe)
        if not hit[0]:
            return TrialResult(False, None)
        broken = []

        def watch(c, ev):
            if privilege_count(c, kind) != 1:
                broken.append(c.tick)
                return True
            return False

        if privilege_count(cfg, kind) != 1:
            return TrialResult(True, used, False)
        drive(proto, cfg, sched, rng, window, on_step=watch)
        return TrialResult(True, used, not broken)

    run = [0, 0]  # consecutive good steps, steps done
    good = [privilege_count(cfg, kind) == 1]
    coarse_regs = proto.kind == "dijkstra-rw"

    def stable(c, ev):
        run[1] += 1
        if coarse_regs or ev[1] in ("internal", "step"):
            good[0] = privilege_count(c, kind) == 1
        if good[0]:
            run[0] += 1
            return run[0] >= window
        run[0] = 0
        return False

    drive(proto, cfg, sched, rng, budget + window, on_step=stable)
    if run[0] >= window:
        return TrialResult(True, run[1] - window)
    return TrialResult(False, None)


def _trial_worker(args):
    kind, n, K, opts, tseed, budget, window, resolution = args
    proto = make_protocol(kind, n, K, **opts)
    rng = random.Random(tseed)
    cfg = proto.random_config(rng)
    return run_until_stable(proto, cfg, rng, budget, window, resolution=resolution)


def convergence_trials(proto: Protocol, trials: int, budget: int = 10**6, seed: int = 0,
                       window: int = 10_000, resolution: str = "uniform", jobs: int = 1,
                       opts: dict | None = None) -> list:
    """Independent runs from random initial configurations; results in trial order."""
    master = random.Random(seed)
    K = proto.K if proto.kind != "safe-gray" else None
    extra = dict(opts or {})
    if proto.kind == "composite-safe":
        extra.setdefault("L", proto.L)
    args = [(proto.kind, proto.n, K, extra, master.getrandbits(64), budget, window, resolution)
            for _ in range(trials)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(_trial_worker, args, chunksize=max(1, trials // (4 * jobs))))
    return [_trial_worker(a) for a in args]


def gray_high_bit_check(proto: Protocol, budget: int = 200_000, seed: int = 0) -> dict:
    """From the all-zero configuration, no high-order Gray bit may read as 1
    before p1's counter first reaches 2**(m-1). Returns the first offence, if any.
    """
    if proto.kind != "safe-gray":
        raise ValueError("high-order-bit check applies to safe-gray")
    cfg = proto.initial([0] * proto.n)
    rng = random.Random(seed)
    half = 1 << (proto.m - 1)
    high = {(i - 1) * proto.F for i in range(1, proto.n + 1)}
    seen = {"reached": None, "offence": None, "reads": 0}

    def watch(c, ev):
        pid, action, reg, value = ev
        if seen["reached"] is None and c.procs[0].x >= half:
            seen["reached"] = c.tick
            return True
        if action == "read-end" and reg in high:
            seen["reads"] += 1
            if value == 1:
                seen["offence"] = {"tick": c.tick, "reader": pid, "register": c.regs[reg].name}
                return True
        return False

    drive(proto, cfg, Schedule("fine-random", resolution="adversarial", stress=0.5), rng, budget, on_step=watch)
    return seen


# -- scenarios --------------------------------------------------------------

@dataclass
class ScenarioResult:
    name: str
    protocol: Protocol
    trace: Trace
    configs: list
    checks: list  # (lineno, ok, message)
    lasso: dict | None = None

    @property
    def ok(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def to_dict(self) -> dict:
        return {"scenario": self.name, "ok": self.ok, "steps": len(self.trace.events),
                "checks": [{"line": ln, "ok": ok, "message": msg} for ln, ok, msg in self.checks],
                "lasso": self.lasso, "final": render(self.trace.final)}


def replay_scenario(text: str, name: str = "") -> ScenarioResult:
    """Execute a scenario file, evaluate its assertions and look for a
    return to an earlier state through illegitimate configurations only."""
    sc = parse_scenario(text, name)
    proto = sc.make_protocol()
    cfg = config_from_rendering(proto, sc.init)
    init = cfg.copy()
    kind = _counter_kind(proto)
    pred = LegitimacyPredicate(EXACTLY_ONE, kind)
    configs = [cfg.copy()]
    seen = {cfg.key(): 0}
    events, checks = [], []
    lasso = None
    for lineno, verb, rest in sc.lines:
        if verb in ("act", "resolve"):
            d = parse_directive(verb, rest)
            try:
                events.append(execute(proto, cfg, d))
            except (ScenarioError, EngineError) as e:
                raise ScenarioError(f"{name}:{lineno}: {e}") from e
            configs.append(cfg.copy())
            key = cfg.key()
            if lasso is None and key in seen:
                i = seen[key]
                loop = configs[i:]
                if not any(is_legitimate(c, pred) for c in loop):
                    lasso = {"kind": "lasso", "entry": [render(c) for c in configs[:i]],
                             "cycle": [render(c) for c in loop[:-1]], "start_line": lineno}
            seen.setdefault(key, len(configs) - 1)
        elif verb == "assert":
            diff = rendering_diff(cfg, rest)
            msg = "ok" if not diff else "; ".join(f"{k}: want {w} got {g}" for k, (w, g) in diff.items())
            checks.append((lineno, not diff, msg))
        elif verb == "assert-legit":
            want = rest.strip().lower() in ("true", "1", "yes")
            got = is_legitimate(cfg, pred)
            checks.append((lineno, got == want, f"legitimate={got}"))
        else:  # assert-privileged
            want = sorted(int(t.strip().lstrip("p")) for t in rest.strip("{}[] ").split(",") if t.strip())
            got = sorted(privileged(cfg, kind))
            checks.append((lineno, got == want, f"privileged={got}"))
    trace = Trace(init, events, cfg.copy(), None, len(events))
    return ScenarioResult(name, proto, trace, configs, checks, lasso)


# -- fair daemon with unreliable reads --------------------------------------

def empirical_legit_fraction(n: int, p: float, steps: int = 10**6, burn_in: int | None = None,
                             seed: int = 0, K: int = 2) -> float:
    """Fraction of post-burn-in configurations that are legitimate when a
    fair daemon activates dijkstra-central and each read of the predecessor
    is correct with probability ``p`` (else uniform over the other labels).

    Draws come from numpy's PCG64; the chain itself is stepped in a tight loop.
    """
    size = K ** n
    burn_in = 10 * size if burn_in is None else burn_in
    if steps <= burn_in:
        raise ValueError("steps must exceed burn_in")
    gen = np.random.Generator(np.random.PCG64(seed))
    who = gen.integers(0, n, size=steps).tolist()
    ok = (gen.random(steps) < float(p)).tolist()
    wrong = gen.integers(0, K - 1, size=steps).tolist()
    pred = LegitimacyPredicate(MARKOV if (n == 3 and K == 2) else EXACTLY_ONE)
    legit_table = [is_legitimate(Configuration.from_counters(s), pred)
                   for s in itertools.product(range(K), repeat=n)]
    weights = [K ** (n - 1 - i) for i in range(n)]
    xs = [0] * n
    idx = 0
    hits = 0
    for step in range(steps):
        i = who[step]
        seen = xs[i - 1]
        if not ok[step]:
            w = wrong[step]
            seen = w + 1 if w >= seen else w
        own = xs[i]
        if i == 0:
            if own == seen:
                new = (own + 1) % K
                idx += (new - own) * weights[0]
                xs[0] = new
        elif own != seen:
            idx += (seen - own) * weights[i]
            xs[i] = seen
        if step >= burn_in and legit_table[idx]:
            hits += 1
    return hits / (steps - burn_in)


__all__ = [
    "Verdict", "ResourceLimit", "steps_to_legitimacy", "exhaustive_convergence", "check_lasso",
    "closure_check", "closure_start", "ClosureReport", "run_until_stable", "convergence_trials",
    "TrialResult", "gray_high_bit_check", "replay_scenario", "ScenarioResult",
    "empirical_legit_fraction", "state_legit", "regular_safe_configuration",
]
