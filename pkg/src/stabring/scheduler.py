"""Daemons, the execution engine, traces and scenario files.

Every run draws all of its randomness from one ``random.Random(seed)``
(Mersenne Twister), so a (protocol, schedule, seed, init, budget) tuple
always yields the same trace.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from .protocols import EngineError, Protocol, make_protocol
from .registers import (
    BOT, COMPOSITE, CORRECT_WITH_P, ScenarioError, parse_value, render_value, resolve_read,
)
from .ring import Configuration, parse_counters, parse_rendering, pred_of, render

MODES = ("central-adversary", "central-random", "fair-daemon", "fine-adversary", "fine-random")
RESOLUTIONS = ("uniform", "adversarial")


@dataclass(frozen=True)
class Act:
    pid: int


@dataclass(frozen=True)
class Resolve:
    pid: int
    reg: str
    value: str  # raw text, parsed against the register's model when executed


@dataclass
class Schedule:
    mode: str
    script: list = field(default_factory=list)
    seed: int | None = None
    resolution: str = "uniform"
    # fine-random only: chance of postponing a write-end, which stretches writes over more reads
    stress: float = 0.0
    pos: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.resolution not in RESOLUTIONS:
            raise ValueError(f"unknown read resolution {self.resolution!r}")


@dataclass(slots=True)
class Event:
    tick: int
    pid: int
    action: str
    reg: int | None
    value: object


@dataclass
class Trace:
    init: Configuration
    events: list
    final: Configuration
    seed: int | None = None
    steps: int = 0


def next_actor(sched: Schedule, config: Configuration, rng: random.Random, proto: Protocol):
    """Next directive (Act or Resolve), or None when a script is exhausted."""
    n = config.n
    mode = sched.mode
    if mode in ("central-adversary", "fine-adversary"):
        if sched.pos >= len(sched.script):
            return None
        d = sched.script[sched.pos]
        sched.pos += 1
        if isinstance(d, int):
            d = Act(d)
        if not 1 <= d.pid <= n:
            raise ScenarioError(f"script names p{d.pid} but the ring has {n} processors")
        if mode == "central-adversary" and not proto.enabled(config, d.pid):
            raise ScenarioError(f"script activates p{d.pid}, which is not privileged")
        return d
    if mode == "fair-daemon":
        return Act(rng.randrange(n) + 1)
    if mode == "central-random":
        enabled = [i for i in range(1, n + 1) if proto.enabled(config, i)]
        if not enabled:
            raise EngineError("no processor is enabled")
        return Act(enabled[rng.randrange(len(enabled))])
    return Act(_fine_pick(proto, config, rng, sched.stress))


def _fine_pick(proto, cfg, rng, stress):
    n = cfg.n
    pid = rng.randrange(n) + 1
    if stress:
        for _ in range(4):
            op = cfg.inflight[pid - 1]
            if op is None or op.kind != "write" or rng.random() >= stress:
                break
            pid = rng.randrange(n) + 1
    return pid


def make_resolver(sched: Schedule, rng: random.Random, proto: Protocol):
    """Read resolution used when the schedule does not script a value."""
    p = getattr(proto, "p", None)
    if p is not None:
        dom = list(range(proto.K))

        def with_p(cfg, pid, reg, legal, correct=None):
            return resolve_read(legal, CORRECT_WITH_P, correct, rng, domain=dom, p=p)
        return with_p

    if sched.resolution == "adversarial":
        def adversarial(cfg, pid, reg, legal, correct=None):
            if len(legal) == 1:
                return legal[0]
            r = rng.random()
            if r < 1 / 3:
                return legal[rng.randrange(len(legal))]
            newest = _newest_value(cfg.regs[reg])
            if r < 2 / 3:
                # stale or garbage: anything but what is being written
                pool = [v for v in legal if v != newest] or legal
            else:
                pool = [v for v in legal if v == newest] or legal
            return pool[rng.randrange(len(pool))]
        return adversarial

    def uniform(cfg, pid, reg, legal, correct=None):
        if len(legal) == 1:
            return legal[0]
        return legal[rng.randrange(len(legal))]
    return uniform


def _newest_value(reg):
    w = reg.writing
    if w is None:
        return reg.committed
    if reg.spec.model == COMPOSITE:
        vec = list(reg.committed)
        vec[w.value[0]] = w.value[1]
        return tuple(vec)
    return w.value


def _scripted_resolver(proto, cfg, d: Resolve):
    def resolver(_cfg, pid, reg, legal, correct=None):
        name = cfg.regs[reg].name if reg is not None else f"r{pid}"
        if isinstance(d, Act):
            if len(legal) == 1 and getattr(proto, "p", None) is None:
                return legal[0]
            raise ScenarioError(f"p{pid} ends a read of {name} but the script does not resolve it")
        if d.reg != name:
            raise ScenarioError(f"p{pid} is reading {name}, script resolves {d.reg}")
        bits = reg is not None and cfg.regs[reg].spec.model == COMPOSITE
        value = parse_value(d.value, bits=bits)
        return resolve_read(legal, "adversary-choice", correct, value)
    return resolver


def execute(proto: Protocol, cfg: Configuration, d, resolver=None) -> Event:
    """Run one directive in place and return its event."""
    if isinstance(d, Resolve) or resolver is None:
        resolver = _scripted_resolver(proto, cfg, d)
    tick = cfg.tick
    action, reg, value = proto.step(cfg, d.pid, resolver)
    cfg.tick = tick + 1
    return Event(tick, d.pid, action, reg, value)


def drive(proto: Protocol, cfg: Configuration, sched: Schedule, rng: random.Random, budget: int,
          on_step=None, record: list | None = None) -> int:
    """Execute up to ``budget`` micro-steps in place; returns the count done.

    ``on_step(cfg, event_tuple)`` runs after each step and may return True
    to stop early. ``record`` collects Event objects when given.
    """
    step = proto.step
    n = proto.n
    done = 0
    scripted = sched.mode in ("central-adversary", "fine-adversary")
    resolver = make_resolver(sched, rng, proto)
    fast_fine = sched.mode == "fine-random"
    stress = sched.stress
    while done < budget:
        if scripted:
            d = next_actor(sched, cfg, rng, proto)
            if d is None:
                break
            try:
                ev = execute(proto, cfg, d)
            except ScenarioError as e:
                raise ScenarioError(f"tick {cfg.tick}: {e}") from e
            done += 1
            if record is not None:
                record.append(ev)
            if on_step is not None and on_step(cfg, (ev.pid, ev.action, ev.reg, ev.value)):
                break
            continue
        if fast_fine:
            pid = rng.randrange(n) + 1
            if stress:
                pid = _fine_pick(proto, cfg, rng, stress) if cfg.inflight[pid - 1] is not None else pid
        else:
            pid = next_actor(sched, cfg, rng, proto).pid
        tick = cfg.tick
        ev = step(cfg, pid, resolver)
        cfg.tick = tick + 1
        done += 1
        if record is not None:
            record.append(Event(tick, pid, ev[0], ev[1], ev[2]))
        if on_step is not None and on_step(cfg, (pid,) + ev):
            break
    return done


def run(proto: Protocol, sched: Schedule, init: Configuration, budget: int, record: bool = True) -> Trace:
    """Execute from a copy of ``init``; deterministic given the schedule's seed."""
    cfg = init.copy()
    rng = random.Random(sched.seed)
    events: list = [] if record else None
    if budget <= 0:
        return Trace(init.copy(), [], cfg, sched.seed, 0)
    steps = drive(proto, cfg, sched, rng, budget, record=events)
    return Trace(init.copy(), events or [], cfg, sched.seed, steps)


def configs_along(proto: Protocol, trace: Trace) -> list:
    """Every configuration of a recorded trace, init first, by exact replay."""
    cfg = trace.init.copy()
    out = [cfg.copy()]
    for d in directives_of(proto, trace.events, trace.init):
        execute(proto, cfg, d)
        out.append(cfg.copy())
    return out


# -- text formats -----------------------------------------------------------

def reg_name(cfg: Configuration, reg, pid: int) -> str:
    if reg is None or reg < 0:
        return f"r{pid}"
    return cfg.regs[reg].name


def render_event(ev: Event, cfg: Configuration, proto: Protocol | None = None) -> str:
    name = reg_name(cfg, ev.reg, ev.pid)
    head = f"{ev.tick} "
    a = ev.action
    if a == "read-begin":
        return f"{head}R+ p{ev.pid} {name}"
    if a in ("read-end", "read"):
        return f"{head}R p{ev.pid} {name} -> {render_value(ev.value)}"
    if a == "write-begin":
        if cfg.regs[ev.reg].spec.model == COMPOSITE:
            f, b = ev.value
            return f"{head}W+ p{ev.pid} {name} [{f}]={b}"
        return f"{head}W+ p{ev.pid} {name} {render_value(ev.value)}"
    if a == "write-end":
        return f"{head}W- p{ev.pid} {name}"
    if a == "internal":
        return f"{head}I p{ev.pid} {ev.value}"
    if ev.reg is None:
        return f"{head}S p{ev.pid} {name} -> {render_value(ev.value)}"
    return f"{head}S p{ev.pid} {name} {render_value(ev.value)}"


def render_trace(trace: Trace, proto: Protocol) -> str:
    lines = [f"# protocol={proto.kind} n={proto.n} k={proto.K} seed={trace.seed}",
             f"init {render(trace.init)}"]
    lines += [render_event(ev, trace.init, proto) for ev in trace.events]
    lines.append(f"final {render(trace.final)}")
    return "\n".join(lines) + "\n"


_EVENT_RE = re.compile(r"^(\d+) (R\+|R|W\+|W-|I|S) p(\d+)(?: (\S+))?(?: (?:-> )?(.*))?$")


def parse_trace_events(text: str) -> list:
    """(tick, pid, code, reg name, value text) for every event line."""
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith(("#", "init ", "final ")):
            continue
        m = _EVENT_RE.match(line)
        if m is None:
            raise ValueError(f"bad trace line {line!r}")
        tick, code, pid, reg, value = m.groups()
        out.append((int(tick), int(pid), code, reg, value))
    return out


def directives_of(proto: Protocol, events, init: Configuration | None = None) -> list:
    """Directives that replay recorded events (Event objects or parsed tuples)."""
    out = []
    randomized = getattr(proto, "p", None) is not None
    for ev in events:
        if isinstance(ev, Event):
            if ev.action in ("read-end", "read") or (ev.action == "step" and randomized):
                name = reg_name(init, ev.reg, ev.pid) if init is not None else f"r{ev.pid}"
                out.append(Resolve(ev.pid, name, render_value(ev.value)))
            else:
                out.append(Act(ev.pid))
            continue
        tick, pid, code, reg, value = ev
        if code == "R" or (code == "S" and randomized and value is not None):
            out.append(Resolve(pid, reg, value))
        else:
            out.append(Act(pid))
    return out


def replay(proto: Protocol, init: Configuration, directives) -> Configuration:
    cfg = init.copy()
    for d in directives:
        execute(proto, cfg, d)
    return cfg


# -- scenario files ---------------------------------------------------------

@dataclass
class Scenario:
    protocol: str
    n: int
    init: str
    K: int | None = None
    opts: dict = field(default_factory=dict)
    lines: list = field(default_factory=list)  # (lineno, verb, argument text)
    name: str = ""

    def make_protocol(self) -> Protocol:
        return make_protocol(self.protocol, self.n, self.K, **self.opts)


_VERBS = ("act", "resolve", "assert", "assert-legit", "assert-privileged")


def parse_scenario(text: str, name: str = "") -> Scenario:
    header = None
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            header = {}
            for tok in line.split():
                k, _, v = tok.partition("=")
                header[k] = v
            continue
        verb, _, rest = line.partition(" ")
        if verb not in _VERBS:
            raise ScenarioError(f"{name}:{lineno}: unknown directive {verb!r}")
        lines.append((lineno, verb, rest.strip()))
    if header is None or not {"protocol", "n", "init"} <= header.keys():
        raise ScenarioError(f"{name}: header needs protocol=, n= and init=")
    opts = {}
    if "L" in header:
        opts["L"] = int(header["L"])
    return Scenario(header["protocol"], int(header["n"]), header["init"],
                    int(header["k"]) if "k" in header else None, opts, lines, name)


def parse_directive(verb: str, rest: str):
    if verb == "act":
        m = re.fullmatch(r"p(\d+)", rest)
        if not m:
            raise ScenarioError(f"bad act {rest!r}")
        return Act(int(m.group(1)))
    m = re.fullmatch(r"p(\d+)\s+(\S+)\s*=\s*(\S+)", rest)
    if not m:
        raise ScenarioError(f"bad resolve {rest!r}")
    return Resolve(int(m.group(1)), m.group(2), m.group(3))


def config_from_rendering(proto: Protocol, text: str) -> Configuration:
    """Configuration with the given fields; unspecified ones come from
    the consistent quiescent configuration for the counters.
    """
    f = parse_rendering(text)
    if "x" not in f:
        raise ScenarioError("init rendering must give x=[...]")
    cfg = proto.initial(parse_counters(f["x"]))
    items = {k: [v for v in f[k][1:-1].split(",")] for k in f if k != "x"}
    for i, p in enumerate(cfg.procs):
        if "pc" in items:
            p.pc = int(items["pc"][i])
        if "t" in items:
            p.t = parse_value(items["t"][i])
        for name in ("s", "j", "k"):
            if name in items:
                setattr(p, name, int(items[name][i]))
        if "g" in items:
            p.g = () if items["g"][i] == "-" else tuple(int(c) for c in items["g"][i])
    if "ops" in items and any(o != "-" for o in items["ops"]):
        raise ScenarioError("initial configurations cannot have operations in flight")
    if "regs" in items:
        groups: dict = {}
        for r in cfg.regs:
            groups.setdefault(r.name.split(".")[0], []).append(r)
        values = items["regs"]
        if len(values) != len(groups):
            raise ScenarioError(f"expected {len(groups)} register groups, got {len(values)}")
        for members, text_v in zip(groups.values(), values):
            if len(members) == 1:
                r = members[0]
                v = parse_value(text_v, bits=r.spec.model == COMPOSITE)
                _reset(r, v)
            else:
                if len(text_v) != len(members):
                    raise ScenarioError(f"register group needs {len(members)} bits, got {text_v!r}")
                for r, c in zip(members, text_v):
                    _reset(r, int(c))
    return cfg


def _reset(reg, value):
    reg.committed = value
    reg.history[0].value = value
    del reg.history[1:]


__all__ = [
    "Act", "Resolve", "Schedule", "Event", "Trace", "MODES", "next_actor", "run", "drive",
    "execute", "render_trace", "parse_trace_events", "directives_of", "replay", "configs_along",
    "Scenario", "parse_scenario", "parse_directive", "config_from_rendering", "BOT", "pred_of",
]
