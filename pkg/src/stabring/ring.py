"""Ring configurations, Dijkstra's privilege rule and legitimacy predicates.

Processors are numbered 1..n; p1 is the distinguished processor and the
predecessor of p1 is pn. Labels are zero-based, 0..K-1.

Privilege (Dijkstra's K-state rule, assumed since the protocols only cite it):
p1 is privileged iff x1 == xn, and pi (i != 1) iff xi != x(i-1).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .registers import BOT, RegisterState, render_value

EXACTLY_ONE = "exactly-one-privileged"
SAFE_CONFIG = "safe-configuration"
MARKOV = "markov-not-010-101"
PREDICATE_KINDS = (EXACTLY_ONE, SAFE_CONFIG, MARKOV)

# protocol kind -> callable(config) -> bool, filled in by the protocols module
SAFE_CONFIG_CHECKS: dict = {}


def pred_of(i: int, n: int) -> int:
    return n if i == 1 else i - 1


def succ_of(i: int, n: int) -> int:
    return 1 if i == n else i + 1


@dataclass(slots=True)
class Proc:
    """Local state of one processor; unused scratch fields stay at defaults."""
    x: int
    t: int = 0
    g: tuple = ()
    s: int = 0
    j: int = 0
    k: int = 0
    pc: int = 0

    def copy(self) -> "Proc":
        return Proc(self.x, self.t, self.g, self.s, self.j, self.k, self.pc)


@dataclass(slots=True)
class Op:
    """An operation a processor has begun but not finished."""
    kind: str  # "read" or "write"
    reg: int
    start: int
    value: object = None


@dataclass(slots=True)
class Configuration:
    procs: list
    regs: list = field(default_factory=list)
    inflight: list = field(default_factory=list)
    tick: int = 0

    def __post_init__(self):
        if not self.inflight:
            self.inflight = [None] * len(self.procs)

    @classmethod
    def from_counters(cls, xs) -> "Configuration":
        return cls([Proc(int(x)) for x in xs])

    @property
    def n(self) -> int:
        return len(self.procs)

    @property
    def x(self) -> list:
        return [p.x for p in self.procs]

    def copy(self) -> "Configuration":
        return Configuration(
            [p.copy() for p in self.procs],
            [r.copy() for r in self.regs],
            [None if o is None else Op(o.kind, o.reg, o.start, o.value) for o in self.inflight],
            self.tick,
        )

    def fields(self) -> dict:
        return render_fields(self)

    def render(self) -> str:
        return render(self)

    def key(self):
        """Hashable state identity, blind to absolute tick values."""
        return state_key(self)


class ShapeMismatch(ValueError):
    pass


def _virtual_ring(config: Configuration) -> list:
    """Counters interleaved with register copies: x1, IR2, x2, IR3, ..., xn, IR1."""
    n = config.n
    if len(config.regs) != n:
        raise ShapeMismatch("dijkstra-rw configuration needs one register per link")
    out = []
    for i in range(1, n + 1):
        out.append(config.procs[i - 1].x)
        out.append(config.regs[succ_of(i, n) - 1].committed)
    return out


def privileged_positions(values) -> set:
    """Dijkstra guard over a plain list of ring values (0-based positions)."""
    n = len(values)
    out = set()
    if values[0] == values[-1]:
        out.add(0)
    for i in range(1, n):
        if values[i] != values[i - 1]:
            out.add(i)
    return out


def privileged(config: Configuration, kind: str = "dijkstra-central") -> set:
    """Processors whose Dijkstra guard holds, evaluated on the counters.

    For ``dijkstra-rw`` a processor is privileged when its read step or its
    write step would change the state in the 2n-element ring.
    """
    n = config.n
    if n < 2:
        raise ShapeMismatch("a ring needs at least two processors")
    if kind == "dijkstra-rw":
        return {pos // 2 + 1 for pos in privileged_positions(_virtual_ring(config))}
    xs = [p.x for p in config.procs]
    return {i + 1 for i in privileged_positions(xs)}


def privilege_count(config: Configuration, kind: str = "dijkstra-central") -> int:
    if kind == "dijkstra-rw":
        return len(privileged_positions(_virtual_ring(config)))
    return len(privileged_positions([p.x for p in config.procs]))


@dataclass(frozen=True)
class LegitimacyPredicate:
    kind: str = EXACTLY_ONE
    protocol: str = "dijkstra-central"

    def __post_init__(self):
        if self.kind not in PREDICATE_KINDS:
            raise ValueError(f"unknown predicate kind {self.kind!r}")

    def __call__(self, config: Configuration) -> bool:
        return is_legitimate(config, self)


def is_legitimate(config: Configuration, pred: LegitimacyPredicate = LegitimacyPredicate()) -> bool:
    if pred.kind == EXACTLY_ONE:
        return privilege_count(config, pred.protocol) == 1
    if pred.kind == MARKOV:
        xs = config.x
        if len(xs) == 3:
            return xs not in ([0, 1, 0], [1, 0, 1])
        return privilege_count(config) == 1
    check = SAFE_CONFIG_CHECKS.get(pred.protocol)
    if check is None:
        raise ShapeMismatch(f"no safe-configuration predicate for {pred.protocol}")
    return check(config)


def label_multiset(config: Configuration) -> Counter:
    return Counter(p.x for p in config.procs)


# -- canonical text ---------------------------------------------------------

def _reg_groups(regs) -> list:
    groups: dict = {}
    for r in regs:
        groups.setdefault(r.name.split(".")[0], []).append(r)
    out = []
    for members in groups.values():
        if len(members) == 1:
            out.append(render_value(members[0].committed))
        else:
            out.append("".join(render_value(r.committed) for r in members))
    return out


def _render_op(config: Configuration, op: Op | None) -> str:
    if op is None:
        return "-"
    name = config.regs[op.reg].name if config.regs else str(op.reg)
    if op.kind == "read":
        return f"R{name}"
    v = op.value
    if isinstance(v, tuple) and len(v) == 2 and config.regs[op.reg].spec.model == "composite-safe":
        return f"W{name}[{v[0]}]={v[1]}"
    return f"W{name}:{render_value(v)}"


def _lst(items) -> str:
    return "[" + ",".join(items) + "]"


def render_fields(config: Configuration) -> dict:
    ps = config.procs
    return {
        "x": _lst(render_value(p.x) for p in ps),
        "pc": _lst(str(p.pc) for p in ps),
        "regs": _lst(_reg_groups(config.regs)),
        "t": _lst(render_value(p.t) for p in ps),
        "g": _lst("".join(map(str, p.g)) or "-" for p in ps),
        "s": _lst(str(p.s) for p in ps),
        "j": _lst(str(p.j) for p in ps),
        "k": _lst(str(p.k) for p in ps),
        "ops": _lst(_render_op(config, o) for o in config.inflight),
    }


_DEFAULTS = {"t": "0", "g": "-", "s": "0", "j": "0", "k": "0", "ops": "-"}


def render(config: Configuration) -> str:
    """``x=[..];pc=[..];regs=[..]`` plus any scratch field not at its default."""
    f = render_fields(config)
    parts = [f"x={f['x']}", f"pc={f['pc']}", f"regs={f['regs']}"]
    for name, default in _DEFAULTS.items():
        if f[name] != _lst([default] * config.n):
            parts.append(f"{name}={f[name]}")
    return ";".join(parts)


def parse_rendering(text: str) -> dict:
    """Split a (possibly partial) rendering into ``{field: "[...]"}``."""
    out = {}
    for part in text.strip().split(";"):
        if not part.strip():
            continue
        name, _, value = part.partition("=")
        name, value = name.strip(), value.strip()
        if not value.startswith("[") or not value.endswith("]"):
            raise ValueError(f"bad field {part!r} in rendering")
        items = [v.strip() for v in value[1:-1].split(",")]
        out[name] = _lst(v for v in items if v)
    return out


def rendering_diff(config: Configuration, expected: str) -> dict:
    """Fields of ``expected`` that disagree with ``config``: name -> (want, got)."""
    got = render_fields(config)
    diff = {}
    for name, want in parse_rendering(expected).items():
        if name not in got:
            raise ValueError(f"unknown configuration field {name!r}")
        if got[name] != want:
            diff[name] = (want, got[name])
    return diff


def parse_counters(text: str) -> list:
    """Counters from ``x=[..]`` or a bare ``[..]`` / ``0,0,2`` list."""
    text = text.strip()
    if text.startswith("x="):
        text = parse_rendering(text)["x"]
    text = text.strip("[]{} ")
    return [BOT if v.strip() == "_" else int(v) for v in text.split(",") if v.strip()]


def state_key(config: Configuration):
    ops = []
    for i, o in enumerate(config.inflight, start=1):
        if o is None:
            ops.append(None)
        elif o.kind == "write":
            ops.append(("w", o.reg, o.value))
        else:
            reg: RegisterState = config.regs[o.reg]
            ops.append(("r", o.reg, tuple(reg.candidates((o.start, config.tick), i))))
    regs = tuple((r.committed, _floor_gap(r)) for r in config.regs)
    return (tuple((p.x, p.t, p.g, p.s, p.j, p.k, p.pc) for p in config.procs), regs, tuple(ops))


def _floor_gap(reg: RegisterState):
    if not reg.reader_floor:
        return ()
    top = reg.history[-1].seq
    return tuple(sorted((rd, max(0, f - top)) for rd, f in reg.reader_floor.items()))
