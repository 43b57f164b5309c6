"""Step machines for Dijkstra's ring under each register model.

Coarse kinds (``dijkstra-central``, ``dijkstra-rw``) execute a whole guarded
command per step. Fine kinds split every read and write into a begin and an
end micro-step, and every test into its own internal micro-step, so reads can
overlap writes.

Register layout: link i (1-based) is the input of p_i and the output of
p_(i-1). Value registers are named ``r<i>``; per-bit registers ``r<i>.<k>``.
"""
from __future__ import annotations

import math
import random

from . import codes
from .registers import (
    ATOMIC, BOT, COMPOSITE, REGULAR, SAFE, RegisterSpec, RegisterState, ScenarioError,
)
from .ring import SAFE_CONFIG_CHECKS, Configuration, Op, Proc, pred_of, succ_of

KINDS = (
    "dijkstra-central", "dijkstra-rw", "naive-regular", "regular-bot",
    "safe-unary", "safe-gray", "composite-safe",
)
# single safe register per link, writers rewrite forever; only used to demonstrate non-convergence
EXTRA_KINDS = ("naive-safe",)
COARSE_KINDS = ("dijkstra-central", "dijkstra-rw")


class ConfigurationError(ValueError):
    pass


class EngineError(RuntimeError):
    pass


def dijkstra_rule(i: int, own: int, pred: int, K: int):
    """New value for position ``i`` (1 = distinguished) or None if not enabled."""
    if i == 1:
        return (own + 1) % K if own == pred else None
    return pred if own != pred else None


class Protocol:
    kind = ""
    coarse = False
    steps: tuple = ()

    def __init__(self, n: int, K: int):
        if n < 2:
            raise ConfigurationError(f"{self.kind} needs n >= 2, got {n}")
        if K < 2:
            raise ConfigurationError(f"{self.kind} needs K >= 2, got {K}")
        self.n = n
        self.K = K
        self.m = 0
        self.register_specs: list = []

    def __repr__(self):
        return f"<{self.kind} n={self.n} K={self.K}>"

    # configurations -------------------------------------------------------

    def initial(self, xs=None) -> Configuration:
        """Quiescent configuration whose registers agree with the counters."""
        xs = [0] * self.n if xs is None else list(xs)
        if len(xs) != self.n:
            raise ConfigurationError(f"expected {self.n} counters, got {len(xs)}")
        return self._consistent(xs)

    def _consistent(self, xs) -> Configuration:
        raise NotImplementedError

    def legit_config(self, rng: random.Random) -> Configuration:
        """A legitimate quiescent configuration: one token, registers consistent."""
        base = rng.randrange(self.K)
        token = rng.randrange(1, self.n + 1)
        xs = [(base + 1) % self.K if j < token else base for j in range(1, self.n + 1)]
        return self._consistent(xs)

    def random_config(self, rng: random.Random) -> Configuration:
        raise NotImplementedError

    # stepping -------------------------------------------------------------

    def step(self, cfg: Configuration, pid: int, resolver) -> tuple:
        """Advance ``pid`` by one micro-step in place; returns (action, reg, value)."""
        raise NotImplementedError

    def enabled(self, cfg: Configuration, pid: int) -> bool:
        return True

    def pending_read(self, cfg: Configuration, pid: int):
        """Register index if pid's next micro-step resolves a read, else None."""
        return None

    def step_name(self, cfg: Configuration, pid: int) -> str:
        return self.steps[cfg.procs[pid - 1].pc] if self.steps else "step"

    # register helpers -----------------------------------------------------

    def _read_begin(self, cfg, pid, reg):
        cfg.regs[reg].begin_read(pid, cfg.tick)
        cfg.inflight[pid - 1] = Op("read", reg, cfg.tick)
        return ("read-begin", reg, None)

    def _read_end(self, cfg, pid, resolver):
        op = cfg.inflight[pid - 1]
        if op is None or op.kind != "read":
            raise EngineError(f"p{pid} has no read in flight")
        r = cfg.regs[op.reg]
        legal = r.end_read(pid, cfg.tick)
        v = resolver(cfg, pid, op.reg, legal, correct=r.committed)
        r.finish_read(pid, (op.start, cfg.tick), v)
        cfg.inflight[pid - 1] = None
        return v

    def _read_now(self, cfg, pid, reg, resolver):
        r = cfg.regs[reg]
        r.begin_read(pid, cfg.tick)
        legal = r.end_read(pid, cfg.tick)
        v = resolver(cfg, pid, reg, legal, correct=r.committed)
        r.finish_read(pid, (cfg.tick, cfg.tick), v)
        return v

    def _write_begin(self, cfg, pid, reg, value):
        cfg.regs[reg].begin_write(value, cfg.tick)
        cfg.inflight[pid - 1] = Op("write", reg, cfg.tick, value)
        return ("write-begin", reg, value)

    def _write_end(self, cfg, pid):
        op = cfg.inflight[pid - 1]
        if op is None or op.kind != "write":
            raise EngineError(f"p{pid} has no write in flight")
        cfg.regs[op.reg].end_write(cfg.tick)
        cfg.inflight[pid - 1] = None
        return ("write-end", op.reg, None)


# -- coarse protocols -------------------------------------------------------

class DijkstraCentral(Protocol):
    """Dijkstra's K-state ring; a step executes the whole guarded command."""
    kind = "dijkstra-central"
    coarse = True

    def __init__(self, n, K, p=None):
        super().__init__(n, K)
        self.p = p  # probability a read of the predecessor is correct; None = always

    def _consistent(self, xs):
        return Configuration.from_counters(xs)

    def random_config(self, rng):
        return Configuration.from_counters(rng.randrange(self.K) for _ in range(self.n))

    def enabled(self, cfg, pid):
        xs = cfg.procs
        return dijkstra_rule(pid, xs[pid - 1].x, xs[pred_of(pid, self.n) - 1].x, self.K) is not None

    def pending_read(self, cfg, pid):
        return -1 if self.p is not None else None

    def step(self, cfg, pid, resolver=None):
        p = cfg.procs[pid - 1]
        seen = cfg.procs[pred_of(pid, self.n) - 1].x
        if self.p is not None:
            seen = resolver(cfg, pid, None, list(range(self.K)), correct=seen)
        new = dijkstra_rule(pid, p.x, seen, self.K)
        if new is not None:
            p.x = new
        return ("step", None, seen)

    # tuple-level interface for the exhaustive searcher
    def state_of(self, cfg) -> tuple:
        return tuple(p.x for p in cfg.procs)

    def config_of(self, state) -> Configuration:
        return Configuration.from_counters(state)

    def moves(self, state):
        n, K = self.n, self.K
        for i in range(1, n + 1):
            new = dijkstra_rule(i, state[i - 1], state[i - 2], K)
            if new is not None:
                yield f"p{i}", state[: i - 1] + (new,) + state[i:]

    def state_space(self) -> int:
        return self.K ** self.n


class DijkstraRW(Protocol):
    """Read/write atomicity: each processor alternates an atomic read of its
    input register into its counter and an atomic write of its counter to
    its output register. Viewed as a ring of 2n positions under a central
    daemon.
    """
    kind = "dijkstra-rw"
    coarse = True
    steps = ("read", "write")

    def __init__(self, n, K):
        super().__init__(n, K)
        self.register_specs = [
            RegisterSpec(ATOMIC, tuple(range(K)), pred_of(i, n), frozenset({i})) for i in range(1, n + 1)
        ]

    def _build(self, xs, regs, pcs=None):
        cfg = Configuration([Proc(x, pc=0 if pcs is None else pcs[i]) for i, x in enumerate(xs)])
        cfg.regs = [RegisterState.fresh(s, v, f"r{i}") for i, (s, v) in enumerate(zip(self.register_specs, regs), start=1)]
        return cfg

    def _consistent(self, xs):
        return self._build(xs, [xs[pred_of(i, self.n) - 1] for i in range(1, self.n + 1)])

    def random_config(self, rng):
        K, n = self.K, self.n
        return self._build([rng.randrange(K) for _ in range(n)], [rng.randrange(K) for _ in range(n)],
                           [rng.randrange(2) for _ in range(n)])

    def enabled(self, cfg, pid):
        return True

    def step(self, cfg, pid, resolver=None):
        p = cfg.procs[pid - 1]
        if p.pc == 0:
            reg = pid - 1
            new = dijkstra_rule(pid, p.x, cfg.regs[reg].committed, self.K)
            if new is not None:
                p.x = new
            p.pc = 1
            return ("step", reg, p.x)
        reg = succ_of(pid, self.n) - 1
        r = cfg.regs[reg]
        if r.committed != p.x:
            r.begin_write(p.x, cfg.tick)
            r.end_write(cfg.tick)
        p.pc = 0
        return ("step", reg, p.x)

    # 2n-ring view: state = (x1..xn, IR1..IRn), pcs abstracted away
    def state_of(self, cfg):
        return tuple(p.x for p in cfg.procs) + tuple(r.committed for r in cfg.regs)

    def config_of(self, state):
        n = self.n
        return self._build(list(state[:n]), list(state[n:]))

    def moves(self, state):
        n, K = self.n, self.K
        for i in range(1, n + 1):
            x, inp = state[i - 1], state[n + i - 1]
            new = dijkstra_rule(i, x, inp, K)
            if new is not None:
                yield f"p{i}:read", state[: i - 1] + (new,) + state[i:]
            out = n + succ_of(i, n) - 1
            if state[out] != x:
                yield f"p{i}:write", state[:out] + (x,) + state[out + 1:]

    def state_space(self) -> int:
        return self.K ** (2 * self.n)


# -- regular registers ------------------------------------------------------

class RegularBot(Protocol):
    """Read the input register, test, and on a change write a bottom value
    before the new counter. ``bot=False`` drops the bottom writes.
    """
    kind = "regular-bot"
    steps = ("read-begin", "read-end", "test", "assign",
             "write-bot-begin", "write-bot-end", "write-begin", "write-end")
    QUIESCENT = (0, 2, 3, 4, 6)

    def __init__(self, n, K, bot=True, model=REGULAR):
        super().__init__(n, K)
        self.bot = bot
        self.model = model
        domain = tuple(range(K)) + ((BOT,) if bot else ())
        self.domain = domain
        self.register_specs = [
            RegisterSpec(model, domain, pred_of(i, n), frozenset({i})) for i in range(1, n + 1)
        ]

    def _build(self, xs, regs, ts, pcs):
        cfg = Configuration([Proc(x, t=t, pc=pc) for x, t, pc in zip(xs, ts, pcs)])
        cfg.regs = [RegisterState.fresh(s, v, f"r{i}") for i, (s, v) in enumerate(zip(self.register_specs, regs), start=1)]
        return cfg

    def _consistent(self, xs):
        regs = [xs[pred_of(i, self.n) - 1] for i in range(1, self.n + 1)]
        return self._build(xs, regs, list(regs), [0] * self.n)

    def random_config(self, rng):
        n, K, dom = self.n, self.K, self.domain
        xs = [rng.randrange(K) for _ in range(n)]
        regs = [rng.choice(dom) for _ in range(n)]
        pcs = [rng.choice(self.QUIESCENT if self.bot else (0, 2, 3, 6)) for _ in range(n)]
        ts = []
        for i, pc in enumerate(pcs, start=1):
            t = rng.choice(dom)
            if pc == 3 and i != 1 and t == BOT:
                t = rng.randrange(K)
            ts.append(t)
        return self._build(xs, regs, ts, pcs)

    def pending_read(self, cfg, pid):
        return pid - 1 if cfg.procs[pid - 1].pc == 1 else None

    def step(self, cfg, pid, resolver):
        p = cfg.procs[pid - 1]
        pc = p.pc
        if pc == 0:
            p.pc = 1
            return self._read_begin(cfg, pid, pid - 1)
        if pc == 1:
            v = self._read_end(cfg, pid, resolver)
            p.t = v
            p.pc = 2
            return ("read-end", pid - 1, v)
        if pc == 2:
            if pid == 1:
                change = p.t == p.x
            else:
                # a bottom read is "no change observed"; it is never adopted
                change = p.t != BOT and p.t != p.x
            p.pc = 3 if change else 6
            return ("internal", None, "test")
        if pc == 3:
            p.x = (p.x + 1) % self.K if pid == 1 else p.t
            p.pc = 4 if self.bot else 6
            return ("internal", None, "assign")
        out = succ_of(pid, self.n) - 1
        if pc == 4:
            p.pc = 5
            return self._write_begin(cfg, pid, out, BOT)
        if pc == 6:
            p.pc = 7
            return self._write_begin(cfg, pid, out, p.x)
        p.pc = 6 if pc == 5 else 0
        return self._write_end(cfg, pid)


def regular_safe_configuration(cfg: Configuration) -> bool:
    """All registers and counters hold one value x, every started read can
    only return x, and no pending local step would change a counter.
    """
    x = cfg.procs[0].x
    for p in cfg.procs:
        if p.x != x:
            return False
        if p.pc in (4, 5):
            return False
        if p.pc in (2, 3) and p.t not in (x, BOT):
            return False
    for r in cfg.regs:
        if r.committed != x:
            return False
    for i, op in enumerate(cfg.inflight, start=1):
        if op is None:
            continue
        if op.kind == "write":
            if op.value != x:
                return False
        elif set(cfg.regs[op.reg].candidates((op.start, cfg.tick), i)) != {x}:
            return False
    return True


SAFE_CONFIG_CHECKS["regular-bot"] = regular_safe_configuration
SAFE_CONFIG_CHECKS["naive-regular"] = regular_safe_configuration


# -- one-bit safe registers with self-reads ---------------------------------

class _BitArrayProtocol(Protocol):
    """Shared layout: F one-bit safe 1W2R registers per link."""
    F = 0

    def _specs(self):
        n = self.n
        specs = []
        for i in range(1, n + 1):
            w = pred_of(i, n)
            for _ in range(self.F):
                specs.append(RegisterSpec(SAFE, (0, 1), w, frozenset({i, w})))
        return specs

    def out_base(self, pid):
        return (succ_of(pid, self.n) - 1) * self.F

    def in_base(self, pid):
        return (pid - 1) * self.F

    def encode(self, x) -> tuple:
        raise NotImplementedError

    def _build(self, procs, bits):
        cfg = Configuration(procs)
        F = self.F
        cfg.regs = [
            RegisterState.fresh(s, b, f"r{idx // F + 1}.{idx % F}")
            for idx, (s, b) in enumerate(zip(self.register_specs, bits))
        ]
        return cfg

    def _consistent(self, xs):
        bits = []
        for i in range(1, self.n + 1):
            bits.extend(self.encode(xs[pred_of(i, self.n) - 1]))
        return self._build([Proc(x) for x in xs], bits)

    def link_bits(self, cfg, link) -> tuple:
        base = (link - 1) * self.F
        return tuple(r.committed for r in cfg.regs[base: base + self.F])


class SafeUnary(_BitArrayProtocol):
    """Counter in unary over K one-bit registers: only bit x is 1."""
    kind = "safe-unary"
    steps = ("own-read-begin", "own-read-end", "own-test", "write-begin", "write-end",
             "in-read-begin", "in-read-end", "in-test", "decide")
    QUIESCENT = (0, 2, 5, 7, 8)

    def __init__(self, n, K):
        super().__init__(n, K)
        self.F = K
        self.register_specs = self._specs()

    def encode(self, x):
        return tuple(1 if k == x else 0 for k in range(self.K))

    def random_config(self, rng):
        n, K = self.n, self.K
        procs = []
        for _ in range(n):
            pc = rng.choice(self.QUIESCENT)
            k = rng.randrange(K)
            s = rng.randrange(k + 1) if pc in (5, 7) else rng.randrange(3)
            j = rng.randrange(-1, K)
            procs.append(Proc(rng.randrange(K), t=rng.randrange(2), s=s, j=j, k=0 if pc == 8 else k, pc=pc))
        bits = [rng.randrange(2) for _ in range(n * K)]
        return self._build(procs, bits)

    def pending_read(self, cfg, pid):
        p = cfg.procs[pid - 1]
        if p.pc in (1, 6):
            return cfg.inflight[pid - 1].reg
        return None

    def _next_own(self, p):
        p.k += 1
        if p.k == self.F:
            p.k, p.s, p.j = 0, 0, -1
            p.pc = 5
        else:
            p.pc = 0

    def step(self, cfg, pid, resolver):
        p = cfg.procs[pid - 1]
        pc = p.pc
        if pc == 0:
            p.pc = 1
            return self._read_begin(cfg, pid, self.out_base(pid) + p.k)
        if pc == 1:
            reg = cfg.inflight[pid - 1].reg
            p.t = self._read_end(cfg, pid, resolver)
            p.pc = 2
            return ("read-end", reg, p.t)
        if pc == 2:
            want = 1 if p.k == p.x else 0
            if p.t != want:
                p.pc = 3
            else:
                self._next_own(p)
            return ("internal", None, "own-test")
        if pc == 3:
            p.pc = 4
            return self._write_begin(cfg, pid, self.out_base(pid) + p.k, 1 if p.k == p.x else 0)
        if pc == 4:
            ev = self._write_end(cfg, pid)
            self._next_own(p)
            return ev
        if pc == 5:
            p.pc = 6
            return self._read_begin(cfg, pid, self.in_base(pid) + p.k)
        if pc == 6:
            reg = cfg.inflight[pid - 1].reg
            p.t = self._read_end(cfg, pid, resolver)
            p.pc = 7
            return ("read-end", reg, p.t)
        if pc == 7:
            if p.t == 1:
                p.s += 1
                p.j = p.k
            p.k += 1
            p.pc = 8 if p.k == self.F else 5
            return ("internal", None, "in-test")
        # decide
        if pid == 1:
            if p.s == 1 and p.j == p.x:
                p.x = (p.x + 1) % self.K
        elif p.s == 1 and p.j != p.x:
            p.x = p.j
        p.k = 0
        p.pc = 0
        return ("internal", None, "decide")


class SafeGray(_BitArrayProtocol):
    """Counter as an m-bit reflected Gray code plus a parity bit.

    The counter runs modulo 2**m so that every increment, wrap included,
    changes exactly one Gray bit.
    """
    kind = "safe-gray"
    steps = ("own-read-begin", "own-read-end", "own-test", "write-begin", "write-end",
             "in-read-begin", "in-read-end", "parity-read-begin", "parity-read-end", "decide")
    QUIESCENT = (0, 2, 5, 7, 9)

    def __init__(self, n, K=None, m=None):
        m = m if m is not None else math.ceil(math.log2(2 * n + 1))
        if K is not None and K != 1 << m:
            raise ConfigurationError(f"safe-gray counts modulo 2**m = {1 << m}, not {K}")
        super().__init__(n, 1 << m)
        self.m = m
        self.F = m + 1
        self.register_specs = self._specs()
        self.gray = [codes.graycode_encode(x, m) for x in range(self.K)]
        self.par = [codes.parity(g) for g in self.gray]
        self.ungray = {g: x for x, g in enumerate(self.gray)}

    def encode(self, x):
        return self.gray[x] + (self.par[x],)

    def random_config(self, rng):
        n, m = self.n, self.m
        procs = []
        for _ in range(n):
            pc = rng.choice(self.QUIESCENT)
            k = rng.randrange(self.F) if pc in (0, 2) else rng.randrange(m) if pc == 5 else 0
            g = tuple(rng.randrange(2) for _ in range(m))
            procs.append(Proc(rng.randrange(self.K), t=rng.randrange(2), g=g, k=k, pc=pc))
        bits = [rng.randrange(2) for _ in range(n * self.F)]
        return self._build(procs, bits)

    def _consistent(self, xs):
        cfg = super()._consistent(xs)
        for p in cfg.procs:
            p.g = (0,) * self.m
        return cfg

    def pending_read(self, cfg, pid):
        if cfg.procs[pid - 1].pc in (1, 6, 8):
            return cfg.inflight[pid - 1].reg
        return None

    def _want(self, p):
        return self.gray[p.x][p.k] if p.k < self.m else self.par[p.x]

    def _next_own(self, p):
        p.k += 1
        if p.k == self.F:
            p.k = 0
            p.pc = 5
        else:
            p.pc = 0

    def step(self, cfg, pid, resolver):
        p = cfg.procs[pid - 1]
        pc = p.pc
        if pc == 0:
            p.pc = 1
            return self._read_begin(cfg, pid, self.out_base(pid) + p.k)
        if pc == 1:
            reg = cfg.inflight[pid - 1].reg
            p.t = self._read_end(cfg, pid, resolver)
            p.pc = 2
            return ("read-end", reg, p.t)
        if pc == 2:
            if p.t != self._want(p):
                p.pc = 3
            else:
                self._next_own(p)
            return ("internal", None, "own-test")
        if pc == 3:
            p.pc = 4
            return self._write_begin(cfg, pid, self.out_base(pid) + p.k, self._want(p))
        if pc == 4:
            ev = self._write_end(cfg, pid)
            self._next_own(p)
            return ev
        if pc == 5:
            p.pc = 6
            return self._read_begin(cfg, pid, self.in_base(pid) + p.k)
        if pc == 6:
            reg = cfg.inflight[pid - 1].reg
            v = self._read_end(cfg, pid, resolver)
            g = list(p.g)
            g[p.k] = v
            p.g = tuple(g)
            p.k += 1
            if p.k == self.m:
                p.k = 0
                p.pc = 7
            else:
                p.pc = 5
            return ("read-end", reg, v)
        if pc == 7:
            p.pc = 8
            return self._read_begin(cfg, pid, self.in_base(pid) + self.m)
        if pc == 8:
            reg = cfg.inflight[pid - 1].reg
            p.t = self._read_end(cfg, pid, resolver)
            p.pc = 9
            return ("read-end", reg, p.t)
        if p.t == codes.parity(p.g):
            same = self.gray[p.x] == p.g
            if pid == 1:
                if same:
                    p.x = (p.x + 1) % self.K
            elif not same:
                p.x = self.ungray[p.g]
        p.pc = 0
        return ("internal", None, "decide")


# -- composite safe register ------------------------------------------------

class CompositeSafe(Protocol):
    """One composite register per link: 3 guard bits + 3L label bits, written
    one field at a time and read whole. Readers discard values whose guard
    decodes to 0. Without a change the writer refreshes one field per loop.
    """
    kind = "composite-safe"
    steps = ("read", "test", "assign", "update-write-begin", "update-write-end",
             "refresh-write-begin", "refresh-write-end")
    QUIESCENT = (0, 1, 2, 3, 5)

    def __init__(self, n, K=None, L=None, paper_width=False):
        K = 2 * n + 1 if K is None else K
        super().__init__(n, K)
        if L is None:
            L = 2 * (n + 1) if paper_width else max(1, (K - 1).bit_length())
        if (1 << L) < K:
            raise ConfigurationError(f"{L} label bits cannot hold {K} labels")
        self.L = L
        self.F = 3 + 3 * L
        self.register_specs = [
            RegisterSpec(COMPOSITE, (0, 1), pred_of(i, n), frozenset({i}), fields=self.F)
            for i in range(1, n + 1)
        ]

    def encode(self, x, guard=1):
        return codes.composite_encode(x, guard, self.L)

    def _build(self, procs, vecs):
        cfg = Configuration(procs)
        cfg.regs = [RegisterState.fresh(s, v, f"r{i}") for i, (s, v) in enumerate(zip(self.register_specs, vecs), start=1)]
        return cfg

    def _consistent(self, xs):
        vecs = [self.encode(xs[pred_of(i, self.n) - 1]) for i in range(1, self.n + 1)]
        return self._build([Proc(x, t=BOT) for x in xs], vecs)

    def random_config(self, rng):
        n, K, F = self.n, self.K, self.F
        procs = []
        for i in range(1, n + 1):
            pc = rng.choice(self.QUIESCENT)
            t = rng.choice(list(range(K)) + [BOT])
            if pc == 2 and i != 1 and t == BOT:
                t = rng.randrange(K)
            procs.append(Proc(rng.randrange(K), t=t, j=rng.randrange(F + 3), k=rng.randrange(F), pc=pc))
        vecs = [tuple(rng.randrange(2) for _ in range(F)) for _ in range(n)]
        return self._build(procs, vecs)

    def decode(self, vec):
        """Label carried by a read, or BOT when the guard says "updating"."""
        guard, label = codes.composite_decode(vec)
        if guard == 0 or label >= self.K:
            return BOT
        return label

    def pending_read(self, cfg, pid):
        return pid - 1 if cfg.procs[pid - 1].pc == 0 else None

    def _update_write(self, p):
        j, F = p.j, self.F
        if j < 3:
            return (j, 0)
        if j < F:
            return (j, self.encode(p.x)[j])
        return (j - F, 1)

    def step(self, cfg, pid, resolver):
        p = cfg.procs[pid - 1]
        pc = p.pc
        if pc == 0:
            vec = self._read_now(cfg, pid, pid - 1, resolver)
            p.t = self.decode(vec)
            p.pc = 1
            return ("read", pid - 1, vec)
        if pc == 1:
            if pid == 1:
                change = p.t == p.x
            else:
                change = p.t != BOT and p.t != p.x
            p.pc = 2 if change else 5
            return ("internal", None, "test")
        if pc == 2:
            p.x = (p.x + 1) % self.K if pid == 1 else p.t
            p.j = 0
            p.pc = 3
            return ("internal", None, "assign")
        out = succ_of(pid, self.n) - 1
        if pc == 3:
            p.pc = 4
            return self._write_begin(cfg, pid, out, self._update_write(p))
        if pc == 4:
            ev = self._write_end(cfg, pid)
            p.j += 1
            if p.j == self.F + 3:
                p.j = 0
                p.pc = 0
            else:
                p.pc = 3
            return ev
        if pc == 5:
            p.pc = 6
            return self._write_begin(cfg, pid, out, (p.k, self.encode(p.x)[p.k]))
        ev = self._write_end(cfg, pid)
        p.k = (p.k + 1) % self.F
        p.pc = 0
        return ev


def make_protocol(kind: str, n: int, K: int | None = None, **opts) -> Protocol:
    """Instantiate a protocol with its default label count.

    dijkstra-central: K = n; dijkstra-rw: K = 2n-1; regular-bot, naive-regular,
    safe-unary, composite-safe: K = 2n+1; safe-gray: K = 2**ceil(lg(2n+1)).
    """
    if kind == "dijkstra-central":
        return DijkstraCentral(n, n if K is None else K, p=opts.get("p"))
    if kind == "dijkstra-rw":
        return DijkstraRW(n, 2 * n - 1 if K is None else K)
    if kind == "regular-bot":
        p = RegularBot(n, 2 * n + 1 if K is None else K)
    elif kind == "naive-regular":
        p = RegularBot(n, 2 * n + 1 if K is None else K, bot=False)
        p.kind = "naive-regular"
    elif kind == "naive-safe":
        p = RegularBot(n, 2 * n + 1 if K is None else K, bot=False, model=SAFE)
        p.kind = "naive-safe"
    elif kind == "safe-unary":
        p = SafeUnary(n, 2 * n + 1 if K is None else K)
    elif kind == "safe-gray":
        p = SafeGray(n, K, m=opts.get("m"))
    elif kind == "composite-safe":
        p = CompositeSafe(n, K, L=opts.get("L"), paper_width=opts.get("paper_width", False))
    else:
        raise ConfigurationError(f"unknown protocol kind {kind!r}")
    return p


def proto_step(proto: Protocol, config: Configuration, pid: int, resolved=None) -> Configuration:
    """Pure single micro-step: returns the successor configuration."""
    if not 1 <= pid <= proto.n:
        raise ConfigurationError(f"no processor p{pid} in a ring of {proto.n}")
    cfg = config.copy()

    def resolver(_cfg, _pid, reg, legal, correct=None):
        name = cfg.regs[reg].name if reg is not None else f"x{pid - 1 or proto.n}"
        if resolved is None:
            if len(legal) == 1:
                return legal[0]
            raise EngineError(f"p{pid} ends a read of {name} without a resolved value")
        if resolved not in legal:
            raise ScenarioError(f"p{pid} cannot read {resolved!r} from {name}; legal {legal}")
        return resolved

    proto.step(cfg, pid, resolver)
    cfg.tick += 1
    return cfg
