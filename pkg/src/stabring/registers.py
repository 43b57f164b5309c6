"""Single-writer registers with atomic, regular, safe, composite and randomized reads.

Every read and write occupies a closed interval of integer ticks. A read's
value is resolved at its end tick from the writes that overlapped it.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

BOT = -1  # the "no value" label written between label changes; labels are >= 0

ATOMIC = "atomic"
REGULAR = "regular"
SAFE = "safe"
COMPOSITE = "composite-safe"
RANDOMIZED = "randomized"
MODELS = (ATOMIC, REGULAR, SAFE, COMPOSITE, RANDOMIZED)


class ProtocolViolation(Exception):
    """Write events arrived out of order for the single writer."""


class ScenarioError(Exception):
    """A scripted choice is not allowed by the register semantics."""


class AccessError(Exception):
    pass


class ShapeError(ValueError):
    pass


def render_value(v) -> str:
    if v == BOT:
        return "_"
    if isinstance(v, tuple):
        return "".join(str(b) for b in v)
    return str(v)


def parse_value(s: str, bits: bool = False):
    """Inverse of render_value; ``bits`` selects bit-vector parsing."""
    s = s.strip()
    if s in ("_", "⊥", "bot"):
        return BOT
    if bits:
        return tuple(int(c) for c in s)
    return int(s)


@dataclass(frozen=True)
class RegisterSpec:
    model: str
    domain: tuple
    writer: int
    readers: frozenset
    fields: int = 1
    p: Fraction | float | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown register model {self.model!r}")
        if self.model == COMPOSITE and self.fields < 1:
            raise ValueError("composite register needs at least one field")
        if self.model == RANDOMIZED and not (self.p is not None and 0 < self.p <= 1):
            raise ValueError("randomized register needs p in (0, 1]")


@dataclass(slots=True)
class WriteRecord:
    seq: int
    value: object  # composite registers store (field, bit)
    start: int
    end: int | None = None


@dataclass(slots=True)
class RegisterState:
    spec: RegisterSpec
    committed: object
    history: list = field(default_factory=list)
    reader_floor: dict = field(default_factory=dict)
    open_reads: dict = field(default_factory=dict)
    name: str = ""

    @classmethod
    def fresh(cls, spec: RegisterSpec, value, name: str = "") -> "RegisterState":
        if spec.model == COMPOSITE:
            value = tuple(value)
            if len(value) != spec.fields:
                raise ShapeError(f"composite value has {len(value)} fields, expected {spec.fields}")
        return cls(spec, value, [WriteRecord(0, value, -1, -1)], {}, {}, name)

    def copy(self) -> "RegisterState":
        return RegisterState(
            self.spec,
            self.committed,
            [WriteRecord(w.seq, w.value, w.start, w.end) for w in self.history],
            dict(self.reader_floor),
            dict(self.open_reads),
            self.name,
        )

    @property
    def writing(self) -> WriteRecord | None:
        w = self.history[-1]
        return w if w.end is None else None

    # -- writer side -------------------------------------------------------

    def begin_write(self, value, tick: int) -> None:
        if self.writing is not None:
            raise ProtocolViolation(f"{self.name}: write begun while another is in flight")
        if self.spec.model == COMPOSITE:
            f, bit = value
            if not 0 <= f < self.spec.fields or bit not in (0, 1):
                raise ShapeError(f"{self.name}: bad field write {value!r}")
        self.history.append(WriteRecord(self.history[-1].seq + 1, value, tick))

    def end_write(self, tick: int) -> None:
        w = self.writing
        if w is None:
            raise ProtocolViolation(f"{self.name}: write end without a write in flight")
        w.end = tick
        if self.spec.model == COMPOSITE:
            f, bit = w.value
            vec = list(self.committed)
            vec[f] = bit
            self.committed = tuple(vec)
        else:
            self.committed = w.value
        self._prune()

    # -- reader side -------------------------------------------------------

    def begin_read(self, reader: int, tick: int) -> None:
        if reader not in self.spec.readers:
            raise AccessError(f"p{reader} may not read {self.name}")
        self.open_reads[reader] = tick

    def end_read(self, reader: int, tick: int) -> list:
        """Close ``reader``'s open read and return its legal values (sorted)."""
        start = self.open_reads.pop(reader)
        cands = self.candidates((start, tick), reader)
        return cands

    def candidates(self, interval, reader: int) -> list:
        """Legal values for a read over ``interval`` as a sorted list."""
        return sorted(legal_read_values(self, interval, reader), key=_sort_key)

    def finish_read(self, reader: int, interval, value) -> None:
        """Record the resolved value; regular reads may raise the reader's floor."""
        if self.spec.model == REGULAR:
            x0, overl = _split(self.history, interval)
            floor = self.reader_floor.get(reader, 0)
            for w in [x0] + overl:
                if w.seq >= floor and w.value == value:
                    # returning x^k with k > 1 rules out x^j, j < k-1, for later reads
                    if w.seq - x0.seq > 1:
                        self.reader_floor[reader] = max(floor, w.seq - 1)
                    break
        self._prune()

    def _prune(self) -> None:
        h = self.history
        keep = len(h) - 1
        while keep > 0 and h[keep].end is None:
            keep -= 1
        if self.open_reads:
            first = min(self.open_reads.values())
            while keep > 0 and not (h[keep].end is not None and h[keep].end < first):
                keep -= 1
        if keep:
            del h[:keep]


def _sort_key(v):
    return (isinstance(v, tuple), v)


def _split(history, interval):
    start, end = interval
    x0 = None
    overl = []
    for w in history:
        if w.end is not None and w.end < start:
            x0 = w
        elif w.start <= end:
            overl.append(w)
    if x0 is None:
        x0 = history[0]
        if overl and overl[0] is x0:
            overl = overl[1:]
    return x0, overl


def legal_read_values(state: RegisterState, read_interval, reader: int) -> set:
    """Values a read by ``reader`` over ``read_interval`` may return."""
    spec = state.spec
    if reader not in spec.readers:
        raise AccessError(f"p{reader} may not read {state.name}")
    start, end = read_interval
    if spec.model == COMPOSITE:
        return {tuple(v) for v in _composite_vectors(state, read_interval)}
    x0, overl = _split(state.history, read_interval)
    if spec.model == ATOMIC:
        last = x0
        for w in overl:
            if w.end is not None and w.end <= end:
                last = w
        return {last.value}
    if spec.model == REGULAR:
        floor = state.reader_floor.get(reader, 0)
        vals = {w.value for w in [x0] + overl if w.seq >= floor}
        if not vals:
            # a floor past every candidate can only come from a hand-built state
            vals = {overl[-1].value if overl else x0.value}
        return vals
    if spec.model == SAFE:
        return set(spec.domain) if overl else {x0.value}
    return set(spec.domain)  # randomized: resolve_read weights the choice


def composite_legal_fields(state: RegisterState, read_interval) -> list:
    """Per-field legal sets: committed bits with at most the written field opened.

    Only intervals ending at or after the last completed write are supported;
    the engine always asks at the current tick.
    """
    start, end = read_interval
    last_end = max((w.end for w in state.history if w.end is not None), default=-1)
    if end < last_end:
        raise ScenarioError(f"{state.name}: history no longer covers tick {end}")
    sets = [{b} for b in state.committed]
    open_fields = [w.value[0] for w in state.history[1:]
                   if w.start <= end and (w.end is None or w.end >= start)]
    if open_fields:
        sets[open_fields[-1]] = {0, 1}
    return sets


def _composite_vectors(state: RegisterState, read_interval):
    sets = composite_legal_fields(state, read_interval)
    opened = [i for i, s in enumerate(sets) if len(s) > 1]
    yield tuple(state.committed)
    for f in opened:
        vec = list(state.committed)
        vec[f] ^= 1
        yield tuple(vec)


def apply_write_event(state: RegisterState, event: str, tick: int, value=None) -> RegisterState:
    """Pure form of begin_write/end_write: returns an updated copy."""
    new = state.copy()
    if event == "write-begin":
        new.begin_write(value, tick)
    elif event == "write-end":
        new.end_write(tick)
    else:
        raise ProtocolViolation(f"unknown write event {event!r}")
    return new


def composite_read(state: RegisterState, corrupt_choice=None) -> tuple:
    """Instantaneous read of a composite register.

    ``corrupt_choice`` is ``(field, bit)`` and may only name the field whose
    write is currently in flight.
    """
    vec = list(state.committed)
    if corrupt_choice is not None:
        f, bit = corrupt_choice
        w = state.writing
        if w is None or w.value[0] != f:
            raise ScenarioError(f"{state.name}: field {f} is not being written")
        vec[f] = bit
    return tuple(vec)


def majority_decode(bits) -> tuple:
    """Map each consecutive triple of bits to its majority bit."""
    bits = tuple(bits)
    if len(bits) % 3:
        raise ShapeError(f"bit vector of length {len(bits)} is not triple-grouped")
    return tuple(1 if bits[i] + bits[i + 1] + bits[i + 2] >= 2 else 0 for i in range(0, len(bits), 3))


ADVERSARY = "adversary-choice"
UNIFORM = "uniform-random"
CORRECT_WITH_P = "correct-with-p"


def resolve_read(legal, policy: str, correct=None, rng_or_script=None, domain=None, p=None):
    """Pick the value a read returns.

    ``adversary-choice`` takes the scripted value from ``rng_or_script``,
    ``uniform-random`` draws from ``legal`` with the given ``random.Random``,
    and ``correct-with-p`` returns ``correct`` with probability ``p`` and
    otherwise a uniform pick from ``domain`` minus ``correct``.
    """
    legal = list(legal)
    if not legal:
        raise ValueError("empty legal set")
    if policy == ADVERSARY:
        v = rng_or_script
        if v not in legal:
            raise ScenarioError(f"scripted value {render_value(v)} not in legal set "
                                f"{{{','.join(render_value(x) for x in sorted(legal, key=_sort_key))}}}")
        return v
    if len(legal) == 1 and policy != CORRECT_WITH_P:
        return legal[0]
    rng = rng_or_script if rng_or_script is not None else random.Random()
    if policy == UNIFORM:
        legal.sort(key=_sort_key)
        return legal[rng.randrange(len(legal))]
    if policy == CORRECT_WITH_P:
        dom = sorted(domain if domain is not None else legal, key=_sort_key)
        if correct not in dom:
            raise ValueError("correct value outside the domain")
        if rng.random() < float(p):
            return correct
        wrong = [v for v in dom if v != correct]
        return wrong[rng.randrange(len(wrong))] if wrong else correct
    raise ValueError(f"unknown read policy {policy!r}")


__all__ = [
    "BOT", "RegisterSpec", "WriteRecord", "RegisterState", "apply_write_event",
    "legal_read_values", "composite_legal_fields", "composite_read", "majority_decode",
    "resolve_read", "ProtocolViolation", "ScenarioError", "AccessError", "ShapeError",
]
