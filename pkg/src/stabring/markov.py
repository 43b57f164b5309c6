"""Markov chain of Dijkstra's ring under a fair central daemon whose reads
are correct with probability p.

States are counter vectors ordered as base-K numbers with x1 most
significant, so the binary 3-ring runs 000, 001, ..., 111. Arithmetic is
exact (Fraction) throughout; numpy is used only for the float squaring
that locates the equilibrium before it is confirmed exactly.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .protocols import dijkstra_rule
from .ring import EXACTLY_ONE, MARKOV, Configuration, LegitimacyPredicate, is_legitimate

DEFAULT_STATE_BOUND = 4096
F = Fraction

# Reference transition matrices; the p = 3/4 one is scaled by 3.
REF_P1 = [
    [F(2, 3), 0, 0, 0, F(1, 3), 0, 0, 0],
    [F(1, 3), F(2, 3), 0, 0, 0, 0, 0, 0],
    [F(1, 3), 0, 0, F(1, 3), 0, 0, F(1, 3), 0],
    [0, F(1, 3), 0, F(2, 3), 0, 0, 0, 0],
    [0, 0, 0, 0, F(2, 3), 0, F(1, 3), 0],
    [0, F(1, 3), 0, 0, F(1, 3), 0, 0, F(1, 3)],
    [0, 0, 0, 0, 0, 0, F(2, 3), F(1, 3)],
    [0, 0, 0, F(1, 3), 0, 0, 0, F(2, 3)],
]
REF_P34_TIMES3 = [
    [F(7, 4), F(1, 4), F(1, 4), 0, F(3, 4), 0, 0, 0],
    [F(3, 4), F(7, 4), 0, F(1, 4), 0, F(1, 4), 0, 0],
    [F(3, 4), 0, F(3, 4), F(3, 4), 0, 0, F(3, 4), 0],
    [0, F(3, 4), F(1, 4), F(7, 4), 0, 0, 0, F(1, 4)],
    [F(1, 4), 0, 0, 0, F(7, 4), F(1, 4), F(3, 4), 0],
    [0, F(3, 4), 0, 0, F(3, 4), F(3, 4), 0, F(3, 4)],
    [0, 0, F(1, 4), 0, F(1, 4), 0, F(7, 4), F(3, 4)],
    [0, 0, 0, F(3, 4), 0, F(1, 4), F(1, 4), F(7, 4)],
]
REFERENCE_EQUILIBRIA = {
    F(1): [F(1, 6), F(1, 6), 0, F(1, 6), F(1, 6), 0, F(1, 6), F(1, 6)],
    F(3, 4): [F(3, 20), F(3, 20), F(1, 20), F(3, 6), F(3, 6), F(1, 20), F(3, 20), F(3, 20)],
    F(1, 2): [F(1, 8)] * 8,
    F(1, 4): [F(1, 12), F(1, 12), F(1, 4), F(1, 12), F(1, 12), F(1, 4), F(1, 12), F(1, 12)],
}
# The reference p = 3/4 row sums to 17/10; the stationary vector of the chain is this one.
EXPECTED_EQUILIBRIA = dict(REFERENCE_EQUILIBRIA)
EXPECTED_EQUILIBRIA[F(3, 4)] = [F(3, 20), F(3, 20), F(1, 20), F(3, 20), F(3, 20), F(1, 20), F(3, 20), F(3, 20)]
TYPO_ROWS = {F(3, 4)}


class ResourceLimit(RuntimeError):
    pass


class NonConvergence(RuntimeError):
    pass


class InvariantViolation(AssertionError):
    pass


def parse_probability(text) -> Fraction:
    """``3/4``, ``0.75`` or a number; must lie in [0, 1]."""
    p = Fraction(str(text).strip()) if not isinstance(text, Fraction) else text
    if not 0 <= p <= 1:
        raise ValueError(f"probability {text} outside [0, 1]")
    return p


def render_fraction(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class TransitionMatrix:
    n: int
    K: int
    p: Fraction
    states: tuple
    entries: tuple  # rows of Fraction

    @property
    def order(self) -> int:
        return len(self.states)

    def index(self, state) -> int:
        return self.states.index(tuple(state))

    def row_sums(self) -> list:
        return [sum(row, Fraction(0)) for row in self.entries]

    def as_array(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.entries])

    def label(self, state) -> str:
        return "".join(map(str, state)) if self.K <= 10 else ",".join(map(str, state))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["from"] + [self.label(s) for s in self.states])
        for s, row in zip(self.states, self.entries):
            w.writerow([self.label(s)] + [render_fraction(v) for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"n": self.n, "K": self.K, "p": render_fraction(self.p),
                "states": [self.label(s) for s in self.states],
                "matrix": [[render_fraction(v) for v in row] for row in self.entries]}


def build_transition_matrix(n: int = 3, p=1, K: int = 2, extended: bool = False,
                            bound: int = DEFAULT_STATE_BOUND) -> TransitionMatrix:
    """Exact transition matrix of the fair-daemon chain.

    Each processor is picked with probability 1/n and reads its predecessor
    correctly with probability p; a wrong read is uniform over the other
    K-1 labels. Anything other than the binary 3-ring needs ``extended``.
    """
    p = parse_probability(p)
    if (n, K) != (3, 2) and not extended:
        raise ValueError("only the binary 3-ring is built by default; pass extended=True")
    if n < 2 or K < 2:
        raise ValueError("need n >= 2 and K >= 2")
    size = K ** n
    if size > bound:
        raise ResourceLimit(f"{size} states exceed the bound of {bound}")
    states = tuple(itertools.product(range(K), repeat=n))
    pos = {s: i for i, s in enumerate(states)}
    pick = Fraction(1, n)
    wrong_each = (1 - p) / (K - 1)
    rows = []
    for s in states:
        row = [Fraction(0)] * size
        for i in range(1, n + 1):
            own, correct = s[i - 1], s[i - 2]
            for seen in range(K):
                w = p if seen == correct else wrong_each
                if not w:
                    continue
                new = dijkstra_rule(i, own, seen, K)
                t = s if new is None else s[: i - 1] + (new,) + s[i:]
                row[pos[t]] += pick * w
        rows.append(tuple(row))
    mat = TransitionMatrix(n, K, p, states, tuple(rows))
    bad = [i for i, r in enumerate(mat.row_sums()) if r != 1]
    if bad:
        raise InvariantViolation(f"rows {bad} do not sum to 1")
    return mat


@dataclass
class EquilibriumVector:
    probs: list
    exact: bool
    residual: float
    squarings: int
    states: tuple = field(default_factory=tuple)

    def as_floats(self) -> list:
        return [float(v) for v in self.probs]


def _exact_residual(vec, mat: TransitionMatrix) -> Fraction:
    size = mat.order
    worst = Fraction(0)
    for j in range(size):
        acc = sum((vec[i] * mat.entries[i][j] for i in range(size) if mat.entries[i][j]), Fraction(0))
        worst = max(worst, abs(acc - vec[j]))
    return worst


def equilibrium(mat: TransitionMatrix, tol: float = 1e-12, max_iter: int = 64,
                max_denominator: int = 10**6) -> EquilibriumVector:
    """Square the matrix until two successive powers agree within ``tol``,
    take a row of the limit, then try to confirm a rational fixed point.
    """
    P = mat.as_array()
    Q = P
    for it in range(1, max_iter + 1):
        Q2 = Q @ Q
        if np.max(np.abs(Q2 - Q)) < tol:
            Q = Q2
            break
        Q = Q2
    else:
        diff = np.max(np.abs(Q @ P - Q))
        raise NonConvergence(f"powers still oscillate after {max_iter} squarings (max change {diff:.3g})")
    step = np.max(np.abs(Q @ P - Q))
    if step >= max(tol, 1e-9):
        # squaring can settle on P^(2^k) of a periodic chain without P^k settling
        raise NonConvergence(f"powers oscillate with period > 1 (|Q P - Q| = {step:.3g})")
    row = Q[0]
    residual = float(np.max(np.abs(row @ P - row)))
    guess = [Fraction(float(v)).limit_denominator(max_denominator) for v in row]
    total = sum(guess, Fraction(0))
    if total and total != 1:
        guess = [g / total for g in guess]
    if sum(guess, Fraction(0)) == 1 and _exact_residual(guess, mat) == 0:
        return EquilibriumVector(guess, True, 0.0, it, mat.states)
    return EquilibriumVector([float(v) for v in row], False, residual, it, mat.states)


def default_predicate(n: int, K: int) -> LegitimacyPredicate:
    return LegitimacyPredicate(MARKOV if (n, K) == (3, 2) else EXACTLY_ONE)


def legitimate_states(mat: TransitionMatrix, pred: LegitimacyPredicate | None = None) -> list:
    pred = pred or default_predicate(mat.n, mat.K)
    return [is_legitimate(Configuration.from_counters(s), pred) for s in mat.states]


def legitimate_mass(vec: EquilibriumVector, mat: TransitionMatrix, pred: LegitimacyPredicate | None = None):
    """Stationary probability of the legitimate states (exact when the vector is)."""
    flags = legitimate_states(mat, pred)
    zero = Fraction(0) if vec.exact else 0.0
    return sum((v for v, ok in zip(vec.probs, flags) if ok), zero)


def check_against_reference(p, vec: EquilibriumVector) -> dict:
    """Compare with the reference table; the p = 3/4 row is checked against
    the stationary vector and the reference row is reported as a typo."""
    p = parse_probability(p)
    if p not in EXPECTED_EQUILIBRIA:
        return {"p": render_fraction(p), "available": False}
    want = EXPECTED_EQUILIBRIA[p]
    ok = vec.exact and list(vec.probs) == want
    out = {"p": render_fraction(p), "available": True, "match": ok,
           "expected": [render_fraction(v) for v in want]}
    if p in TYPO_ROWS:
        printed = REFERENCE_EQUILIBRIA[p]
        out["reference"] = [render_fraction(v) for v in printed]
        out["note"] = (f"reference row sums to {render_fraction(sum(printed, Fraction(0)))} "
                       "and is not a distribution; compared against the stationary vector instead")
    return out


def vector_csv(vec: EquilibriumVector, mat: TransitionMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state", "probability", "legitimate"])
    for s, v, ok in zip(mat.states, vec.probs, legitimate_states(mat)):
        w.writerow([mat.label(s), render_fraction(v) if vec.exact else repr(v), int(ok)])
    return buf.getvalue()


def vector_dict(vec: EquilibriumVector, mat: TransitionMatrix) -> dict:
    show = render_fraction if vec.exact else float
    return {"n": mat.n, "K": mat.K, "p": render_fraction(mat.p), "exact": vec.exact,
            "states": [mat.label(s) for s in mat.states], "equilibrium": [show(v) for v in vec.probs],
            "residual": vec.residual, "squarings": vec.squarings}


def to_json(obj) -> str:
    return json.dumps(obj, indent=2)


__all__ = [
    "TransitionMatrix", "EquilibriumVector", "build_transition_matrix", "equilibrium",
    "legitimate_mass", "legitimate_states", "check_against_reference", "parse_probability",
    "render_fraction", "REF_P1", "REF_P34_TIMES3", "REFERENCE_EQUILIBRIA", "EXPECTED_EQUILIBRIA",
    "NonConvergence", "ResourceLimit", "InvariantViolation", "vector_csv", "vector_dict",
]
