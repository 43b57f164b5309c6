"""Acceptance criteria, one test each, at the stated sizes and tolerances.

Every test records a PASS/FAIL line through ``acceptance_line``; the lines
are collected into a summary section at the end of the pytest run.
"""
import time
from fractions import Fraction as F
from importlib import resources

import numpy as np

from oracles import chain_oracle, gray_oracle, stationary_oracle
from stabring.analysis import (
    check_lasso, closure_check, convergence_trials, empirical_legit_fraction, exhaustive_convergence,
    gray_high_bit_check, replay_scenario,
)
from stabring.codes import composite_decode, composite_encode, graycode_decode, graycode_encode, parity
from stabring.markov import (
    EXPECTED_EQUILIBRIA, REF_P1, REF_P34_TIMES3, build_transition_matrix, equilibrium, legitimate_mass,
    legitimate_states,
)
from stabring.protocols import make_protocol
from stabring.registers import BOT
from stabring.ring import label_multiset, privilege_count
from stabring.scheduler import Schedule, config_from_rendering, parse_directive, parse_scenario

TRIALS = 1000
BUDGET = 10**6
WINDOW = 10**4


def bundled(name):
    return resources.files("stabring").joinpath("scenarios", name).read_text()


def converge_all(kind, n, seed):
    rs = convergence_trials(make_protocol(kind, n), TRIALS, budget=BUDGET, seed=seed, window=WINDOW)
    bad = [i for i, r in enumerate(rs) if not (r.converged and r.closure_ok)]
    return bad, max((r.steps for r in rs if r.steps is not None), default=0)


def test_criterion_01_lower_bound(acceptance_line):
    t0 = time.perf_counter()
    proto = make_protocol("dijkstra-central", 5, 3)
    v = exhaustive_convergence(proto)
    lasso_ok = v.kind == "lasso" and not check_lasso(proto, v)
    res = replay_scenario(bundled("lowerbound-n5.scn"), "lowerbound-n5")
    want = [[0, 0, 2, 1, 0], [1, 0, 2, 1, 0], [1, 0, 2, 1, 1],
            [1, 0, 2, 2, 1], [1, 0, 0, 2, 1], [1, 1, 0, 2, 1]]
    got = [c.x for c in res.configs[:6]]
    labels_ok = all(len(label_multiset(c)) == 3 for c in res.configs[:6])
    elapsed = time.perf_counter() - t0
    ok = lasso_ok and res.ok and res.lasso is not None and got == want and labels_ok and elapsed < 10
    acceptance_line(1, ok, f"n=5 K=3 lasso of length {len(v.cycle)}, six configurations replayed, {elapsed:.2f}s")
    assert ok


def test_criterion_02_sufficiency(acceptance_line):
    notes, ok = [], True
    for kind, n, K in (("dijkstra-central", 3, 3), ("dijkstra-central", 4, 4), ("dijkstra-rw", 3, 5)):
        t0 = time.perf_counter()
        v = exhaustive_convergence(make_protocol(kind, n, K))
        elapsed = time.perf_counter() - t0
        ok &= v.kind == "converges" and v.closure and elapsed < 60
        notes.append(f"{kind}({n},{K}) {v.kind} worst {v.steps} in {elapsed:.1f}s")
    acceptance_line(2, ok, "; ".join(notes))
    assert ok


def test_criterion_03_fig1_replay(acceptance_line):
    text = bundled("fig1-naive-regular.scn")
    res = replay_scenario(text, "fig1")
    rows = sum(1 for _, verb, _ in parse_scenario(text).lines if verb == "assert")
    all_enabled = len(res.trace.final.procs) == 3 and all(
        res.protocol.enabled(res.trace.final, i) for i in (1, 2, 3))
    # the same execution through closure_check, which must flag it
    sc = parse_scenario(text)
    proto = sc.make_protocol()
    script = [parse_directive(verb, rest) for _, verb, rest in sc.lines if verb in ("act", "resolve")]
    start = config_from_rendering(proto, sc.init)
    acts = sum(1 for _, verb, _ in sc.lines if verb == "act")
    rep = closure_check(proto, trials=1, budget=acts, init=start,
                        schedule=Schedule("fine-adversary", script))
    ok = res.ok and rows == 7 and privilege_count(res.trace.final) == 3 and all_enabled and rep.violations == 1
    acceptance_line(3, ok, f"{rows} rows asserted, final privileged {privilege_count(res.trace.final)}, "
                           f"closure violations {rep.violations}")
    assert ok


def test_criterion_04_regular_bot(acceptance_line):
    notes, ok = [], True
    for n in (3, 4, 5):
        bad, worst = converge_all("regular-bot", n, seed=40 + n)
        ok &= not bad
        notes.append(f"n={n} failures {len(bad)} worst {worst}")
    acceptance_line(4, ok, "; ".join(notes))
    assert ok


def test_criterion_05_safe_unary(acceptance_line):
    proto = make_protocol("safe-unary", 3)
    rep = closure_check(proto, trials=TRIALS, budget=WINDOW, seed=5, resolution="adversarial")
    bad, worst = converge_all("safe-unary", 3, seed=50)
    ok = rep.ok and rep.max_writes_per_change <= 2 and not bad
    acceptance_line(5, ok, f"closure violations {rep.violations}, writes per change {rep.max_writes_per_change}, "
                           f"convergence failures {len(bad)} worst {worst}")
    assert ok


def test_criterion_06_safe_gray(acceptance_line):
    codes_ok = True
    for m in (3, 4, 5):
        for x in range(1 << m):
            a, b = graycode_encode(x, m), graycode_encode((x + 1) % (1 << m), m)
            codes_ok &= a == gray_oracle(x, m) and graycode_decode(a) == x
            codes_ok &= sum(u != v for u, v in zip(a, b)) == 1 and parity(a) != parity(b)
    notes, ok = [], codes_ok
    for n in (3, 4, 5):
        bad, worst = converge_all("safe-gray", n, seed=60 + n)
        hb = gray_high_bit_check(make_protocol("safe-gray", n), seed=n)
        ok &= not bad and hb["offence"] is None and hb["reached"] is not None
        notes.append(f"n={n} failures {len(bad)} worst {worst} high-bit reads {hb['reads']}")
    acceptance_line(6, ok, f"codes {'ok' if codes_ok else 'broken'}; " + "; ".join(notes))
    assert ok


def test_criterion_07_composite_safe(acceptance_line):
    roundtrip = True
    for L in range(1, 7):
        for label in range(1 << L):
            for guard in (0, 1):
                vec = composite_encode(label, guard, L)
                roundtrip &= composite_decode(vec) == (guard, label)
                for f in range(len(vec)):
                    for val in (0, 1):
                        bad = list(vec)
                        bad[f] = val
                        roundtrip &= composite_decode(bad) == (guard, label)
    proto = make_protocol("composite-safe", 3)
    discarded = all(proto.decode(proto.encode(x, guard=0)) == BOT for x in range(proto.K))
    bad, worst = converge_all("composite-safe", 3, seed=70)
    ok = roundtrip and discarded and not bad
    acceptance_line(7, ok, f"round trip {'ok' if roundtrip else 'broken'}, guard-zero discarded {discarded}, "
                           f"n=3 failures {len(bad)} worst {worst}")
    assert ok


def test_criterion_08_markov(acceptance_line):
    t0 = time.perf_counter()
    m1 = build_transition_matrix(3, 1)
    m34 = build_transition_matrix(3, F(3, 4))
    fig_ok = [list(r) for r in m1.entries] == REF_P1
    fig_ok &= [[3 * v for v in r] for r in m34.entries] == REF_P34_TIMES3
    eq_ok, worst = True, 0.0
    for p in (F(1), F(1, 2), F(1, 4), F(3, 4)):
        mat = build_transition_matrix(3, p)
        vec = equilibrium(mat)
        pi = np.array(vec.as_floats())
        worst = max(worst, float(np.max(np.abs(pi @ mat.as_array() - pi))))
        eq_ok &= vec.exact and list(vec.probs) == EXPECTED_EQUILIBRIA[p] and sum(vec.probs) == 1
        eq_ok &= list(vec.probs) == stationary_oracle(*chain_oracle(p))
    mass = legitimate_mass(equilibrium(m34), m34)
    elapsed = time.perf_counter() - t0
    ok = fig_ok and eq_ok and mass == F(9, 10) and worst < 1e-12 and elapsed < 1
    acceptance_line(8, ok, f"matrices {'exact' if fig_ok else 'differ'}, equilibria {'exact' if eq_ok else 'differ'}, "
                           f"mass(3/4)={mass}, residual {worst:.1e}, {elapsed:.2f}s")
    assert ok


def test_criterion_09_cross_validation(acceptance_line):
    t0 = time.perf_counter()
    notes, ok = [], True
    for p, want in ((F(1), 1.0), (F(3, 4), 0.9), (F(1, 2), 0.75), (F(1, 4), 0.5)):
        mat = build_transition_matrix(3, p)
        mass = legitimate_mass(equilibrium(mat), mat)
        emp = empirical_legit_fraction(3, float(p), 10**6, seed=9)
        ok &= float(mass) == want and abs(emp - float(mass)) <= 0.01
        notes.append(f"p={p} {emp:.4f} vs {float(mass):.4f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30
    acceptance_line(9, ok, "; ".join(notes) + f"; {elapsed:.1f}s")
    assert ok


def test_criterion_10_weak_stabilization(acceptance_line):
    notes, ok = [], True
    for p in ("0.1", "0.25", "0.5", "0.75", "1.0"):
        mat = build_transition_matrix(3, p)
        vec = equilibrium(mat)
        least = min(v for v, legit in zip(vec.probs, legitimate_states(mat)) if legit)
        ok &= least > 0
        notes.append(f"p={p} min {least}")
    acceptance_line(10, ok, "; ".join(notes))
    assert ok
