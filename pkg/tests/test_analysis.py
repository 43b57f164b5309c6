import random
from importlib import resources

import pytest

from stabring.analysis import (
    ResourceLimit, Verdict, check_lasso, closure_check, convergence_trials, empirical_legit_fraction,
    exhaustive_convergence, gray_high_bit_check, replay_scenario, run_until_stable, steps_to_legitimacy,
)
from stabring.protocols import make_protocol
from stabring.ring import EXACTLY_ONE, LegitimacyPredicate, privilege_count
from stabring.scheduler import Act, Schedule, drive, run

ONE = LegitimacyPredicate(EXACTLY_ONE)


def bundled(name):
    return resources.files("stabring").joinpath("scenarios", name).read_text()


def test_steps_to_legitimacy_examples():
    p = make_protocol("dijkstra-central", 3, 3)
    assert steps_to_legitimacy(run(p, Schedule("central-random", seed=0), p.initial(), 5), ONE, p) == 0
    lb = make_protocol("dijkstra-central", 5, 3)
    t = run(lb, Schedule("central-adversary", [Act(i) for i in (1, 5, 4, 3, 2)]), lb.initial([0, 0, 2, 1, 0]), 5)
    assert steps_to_legitimacy(t, ONE, lb) is None
    # round robin over enabled processors from [1,0,2]
    cfg = p.initial([1, 0, 2])
    script = []
    probe = cfg.copy()
    for step in range(30):
        pid = next(i for i in [(step + k) % 3 + 1 for k in range(3)] if p.enabled(probe, i))
        script.append(Act(pid))
        p.step(probe, pid)
    steps = steps_to_legitimacy(run(p, Schedule("central-adversary", script), cfg, 30), ONE, p)
    assert steps is not None and 0 < steps <= 30


def test_lasso_for_lower_bound_is_valid():
    p = make_protocol("dijkstra-central", 5, 3)
    v = exhaustive_convergence(p)
    assert v.kind == "lasso" and check_lasso(p, v) == []
    assert all(set(s) == {0, 1, 2} for s in v.cycle)
    d = v.to_dict(p)
    assert d["kind"] == "lasso" and len(d["cycle"]) == len(v.cycle)


def test_tampered_lasso_is_rejected():
    p = make_protocol("dijkstra-central", 5, 3)
    v = exhaustive_convergence(p)
    bad = Verdict("lasso", cycle=list(v.cycle), actors=list(v.actors))
    bad.actors[0] = "p2" if bad.actors[0] != "p2" else "p3"
    assert check_lasso(p, bad)
    legit = Verdict("lasso", cycle=[(0, 0, 0, 0, 0)], actors=["p1"])
    assert check_lasso(p, legit)


@pytest.mark.parametrize("kind,n,K", [("dijkstra-central", 3, 3), ("dijkstra-central", 4, 4), ("dijkstra-rw", 3, 5)])
def test_exhaustive_agrees_with_simulation(kind, n, K):
    p = make_protocol(kind, n, K)
    v = exhaustive_convergence(p)
    assert v.kind == "converges" and v.closure
    bound = p.state_space()
    rng = random.Random(1)
    mode = "central-random" if kind == "dijkstra-central" else "fine-random"
    for trial in range(1000):
        cfg = p.random_config(rng)
        reached = [privilege_count(cfg, kind) == 1]
        drive(p, cfg, Schedule(mode), rng, bound,
              on_step=lambda c, ev: reached.__setitem__(0, privilege_count(c, kind) == 1) or reached[0])
        assert reached[0], f"trial {trial} did not converge"


@pytest.mark.parametrize("kind,n,K", [("dijkstra-rw", 3, 4), ("dijkstra-central", 4, 2)])
def test_too_few_labels_give_lasso(kind, n, K):
    p = make_protocol(kind, n, K)
    v = exhaustive_convergence(p)
    assert v.kind == "lasso" and check_lasso(p, v) == []


def test_resource_bound():
    with pytest.raises(ResourceLimit):
        exhaustive_convergence(make_protocol("dijkstra-central", 6, 6), bound=1000)
    with pytest.raises(ValueError):
        exhaustive_convergence(make_protocol("regular-bot", 3))


def test_scenarios_replay():
    lb = replay_scenario(bundled("lowerbound-n5.scn"), "lb")
    assert lb.ok and lb.lasso is not None
    assert [c.x for c in lb.configs[:6]] == [[0, 0, 2, 1, 0], [1, 0, 2, 1, 0], [1, 0, 2, 1, 1],
                                             [1, 0, 2, 2, 1], [1, 0, 0, 2, 1], [1, 1, 0, 2, 1]]
    fig1 = replay_scenario(bundled("fig1-naive-regular.scn"), "fig1")
    assert fig1.ok and privilege_count(fig1.trace.final) == 3
    lemma = replay_scenario(bundled("lemma1-safe-1w1r.scn"), "lemma1")
    assert lemma.ok and lemma.lasso is not None
    assert lemma.configs[0].key() == lemma.configs[-1].key()


def test_scenario_reports_bad_line():
    text = "protocol=naive-regular n=3 init=x=[0,0,0]\nact p1\nresolve p1 r1 = 4\n"
    with pytest.raises(Exception, match=":3:"):
        replay_scenario(text, "bad")


def test_failed_assertion_is_reported():
    res = replay_scenario("protocol=dijkstra-central n=3 k=3 init=x=[0,0,0]\nact p1\nassert x=[0,0,0]\n")
    assert not res.ok and "want [0,0,0]" in res.checks[0][2]


def test_closure_small():
    rep = closure_check(make_protocol("safe-unary", 3), trials=20, budget=3000, seed=4)
    assert rep.ok and rep.max_writes_per_change <= 2
    assert closure_check(make_protocol("safe-unary", 3), trials=6, budget=500, seed=4, jobs=2).to_dict() == \
        closure_check(make_protocol("safe-unary", 3), trials=6, budget=500, seed=4).to_dict()


def test_run_until_stable_and_trials():
    p = make_protocol("safe-gray", 3)
    res = run_until_stable(p, p.random_config(random.Random(0)), random.Random(0), 10**5, 2000)
    assert res.converged
    rs = convergence_trials(make_protocol("regular-bot", 3), 5, budget=10**5, seed=1, window=1000)
    assert all(r.converged and r.closure_ok for r in rs)


def test_gray_high_bit():
    out = gray_high_bit_check(make_protocol("safe-gray", 3), seed=2)
    assert out["offence"] is None and out["reached"] is not None and out["reads"] > 0


def test_empirical_fraction_is_stable():
    for p, want in ((1, 1.0), (0.75, 0.9), (0.5, 0.75), (0.25, 0.5)):
        a = empirical_legit_fraction(3, p, 10**6, seed=3)
        b = empirical_legit_fraction(3, p, 2 * 10**6, seed=3)
        assert abs(a - b) < 0.005
        assert abs(b - want) < 0.01
    with pytest.raises(ValueError):
        empirical_legit_fraction(3, 0.5, 10, burn_in=80)
