from collections import Counter
from itertools import product

import pytest
from hypothesis import given, strategies as st

from oracles import privileged_oracle
from stabring.protocols import make_protocol
from stabring.ring import (
    EXACTLY_ONE, MARKOV, Configuration, LegitimacyPredicate, ShapeMismatch, is_legitimate,
    label_multiset, parse_rendering, privileged, render, rendering_diff,
)

LB_CHAIN = [[0, 0, 2, 1, 0], [1, 0, 2, 1, 0], [1, 0, 2, 1, 1], [1, 0, 2, 2, 1], [1, 0, 0, 2, 1], [1, 1, 0, 2, 1]]


@pytest.mark.parametrize("xs,want", [
    ([0, 0, 0], {1}),
    ([1, 0, 0], {2}),
    ([0, 0, 2, 1, 0], {1, 3, 4, 5}),
])
def test_privileged_examples(xs, want):
    assert privileged(Configuration.from_counters(xs)) == want


def test_legitimacy_examples():
    one = LegitimacyPredicate(EXACTLY_ONE)
    assert is_legitimate(Configuration.from_counters([0, 0, 0]), one)
    assert not is_legitimate(Configuration.from_counters([0, 0, 2, 1, 0]), one)
    assert not is_legitimate(Configuration.from_counters([0, 1, 0]), LegitimacyPredicate(MARKOV))
    assert not is_legitimate(Configuration.from_counters([1, 0, 1]), LegitimacyPredicate(MARKOV))
    assert is_legitimate(Configuration.from_counters([0, 1, 1]), LegitimacyPredicate(MARKOV))


def test_label_multiset_examples():
    assert label_multiset(Configuration.from_counters([0, 0, 2, 1, 0])) == Counter({0: 3, 1: 1, 2: 1})
    assert label_multiset(Configuration.from_counters([1, 1, 0, 2, 1])) == Counter({0: 1, 1: 3, 2: 1})
    assert label_multiset(Configuration.from_counters([7, 7, 7])) == Counter({7: 3})


def test_lower_bound_chain_keeps_all_labels():
    for xs in LB_CHAIN:
        assert set(label_multiset(Configuration.from_counters(xs))) == {0, 1, 2}


@pytest.mark.parametrize("n,K", [(n, K) for n in range(2, 6) for K in range(2, 6)])
def test_never_deadlocked_and_matches_oracle(n, K):
    for xs in product(range(K), repeat=n):
        got = privileged(Configuration.from_counters(xs))
        assert got == privileged_oracle(xs)
        assert got
        assert is_legitimate(Configuration.from_counters(xs)) == (len(got) == 1)


@given(st.lists(st.integers(0, 6), min_size=2, max_size=8))
def test_privileged_property(xs):
    assert privileged(Configuration.from_counters(xs)) == privileged_oracle(xs)


def test_shape_errors():
    with pytest.raises(ShapeMismatch):
        privileged(Configuration.from_counters([0]))
    with pytest.raises(ShapeMismatch):
        privileged(Configuration.from_counters([0, 0, 0]), "dijkstra-rw")
    with pytest.raises(ShapeMismatch):
        is_legitimate(Configuration.from_counters([0, 0, 0]), LegitimacyPredicate("safe-configuration", "safe-gray"))


def test_rw_privilege_uses_register_copies():
    proto = make_protocol("dijkstra-rw", 3)
    cfg = proto.initial([0, 0, 0])
    assert privileged(cfg, "dijkstra-rw") == {1}
    cfg.regs[1].committed = 4  # IR2 now differs from x1 and from x2
    assert privileged(cfg, "dijkstra-rw") == {1, 2}


def test_rendering_round_trip():
    proto = make_protocol("regular-bot", 3)
    cfg = proto.initial([1, 2, 3])
    text = render(cfg)
    assert text.startswith("x=[1,2,3];pc=[0,0,0];regs=[3,1,2]")
    assert rendering_diff(cfg, text) == {}
    assert rendering_diff(cfg, "x=[1,2,4]") == {"x": ("[1,2,4]", "[1,2,3]")}
    assert parse_rendering("x=[ 1, 2 ];pc=[0,0]") == {"x": "[1,2]", "pc": "[0,0]"}


def test_state_key_ignores_ticks():
    proto = make_protocol("regular-bot", 3)
    a = proto.initial([0, 0, 0])
    b = a.copy()
    b.tick = 999
    assert a.key() == b.key()
