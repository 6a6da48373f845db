import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eventcast.algebra import (
    TRUE, And, Comparison, Event, MintermSet, Not, build_minterms, eval_predicate,
    register_predicate, unregister_predicate,
)
from eventcast.errors import ConfigError, EventError
from eventcast.pattern import parse_predicate

SLOW = Comparison("speed", "<", 5)
FAST = Comparison("speed", ">", 20)


def ev(**attrs):
    return Event(0, "p", attrs)


@pytest.fixture(scope="module")
def speed_minterms():
    return MintermSet([SLOW, FAST], [[SLOW, FAST]])


def test_eval_comparison():
    assert eval_predicate(SLOW, ev(speed=2))
    assert eval_predicate(TRUE, ev())
    assert not eval_predicate(And(SLOW, FAST), ev(speed=2))


def test_eval_errors():
    with pytest.raises(EventError):
        eval_predicate(SLOW, ev(heading=3))
    with pytest.raises(EventError):
        eval_predicate(SLOW, ev(speed="fast"))


def test_named_predicate():
    p = register_predicate("inPort", lambda e: e["lat"] > 10)
    try:
        assert eval_predicate(p, ev(lat=11))
        assert not eval_predicate(Not(p), ev(lat=11))
    finally:
        unregister_predicate("inPort")
    with pytest.raises(ConfigError):
        eval_predicate(p, ev(lat=11))


def test_exclusion_group_minterms(speed_minterms):
    ms = speed_minterms
    assert len(ms) == 3
    assert [m.describe() for m in ms] == ["speed < 5", "speed > 20", "not (speed < 5) and not (speed > 20)"]


def test_minterm_counts_without_exclusions():
    assert len(build_minterms([SLOW])) == 2
    four = build_minterms([SLOW, FAST])
    assert [m.polarity for m in four] == [(True, True), (True, False), (False, True), (False, False)]


def test_minterms_need_a_predicate():
    with pytest.raises(ConfigError):
        build_minterms([])


def test_classify(speed_minterms):
    ms = speed_minterms
    assert ms.classify(ev(speed=2)) == 0
    assert ms.classify(ev(speed=10)) == 2
    assert ms.classify(ev(speed=22)) == 1


def test_classify_rejects_excluded_events():
    x1, x2 = Comparison("x", ">", 0), Comparison("x", ">", 1)
    ms = MintermSet([x1, x2], [[x1, x2]])
    with pytest.raises(EventError):
        ms.classify(ev(x=5))
    assert ms.classify_many([ev(x=5), ev(x=0.5)]).tolist() == [-1, 0]


def test_interval_reasoning_prunes():
    ms = MintermSet([SLOW, FAST], interval_reasoning=True)
    assert len(ms) == 3


def test_minterm_order_deterministic():
    a = [m.polarity for m in build_minterms([SLOW, FAST, Comparison("x", "=", 1)])]
    b = [m.polarity for m in build_minterms([SLOW, FAST, Comparison("x", "=", 1)])]
    assert a == b


def test_parse_predicate_forms():
    assert parse_predicate("speed < 5") == SLOW
    assert parse_predicate("not speed < 5") == Not(SLOW)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(min_value=-50, max_value=50, allow_nan=False), min_size=1, max_size=60))
def test_exactly_one_minterm_holds(speeds):
    atoms = [SLOW, FAST, Comparison("speed", ">=", 0)]
    ms = MintermSet(atoms)
    events = [ev(speed=s) for s in speeds]
    codes = ms.classify_many(events)
    for e, c in zip(events, codes):
        holding = [m.id for m in ms if m.holds(e)]
        assert holding == [c]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(min_value=-50, max_value=50, allow_nan=False), min_size=1, max_size=40))
def test_simplification_keeps_classification(speeds):
    simplified = build_minterms([SLOW, FAST], [[SLOW, FAST]])
    full = build_minterms([SLOW, FAST], [[SLOW, FAST]], simplify=False)
    for s in speeds:
        e = ev(speed=s)
        assert [m.id for m in simplified if m.holds(e)] == [m.id for m in full if m.holds(e)]


def test_bulk_matches_single(speed_minterms):
    rng = np.random.default_rng(3)
    events = [ev(speed=float(s)) for s in rng.uniform(-10, 40, 10_000)]
    bulk = speed_minterms.classify_many(events)
    assert bulk.tolist() == [speed_minterms.classify(e) for e in events]
