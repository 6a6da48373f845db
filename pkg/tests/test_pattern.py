import pytest
from hypothesis import given, settings, strategies as st

from conftest import all_words, sre_corpus
from eventcast.algebra import FALSE, Comparison
from eventcast.config import PatternConfig, compile_pattern
from eventcast.errors import PatternSyntaxError, UnknownPredicateError
from eventcast.pattern import (
    ANY, EPS, Concat, Pred, Star, Union, atoms_of, parse_sre, pretty, skip_till_any, sre_membership, star,
    to_streaming,
)

SLOW = Pred(Comparison("speed", "<", 5))
FAST = Pred(Comparison("speed", ">", 20))


def test_parse_sequence():
    assert parse_sre("(speed<5) ; (speed>20)") == Concat(SLOW, FAST)


def test_parse_precedence():
    table = {"a": Comparison("x", "=", 1), "b": Comparison("x", "=", 2), "c": Comparison("x", "=", 3)}
    a, b, c = (Pred(table[k]) for k in "abc")
    assert parse_sre("a*", table) == Star(a)
    assert parse_sre("a ; (b + c)", table) == Concat(a, Union(b, c))
    assert parse_sre("a ; b + c", table) == Union(Concat(a, b), c)
    assert parse_sre("a b*", table) == Concat(a, Star(b))


def test_parse_errors():
    with pytest.raises(PatternSyntaxError) as info:
        parse_sre("(speed < 5 ; ")
    assert info.value.position is not None
    with pytest.raises(UnknownPredicateError):
        parse_sre("nowhere ; speed > 1")


def test_streaming_rewrite():
    assert to_streaming(Concat(SLOW, FAST)) == Concat(Star(ANY), Concat(SLOW, FAST))
    assert to_streaming(EPS) == Concat(Star(ANY), EPS)


def test_skip_till_any_rewrite():
    assert skip_till_any(SLOW) == SLOW
    assert skip_till_any(Concat(SLOW, FAST)) == Concat(Concat(SLOW, Star(ANY)), FAST)


def test_star_of_eps():
    assert star(EPS) == EPS


def test_membership_examples():
    cp = compile_pattern(PatternConfig("(a ; b)*", {"a": "x = 1", "b": "not x = 1"}))
    a, b = 0, 1
    ab = cp.sre.child
    assert sre_membership(ab, [a, b], cp.minterms)
    assert not sre_membership(ab, [b, a], cp.minterms)
    assert sre_membership(cp.sre, [a, b, a, b], cp.minterms)
    assert sre_membership(cp.sre, [], cp.minterms)
    assert not sre_membership(cp.sre, [a, b, a], cp.minterms)


_LEAVES = st.sampled_from([
    Pred(Comparison("x", "=", 1.0)), Pred(Comparison("y", ">", 2.5)), Pred(Comparison("name", "=", "a b")),
    ANY, Pred(FALSE), EPS,
])


def _extend(children):
    return st.one_of(
        st.builds(Union, children, children),
        st.builds(Concat, children, children),
        children.map(star),
    )


@settings(max_examples=300, deadline=None)
@given(st.recursive(_LEAVES, _extend, max_leaves=12))
def test_print_parse_roundtrip(r):
    assert parse_sre(pretty(r)) == r


@pytest.mark.parametrize("cfg", sre_corpus(12, seed=5, max_depth=3)[::2], ids=lambda c: c.pattern)
def test_streaming_membership(cfg):
    cp = compile_pattern(cfg)
    text = cfg.pattern
    ms = cp.minterms
    words = list(all_words(len(ms), 6))
    plain = {w: sre_membership(cp.sre, w, ms) for w in words}
    for w in words:
        expected = any(plain[w[i:]] for i in range(len(w) + 1))
        assert sre_membership(cp.streaming, w, ms) == expected, (text, w)


@pytest.mark.parametrize("text", ["a ; b", "a ; (b + c)* ; c", "(a ; b)* + c ; a"])
def test_skip_till_any_keeps_minterms(text):
    table = {k: Comparison("x", "=", float(i)) for i, k in enumerate("abc")}
    r = parse_sre(text, table)
    atoms = atoms_of(to_streaming(r))
    assert atoms_of(to_streaming(skip_till_any(r))) == atoms
