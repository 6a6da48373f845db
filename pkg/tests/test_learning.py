import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import A, B, random_pst
from eventcast.errors import BudgetError, ConfigError
from eventcast.learning import (
    LearnConfig, PredictionSuffixTree, Psa, avg_log_loss, cst_build, cst_build_runs, dumps_model,
    empirical_prob, expand_for_psa, label_frequencies, learn, psa_probability, pst_from_distributions,
    pst_predict, pst_to_psa, smooth,
)

CST_STRING = [A, A, A, B, A, A, B, A, A, A]


def naive_counts(seq, depth):
    c = Counter()
    for end in range(depth, len(seq) + 1):
        w = tuple(seq[end - depth:end])
        for j in range(1, depth + 1):
            c[w[depth - j:]] += 1
    return c


def test_cst_golden_counts():
    cst = cst_build(CST_STRING, 2)
    assert cst.root.children[A].count == 7
    assert cst.root.children[A].children[B].count == 2
    assert cst.count((B, A)) == 2


def test_cst_window_per_position():
    # a window ends at every position from the m-th on
    cst = cst_build([A, A], 1)
    assert cst.count((A,)) == 2 and cst.n_windows == 2
    assert cst_build([A, A], 2).n_windows == 1


@pytest.mark.parametrize("seed", range(100))
def test_cst_matches_window_scan(seed):
    rng = np.random.default_rng(seed)
    t = int(rng.integers(1, 5))
    depth = int(rng.integers(1, 5))
    seq = rng.integers(0, t, int(rng.integers(depth, 201))).tolist()
    cst = cst_build(seq, depth, t)
    expected = naive_counts(seq, depth)
    assert dict(cst.items()) == dict(expected)


def test_cst_levels_sum_to_window_count():
    rng = np.random.default_rng(1)
    seq = rng.integers(0, 3, 300).tolist()
    cst = cst_build(seq, 4, 3)
    level = Counter()
    for s, c in cst.items():
        level[len(s)] += c
    assert set(level.values()) == {cst.n_windows}


def test_runs_do_not_cross():
    cst = cst_build_runs([[A, B], [B, A]], 2, 2)
    assert cst.count((B, B)) == 0 and cst.n_windows == 2


def test_empirical_prob():
    cst = cst_build(CST_STRING, 3)
    assert empirical_prob(cst, (A,), A) == pytest.approx(4 / 6, abs=0)
    assert empirical_prob(cst, (A,), A) + empirical_prob(cst, (A,), B) == 1.0
    assert empirical_prob(cst_build([A] * 10, 3, 2), (B,), A) == 0.5


def test_smooth_examples():
    assert smooth(np.array([1.0, 0.0]), 0.01).tolist() == pytest.approx([0.99, 0.01], abs=1e-15)
    p = np.array([0.3, 0.7])
    assert smooth(p, 0.01).tolist() == p.tolist()
    assert smooth(np.full(4, 0.25), 0.01).tolist() == [0.25] * 4
    with pytest.raises(ConfigError):
        smooth(np.array([1.0, 0.0]), 0.6)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(min_value=0, max_value=1), min_size=2, max_size=6).filter(lambda v: sum(v) > 0),
       st.floats(min_value=0, max_value=0.99))
def test_smooth_floor_and_mass(raw, alpha):
    p = np.array(raw) / sum(raw)
    floor = alpha / len(p)
    q = smooth(p, floor)
    assert abs(q.sum() - 1.0) <= 1e-12
    assert q.min() >= floor - 1e-15


def test_predict_examples(pst_small):
    assert pst_predict(pst_small, [B, B, A]).tolist() == [0.1, 0.9]
    assert pst_predict(pst_small, [B]).tolist() == [0.5, 0.5]
    assert pst_predict(pst_small, []).tolist() == [0.6, 0.4]


def test_expansion_condition():
    # contexts built so that P(a|a) = 0.7 and P(a|ba) = 0.1: the ratio test alone keeps ba
    p_a, p_ba = np.array([0.7, 0.3]), np.array([0.1, 0.9])
    from eventcast.learning import _passes
    assert _passes(p_ba, p_a, 0.001, 1.05)
    assert not _passes(np.array([0.71, 0.29]), p_a, 0.001, 1.05)


def test_psa_from_tree(pst_small):
    psa = pst_to_psa(pst_small)
    psa.check()
    assert psa.labels == [(A, A), (B, A), (B,)]
    edges = {(psa.labels[i], sym): (psa.labels[psa.tau[i, sym]], float(psa.gamma[i, sym]))
             for i in range(3) for sym in (A, B)}
    assert edges == {
        ((A, A), A): ((A, A), 0.75), ((A, A), B): ((B,), 0.25),
        ((B, A), A): ((A, A), 0.1), ((B, A), B): ((B,), 0.9),
        ((B,), A): ((B, A), 0.5), ((B,), B): ((B,), 0.5),
    }


def test_psa_expands_leaf(pst_unclosed):
    leaves = expand_for_psa(pst_unclosed)
    assert set(leaves) == {(A, A), (A, B, A), (B, B, A), (A, B), (B, B)}
    assert leaves[(A, B)].tolist() == [0.5, 0.5]
    psa = pst_to_psa(pst_unclosed)
    psa.check()
    with pytest.raises(BudgetError):
        pst_to_psa(pst_unclosed, max_states=4)


def test_root_only_psa():
    psa = pst_to_psa(pst_from_distributions(3, {(): [0.2, 0.3, 0.5]}))
    assert psa.labels == [()] and psa.tau.tolist() == [[0, 0, 0]]


@pytest.mark.parametrize("seed", range(10))
def test_random_psa_well_formed(seed):
    rng = np.random.default_rng(seed)
    pst = random_pst(rng, int(rng.integers(2, 4)), 4)
    pst.check()
    psa = pst_to_psa(pst, train=rng.integers(0, pst.n_symbols, 500).tolist())
    psa.check()
    # every label's prediction agrees with the tree it came from
    for label, row in zip(psa.labels, psa.gamma):
        assert row.tolist() == pst.predict(label).tolist()


def test_full_order_matches_empirical():
    rng = np.random.default_rng(7)
    t, m = 3, 2
    seq = rng.integers(0, t, 10_000).tolist()
    pst = learn(seq, t, LearnConfig(m=m, full=True))
    windows = [tuple(seq[i - m:i + 1]) for i in range(m, len(seq))]
    assert len(pst.nodes) == 1 + 3 + 9
    for s, node in pst.nodes.items():
        j = len(s)
        ctx = [w for w in windows if w[m - j:m] == s]
        counts = np.bincount([w[m] for w in ctx], minlength=t)
        assert node.raw.tolist() == (counts / counts.sum()).tolist()
        assert node.count == len(ctx)


def test_iid_stream_gives_root_only():
    rng = np.random.default_rng(2024)
    seq = rng.choice(3, size=100_000, p=[0.5, 0.3, 0.2]).tolist()
    pst = learn(seq, 3, LearnConfig(m=2))
    assert list(pst.nodes) == [()]


def test_order_zero_is_root_only():
    pst = learn([A, B, B, A, B], 2, LearnConfig(m=0))
    assert list(pst.nodes) == [()]
    assert pst.nodes[()].raw.tolist() == [0.4, 0.6]


def test_learned_tree_structure():
    rng = np.random.default_rng(4)
    seq = [A, B]
    for _ in range(5000):
        seq.append(B if seq[-1] == seq[-2] else int(rng.random() < 0.2))
    pst = learn(seq, 2, LearnConfig(m=3, alpha=0.02))
    pst.check()
    assert 1 <= pst.order <= 3
    for node in pst.nodes.values():
        assert node.probs.min() >= 0.01 - 1e-15


def test_log_loss_uniform_and_perfect():
    uniform = pst_from_distributions(4, {(): [0.25] * 4})
    assert avg_log_loss(uniform, [0, 1, 2, 3, 3, 1]) == 2.0
    sure = pst_from_distributions(2, {(): [1.0, 0.0]})
    assert avg_log_loss(sure, [A] * 20) == 0.0
    with pytest.raises(ValueError):
        avg_log_loss(sure, [B])


def order2_source(n, seed):
    rng = np.random.default_rng(seed)
    seq = [0, 1]
    for _ in range(n - 2):
        p1 = 0.9 if seq[-1] != seq[-2] else 0.1
        seq.append(int(rng.random() < p1))
    return seq


def test_log_loss_prefers_true_order():
    train, test = order2_source(20_000, 1), order2_source(5_000, 2)
    m2 = learn(train, 2, LearnConfig(m=2))
    m0 = learn(train, 2, LearnConfig(m=0))
    assert avg_log_loss(m2, test) < avg_log_loss(m0, test) - 0.1


def test_pi_from_label_frequencies(pst_small):
    psa = pst_to_psa(pst_small)
    pi = label_frequencies(psa, [A, A, A, B, A])
    # windows of length 2: aa, aa, ab, ba -> labels aa, aa, b, ba
    assert pi.tolist() == [0.5, 0.25, 0.25]
    assert label_frequencies(psa, [[A, A], [B, A]]).tolist() == [0.5, 0.5, 0.0]


def test_psa_probability_examples(pst_small):
    psa = pst_to_psa(pst_small)
    psa.pi = np.array([0.5, 0.25, 0.25])
    assert psa_probability(psa, [B, A, B]) == 0.25 * 0.5 * 0.9
    assert psa_probability(psa, [A, A, A]) == 0.5 * 0.75


def test_serialisation_roundtrip():
    rng = np.random.default_rng(9)
    seq = rng.integers(0, 3, 3000).tolist()
    pst = learn(seq, 3, LearnConfig(m=3, theta2=1.01))
    psa = pst_to_psa(pst, train=seq)
    back = PredictionSuffixTree.from_json(json.loads(dumps_model(pst.to_json())))
    assert back.nodes.keys() == pst.nodes.keys()
    for k in pst.nodes:
        assert back.nodes[k].probs.tobytes() == pst.nodes[k].probs.tobytes()
        assert back.nodes[k].raw.tobytes() == pst.nodes[k].raw.tobytes()
    psa2 = Psa.from_json(json.loads(dumps_model(psa.to_json())))
    assert psa2.gamma.tobytes() == psa.gamma.tobytes() and psa2.pi.tobytes() == psa.pi.tobytes()
    assert psa2.tau.tolist() == psa.tau.tolist()


def test_config_validation():
    for bad in ({"m": -1}, {"theta1": 1.0}, {"theta2": 1.0}, {"alpha": 1.0}, {"min_count": 0}):
        with pytest.raises(ConfigError):
            LearnConfig(**bad)
