import numpy as np
import pytest

from conftest import A, B, all_words, random_system, sre_corpus
from eventcast.config import compile_pattern
from eventcast.embedding import embed, partition_matrix, start_state, string_probability
from eventcast.errors import BudgetError, ConfigError
from eventcast.learning import psa_probability, pst_from_distributions, pst_to_psa


def test_product_states(dsfa_ab, pst_small):
    psa = pst_to_psa(pst_small)
    emb = embed(dsfa_ab, psa)
    assert emb.n_states == 6
    labels = {emb.label(i) for i in range(emb.n_states)}
    assert labels == {(0, (A, A)), (0, (B, A)), (0, (B,)), (1, (B, A)), (1, (A, A)), (2, (B,))}
    assert emb.finals.sum() == 1
    assert emb.label(int(np.flatnonzero(emb.finals)[0])) == (2, (B,))


def test_rows_are_distributions(dsfa_ab, pst_small):
    emb = embed(dsfa_ab, pst_to_psa(pst_small))
    assert np.allclose(emb.gamma.sum(axis=1), 1.0, atol=1e-12, rtol=0)


def test_matrix_sums_parallel_edges():
    dsfa = compile_pattern(sre_corpus(2, seed=3)[1]).dsfa
    pst = pst_from_distributions(dsfa.n_symbols, {(): np.full(dsfa.n_symbols, 1 / dsfa.n_symbols)})
    emb = embed(dsfa, pst_to_psa(pst))
    pm = partition_matrix(emb)
    for i in range(emb.n_states):
        for j in range(emb.n_states):
            expected = emb.gamma[i, emb.delta[i] == j].sum()
            assert pm.matrix[pm.position[i], pm.position[j]] == pytest.approx(expected, abs=1e-15)
    assert np.allclose(pm.matrix.sum(axis=1), 1.0, atol=1e-12, rtol=0)
    k = pm.n_nonfinal
    assert not emb.finals[pm.order[:k]].any() and emb.finals[pm.order[k:]].all()


def test_alphabet_mismatch(dsfa_ab):
    psa = pst_to_psa(pst_from_distributions(3, {(): [0.2, 0.3, 0.5]}))
    with pytest.raises(ConfigError):
        embed(dsfa_ab, psa)


def test_embedding_budget(dsfa_abbb, pst_unclosed):
    with pytest.raises(BudgetError):
        embed(dsfa_abbb, pst_to_psa(pst_unclosed), max_states=4)


@pytest.mark.parametrize("seed", range(12))
def test_language_equivalence(seed):
    dsfa, _, psa = random_system(seed)
    emb = embed(dsfa, psa)
    assert emb.n_states <= dsfa.n_states * psa.n_states
    for w in all_words(dsfa.n_symbols, 6):
        accepted = dsfa.accepts(w)
        for s in emb.starts:
            assert emb.accepts_from(w, int(s)) == accepted


@pytest.mark.parametrize("seed", range(12))
def test_probability_equivalence(seed):
    dsfa, _, psa = random_system(seed)
    emb = embed(dsfa, psa)
    rng = np.random.default_rng(100 + seed)
    for _ in range(1000):
        w = rng.integers(0, dsfa.n_symbols, int(rng.integers(psa.max_label, 12))).tolist()
        assert string_probability(emb, w) == pytest.approx(psa_probability(psa, w), abs=1e-12)
        l, q = start_state(emb, w)
        r = emb.run(w[l:], q)
        assert emb.pairs[r][0] == dsfa.run(w[l:])

