"""Product of a pattern automaton and a suffix automaton: a Markov chain with final states."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .automata import Dsfa
from .errors import BudgetError, ConfigError
from .learning import Context, Psa

DEFAULT_EMBEDDING_BUDGET = 100_000


@dataclass
class Embedding:
    """States are pairs (DSFA state, PSA state), numbered in discovery order.

    ``starts[s]`` is the id of (DSFA start, PSA state ``s``) and ``pi[s]`` its
    initial weight.
    """

    pairs: list[tuple[int, int]]
    delta: np.ndarray
    gamma: np.ndarray
    finals: np.ndarray
    starts: np.ndarray
    pi: np.ndarray
    dsfa: Dsfa = field(repr=False)
    psa: Psa = field(repr=False)
    index: dict[tuple[int, int], int] = field(default_factory=dict, repr=False)

    @property
    def n_states(self) -> int:
        return len(self.pairs)

    @property
    def dsfa_states(self) -> np.ndarray:
        return np.array([r for r, _ in self.pairs], dtype=np.int32)

    def label(self, i: int) -> tuple[int, Context]:
        r, s = self.pairs[i]
        return r, self.psa.labels[s]

    def run(self, word: Sequence[int], q: int) -> int:
        for sym in word:
            q = int(self.delta[q, sym])
        return q

    def accepts_from(self, word: Sequence[int], q: int) -> bool:
        return bool(self.finals[self.run(word, q)])


def embed(dsfa: Dsfa, psa: Psa, max_states: int = DEFAULT_EMBEDDING_BUDGET) -> Embedding:
    """Build only the product states reachable from the start pairs, breadth first."""
    if dsfa.n_symbols != psa.n_symbols:
        raise ConfigError(f"alphabet sizes differ: automaton {dsfa.n_symbols}, model {psa.n_symbols}")
    t = dsfa.n_symbols
    index: dict[tuple[int, int], int] = {}
    pairs: list[tuple[int, int]] = []

    def add(pair: tuple[int, int]) -> int:
        i = index.get(pair)
        if i is None:
            if len(pairs) >= max_states:
                raise BudgetError("embedding", max_states)
            i = index[pair] = len(pairs)
            pairs.append(pair)
            queue.append(i)
        return i

    queue: deque[int] = deque()
    starts = np.array([add((dsfa.start, s)) for s in range(psa.n_states)], dtype=np.int64)
    rows: dict[int, list[int]] = {}
    dtable, ptable = dsfa.table, psa.tau
    while queue:
        i = queue.popleft()
        r, s = pairs[i]
        rows[i] = [add((int(dtable[r, sym]), int(ptable[s, sym]))) for sym in range(t)]
    n = len(pairs)
    delta = np.array([rows[i] for i in range(n)], dtype=np.int32).reshape(n, t)
    gamma = np.array([psa.gamma[s] for _, s in pairs], dtype=np.float64).reshape(n, t)
    finals = np.array([bool(dsfa.finals[r]) for r, _ in pairs], dtype=bool)
    return Embedding(pairs, delta, gamma, finals, starts, psa.pi.copy(), dsfa, psa, index)


def start_state(emb: Embedding, word: Sequence[int]) -> tuple[int, int]:
    """Position ``l`` at which ``word`` locks onto a PSA label, and the start pair for it."""
    locked = emb.psa.lock(word)
    if locked is None:
        raise ValueError("word is shorter than every state label")
    l, s = locked
    return l, int(emb.starts[s])


def string_probability(emb: Embedding, word: Sequence[int]) -> float:
    """Initial weight of the locking label times the edge probabilities of the rest of ``word``."""
    l, q = start_state(emb, word)
    prob = float(emb.pi[emb.pairs[q][1]])
    for sym in word[l:]:
        prob *= float(emb.gamma[q, sym])
        q = int(emb.delta[q, sym])
    return prob


@dataclass
class PartitionedMatrix:
    """Row-stochastic matrix with non-final states first.

    ``order[k]`` is the embedding state at row ``k`` and ``position`` the
    inverse map. The blocks are ``N`` (non-final to non-final), ``NF``, ``FN``
    and ``F``.
    """

    matrix: np.ndarray
    order: np.ndarray
    position: np.ndarray
    n_nonfinal: int

    @property
    def N(self) -> np.ndarray:
        k = self.n_nonfinal
        return self.matrix[:k, :k]

    @property
    def NF(self) -> np.ndarray:
        k = self.n_nonfinal
        return self.matrix[:k, k:]

    @property
    def FN(self) -> np.ndarray:
        k = self.n_nonfinal
        return self.matrix[k:, :k]

    @property
    def F(self) -> np.ndarray:
        k = self.n_nonfinal
        return self.matrix[k:, k:]

    def is_final(self, state: int) -> bool:
        return self.position[state] >= self.n_nonfinal


def partition_matrix(emb: Embedding) -> PartitionedMatrix:
    n = emb.n_states
    order = np.concatenate([np.flatnonzero(~emb.finals), np.flatnonzero(emb.finals)])
    position = np.empty(n, dtype=np.int64)
    position[order] = np.arange(n)
    P = np.zeros((n, n), dtype=np.float64)
    rows = np.repeat(position, emb.delta.shape[1])
    cols = position[emb.delta.reshape(-1)]
    np.add.at(P, (rows, cols), emb.gamma.reshape(-1))
    return PartitionedMatrix(P, order, position, int((~emb.finals).sum()))
