"""Variable-order Markov models over minterm symbols.

Contexts are tuples of symbols in stream order, the most recent symbol last.
A counter suffix tree stores the same strings reversed, as paths from the
root, so that following a path means reading the stream backwards.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetError, ConfigError

Context = tuple[int, ...]


# ---------------------------------------------------------------------------
# counter suffix tree


class CstNode:
    __slots__ = ("symbol", "count", "children")

    def __init__(self, symbol: int | None):
        self.symbol = symbol
        self.count = 0
        self.children: dict[int, CstNode] = {}


class CounterSuffixTree:
    """Occurrence counts of all strings of length at most ``depth``.

    Every window of ``depth`` consecutive symbols is inserted reversed, so a
    node at depth ``j`` counts the occurrences of the string on its path
    (read leaf to root) that end at a position ``>= depth``.
    """

    def __init__(self, n_symbols: int, depth: int):
        if depth < 1:
            raise ConfigError("counter suffix tree depth must be at least 1")
        self.n_symbols = n_symbols
        self.depth = depth
        self.root = CstNode(None)

    @property
    def n_windows(self) -> int:
        return self.root.count

    def insert(self, reversed_window: Iterable[int]) -> None:
        node = self.root
        node.count += 1
        for sym in reversed_window:
            child = node.children.get(sym)
            if child is None:
                child = node.children[sym] = CstNode(sym)
            child.count += 1
            node = child

    def node(self, s: Sequence[int]) -> CstNode | None:
        node = self.root
        for sym in reversed(s):
            node = node.children.get(sym)
            if node is None:
                return None
        return node

    def count(self, s: Sequence[int]) -> int:
        if len(s) > self.depth:
            raise ValueError(f"context of length {len(s)} is deeper than the tree ({self.depth})")
        node = self.node(s)
        return 0 if node is None else node.count

    def next_counts(self, s: Sequence[int]) -> np.ndarray:
        """Counts of ``s`` followed by each symbol."""
        if len(s) + 1 > self.depth:
            raise ValueError(f"successor counts of a length-{len(s)} context need depth {len(s) + 1}")
        out = np.zeros(self.n_symbols, dtype=np.int64)
        for sym, node in self.root.children.items():
            # the successor is the most recent symbol, hence the first step from the root
            for x in reversed(s):
                node = node.children.get(x)
                if node is None:
                    break
            else:
                out[sym] = node.count
        return out

    def items(self) -> Iterable[tuple[Context, int]]:
        """All (string, count) pairs, strings in stream order."""
        stack: list[tuple[CstNode, Context]] = [(c, (c.symbol,)) for c in self.root.children.values()]
        while stack:
            node, s = stack.pop()
            yield s, node.count
            stack.extend((c, (c.symbol,) + s) for c in node.children.values())


def cst_build(symbols: Sequence[int], m: int, n_symbols: int | None = None) -> CounterSuffixTree:
    """Single pass over ``symbols`` keeping a buffer of the last ``m`` symbols."""
    return cst_build_runs([symbols], m, n_symbols)


def cst_build_runs(runs: Iterable[Sequence[int]], m: int, n_symbols: int | None = None) -> CounterSuffixTree:
    """Counts over several independent sequences; windows never cross a sequence boundary."""
    runs = [[int(x) for x in r] for r in runs]
    if n_symbols is None:
        n_symbols = max((max(r) for r in runs if r), default=0) + 1
    cst = CounterSuffixTree(n_symbols, m)
    for symbols in runs:
        buf: deque[int] = deque(maxlen=m)
        for sym in symbols:
            buf.appendleft(sym)
            if len(buf) == m:
                cst.insert(buf)
    return cst


def empirical_prob(cst: CounterSuffixTree, s: Sequence[int], sym: int) -> float:
    """Estimated probability of ``sym`` following context ``s``; uniform if ``s`` was never seen."""
    c = cst.next_counts(s)
    total = int(c.sum())
    if total == 0:
        return 1.0 / cst.n_symbols
    return c[sym] / total


def empirical_distribution(cst: CounterSuffixTree, s: Sequence[int]) -> tuple[np.ndarray, int]:
    c = cst.next_counts(s)
    total = int(c.sum())
    if total == 0:
        return np.full(cst.n_symbols, 1.0 / cst.n_symbols), 0
    return c / total, total


# ---------------------------------------------------------------------------
# prediction suffix tree


def smooth(p: np.ndarray, floor: float) -> np.ndarray:
    """Raise entries below ``floor`` to ``floor``, taking the deficit from the others.

    The deficit is removed in proportion to each entry's excess over the
    floor, so a distribution that already respects the floor is unchanged.
    """
    p = np.asarray(p, dtype=np.float64)
    if floor <= 0.0:
        return p.copy()
    if floor * len(p) > 1.0 + 1e-12:
        raise ConfigError(f"smoothing floor {floor} is too high for {len(p)} symbols")
    low = p < floor
    if not low.any():
        return p.copy()
    deficit = float(np.sum(floor - p[low]))
    excess = np.where(low, 0.0, p - floor)
    out = np.where(low, floor, p - deficit * excess / excess.sum())
    return out


@dataclass
class LearnConfig:
    """Hyper-parameters of PST learning.

    ``theta1`` bounds the conditional probability a distinguishing symbol must
    have and ``theta2`` the ratio against the parent context. The smoothing
    floor is ``alpha / |alphabet|``. ``max_states`` caps the automaton built
    from the tree. ``full`` keeps every context up to depth ``m``.
    """

    m: int = 1
    alpha: float = 0.01
    max_states: int = 100_000
    theta1: float = 0.001
    theta2: float = 1.05
    full: bool = False
    min_count: int = 1

    def __post_init__(self):
        if self.m < 0:
            raise ConfigError("order m must be non-negative")
        if not 0.0 <= self.theta1 < 1.0:
            raise ConfigError("theta1 must lie in [0, 1)")
        if self.theta2 <= 1.0:
            raise ConfigError("theta2 must be greater than 1")
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError("alpha must lie in [0, 1)")
        if self.min_count < 1:
            raise ConfigError("min_count must be at least 1")


@dataclass
class PstNode:
    label: Context
    probs: np.ndarray
    raw: np.ndarray
    count: int = 0


@dataclass
class PredictionSuffixTree:
    n_symbols: int
    nodes: dict[Context, PstNode]
    floor: float = 0.0
    order: int = field(init=False)

    def __post_init__(self):
        self.order = max((len(k) for k in self.nodes), default=0)

    def children(self, label: Context) -> list[Context]:
        return [c for c in ((s,) + label for s in range(self.n_symbols)) if c in self.nodes]

    def is_leaf(self, label: Context) -> bool:
        return not self.children(label)

    def leaves(self) -> list[Context]:
        return [k for k in self.nodes if self.is_leaf(k)]

    def deepest(self, context: Sequence[int]) -> Context:
        """Label of the deepest node that is a suffix of ``context``."""
        label: Context = ()
        nodes = self.nodes
        for sym in reversed(context):
            cand = (sym,) + label
            if cand not in nodes:
                break
            label = cand
        return label

    def predict(self, context: Sequence[int]) -> np.ndarray:
        if len(context) > self.order:
            context = context[len(context) - self.order:]
        return self.nodes[self.deepest(context)].probs

    def check(self) -> None:
        """Structural checks: suffix closure, full degree, normalised distributions."""
        if () not in self.nodes:
            raise ConfigError("tree has no root")
        for label, node in self.nodes.items():
            if label and label[1:] not in self.nodes:
                raise ConfigError(f"node {label} has no parent")
            k = len(self.children(label))
            if k not in (0, self.n_symbols):
                raise ConfigError(f"node {label} has {k} children, expected 0 or {self.n_symbols}")
            if abs(node.probs.sum() - 1.0) > 1e-12:
                raise ConfigError(f"distribution at {label} does not sum to 1")

    # -- serialisation ---------------------------------------------------

    def to_json(self) -> dict:
        return {
            "symbols": self.n_symbols,
            "floor": self.floor,
            "nodes": [
                {"label": list(k), "count": n.count, "probs": n.probs.tolist(), "raw": n.raw.tolist()}
                for k, n in sorted(self.nodes.items(), key=lambda kv: (len(kv[0]), kv[0]))
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "PredictionSuffixTree":
        nodes = {}
        for rec in d["nodes"]:
            label = tuple(int(x) for x in rec["label"])
            probs = np.array(rec["probs"], dtype=np.float64)
            raw = np.array(rec.get("raw", rec["probs"]), dtype=np.float64)
            nodes[label] = PstNode(label, probs, raw, int(rec.get("count", 0)))
        return cls(int(d["symbols"]), nodes, float(d.get("floor", 0.0)))


def pst_from_distributions(n_symbols: int, dists: dict[Context, Sequence[float]]) -> PredictionSuffixTree:
    """Build a tree directly from given distributions (no smoothing)."""
    nodes = {}
    for label, p in dists.items():
        arr = np.asarray(p, dtype=np.float64)
        nodes[tuple(label)] = PstNode(tuple(label), arr, arr.copy())
    tree = PredictionSuffixTree(n_symbols, nodes)
    tree.check()
    return tree


def pst_predict(pst: PredictionSuffixTree, context: Sequence[int]) -> np.ndarray:
    return pst.predict(context)


def _passes(p_s: np.ndarray, p_parent: np.ndarray, theta1: float, theta2: float) -> bool:
    for a, b in zip(p_s, p_parent):
        if a > theta1 and b > 0.0:
            ratio = a / b
            if ratio > theta2 or ratio < 1.0 / theta2:
                return True
    return False


def learn_pst(cst: CounterSuffixTree, cfg: LearnConfig) -> PredictionSuffixTree:
    """Grow a tree from the root, keeping contexts whose prediction differs from their parent's.

    Candidates are explored breadth-first up to depth ``cfg.m``. A kept
    context brings its suffixes along. Afterwards every internal node is given
    all of its children; children whose context never occurred reuse their
    parent's estimate.
    """
    m = min(cfg.m, cst.depth - 1)
    if m < cfg.m:
        raise ConfigError(f"order {cfg.m} needs a counter suffix tree of depth {cfg.m + 1}, got {cst.depth}")
    t = cst.n_symbols
    floor = cfg.alpha / t
    cache: dict[Context, tuple[np.ndarray, int]] = {}

    def dist(s: Context) -> tuple[np.ndarray, int]:
        if s not in cache:
            cache[s] = empirical_distribution(cst, s)
        return cache[s]

    keep: set[Context] = {()}
    queue: deque[Context] = deque((sym,) for sym in range(t)) if m >= 1 else deque()
    while queue:
        s = queue.popleft()
        p_s, n_s = dist(s)
        if n_s < cfg.min_count and not cfg.full:
            continue
        if cfg.full or _passes(p_s, dist(s[1:])[0], cfg.theta1, cfg.theta2):
            for i in range(len(s)):
                keep.add(s[i:])
        if len(s) < m:
            queue.extend((sym,) + s for sym in range(t))

    raw: dict[Context, tuple[np.ndarray, int]] = {}
    for s in sorted(keep, key=len):
        p, n = dist(s)
        raw[s] = (p, n) if n > 0 or not s else (raw[s[1:]][0], 0)
    # full degree: every internal node gets all its children
    for s in sorted(keep, key=len):
        if len(s) >= 1:
            parent = s[1:]
            for sym in range(t):
                c = (sym,) + parent
                if c not in raw:
                    p, n = dist(c)
                    raw[c] = (p, n) if n > 0 else (raw[parent][0], 0)
    nodes = {s: PstNode(s, smooth(p, floor), np.asarray(p, dtype=np.float64), n) for s, (p, n) in raw.items()}
    return PredictionSuffixTree(t, nodes, floor)


def learn(symbols: Sequence[int], n_symbols: int, cfg: LearnConfig) -> PredictionSuffixTree:
    """Counter suffix tree of depth ``m + 1`` followed by :func:`learn_pst`."""
    return learn_runs([symbols], n_symbols, cfg)


def learn_runs(runs: Iterable[Sequence[int]], n_symbols: int, cfg: LearnConfig) -> PredictionSuffixTree:
    cst = cst_build_runs(runs, cfg.m + 1, n_symbols)
    return learn_pst(cst, cfg)


def avg_log_loss(model: PredictionSuffixTree, test: Sequence[int]) -> float:
    """Mean of -log2 P(x_i | up to m preceding symbols)."""
    test = [int(x) for x in test]
    if not test:
        raise ValueError("log-loss needs a non-empty test sequence")
    m = model.order
    total = 0.0
    for i, sym in enumerate(test):
        p = model.predict(test[max(0, i - m):i])[sym]
        if p <= 0.0:
            raise ValueError(f"symbol {sym} at position {i} has probability zero")
        total -= math.log2(p)
    return total / len(test)


# ---------------------------------------------------------------------------
# probabilistic suffix automaton


@dataclass
class Psa:
    """Automaton whose states are the leaves of a transition-closed tree."""

    labels: list[Context]
    tau: np.ndarray
    gamma: np.ndarray
    pi: np.ndarray
    index: dict[Context, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {s: i for i, s in enumerate(self.labels)}

    @property
    def n_states(self) -> int:
        return len(self.labels)

    @property
    def n_symbols(self) -> int:
        return self.tau.shape[1]

    @property
    def max_label(self) -> int:
        return max(len(s) for s in self.labels)

    def state_of(self, history: Sequence[int]) -> int | None:
        """The state whose label is a suffix of ``history``, if any."""
        history = tuple(history)
        for k in range(0, min(len(history), self.max_label) + 1):
            i = self.index.get(history[len(history) - k:])
            if i is not None:
                return i
        return None

    def lock(self, word: Sequence[int]) -> tuple[int, int] | None:
        """Smallest ``l`` such that some label is a suffix of ``word[:l]``, with that state."""
        for l in range(0, len(word) + 1):
            q = self.state_of(word[:l])
            if q is not None:
                return l, q
        return None

    def check(self) -> None:
        labels = set(self.labels)
        for s in self.labels:
            for k in range(1, len(s)):
                if s[k:] in labels:
                    raise ConfigError(f"label set is not suffix free: {s[k:]} is a suffix of {s}")
        for i, s in enumerate(self.labels):
            for sym in range(self.n_symbols):
                tgt = self.labels[self.tau[i, sym]]
                x = s + (sym,)
                if x[len(x) - len(tgt):] != tgt:
                    raise ConfigError(f"transition {s} --{sym}--> {tgt} breaks the suffix condition")
        if np.any(np.abs(self.gamma.sum(axis=1) - 1.0) > 1e-12):
            raise ConfigError("transition probabilities do not sum to 1")
        if abs(self.pi.sum() - 1.0) > 1e-12:
            raise ConfigError("initial distribution does not sum to 1")

    def to_json(self) -> dict:
        return {
            "labels": [list(s) for s in self.labels],
            "tau": self.tau.tolist(),
            "gamma": self.gamma.tolist(),
            "pi": self.pi.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Psa":
        return cls(
            [tuple(int(x) for x in s) for s in d["labels"]],
            np.array(d["tau"], dtype=np.int32),
            np.array(d["gamma"], dtype=np.float64),
            np.array(d["pi"], dtype=np.float64),
        )


def expand_for_psa(pst: PredictionSuffixTree, max_states: int | None = None) -> dict[Context, np.ndarray]:
    """Leaves of the smallest expansion of ``pst`` closed under transitions.

    A leaf ``s`` is split when, for some symbol, ``s`` followed by that symbol
    is an internal node: no leaf would then be a suffix of the extended
    string. New children inherit the distribution of ``s``.
    """
    t = pst.n_symbols
    dists = {k: n.probs for k, n in pst.nodes.items()}
    internal = {k[1:] for k in dists if k}
    leaves = [k for k in dists if k not in internal]
    changed = True
    while changed:
        changed = False
        for s in list(leaves):
            for sym in range(t):
                if s + (sym,) in internal:
                    leaves.remove(s)
                    internal.add(s)
                    for c in range(t):
                        child = (c,) + s
                        dists[child] = dists[s]
                        leaves.append(child)
                    changed = True
                    if max_states is not None and len(leaves) > max_states:
                        raise BudgetError("suffix automaton construction", max_states)
                    break
    return {s: dists[s] for s in leaves}


def pst_to_psa(pst: PredictionSuffixTree, train: Sequence | None = None,
               max_states: int | None = None) -> Psa:
    """Automaton over the leaves of the transition-closed expansion of ``pst``.

    ``pi`` is the frequency with which each label ends a window of ``train``;
    it is uniform when no training sequence is given.
    """
    leaves = expand_for_psa(pst, max_states)
    labels = sorted(leaves, key=lambda s: tuple(reversed(s)))
    if max_states is not None and len(labels) > max_states:
        raise BudgetError("suffix automaton construction", max_states)
    index = {s: i for i, s in enumerate(labels)}
    t = pst.n_symbols
    maxlen = max(len(s) for s in labels)
    tau = np.empty((len(labels), t), dtype=np.int32)
    for i, s in enumerate(labels):
        for sym in range(t):
            x = s + (sym,)
            for k in range(min(len(x), maxlen), -1, -1):
                j = index.get(x[len(x) - k:])
                if j is not None:
                    tau[i, sym] = j
                    break
            else:
                raise ConfigError(f"no state for {x}; the tree is not transition closed")
    gamma = np.array([leaves[s] for s in labels], dtype=np.float64).reshape(len(labels), t)
    psa = Psa(labels, tau, gamma, np.full(len(labels), 1.0 / len(labels)), index)
    if train is not None:
        psa.pi = label_frequencies(psa, train)
    return psa


def label_frequencies(psa: Psa, train: Sequence[int] | Sequence[Sequence[int]]) -> np.ndarray:
    """How often each label is the state suffix of a training prefix.

    ``train`` is one sequence or a list of sequences.
    """
    runs = train if len(train) and not np.isscalar(train[0]) else [train]
    counts = np.zeros(psa.n_states, dtype=np.float64)
    L = psa.max_label
    for run in runs:
        run = [int(x) for x in run]
        for end in range(L, len(run) + 1):
            counts[psa.state_of(run[end - L:end])] += 1
    if counts.sum() == 0:
        return np.full(psa.n_states, 1.0 / psa.n_states)
    return counts / counts.sum()


def psa_probability(psa: Psa, word: Sequence[int]) -> float:
    """Probability of ``word``: initial weight of the locking label times the
    transition probabilities of the symbols read after it.

    States are tracked by label arithmetic rather than the transition table.
    """
    locked = psa.lock(word)
    if locked is None:
        raise ValueError("word is shorter than every state label")
    l, q = locked
    label = psa.labels[q]
    prob = float(psa.pi[q])
    for sym in word[l:]:
        prob *= float(psa.gamma[psa.index[label], sym])
        nxt = psa.state_of(label + (sym,))
        label = psa.labels[nxt]
    return prob


# ---------------------------------------------------------------------------
# model files


def dumps_model(payload: dict) -> str:
    """JSON text; floats are written with up to 17 significant digits and round-trip exactly."""
    return json.dumps(payload, indent=1, allow_nan=False)
