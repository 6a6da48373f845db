"""Symbolic automata: Thompson construction, determinisation over minterms, recognition."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .algebra import Event, MintermSet, Predicate
from .errors import BudgetError, ConfigError
from .pattern import Concat, Empty, Epsilon, Pred, Sre, Star, Union, size

DEFAULT_STATE_BUDGET = 1200


@dataclass
class Sfa:
    """Symbolic NFA. A guard of ``None`` marks an epsilon transition."""

    n_states: int
    start: int
    finals: frozenset[int]
    transitions: list[tuple[int, Predicate | None, int]]

    def accepts(self, word: Sequence[int], minterms: MintermSet) -> bool:
        cur = self._closure({self.start})
        for sym in word:
            nxt = {d for s, g, d in self.transitions if g is not None and s in cur and minterms.implies(sym, g)}
            cur = self._closure(nxt)
        return bool(cur & self.finals)

    def _closure(self, states: Iterable[int]) -> frozenset[int]:
        eps: dict[int, list[int]] = {}
        for s, g, d in self.transitions:
            if g is None:
                eps.setdefault(s, []).append(d)
        return _eps_closure(states, eps)


def _eps_closure(states: Iterable[int], eps: dict[int, list[int]]) -> frozenset[int]:
    seen = set(states)
    stack = list(seen)
    while stack:
        for d in eps.get(stack.pop(), ()):
            if d not in seen:
                seen.add(d)
                stack.append(d)
    return frozenset(seen)


def compile_sfa(r: Sre) -> Sfa:
    """Thompson construction: every node adds at most two states."""
    trans: list[tuple[int, Predicate | None, int]] = []
    counter = [0]

    def new() -> int:
        counter[0] += 1
        return counter[0] - 1

    def build(x: Sre) -> tuple[int, int]:
        if isinstance(x, Pred):
            s, f = new(), new()
            trans.append((s, x.pred, f))
            return s, f
        if isinstance(x, Epsilon):
            s, f = new(), new()
            trans.append((s, None, f))
            return s, f
        if isinstance(x, Union):
            s = new()
            s1, f1 = build(x.left)
            s2, f2 = build(x.right)
            f = new()
            trans.extend([(s, None, s1), (s, None, s2), (f1, None, f), (f2, None, f)])
            return s, f
        if isinstance(x, Concat):
            s1, f1 = build(x.left)
            s2, f2 = build(x.right)
            trans.append((f1, None, s2))
            return s1, f2
        if isinstance(x, Star):
            s = new()
            s1, f1 = build(x.child)
            f = new()
            trans.extend([(s, None, s1), (s, None, f), (f1, None, s1), (f1, None, f)])
            return s, f
        if isinstance(x, Empty):
            raise ConfigError("the pattern contains the empty language and cannot be compiled")
        raise TypeError(f"not an expression: {x!r}")

    start, final = build(r)
    assert counter[0] <= 2 * size(r)
    return Sfa(counter[0], start, frozenset({final}), trans)


@dataclass
class Dsfa:
    """Complete deterministic automaton over a minterm alphabet.

    ``table[q, sym]`` is the successor of ``q`` on minterm ``sym``. State 0 is
    the start state and states are numbered in breadth-first discovery order.
    """

    table: np.ndarray
    finals: np.ndarray
    minterms: MintermSet
    start: int = 0
    subsets: list[frozenset[int]] = field(default_factory=list, repr=False)

    @property
    def n_states(self) -> int:
        return self.table.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.table.shape[1]

    def step(self, q: int, sym: int) -> int:
        return int(self.table[q, sym])

    def run(self, word: Sequence[int], q: int | None = None) -> int:
        q = self.start if q is None else q
        for sym in word:
            q = int(self.table[q, sym])
        return q

    def accepts(self, word: Sequence[int]) -> bool:
        return bool(self.finals[self.run(word)])

    def to_json(self) -> dict:
        return {
            "states": self.n_states,
            "start": self.start,
            "finals": [int(q) for q in np.flatnonzero(self.finals)],
            "atoms": [str(a) for a in self.minterms.atoms],
            "alphabet": [{"id": m.id, "minterm": m.describe()} for m in self.minterms],
            "table": self.table.tolist(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def determinize(sfa: Sfa, minterms: MintermSet, max_states: int = DEFAULT_STATE_BUDGET) -> Dsfa:
    """Subset construction over minterm symbols, materialising only accessible subsets."""
    t = len(minterms)
    eps: dict[int, list[int]] = {}
    moves: dict[int, list[tuple[frozenset[int], int]]] = {}
    guard_syms: dict[Predicate, frozenset[int]] = {}
    for s, g, d in sfa.transitions:
        if g is None:
            eps.setdefault(s, []).append(d)
            continue
        if g not in guard_syms:
            guard_syms[g] = frozenset(sym for sym in range(t) if minterms.implies(sym, g))
        moves.setdefault(s, []).append((guard_syms[g], d))

    # Two closures that agree on the states with outgoing symbol moves and on
    # the finals behave identically, so subsets are keyed on those states only.
    important = frozenset(moves) | sfa.finals
    start = _eps_closure({sfa.start}, eps) & important
    index = {start: 0}
    subsets = [start]
    rows: list[list[int]] = []
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        row = []
        for sym in range(t):
            nxt = {d for s in cur for syms, d in moves.get(s, ()) if sym in syms}
            target = _eps_closure(nxt, eps) & important
            if target not in index:
                if len(subsets) >= max_states:
                    raise BudgetError("determinisation", max_states)
                index[target] = len(subsets)
                subsets.append(target)
                queue.append(target)
            row.append(index[target])
        rows.append(row)
    table = np.array(rows, dtype=np.int32).reshape(len(subsets), t)
    finals = np.array([bool(s & sfa.finals) for s in subsets], dtype=bool)
    return Dsfa(table, finals, minterms, 0, subsets)


# ---------------------------------------------------------------------------
# recognition


def encode_partitions(events: Sequence[Event]) -> tuple[np.ndarray, list[str]]:
    """Dense partition codes in order of first appearance."""
    keys: dict[str, int] = {}
    codes = np.fromiter((keys.setdefault(e.partition, len(keys)) for e in events), dtype=np.int32, count=len(events))
    return codes, list(keys)


@dataclass
class Symbolised:
    """A stream reduced to minterm symbols, with per-partition bookkeeping.

    Events that match no minterm are dropped and counted in ``skipped``.
    ``index`` maps each kept event back to its position in the input stream
    and ``local`` is its position among the kept events of its partition.
    """

    symbols: np.ndarray
    parts: np.ndarray
    local: np.ndarray
    index: np.ndarray
    partitions: list[str]
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.symbols)


def symbolise(events: Sequence[Event], minterms: MintermSet) -> Symbolised:
    syms = minterms.classify_many(events)
    parts, keys = encode_partitions(events)
    keep = syms >= 0
    index = np.flatnonzero(keep)
    syms, parts = syms[keep].astype(np.int32), parts[keep]
    return Symbolised(syms, parts, local_positions(parts, len(keys)), index, keys, int((~keep).sum()))


def local_positions(parts: np.ndarray, n_parts: int) -> np.ndarray:
    """Running per-partition counter: the k-th event of a partition gets k."""
    out = np.empty(len(parts), dtype=np.int64)
    if len(parts) == 0:
        return out
    order = np.argsort(parts, kind="stable")
    sorted_parts = parts[order]
    starts = np.searchsorted(sorted_parts, np.arange(n_parts))
    out[order] = np.arange(len(parts)) - starts[sorted_parts]
    return out


@dataclass
class Recognition:
    stream: Symbolised
    states: np.ndarray
    is_match: np.ndarray

    def matches(self) -> dict[str, list[int]]:
        """Local indices of detection points per partition."""
        out: dict[str, list[int]] = {k: [] for k in self.stream.partitions}
        for i in np.flatnonzero(self.is_match):
            out[self.stream.partitions[self.stream.parts[i]]].append(int(self.stream.local[i]))
        return out

    def match_positions(self) -> np.ndarray:
        """Positions in the input stream of all detection points."""
        return self.stream.index[self.is_match]


def run_dsfa(dsfa: Dsfa, stream: Symbolised) -> np.ndarray:
    """DSFA state after each event, each partition starting at the start state."""
    current = np.full(len(stream.partitions), dsfa.start, dtype=np.int32)
    return kernels.run_partitioned(dsfa.table, stream.symbols, stream.parts, current)


def recognize(dsfa: Dsfa, events: Sequence[Event] | Symbolised) -> Recognition:
    """Report every event after which a partition's run is in a final state.

    ``dsfa`` is expected to come from the streaming form of a pattern, so the
    reported points are the ends of all matches.
    """
    stream = events if isinstance(events, Symbolised) else symbolise(events, dsfa.minterms)
    states = run_dsfa(dsfa, stream)
    return Recognition(stream, states, dsfa.finals[states] if len(states) else np.zeros(0, dtype=bool))


def coaccessible(dsfa: Dsfa) -> np.ndarray:
    """States from which a final state can still be reached."""
    rev: dict[int, set[int]] = {}
    for q in range(dsfa.n_states):
        for d in dsfa.table[q]:
            rev.setdefault(int(d), set()).add(q)
    alive = set(np.flatnonzero(dsfa.finals).tolist())
    stack = list(alive)
    while stack:
        for p in rev.get(stack.pop(), ()):
            if p not in alive:
                alive.add(p)
                stack.append(p)
    out = np.zeros(dsfa.n_states, dtype=bool)
    out[list(alive)] = True
    return out


def match_instances(dsfa: Dsfa, word: Sequence[int]) -> list[tuple[int, int]]:
    """All pairs (i, j) such that ``word[i..j]`` (inclusive) is accepted by ``dsfa``.

    ``dsfa`` is the automaton of the plain (non-streaming) pattern. This counts
    distinct matches rather than detection points and is meant for short
    streams.
    """
    alive = coaccessible(dsfa)
    runs: list[tuple[int, int]] = []
    out = []
    for j, sym in enumerate(word):
        runs.append((j, dsfa.start))
        nxt = []
        for i, q in runs:
            q2 = int(dsfa.table[q, sym])
            if dsfa.finals[q2]:
                out.append((i, j))
            if alive[q2]:
                nxt.append((i, q2))
        runs = nxt
    return out
