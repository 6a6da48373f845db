import itertools
import sys

import numpy as np
import pytest

from eventcast.algebra import Event
from eventcast.config import PatternConfig, compile_pattern
from eventcast.learning import pst_from_distributions, pst_to_psa

A, B = 0, 1


def two_symbol_dsfa(pattern: str):
    """DSFA over the alphabet {a, b} (a := x = 1, b := its negation), so a is symbol 0."""
    cfg = PatternConfig(pattern=pattern, predicates={"a": "x = 1", "b": "not x = 1"})
    return compile_pattern(cfg).dsfa


@pytest.fixture(scope="session")
def dsfa_ab():
    return two_symbol_dsfa("a ; b")


@pytest.fixture(scope="session")
def dsfa_abbb():
    return two_symbol_dsfa("a ; b ; b ; b")


@pytest.fixture(scope="session")
def pst_small():
    # the root distribution is not used by any assertion
    return pst_from_distributions(2, {
        (): [0.6, 0.4],
        (A,): [0.7, 0.3],
        (B,): [0.5, 0.5],
        (A, A): [0.75, 0.25],
        (B, A): [0.1, 0.9],
    })


@pytest.fixture(scope="session")
def pst_unclosed():
    """Tree whose leaf b cannot serve as a suffix-automaton state before expansion."""
    return pst_from_distributions(2, {
        (): [0.6, 0.4],
        (A,): [0.7, 0.3],
        (B,): [0.5, 0.5],
        (A, A): [0.75, 0.25],
        (B, A): [0.4, 0.6],
        (A, B, A): [0.9, 0.1],
        (B, B, A): [0.1, 0.9],
    })


@pytest.fixture(scope="session")
def speed_stream():
    """Six vessel positions with speeds 2 1 3 22 19 27 at timestamps 1..6."""
    return [Event(t, "v", {"speed": s}) for t, s in enumerate((2, 1, 3, 22, 19, 27), start=1)]


def all_words(t: int, max_len: int):
    for n in range(max_len + 1):
        yield from itertools.product(range(t), repeat=n)


def random_pst(rng: np.random.Generator, t: int, max_depth: int, p_expand: float = 0.6):
    """Random full-degree tree with Dirichlet distributions."""
    dists = {(): rng.dirichlet(np.ones(t))}
    frontier = [()]
    while frontier:
        s = frontier.pop()
        if len(s) < max_depth and (not s or rng.random() < p_expand):
            for sym in range(t):
                c = (sym,) + s
                dists[c] = rng.dirichlet(np.ones(t))
                frontier.append(c)
    return pst_from_distributions(t, dists)


def random_sre_text(rng: np.random.Generator, names: list[str], depth: int) -> str:
    """Random pattern text of nesting depth at most ``depth``."""
    if depth <= 0 or rng.random() < 0.25:
        return str(rng.choice(names))
    op = rng.integers(3)
    if op == 0:
        return f"({random_sre_text(rng, names, depth - 1)})*"
    sep = " ; " if op == 1 else " + "
    return f"({random_sre_text(rng, names, depth - 1)}){sep}({random_sre_text(rng, names, depth - 1)})"


def sre_corpus(n: int, seed: int = 0, max_depth: int = 4) -> list[PatternConfig]:
    """Random pattern configs; odd entries have 3 minterms, even ones 2."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        text = random_sre_text(rng, ["a", "b"], max_depth)
        if i % 2:
            out.append(PatternConfig(text, {"a": "x = 1", "b": "x = 2"}, [["a", "b"]],
                                     extra_predicates=["x = 1", "x = 2"]))
        else:
            out.append(PatternConfig(text, {"a": "x = 1", "b": "not x = 1"}, extra_predicates=["x = 1"]))
    return out


def random_system(seed: int, max_depth: int = 3):
    """A random pattern automaton, a random tree over its alphabet and the tree's suffix automaton."""
    rng = np.random.default_rng(seed)
    dsfa = compile_pattern(sre_corpus(1, seed=seed, max_depth=max_depth)[0]).dsfa
    pst = random_pst(rng, dsfa.n_symbols, 3)
    train = rng.integers(0, dsfa.n_symbols, 400).tolist()
    return dsfa, pst, pst_to_psa(pst, train=train)


def simulate_first_hits(emb, start, n, h, rng):
    """First step at which each of ``n`` sampled paths hits a final state (0 if none within h)."""
    cum = np.cumsum(emb.gamma, axis=1)
    state = np.full(n, start)
    hits = np.zeros(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    for step in range(1, h + 1):
        idx = np.flatnonzero(alive)
        if not len(idx):
            break
        u = rng.random(len(idx))
        sym = (u[:, None] >= cum[state[idx], :-1]).sum(axis=1)
        state[idx] = emb.delta[state[idx], sym]
        done = emb.finals[state[idx]]
        hits[idx[done]] = step
        alive[idx[done]] = False
    return hits


def pytest_terminal_summary(terminalreporter):
    for name, mod in list(sys.modules.items()):
        if name.endswith("test_acceptance") and getattr(mod, "RESULTS", None):
            terminalreporter.section("acceptance criteria")
            for line in mod.report_lines():
                terminalreporter.write_line(line)
