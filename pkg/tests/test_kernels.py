import os
import subprocess
import sys

import numpy as np
import pytest

from eventcast import kernels

IMPLS = kernels.implementations()
needs_compiled = pytest.mark.skipif("cython" not in IMPLS, reason="compiled extension not built")


def random_chain(rng, n, t):
    indptr = np.arange(0, (n + 1) * t, t, dtype=np.int64)
    indices = rng.integers(0, n, size=n * t).astype(np.int32)
    probs = rng.dirichlet(np.ones(t), size=n).reshape(-1)
    final = (rng.random(n) < 0.1).astype(np.uint8)
    final[0] = 0
    return indptr, indices, probs, final


def test_python_run_partitioned_by_hand():
    table = np.array([[1, 0], [1, 2], [1, 0]], dtype=np.int32)
    cur = np.zeros(2, dtype=np.int32)
    out = kernels.run_partitioned(table, [0, 0, 1, 1], [0, 1, 0, 1], cur, impl=IMPLS["python"])
    assert out.tolist() == [1, 1, 2, 2]
    assert cur.tolist() == [2, 2]


def test_python_first_hit_geometric():
    # state 0 stays with 0.7, moves to final state 1 with 0.3
    out = kernels.first_hit([0, 2, 2], [0, 1], [0.7, 0.3], [0, 1], 0, 5, 0.0, impl=IMPLS["python"])
    assert np.allclose(out, [0.3 * 0.7 ** k for k in range(5)], atol=1e-15, rtol=0)


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_run_partitioned_identical(seed):
    rng = np.random.default_rng(seed)
    table = rng.integers(0, 40, size=(40, 4)).astype(np.int32)
    syms = rng.integers(0, 4, 5000).astype(np.int32)
    parts = rng.integers(0, 17, 5000).astype(np.int32)
    results = []
    for impl in IMPLS.values():
        cur = np.zeros(17, dtype=np.int32)
        results.append((kernels.run_partitioned(table, syms, parts, cur, impl=impl).tolist(), cur.tolist()))
    assert results[0] == results[1]


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("cutoff", [0.0, 1e-4, 1e-2])
def test_first_hit_identical(seed, cutoff):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, 60, 3)
    a = kernels.first_hit(*chain, 0, 80, cutoff, impl=IMPLS["cython"])
    b = kernels.first_hit(*chain, 0, 80, cutoff, impl=IMPLS["python"])
    assert np.max(np.abs(a - b)) <= 1e-15
    assert a.sum() <= 1 + 1e-12


def test_pure_python_fallback_selected():
    code = "from eventcast import kernels; print(kernels.BACKEND, kernels.COMPILED)"
    env = {**os.environ, "EVENTCAST_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "False"]


def test_pure_python_pipeline_agrees(tmp_path):
    code = (
        "import numpy as np\n"
        "from eventcast.automata import run_dsfa, Symbolised, local_positions\n"
        "from eventcast.config import PatternConfig, compile_pattern\n"
        "from eventcast.forecast import ContextChain\n"
        "from eventcast.learning import pst_from_distributions\n"
        "cp = compile_pattern(PatternConfig('a ; b ; b ; b', {'a': 'x = 1', 'b': 'not x = 1'}))\n"
        "rng = np.random.default_rng(1)\n"
        "s = rng.integers(0, 2, 3000).astype(np.int32); p = rng.integers(0, 4, 3000).astype(np.int32)\n"
        "st = Symbolised(s, p, local_positions(p, 4), np.arange(3000), ['a', 'b', 'c', 'd'])\n"
        "states = run_dsfa(cp.dsfa, st)\n"
        "pst = pst_from_distributions(2, {(): [0.4, 0.6], (0,): [0.7, 0.3], (1,): [0.2, 0.8]})\n"
        "ch = ContextChain(cp.dsfa, pst)\n"
        "w = ch.wtd(ch.config_id(cp.dsfa.start, ()), 40, 0.0)\n"
        "print(','.join(map(str, states.tolist())))\n"
        "print(','.join(repr(float(x)) for x in w))\n"
    )
    runs = {}
    for flag in ("0", "1"):
        env = {**os.environ, "EVENTCAST_PURE_PYTHON": flag}
        runs[flag] = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                                    check=True).stdout.splitlines()
    assert runs["0"][0] == runs["1"][0]
    a = np.array([float(x) for x in runs["0"][1].split(",")])
    b = np.array([float(x) for x in runs["1"][1].split(",")])
    assert np.max(np.abs(a - b)) <= 1e-15
