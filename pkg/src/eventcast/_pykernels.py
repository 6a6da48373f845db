"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def run_partitioned(table, symbols, parts, current):
    """Advance one automaton per partition; ``current`` is updated in place.

    Returns the state of the event's partition after each event.
    """
    table = np.asarray(table)
    n = len(symbols)
    out = np.empty(n, dtype=np.int32)
    rows = table.tolist()
    cur = current.tolist()
    syms = symbols.tolist()
    ps = parts.tolist()
    for i in range(n):
        p = ps[i]
        q = rows[cur[p]][syms[i]]
        cur[p] = q
        out[i] = q
    current[:] = cur
    return out


def first_hit(indptr, indices, probs, final, start, h, cutoff):
    """First-passage probabilities into ``final`` over a sparse chain.

    The chain is stored row-wise (CSR). Mass that reaches a final state is
    recorded and not propagated further. After every step, configurations
    whose mass is below ``cutoff`` are dropped.
    """
    out = np.zeros(h, dtype=np.float64)
    ip = indptr.tolist()
    ix = indices.tolist()
    pr = probs.tolist()
    fin = final.tolist()
    frontier = {int(start): 1.0}
    for n in range(h):
        nxt = {}
        hit = 0.0
        for i, x in frontier.items():
            for k in range(ip[i], ip[i + 1]):
                j = ix[k]
                y = x * pr[k]
                if fin[j]:
                    hit += y
                else:
                    nxt[j] = nxt.get(j, 0.0) + y
        out[n] = hit
        if cutoff > 0.0:
            frontier = {j: y for j, y in nxt.items() if y >= cutoff}
        else:
            frontier = {j: y for j, y in nxt.items() if y > 0.0}
        if not frontier:
            break
    return out
