"""Waiting-time distributions and the forecasts derived from them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from . import kernels
from .automata import Dsfa
from .embedding import PartitionedMatrix
from .errors import ConfigError
from .learning import Context, PredictionSuffixTree

DEFAULT_HORIZON = 200
DEFAULT_CUTOFF = 1e-4
FORECAST_KINDS = ("interval", "point", "classification")


@dataclass
class WaitingTimeDistribution:
    """``probs[n - 1]`` is the probability that the first final state is entered after exactly ``n`` steps."""

    probs: np.ndarray
    state: Hashable = None

    @property
    def horizon(self) -> int:
        return len(self.probs)

    @property
    def residual(self) -> float:
        """Probability of not finishing within the horizon."""
        return max(0.0, 1.0 - math.fsum(self.probs))

    def __getitem__(self, n: int) -> float:
        if not 1 <= n <= len(self.probs):
            raise IndexError(f"step {n} outside 1..{len(self.probs)}")
        return float(self.probs[n - 1])


@dataclass
class ForecastConfig:
    theta_fc: float = 0.5
    w: int = 10
    horizon: int = DEFAULT_HORIZON
    cutoff: float = DEFAULT_CUTOFF
    max_spread: int | None = None
    kind: str = "interval"

    def __post_init__(self):
        if self.kind not in FORECAST_KINDS:
            raise ConfigError(f"forecast kind must be one of {FORECAST_KINDS}, got {self.kind!r}")
        if not 0.0 <= self.theta_fc < 1.0:
            raise ConfigError("theta_fc must lie in [0, 1)")
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if not 1 <= self.w <= self.horizon:
            raise ConfigError("the classification window must satisfy 1 <= w <= horizon")
        if not 0.0 <= self.cutoff < 1.0:
            raise ConfigError("cutoff must lie in [0, 1)")


# ---------------------------------------------------------------------------
# matrix method


def _probs(x) -> np.ndarray:
    return x.probs if isinstance(x, WaitingTimeDistribution) else np.asarray(x, dtype=np.float64)


def wtd_matrix_all(pm: PartitionedMatrix, h: int) -> np.ndarray:
    """Waiting-time distributions of every state, rows in embedding-state order.

    One vector per step is propagated, ``x_n = N^(n-1) e`` with ``e`` the
    one-step exit probabilities into the finals, so each step costs a single
    matrix-vector product. ``e`` is summed from the ``NF`` block instead of
    taken as ``1 - N 1`` so that states with no final successor get exact zeros.
    """
    if h < 1:
        raise ConfigError("horizon must be at least 1")
    k = pm.n_nonfinal
    n = pm.matrix.shape[0]
    N = pm.N
    X = np.empty((k, h), dtype=np.float64)
    x = pm.NF.sum(axis=1)
    for step in range(h):
        X[:, step] = x
        x = N @ x
    out = np.empty((n, h), dtype=np.float64)
    out[:k] = X
    if n > k:
        out[k:, 0] = pm.F.sum(axis=1)
        if h > 1:
            out[k:, 1:] = pm.FN @ X[:, : h - 1]
    return out[pm.position]


def wtd_matrix(pm: PartitionedMatrix, state: int, h: int) -> WaitingTimeDistribution:
    """Waiting-time distribution of one embedding state by repeated row-vector products."""
    if not 0 <= state < pm.matrix.shape[0]:
        raise ConfigError(f"state {state} is not in the matrix")
    if h < 1:
        raise ConfigError("horizon must be at least 1")
    k = pm.n_nonfinal
    exit_ = pm.NF.sum(axis=1)
    N = pm.N
    pos = int(pm.position[state])
    p = np.zeros(h, dtype=np.float64)
    if pos < k:
        y = np.zeros(k)
        y[pos] = 1.0
        first = 0
    else:
        p[0] = pm.F[pos - k].sum()
        y = pm.FN[pos - k].copy()
        first = 1
    for step in range(first, h):
        p[step] = y @ exit_
        y = y @ N
    return WaitingTimeDistribution(p, state)


# ---------------------------------------------------------------------------
# direct estimation from the tree


class ContextModel:
    """Predictions of a tree keyed by the shortest sufficient context.

    The key of a history is its longest suffix that is a prefix of some node
    label. The deepest matching node is always a suffix of the key, and the
    key after reading one more symbol depends only on the previous key, so
    histories with equal keys have identical futures.
    """

    def __init__(self, pst: PredictionSuffixTree):
        self.pst = pst
        self.order = pst.order
        self.prefixes = {label[:i] for label in pst.nodes for i in range(len(label) + 1)}
        self._step: dict[tuple[Context, int], Context] = {}
        self._probs: dict[Context, list[float]] = {}

    def key_of(self, history: Sequence[int]) -> Context:
        history = tuple(history)
        n = len(history)
        for k in range(min(n, self.order), 0, -1):
            cand = history[n - k:]
            if cand in self.prefixes:
                return cand
        return ()

    def step(self, key: Context, sym: int) -> Context:
        nxt = self._step.get((key, sym))
        if nxt is None:
            nxt = self._step[(key, sym)] = self.key_of(key + (sym,))
        return nxt

    def probs(self, key: Context) -> list[float]:
        p = self._probs.get(key)
        if p is None:
            p = self._probs[key] = self.pst.predict(key).tolist()
        return p


def wtd_pst(dsfa: Dsfa, pst: PredictionSuffixTree | ContextModel, context: Sequence[int], dsfa_state: int,
            h: int = DEFAULT_HORIZON, cutoff: float = DEFAULT_CUTOFF) -> WaitingTimeDistribution:
    """Expand future paths from (``dsfa_state``, ``context``) without building a chain.

    Paths stop at their first final state. Paths that reach the same DSFA
    state with the same sufficient context are merged, and after each step
    merged configurations whose probability is below ``cutoff`` are dropped.
    """
    model = pst if isinstance(pst, ContextModel) else ContextModel(pst)
    table = dsfa.table.tolist()
    finals = dsfa.finals.tolist()
    t = dsfa.n_symbols
    out = np.zeros(h, dtype=np.float64)
    frontier = {(int(dsfa_state), model.key_of(context)): 1.0}
    for n in range(h):
        nxt: dict[tuple[int, Context], float] = {}
        hit = 0.0
        for (r, key), x in frontier.items():
            probs = model.probs(key)
            row = table[r]
            for sym in range(t):
                y = x * probs[sym]
                r2 = row[sym]
                if finals[r2]:
                    hit += y
                else:
                    c = (r2, model.step(key, sym))
                    nxt[c] = nxt.get(c, 0.0) + y
        out[n] = hit
        if cutoff > 0.0:
            frontier = {c: y for c, y in nxt.items() if y >= cutoff}
        else:
            frontier = {c: y for c, y in nxt.items() if y > 0.0}
        if not frontier:
            break
    return WaitingTimeDistribution(out, (int(dsfa_state), model.key_of(context)))


class ContextChain:
    """Configurations (DSFA state, context key) discovered on demand, stored row-wise.

    Computing a distribution expands the configurations reachable from the
    start and runs the first-hit kernel on the resulting sparse chain. Results
    equal :func:`wtd_pst` bit for bit.
    """

    def __init__(self, dsfa: Dsfa, pst: PredictionSuffixTree | ContextModel):
        self.dsfa = dsfa
        self.model = pst if isinstance(pst, ContextModel) else ContextModel(pst)
        self.configs: list[tuple[int, Context]] = []
        self.index: dict[tuple[int, Context], int] = {}
        self._targets: list[list[int] | None] = []
        self._probs: list[list[float] | None] = []
        self._table = dsfa.table.tolist()
        self._finals = dsfa.finals.tolist()
        self._csr: tuple[np.ndarray, ...] | None = None
        self._csr_size = -1

    def __len__(self) -> int:
        return len(self.configs)

    def config_id(self, r: int, key: Context) -> int:
        c = (r, key)
        i = self.index.get(c)
        if i is None:
            i = self.index[c] = len(self.configs)
            self.configs.append(c)
            self._targets.append(None)
            self._probs.append(None)
        return i

    def _expand(self, start: int) -> None:
        """Give every configuration reachable from ``start`` its outgoing edges."""
        stack = [start]
        t = self.dsfa.n_symbols
        while stack:
            i = stack.pop()
            if self._targets[i] is not None:
                continue
            r, key = self.configs[i]
            probs = self.model.probs(key)
            row = self._table[r]
            tg = []
            for sym in range(t):
                r2 = row[sym]
                j = self.config_id(r2, self.model.step(key, sym))
                tg.append(j)
                if self._targets[j] is None:
                    stack.append(j)
            self._targets[i] = tg
            self._probs[i] = list(probs)

    def _arrays(self):
        if self._csr is None or self._csr_size != len(self.configs):
            t = self.dsfa.n_symbols
            n = len(self.configs)
            indptr = np.zeros(n + 1, dtype=np.int64)
            idx, pr = [], []
            for i in range(n):
                tg = self._targets[i]
                if tg is not None:
                    idx.extend(tg)
                    pr.extend(self._probs[i])
                    indptr[i + 1] = indptr[i] + t
                else:
                    indptr[i + 1] = indptr[i]
            final = np.array([self._finals[r] for r, _ in self.configs], dtype=np.uint8)
            self._csr = (indptr, np.array(idx, dtype=np.int32), np.array(pr, dtype=np.float64), final)
            self._csr_size = n
        return self._csr

    def closure(self, start: int) -> list[int]:
        """Ids of all configurations reachable from ``start`` (including it)."""
        self._expand(start)
        seen = {start}
        stack = [start]
        while stack:
            for j in self._targets[stack.pop()]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return sorted(seen)

    def wtd(self, config: int, h: int, cutoff: float) -> np.ndarray:
        self._expand(config)
        indptr, idx, pr, final = self._arrays()
        return kernels.first_hit(indptr, idx, pr, final, config, h, cutoff)


# ---------------------------------------------------------------------------
# forecasts


@dataclass(frozen=True)
class Interval:
    start: int
    end: int
    probability: float

    @property
    def spread(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Point:
    n: int
    probability: float


@dataclass(frozen=True)
class Classification:
    positive: bool
    probability: float


@dataclass(frozen=True)
class NoForecast:
    """No forecast meets the requirement; ``probability`` is the mass within the horizon."""

    probability: float


def interval_forecast(wtd, theta_fc: float) -> Interval | NoForecast:
    """Shortest interval holding at least ``theta_fc`` of the mass; the earliest one on ties.

    A single left-to-right pass: the right end advances one step at a time
    and the left end moves right as long as the window keeps enough mass.
    Window masses are summed exactly (``math.fsum``) so that the choice does
    not depend on the order of accumulation.
    """
    p = _probs(wtd).tolist()
    h = len(p)
    best: Interval | None = None
    s = 0
    for e in range(h):
        mass = math.fsum(p[s:e + 1])
        if mass < theta_fc:
            continue
        while s < e:
            rest = math.fsum(p[s + 1:e + 1])
            if rest < theta_fc:
                break
            s += 1
            mass = rest
        if best is None or e - s < best.spread:
            best = Interval(s + 1, e + 1, mass)
    if best is None:
        return NoForecast(math.fsum(p))
    return best


def interval_forecast_exhaustive(wtd, theta_fc: float) -> Interval | NoForecast:
    """Reference search over all intervals: minimum spread, then earliest start."""
    p = _probs(wtd).tolist()
    h = len(p)
    for spread in range(h):
        for s in range(h - spread):
            mass = math.fsum(p[s:s + spread + 1])
            if mass >= theta_fc:
                return Interval(s + 1, s + spread + 1, mass)
    return NoForecast(math.fsum(p))


def argmax_forecast(wtd) -> Point | NoForecast:
    """Earliest step of maximum probability."""
    p = _probs(wtd)
    if len(p) == 0 or not np.any(p > 0):
        return NoForecast(0.0)
    n = int(np.argmax(p))
    return Point(n + 1, float(p[n]))


def classify_next_w(wtd, w: int, theta_fc: float) -> Classification:
    p = _probs(wtd)
    if not 1 <= w <= len(p):
        raise ConfigError(f"window {w} outside 1..{len(p)}")
    score = math.fsum(p[:w].tolist())
    return Classification(score >= theta_fc, score)


# ---------------------------------------------------------------------------
# mean baseline


@dataclass
class MeanBaseline:
    """Observed waits to the next final state, grouped by the state they start from."""

    waits: dict[int, list[int]] = field(default_factory=dict)

    def mean(self, state: int) -> float | None:
        w = self.waits.get(state)
        return sum(w) / len(w) if w else None

    def forecast(self, state: int) -> Point | NoForecast:
        mu = self.mean(state)
        if mu is None:
            return NoForecast(0.0)
        return Point(int(math.floor(mu + 0.5)), 1.0)

    def histogram(self, state: int, h: int) -> np.ndarray:
        """Empirical waiting-time distribution (waits beyond ``h`` count as residual)."""
        out = np.zeros(h, dtype=np.float64)
        w = self.waits.get(state)
        if not w:
            return out
        arr = np.asarray(w)
        arr = arr[arr <= h]
        np.add.at(out, arr - 1, 1.0)
        return out / len(w)


def mean_baseline_train(dsfa: Dsfa, runs: Sequence[Sequence[int]]) -> MeanBaseline:
    """Record, for each visit of a state, the number of steps until the next final entry.

    ``runs`` holds one symbol sequence per partition; each starts at the
    DSFA start state, which counts as a visit. Visits with no later final
    state are censored and ignored.
    """
    model = MeanBaseline()
    table = dsfa.table
    for syms in runs:
        states = [dsfa.start]
        q = dsfa.start
        for sym in syms:
            q = int(table[q, sym])
            states.append(q)
        finals = [i for i, s in enumerate(states) if i > 0 and dsfa.finals[s]]
        j = 0
        for i, s in enumerate(states):
            while j < len(finals) and finals[j] <= i:
                j += 1
            if j == len(finals):
                break
            model.waits.setdefault(s, []).append(finals[j] - i)
    return model


def mean_baseline_forecast(model: MeanBaseline, state: int) -> Point | NoForecast:
    return model.forecast(state)


def make_forecast(wtd, fc: ForecastConfig) -> Interval | Point | Classification | NoForecast:
    """The forecast of the kind selected in ``fc``.

    Interval forecasts wider than ``fc.max_spread`` (when set) are withheld.
    """
    if fc.kind == "point":
        return argmax_forecast(wtd)
    if fc.kind == "classification":
        return classify_next_w(wtd, fc.w, fc.theta_fc)
    f = interval_forecast(wtd, fc.theta_fc)
    if isinstance(f, Interval) and fc.max_spread is not None and f.spread > fc.max_spread:
        return NoForecast(f.probability)
    return f


def precompute_forecast_table(wtds: dict[int, np.ndarray] | np.ndarray, fc: ForecastConfig) -> dict[int, object]:
    """Forecast for every state with a distribution, computed once."""
    items = enumerate(wtds) if isinstance(wtds, np.ndarray) else wtds.items()
    return {int(k): make_forecast(p, fc) for k, p in items}
