"""Evaluation harness: log-loss, regression and classification checkpoints, ROC, timing."""
from __future__ import annotations

import math
import time
import warnings
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .automata import Dsfa, Symbolised
from .engine import Engine, Timing
from .errors import ConfigError
from .forecast import Interval, NoForecast, Point
from .learning import PredictionSuffixTree

DEFAULT_THRESHOLDS = np.linspace(0.0, 1.0, 101)


@dataclass(frozen=True)
class Checkpoint:
    partition: int
    index: int          # position in the symbolised stream
    local: int          # position within the partition
    kind: str           # "regression" or "classification"
    label: float        # actual distance, or 1.0 / 0.0 for CE within w
    distance: float | None = None


@dataclass
class MetricsReport:
    checkpoints: int = 0
    rmse: float | None = None
    mae: float | None = None
    anois: float | None = None
    no_forecast: int = 0
    precision: float | None = None
    recall: float | None = None
    specificity: float | None = None
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    roc: list[tuple[float, float, float]] = field(default_factory=list)   # (theta, fpr, tpr)
    auc: float | None = None
    avg_log_loss: float | None = None
    throughput: float | None = None
    timing: dict[str, float] | None = None
    empty: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        keys = {"avg_log_loss": "avgLogLoss", "no_forecast": "noForecast"}
        return {keys.get(k, k): v for k, v in d.items()}


# ---------------------------------------------------------------------------
# point and interval errors


def rmse(forecasts: Sequence[float], actuals: Sequence[float]) -> float:
    if len(forecasts) != len(actuals):
        raise ValueError("forecasts and actuals differ in length")
    if not forecasts:
        raise ValueError("no checkpoints")
    return math.sqrt(math.fsum((f - y) ** 2 for f, y in zip(forecasts, actuals)) / len(forecasts))


def mae(forecasts: Sequence[float], actuals: Sequence[float]) -> float:
    if len(forecasts) != len(actuals):
        raise ValueError("forecasts and actuals differ in length")
    if not forecasts:
        raise ValueError("no checkpoints")
    return math.fsum(abs(f - y) for f, y in zip(forecasts, actuals)) / len(forecasts)


def nois(lower: float, upper: float, y: float, a: float) -> float:
    """Interval score: width plus 2/a times the distance by which ``y`` misses the interval."""
    if a < 0:
        raise ValueError("a must be non-negative")
    miss = (lower - y if y < lower else 0.0) + (y - upper if y > upper else 0.0)
    if a == 0:
        return math.inf if miss > 0 else float(upper - lower)
    return (upper - lower) + (2.0 / a) * miss


def anois(scores: Sequence[float]) -> float:
    if not scores:
        raise ValueError("no checkpoints")
    return math.fsum(scores) / len(scores)


# ---------------------------------------------------------------------------
# checkpoints


def regression_checkpoints(matches: Sequence[int], d: int, partition: int = 0) -> list[Checkpoint]:
    """One checkpoint ``d`` events before each match of one partition.

    ``matches`` are local positions in increasing order. A match gets no
    checkpoint when an earlier match lies fewer than ``d`` events before it,
    or when the checkpoint would fall before the first event.
    """
    if d < 1:
        raise ConfigError("d must be at least 1")
    out = []
    prev = None
    for k in matches:
        if (prev is None or k - prev >= d) and k - d >= 0:
            out.append(Checkpoint(partition, -1, k - d, "regression", float(d)))
        prev = k
    return out


def _partition_matches(stream: Symbolised, is_match: np.ndarray) -> list[list[int]]:
    out: list[list[int]] = [[] for _ in stream.partitions]
    for i in np.flatnonzero(is_match):
        out[stream.parts[i]].append(int(stream.local[i]))
    return out


def _global_index(stream: Symbolised) -> dict[tuple[int, int], int]:
    return {(int(p), int(l)): i for i, (p, l) in enumerate(zip(stream.parts, stream.local))}


def regression_run(engine: Engine, stream: Symbolised, d: int) -> MetricsReport:
    """Score interval (or point) forecasts emitted ``d`` events before each match."""
    run = engine.run(stream)
    matches = _partition_matches(stream, engine.dsfa.finals[run.states])
    where = _global_index(stream)
    a = 1.0 - engine.fc.theta_fc
    report = MetricsReport()
    preds, actual, scores = [], [], []
    for p, ms in enumerate(matches):
        for cp in regression_checkpoints(ms, d, p):
            i = where[(p, cp.local)]
            key = int(run.keys[i])
            report.checkpoints += 1
            f = engine.forecast(key) if key >= 0 else NoForecast(0.0)
            if isinstance(f, Interval):
                lo, hi = f.start, f.end
            elif isinstance(f, Point):
                lo = hi = f.n
            else:
                report.no_forecast += 1
                continue
            preds.append((lo + hi) / 2)
            actual.append(cp.label)
            scores.append(nois(lo, hi, cp.label, a))
    if preds:
        report.rmse = rmse(preds, actual)
        report.mae = mae(preds, actual)
        report.anois = anois(scores)
    else:
        report.empty = True
    return report


def state_expected_distance(dsfa: Dsfa) -> np.ndarray:
    """Shortest number of transitions to a final state, divided by the largest finite one.

    Finals get 0. States that cannot reach a final state get NaN (with a
    warning).
    """
    rev: dict[int, set[int]] = {}
    for q in range(dsfa.n_states):
        for r in dsfa.table[q].tolist():
            rev.setdefault(r, set()).add(q)
    dist = np.full(dsfa.n_states, -1, dtype=np.int64)
    queue = deque(int(q) for q in np.flatnonzero(dsfa.finals))
    for q in queue:
        dist[q] = 0
    while queue:
        q = queue.popleft()
        for p in rev.get(q, ()):
            if dist[p] < 0:
                dist[p] = dist[q] + 1
                queue.append(p)
    if dist[dsfa.start] < 0:
        raise ConfigError("no final state is reachable from the start state")
    out = np.full(dsfa.n_states, np.nan)
    ok = dist >= 0
    top = dist[ok].max()
    out[ok] = dist[ok] / top if top > 0 else 0.0
    if not ok.all():
        warnings.warn(f"{int((~ok).sum())} states cannot reach a final state and get no distance", stacklevel=2)
    return out


def classification_checkpoints(engine: Engine, stream: Symbolised, distance_range: tuple[float, float],
                               w: int, run=None) -> tuple[list[Checkpoint], np.ndarray]:
    """Events whose DSFA state lies in ``distance_range``, labelled by whether a
    match follows within the next ``w`` events of the same partition.

    Events with fewer than ``w`` later events in their partition, and events
    for which the engine cannot forecast yet, are skipped. Returns the
    checkpoints and the forecast key of each.
    """
    lo, hi = distance_range
    if not 0.0 <= lo <= hi <= 1.0:
        raise ConfigError("distance range must satisfy 0 <= lo <= hi <= 1")
    run = run if run is not None else engine.run(stream)
    dist = state_expected_distance(engine.dsfa)
    in_range = np.zeros(engine.dsfa.n_states, dtype=bool)
    ok = ~np.isnan(dist)
    in_range[ok] = (dist[ok] >= lo - 1e-12) & (dist[ok] <= hi + 1e-12)
    is_match = engine.dsfa.finals[run.states]
    parts = stream.parts.tolist()
    local = stream.local.tolist()
    sizes = np.bincount(stream.parts, minlength=len(stream.partitions)).tolist()
    # next match position (local) after each event, scanning backwards
    nxt_match = [math.inf] * len(stream.partitions)
    following = [math.inf] * len(stream)
    for i in range(len(stream) - 1, -1, -1):
        p = parts[i]
        following[i] = nxt_match[p]
        if is_match[i]:
            nxt_match[p] = local[i]
    cps, keys = [], []
    states = run.states.tolist()
    for i in np.flatnonzero(in_range[run.states] & (run.keys >= 0)).tolist():
        p, l = parts[i], local[i]
        if l + w >= sizes[p]:
            continue
        label = 1.0 if following[i] - l <= w else 0.0
        cps.append(Checkpoint(p, i, l, "classification", label, float(dist[states[i]])))
        keys.append(int(run.keys[i]))
    return cps, np.array(keys, dtype=np.int64)


# ---------------------------------------------------------------------------
# ROC


def confusion(scores: np.ndarray, labels: np.ndarray, theta: float) -> tuple[int, int, int, int]:
    pos = scores >= theta
    lab = labels.astype(bool)
    tp = int(np.sum(pos & lab))
    fp = int(np.sum(pos & ~lab))
    tn = int(np.sum(~pos & ~lab))
    fn = int(np.sum(~pos & lab))
    return tp, fp, tn, fn


def roc_curve(scores: Sequence[float], labels: Sequence[float],
              thresholds: Sequence[float] | None = None) -> list[tuple[float, float, float]]:
    """(theta, false positive rate, true positive rate) per threshold.

    Without ``thresholds`` every distinct score is used, which makes the
    trapezoid area equal to the pairwise ranking probability.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    if thresholds is None:
        thresholds = np.unique(s)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    out = []
    for th in thresholds:
        tp, fp, tn, fn = confusion(s, y, float(th))
        out.append((float(th), fp / n_neg if n_neg else 0.0, tp / n_pos if n_pos else 0.0))
    return out


def auc_trapezoid(roc: Sequence[tuple[float, float, float]]) -> float:
    pts = sorted({(0.0, 0.0), (1.0, 1.0)} | {(f, t) for _, f, t in roc})
    area = 0.0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        area += (x1 - x0) * (y0 + y1) / 2
    return area


def auc_pairwise(scores: Sequence[float], labels: Sequence[float]) -> float:
    """Probability that a random positive outscores a random negative (ties count half)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    pos, neg = s[y], s[~y]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("need both classes")
    gt = (pos[:, None] > neg[None, :]).sum()
    eq = (pos[:, None] == neg[None, :]).sum()
    return float((gt + 0.5 * eq) / (len(pos) * len(neg)))


def classification_run(engine: Engine, stream: Symbolised, distance_range: tuple[float, float],
                       w: int | None = None, thresholds: Sequence[float] | None = None) -> MetricsReport:
    """Score "CE within the next w events" at every checkpoint and sweep the threshold."""
    w = engine.fc.w if w is None else w
    if w > engine.fc.horizon:
        raise ConfigError("w exceeds the forecast horizon")
    thresholds = DEFAULT_THRESHOLDS if thresholds is None else np.asarray(thresholds)
    cps, keys = classification_checkpoints(engine, stream, distance_range, w)
    report = MetricsReport(checkpoints=len(cps))
    if not cps:
        report.empty = True
        return report
    score_of: dict[int, float] = {}
    for k in set(keys.tolist()):
        score_of[k] = math.fsum(engine.wtd(k)[:w].tolist())
    scores = np.array([score_of[k] for k in keys.tolist()])
    labels = np.array([c.label for c in cps])
    report.tp, report.fp, report.tn, report.fn = confusion(scores, labels, engine.fc.theta_fc)
    tp, fp, tn, fn = report.tp, report.fp, report.tn, report.fn
    report.precision = tp / (tp + fp) if tp + fp else None
    report.recall = tp / (tp + fn) if tp + fn else None
    report.specificity = tn / (tn + fp) if tn + fp else None
    report.roc = roc_curve(scores, labels, thresholds)
    if 0 < labels.sum() < len(labels):
        report.auc = auc_trapezoid(report.roc)
    return report


# ---------------------------------------------------------------------------
# log-loss and timing


def sde_log_loss(model: PredictionSuffixTree, runs: Sequence[Sequence[int]]) -> float:
    """Average -log2 probability of each symbol given its preceding context, over all runs."""
    total, n = 0.0, 0
    m = model.order
    for run in runs:
        run = [int(x) for x in run]
        for i, sym in enumerate(run):
            p = model.predict(run[max(0, i - m):i])[sym]
            if p <= 0.0:
                raise ValueError(f"symbol {sym} has probability zero")
            total -= math.log2(p)
        n += len(run)
    if n == 0:
        raise ValueError("log-loss needs a non-empty test stream")
    return total / n


@dataclass
class ThroughputReport:
    events: int
    seconds: float
    events_per_second: float
    valid: bool


def measure_throughput(engine: Engine, stream: Symbolised, repeats: int = 3) -> ThroughputReport:
    """Best of ``repeats`` timed passes of run-plus-forecast-lookup, after one warm-up pass.

    The warm-up fills the forecast cache for every key the stream visits.
    """
    n = len(stream)
    if n == 0:
        return ThroughputReport(0, 0.0, 0.0, False)
    run = engine.run(stream)
    seen = np.unique(run.keys)
    top = int(max(seen.max(), 0))
    table = np.empty(top + 2, dtype=object)
    for k in seen.tolist():
        if k >= 0:
            table[k] = engine.forecast(k)
    table[-1] = None
    best = math.inf
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        r = engine.run(stream)
        table[r.keys]
        best = min(best, time.perf_counter() - t0)
    return ThroughputReport(n, best, n / best if best > 0 else math.inf, True)


def measure_training(engine: Engine, keys: Sequence[int] | None = None) -> Timing:
    """Fresh distribution and forecast computation for ``keys`` (all by default), timed."""
    engine._wtd.clear()
    engine._forecasts.clear()
    if hasattr(engine, "_matrix"):
        engine._matrix = None
    return engine.precompute(keys)

