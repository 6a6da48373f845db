"""Forecasting engines: a pattern automaton combined with a model of the symbol stream.

Every engine maps a symbolised stream to one forecast key per event. A key
identifies everything the waiting-time distribution depends on, so
distributions and forecasts are computed once per key and looked up after.
Key ``-1`` means that no forecast can be made yet.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .automata import Dsfa, Symbolised, run_dsfa
from .embedding import Embedding, embed, partition_matrix
from .errors import BudgetError, ConfigError, InvariantError
from .forecast import (ContextChain, ContextModel, ForecastConfig, MeanBaseline, make_forecast,
                       mean_baseline_train, wtd_matrix_all)
from .learning import LearnConfig, PredictionSuffixTree, Psa, learn_runs, pst_to_psa

MODES = ("psa-embedding", "pst-direct", "full-order", "mean-baseline", "iid")
DEFAULT_MATRIX_BUDGET = 6000


@dataclass
class Timing:
    """Seconds spent per training stage."""

    model_time: float = 0.0
    wt_time: float = 0.0
    in_time: float = 0.0
    extra_time: float = 0.0

    def to_dict(self) -> dict[str, float]:
        return {"modelTime": self.model_time, "wtTime": self.wt_time,
                "inTime": self.in_time, "extraTime": self.extra_time}


@dataclass
class EngineRun:
    states: np.ndarray
    keys: np.ndarray


def split_runs(stream: Symbolised) -> list[np.ndarray]:
    """Symbol sequence of each partition, in partition-code order."""
    order = np.argsort(stream.parts, kind="stable")
    bounds = np.searchsorted(stream.parts[order], np.arange(len(stream.partitions) + 1))
    syms = stream.symbols[order]
    return [syms[bounds[i]:bounds[i + 1]] for i in range(len(stream.partitions))]


class Engine:
    mode = ""

    def __init__(self, dsfa: Dsfa, fc: ForecastConfig):
        self.dsfa = dsfa
        self.fc = fc
        self._wtd: dict[int, np.ndarray] = {}
        self._forecasts: dict[int, object] = {}

    def run(self, stream: Symbolised) -> EngineRun:
        raise NotImplementedError

    def keys(self) -> list[int]:
        """Every key the engine can produce on some stream."""
        raise NotImplementedError

    def key_state(self, key: int) -> int:
        """DSFA state of a key."""
        raise NotImplementedError

    def _compute_wtd(self, key: int) -> np.ndarray:
        raise NotImplementedError

    def wtd(self, key: int) -> np.ndarray:
        p = self._wtd.get(key)
        if p is None:
            p = self._wtd[key] = self._compute_wtd(key)
        return p

    def forecast(self, key: int):
        f = self._forecasts.get(key)
        if f is None:
            f = self._forecasts[key] = make_forecast(self.wtd(key), self.fc)
        return f

    def precompute(self, keys: Sequence[int] | None = None, timing: Timing | None = None) -> Timing:
        """Compute distributions, then forecasts, for ``keys`` (default: all)."""
        timing = timing or Timing()
        keys = self.keys() if keys is None else list(keys)
        t0 = time.perf_counter()
        for k in keys:
            self.wtd(k)
        t1 = time.perf_counter()
        for k in keys:
            self.forecast(k)
        t2 = time.perf_counter()
        timing.wt_time += t1 - t0
        timing.in_time += t2 - t1
        return timing

    def describe(self) -> dict:
        return {"mode": self.mode, "dsfaStates": self.dsfa.n_states, "symbols": self.dsfa.n_symbols}

    def to_json(self) -> dict:
        raise NotImplementedError


class PsaEngine(Engine):
    """Embedding of a suffix automaton in the DSFA; distributions by the matrix method.

    Before a partition has read enough symbols to identify a suffix-automaton
    state it is kept in a transient state (DSFA state, buffered symbols).
    Transient states are extra rows of one lookup table, so a single table
    walk tracks both phases.
    """

    mode = "psa-embedding"

    def __init__(self, dsfa: Dsfa, pst: PredictionSuffixTree, psa: Psa, fc: ForecastConfig,
                 max_states: int = 100_000, matrix_budget: int = DEFAULT_MATRIX_BUDGET):
        super().__init__(dsfa, fc)
        self.pst = pst
        self.psa = psa
        self.emb: Embedding = embed(dsfa, psa, max_states)
        if self.emb.n_states > matrix_budget:
            raise BudgetError("embedding matrix", matrix_budget)
        self._build_table()
        self._matrix: np.ndarray | None = None

    def _build_table(self) -> None:
        emb, psa, dsfa = self.emb, self.psa, self.dsfa
        t = dsfa.n_symbols
        n = emb.n_states
        transient: dict[tuple[int, tuple[int, ...]], int] = {}
        rows: list[list[int]] = []
        pending: list[tuple[int, tuple[int, ...]]] = []

        def locate(r: int, buf: tuple[int, ...]) -> int:
            s = psa.state_of(buf)
            if s is not None:
                q = emb.index.get((r, s))
                if q is None:
                    raise InvariantError(f"pair {(r, s)} missing from the embedding")
                return q
            key = (r, buf)
            if key not in transient:
                transient[key] = n + len(transient)
                pending.append(key)
            return transient[key]

        self.initial = locate(dsfa.start, ())
        i = 0
        while i < len(pending):
            r, buf = pending[i]
            rows.append([locate(int(dsfa.table[r, sym]), buf + (sym,)) for sym in range(t)])
            i += 1
        table = np.empty((n + len(rows), t), dtype=np.int32)
        table[:n] = emb.delta
        if rows:
            table[n:] = rows
        self.table = table
        self.aug_state = np.concatenate([emb.dsfa_states, np.array([r for r, _ in pending], dtype=np.int32)])
        self.aug_key = np.concatenate([np.arange(n, dtype=np.int64), np.full(len(pending), -1, dtype=np.int64)])

    def run(self, stream: Symbolised) -> EngineRun:
        current = np.full(len(stream.partitions), self.initial, dtype=np.int32)
        aug = kernels.run_partitioned(self.table, stream.symbols, stream.parts, current)
        return EngineRun(self.aug_state[aug], self.aug_key[aug])

    def keys(self) -> list[int]:
        return list(range(self.emb.n_states))

    def key_state(self, key: int) -> int:
        return self.emb.pairs[key][0]

    def all_wtds(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = wtd_matrix_all(partition_matrix(self.emb), self.fc.horizon)
        return self._matrix

    def _compute_wtd(self, key: int) -> np.ndarray:
        return self.all_wtds()[key]

    def describe(self) -> dict:
        d = super().describe()
        d.update(pstNodes=len(self.pst.nodes), psaStates=self.psa.n_states, embeddingStates=self.emb.n_states,
                 order=self.pst.order)
        return d

    def to_json(self) -> dict:
        return {"pst": self.pst.to_json(), "psa": self.psa.to_json()}


class PstEngine(Engine):
    """Distributions estimated from the tree directly, one per (DSFA state, context key)."""

    mode = "pst-direct"

    def __init__(self, dsfa: Dsfa, pst: PredictionSuffixTree, fc: ForecastConfig):
        super().__init__(dsfa, fc)
        self.pst = pst
        self.model = ContextModel(pst)
        self.chain = ContextChain(dsfa, self.model)
        self.initial = self.chain.config_id(dsfa.start, ())
        # expanding up front fixes the configuration ids independently of the streams seen later
        self._reachable = self.chain.closure(self.initial)

    def run(self, stream: Symbolised) -> EngineRun:
        n_parts = len(stream.partitions)
        table = self.dsfa.table.tolist()
        order = self.model.order
        key_of = self.model.key_of
        config_id = self.chain.config_id
        rs = [self.dsfa.start] * n_parts
        bufs: list[tuple[int, ...]] = [()] * n_parts
        n = len(stream)
        states = np.empty(n, dtype=np.int32)
        keys = np.empty(n, dtype=np.int64)
        for i, (p, sym) in enumerate(zip(stream.parts.tolist(), stream.symbols.tolist())):
            r = rs[p] = table[rs[p]][sym]
            buf = bufs[p] + (sym,)
            if len(buf) > order:
                buf = buf[len(buf) - order:]
            bufs[p] = buf
            states[i] = r
            keys[i] = config_id(r, key_of(buf))
        return EngineRun(states, keys)

    def keys(self) -> list[int]:
        return list(self._reachable)

    def key_state(self, key: int) -> int:
        return self.chain.configs[key][0]

    def _compute_wtd(self, key: int) -> np.ndarray:
        return self.chain.wtd(key, self.fc.horizon, self.fc.cutoff)

    def describe(self) -> dict:
        d = super().describe()
        d.update(pstNodes=len(self.pst.nodes), order=self.pst.order, configurations=len(self.chain))
        return d

    def to_json(self) -> dict:
        return {"pst": self.pst.to_json()}


class MeanEngine(Engine):
    """Average observed wait per DSFA state; distributions are the observed wait histograms."""

    mode = "mean-baseline"

    def __init__(self, dsfa: Dsfa, baseline: MeanBaseline, fc: ForecastConfig):
        super().__init__(dsfa, fc)
        self.baseline = baseline

    def run(self, stream: Symbolised) -> EngineRun:
        states = run_dsfa(self.dsfa, stream)
        return EngineRun(states, states.astype(np.int64))

    def keys(self) -> list[int]:
        return list(range(self.dsfa.n_states))

    def key_state(self, key: int) -> int:
        return key

    def _compute_wtd(self, key: int) -> np.ndarray:
        return self.baseline.histogram(key, self.fc.horizon)

    def forecast(self, key: int):
        if self.fc.kind == "point":
            f = self._forecasts.get(key)
            if f is None:
                f = self._forecasts[key] = self.baseline.forecast(key)
            return f
        return super().forecast(key)

    def to_json(self) -> dict:
        return {"waits": {str(k): v for k, v in sorted(self.baseline.waits.items())}}


# ---------------------------------------------------------------------------
# training and model files


@dataclass
class TrainedModel:
    engine: Engine
    timing: Timing
    learn: LearnConfig = field(default_factory=LearnConfig)


def learn_config_for(mode: str, cfg: LearnConfig) -> LearnConfig:
    """Mode-specific overrides: full-order keeps every context, iid has order 0."""
    if mode not in MODES:
        raise ConfigError(f"unknown engine mode {mode!r}; known: {MODES}")
    d = asdict(cfg)
    if mode == "full-order":
        d["full"] = True
    elif mode == "iid":
        d["m"] = 0
    return LearnConfig(**d)


def train_engine(dsfa: Dsfa, runs: Sequence[Sequence[int]], mode: str, learn_cfg: LearnConfig,
                 fc: ForecastConfig, precompute: bool = True) -> TrainedModel:
    """Learn the stream model for ``mode`` from per-partition symbol runs."""
    cfg = learn_config_for(mode, learn_cfg)
    timing = Timing()
    t0 = time.perf_counter()
    if mode == "mean-baseline":
        engine: Engine = MeanEngine(dsfa, mean_baseline_train(dsfa, runs), fc)
    else:
        pst = learn_runs(runs, dsfa.n_symbols, cfg)
        if mode == "pst-direct":
            engine = PstEngine(dsfa, pst, fc)
        else:
            psa = pst_to_psa(pst, runs, cfg.max_states)
            engine = PsaEngine(dsfa, pst, psa, fc, cfg.max_states)
            engine.mode = mode
    timing.model_time = time.perf_counter() - t0
    if precompute:
        engine.precompute(timing=timing)
    return TrainedModel(engine, timing, cfg)


def model_to_json(model: TrainedModel, pattern: dict) -> dict:
    e = model.engine
    return {
        "format": "eventcast-model/1",
        "mode": e.mode,
        "pattern": pattern,
        "learn": asdict(model.learn),
        "forecast": asdict(e.fc),
        "timing": model.timing.to_dict(),
        "summary": e.describe(),
        "model": e.to_json(),
    }


def engine_from_json(d: dict, dsfa: Dsfa, fc: ForecastConfig | None = None) -> Engine:
    """Rebuild an engine from a model file for an already compiled pattern."""
    if d.get("format") != "eventcast-model/1":
        raise ConfigError("not an eventcast model file")
    mode = d["mode"]
    fc = fc or ForecastConfig(**d["forecast"])
    body = d["model"]
    if mode == "mean-baseline":
        return MeanEngine(dsfa, MeanBaseline({int(k): list(v) for k, v in body["waits"].items()}), fc)
    pst = PredictionSuffixTree.from_json(body["pst"])
    if pst.n_symbols != dsfa.n_symbols:
        raise ConfigError("model alphabet does not match the pattern")
    if mode == "pst-direct":
        return PstEngine(dsfa, pst, fc)
    psa = Psa.from_json(body["psa"])
    engine = PsaEngine(dsfa, pst, psa, fc, int(d["learn"].get("max_states", 100_000)))
    engine.mode = mode
    return engine
