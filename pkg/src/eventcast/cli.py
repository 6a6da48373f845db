"""Command-line interface.

Exit codes: 0 ok, 1 input/output, 2 configuration or parse error,
3 state budget exceeded, 4 internal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Any

import numpy as np

from .automata import Symbolised, recognize, symbolise
from .config import CompiledPattern, PatternConfig, compile_pattern
from .engine import MODES, Timing, engine_from_json, model_to_json, split_runs, train_engine
from .errors import ConfigError, EventcastError
from .eval import classification_run, measure_throughput, regression_run, sde_log_loss
from .forecast import Classification, ForecastConfig, Interval, NoForecast, Point
from .learning import LearnConfig, dumps_model, learn_runs
from .streams import (GeneratorConfig, enrich, generate_fraud_dataset, read_events, resample_fixed_interval,
                      split_train_test, write_events, write_ground_truth)

# manifest key -> (section, attribute)
LEARN_KEYS = {"order": "m", "alpha": "alpha", "theta1": "theta1", "theta2": "theta2",
              "maxStates": "max_states", "full": "full", "minCount": "min_count"}
FORECAST_KEYS = {"thetaFc": "theta_fc", "w": "w", "horizon": "horizon", "cutoff": "cutoff",
                 "maxSpread": "max_spread", "kind": "kind"}


def _write_json(path: str | Path, payload: Any) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(payload) + "\n")


def load_manifest(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            m = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    known = {"pattern", "data", "train", "test", "trainFraction", "mode", "learn", "forecast", "output", "seed"}
    unknown = set(m) - known
    if unknown:
        raise ConfigError(f"unknown manifest keys: {sorted(unknown)}")
    base = Path(path).parent
    for key in ("pattern", "data", "train", "test", "output"):
        if key in m and not os.path.isabs(m[key]):
            m[key] = str(base / m[key])
    for key in ("pattern", "data", "train", "test"):
        if key in m and not os.path.exists(m[key]):
            raise ConfigError(f"manifest refers to a missing file: {m[key]}")
    return m


def _learn_config(args, manifest: dict) -> LearnConfig:
    d = {}
    for k, v in manifest.get("learn", {}).items():
        if k not in LEARN_KEYS:
            raise ConfigError(f"unknown learn key {k!r}")
        d[LEARN_KEYS[k]] = v
    for flag, attr in (("order", "m"), ("alpha", "alpha"), ("theta1", "theta1"), ("theta2", "theta2"),
                       ("max_states", "max_states")):
        v = getattr(args, flag, None)
        if v is not None:
            d[attr] = v
    return LearnConfig(**d)


def _forecast_config(args, manifest: dict) -> ForecastConfig:
    d = {}
    for k, v in manifest.get("forecast", {}).items():
        if k not in FORECAST_KEYS:
            raise ConfigError(f"unknown forecast key {k!r}")
        d[FORECAST_KEYS[k]] = v
    for flag, attr in (("theta_fc", "theta_fc"), ("w", "w"), ("horizon", "horizon"), ("cutoff", "cutoff"),
                       ("max_spread", "max_spread"), ("kind", "kind")):
        v = getattr(args, flag, None)
        if v is not None:
            d[attr] = v
    if "w" in d and "horizon" not in d:
        d["horizon"] = max(d["w"], ForecastConfig().horizon)
    return ForecastConfig(**d)


def _pick(args, manifest: dict, flag: str, key: str, default=None):
    v = getattr(args, flag, None)
    if v is not None:
        return v
    return manifest.get(key, default)


def _compile(path: str) -> CompiledPattern:
    return compile_pattern(PatternConfig.load(path))


def _split_events(args, manifest: dict, cp: CompiledPattern, part: str) -> tuple[list, int]:
    """Events of the ``part`` ("train" or "test") portion, from explicit files or a sequential split."""
    explicit = _pick(args, manifest, part, part)
    if explicit:
        res = read_events(explicit)
        return enrich(res.events, cp.config.enrich), res.rejects
    data_path = _pick(args, manifest, "data", "data")
    if not data_path:
        raise ConfigError(f"give --data or --{part}")
    res = read_events(data_path)
    events = enrich(res.events, cp.config.enrich)
    frac = float(_pick(args, manifest, "train_fraction", "trainFraction", 0.75))
    train, test = split_train_test(events, frac)
    return (train if part == "train" else test), res.rejects


def _train_test(args, manifest: dict, cp: CompiledPattern) -> tuple[Symbolised, Symbolised, dict]:
    train, r1 = _split_events(args, manifest, cp, "train")
    test, r2 = _split_events(args, manifest, cp, "test")
    same = not _pick(args, manifest, "train", "train") and not _pick(args, manifest, "test", "test")
    return (symbolise(train, cp.minterms), symbolise(test, cp.minterms),
            {"rejects": r1 if same else r1 + r2})


# ---------------------------------------------------------------------------
# commands


def cmd_compile(args) -> int:
    cfg = PatternConfig.load(args.pattern)
    cp = compile_pattern(cfg, args.max_states or 1200)
    report = cp.dsfa.to_json()
    report["minterms"] = len(cp.minterms)
    if args.out:
        _write_json(args.out, report)
    print(f"states: {cp.dsfa.n_states}")
    print(f"minterms: {len(cp.minterms)}")
    for m in cp.minterms:
        print(f"  {m.id}: {m.describe()}")
    return 0


def cmd_recognize(args) -> int:
    cp = _compile(args.pattern)
    res = read_events(args.data)
    events = enrich(res.events, cp.config.enrich)
    rec = recognize(cp.dsfa, symbolise(events, cp.minterms))
    out = sys.stdout if args.out is None else open(args.out, "w", newline="", encoding="utf-8")
    try:
        w = csv.writer(out)
        w.writerow(["partition", "eventIndex", "timestamp"])
        for i in rec.match_positions().tolist():
            w.writerow([events[i].partition, i, events[i].timestamp])
    finally:
        if out is not sys.stdout:
            out.close()
    print(f"matches: {int(rec.is_match.sum())}  rejects: {res.rejects}  unmatched events: {rec.stream.skipped}",
          file=sys.stderr)
    return 0


def cmd_learn(args) -> int:
    manifest = load_manifest(args.manifest)
    pattern = _pick(args, manifest, "pattern", "pattern")
    if not pattern:
        raise ConfigError("no pattern given")
    t0 = time.perf_counter()
    cp = _compile(pattern)
    train, rejects = _split_events(args, manifest, cp, "train")
    stream = symbolise(train, cp.minterms)
    extra = time.perf_counter() - t0
    mode = _pick(args, manifest, "mode", "mode", "psa-embedding")
    model = train_engine(cp.dsfa, split_runs(stream), mode, _learn_config(args, manifest),
                         _forecast_config(args, manifest))
    model.timing.extra_time = extra
    payload = model_to_json(model, cp.config.to_dict())
    out = args.out or os.path.join(manifest.get("output", "."), "model.json")
    _write_json(out, payload)
    print(json.dumps({"model": out, **payload["summary"], "timing": payload["timing"], "rejects": rejects}))
    return 0


def _forecast_row(f) -> tuple[str, Any, Any, float]:
    if isinstance(f, Interval):
        return "interval", f.start, f.end, f.probability
    if isinstance(f, Point):
        return "point", f.n, f.n, f.probability
    if isinstance(f, Classification):
        return "classification", int(f.positive), "", f.probability
    return "none", "", "", f.probability if isinstance(f, NoForecast) else 0.0


def cmd_forecast(args) -> int:
    manifest = load_manifest(args.manifest)
    model_path = args.model or os.path.join(manifest.get("output", "."), "model.json")
    try:
        with open(model_path, encoding="utf-8") as fh:
            model = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{model_path}: invalid JSON: {exc}") from None
    cp = compile_pattern(PatternConfig.from_dict(model["pattern"]))
    fc = _forecast_config(args, {"forecast": {k: model["forecast"][v] for k, v in FORECAST_KEYS.items()}})
    engine = engine_from_json(model, cp.dsfa, fc)
    if args.data:
        res = read_events(args.data)
        events, rejects = enrich(res.events, cp.config.enrich), res.rejects
    else:
        events, rejects = _split_events(args, manifest, cp, "test")
    stream = symbolise(events, cp.minterms)
    run = engine.run(stream)
    out = args.out or os.path.join(manifest.get("output", "."), "forecasts.csv")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["partition", "eventIndex", "state", "kind", "start", "end", "probability"])
        for i, (state, key) in enumerate(zip(run.states.tolist(), run.keys.tolist())):
            f = engine.forecast(key) if key >= 0 else NoForecast(0.0)
            kind, s, e, p = _forecast_row(f)
            w.writerow([stream.partitions[stream.parts[i]], int(stream.index[i]), state, kind, s, e, repr(float(p))])
    print(json.dumps({"forecasts": out, "events": len(stream), "rejects": rejects}))
    return 0


def cmd_evaluate_sde(args) -> int:
    manifest = load_manifest(args.manifest)
    cp = _compile(_pick(args, manifest, "pattern", "pattern"))
    tr, te, info = _train_test(args, manifest, cp)
    base = _learn_config(args, manifest)
    orders = args.orders if args.orders else [base.m]
    rows = []
    for m in orders:
        cfg = LearnConfig(**{**asdict(base), "m": m})
        t0 = time.perf_counter()
        pst = learn_runs(split_runs(tr), cp.dsfa.n_symbols, cfg)
        rows.append({"order": m, "avgLogLoss": sde_log_loss(pst, split_runs(te)), "pstNodes": len(pst.nodes),
                     "modelTime": time.perf_counter() - t0})
    report = {"symbols": cp.dsfa.n_symbols, "uniform": float(np.log2(cp.dsfa.n_symbols)), "results": rows, **info}
    _emit_report(args, manifest, report)
    return 0


def _train_for_eval(args, manifest, cp, tr, mode, learn_cfg, fc) -> tuple[Any, Timing]:
    model = train_engine(cp.dsfa, split_runs(tr), mode, learn_cfg, fc, precompute=True)
    return model.engine, model.timing


def cmd_evaluate_regression(args) -> int:
    manifest = load_manifest(args.manifest)
    cp = _compile(_pick(args, manifest, "pattern", "pattern"))
    tr, te, info = _train_test(args, manifest, cp)
    mode = _pick(args, manifest, "mode", "mode", "psa-embedding")
    engine, timing = _train_for_eval(args, manifest, cp, tr, mode, _learn_config(args, manifest),
                                     _forecast_config(args, manifest))
    rows = []
    for d in args.distances:
        rep = regression_run(engine, te, d)
        rows.append({"d": d, **{k: v for k, v in rep.to_dict().items() if k in
                                ("checkpoints", "rmse", "mae", "anois", "noForecast", "empty")}})
    _emit_report(args, manifest, {"mode": mode, "timing": timing.to_dict(), "results": rows, **info})
    return 0


def cmd_evaluate_classification(args) -> int:
    manifest = load_manifest(args.manifest)
    cp = _compile(_pick(args, manifest, "pattern", "pattern"))
    t0 = time.perf_counter()
    tr, te, info = _train_test(args, manifest, cp)
    extra = time.perf_counter() - t0
    mode = _pick(args, manifest, "mode", "mode", "psa-embedding")
    base = _learn_config(args, manifest)
    fc = _forecast_config(args, manifest)
    orders = args.orders if args.orders else [base.m]
    lo, hi = args.distance
    rows, rocs = [], []
    for m in orders:
        cfg = LearnConfig(**{**asdict(base), "m": m})
        engine, timing = _train_for_eval(args, manifest, cp, tr, mode, cfg, fc)
        timing.extra_time = extra
        rep = classification_run(engine, te, (lo, hi), fc.w)
        tput = measure_throughput(engine, te)
        rows.append({"order": m, "auc": rep.auc, "checkpoints": rep.checkpoints, "precision": rep.precision,
                     "recall": rep.recall, "specificity": rep.specificity, "tp": rep.tp, "fp": rep.fp,
                     "tn": rep.tn, "fn": rep.fn, "throughput": tput.events_per_second,
                     "timing": timing.to_dict(), "empty": rep.empty})
        rocs.extend((m, th, fpr, tpr) for th, fpr, tpr in rep.roc)
    report = {"mode": mode, "distance": [lo, hi], "w": fc.w, "thetaFc": fc.theta_fc, "results": rows, **info}
    path = _emit_report(args, manifest, report)
    stem = Path(path).with_suffix("")
    with open(f"{stem}_auc.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["order", "auc", "checkpoints"])
        for r in rows:
            w.writerow([r["order"], r["auc"], r["checkpoints"]])
    with open(f"{stem}_roc.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["order", "theta", "fpr", "tpr"])
        w.writerows(rocs)
    return 0


def _emit_report(args, manifest: dict, report: dict) -> str:
    out = args.out or os.path.join(manifest.get("output", "."), "report.json")
    _write_json(out, report)
    print(json.dumps(report if len(json.dumps(report)) < 4000 else {"report": out}))
    return out


def cmd_generate_fraud(args) -> int:
    d: dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON: {exc}") from None
    cfg = GeneratorConfig.from_dict(d)
    for flag, attr in (("total_events", "total_events"), ("cards", "num_cards"),
                       ("fraud_fraction", "fraud_fraction"), ("seed", "seed")):
        v = getattr(args, flag)
        if v is not None:
            setattr(cfg, attr, v)
    cfg.__post_init__()
    ds = generate_fraud_dataset(cfg)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    ds.write(args.out)
    truth = args.truth or str(Path(args.out).with_suffix("")) + "_truth.csv"
    write_ground_truth(truth, ds.truth)
    print(json.dumps({"events": len(ds.events), "plantedFraud": sum(g.kind == "fraud" for g in ds.truth),
                      "data": args.out, "truth": truth}))
    return 0


def cmd_resample(args) -> int:
    res = read_events(args.data)
    out = resample_fixed_interval(res.events, args.dt, args.max_gap)
    write_events(args.out, out)
    print(json.dumps({"input": len(res.events), "output": len(out), "rejects": res.rejects}))
    return 0


# ---------------------------------------------------------------------------
# parser


def _learn_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--order", type=int, help="maximum context length m")
    p.add_argument("--alpha", type=float, help="smoothing mass spread over the alphabet")
    p.add_argument("--theta1", type=float, help="minimum conditional probability of a distinguishing symbol")
    p.add_argument("--theta2", type=float, help="minimum ratio against the parent context (> 1)")
    p.add_argument("--max-states", type=int, help="state budget of the suffix automaton / embedding")


def _forecast_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta-fc", type=float, help="forecast confidence threshold")
    p.add_argument("--w", type=int, help="classification window")
    p.add_argument("--horizon", type=int, help="waiting-time horizon h")
    p.add_argument("--cutoff", type=float, help="path pruning threshold for pst-direct")
    p.add_argument("--max-spread", type=int, help="withhold intervals wider than this")
    p.add_argument("--kind", choices=("interval", "point", "classification"), help="forecast type")


def _data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", help="run manifest (JSON); flags override its fields")
    p.add_argument("--pattern", help="pattern config (JSON)")
    p.add_argument("--data", help="event CSV, split sequentially into train and test")
    p.add_argument("--train", help="training event CSV")
    p.add_argument("--test", help="test event CSV")
    p.add_argument("--train-fraction", type=float, help="share of --data used for training (default 0.75)")
    p.add_argument("--mode", choices=MODES, help="engine")
    p.add_argument("--seed", type=int, help="seed (recorded; all stages are deterministic)")
    p.add_argument("--out", help="output file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eventcast", description="Complex event forecasting.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a pattern into a DSFA and report it")
    p.add_argument("pattern")
    p.add_argument("--out", help="write the DSFA as JSON")
    p.add_argument("--max-states", type=int, help="determinisation state budget")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("recognize", help="report the events at which the pattern is detected")
    p.add_argument("--pattern", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("learn", help="learn a stream model and write model.json")
    _data_flags(p)
    _learn_flags(p)
    _forecast_flags(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("forecast", help="emit a forecast per event as CSV")
    p.add_argument("--manifest")
    p.add_argument("--model")
    p.add_argument("--data", help="event CSV to forecast on (default: the manifest's test portion)")
    p.add_argument("--out")
    _forecast_flags(p)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("evaluate-sde", help="average log-loss of next-symbol prediction")
    _data_flags(p)
    _learn_flags(p)
    p.add_argument("--orders", type=int, nargs="+", help="orders to compare")
    p.set_defaults(func=cmd_evaluate_sde)

    p = sub.add_parser("evaluate-regression", help="RMSE, MAE and ANOIS at d events before each match")
    _data_flags(p)
    _learn_flags(p)
    _forecast_flags(p)
    p.add_argument("--distances", type=int, nargs="+", default=[1, 2, 3, 4, 5], help="values of d")
    p.set_defaults(func=cmd_evaluate_regression)

    p = sub.add_parser("evaluate-classification", help="ROC and AUC of CE-within-w forecasts")
    _data_flags(p)
    _learn_flags(p)
    _forecast_flags(p)
    p.add_argument("--orders", type=int, nargs="+", help="orders to compare")
    p.add_argument("--distance", type=float, nargs=2, default=[0.2, 0.4], metavar=("LO", "HI"),
                   help="range of normalised state distance")
    p.set_defaults(func=cmd_evaluate_classification)

    p = sub.add_parser("generate-fraud", help="synthetic card transactions with planted fraud runs")
    p.add_argument("--config", help="generator config (JSON)")
    p.add_argument("--total-events", type=int)
    p.add_argument("--cards", type=int)
    p.add_argument("--fraud-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="ground-truth CSV (default: <out>_truth.csv)")
    p.set_defaults(func=cmd_generate_fraud)

    p = sub.add_parser("resample", help="interpolate each partition onto a fixed time grid")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dt", type=int, default=60)
    p.add_argument("--max-gap", type=int)
    p.set_defaults(func=cmd_resample)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EventcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc!r}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - last resort
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
