from pathlib import Path

import numpy as np
import pytest

from eventcast.algebra import Event, register_predicate, unregister_predicate
from eventcast.automata import recognize
from eventcast.config import PatternConfig, compile_pattern
from eventcast.errors import ConfigError, EventError
from eventcast.streams import (
    GeneratorConfig, contiguous_folds, enrich, enrich_amount_diff, generate_fraud_dataset, haversine,
    read_events, read_ground_truth, resample_fixed_interval, split_train_test, within_distance, write_events,
)

FRAUD_PATTERN = Path(__file__).resolve().parents[1] / "patterns" / "fraud_pattern.json"


@pytest.fixture(scope="module")
def fraud():
    return generate_fraud_dataset(GeneratorConfig(total_events=20_000, num_cards=40, seed=3))


def test_csv_roundtrip(tmp_path, fraud):
    path = tmp_path / "events.csv"
    write_events(path, fraud.events[:2000])
    back = read_events(path, schema={"country": "str"})
    assert back.rejects == 0
    assert back.events == fraud.events[:2000]


def test_csv_rejects(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "timestamp,partition,speed\n"
        "1,v,2.5\n"
        "2,v\n"
        "x,v,3\n"
        "3,v,fast\n"
        "2,v,4\n"
        "1,v,4\n"
        "1,w,4\n",
        encoding="utf-8",
    )
    res = read_events(path, schema={"speed": "float"})
    assert [e.timestamp for e in res.events] == [1, 2, 1]
    assert res.events[1]["speed"] == 4.0
    assert res.rejects == 4
    assert res.reasons == {"field count": 1, "timestamp": 1, "value": 1, "out of order": 1}


def test_csv_errors(tmp_path):
    with pytest.raises(EventError):
        read_events(tmp_path / "missing.csv")
    p = tmp_path / "nots.csv"
    p.write_text("time,partition\n1,a\n", encoding="utf-8")
    with pytest.raises(EventError):
        read_events(p)


def test_amount_diff():
    evs = [Event(1, "c1", {"amount": 10.0}), Event(2, "c2", {"amount": 7.0}), Event(3, "c1", {"amount": 50.0}),
           Event(4, "c2", {"amount": 5.0})]
    diffs = [e["amountDiff"] for e in enrich_amount_diff(evs)]
    assert diffs == [0.0, 0.0, 40.0, -2.0]
    assert [e["amountDiff"] for e in enrich(evs, ["amountDiff"])] == diffs
    with pytest.raises(ConfigError):
        enrich(evs, ["speedDiff"])


def test_resample_midpoint():
    evs = [Event(0, "v", {"x": 0.0, "tag": "a"}), Event(120, "v", {"x": 2.0, "tag": "b"})]
    out = resample_fixed_interval(evs, 60)
    assert [(e.timestamp, e["x"], e["tag"]) for e in out] == [(0, 0.0, "a"), (60, 1.0, "a"), (120, 2.0, "b")]


def test_resample_gap_break():
    evs = [Event(0, "v", {"x": 0.0}), Event(86_400, "v", {"x": 5.0})]
    out = resample_fixed_interval(evs, 60, max_gap=3600)
    assert out == evs


def test_resample_regular_stream_unchanged():
    evs = [Event(60 * i, "v", {"x": float(i * i)}) for i in range(6)]
    assert resample_fixed_interval(evs, 60) == evs


def test_resample_endpoints_and_order():
    rng = np.random.default_rng(0)
    evs = []
    for p in ("a", "b"):
        t = 0
        for _ in range(30):
            t += int(rng.integers(1, 200))
            evs.append(Event(t, p, {"x": float(rng.normal())}))
    evs.sort(key=lambda e: e.timestamp)
    out = resample_fixed_interval(evs, 60, max_gap=150)
    ts = [e.timestamp for e in out]
    assert ts == sorted(ts)
    for p in ("a", "b"):
        orig = [e for e in evs if e.partition == p]
        mine = [e for e in out if e.partition == p]
        assert mine[0] == orig[0] and mine[-1] == orig[-1]
    with pytest.raises(ConfigError):
        resample_fixed_interval(evs, 0)


def test_haversine_predicate():
    assert haversine(48.38, -4.49, 48.38, -4.49) == 0.0
    assert haversine(0, 0, 0, 1) == pytest.approx(111.2, abs=0.1)
    p = register_predicate("nearBrest", within_distance(48.38, -4.49, 5.0))
    try:
        cp = compile_pattern(PatternConfig("nearBrest ; nearBrest", {}))
        evs = [Event(1, "v", {"lat": 48.39, "lon": -4.48}), Event(2, "v", {"lat": 48.40, "lon": -4.47})]
        assert len(recognize(cp.dsfa, evs).match_positions()) == 1
    finally:
        unregister_predicate("nearBrest")
    assert p.name == "nearBrest"


def test_generator_is_deterministic(tmp_path):
    cfg = GeneratorConfig(total_events=3000, num_cards=10, seed=11)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    generate_fraud_dataset(cfg).write(a, tmp_path / "ta.csv")
    generate_fraud_dataset(cfg).write(b, tmp_path / "tb.csv")
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "ta.csv").read_bytes() == (tmp_path / "tb.csv").read_bytes()
    other = tmp_path / "c.csv"
    generate_fraud_dataset(GeneratorConfig(total_events=3000, num_cards=10, seed=12)).write(other)
    assert other.read_bytes() != a.read_bytes()


def test_generator_shape(fraud, tmp_path):
    assert len(fraud.events) == 20_000
    assert len({e.partition for e in fraud.events}) == 40
    n_fraud = sum(g.kind == "fraud" for g in fraud.truth)
    share = 8 * n_fraud / len(fraud.events)
    assert 0.15 < share < 0.25
    fraud.write(tmp_path / "d.csv", tmp_path / "t.csv")
    assert read_ground_truth(tmp_path / "t.csv") == fraud.truth


def test_fraud_runs_have_seven_large_steps(fraud):
    evs = enrich_amount_diff(fraud.events)
    by_card: dict[str, list[int]] = {}
    for i, e in enumerate(evs):
        by_card.setdefault(e.partition, []).append(i)
    for g in fraud.truth:
        if g.kind != "fraud":
            continue
        idx = by_card[g.partition]
        k = idx.index(g.match_end_index)
        diffs = [evs[j]["amountDiff"] for j in idx[k - 6:k + 1]]
        assert len(diffs) == 7 and all(d > 100 for d in diffs)


def test_planted_fraud_is_recognised(fraud):
    cfg = PatternConfig.load(FRAUD_PATTERN)
    cp = compile_pattern(cfg)
    evs = enrich(fraud.events, cfg.enrich)
    matched = set(recognize(cp.dsfa, evs).match_positions().tolist())
    planted = [g.match_end_index for g in fraud.truth if g.kind == "fraud"]
    assert planted and all(i in matched for i in planted)


def test_generator_config_checks():
    with pytest.raises(ConfigError):
        GeneratorConfig(fraud_fraction=1.2)
    with pytest.raises(ConfigError):
        GeneratorConfig(fraud_fraction=0.6, genuine_fraction=0.6)
    with pytest.raises(ConfigError):
        GeneratorConfig.from_dict({"cards": 3})
    assert GeneratorConfig.from_dict({"numCards": 3, "seed": 4}).num_cards == 3


def test_splits():
    evs = [Event(i, "p", {}) for i in range(10)]
    train, test = split_train_test(evs, 0.7)
    assert train == evs[:7] and test == evs[7:]
    folds = contiguous_folds(evs, 4)
    assert len(folds) == 4
    assert sorted(e.timestamp for _, t in folds for e in t) == list(range(10))
    for train, test in folds:
        assert len(train) + len(test) == 10
