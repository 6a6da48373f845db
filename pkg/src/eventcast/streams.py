"""Event CSV ingestion, enrichment, resampling and the synthetic card-fraud generator."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .algebra import Event
from .errors import ConfigError, EventError

# ---------------------------------------------------------------------------
# CSV


@dataclass
class ReadResult:
    events: list[Event]
    rejects: int = 0
    reasons: dict[str, int] = field(default_factory=dict)
    columns: list[str] = field(default_factory=list)

    def reject(self, reason: str) -> None:
        self.rejects += 1
        self.reasons[reason] = self.reasons.get(reason, 0) + 1


def _parse_value(text: str, kind: str | None) -> Any:
    if kind == "str":
        return text
    if kind == "float":
        return float(text)
    if kind == "int":
        return int(text)
    try:
        return float(text)
    except ValueError:
        return text


def read_events(path: str | Path, schema: dict[str, str] | None = None,
                timestamp_column: str = "timestamp", partition_column: str = "partition") -> ReadResult:
    """Read an event CSV (header row, comma separated, UTF-8).

    Values that parse as numbers become floats unless ``schema`` says
    otherwise. Rows with the wrong number of fields, a bad timestamp or value,
    or a timestamp earlier than the previous one of the same partition are
    counted as rejects.
    """
    schema = schema or {}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise EventError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return ReadResult([])
        if timestamp_column not in header:
            raise EventError(f"{path}: no {timestamp_column!r} column", attribute=timestamp_column)
        ti = header.index(timestamp_column)
        pi = header.index(partition_column) if partition_column in header else None
        attrs = [(i, name) for i, name in enumerate(header) if i not in (ti, pi)]
        out = ReadResult([], columns=header)
        last: dict[str, int] = {}
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                out.reject("field count")
                continue
            try:
                ts = int(row[ti])
            except ValueError:
                out.reject("timestamp")
                continue
            part = row[pi] if pi is not None else ""
            try:
                values = {name: _parse_value(row[i], schema.get(name)) for i, name in attrs}
            except ValueError:
                out.reject("value")
                continue
            if part in last and ts < last[part]:
                out.reject("out of order")
                continue
            last[part] = ts
            out.events.append(Event(ts, part, values))
    return out


def _format(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_events(path: str | Path, events: Sequence[Event], columns: Sequence[str] | None = None) -> None:
    """Write events; floats use their shortest exact representation so reading back is lossless."""
    if columns is None:
        columns = []
        for e in events:
            for k in e.attributes:
                if k not in columns:
                    columns.append(k)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "partition", *columns])
        for e in events:
            w.writerow([e.timestamp, e.partition, *(_format(e.attributes.get(c, "")) for c in columns)])


# ---------------------------------------------------------------------------
# enrichment and resampling


def enrich_amount_diff(events: Iterable[Event], amount: str = "amount", name: str = "amountDiff") -> list[Event]:
    """Add the difference to the previous amount of the same partition (0 for the first)."""
    prev: dict[str, float] = {}
    out = []
    for e in events:
        a = float(e[amount])
        diff = a - prev[e.partition] if e.partition in prev else 0.0
        prev[e.partition] = a
        out.append(Event(e.timestamp, e.partition, {**e.attributes, name: diff}))
    return out


def enrich(events: Sequence[Event], names: Sequence[str]) -> list[Event]:
    events = list(events)
    for name in names:
        if name == "amountDiff":
            events = enrich_amount_diff(events)
        else:
            raise ConfigError(f"unknown enrichment {name!r}")
    return events


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def resample_fixed_interval(events: Sequence[Event], dt: int = 60, max_gap: int | None = None) -> list[Event]:
    """Per-partition linear interpolation onto a grid of step ``dt``.

    The grid starts at the first event of a partition. Numeric attributes are
    interpolated between the surrounding real events; other attributes are
    carried forward from the earlier one. A gap longer than ``max_gap`` ends
    the segment and a new grid starts at the next real event. The last event
    of each segment is kept even when it falls between grid points.
    """
    if dt <= 0:
        raise ConfigError("resampling interval must be positive")
    by_part: dict[str, list[Event]] = {}
    for e in events:
        by_part.setdefault(e.partition, []).append(e)
    out: list[tuple[int, int, Event]] = []
    seq = 0
    for part, evs in by_part.items():
        segments: list[list[Event]] = [[evs[0]]] if evs else []
        for prev, cur in zip(evs, evs[1:]):
            if max_gap is not None and cur.timestamp - prev.timestamp > max_gap:
                segments.append([cur])
            else:
                segments[-1].append(cur)
        for seg in segments:
            t = seg[0].timestamp
            j = 0
            while True:
                while j + 1 < len(seg) and seg[j + 1].timestamp <= t:
                    j += 1
                if j + 1 == len(seg):
                    break
                a, b = seg[j], seg[j + 1]
                if a.timestamp == t:
                    e = a
                else:
                    f = (t - a.timestamp) / (b.timestamp - a.timestamp)
                    attrs = {}
                    for k, v in a.attributes.items():
                        w = b.attributes.get(k)
                        attrs[k] = v + f * (w - v) if _is_number(v) and _is_number(w) else v
                    e = Event(t, part, attrs)
                out.append((t, seq, e))
                seq += 1
                t += dt
            # the loop stops at the first grid point not before the last event
            out.append((seg[-1].timestamp, seq, seg[-1]))
            seq += 1
    out.sort(key=lambda x: (x[0], x[1]))
    return [e for _, _, e in out]


def haversine(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in kilometres."""
    r = 6371.0088
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * r * math.asin(math.sqrt(a))


def within_distance(lat: float, lon: float, km: float, lat_attr: str = "lat", lon_attr: str = "lon"):
    """Predicate function for :func:`register_predicate`: event lies within ``km`` of a point."""
    def fn(e: Event) -> bool:
        return haversine(float(e[lat_attr]), float(e[lon_attr]), lat, lon) <= km
    return fn


# ---------------------------------------------------------------------------
# synthetic fraud data


@dataclass
class GeneratorConfig:
    """Shape of the synthetic card-transaction stream.

    Fraud runs are ``fraud_seq_len`` transactions whose amount grows by
    ``fraud_increment_min``..``fraud_increment_max`` each time. Genuine
    look-alike runs grow by ``genuine_increment_min``..``genuine_increment_max``
    and stop after 2 to ``fraud_seq_len - 1`` transactions. Everything else
    is background traffic with amounts uniform on [1, 500].
    ``fraud_fraction`` and ``genuine_fraction`` are the expected shares of
    events inside each kind of run.
    """

    total_events: int = 100_000
    num_cards: int = 100
    fraud_fraction: float = 0.2
    genuine_fraction: float = 0.2
    fraud_seq_len: int = 8
    fraud_increment_min: float = 100.0
    fraud_increment_max: float = 300.0
    genuine_increment_min: float = 0.0
    genuine_increment_max: float = 150.0
    background_min: float = 1.0
    background_max: float = 500.0
    countries: list[str] = field(default_factory=lambda: ["GR", "PT", "MA", "FR", "DE"])
    start_timestamp: int = 1_600_000_000
    seed: int = 0

    def __post_init__(self):
        if self.total_events < 0 or self.num_cards < 1:
            raise ConfigError("need a non-negative event count and at least one card")
        for name in ("fraud_fraction", "genuine_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.fraud_fraction + self.genuine_fraction > 1.0:
            raise ConfigError("fraud_fraction + genuine_fraction exceeds 1")
        if self.fraud_seq_len < 3:
            raise ConfigError("fraud_seq_len must be at least 3")
        if self.fraud_increment_min <= 0 or self.fraud_increment_max < self.fraud_increment_min:
            raise ConfigError("fraud increments must be positive and ordered")
        if self.genuine_increment_min < 0 or self.genuine_increment_max < self.genuine_increment_min:
            raise ConfigError("genuine increments must be non-negative and ordered")

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        keys = {"totalEvents": "total_events", "numCards": "num_cards", "fraudFraction": "fraud_fraction",
                "genuineFraction": "genuine_fraction", "fraudSeqLen": "fraud_seq_len",
                "fraudIncrementMin": "fraud_increment_min", "fraudIncrementMax": "fraud_increment_max",
                "genuineIncrementMin": "genuine_increment_min", "genuineIncrementMax": "genuine_increment_max",
                "backgroundMin": "background_min", "backgroundMax": "background_max",
                "countries": "countries", "startTimestamp": "start_timestamp", "seed": "seed"}
        unknown = set(d) - set(keys)
        if unknown:
            raise ConfigError(f"unknown generator keys: {sorted(unknown)}")
        return cls(**{keys[k]: v for k, v in d.items()})


@dataclass
class GroundTruth:
    partition: str
    match_end_index: int
    kind: str


@dataclass
class FraudDataset:
    events: list[Event]
    truth: list[GroundTruth]
    config: GeneratorConfig

    def write(self, path: str | Path, truth_path: str | Path | None = None) -> None:
        write_events(path, self.events, ["amount", "country"])
        if truth_path is not None:
            write_ground_truth(truth_path, self.truth)


def _cents(x: float) -> int:
    return int(round(x * 100))


def generate_fraud_dataset(cfg: GeneratorConfig) -> FraudDataset:
    """Plant fraud and look-alike runs per card, then interleave the cards at random.

    Amounts are whole cents, so the CSV text reproduces them exactly.
    """
    rng = np.random.default_rng(cfg.seed)
    L = cfg.fraud_seq_len
    mean_genuine = (2 + L - 1) / 2
    shares = np.array([cfg.fraud_fraction / L, cfg.genuine_fraction / mean_genuine,
                       1.0 - cfg.fraud_fraction - cfg.genuine_fraction])
    probs = shares / shares.sum()
    per_card = np.full(cfg.num_cards, cfg.total_events // cfg.num_cards)
    per_card[: cfg.total_events % cfg.num_cards] += 1
    names = [f"card{c:04d}" for c in range(cfg.num_cards)]
    lo, hi = _cents(cfg.background_min), _cents(cfg.background_max)
    cards: list[list[tuple[int, str, str]]] = []   # (cents, country, kind)
    for c in range(cfg.num_cards):
        n = int(per_card[c])
        evs: list[tuple[int, str, str]] = []
        country = cfg.countries[int(rng.integers(len(cfg.countries)))]
        while len(evs) < n:
            kind = int(rng.choice(3, p=probs))
            if kind == 0:
                length, inc = L, (cfg.fraud_increment_min, cfg.fraud_increment_max)
            elif kind == 1:
                length, inc = int(rng.integers(2, L)), (cfg.genuine_increment_min, cfg.genuine_increment_max)
            else:
                length, inc = 1, None
            if len(evs) + length > n:
                kind, length, inc = 2, 1, None
            amount = int(rng.integers(lo, hi + 1))
            tag = ("fraud", "genuine", "")[kind]
            for k in range(length):
                if k > 0:
                    # fraud steps exceed the minimum by at least a cent so that the
                    # float difference of two amounts stays above it
                    low = _cents(inc[0]) + (1 if kind == 0 else 0)
                    amount += int(rng.integers(low, _cents(inc[1]) + 1))
                if rng.random() < 0.05:
                    country = cfg.countries[int(rng.integers(len(cfg.countries)))]
                end = k == length - 1
                evs.append((amount, country, tag if end else ""))
        cards.append(evs)
    # interleave: a random order of card labels, each appearing as often as it has events
    slots = np.repeat(np.arange(cfg.num_cards), per_card)
    rng.shuffle(slots)
    pos = [0] * cfg.num_cards
    events: list[Event] = []
    truth: list[GroundTruth] = []
    for i, c in enumerate(slots.tolist()):
        cents, country, tag = cards[c][pos[c]]
        pos[c] += 1
        events.append(Event(cfg.start_timestamp + 10 * i, names[c], {"amount": cents / 100, "country": country}))
        if tag:
            truth.append(GroundTruth(names[c], i, tag))
    return FraudDataset(events, truth, cfg)


def write_ground_truth(path: str | Path, truth: Sequence[GroundTruth]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["partition", "matchEndIndex", "kind"])
        for g in truth:
            w.writerow([g.partition, g.match_end_index, g.kind])


def read_ground_truth(path: str | Path) -> list[GroundTruth]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [GroundTruth(r["partition"], int(r["matchEndIndex"]), r["kind"]) for r in csv.DictReader(fh)]


def write_generator_config(path: str | Path, cfg: GeneratorConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(cfg), fh, indent=2)


def split_train_test(events: Sequence[Event], train_fraction: float = 0.75) -> tuple[list[Event], list[Event]]:
    """Sequential split, no shuffling."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie in (0, 1)")
    k = int(round(len(events) * train_fraction))
    return list(events[:k]), list(events[k:])


def contiguous_folds(events: Sequence[Event], k: int = 4) -> list[tuple[list[Event], list[Event]]]:
    """``k`` (train, test) pairs, each test fold a contiguous block."""
    if k < 2:
        raise ConfigError("need at least two folds")
    n = len(events)
    bounds = [round(i * n / k) for i in range(k + 1)]
    out = []
    for i in range(k):
        test = list(events[bounds[i]:bounds[i + 1]])
        train = list(events[:bounds[i]]) + list(events[bounds[i + 1]:])
        out.append((train, test))
    return out
