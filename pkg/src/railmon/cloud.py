"""Cloud-side store: persist uplink NDJSON, query history, evaluate threshold alarms.

The store file uses exactly the gateway sink format, so a sink file can be
ingested as-is and the store can be rebuilt from its own file on load.
"""

from __future__ import annotations

import bisect
import json
import math
import operator
import os
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from .errors import BadRange, StoreUnavailable
from .frame import JSON_KEYS, NODE_IDS

_INT_KEYS = ("gateway_id", "node_id", "ax_mg", "ay_mg", "az_mg", "rx_timestamp_ms")
_NUM_KEYS = ("temp_c", "pressure_kpa")


@dataclass(frozen=True)
class Reading:
    node_id: int
    rx_timestamp_ms: int
    ax_mg: int
    ay_mg: int
    az_mg: int
    temp_c: float
    pressure_kpa: float
    rssi_dbm: Optional[float] = None

    @property
    def key(self) -> tuple[int, int]:
        return (self.node_id, self.rx_timestamp_ms)

    @property
    def accel_magnitude_mg(self) -> float:
        return math.sqrt(self.ax_mg**2 + self.ay_mg**2 + self.az_mg**2)

    def to_dict(self) -> dict:
        return asdict(self)


def parse_line(line: str) -> Reading:
    """Validate one sink line; raises ValueError with a human reason."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ValueError("not a JSON object")
    missing = [k for k in JSON_KEYS if k not in obj]
    if missing:
        raise ValueError(f"missing keys: {', '.join(missing)}")
    for k in _INT_KEYS:
        v = obj[k]
        if k == "rx_timestamp_ms" and v is None:
            raise ValueError("rx_timestamp_ms is null")
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValueError(f"{k} must be an integer")
    for k in _NUM_KEYS:
        v = obj[k]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError(f"{k} must be a number")
    rssi = obj["rssi_dbm"]
    if rssi is not None and (isinstance(rssi, bool) or not isinstance(rssi, (int, float))):
        raise ValueError("rssi_dbm must be a number or null")
    if obj["node_id"] not in NODE_IDS:
        raise ValueError(f"node_id {obj['node_id']} not in 6..9")
    if "topic" in obj and obj["topic"] != f"rail/track/{obj['node_id']}/telemetry":
        raise ValueError(f"topic {obj['topic']!r} does not match node_id")
    return Reading(
        node_id=obj["node_id"],
        rx_timestamp_ms=obj["rx_timestamp_ms"],
        ax_mg=obj["ax_mg"],
        ay_mg=obj["ay_mg"],
        az_mg=obj["az_mg"],
        temp_c=float(obj["temp_c"]),
        pressure_kpa=float(obj["pressure_kpa"]),
        rssi_dbm=None if rssi is None else float(rssi),
    )


@dataclass
class IngestResult:
    accepted: int = 0
    rejected: int = 0
    duplicates: int = 0
    reasons: list = field(default_factory=list)  # (line_no, reason)

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "duplicates": self.duplicates,
            "reasons": [{"line": n, "reason": r} for n, r in self.reasons],
        }


class Store:
    """Append-only reading store with an in-memory sorted index.

    ``path=None`` keeps everything in memory. One writer, any number of
    readers: each ingest batch is written with a single append and published
    to readers under the lock only after the write succeeded.
    """

    def __init__(self, path: Union[str, Path, None] = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.RLock()
        self._order: list[tuple[int, int]] = []  # (ts, node_id), sorted
        self._by_key: dict[tuple[int, int], Reading] = {}
        self._last_ts: dict[int, int] = {}
        if self.path is not None and self.path.exists():
            self.load()

    def __len__(self) -> int:
        with self._lock:
            return len(self._order)

    def load(self) -> None:
        try:
            text = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StoreUnavailable(f"{self.path}: {exc}") from exc
        with self._lock:
            self._order.clear()
            self._by_key.clear()
            self._last_ts.clear()
            for n, line in enumerate(text.splitlines(), start=1):
                if not line.strip():
                    continue
                try:
                    self._index(parse_line(line))
                except ValueError as exc:
                    raise StoreUnavailable(f"{self.path}:{n}: corrupt record ({exc})") from exc

    def _index(self, r: Reading) -> None:
        self._by_key[r.key] = r
        bisect.insort(self._order, (r.rx_timestamp_ms, r.node_id))
        self._last_ts[r.node_id] = max(self._last_ts.get(r.node_id, r.rx_timestamp_ms), r.rx_timestamp_ms)

    def readings(self) -> list[Reading]:
        with self._lock:
            return [self._by_key[(n, ts)] for ts, n in self._order]

    def ingest_lines(self, lines: Iterable[str]) -> IngestResult:
        result = IngestResult()
        batch: list[tuple[str, Reading]] = []
        with self._lock:
            pending: dict[tuple[int, int], Reading] = {}
            last_ts = dict(self._last_ts)
            for n, raw in enumerate(lines, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    reading = parse_line(line)
                except ValueError as exc:
                    result.rejected += 1
                    result.reasons.append((n, str(exc)))
                    continue
                if reading.key in self._by_key or reading.key in pending:
                    result.duplicates += 1
                    continue
                prev = last_ts.get(reading.node_id)
                if prev is not None and reading.rx_timestamp_ms < prev:
                    result.rejected += 1
                    result.reasons.append(
                        (n, f"timestamp {reading.rx_timestamp_ms} precedes {prev} for node {reading.node_id}")
                    )
                    continue
                last_ts[reading.node_id] = reading.rx_timestamp_ms
                pending[reading.key] = reading
                batch.append((line, reading))

            if batch and self.path is not None:
                self._append([line for line, _ in batch])
            for _, reading in batch:
                self._index(reading)
            result.accepted = len(batch)
        return result

    def _append(self, lines: list[str]) -> None:
        data = "".join(line + "\n" for line in lines)
        try:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StoreUnavailable(f"{self.path}: {exc}") from exc

    def query(self, t_from_ms: int, t_to_ms: int, node_id: Optional[int] = None) -> list[Reading]:
        if t_from_ms > t_to_ms:
            raise BadRange(f"t_from {t_from_ms} > t_to {t_to_ms}")
        with self._lock:
            lo = bisect.bisect_left(self._order, (t_from_ms, -1))
            hi = bisect.bisect_right(self._order, (t_to_ms, 1 << 30))
            keys = self._order[lo:hi]
            return [
                self._by_key[(n, ts)]
                for ts, n in keys
                if node_id is None or n == node_id
            ]


def ingest_lines(store: Store, lines: Iterable[str]) -> IngestResult:
    return store.ingest_lines(lines)


def query(store: Store, t_from_ms: int, t_to_ms: int, node_id: Optional[int] = None) -> list[Reading]:
    return store.query(t_from_ms, t_to_ms, node_id)


# -- alarms -----------------------------------------------------------------

METRICS = ("accel_magnitude_mg", "temp_c", "pressure_kpa")
COMPARATORS = {
    ">": operator.gt,
    ">=": operator.ge,
    "<": operator.lt,
    "<=": operator.le,
}


@dataclass(frozen=True)
class AlarmRule:
    metric: str
    comparator: str
    threshold: float
    node_id: Optional[int] = None
    name: str = ""
    enabled: bool = True

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.comparator not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.comparator!r}")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        scope = "all" if self.node_id is None else f"node{self.node_id}"
        return f"{self.metric}{self.comparator}{self.threshold:g}@{scope}"

    def value(self, r: Reading) -> float:
        if self.metric == "accel_magnitude_mg":
            return r.accel_magnitude_mg
        return getattr(r, self.metric)

    def violated_by(self, r: Reading) -> bool:
        if not self.enabled:
            return False
        if self.node_id is not None and r.node_id != self.node_id:
            return False
        return COMPARATORS[self.comparator](self.value(r), self.threshold)


@dataclass(frozen=True)
class Alarm:
    rule: str
    reading: Reading
    value: float
    fired_at_ms: int

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "node_id": self.reading.node_id,
            "fired_at_ms": self.fired_at_ms,
            "value": self.value,
            "reading": self.reading.to_dict(),
        }


def load_rules(path) -> list[AlarmRule]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError("rules file must hold a JSON list")
    return [AlarmRule(**entry) for entry in data]


def evaluate_alarms(store: Store, rules: Iterable[AlarmRule]) -> list[Alarm]:
    """One alarm per (rule, reading) violation, ordered by reading then rule position."""
    rules = list(rules)
    alarms = []
    for r in store.readings():
        for rule in rules:
            if rule.violated_by(r):
                alarms.append(Alarm(rule.label, r, rule.value(r), r.rx_timestamp_ms))
    return alarms
