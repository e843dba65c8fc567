"""Deterministic discrete-event simulation of the star network.

Nodes 6-9 share one LoRa channel to the gateway. A frame is lost when the
gateway's RSSI falls below sensitivity, and collides when another in-range
frame overlaps it in time unless it is at least ``capture_threshold_db``
stronger than every frame it overlaps.

All randomness flows from one ``random.Random(seed)`` which hands a
sub-seed to each node in ascending node-ID order; events are totally
ordered by (time, node_id, kind, insertion sequence).
"""

from __future__ import annotations

import csv
import enum
import heapq
import io
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import DomainError, ParamError, ScenarioInvalid
from .frame import FRAME_LEN, RxMeta
from .gateway import Gateway
from .node import Currents, NodeConfig, Phase, SensorNode, energy_per_cycle_mah
from .phy import PathLossModel, RadioParams, receive_decision, time_on_air_s
from .sensors import StimulusTrace

ENERGY_DIGITS = 12


class EventKind(enum.IntEnum):
    NODE_WAKE = 0
    NODE_STEP = 1
    TX_START = 2
    TX_END = 3
    RX_DELIVER = 4
    RX_COLLISION = 5

    @property
    def label(self) -> str:
        return {
            0: "NodeWake",
            1: "NodeStep",
            2: "TxStart",
            3: "TxEnd",
            4: "RxDeliver",
            5: "RxCollision",
        }[int(self)]


@dataclass(frozen=True)
class SimEvent:
    time_s: float
    kind: EventKind
    node_id: int
    details: dict = field(default_factory=dict, compare=False)


@dataclass
class Transmission:
    node_id: int
    start_s: float
    end_s: float
    rssi_dbm: float
    in_range: bool = True
    wire: bytes = b""

    def overlaps(self, other: "Transmission") -> bool:
        return self.start_s < other.end_s and other.start_s < self.end_s


def captures(tx: Transmission, interferers: Iterable[Transmission], capture_threshold_db: float) -> bool:
    return all(tx.rssi_dbm - o.rssi_dbm >= capture_threshold_db for o in interferers)


def collision_resolve(transmissions: Sequence[Transmission], capture_threshold_db: float = 6.0) -> list[bool]:
    """Delivered flag per transmission under the capture rule (out-of-range ones never interfere)."""
    out = []
    for i, tx in enumerate(transmissions):
        rivals = [
            o
            for j, o in enumerate(transmissions)
            if j != i and o.in_range and tx.overlaps(o)
        ]
        out.append(tx.in_range and captures(tx, rivals, capture_threshold_db))
    return out


@dataclass
class NodeSpec:
    config: NodeConfig
    distance_m: float
    stimulus_csv: Optional[str] = None


@dataclass
class Scenario:
    duration_s: float
    seed: int
    nodes: list
    radio: RadioParams = field(default_factory=RadioParams)
    path_loss: PathLossModel = field(default_factory=PathLossModel)
    base_dir: Optional[Path] = None

    def validate(self) -> None:
        problems = []
        if not self.duration_s > 0:
            problems.append(f"duration_s: must be > 0, got {self.duration_s}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            problems.append(f"seed: must be a 64-bit unsigned integer, got {self.seed!r}")
        if not self.nodes:
            problems.append("nodes: at least one node required")
        ids = [n.config.node_id for n in self.nodes]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            problems.append(f"nodes: duplicate node_id {dupes}")
        for n in self.nodes:
            if not n.distance_m >= self.path_loss.reference_distance_m:
                problems.append(
                    f"nodes[{n.config.node_id}].distance_m: {n.distance_m} below reference distance"
                )
            if n.config.radio != self.radio:
                problems.append(f"nodes[{n.config.node_id}].radio: must match scenario radio")
        if problems:
            raise ScenarioInvalid(problems)

    def trace_for(self, spec: NodeSpec) -> StimulusTrace:
        if spec.stimulus_csv is None:
            return StimulusTrace.constant()
        path = Path(spec.stimulus_csv)
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        try:
            return StimulusTrace.from_csv(path)
        except (OSError, ValueError, KeyError) as exc:
            raise ScenarioInvalid(
                f"nodes[{spec.config.node_id}].stimulus_csv: {exc}"
            ) from exc

    def with_seed(self, seed: int) -> "Scenario":
        return Scenario(self.duration_s, seed, self.nodes, self.radio, self.path_loss, self.base_dir)

    def to_dict(self) -> dict:
        nodes = []
        for n in self.nodes:
            c = n.config
            nodes.append(
                {
                    "node_id": c.node_id,
                    "distance_m": n.distance_m,
                    "wake_period_s": c.wake_period_s,
                    "jitter_s": c.jitter_s,
                    "start_offset_s": c.start_offset_s,
                    "active_window_s": c.active_window_s,
                    "battery_mah": c.battery_mah,
                    "currents": {
                        "tx_ma": c.currents.tx_ma,
                        "listen_ma": c.currents.listen_ma,
                        "sleep_ua": c.currents.sleep_ua,
                        "sensor_ua": c.currents.sensor_ua,
                    },
                    "stimulus_csv": n.stimulus_csv,
                }
            )
        return {
            "duration_s": self.duration_s,
            "seed": self.seed,
            "radio": self.radio.to_dict(),
            "path_loss": self.path_loss.to_dict(),
            "nodes": nodes,
        }


_NODE_KEYS = {
    "node_id",
    "distance_m",
    "wake_period_s",
    "jitter_s",
    "stimulus_csv",
    "start_offset_s",
    "active_window_s",
    "battery_mah",
    "currents",
}


def scenario_from_dict(data: dict, base_dir: Optional[Path] = None) -> Scenario:
    problems = []
    for key in ("duration_s", "seed", "nodes"):
        if key not in data:
            problems.append(f"{key}: missing")
    if problems:
        raise ScenarioInvalid(problems)
    try:
        radio = RadioParams.from_dict(data.get("radio") or {})
    except (ParamError, TypeError) as exc:
        raise ScenarioInvalid(f"radio: {exc}") from exc
    try:
        path_loss = PathLossModel.from_dict(data.get("path_loss") or {})
    except (ParamError, TypeError) as exc:
        raise ScenarioInvalid(f"path_loss: {exc}") from exc

    nodes = []
    for i, raw in enumerate(data["nodes"]):
        where = f"nodes[{i}]"
        if not isinstance(raw, dict):
            problems.append(f"{where}: must be an object")
            continue
        unknown = set(raw) - _NODE_KEYS
        if unknown:
            problems.append(f"{where}: unknown keys {sorted(unknown)}")
        for key in ("node_id", "distance_m"):
            if key not in raw:
                problems.append(f"{where}.{key}: missing")
        if problems:
            continue
        kwargs = {
            k: raw[k]
            for k in ("wake_period_s", "jitter_s", "start_offset_s", "active_window_s", "battery_mah")
            if k in raw
        }
        try:
            if "currents" in raw:
                kwargs["currents"] = Currents(**raw["currents"])
            cfg = NodeConfig(node_id=raw["node_id"], radio=radio, **kwargs)
        except ScenarioInvalid as exc:
            problems.extend(f"{where}: {p}" for p in exc.problems)
            continue
        except TypeError as exc:
            problems.append(f"{where}: {exc}")
            continue
        nodes.append(NodeSpec(cfg, float(raw["distance_m"]), raw.get("stimulus_csv")))
    if problems:
        raise ScenarioInvalid(problems)

    seed = data["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioInvalid(f"seed: must be an integer, got {seed!r}")
    scenario = Scenario(
        duration_s=float(data["duration_s"]),
        seed=seed,
        nodes=nodes,
        radio=radio,
        path_loss=path_loss,
        base_dir=base_dir,
    )
    scenario.validate()
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioInvalid(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioInvalid(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ScenarioInvalid(f"{path}: top level must be an object")
    return scenario_from_dict(data, base_dir=path.parent)


@dataclass
class NodeTally:
    sent: int = 0
    delivered: int = 0
    collided: int = 0
    out_of_range: int = 0
    cycles: int = 0
    energy_mah: float = 0.0
    energy_closed_form_mah: float = 0.0

    @property
    def delivery_ratio(self) -> float:
        return self.delivered / self.sent if self.sent else 0.0

    def to_dict(self) -> dict:
        return {
            "sent": self.sent,
            "delivered": self.delivered,
            "collided": self.collided,
            "out_of_range": self.out_of_range,
            "cycles": self.cycles,
            "energy_mah": round(self.energy_mah, ENERGY_DIGITS),
            "energy_closed_form_mah": round(self.energy_closed_form_mah, ENERGY_DIGITS),
            "delivery_ratio": self.delivery_ratio,
        }


@dataclass
class SimReport:
    duration_s: float
    seed: int
    nodes: dict
    timeline: list
    events: list = field(default_factory=list)

    @property
    def sent(self) -> int:
        return sum(t.sent for t in self.nodes.values())

    @property
    def delivered(self) -> int:
        return sum(t.delivered for t in self.nodes.values())

    @property
    def collided(self) -> int:
        return sum(t.collided for t in self.nodes.values())

    @property
    def out_of_range(self) -> int:
        return sum(t.out_of_range for t in self.nodes.values())

    @property
    def delivery_ratio(self) -> float:
        return self.delivered / self.sent if self.sent else 0.0

    def to_dict(self) -> dict:
        return {
            "duration_s": self.duration_s,
            "seed": self.seed,
            "totals": {
                "sent": self.sent,
                "delivered": self.delivered,
                "collided": self.collided,
                "out_of_range": self.out_of_range,
            },
            "delivery_ratio": self.delivery_ratio,
            "nodes": {str(k): v.to_dict() for k, v in sorted(self.nodes.items())},
            "timeline": self.timeline,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def timeline_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["time_s", "node_id", "rx_timestamp_ms", "rssi_dbm"])
        for row in self.timeline:
            writer.writerow([row["time_s"], row["node_id"], row["rx_timestamp_ms"], row["rssi_dbm"]])
        return buf.getvalue()


class _Simulator:
    def __init__(self, scenario: Scenario, gateway: Optional[Gateway], record_events: bool):
        scenario.validate()
        self.s = scenario
        self.gateway = gateway
        self.record_events = record_events
        self.events: list[SimEvent] = []
        self.queue: list = []
        self._seq = 0
        self.toa = time_on_air_s(scenario.radio, FRAME_LEN)

        master = random.Random(scenario.seed)
        self.nodes: dict[int, SensorNode] = {}
        self.specs: dict[int, NodeSpec] = {}
        self.traces: dict[int, StimulusTrace] = {}
        self.links = {}
        self.tally: dict[int, NodeTally] = {}
        for spec in sorted(scenario.nodes, key=lambda n: n.config.node_id):
            nid = spec.config.node_id
            self.nodes[nid] = SensorNode(spec.config, seed=master.getrandbits(64))
            self.specs[nid] = spec
            self.traces[nid] = scenario.trace_for(spec)
            self.links[nid] = receive_decision(scenario.radio, scenario.path_loss, spec.distance_m)
            self.tally[nid] = NodeTally()
        self.on_air: list[Transmission] = []
        self.timeline: list[dict] = []

    def push(self, time_s: float, node_id: int, kind: EventKind, payload=None) -> None:
        heapq.heappush(self.queue, (time_s, node_id, int(kind), self._seq, payload))
        self._seq += 1

    def log(self, time_s, kind, node_id, **details):
        if self.record_events:
            self.events.append(SimEvent(time_s, kind, node_id, details))

    def run(self) -> SimReport:
        for nid, node in self.nodes.items():
            if node.cfg.start_offset_s < self.s.duration_s:
                self.push(node.cfg.start_offset_s, nid, EventKind.NODE_WAKE)

        while self.queue:
            time_s, nid, kind, _, payload = heapq.heappop(self.queue)
            kind = EventKind(kind)
            if kind is EventKind.NODE_WAKE:
                self._wake(nid, time_s)
            elif kind is EventKind.NODE_STEP:
                self._step(nid, time_s)
            elif kind is EventKind.TX_END:
                self._tx_end(payload, time_s)

        for nid, node in self.nodes.items():
            t = self.tally[nid]
            t.cycles = node.state.cycles
            t.energy_mah = node.state.consumed_mah
            t.energy_closed_form_mah = energy_per_cycle_mah(node.cfg) * node.state.cycles
        return SimReport(self.s.duration_s, self.s.seed, self.tally, self.timeline, self.events)

    def _wake(self, nid: int, time_s: float) -> None:
        node = self.nodes[nid]
        self.log(time_s, EventKind.NODE_WAKE, nid)
        stim = self.traces[nid].at(time_s)
        if node.phase is Phase.INIT:
            node.step(stim, time_s)
        node.step(stim, time_s)
        self.push(node.state.next_step_s, nid, EventKind.NODE_STEP)

    def _step(self, nid: int, time_s: float) -> None:
        node = self.nodes[nid]
        wire = node.step(None, time_s)
        if wire is not None:
            link = self.links[nid]
            tx = Transmission(nid, time_s, time_s + self.toa, link.rssi_dbm, link.received, wire)
            self.on_air.append(tx)
            self.tally[nid].sent += 1
            self.log(time_s, EventKind.TX_START, nid, rssi_dbm=link.rssi_dbm)
            self.push(tx.end_s, nid, EventKind.TX_END, tx)
        nxt = node.state.next_step_s
        if node.phase is Phase.SAMPLE:
            # a new cycle only starts inside the horizon; started cycles always finish
            if nxt < self.s.duration_s:
                self.push(nxt, nid, EventKind.NODE_WAKE)
        else:
            self.push(nxt, nid, EventKind.NODE_STEP)

    def _tx_end(self, tx: Transmission, time_s: float) -> None:
        tally = self.tally[tx.node_id]
        self.log(time_s, EventKind.TX_END, tx.node_id)
        horizon = time_s - self.toa
        rivals = [o for o in self.on_air if o is not tx and o.in_range and tx.overlaps(o)]
        if not tx.in_range:
            tally.out_of_range += 1
        elif captures(tx, rivals, self.s.path_loss.capture_threshold_db):
            tally.delivered += 1
            ts_ms = int(round(time_s * 1000))
            self.timeline.append(
                {
                    "time_s": time_s,
                    "node_id": tx.node_id,
                    "rx_timestamp_ms": ts_ms,
                    "rssi_dbm": tx.rssi_dbm,
                }
            )
            self.log(time_s, EventKind.RX_DELIVER, tx.node_id, rssi_dbm=tx.rssi_dbm)
            if self.gateway is not None:
                self.gateway.receive(tx.wire, RxMeta(ts_ms, tx.rssi_dbm))
        else:
            tally.collided += 1
            self.log(
                time_s,
                EventKind.RX_COLLISION,
                tx.node_id,
                interferers=[o.node_id for o in rivals],
            )
        # nothing ending at or before now - ToA can overlap a frame still on air
        self.on_air = [o for o in self.on_air if o.end_s > horizon]


def run_scenario(scenario: Scenario, gateway: Optional[Gateway] = None, record_events: bool = False) -> SimReport:
    return _Simulator(scenario, gateway, record_events).run()


@dataclass
class RangeSweep:
    rows: list  # (distance_m, delivery_ratio)
    max_full_delivery_m: Optional[float]

    def to_dict(self) -> dict:
        return {
            "rows": [{"distance_m": d, "delivery_ratio": r} for d, r in self.rows],
            "max_full_delivery_m": self.max_full_delivery_m,
        }


def range_sweep(template: Scenario, distances: Iterable[float]) -> RangeSweep:
    """Re-run a single-node scenario at each distance (the staged walk-out test)."""
    if len(template.nodes) != 1:
        raise ScenarioInvalid("range_sweep needs a single-node scenario")
    rows = []
    spec = template.nodes[0]
    for d in distances:
        if d < template.path_loss.reference_distance_m:
            raise DomainError(f"distance {d} m below reference distance")
        s = Scenario(
            template.duration_s,
            template.seed,
            [NodeSpec(spec.config, float(d), spec.stimulus_csv)],
            template.radio,
            template.path_loss,
            template.base_dir,
        )
        rows.append((float(d), run_scenario(s).delivery_ratio))
    full = [d for d, r in rows if r == 1.0]
    return RangeSweep(rows, max(full) if full else None)
