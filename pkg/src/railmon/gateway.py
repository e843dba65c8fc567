"""Edge gateway: validate and decode frames, convert to JSON, queue and flush uplink records."""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Protocol, Union

from .errors import FrameError, SinkUnavailable
from .frame import GATEWAY_ID, NODE_IDS, RxMeta, decode_frame, frame_to_json
from .sensors import UART_BAUD

TOPIC_TEMPLATE = "rail/track/{node_id}/telemetry"


def topic_for(node_id: int) -> str:
    return TOPIC_TEMPLATE.format(node_id=node_id)


@dataclass(frozen=True)
class GatewayConfig:
    gateway_id: int = GATEWAY_ID
    accepted_node_ids: frozenset = NODE_IDS
    serial_baud: int = UART_BAUD

    def __post_init__(self):
        if self.gateway_id != GATEWAY_ID:
            raise ValueError("gateway_id is fixed at 0x10")


@dataclass(frozen=True)
class UplinkRecord:
    topic: str
    payload: str
    enqueued_at_ms: Optional[int]
    node_id: int

    @property
    def dedup_key(self):
        # without a receive timestamp there is no identity to deduplicate on
        if self.enqueued_at_ms is None:
            return None
        return (self.node_id, self.enqueued_at_ms)

    def ndjson_line(self) -> str:
        return '{"topic":' + json.dumps(self.topic) + "," + self.payload[1:]


@dataclass(frozen=True)
class Rejection:
    reason: str
    detail: str
    raw: bytes
    meta: Optional[RxMeta] = None

    @property
    def raw_hex(self) -> str:
        return self.raw.hex().upper()


def gateway_ingest(cfg: GatewayConfig, wire: bytes, meta: Optional[RxMeta] = None) -> Union[UplinkRecord, Rejection]:
    """Turn one received frame into an uplink record, or a rejection carrying the raw bytes."""
    raw = bytes(wire)
    try:
        frame = decode_frame(raw)
    except FrameError as exc:
        return Rejection(type(exc).__name__, str(exc), raw, meta)
    if frame.gateway_id != cfg.gateway_id:
        return Rejection(
            "ForeignGateway", f"frame addressed to 0x{frame.gateway_id:02X}", raw, meta
        )
    if frame.node_id not in cfg.accepted_node_ids:
        return Rejection("InvalidNodeId", f"node {frame.node_id} not accepted", raw, meta)
    meta = meta or RxMeta()
    return UplinkRecord(
        topic=topic_for(frame.node_id),
        payload=frame_to_json(frame, meta),
        enqueued_at_ms=meta.rx_timestamp_ms,
        node_id=frame.node_id,
    )


class UplinkSink(Protocol):
    def publish(self, record: UplinkRecord) -> None: ...


class NdjsonFileSink:
    """Appends one JSON object (payload plus ``topic``) per line."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def publish(self, record: UplinkRecord) -> None:
        try:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(record.ndjson_line() + "\n")
        except OSError as exc:
            raise SinkUnavailable(f"{self.path}: {exc}") from exc

    def lines(self) -> list[str]:
        if not self.path.exists():
            return []
        return self.path.read_text(encoding="utf-8").splitlines()


class MemorySink:
    def __init__(self):
        self.lines: list[str] = []

    def publish(self, record: UplinkRecord) -> None:
        self.lines.append(record.ndjson_line())


class MqttSink:
    """Publishes payloads to an MQTT client exposing ``publish(topic, payload, qos)``.

    Any paho-mqtt style client works; a ``publish`` returning an object with
    a non-zero ``rc`` counts as a failed delivery.
    """

    def __init__(self, client, qos: int = 1):
        self.client = client
        self.qos = qos

    def publish(self, record: UplinkRecord) -> None:
        try:
            info = self.client.publish(record.topic, record.payload, qos=self.qos)
        except (OSError, ConnectionError) as exc:
            raise SinkUnavailable(str(exc)) from exc
        rc = getattr(info, "rc", 0)
        if rc:
            raise SinkUnavailable(f"MQTT publish failed rc={rc}")


@dataclass
class UplinkQueue:
    """Ordered, loss-free handoff between one ingest producer and one flush consumer.

    A record leaves the queue only after the sink accepted it, so a sink
    failure mid-flush keeps every unsent record in place for the retry.
    """

    _items: deque = field(default_factory=deque)
    _lock: threading.Lock = field(default_factory=threading.Lock)
    _flush_lock: threading.Lock = field(default_factory=threading.Lock)
    _seen: set = field(default_factory=set)

    def put(self, record: UplinkRecord) -> None:
        with self._lock:
            self._items.append(record)

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)

    def _peek(self) -> Optional[UplinkRecord]:
        with self._lock:
            return self._items[0] if self._items else None

    def _pop(self) -> None:
        with self._lock:
            self._items.popleft()

    def flush(self, sink: UplinkSink) -> int:
        """Publish queued records in arrival order; returns how many reached the sink."""
        written = 0
        with self._flush_lock:
            while (record := self._peek()) is not None:
                key = record.dedup_key
                if key is None or key not in self._seen:
                    sink.publish(record)
                    if key is not None:
                        self._seen.add(key)
                    written += 1
                self._pop()
        return written


def uplink_flush(queue: UplinkQueue, sink: UplinkSink) -> int:
    return queue.flush(sink)


@dataclass
class IngestStats:
    accepted: int = 0
    rejected: int = 0
    rejections: list = field(default_factory=list)


class Gateway:
    """Gateway bound to an uplink queue; ``receive`` is the producer side."""

    def __init__(self, cfg: Optional[GatewayConfig] = None, queue: Optional[UplinkQueue] = None):
        self.cfg = cfg or GatewayConfig()
        self.queue = queue or UplinkQueue()
        self.stats = IngestStats()

    def receive(self, wire: bytes, meta: Optional[RxMeta] = None) -> Union[UplinkRecord, Rejection]:
        result = gateway_ingest(self.cfg, wire, meta)
        if isinstance(result, Rejection):
            self.stats.rejected += 1
            self.stats.rejections.append(result)
        else:
            self.stats.accepted += 1
            self.queue.put(result)
        return result

    def receive_many(self, frames: Iterable[tuple[bytes, Optional[RxMeta]]]) -> None:
        for wire, meta in frames:
            self.receive(wire, meta)

    def flush(self, sink: UplinkSink) -> int:
        return self.queue.flush(sink)
