"""Fixed-length telemetry frame exchanged between node, gateway and uplink.

Wire layout (little-endian, 21 octets, no checksum)::

    off  size  field
    0    2     header          A5 7E
    2    1     gateway_id      u8  (0x10 on node-originated frames)
    3    1     node_id         u8  (6..9)
    4    1     reserved        u8
    5    4     accel_x_mg      i32
    9    4     accel_y_mg      i32
    13   4     accel_z_mg      i32
    17   2     temp_centi_c    i16 (hundredths of degC)
    19   2     pressure_centi_kpa  u16 (hundredths of kPa)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Any, Mapping, Optional

from .errors import BadHeader, BadLength, InvalidNodeId, RangeError

HEADER = b"\xA5\x7E"
GATEWAY_ID = 0x10
NODE_IDS = frozenset(range(6, 10))
FRAME_LEN = 21

TEMP_MIN_CENTI = -5000
TEMP_MAX_CENTI = 15000
PRESSURE_MIN_CENTI = 0
PRESSURE_MAX_CENTI = 10000

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1

_LAYOUT = struct.Struct("<2sBBB3ihH")
assert _LAYOUT.size == FRAME_LEN

JSON_KEYS = (
    "gateway_id",
    "node_id",
    "ax_mg",
    "ay_mg",
    "az_mg",
    "temp_c",
    "pressure_kpa",
    "rx_timestamp_ms",
    "rssi_dbm",
)


@dataclass(frozen=True)
class TelemetryFrame:
    node_id: int
    accel_x_mg: int = 0
    accel_y_mg: int = 0
    accel_z_mg: int = 0
    temp_centi_c: int = 0
    pressure_centi_kpa: int = 0
    gateway_id: int = GATEWAY_ID
    reserved: int = 0

    @classmethod
    def zero(cls, node_id: int) -> "TelemetryFrame":
        return cls(node_id=node_id)


@dataclass(frozen=True)
class RxMeta:
    """Receive-side metadata attached by the gateway (both optional for offline replay)."""

    rx_timestamp_ms: Optional[int] = None
    rssi_dbm: Optional[float] = None


def validate(frame: TelemetryFrame) -> None:
    if frame.node_id not in NODE_IDS:
        raise InvalidNodeId(f"node_id {frame.node_id} not in 6..9")
    for name in ("gateway_id", "reserved"):
        value = getattr(frame, name)
        if not 0 <= value <= 0xFF:
            raise RangeError(f"{name} {value} does not fit in one octet")
    for name in ("accel_x_mg", "accel_y_mg", "accel_z_mg"):
        value = getattr(frame, name)
        if not INT32_MIN <= value <= INT32_MAX:
            raise RangeError(f"{name} {value} outside signed 32-bit range")
    if not TEMP_MIN_CENTI <= frame.temp_centi_c <= TEMP_MAX_CENTI:
        raise RangeError(f"temp_centi_c {frame.temp_centi_c} outside -50..150 degC")
    if not PRESSURE_MIN_CENTI <= frame.pressure_centi_kpa <= PRESSURE_MAX_CENTI:
        raise RangeError(
            f"pressure_centi_kpa {frame.pressure_centi_kpa} outside 0..100 kPa"
        )


def encode_frame(frame: TelemetryFrame) -> bytes:
    validate(frame)
    return _LAYOUT.pack(
        HEADER,
        frame.gateway_id,
        frame.node_id,
        frame.reserved,
        frame.accel_x_mg,
        frame.accel_y_mg,
        frame.accel_z_mg,
        frame.temp_centi_c,
        frame.pressure_centi_kpa,
    )


def decode_frame(wire: bytes) -> TelemetryFrame:
    """Parse a 21-octet wire frame.

    Only the header, length and node ID are checked: with no checksum on the
    wire, corruption of any payload byte goes unnoticed.
    """
    wire = bytes(wire)
    if len(wire) != FRAME_LEN:
        raise BadLength(f"expected {FRAME_LEN} octets, got {len(wire)}")
    header, gw, node, reserved, ax, ay, az, temp, pres = _LAYOUT.unpack(wire)
    if header != HEADER:
        raise BadHeader(f"header {header.hex().upper()} != A57E")
    if node not in NODE_IDS:
        raise InvalidNodeId(f"node_id {node} not in 6..9")
    return TelemetryFrame(
        node_id=node,
        accel_x_mg=ax,
        accel_y_mg=ay,
        accel_z_mg=az,
        temp_centi_c=temp,
        pressure_centi_kpa=pres,
        gateway_id=gw,
        reserved=reserved,
    )


def _centi(value: int) -> str:
    sign = "-" if value < 0 else ""
    whole, frac = divmod(abs(value), 100)
    return f"{sign}{whole}.{frac:02d}"


def _fixed2(value: Any) -> str:
    if isinstance(value, int):
        return _centi(value * 100)
    # x/100*100 lands within 1 ulp of the integer, so round() recovers it exactly
    return _centi(int(round(float(value) * 100)))


def _json_number(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        raise TypeError("boolean is not a valid telemetry value")
    if isinstance(value, int):
        return str(value)
    return json.dumps(float(value))


def format_record(record: Mapping[str, Any], leading: Optional[Mapping[str, Any]] = None) -> str:
    """Serialize a telemetry mapping to the canonical single-line JSON text.

    ``leading`` keys (e.g. ``topic``) are emitted first, in their own order.
    """
    parts = []
    for key, value in (leading or {}).items():
        parts.append(f"{json.dumps(key)}:{json.dumps(value, ensure_ascii=True)}")
    for key in JSON_KEYS:
        value = record[key]
        if key in ("temp_c", "pressure_kpa"):
            text = _fixed2(value)
        elif key == "rssi_dbm":
            text = "null" if value is None else json.dumps(float(value))
        else:
            text = _json_number(value)
        parts.append(f'"{key}":{text}')
    return "{" + ",".join(parts) + "}"


def frame_to_record(frame: TelemetryFrame, meta: Optional[RxMeta] = None) -> dict:
    meta = meta or RxMeta()
    return {
        "gateway_id": frame.gateway_id,
        "node_id": frame.node_id,
        "ax_mg": frame.accel_x_mg,
        "ay_mg": frame.accel_y_mg,
        "az_mg": frame.accel_z_mg,
        "temp_c": frame.temp_centi_c / 100,
        "pressure_kpa": frame.pressure_centi_kpa / 100,
        "rx_timestamp_ms": meta.rx_timestamp_ms,
        "rssi_dbm": meta.rssi_dbm,
    }


def frame_to_json(frame: TelemetryFrame, meta: Optional[RxMeta] = None) -> str:
    validate(frame)
    return format_record(frame_to_record(frame, meta))


def reserialize(line: str) -> str:
    """Parse a line produced by :func:`frame_to_json` (optionally with ``topic``) and emit it again."""
    obj = json.loads(line)
    leading = {k: v for k, v in obj.items() if k not in JSON_KEYS}
    return format_record(obj, leading)
