import itertools
import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from railmon.errors import BadHeader, BadLength, InvalidNodeId, RangeError
from railmon.frame import (
    FRAME_LEN,
    RxMeta,
    TelemetryFrame,
    decode_frame,
    encode_frame,
    frame_to_json,
    reserialize,
)


def oracle_bytes(f: TelemetryFrame) -> bytes:
    """Independent layout built with int.to_bytes, field by field."""
    return (
        bytes([0xA5, 0x7E, f.gateway_id, f.node_id, f.reserved])
        + f.accel_x_mg.to_bytes(4, "little", signed=True)
        + f.accel_y_mg.to_bytes(4, "little", signed=True)
        + f.accel_z_mg.to_bytes(4, "little", signed=True)
        + f.temp_centi_c.to_bytes(2, "little", signed=True)
        + f.pressure_centi_kpa.to_bytes(2, "little", signed=False)
    )


frames = st.builds(
    TelemetryFrame,
    node_id=st.integers(6, 9),
    accel_x_mg=st.integers(-(2**31), 2**31 - 1),
    accel_y_mg=st.integers(-(2**31), 2**31 - 1),
    accel_z_mg=st.integers(-(2**31), 2**31 - 1),
    temp_centi_c=st.integers(-5000, 15000),
    pressure_centi_kpa=st.integers(0, 10000),
    reserved=st.integers(0, 255),
)


def test_zero_frame_layout():
    wire = encode_frame(TelemetryFrame.zero(6))
    assert wire == bytes.fromhex("A57E100600") + bytes(16)
    assert len(wire) == 21


def test_known_field_encodings():
    wire = encode_frame(TelemetryFrame(node_id=6, accel_x_mg=1000, temp_centi_c=2500, pressure_centi_kpa=10000))
    assert wire[5:9] == bytes.fromhex("E8030000")
    assert wire[17:19] == bytes.fromhex("C409")
    assert wire[19:21] == bytes.fromhex("1027")


@pytest.mark.parametrize("node_id", [0, 5, 10, 11, 255])
def test_encode_rejects_node_ids(node_id):
    with pytest.raises(InvalidNodeId):
        encode_frame(TelemetryFrame(node_id=node_id))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"temp_centi_c": -5001},
        {"temp_centi_c": 15001},
        {"pressure_centi_kpa": -1},
        {"pressure_centi_kpa": 10001},
        {"accel_x_mg": 2**31},
        {"reserved": 256},
    ],
)
def test_encode_range_errors(kwargs):
    with pytest.raises(RangeError):
        encode_frame(TelemetryFrame(node_id=7, **kwargs))


@given(frames)
def test_encode_matches_oracle_and_round_trips(f):
    wire = encode_frame(f)
    assert wire == oracle_bytes(f)
    assert len(wire) == FRAME_LEN
    assert decode_frame(wire) == f


def test_boundary_grid_round_trip():
    for node, temp, pres, acc in itertools.product(
        range(6, 10), (-5000, 0, 15000), (0, 10000), (-(2**31), -1, 0, 2**31 - 1)
    ):
        f = TelemetryFrame(node, acc, -acc - 1, acc, temp, pres)
        assert decode_frame(encode_frame(f)) == f


def test_seeded_random_frames_round_trip_bytewise():
    rng = random.Random(1234)
    for _ in range(1000):
        f = TelemetryFrame(
            node_id=rng.randint(6, 9),
            accel_x_mg=rng.randint(-2048, 2047),
            accel_y_mg=rng.randint(-2048, 2047),
            accel_z_mg=rng.randint(-2048, 2047),
            temp_centi_c=rng.randint(-5000, 15000),
            pressure_centi_kpa=rng.randint(0, 10000),
        )
        wire = encode_frame(f)
        assert encode_frame(decode_frame(wire)) == wire


def test_decode_errors():
    with pytest.raises(BadHeader):
        decode_frame(bytes(21))
    with pytest.raises(BadLength):
        decode_frame(encode_frame(TelemetryFrame.zero(6))[:20])
    with pytest.raises(BadLength):
        decode_frame(encode_frame(TelemetryFrame.zero(6)) + b"\x00")
    bad = bytearray(encode_frame(TelemetryFrame.zero(6)))
    bad[3] = 11
    with pytest.raises(InvalidNodeId):
        decode_frame(bytes(bad))


@pytest.mark.parametrize("pos", [0, 1])
@pytest.mark.parametrize("flip", [0x01, 0x80, 0xFF])
def test_header_corruption_is_rejected(pos, flip):
    wire = bytearray(encode_frame(TelemetryFrame.zero(8)))
    wire[pos] ^= flip
    with pytest.raises(BadHeader):
        decode_frame(bytes(wire))


@pytest.mark.parametrize("pos", [4] + list(range(5, 21)))
def test_payload_corruption_goes_undetected(pos):
    f = TelemetryFrame(node_id=8, accel_z_mg=1000, temp_centi_c=2000, pressure_centi_kpa=5000)
    wire = bytearray(encode_frame(f))
    wire[pos] ^= 0x01
    decoded = decode_frame(bytes(wire))
    assert decoded != f


def test_frame_to_json_zero_case():
    text = frame_to_json(TelemetryFrame.zero(6), RxMeta(0, -80))
    assert text == (
        '{"gateway_id":16,"node_id":6,"ax_mg":0,"ay_mg":0,"az_mg":0,"temp_c":0.00,'
        '"pressure_kpa":0.00,"rx_timestamp_ms":0,"rssi_dbm":-80.0}'
    )


@pytest.mark.parametrize(
    "centi,text", [(2500, "25.00"), (-5, "-0.05"), (-5000, "-50.00"), (1, "0.01"), (12345, "123.45")]
)
def test_temperature_formatting(centi, text):
    out = frame_to_json(TelemetryFrame(node_id=6, temp_centi_c=centi))
    assert f'"temp_c":{text},' in out
    # oracle: plain decimal division
    assert float(text) == centi / 100


def test_json_key_order_and_absent_meta():
    obj = json.loads(frame_to_json(TelemetryFrame.zero(9)))
    assert list(obj) == [
        "gateway_id", "node_id", "ax_mg", "ay_mg", "az_mg",
        "temp_c", "pressure_kpa", "rx_timestamp_ms", "rssi_dbm",
    ]
    assert obj["rx_timestamp_ms"] is None and obj["rssi_dbm"] is None


@given(frames, st.integers(0, 2**40), st.floats(-160, 30, allow_nan=False))
def test_json_reserialize_is_byte_identical(f, ts, rssi):
    line = frame_to_json(f, RxMeta(ts, rssi))
    assert reserialize(line) == line
    assert frame_to_json(f, RxMeta(ts, rssi)) == line


@pytest.mark.parametrize("name", ["zero_node6", "accel_1g_25c_100kpa", "extremes_node9", "hot_node8"])
def test_golden_fixtures(fixtures_dir, name):
    wire = (fixtures_dir / "frames" / f"{name}.bin").read_bytes()
    expected = (fixtures_dir / "frames" / f"{name}.json").read_text().strip()
    frame = decode_frame(wire)
    assert frame_to_json(frame) == expected
    assert encode_frame(frame) == wire
    assert oracle_bytes(frame) == wire
