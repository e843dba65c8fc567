"""Acceptance criteria, one check per criterion.

Each check returns ``(ok, detail)``. Under pytest every criterion prints one
``criterion N: PASS|FAIL ...`` line to the terminal and then asserts; run the
file directly (``python tests/test_acceptance.py``) for the summary alone.
"""

import json
import random
import sys
import tempfile
import time
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

from oracles import toa_oracle_s  # noqa: E402
from simhelpers import make_scenario, random_scenario  # noqa: E402

from railmon import phy, sensors  # noqa: E402
from railmon.cloud import Store  # noqa: E402
from railmon.frame import (  # noqa: E402
    FRAME_LEN,
    NODE_IDS,
    PRESSURE_MAX_CENTI,
    PRESSURE_MIN_CENTI,
    TEMP_MAX_CENTI,
    TEMP_MIN_CENTI,
    TelemetryFrame,
    decode_frame,
    encode_frame,
)
from railmon.gateway import Gateway, NdjsonFileSink  # noqa: E402
from railmon.netsim import load_scenario, range_sweep, run_scenario  # noqa: E402
from railmon.node import NodeConfig, energy_breakdown_mah, energy_per_cycle_mah  # noqa: E402

STAR4 = HERE.parent / "scenarios" / "star4.json"


def c1_air_rate():
    rate = phy.air_bit_rate_bps(phy.RadioParams(spreading_factor=12, bandwidth_hz=500_000, coding_rate_denominator=5))
    err = abs(rate - 1170.0) / 1170.0
    return rate == 1171.875 and err <= 0.005, f"{rate} bps, {err:.3%} from 1.17 kbps"


def c2_link_budget():
    lb = phy.link_budget_db(phy.RadioParams())
    return lb == 170.0, f"{lb} dB"


def c3_resolution():
    # sweep the stimulus finely across +-1.5 g and measure the largest jump in the reported mg
    model = sensors.Adxl362Model()
    sensors.adxl_init(model)
    outputs = set()
    for i in range(-15000, 15001):
        model.apply_stimulus(i / 10000.0, 0.0, 0.0)
        outputs.add(round(sensors.adxl_read_xyz(model)[0] * model.scale_mg))
    vals = sorted(outputs)
    step = max(b - a for a, b in zip(vals, vals[1:]))
    return step <= 10, f"largest step {step} mg at +-{model.range_g} g"


def c4_range():
    t0 = time.perf_counter()
    p, m = phy.RadioParams(), phy.PathLossModel()
    at500 = phy.receive_decision(p, m, 500.0)
    at5k = phy.receive_decision(p, m, 5000.0)
    template = make_scenario([{"node_id": 6, "jitter_s": 0.0}], duration_s=120.0,
                             path_loss=phy.PathLossModel(exponent=4.0))
    sweep = range_sweep(template, [100, 500, 1000, 2000, 3000, 4000, 5000, 8000])
    ratios = [r for _, r in sweep.rows]
    finite = sweep.max_full_delivery_m is not None and ratios[-1] == 0.0
    elapsed = time.perf_counter() - t0
    ok = at500.received and at5k.received and finite and elapsed < 1.0
    return ok, (f"500 m {at500.rssi_dbm:.1f} dBm, 5 km {at5k.rssi_dbm:.1f} dBm, "
                f"n=4 cutoff after {sweep.max_full_delivery_m} m, {elapsed:.2f} s")


def _random_frame(rng):
    return TelemetryFrame(
        node_id=rng.choice(sorted(NODE_IDS)),
        accel_x_mg=rng.randint(-2**31, 2**31 - 1),
        accel_y_mg=rng.randint(-2**31, 2**31 - 1),
        accel_z_mg=rng.randint(-2**31, 2**31 - 1),
        temp_centi_c=rng.randint(TEMP_MIN_CENTI, TEMP_MAX_CENTI),
        pressure_centi_kpa=rng.randint(PRESSURE_MIN_CENTI, PRESSURE_MAX_CENTI),
        reserved=rng.randint(0, 255),
    )


def c5_codec():
    t0 = time.perf_counter()
    rng = random.Random(5)
    frames = [_random_frame(rng) for _ in range(10_000)]
    for nid in sorted(NODE_IDS):
        for temp in (TEMP_MIN_CENTI, TEMP_MAX_CENTI):
            for pres in (PRESSURE_MIN_CENTI, PRESSURE_MAX_CENTI):
                for acc in (-2**31, 2**31 - 1):
                    frames.append(TelemetryFrame(nid, acc, acc, acc, temp, pres))
    bad = 0
    for f in frames:
        wire = encode_frame(f)
        if len(wire) != FRAME_LEN or decode_frame(wire) != f or encode_frame(decode_frame(wire)) != wire:
            bad += 1
    elapsed = time.perf_counter() - t0
    return bad == 0 and elapsed < 5.0, f"{len(frames)} frames, {bad} mismatches, {elapsed:.2f} s"


def c6_toa():
    t0 = time.perf_counter()
    worst, monotone, cases = 0.0, True, 0
    for sf in range(7, 13):
        for bw in (125_000, 250_000, 500_000):
            p = phy.RadioParams(spreading_factor=sf, bandwidth_hz=bw)
            prev = -1.0
            for n in range(65):
                got = phy.time_on_air_s(p, n)
                want, _ = toa_oracle_s(sf, bw, p.coding_rate_denominator, p.preamble_symbols, n,
                                       p.explicit_header, p.radio_crc_on, p.low_data_rate_opt)
                worst = max(worst, abs(got - float(want)))
                monotone &= got >= prev
                prev = got
                cases += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and monotone and elapsed < 5.0
    return ok, f"{cases} cases, max error {worst:.2e} s, monotone={monotone}, {elapsed:.2f} s"


def c7_determinism():
    t0 = time.perf_counter()
    scenario = load_scenario(STAR4)
    same = run_scenario(scenario).to_json() == run_scenario(scenario).to_json()
    rng = random.Random(7)
    violations = 0
    for _ in range(100):
        for t in run_scenario(random_scenario(rng)).nodes.values():
            if t.sent != t.delivered + t.collided + t.out_of_range:
                violations += 1
    elapsed = time.perf_counter() - t0
    ok = same and violations == 0 and elapsed < 30.0
    return ok, f"byte-identical={same}, {violations} conservation violations in 100 scenarios, {elapsed:.2f} s"


def c8_collision():
    t0 = time.perf_counter()
    equal = run_scenario(make_scenario([
        {"node_id": 6, "distance_m": 300.0, "jitter_s": 0.0},
        {"node_id": 7, "distance_m": 300.0, "jitter_s": 0.0},
    ]))
    collided = all(t.sent > 0 and t.collided == t.sent for t in equal.nodes.values())
    # exponent 0.6 across one decade of distance gives exactly 6.0 dB
    results = {}
    for label, exponent, far in (("6 dB", 0.6, 1000.0), ("10 dB", 1.0, 1000.0)):
        r = run_scenario(make_scenario([
            {"node_id": 6, "distance_m": 100.0, "jitter_s": 0.0},
            {"node_id": 7, "distance_m": far, "jitter_s": 0.0},
        ], path_loss=phy.PathLossModel(exponent=exponent)))
        results[label] = r.nodes[6].delivered == r.nodes[6].sent > 0 and r.nodes[7].delivered == 0
    elapsed = time.perf_counter() - t0
    ok = collided and all(results.values()) and elapsed < 5.0
    return ok, f"0 dB all collided={collided}, stronger delivered {results}, {elapsed:.2f} s"


def c9_pipeline():
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        sink = NdjsonFileSink(Path(tmp) / "uplink.ndjson")
        gw = Gateway()
        report = run_scenario(load_scenario(STAR4), gateway=gw)
        gw.flush(sink)
        store = Store(Path(tmp) / "store.ndjson")
        first = store.ingest_lines(sink.lines())
        got = store.query(0, 2**62)
        before = (Path(tmp) / "store.ndjson").read_bytes()
        again = store.ingest_lines(sink.lines())
        reopened = Store(Path(tmp) / "store.ndjson")
        idempotent = (
            again.accepted == 0
            and again.duplicates == first.accepted
            and (Path(tmp) / "store.ndjson").read_bytes() == before
            and len(reopened.query(0, 2**62)) == len(got)
        )
    elapsed = time.perf_counter() - t0
    ok = report.delivered > 0 and len(got) == report.delivered and idempotent and elapsed < 30.0
    return ok, f"delivered {report.delivered}, queried {len(got)}, idempotent={idempotent}, {elapsed:.2f} s"


def c10_energy():
    scenario = make_scenario([
        {"node_id": 6, "jitter_s": 0.0},
        {"node_id": 7, "jitter_s": 2.0, "start_offset_s": 20.0},
        {"node_id": 8, "jitter_s": 1.0, "start_offset_s": 40.0, "wake_period_s": 30.0},
    ], duration_s=900.0, seed=10)
    report = run_scenario(scenario)
    worst = 0.0
    for spec in scenario.nodes:
        t = report.nodes[spec.config.node_id]
        worst = max(worst, abs(t.energy_mah - energy_per_cycle_mah(spec.config) * t.cycles))
    cfg = NodeConfig(node_id=6)
    tx = energy_breakdown_mah(cfg)["tx"]
    expected_tx = 120.0 * phy.time_on_air_s(cfg.radio, FRAME_LEN) / 3600.0
    ok = worst <= 1e-6 and abs(tx - expected_tx) < 1e-15 and round(tx, 6) == 0.010991
    return ok, f"max ledger gap {worst:.2e} mAh, TX leg {tx:.9f} mAh"


def c11_excluded():
    return True, "economic claims (maintenance cost, monitoring efficiency) excluded; nothing asserted"


CRITERIA = [
    (1, "air rate", c1_air_rate),
    (2, "link budget", c2_link_budget),
    (3, "acceleration resolution", c3_resolution),
    (4, "range consistency", c4_range),
    (5, "codec round-trip", c5_codec),
    (6, "time-on-air oracle", c6_toa),
    (7, "simulation determinism and conservation", c7_determinism),
    (8, "collision rule", c8_collision),
    (9, "end-to-end pipeline", c9_pipeline),
    (10, "energy ledger", c10_energy),
    (11, "excluded economic claims", c11_excluded),
]


def _line(number, name, ok, detail):
    return f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}"


@pytest.mark.parametrize("number,name,check", CRITERIA, ids=[f"c{n}" for n, _, _ in CRITERIA])
def test_criterion(number, name, check, capsys):
    ok, detail = check()
    with capsys.disabled():
        print("\n" + _line(number, name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for number, name, check in CRITERIA:
        ok, detail = check()
        failed += not ok
        print(_line(number, name, ok, detail))
    sys.exit(1 if failed else 0)
