"""Command-line entry point.

Exit codes: 0 success, 1 domain error (error class name on stderr),
2 usage error (argparse; nothing on stdout).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional, Sequence

from . import cloud, netsim, node, phy, sensors
from .errors import RailmonError, ScenarioInvalid
from .frame import (
    FRAME_LEN,
    GATEWAY_ID,
    RxMeta,
    TelemetryFrame,
    decode_frame,
    encode_frame,
    frame_to_json,
)
from .gateway import Gateway, NdjsonFileSink


def _emit_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=False) + "\n")


def _centi(value: float) -> int:
    return int(round(value * 100))


def _radio_from_args(args) -> phy.RadioParams:
    return phy.RadioParams(
        spreading_factor=args.sf,
        bandwidth_hz=args.bw,
        coding_rate_denominator=args.crden,
        preamble_symbols=args.preamble,
        explicit_header=not args.implicit,
        radio_crc_on=not args.no_crc,
        low_data_rate_opt=args.ldro,
    )


def cmd_encode(args) -> int:
    frame = TelemetryFrame(
        node_id=args.node,
        accel_x_mg=args.ax,
        accel_y_mg=args.ay,
        accel_z_mg=args.az,
        temp_centi_c=_centi(args.temp),
        pressure_centi_kpa=_centi(args.pres),
        gateway_id=args.gw,
        reserved=args.reserved,
    )
    sys.stdout.write(encode_frame(frame).hex().upper() + "\n")
    return 0


def cmd_decode(args) -> int:
    text = args.hex if args.hex is not None else sys.stdin.read()
    text = "".join(text.split())
    try:
        wire = bytes.fromhex(text)
    except ValueError:
        raise _DomainUsage("BadHex", f"not a hex string: {text[:40]!r}")
    frame = decode_frame(wire)
    sys.stdout.write(frame_to_json(frame, RxMeta()) + "\n")
    return 0


class _DomainUsage(RailmonError):
    def __init__(self, name, message):
        super().__init__(message)
        self.name = name


def cmd_toa(args) -> int:
    p = _radio_from_args(args)
    if args.sweep is not None:
        rows = [
            {"payload_bytes": n, "symbols": phy.payload_symbols(p, n), "time_on_air_s": phy.time_on_air_s(p, n)}
            for n in range(0, args.sweep + 1)
        ]
        if args.human:
            print(f"{'PL':>4} {'symbols':>8} {'ToA [s]':>12}")
            for r in rows:
                print(f"{r['payload_bytes']:>4} {r['symbols']:>8} {r['time_on_air_s']:>12.6f}")
        else:
            w = csv.writer(sys.stdout, lineterminator="\n")
            w.writerow(["payload_bytes", "symbols", "time_on_air_s"])
            for r in rows:
                w.writerow([r["payload_bytes"], r["symbols"], repr(r["time_on_air_s"])])
        return 0
    out = {
        "spreading_factor": p.spreading_factor,
        "bandwidth_hz": p.bandwidth_hz,
        "coding_rate": f"4/{p.coding_rate_denominator}",
        "payload_bytes": args.payload,
        "symbol_time_s": phy.symbol_time_s(p),
        "bit_rate_bps": phy.air_bit_rate_bps(p),
        "payload_symbols": phy.payload_symbols(p, args.payload),
        "time_on_air_s": phy.time_on_air_s(p, args.payload),
    }
    if args.human:
        for k, v in out.items():
            print(f"{k:<18} {v}")
    else:
        _emit_json(out)
    return 0


def cmd_params(args) -> int:
    radio = phy.RadioParams()
    path_loss = phy.PathLossModel()
    cfg = node.NodeConfig(node_id=6)
    out = {
        "radio": radio.to_dict(),
        "path_loss": path_loss.to_dict(),
        "rx_timeout_symbols": phy.RX_TIMEOUT_SYMBOLS,
        "link_budget_db": phy.link_budget_db(radio),
        "air_bit_rate_bps": phy.air_bit_rate_bps(radio),
        "symbol_time_s": phy.symbol_time_s(radio),
        "frame_len_bytes": FRAME_LEN,
        "frame_time_on_air_s": phy.time_on_air_s(radio, FRAME_LEN),
        "max_range_m": phy.max_range_m(radio, path_loss),
        "gateway_id": GATEWAY_ID,
        "node": {
            "wake_period_s": cfg.wake_period_s,
            "jitter_s": cfg.jitter_s,
            "active_window_s": cfg.active_window_s,
            "battery_mah": cfg.battery_mah,
            "currents": asdict(cfg.currents),
            "energy_per_cycle_mah": node.energy_per_cycle_mah(cfg),
            "average_current_ma": node.average_current_ma(cfg),
            "battery_life_days": node.battery_life_days(cfg),
        },
        "sensors": {
            "spi_mode": sensors.SPI_MODE,
            "spi_clock_hz": sensors.SPI_CLOCK_HZ,
            "uart_baud": sensors.UART_BAUD,
            "adc_bits": sensors.AdcModel().resolution_bits,
            "adc_vref_volts": sensors.AdcModel().vref_volts,
            "lmt85_v0_volts": sensors.Lmt85Model().v0_volts,
            "lmt85_slope_v_per_c": sensors.Lmt85Model().slope_v_per_c,
        },
    }
    if args.human:
        print(json.dumps(out, indent=2))
    else:
        _emit_json(out)
    return 0


def _seed_override(args) -> Optional[int]:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("RAILMON_SEED")
    return int(env) if env else None


def cmd_simulate(args) -> int:
    scenario = netsim.load_scenario(args.scenario)
    seed = _seed_override(args)
    if seed is not None:
        scenario = scenario.with_seed(seed)
    gateway = Gateway() if args.uplink else None
    report = netsim.run_scenario(scenario, gateway=gateway)
    if gateway is not None:
        uplink = Path(args.uplink)
        uplink.write_text("", encoding="utf-8")
        gateway.flush(NdjsonFileSink(uplink))
    if args.timeline_csv:
        Path(args.timeline_csv).write_text(report.timeline_csv(), encoding="utf-8")
    text = report.to_json()
    if args.human:
        _print_report_human(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    elif not args.human:
        sys.stdout.write(text)
    return 0


def _print_report_human(report: netsim.SimReport) -> None:
    print(f"{'node':>4} {'sent':>6} {'deliv':>6} {'coll':>6} {'oor':>6} {'energy_mAh':>12}")
    for nid, t in sorted(report.nodes.items()):
        print(f"{nid:>4} {t.sent:>6} {t.delivered:>6} {t.collided:>6} {t.out_of_range:>6} {t.energy_mah:>12.6f}")
    print(f"delivery ratio {report.delivery_ratio:.4f}")


def cmd_range_sweep(args) -> int:
    if args.scenario:
        template = netsim.load_scenario(args.scenario)
    else:
        template = netsim.Scenario(
            duration_s=args.duration,
            seed=0,
            nodes=[netsim.NodeSpec(node.NodeConfig(node_id=6, jitter_s=0.0), 1.0)],
        )
    if args.exponent is not None:
        template.path_loss = replace(template.path_loss, exponent=args.exponent)
        template.validate()
    seed = _seed_override(args)
    if seed is not None:
        template = template.with_seed(seed)
    distances = [float(d) for d in args.distances.split(",") if d.strip()] if args.distances else []
    sweep = netsim.range_sweep(template, distances)
    if args.human:
        print(f"{'distance_m':>12} {'ratio':>8}")
        for d, r in sweep.rows:
            print(f"{d:>12g} {r:>8.3f}")
        print(f"max full-delivery distance: {sweep.max_full_delivery_m}")
    else:
        _emit_json(sweep.to_dict())
    return 0


def _read_input_lines(paths: Sequence[str]) -> list[str]:
    if not paths or paths == ["-"]:
        return sys.stdin.read().splitlines()
    lines = []
    for p in paths:
        try:
            lines.extend(Path(p).read_text(encoding="utf-8").splitlines())
        except OSError as exc:
            raise cloud.StoreUnavailable(f"{p}: {exc}") from exc
    return lines


def cmd_ingest(args) -> int:
    store = cloud.Store(args.store)
    result = store.ingest_lines(_read_input_lines(args.inputs))
    _emit_json(result.to_dict())
    return 0


def _write_readings(rows: list[dict], fmt: str) -> None:
    if fmt == "csv":
        if not rows:
            return
        w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    else:
        sys.stdout.write(json.dumps(rows) + "\n")


def cmd_query(args) -> int:
    store = cloud.Store(args.store)
    t_to = args.to if args.to is not None else 2**63 - 1
    readings = store.query(args.from_, t_to, args.node)
    _write_readings([r.to_dict() for r in readings], args.format)
    return 0


def cmd_alarms(args) -> int:
    store = cloud.Store(args.store)
    try:
        rules = cloud.load_rules(args.rules) if args.rules else []
    except (OSError, ValueError, TypeError) as exc:
        raise _DomainUsage("BadRules", f"{args.rules}: {exc}") from exc
    alarms = cloud.evaluate_alarms(store, rules)
    if args.format == "csv":
        flat = [
            {"rule": a.rule, "node_id": a.reading.node_id, "fired_at_ms": a.fired_at_ms, "value": a.value}
            for a in alarms
        ]
        _write_readings(flat, "csv")
    else:
        sys.stdout.write(json.dumps([a.to_dict() for a in alarms]) + "\n")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="railmon", description="LoRa rail-track monitoring toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="encode a telemetry frame to hex")
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--gw", type=lambda s: int(s, 0), default=GATEWAY_ID)
    p.add_argument("--reserved", type=int, default=0)
    p.add_argument("--ax", type=int, default=0, help="milli-g")
    p.add_argument("--ay", type=int, default=0, help="milli-g")
    p.add_argument("--az", type=int, default=0, help="milli-g")
    p.add_argument("--temp", type=float, default=0.0, help="degC")
    p.add_argument("--pres", type=float, default=0.0, help="kPa")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode hex (argument or stdin) to JSON")
    p.add_argument("hex", nargs="?")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("toa", help="symbol time, air bit rate and time-on-air")
    p.add_argument("--sf", type=int, default=12)
    p.add_argument("--bw", type=int, default=500_000)
    p.add_argument("--crden", type=int, default=5)
    p.add_argument("--preamble", type=int, default=8)
    p.add_argument("--payload", type=int, default=FRAME_LEN)
    p.add_argument("--implicit", action="store_true")
    p.add_argument("--no-crc", action="store_true")
    p.add_argument("--ldro", action="store_true")
    p.add_argument("--sweep", type=int, metavar="MAX_PL", help="emit ToA table for payloads 0..MAX_PL")
    p.add_argument("--human", action="store_true")
    p.set_defaults(func=cmd_toa)

    p = sub.add_parser("params", help="print default parameters")
    p.add_argument("--human", action="store_true")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("simulate", help="run a scenario file")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--uplink", help="write gateway uplink NDJSON here")
    p.add_argument("--timeline-csv")
    p.add_argument("--human", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("range-sweep", help="delivery ratio versus distance")
    p.add_argument("scenario", nargs="?")
    p.add_argument("--distances", default="100,500,1000,5000")
    p.add_argument("--exponent", type=float)
    p.add_argument("--duration", type=float, default=600.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--human", action="store_true")
    p.set_defaults(func=cmd_range_sweep)

    p = sub.add_parser("ingest", help="ingest uplink NDJSON into a store")
    p.add_argument("--store", required=True)
    p.add_argument("inputs", nargs="*")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", help="readings in a time range")
    p.add_argument("--store", required=True)
    p.add_argument("--node", type=int)
    p.add_argument("--from", dest="from_", type=int, default=0)
    p.add_argument("--to", type=int)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("alarms", help="evaluate threshold rules over a store")
    p.add_argument("--store", required=True)
    p.add_argument("--rules")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_alarms)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    env_seed = os.environ.get("RAILMON_SEED")
    if env_seed and getattr(args, "seed", 0) is None:
        try:
            int(env_seed)
        except ValueError:
            parser.error(f"RAILMON_SEED must be an integer, got {env_seed!r}")
    try:
        return args.func(args)
    except _DomainUsage as exc:
        sys.stderr.write(f"{exc.name}: {exc}\n")
        return 1
    except ScenarioInvalid as exc:
        sys.stderr.write("ScenarioInvalid: " + "; ".join(exc.problems) + "\n")
        return 1
    except RailmonError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
