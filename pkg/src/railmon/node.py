"""Sensor-node duty cycle and energy ledger.

A node cycles Init -> (Sample -> Encode -> Transmit -> Sleep)*. Each call to
:meth:`SensorNode.step` executes the current phase starting at ``now_s``,
debits that phase's charge up front and returns the time the next phase
starts. Per-cycle timing, for wake period P, sample window W, random TX
backoff U and time-on-air T::

    Sample   W          listen current
    Encode   U          sleep current (frame built, held for its TX slot)
    Transmit T          TX current
    Sleep    P - W-U-T  sleep current

so every cycle spans exactly P and costs the same charge regardless of U.
"""

from __future__ import annotations

import enum
import random
from dataclasses import asdict, dataclass, field
from typing import Optional

from . import sensors
from .errors import ClockRegression, ScenarioInvalid
from .frame import (
    FRAME_LEN,
    NODE_IDS,
    PRESSURE_MAX_CENTI,
    PRESSURE_MIN_CENTI,
    TEMP_MAX_CENTI,
    TEMP_MIN_CENTI,
    TelemetryFrame,
    encode_frame,
)
from .phy import RadioParams, time_on_air_s

SECONDS_PER_HOUR = 3600.0
SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class Currents:
    tx_ma: float = 120.0
    listen_ma: float = 15.0
    sleep_ua: float = 20.0
    sensor_ua: float = 2.0

    @property
    def sleep_ma(self) -> float:
        return (self.sleep_ua + self.sensor_ua) / 1000.0


@dataclass(frozen=True)
class NodeConfig:
    node_id: int
    wake_period_s: float = 60.0
    jitter_s: float = 2.0
    radio: RadioParams = field(default_factory=RadioParams)
    currents: Currents = field(default_factory=Currents)
    battery_mah: float = 2000.0
    active_window_s: float = 0.05
    start_offset_s: float = 0.0
    odr_hz: float = 100.0

    def __post_init__(self):
        problems = []
        if self.node_id not in NODE_IDS:
            problems.append(f"node_id {self.node_id} not in 6..9")
        if self.jitter_s < 0:
            problems.append("jitter_s must be >= 0")
        if self.active_window_s < 0:
            problems.append("active_window_s must be >= 0")
        if self.start_offset_s < 0:
            problems.append("start_offset_s must be >= 0")
        if self.battery_mah <= 0:
            problems.append("battery_mah must be positive")
        c = self.currents
        if min(c.tx_ma, c.listen_ma, c.sleep_ua, c.sensor_ua) < 0:
            problems.append("currents must be non-negative")
        busy = self.active_window_s + self.jitter_s + self.frame_airtime_s
        if not self.wake_period_s > busy:
            problems.append(
                f"wake_period_s {self.wake_period_s} must exceed sample window + jitter + "
                f"time-on-air ({busy:.6f} s)"
            )
        if problems:
            raise ScenarioInvalid(problems)

    @property
    def frame_airtime_s(self) -> float:
        return time_on_air_s(self.radio, FRAME_LEN)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["radio"] = self.radio.to_dict()
        return d


class Phase(enum.Enum):
    INIT = "Init"
    SAMPLE = "Sample"
    ENCODE = "Encode"
    TRANSMIT = "Transmit"
    SLEEP = "Sleep"


_NEXT = {
    Phase.INIT: Phase.SAMPLE,
    Phase.SAMPLE: Phase.ENCODE,
    Phase.ENCODE: Phase.TRANSMIT,
    Phase.TRANSMIT: Phase.SLEEP,
    Phase.SLEEP: Phase.SAMPLE,
}


@dataclass
class NodeState:
    phase: Phase = Phase.INIT
    consumed_mah: float = 0.0
    frames_sent: int = 0
    cycles: int = 0
    last_frame: Optional[TelemetryFrame] = None
    last_now_s: Optional[float] = None
    next_step_s: float = 0.0
    backoff_s: float = 0.0
    pending_wire: Optional[bytes] = None


def energy_breakdown_mah(cfg: NodeConfig) -> dict:
    c = cfg.currents
    toa = cfg.frame_airtime_s
    sleep_s = cfg.wake_period_s - cfg.active_window_s - toa
    return {
        "tx": c.tx_ma * toa / SECONDS_PER_HOUR,
        "active": c.listen_ma * cfg.active_window_s / SECONDS_PER_HOUR,
        "sleep": sleep_s * c.sleep_ma / SECONDS_PER_HOUR,
    }


def energy_per_cycle_mah(cfg: NodeConfig) -> float:
    b = energy_breakdown_mah(cfg)
    return b["tx"] + b["active"] + b["sleep"]


def average_current_ma(cfg: NodeConfig) -> float:
    return energy_per_cycle_mah(cfg) * SECONDS_PER_HOUR / cfg.wake_period_s


def battery_life_days(cfg: NodeConfig) -> float:
    cycles_per_day = SECONDS_PER_DAY / cfg.wake_period_s
    per_cycle = energy_per_cycle_mah(cfg)
    if per_cycle == 0:
        return float("inf")
    return cfg.battery_mah / (per_cycle * cycles_per_day)


class SensorNode:
    """One sensor node: its sensors, its duty-cycle state and its energy ledger."""

    def __init__(self, cfg: NodeConfig, seed: Optional[int] = None):
        self.cfg = cfg
        self.state = NodeState(next_step_s=cfg.start_offset_s)
        self.rng = random.Random(seed)
        self.adxl = sensors.Adxl362Model()
        self.lmt85 = sensors.Lmt85Model()
        self.pressure = sensors.PressureSensorModel()
        self.adc = sensors.AdcModel()
        self._toa = cfg.frame_airtime_s

    @property
    def phase(self) -> Phase:
        return self.state.phase

    def step(self, stimulus: Optional[sensors.Stimulus], now_s: float) -> Optional[bytes]:
        """Run the current phase at ``now_s``; returns the wire frame on Transmit, else None."""
        st = self.state
        if st.last_now_s is not None and now_s < st.last_now_s:
            raise ClockRegression(f"now_s {now_s} < previous {st.last_now_s}")
        st.last_now_s = now_s
        cfg, c = self.cfg, self.cfg.currents
        phase = st.phase
        emitted = None

        if phase is Phase.INIT:
            sensors.adxl_init(self.adxl, odr_hz=cfg.odr_hz)
            if not sensors.adxl_device_ok(self.adxl):
                raise RuntimeError("ADXL362 device ID mismatch")
            duration, current = 0.0, 0.0
        elif phase is Phase.SAMPLE:
            st.last_frame = self._sample(stimulus or sensors.Stimulus())
            duration, current = cfg.active_window_s, c.listen_ma
        elif phase is Phase.ENCODE:
            st.pending_wire = encode_frame(st.last_frame)
            st.backoff_s = self.rng.uniform(0.0, cfg.jitter_s) if cfg.jitter_s > 0 else 0.0
            duration, current = st.backoff_s, c.sleep_ma
        elif phase is Phase.TRANSMIT:
            emitted, st.pending_wire = st.pending_wire, None
            st.frames_sent += 1
            duration, current = self._toa, c.tx_ma
        else:
            duration = cfg.wake_period_s - cfg.active_window_s - st.backoff_s - self._toa
            current = c.sleep_ma
            st.cycles += 1

        st.consumed_mah += current * duration / SECONDS_PER_HOUR
        st.next_step_s = now_s + duration
        st.phase = _NEXT[phase]
        return emitted

    def run_cycle(self, stimulus: Optional[sensors.Stimulus], now_s: float) -> bytes:
        """Step through one whole Sample..Sleep cycle starting at ``now_s``."""
        if self.state.phase is Phase.INIT:
            self.step(stimulus, now_s)
        if self.state.phase is not Phase.SAMPLE:
            raise RuntimeError(f"cycle must start at Sample, node is in {self.state.phase.value}")
        wire = None
        t = now_s
        for _ in range(4):
            out = self.step(stimulus, t)
            wire = wire or out
            t = self.state.next_step_s
        return wire

    def _sample(self, stim: sensors.Stimulus) -> TelemetryFrame:
        self.adxl.apply_stimulus(stim.ax_g, stim.ay_g, stim.az_g)
        raw = sensors.adxl_read_xyz(self.adxl)
        scale = self.adxl.scale_mg
        ax, ay, az = (int(round(r * scale)) for r in raw)

        temp = min(max(stim.temp_c, sensors.TEMP_MIN_C), sensors.TEMP_MAX_C)
        code = sensors.adc_sample(self.adc, sensors.lmt85_voltage(self.lmt85, temp))
        temp_meas = sensors.lmt85_temperature(self.lmt85, sensors.adc_to_volts(self.adc, code))
        temp_centi = min(max(round(temp_meas * 100), TEMP_MIN_CENTI), TEMP_MAX_CENTI)

        kpa = min(max(stim.pressure_kpa, self.pressure.kpa_min), self.pressure.kpa_max)
        code = sensors.adc_sample(self.adc, sensors.pressure_voltage(self.pressure, kpa))
        kpa_meas = sensors.voltage_to_kpa(sensors.adc_to_volts(self.adc, code), self.pressure)
        pres_centi = min(max(round(kpa_meas * 100), PRESSURE_MIN_CENTI), PRESSURE_MAX_CENTI)

        return TelemetryFrame(
            node_id=self.cfg.node_id,
            accel_x_mg=ax,
            accel_y_mg=ay,
            accel_z_mg=az,
            temp_centi_c=temp_centi,
            pressure_centi_kpa=pres_centi,
        )
