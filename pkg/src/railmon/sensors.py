"""Behavioral models of the node's sensors and ADC.

Only the parts the node firmware touches are modeled: the ADXL362 register
map reachable over SPI (init and XYZ read path; FIFO and interrupts stay
off), the LMT85 linear transfer function, the ratiometric 0.5-4.5 V
pressure transducer, and a 12-bit successive-approximation ADC.
"""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import NotMeasuring, RangeError, UnknownRegister

# Bus configuration used by the firmware; recorded, not simulated.
SYSCLK_HZ = 72_000_000
SPI_PRESCALER = 8
SPI_CLOCK_HZ = SYSCLK_HZ // SPI_PRESCALER
SPI_MODE = 0  # CPOL=0, CPHA=0
ADXL362_MAX_SPI_HZ = 10_000_000
UART_BAUD = 115_200

CMD_WRITE = 0x0A
CMD_READ = 0x0B
CMD_READ_FIFO = 0x0D

REG_DEVID_AD = 0x00
REG_DEVID_MST = 0x01
REG_PARTID = 0x02
REG_REVID = 0x03
REG_XDATA = 0x08
REG_YDATA = 0x09
REG_ZDATA = 0x0A
REG_STATUS = 0x0B
REG_FIFO_ENTRIES_L = 0x0C
REG_FIFO_ENTRIES_H = 0x0D
REG_XDATA_L = 0x0E
REG_XDATA_H = 0x0F
REG_YDATA_L = 0x10
REG_YDATA_H = 0x11
REG_ZDATA_L = 0x12
REG_ZDATA_H = 0x13
REG_TEMP_L = 0x14
REG_TEMP_H = 0x15
REG_SOFT_RESET = 0x1F
REG_THRESH_ACT_L = 0x20
REG_ACT_INACT_CTL = 0x27
REG_FIFO_CONTROL = 0x28
REG_FIFO_SAMPLES = 0x29
REG_INTMAP1 = 0x2A
REG_INTMAP2 = 0x2B
REG_FILTER_CTL = 0x2C
REG_POWER_CTL = 0x2D
REG_SELF_TEST = 0x2E

SOFT_RESET_CODE = 0x52
DEVID_AD_VALUE = 0xAD

# address -> reset value
_READ_ONLY = {
    REG_DEVID_AD: DEVID_AD_VALUE,
    REG_DEVID_MST: 0x1D,
    REG_PARTID: 0xF2,
    REG_REVID: 0x01,
    REG_XDATA: 0,
    REG_YDATA: 0,
    REG_ZDATA: 0,
    REG_STATUS: 0x40,
    REG_FIFO_ENTRIES_L: 0,
    REG_FIFO_ENTRIES_H: 0,
    REG_XDATA_L: 0,
    REG_XDATA_H: 0,
    REG_YDATA_L: 0,
    REG_YDATA_H: 0,
    REG_ZDATA_L: 0,
    REG_ZDATA_H: 0,
    REG_TEMP_L: 0,
    REG_TEMP_H: 0,
}
_READ_WRITE = {addr: 0 for addr in range(REG_THRESH_ACT_L, REG_SELF_TEST + 1)}
_READ_WRITE[REG_FIFO_SAMPLES] = 0x80
_READ_WRITE[REG_FILTER_CTL] = 0x13
_WRITE_ONLY = {REG_SOFT_RESET: 0}

ODR_CODES = {0b000: 12.5, 0b001: 25.0, 0b010: 50.0, 0b011: 100.0, 0b100: 200.0, 0b101: 400.0}
_ODR_TO_CODE = {v: k for k, v in ODR_CODES.items()}
# FILTER_CTL[7:6] -> milli-g per LSB
RANGE_SCALE_MG = {0b00: 1.0, 0b01: 2.0, 0b10: 4.0, 0b11: 4.0}
RANGE_G = {0b00: 2, 0b01: 4, 0b10: 8, 0b11: 8}

MEASURE_MODE = 0b10
COUNT_MIN, COUNT_MAX = -2048, 2047  # 12-bit sign-extended


def _s16(lo: int, hi: int) -> int:
    value = lo | (hi << 8)
    return value - 0x10000 if value & 0x8000 else value


class Adxl362Model:
    """Register-level ADXL362 reachable through :meth:`transfer`.

    Data registers latch the applied stimulus only while POWER_CTL selects
    measurement mode.
    """

    def __init__(self):
        self.regs: dict[int, int] = {}
        self._stimulus_g = (0.0, 0.0, 0.0)
        self.reset()

    def reset(self) -> None:
        self.regs = {**_READ_ONLY, **_READ_WRITE, **_WRITE_ONLY}

    # -- derived state -------------------------------------------------

    @property
    def measuring(self) -> bool:
        return self.regs[REG_POWER_CTL] & 0b11 == MEASURE_MODE

    @property
    def mode(self) -> str:
        return "measurement" if self.measuring else "standby"

    @property
    def odr_hz(self) -> float:
        return ODR_CODES.get(self.regs[REG_FILTER_CTL] & 0b111, 400.0)

    @property
    def scale_mg(self) -> float:
        return RANGE_SCALE_MG[self.regs[REG_FILTER_CTL] >> 6]

    @property
    def range_g(self) -> int:
        return RANGE_G[self.regs[REG_FILTER_CTL] >> 6]

    # -- SPI ----------------------------------------------------------

    def transfer(self, tx: bytes) -> bytes:
        """Full-duplex SPI transaction; returns the bytes clocked out on MISO."""
        tx = bytes(tx)
        if len(tx) < 2:
            raise ValueError("SPI transaction needs a command and an address octet")
        command, address, data = tx[0], tx[1], tx[2:]
        if command == CMD_WRITE:
            for offset, value in enumerate(data):
                self._write(address + offset, value)
            return bytes(len(tx))
        if command == CMD_READ:
            out = [self._read(address + offset) for offset in range(len(data))]
            return bytes(2) + bytes(out)
        if command == CMD_READ_FIFO:
            # FIFO is kept disabled; reads return empty entries
            return bytes(len(tx))
        raise ValueError(f"unknown SPI command 0x{command:02X}")

    def _check(self, address: int) -> None:
        if address not in self.regs:
            raise UnknownRegister(f"register 0x{address:02X} is not modeled")

    def _read(self, address: int) -> int:
        self._check(address)
        if address in _WRITE_ONLY:
            return 0
        return self.regs[address]

    def _write(self, address: int, value: int) -> None:
        self._check(address)
        if address in _READ_ONLY:
            return
        if address == REG_SOFT_RESET:
            if value == SOFT_RESET_CODE:
                self.reset()
            return
        self.regs[address] = value & 0xFF
        if address == REG_POWER_CTL and self.measuring:
            self._latch()

    # -- stimulus -----------------------------------------------------

    def apply_stimulus(self, ax_g: float, ay_g: float, az_g: float) -> None:
        self._stimulus_g = (float(ax_g), float(ay_g), float(az_g))
        if self.measuring:
            self._latch()

    def _latch(self) -> None:
        scale = self.scale_mg
        regs = (REG_XDATA_L, REG_YDATA_L, REG_ZDATA_L)
        eight_bit = (REG_XDATA, REG_YDATA, REG_ZDATA)
        for g, lo_reg, short_reg in zip(self._stimulus_g, regs, eight_bit):
            counts = int(round(g * 1000.0 / scale))
            counts = max(COUNT_MIN, min(COUNT_MAX, counts))
            word = counts & 0xFFFF
            self.regs[lo_reg] = word & 0xFF
            self.regs[lo_reg + 1] = word >> 8
            self.regs[short_reg] = (counts >> 4) & 0xFF
        self.regs[REG_STATUS] |= 0x01


def adxl_spi_transaction(model: Adxl362Model, command: str, address: int, data: Sequence[int] = ()) -> bytes:
    """Run a read or write on ``model``.

    For reads, ``data`` only sets the transfer length (one dummy octet per
    register); the returned octets are the register contents.
    """
    if not 0 <= address <= 0xFF:
        raise UnknownRegister(f"address {address} is not an octet")
    if command == "write":
        model.transfer(bytes([CMD_WRITE, address, *data]))
        return b""
    if command == "read":
        length = max(len(data), 1)
        return model.transfer(bytes([CMD_READ, address]) + bytes(length))[2:]
    raise ValueError(f"command must be 'read' or 'write', not {command!r}")


def adxl_init(model: Adxl362Model, odr_hz: float = 100.0, range_g: int = 2) -> None:
    """Firmware bring-up: soft reset, FIFO off, range/ODR, then measurement mode."""
    if odr_hz not in _ODR_TO_CODE:
        raise RangeError(f"ODR {odr_hz} Hz not one of {sorted(_ODR_TO_CODE)}")
    range_bits = {2: 0b00, 4: 0b01, 8: 0b10}.get(range_g)
    if range_bits is None:
        raise RangeError(f"range +-{range_g} g not supported")
    adxl_spi_transaction(model, "write", REG_SOFT_RESET, [SOFT_RESET_CODE])
    adxl_spi_transaction(model, "write", REG_FIFO_CONTROL, [0x00])
    adxl_spi_transaction(model, "write", REG_INTMAP1, [0x00])
    adxl_spi_transaction(model, "write", REG_INTMAP2, [0x00])
    adxl_spi_transaction(model, "write", REG_FILTER_CTL, [(range_bits << 6) | 0x10 | _ODR_TO_CODE[odr_hz]])
    adxl_spi_transaction(model, "write", REG_POWER_CTL, [MEASURE_MODE])


def adxl_device_ok(model: Adxl362Model) -> bool:
    return adxl_spi_transaction(model, "read", REG_DEVID_AD)[0] == DEVID_AD_VALUE


def adxl_read_xyz(model: Adxl362Model) -> tuple[int, int, int]:
    """Burst-read XDATA_L..ZDATA_H and return signed counts."""
    if not model.measuring:
        raise NotMeasuring("ADXL362 is in standby")
    raw = adxl_spi_transaction(model, "read", REG_XDATA_L, bytes(6))
    return _s16(raw[0], raw[1]), _s16(raw[2], raw[3]), _s16(raw[4], raw[5])


# -- LMT85 ----------------------------------------------------------------

TEMP_MIN_C = -50.0
TEMP_MAX_C = 150.0


@dataclass(frozen=True)
class Lmt85Model:
    v0_volts: float = 1.8639
    slope_v_per_c: float = -0.0082

    def __post_init__(self):
        if self.slope_v_per_c >= 0:
            raise ValueError("LMT85 output must fall with temperature")


def lmt85_voltage(model: Lmt85Model, temp_c: float) -> float:
    if not TEMP_MIN_C <= temp_c <= TEMP_MAX_C:
        raise RangeError(f"temperature {temp_c} degC outside -50..150")
    return model.v0_volts + model.slope_v_per_c * temp_c


def lmt85_temperature(model: Lmt85Model, volts: float) -> float:
    return (volts - model.v0_volts) / model.slope_v_per_c


# -- pressure transducer ----------------------------------------------------

@dataclass(frozen=True)
class PressureSensorModel:
    v_min: float = 0.5
    v_max: float = 4.5
    kpa_min: float = 0.0
    kpa_max: float = 100.0


def pressure_voltage(model: PressureSensorModel, kpa: float) -> float:
    if not model.kpa_min <= kpa <= model.kpa_max:
        raise RangeError(f"pressure {kpa} kPa outside {model.kpa_min}..{model.kpa_max}")
    span = model.kpa_max - model.kpa_min
    volts = model.v_min + (kpa - model.kpa_min) / span * (model.v_max - model.v_min)
    return min(max(volts, model.v_min), model.v_max)


def voltage_to_kpa(volts: float, model: PressureSensorModel = PressureSensorModel()) -> float:
    span = model.kpa_max - model.kpa_min
    return model.kpa_min + (volts - model.v_min) / (model.v_max - model.v_min) * span


# -- ADC ------------------------------------------------------------------

@dataclass(frozen=True)
class AdcModel:
    resolution_bits: int = 12
    vref_volts: float = 3.3

    @property
    def full_scale(self) -> int:
        return (1 << self.resolution_bits) - 1

    @property
    def lsb_volts(self) -> float:
        return self.vref_volts / self.full_scale


def adc_sample(model: AdcModel, volts: float) -> int:
    code = round(volts / model.vref_volts * model.full_scale)
    return max(0, min(model.full_scale, code))


def adc_to_volts(model: AdcModel, code: int) -> float:
    return code * model.lsb_volts


# -- stimulus traces ------------------------------------------------------

STIMULUS_COLUMNS = ("t_s", "ax_g", "ay_g", "az_g", "temp_c", "pressure_kpa")


@dataclass(frozen=True)
class Stimulus:
    ax_g: float = 0.0
    ay_g: float = 0.0
    az_g: float = 0.0
    temp_c: float = 0.0
    pressure_kpa: float = 0.0


class StimulusTrace:
    """Time-indexed stimulus with zero-order hold between rows."""

    def __init__(self, rows: Iterable[tuple[float, Stimulus]]):
        self.rows = sorted(rows, key=lambda r: r[0])
        self._times = [t for t, _ in self.rows]

    @classmethod
    def constant(cls, stimulus: Stimulus = Stimulus()) -> "StimulusTrace":
        return cls([(0.0, stimulus)])

    @classmethod
    def from_csv(cls, path) -> "StimulusTrace":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh, skipinitialspace=True)
            missing = set(STIMULUS_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            rows = []
            for rec in reader:
                rows.append(
                    (
                        float(rec["t_s"]),
                        Stimulus(*(float(rec[c]) for c in STIMULUS_COLUMNS[1:])),
                    )
                )
        if not rows:
            raise ValueError(f"{path}: no samples")
        return cls(rows)

    def at(self, t_s: float) -> Stimulus:
        i = bisect.bisect_right(self._times, t_s) - 1
        return self.rows[max(i, 0)][1]
