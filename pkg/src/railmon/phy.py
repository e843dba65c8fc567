"""LoRa PHY arithmetic: symbol time, air rate, time-on-air, link budget, path loss."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

from .errors import DegenerateParams, DomainError, ParamError

# SX127x register-level receive timeout, in symbols; configuration constant only
RX_TIMEOUT_SYMBOLS = 5


@dataclass(frozen=True)
class RadioParams:
    spreading_factor: int = 12
    bandwidth_hz: int = 500_000
    coding_rate_denominator: int = 5
    preamble_symbols: int = 8
    explicit_header: bool = True
    radio_crc_on: bool = True
    low_data_rate_opt: bool = False
    tx_power_dbm: float = 22.0
    rx_sensitivity_dbm: float = -148.0
    frequency_hz: int = 433_000_000

    def __post_init__(self):
        if not 6 <= self.spreading_factor <= 12:
            raise ParamError(f"spreading_factor {self.spreading_factor} not in 6..12")
        if self.bandwidth_hz <= 0:
            raise ParamError(f"bandwidth_hz must be positive, got {self.bandwidth_hz}")
        if not 5 <= self.coding_rate_denominator <= 8:
            raise ParamError(
                f"coding_rate_denominator {self.coding_rate_denominator} not in 5..8"
            )
        if self.preamble_symbols <= 0:
            raise ParamError("preamble_symbols must be positive")
        if self.frequency_hz <= 0:
            raise ParamError("frequency_hz must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RadioParams":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ParamError(f"unknown radio keys: {sorted(extra)}")
        return cls(**data)


def free_space_loss_db(frequency_hz: float, distance_m: float = 1.0) -> float:
    """Friis free-space loss; 147.55 dB is 20*log10(4*pi/c)."""
    return 20 * math.log10(distance_m) + 20 * math.log10(frequency_hz) - 147.55


@dataclass(frozen=True)
class PathLossModel:
    reference_distance_m: float = 1.0
    reference_loss_db: float = field(default_factory=lambda: free_space_loss_db(433e6))
    exponent: float = 2.8
    capture_threshold_db: float = 6.0

    def __post_init__(self):
        if self.exponent <= 0:
            raise ParamError("path-loss exponent must be positive")
        if self.reference_loss_db < 0:
            raise ParamError("reference_loss_db must be non-negative")
        if self.reference_distance_m <= 0:
            raise ParamError("reference_distance_m must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PathLossModel":
        extra = set(data) - set(cls.__dataclass_fields__)
        if extra:
            raise ParamError(f"unknown path_loss keys: {sorted(extra)}")
        return cls(**data)


class Reception(NamedTuple):
    received: bool
    rssi_dbm: float


def symbol_time_s(p: RadioParams) -> float:
    return (1 << p.spreading_factor) / p.bandwidth_hz


def air_bit_rate_bps(p: RadioParams) -> float:
    return p.spreading_factor * (p.bandwidth_hz / (1 << p.spreading_factor)) * (
        4 / p.coding_rate_denominator
    )


def payload_symbols(p: RadioParams, payload_len_bytes: int) -> int:
    if payload_len_bytes < 0:
        raise DomainError("payload length must be non-negative")
    sf = p.spreading_factor
    de = 1 if p.low_data_rate_opt else 0
    ih = 0 if p.explicit_header else 1
    crc = 1 if p.radio_crc_on else 0
    denom = 4 * (sf - 2 * de)
    if denom <= 0:
        raise DegenerateParams(f"SF {sf} with low-data-rate optimisation leaves no bits per symbol")
    numer = 8 * payload_len_bytes - 4 * sf + 28 + 16 * crc - 20 * ih
    # integer ceil division; float ceil misbehaves near exact multiples
    blocks = -(-numer // denom)
    return 8 + max(blocks * p.coding_rate_denominator, 0)


def time_on_air_s(p: RadioParams, payload_len_bytes: int) -> float:
    t_sym = symbol_time_s(p)
    n_payload = payload_symbols(p, payload_len_bytes)
    return (p.preamble_symbols + 4.25) * t_sym + n_payload * t_sym


def link_budget_db(p: RadioParams) -> float:
    return p.tx_power_dbm - p.rx_sensitivity_dbm


def path_loss_db(m: PathLossModel, distance_m: float) -> float:
    if not distance_m >= m.reference_distance_m:
        raise DomainError(
            f"distance {distance_m} m is below the reference distance {m.reference_distance_m} m"
        )
    return m.reference_loss_db + 10 * m.exponent * math.log10(distance_m / m.reference_distance_m)


def rssi_dbm(p: RadioParams, m: PathLossModel, distance_m: float) -> float:
    return p.tx_power_dbm - path_loss_db(m, distance_m)


def receive_decision(p: RadioParams, m: PathLossModel, distance_m: float) -> Reception:
    rssi = rssi_dbm(p, m, distance_m)
    return Reception(rssi >= p.rx_sensitivity_dbm, rssi)


def max_range_m(p: RadioParams, m: PathLossModel) -> float:
    """Distance at which RSSI meets sensitivity exactly."""
    margin = link_budget_db(p) - m.reference_loss_db
    return m.reference_distance_m * 10 ** (margin / (10 * m.exponent))
