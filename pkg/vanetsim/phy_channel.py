"""
Radio propagation: free-space (Friis) below the crossover distance,
two-ray ground reflection beyond it, and threshold based reception.

With the default calibration (0.2818 W at 2412 MHz, 1.5 m antennas,
RXThresh 3.65262e-10 W) the reception range comes out at 250 m.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np

from vanetsim.constants import (
    ANTENNA_HEIGHT_M,
    CS_THRESH_FACTOR,
    FREQUENCY_HZ,
    RX_THRESH_W,
    SPEED_OF_LIGHT,
    TX_POWER_W,
)
from vanetsim.utils import verify_non_negative, verify_positive

RANGE_TOLERANCE_M = 0.01


class Reception(str, Enum):
    RECEIVABLE = "receivable"
    SENSED_ONLY = "sensed_only"
    BELOW_NOISE = "below_noise"


@dataclass(frozen=True)
class PhyConfig:
    pt: float = TX_POWER_W
    gt: float = 1.0
    gr: float = 1.0
    ht: float = ANTENNA_HEIGHT_M
    hr: float = ANTENNA_HEIGHT_M
    sys_loss: float = 1.0
    frequency: float = FREQUENCY_HZ
    rx_thresh: float = RX_THRESH_W
    cs_thresh: Optional[float] = None

    def __post_init__(self):
        if self.cs_thresh is None:
            object.__setattr__(self, "cs_thresh", CS_THRESH_FACTOR * self.rx_thresh)
        for name in ("pt", "gt", "gr", "frequency", "rx_thresh", "cs_thresh"):
            verify_positive(name, getattr(self, name))
        verify_non_negative("ht", self.ht)
        verify_non_negative("hr", self.hr)
        if not self.sys_loss >= 1:
            raise ValueError(f"sys_loss must be at least 1, got {self.sys_loss!r}")
        if not self.cs_thresh < self.rx_thresh:
            raise ValueError(
                f"cs_thresh ({self.cs_thresh}) must be below rx_thresh ({self.rx_thresh})")

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.frequency

    @property
    def crossover_distance(self):
        return 4 * math.pi * self.ht * self.hr / self.wavelength


@dataclass(frozen=True)
class Transmission:
    """A frame on the air, as seen by every potential receiver."""

    frame_id: int
    sender: str
    sender_position: Any
    start: float
    duration: float
    power: float = TX_POWER_W
    frame: Any = field(default=None, compare=False)

    def __post_init__(self):
        verify_positive("duration", self.duration)

    @property
    def end(self):
        return self.start + self.duration

    def overlaps(self, other):
        return self.start < other.end and other.start < self.end


def _check_distance(d):
    if np.any(np.asarray(d) <= 0):
        raise ValueError(f"distance must be positive, got {d!r}")


def friis_power(cfg: PhyConfig, d):
    _check_distance(d)

    return cfg.pt * cfg.gt * cfg.gr * cfg.wavelength ** 2 / (
        (4 * math.pi) ** 2 * np.square(d) * cfg.sys_loss)


def two_ray_power(cfg: PhyConfig, d):
    _check_distance(d)

    return cfg.pt * cfg.gt * cfg.gr * cfg.ht ** 2 * cfg.hr ** 2 / (
        np.power(d, 4) * cfg.sys_loss)


def propagation_power(cfg: PhyConfig, d):
    """Received power in watts; accepts a scalar or an array of distances."""
    _check_distance(d)
    d = np.asarray(d, dtype=float)
    power = np.where(d < cfg.crossover_distance, friis_power(cfg, d), two_ray_power(cfg, d))

    return float(power) if power.ndim == 0 else power


def received_powers(cfg: PhyConfig, sender, positions):
    """
    Power at each row of ``positions`` (an ``(n, 2)`` array) from a sender
    at ``sender``. Co-located receivers get +inf.
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    d = np.hypot(positions[:, 0] - sender.x, positions[:, 1] - sender.y)
    power = np.full(d.shape, np.inf)
    apart = d > 0
    if np.any(apart):
        power[apart] = propagation_power(cfg, d[apart])

    return power


def classify_reception(cfg: PhyConfig, rx_power: float) -> Reception:
    if rx_power >= cfg.rx_thresh:
        return Reception.RECEIVABLE
    if rx_power >= cfg.cs_thresh:
        return Reception.SENSED_ONLY

    return Reception.BELOW_NOISE


def max_range(cfg: PhyConfig) -> float:
    """Largest distance still receivable, found by bisection."""
    lo, hi = RANGE_TOLERANCE_M, 1.0
    if propagation_power(cfg, lo) < cfg.rx_thresh:
        return 0.0
    while propagation_power(cfg, hi) >= cfg.rx_thresh:
        lo, hi = hi, hi * 2
    while hi - lo > RANGE_TOLERANCE_M:
        mid = (lo + hi) / 2
        if propagation_power(cfg, mid) >= cfg.rx_thresh:
            lo = mid
        else:
            hi = mid

    return lo
