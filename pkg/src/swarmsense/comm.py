"""Inter-UAV wireless links: path loss, spectral attenuation, interference, SINR gating."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .config import WorldConfig
from .world import DegenerateGeometryError, Position3D, distance

# Attenuation in dB by spectral distance between two channel indices.
ATTENUATION_BY_SPECTRAL_DISTANCE = {0: 0.0, 1: 20.0, 2: 40.0, 3: 50.0, 4: 60.0}
ATTENUATION_NEAR_BAND = 95.0   # distance >= 5 but carriers within 5 percent
ATTENUATION_FAR_BAND = 110.0


@dataclass(frozen=True)
class ChannelPlan:
    """One carrier per UAV on an arithmetic frequency grid."""

    carriers: tuple[float, ...]
    base: float
    spacing: float

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.carriers, self.carriers[1:])):
            raise ValueError("carriers must be strictly increasing")


class ReceptionOutcome(Enum):
    DECODED = "decoded"          # SINR at or above the decode threshold
    DETECTED_ONLY = "detected"   # presence noticed, content lost
    LOST = "lost"                # nothing received


@dataclass(frozen=True)
class LinkBudget:
    """Directed transmitter-to-receiver budget for one step, all in dB/dBm."""

    tx_power: float
    path_loss: float
    rx_power: float
    interference: float  # aggregated at the receiver; -inf when no interferer
    sinr: float


def path_loss(p_tx: Position3D, p_rx: Position3D, shadow: float) -> float:
    """Distance law plus a shadow-fading term drawn upstream, in dB."""
    d = distance(p_tx, p_rx)
    if d <= 0.0:
        raise DegenerateGeometryError("path loss undefined at zero distance")
    return 68.08 + 22.5 * math.log10(d) + shadow


def channel_attenuation(rx_idx: int, tx_idx: int, plan: ChannelPlan) -> float:
    """Power attenuation in dB seen on the receiver channel from the given channel."""
    spectral = abs(rx_idx - tx_idx)
    if spectral in ATTENUATION_BY_SPECTRAL_DISTANCE:
        return ATTENUATION_BY_SPECTRAL_DISTANCE[spectral]
    f_rx = plan.carriers[rx_idx]
    f_tx = plan.carriers[tx_idx]
    if abs((f_rx - f_tx) / f_rx) <= 0.05:
        return ATTENUATION_NEAR_BAND
    return ATTENUATION_FAR_BAND


def interference(
    rx: int,
    tx: int,
    tx_powers: Sequence[float],
    positions: Sequence[Position3D],
    shadows: Mapping[tuple[int, int], float],
    plan: ChannelPlan,
) -> float:
    """Aggregate interference at `rx` while decoding `tx`, in dBm.

    Every other transmitter contributes its received power attenuated by the
    spectral distance of its channel; contributions add as linear power. An
    empty interferer set yields -inf (zero linear power).
    """
    total_mw = 0.0
    for l in range(len(positions)):
        if l == tx or l == rx:
            continue
        rx_power = tx_powers[l] - path_loss(positions[l], positions[rx], shadows[(l, rx)])
        total_mw += 10.0 ** ((rx_power - channel_attenuation(rx, l, plan)) / 10.0)
    if total_mw == 0.0:
        return float("-inf")
    return 10.0 * math.log10(total_mw)


def classify(gamma: float, cfg: WorldConfig) -> ReceptionOutcome:
    """Map a SINR value to its reception outcome; boundaries go to the stronger claim."""
    if gamma >= cfg.gamma2:
        return ReceptionOutcome.DECODED
    if gamma > cfg.gamma1:
        return ReceptionOutcome.DETECTED_ONLY
    return ReceptionOutcome.LOST


def sinr(
    tx_power: float,
    path_loss_db: float,
    interference_dbm: float,
    cfg: WorldConfig,
) -> tuple[LinkBudget, ReceptionOutcome]:
    """Full directed link budget and its reception outcome.

    Interference and the offset noise floor combine as linear powers by
    default; with cfg.literal_db_sinr both are subtracted directly in dB.
    """
    rx_power = tx_power - path_loss_db
    if interference_dbm == float("-inf"):
        gamma = rx_power - cfg.p_n - cfg.sinr_offset
    elif cfg.literal_db_sinr:
        gamma = rx_power - interference_dbm - cfg.p_n - cfg.sinr_offset
    else:
        interference_mw = 10.0 ** (interference_dbm / 10.0)
        floor_mw = 10.0 ** ((cfg.p_n + cfg.sinr_offset) / 10.0)
        gamma = rx_power - 10.0 * math.log10(interference_mw + floor_mw)
    budget = LinkBudget(tx_power, path_loss_db, rx_power, interference_dbm, gamma)
    return budget, classify(gamma, cfg)
