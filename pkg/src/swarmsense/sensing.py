"""Bistatic sensing links: per-link SNR, threshold-and-rank gating, shared team reward."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .config import WorldConfig
from .world import BaseStation, DegenerateGeometryError, Position3D, Target, distance

SPEED_OF_LIGHT = 299_792_458.0  # m/s


def spreading_constant_db(f_c: float) -> float:
    """Frequency-dependent constant of the bistatic radar budget, in dB."""
    return 10.0 * math.log10(SPEED_OF_LIGHT**2 / ((4.0 * math.pi) ** 3 * f_c**2))


def sensing_snr_from_distances(
    tx_power: float,
    tx_gain: float,
    rx_gain: float,
    rcs: float,
    d_tx_target: float,
    d_target_rx: float,
    cfg: WorldConfig,
) -> float:
    """Bistatic sensing SNR in dB given the two leg distances in meters."""
    if d_tx_target <= 0.0 or d_target_rx <= 0.0:
        raise DegenerateGeometryError(
            f"bistatic legs must be positive, got {d_tx_target} m and {d_target_rx} m"
        )
    return (
        tx_power
        + tx_gain
        + rx_gain
        - cfg.p_n
        + spreading_constant_db(cfg.f_c)
        + rcs
        - 20.0 * math.log10(d_tx_target * d_target_rx)
    )


def sensing_snr(bs: BaseStation, target: Target, uav_pos: Position3D, cfg: WorldConfig) -> float:
    """SNR of one (base station, target, UAV) sensing link, in dB."""
    d1 = distance(bs.position, target.position)
    d2 = distance(target.position, uav_pos)
    return sensing_snr_from_distances(bs.tx_power, bs.tx_gain, cfg.g_r, target.rcs, d1, d2, cfg)


@dataclass(frozen=True)
class SensingLinkReport:
    """One (UAV, base station, target) link at one step."""

    uav: int
    bs: int
    target: int
    snr: float    # dB
    rank: int     # 1-based position among all links at this UAV, by descending SNR
    counted: bool


@dataclass(frozen=True)
class RewardRecord:
    """Shared team reward: the sum of all counted link SNRs at one step."""

    step: int
    total_snr: float
    counted_links: tuple[SensingLinkReport, ...]
    covered_targets: frozenset[int]


def gate_links(
    entries: Iterable[tuple[int, int, float]], cfg: WorldConfig, uav: int = 0
) -> list[SensingLinkReport]:
    """Rank the (bs, target, snr) links of one UAV and mark which ones count.

    A link counts when its SNR clears the sensing threshold and its rank does
    not exceed the per-UAV resolution cap. Ties in SNR break by ascending
    (bs, target) so the ranking is reproducible.
    """
    ordered = sorted(entries, key=lambda e: (-e[2], e[0], e[1]))
    reports = []
    for pos, (k, i, snr) in enumerate(ordered):
        rank = pos + 1
        counted = snr >= cfg.gamma_s and rank <= cfg.q_max
        reports.append(SensingLinkReport(uav, k, i, snr, rank, counted))
    return reports


def total_reward(reports_by_uav: Sequence[Sequence[SensingLinkReport]], step: int = 0) -> RewardRecord:
    """Aggregate counted links of all UAVs into the shared team reward.

    Uses exact (fsum) summation so the total is independent of link order.
    """
    counted = tuple(r for reports in reports_by_uav for r in reports if r.counted)
    total = math.fsum(r.snr for r in counted)
    covered = frozenset(r.target for r in counted)
    return RewardRecord(step, total, counted, covered)


def sense_step(
    world, uav_positions: Sequence[Position3D], step: int = 0
) -> tuple[list[list[SensingLinkReport]], RewardRecord]:
    """Evaluate every sensing link at the given UAV positions and gate them."""
    cfg = world.cfg
    reports_by_uav = []
    for m, pos in enumerate(uav_positions):
        entries = []
        for k, bs in enumerate(world.base_stations):
            for i, target in enumerate(world.targets):
                entries.append((k, i, sensing_snr(bs, target, pos, cfg)))
        reports_by_uav.append(gate_links(entries, cfg, uav=m))
    return reports_by_uav, total_reward(reports_by_uav, step)
