"""Arena construction: entity placement, 3-D geometry, seeded random substreams."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .config import WorldConfig


class DegenerateGeometryError(ValueError):
    """Raised when a link geometry collapses to zero distance."""


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class Target:
    position: Position3D
    rcs: float  # dBsm


@dataclass(frozen=True)
class BaseStation:
    position: Position3D
    tx_power: float  # dBm
    tx_gain: float   # dBi


@dataclass(frozen=True)
class World:
    """Immutable episode setting; safe to share read-only across rollouts."""

    cfg: WorldConfig
    base_stations: tuple[BaseStation, ...]
    targets: tuple[Target, ...]
    uav_start: tuple[Position3D, ...]
    carriers: tuple[float, ...]  # one comm carrier per UAV, Hz


def distance(a: Position3D, b: Position3D) -> float:
    """Euclidean distance in meters."""
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


def substream(seed: int, *key: int | str) -> np.random.Generator:
    """Independent generator identified by (seed, key), reproducible across runs.

    String key parts are hashed with crc32 so draws depend only on the values,
    never on call order elsewhere in the program.
    """
    parts = tuple(
        zlib.crc32(part.encode("utf-8")) if isinstance(part, str) else int(part)
        for part in key
    )
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=parts))


def sample_targets(rng: np.random.Generator, cfg: WorldConfig) -> list[Target]:
    """Draw cfg.n_targets targets uniformly in the arena with Gaussian RCS in dBsm."""
    lo, hi = cfg.target_alt_range
    targets = []
    for _ in range(cfg.n_targets):
        x = rng.uniform(0.0, cfg.L)
        y = rng.uniform(0.0, cfg.H)
        z = rng.uniform(lo, hi)
        rcs = rng.normal(cfg.rcs_mean, cfg.rcs_std)
        targets.append(Target(Position3D(x, y, z), float(rcs)))
    return targets


def build_world(cfg: WorldConfig, episode_key: tuple[int, ...] = ()) -> World:
    """Place base stations, targets, and UAVs from dedicated substreams of cfg.seed.

    episode_key extends the substream keys so batches can draw a fresh world
    per episode while staying reproducible.
    """
    cfg.validate()

    bs_rng = substream(cfg.seed, "bs", *episode_key)
    stations = []
    for _ in range(cfg.n_bs):
        x = bs_rng.uniform(0.0, cfg.L)
        y = bs_rng.uniform(0.0, cfg.H)
        stations.append(BaseStation(Position3D(x, y, cfg.bs_alt), cfg.p_tx_bs, cfg.g_tx))

    targets = sample_targets(substream(cfg.seed, "targets", *episode_key), cfg)

    uav_rng = substream(cfg.seed, "uavs", *episode_key)
    uavs = []
    for _ in range(cfg.n_uavs):
        x = uav_rng.uniform(0.0, cfg.L)
        y = uav_rng.uniform(0.0, cfg.H)
        uavs.append(Position3D(x, y, cfg.uav_alt))

    carriers = tuple(
        cfg.comm_base_freq + m * cfg.comm_channel_spacing for m in range(cfg.n_uavs)
    )
    return World(cfg, tuple(stations), tuple(targets), tuple(uavs), carriers)


def world_dump(world: World) -> str:
    """Canonical sorted key=value listing with 9 decimal digits, for determinism checks."""
    lines = []
    for i, bs in enumerate(world.base_stations):
        lines.append(f"bs.{i:04d}.x={bs.position.x:.9f}")
        lines.append(f"bs.{i:04d}.y={bs.position.y:.9f}")
        lines.append(f"bs.{i:04d}.z={bs.position.z:.9f}")
        lines.append(f"bs.{i:04d}.tx_power={bs.tx_power:.9f}")
        lines.append(f"bs.{i:04d}.tx_gain={bs.tx_gain:.9f}")
    for i, t in enumerate(world.targets):
        lines.append(f"target.{i:04d}.x={t.position.x:.9f}")
        lines.append(f"target.{i:04d}.y={t.position.y:.9f}")
        lines.append(f"target.{i:04d}.z={t.position.z:.9f}")
        lines.append(f"target.{i:04d}.rcs={t.rcs:.9f}")
    for i, p in enumerate(world.uav_start):
        lines.append(f"uav.{i:04d}.x={p.x:.9f}")
        lines.append(f"uav.{i:04d}.y={p.y:.9f}")
        lines.append(f"uav.{i:04d}.z={p.z:.9f}")
    for i, f in enumerate(world.carriers):
        lines.append(f"carrier.{i:04d}={f:.9f}")
    return "\n".join(sorted(lines)) + "\n"
