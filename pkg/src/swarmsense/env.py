"""Decentralized partially observed environment: movement, sensing reward, message channel."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .comm import ChannelPlan, LinkBudget, ReceptionOutcome, interference, path_loss, sinr
from .config import WorldConfig
from .sensing import (
    RewardRecord,
    SensingLinkReport,
    gate_links,
    sensing_snr_from_distances,
    total_reward,
)
from .world import Position3D, World, distance

_DIAG = 1.0 / math.sqrt(2.0)

# Unit direction of the 8 discrete movements; displacement is speed * dt times this.
MOVE_DIRECTIONS: tuple[tuple[float, float], ...] = (
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
    (_DIAG, _DIAG),
    (_DIAG, -_DIAG),
    (-_DIAG, _DIAG),
    (-_DIAG, -_DIAG),
)
N_MOVES = len(MOVE_DIRECTIONS)

PAD_SNR_DB = -100.0  # sentinel for empty observation blocks, well below any threshold


class EpisodeDoneError(RuntimeError):
    """Raised when step() is called after the horizon was reached."""


@dataclass(frozen=True)
class ActionPair:
    """One agent's joint action: movement index and transmit power index."""

    move: int
    power: int


@dataclass(frozen=True)
class AdaptedMessage:
    """Receiver-side view of one transmission: payload, delivery status, sender.

    status 1 carries the sender's real message; 0 (detected only) and -1
    (lost) carry standard normal noise instead. The payload may be a plain
    array or a policy-graph tensor that is passed through untouched.
    """

    payload: object
    status: int
    sender: int


@dataclass
class StepResult:
    observations: list[np.ndarray]
    messages: list[list[AdaptedMessage]]  # per receiver, senders ascending
    reward: RewardRecord
    done: bool
    outcomes: dict[tuple[int, int], ReceptionOutcome] = field(default_factory=dict)
    budgets: dict[tuple[int, int], LinkBudget] = field(default_factory=dict)
    reports: list[list[SensingLinkReport]] = field(default_factory=list)
    positions: np.ndarray | None = None  # (M, 2) copy of post-move coordinates


def build_observation(
    uav_idx: int,
    uav_pos: Position3D,
    reports: Sequence[SensingLinkReport],
    world: World,
) -> np.ndarray:
    """Assemble one agent's observation vector of length 2 + 6 * q_max.

    The position prefix is followed by one block per detected target, ordered
    by descending SNR: [snr, target x, target y, target z, bs x, bs y] where
    the base station is the one providing the strongest link for that target.
    Unused blocks carry a sentinel SNR and zero positions.
    """
    cfg = world.cfg
    obs = np.zeros(cfg.obs_dim, dtype=np.float64)
    if cfg.normalize_obs:
        obs[0] = uav_pos.x / cfg.L
        obs[1] = uav_pos.y / cfg.H
    else:
        obs[0] = uav_pos.x
        obs[1] = uav_pos.y

    blocks = []
    seen = set()
    for r in reports:  # rank order: descending SNR, ties by (bs, target)
        if not r.counted or r.target in seen:
            continue
        seen.add(r.target)
        blocks.append(r)
        if len(blocks) == cfg.q_max:
            break

    for slot in range(cfg.q_max):
        base = 2 + 6 * slot
        if slot < len(blocks):
            r = blocks[slot]
            tpos = world.targets[r.target].position
            bpos = world.base_stations[r.bs].position
            values = (r.snr, tpos.x, tpos.y, tpos.z, bpos.x, bpos.y)
        else:
            values = (PAD_SNR_DB, 0.0, 0.0, 0.0, 0.0, 0.0)
        if cfg.normalize_obs:
            obs[base + 0] = values[0] / cfg.snr_scale
            obs[base + 1] = values[1] / cfg.L
            obs[base + 2] = values[2] / cfg.H
            obs[base + 3] = values[3] / cfg.z_scale
            obs[base + 4] = values[4] / cfg.L
            obs[base + 5] = values[5] / cfg.H
        else:
            obs[base : base + 6] = values
    return obs


def adapt_messages(
    receiver: int,
    sent_messages: Sequence[object],
    outcomes: dict[tuple[int, int], ReceptionOutcome],
    rng: np.random.Generator,
    msg_dim: int,
) -> list[AdaptedMessage]:
    """Build the receiver-side message list for one agent, senders ascending."""
    adapted = []
    for j in range(len(sent_messages)):
        if j == receiver:
            continue
        outcome = outcomes[(j, receiver)]
        if outcome is ReceptionOutcome.DECODED:
            adapted.append(AdaptedMessage(sent_messages[j], 1, j))
        else:
            noise = rng.standard_normal(msg_dim)
            status = 0 if outcome is ReceptionOutcome.DETECTED_ONLY else -1
            adapted.append(AdaptedMessage(noise, status, j))
    return adapted


class SwarmEnv:
    """Finite-horizon shared-reward environment for one episode.

    Within a step everything happens in a fixed order: all UAVs move, sensing
    links and the team reward are evaluated at the new positions, then all
    broadcasts are simulated with fresh shadow draws. One env instance is
    single-threaded; run batches with one instance per episode.
    """

    def __init__(self, world: World, rng: np.random.Generator):
        self.world = world
        self.cfg = world.cfg
        self.rng = rng
        self.plan = ChannelPlan(
            world.carriers, self.cfg.comm_base_freq, self.cfg.comm_channel_spacing
        )
        # base-station-to-target legs never move within an episode
        self._d_bs_target = [
            [distance(bs.position, t.position) for t in world.targets]
            for bs in world.base_stations
        ]
        self.t = 0
        self.done = False
        self.positions: list[Position3D] = list(world.uav_start)

    def reset(self) -> tuple[list[np.ndarray], list[list[AdaptedMessage]]]:
        """Return initial observations and the zeroed message slate."""
        self.t = 0
        self.done = False
        self.positions = list(self.world.uav_start)
        reports, _ = self._sense()
        obs = [
            build_observation(m, self.positions[m], reports[m], self.world)
            for m in range(self.cfg.n_uavs)
        ]
        zero = np.zeros(self.cfg.msg_dim, dtype=np.float64)
        slate = [
            [AdaptedMessage(zero.copy(), 1, j) for j in range(self.cfg.n_uavs) if j != m]
            for m in range(self.cfg.n_uavs)
        ]
        return obs, slate

    def _sense(self) -> tuple[list[list[SensingLinkReport]], RewardRecord]:
        cfg = self.cfg
        reports_by_uav = []
        for m, pos in enumerate(self.positions):
            entries = []
            for k, bs in enumerate(self.world.base_stations):
                d_row = self._d_bs_target[k]
                for i, target in enumerate(self.world.targets):
                    snr = sensing_snr_from_distances(
                        bs.tx_power,
                        bs.tx_gain,
                        cfg.g_r,
                        target.rcs,
                        d_row[i],
                        distance(target.position, pos),
                        cfg,
                    )
                    entries.append((k, i, snr))
            reports_by_uav.append(gate_links(entries, cfg, uav=m))
        return reports_by_uav, total_reward(reports_by_uav, self.t)

    def _move(self, actions: Sequence[ActionPair]) -> None:
        cfg = self.cfg
        step_len = cfg.uav_speed * cfg.dt
        moved = []
        for pos, action in zip(self.positions, actions):
            dx, dy = MOVE_DIRECTIONS[action.move]
            x = min(max(pos.x + dx * step_len, 0.0), cfg.L)
            y = min(max(pos.y + dy * step_len, 0.0), cfg.H)
            moved.append(Position3D(x, y, pos.z))
        self.positions = moved

    def step(self, actions: Sequence[ActionPair], messages: Sequence[object]) -> StepResult:
        """Advance one step; `messages` holds each agent's outgoing payload."""
        if self.done:
            raise EpisodeDoneError("episode finished; call reset() before stepping again")
        cfg = self.cfg
        if len(actions) != cfg.n_uavs or len(messages) != cfg.n_uavs:
            raise ValueError(f"need one action and message per UAV ({cfg.n_uavs})")
        for a in actions:
            if not (0 <= a.move < N_MOVES and 0 <= a.power < len(cfg.power_levels)):
                raise ValueError(f"action indices out of range: {a}")

        self._move(actions)
        reports, reward = self._sense()

        # one shadow sample per directed pair per step, fixed (tx, rx) draw order
        shadows = {}
        for tx in range(cfg.n_uavs):
            for rx in range(cfg.n_uavs):
                if tx != rx:
                    shadows[(tx, rx)] = float(self.rng.normal(0.0, cfg.sigma_shadow))

        tx_powers = [cfg.power_levels[a.power] for a in actions]
        outcomes: dict[tuple[int, int], ReceptionOutcome] = {}
        budgets: dict[tuple[int, int], LinkBudget] = {}
        for tx in range(cfg.n_uavs):
            for rx in range(cfg.n_uavs):
                if tx == rx:
                    continue
                pl = path_loss(self.positions[tx], self.positions[rx], shadows[(tx, rx)])
                agg = interference(rx, tx, tx_powers, self.positions, shadows, self.plan)
                budgets[(tx, rx)], outcomes[(tx, rx)] = sinr(tx_powers[tx], pl, agg, cfg)

        adapted = [
            adapt_messages(m, messages, outcomes, self.rng, cfg.msg_dim)
            for m in range(cfg.n_uavs)
        ]
        observations = [
            build_observation(m, self.positions[m], reports[m], self.world)
            for m in range(cfg.n_uavs)
        ]

        self.t += 1
        self.done = self.t >= cfg.t_max
        reward = RewardRecord(self.t, reward.total_snr, reward.counted_links, reward.covered_targets)
        return StepResult(
            observations=observations,
            messages=adapted,
            reward=reward,
            done=self.done,
            outcomes=outcomes,
            budgets=budgets,
            reports=reports,
            positions=np.array([[p.x, p.y] for p in self.positions]),
        )
