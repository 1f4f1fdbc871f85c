import math

import numpy as np
import pytest

from swarmsense.comm import ReceptionOutcome
from swarmsense.env import (
    ActionPair,
    AdaptedMessage,
    EpisodeDoneError,
    MOVE_DIRECTIONS,
    PAD_SNR_DB,
    SwarmEnv,
    adapt_messages,
    build_observation,
)
from swarmsense.sensing import SensingLinkReport, sense_step
from swarmsense.world import BaseStation, Position3D, Target, World, build_world, substream


def make_env(cfg, key=()):
    world = build_world(cfg, episode_key=key)
    return SwarmEnv(world, substream(cfg.seed, "env", *key))


def zero_msgs(cfg):
    return [np.zeros(cfg.msg_dim) for _ in range(cfg.n_uavs)]


def test_reset_shapes_and_slate(make_cfg):
    cfg = make_cfg()
    env = make_env(cfg)
    obs, msgs = env.reset()
    assert len(obs) == cfg.n_uavs
    assert all(o.shape == (2 + 6 * cfg.q_max,) for o in obs)
    for m, per_receiver in enumerate(msgs):
        assert [a.sender for a in per_receiver] == [j for j in range(cfg.n_uavs) if j != m]
        assert all(a.status == 1 for a in per_receiver)
        assert all(np.array_equal(a.payload, np.zeros(cfg.msg_dim)) for a in per_receiver)


def test_reset_sentinel_blocks_when_nothing_detected(make_cfg):
    cfg = make_cfg(gamma_s=1e9)  # impossible threshold
    env = make_env(cfg)
    obs, _ = env.reset()
    for o in obs:
        blocks = o[2:].reshape(cfg.q_max, 6)
        assert np.allclose(blocks[:, 0], PAD_SNR_DB / cfg.snr_scale)
        assert np.all(blocks[:, 1:] == 0.0)


def test_reset_deterministic(make_cfg):
    cfg = make_cfg(seed=99)
    a, _ = make_env(cfg).reset()
    b, _ = make_env(cfg).reset()
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def observation_world(cfg):
    """Fixture world with one target and one base station at fixed coordinates."""
    return World(
        cfg=cfg,
        base_stations=(BaseStation(Position3D(0.0, 0.0, 30.0), cfg.p_tx_bs, cfg.g_tx),),
        targets=(Target(Position3D(300.0, 400.0, 50.0), 0.0),),
        uav_start=(Position3D(100.0, 200.0, cfg.uav_alt),),
        carriers=(cfg.comm_base_freq,),
    )


def test_observation_normalized_block(make_cfg):
    cfg = make_cfg(n_uavs=1, n_bs=1, n_targets=1, q_max=1, L=1000.0, H=1000.0)
    world = observation_world(cfg)
    report = SensingLinkReport(uav=0, bs=0, target=0, snr=14.62, rank=1, counted=True)
    obs = build_observation(0, world.uav_start[0], [report], world)
    want = np.array([0.1, 0.2, 14.62 / 50.0, 0.3, 0.4, 0.5, 0.0, 0.0])
    assert np.allclose(obs, want, atol=1e-12)


def test_observation_raw_mode(make_cfg):
    cfg = make_cfg(n_uavs=1, n_bs=1, n_targets=1, q_max=1, normalize_obs=False)
    world = observation_world(cfg)
    report = SensingLinkReport(uav=0, bs=0, target=0, snr=14.62, rank=1, counted=True)
    obs = build_observation(0, world.uav_start[0], [report], world)
    assert np.allclose(obs, [100.0, 200.0, 14.62, 300.0, 400.0, 50.0, 0.0, 0.0])


def test_observation_block_ordering(make_cfg):
    cfg = make_cfg(n_uavs=1, n_bs=1, n_targets=2, q_max=2)
    world = World(
        cfg=cfg,
        base_stations=(BaseStation(Position3D(0.0, 0.0, 30.0), cfg.p_tx_bs, cfg.g_tx),),
        targets=(
            Target(Position3D(100.0, 100.0, 50.0), 0.0),
            Target(Position3D(200.0, 200.0, 50.0), 0.0),
        ),
        uav_start=(Position3D(0.0, 0.0, cfg.uav_alt),),
        carriers=(cfg.comm_base_freq,),
    )
    reports = [
        SensingLinkReport(0, 0, 1, 20.0, 1, True),
        SensingLinkReport(0, 0, 0, 15.0, 2, True),
    ]
    obs = build_observation(0, world.uav_start[0], reports, world)
    blocks = obs[2:].reshape(2, 6)
    assert blocks[0, 0] == 20.0 / cfg.snr_scale  # stronger target first
    assert blocks[0, 1] == 200.0 / cfg.L
    assert blocks[1, 0] == 15.0 / cfg.snr_scale


def test_observation_dedupes_targets_across_stations(make_cfg):
    cfg = make_cfg(n_uavs=1, n_bs=2, n_targets=1, q_max=2)
    world = World(
        cfg=cfg,
        base_stations=(
            BaseStation(Position3D(0.0, 0.0, 30.0), cfg.p_tx_bs, cfg.g_tx),
            BaseStation(Position3D(500.0, 0.0, 30.0), cfg.p_tx_bs, cfg.g_tx),
        ),
        targets=(Target(Position3D(100.0, 100.0, 50.0), 0.0),),
        uav_start=(Position3D(0.0, 0.0, cfg.uav_alt),),
        carriers=(cfg.comm_base_freq,),
    )
    reports = [
        SensingLinkReport(0, 1, 0, 22.0, 1, True),  # best link via station 1
        SensingLinkReport(0, 0, 0, 18.0, 2, True),
    ]
    obs = build_observation(0, world.uav_start[0], reports, world)
    blocks = obs[2:].reshape(2, 6)
    assert blocks[0, 0] == 22.0 / cfg.snr_scale
    assert blocks[0, 4] == 500.0 / cfg.L  # coordinates of the stronger station
    assert blocks[1, 0] == PAD_SNR_DB / cfg.snr_scale  # single target fills one block


def test_adapt_messages_statuses():
    rng = np.random.default_rng(0)
    sent = [np.full(4, float(j)) for j in range(3)]
    decoded = {(j, 2): ReceptionOutcome.DECODED for j in (0, 1)}
    out = adapt_messages(2, sent, decoded, rng, 4)
    assert [a.sender for a in out] == [0, 1]
    assert all(a.status == 1 for a in out)
    assert np.array_equal(out[0].payload, sent[0])
    assert np.array_equal(out[1].payload, sent[1])

    lost = {(j, 2): ReceptionOutcome.LOST for j in (0, 1)}
    out = adapt_messages(2, sent, lost, rng, 4)
    assert all(a.status == -1 for a in out)
    assert not np.array_equal(out[0].payload, sent[0])

    mixed = {(0, 1): ReceptionOutcome.DETECTED_ONLY, (2, 1): ReceptionOutcome.LOST}
    out = adapt_messages(1, sent, mixed, rng, 4)
    assert [(a.sender, a.status) for a in out] == [(0, 0), (2, -1)]


def test_move_magnitude_exact(make_cfg):
    cfg = make_cfg()
    step_len = cfg.uav_speed * cfg.dt
    for dx, dy in MOVE_DIRECTIONS:
        length = math.sqrt((dx * step_len) ** 2 + (dy * step_len) ** 2)
        assert abs(length - step_len) / step_len < 1e-12


def test_step_clips_to_arena(make_cfg):
    cfg = make_cfg(n_uavs=1, L=100.0, H=100.0, uav_speed=20.0)
    world = build_world(cfg)
    world = World(
        cfg=cfg,
        base_stations=world.base_stations,
        targets=world.targets,
        uav_start=(Position3D(95.0, 50.0, cfg.uav_alt),),
        carriers=world.carriers[:1],
    )
    env = SwarmEnv(world, substream(0, "env"))
    env.reset()
    result = env.step([ActionPair(0, 0)], zero_msgs(cfg))  # +x by 20 from x=95
    assert result.positions[0, 0] == 100.0
    assert result.positions[0, 1] == 50.0


def test_step_reward_matches_sensing_module(make_cfg):
    cfg = make_cfg(n_uavs=2, n_bs=2, n_targets=6, gamma_s=-40.0)
    env = make_env(cfg)
    env.reset()
    result = env.step([ActionPair(2, 0), ActionPair(5, 1)], zero_msgs(cfg))
    positions = [Position3D(x, y, cfg.uav_alt) for x, y in result.positions]
    _, want = sense_step(env.world, positions)
    assert result.reward.total_snr == want.total_snr
    assert result.reward.covered_targets == want.covered_targets


def test_step_decodes_everything_with_degenerate_threshold(make_cfg):
    cfg = make_cfg(gamma1=-2e9, gamma2=-1e9)
    env = make_env(cfg)
    env.reset()
    result = env.step([ActionPair(0, 0) for _ in range(cfg.n_uavs)], zero_msgs(cfg))
    assert all(o is ReceptionOutcome.DECODED for o in result.outcomes.values())
    assert all(a.status == 1 for msgs in result.messages for a in msgs)


def test_episode_horizon_and_done_error(make_cfg):
    cfg = make_cfg(t_max=3)
    env = make_env(cfg)
    env.reset()
    flags = []
    for _ in range(3):
        result = env.step([ActionPair(0, 0)] * cfg.n_uavs, zero_msgs(cfg))
        flags.append(result.done)
    assert flags == [False, False, True]
    with pytest.raises(EpisodeDoneError):
        env.step([ActionPair(0, 0)] * cfg.n_uavs, zero_msgs(cfg))


def test_step_rejects_bad_actions(make_cfg):
    cfg = make_cfg()
    env = make_env(cfg)
    env.reset()
    with pytest.raises(ValueError):
        env.step([ActionPair(9, 0)] * cfg.n_uavs, zero_msgs(cfg))
    with pytest.raises(ValueError):
        env.step([ActionPair(0, 0)], zero_msgs(cfg))


def test_environment_replay_determinism(make_cfg):
    cfg = make_cfg(n_uavs=3, t_max=4, seed=31)
    rng = np.random.default_rng(8)
    script = [
        [ActionPair(int(rng.integers(0, 8)), int(rng.integers(0, 3))) for _ in range(3)]
        for _ in range(4)
    ]

    def play():
        env = make_env(cfg)
        obs, _ = env.reset()
        trace = [np.concatenate(obs)]
        rewards = []
        for actions in script:
            result = env.step(actions, zero_msgs(cfg))
            trace.append(np.concatenate(result.observations))
            rewards.append(result.reward.total_snr)
        return np.concatenate(trace), rewards

    trace_a, rewards_a = play()
    trace_b, rewards_b = play()
    assert np.array_equal(trace_a, trace_b)
    assert rewards_a == rewards_b


def test_observation_length_constant_across_steps(make_cfg):
    cfg = make_cfg(t_max=4)
    env = make_env(cfg)
    obs, _ = env.reset()
    dim = obs[0].shape
    for _ in range(cfg.t_max):
        result = env.step([ActionPair(3, 1)] * cfg.n_uavs, zero_msgs(cfg))
        assert all(o.shape == dim for o in result.observations)
