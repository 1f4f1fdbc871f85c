import math
from dataclasses import replace

import numpy as np
import pytest

from swarmsense.config import ConfigError, TrainConfig, WorldConfig, config_hash, load_config, save_config
from swarmsense.world import Position3D, build_world, distance, sample_targets, substream, world_dump


def test_distance_345():
    assert distance(Position3D(0, 0, 0), Position3D(3, 4, 0)) == 5.0


def test_distance_identity():
    p = Position3D(12.5, -3.0, 9.0)
    assert distance(p, p) == 0.0


def test_distance_diagonal():
    d = distance(Position3D(0, 0, 0), Position3D(100, 100, 100))
    assert abs(d - math.sqrt(30000.0)) < 1e-12


def test_distance_is_a_metric():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b, c = (
            Position3D(*rng.uniform(-100, 100, size=3)) for _ in range(3)
        )
        assert distance(a, b) >= 0.0
        assert distance(a, b) == distance(b, a)
        assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9


def test_config_rejections(make_cfg):
    for bad in (
        dict(n_targets=0),
        dict(n_uavs=0),
        dict(n_bs=0),
        dict(gamma1=5.0, gamma2=0.0),
        dict(power_levels=()),
        dict(power_levels=(60.0, 50.0)),
        dict(discount=1.5),
        dict(q_max=0),
    ):
        with pytest.raises(ConfigError):
            build_world(make_cfg(**bad))


def test_build_world_defaults_place_uavs_at_altitude():
    cfg = WorldConfig(L=1000, H=1000, n_uavs=5, n_bs=3, n_targets=100)
    world = build_world(cfg)
    assert len(world.uav_start) == 5
    assert all(p.z == 25.0 for p in world.uav_start)
    assert len(world.base_stations) == 3
    assert len(world.targets) == 100
    assert len(world.carriers) == 5
    assert world.carriers[1] - world.carriers[0] == cfg.comm_channel_spacing


def test_build_world_deterministic(make_cfg):
    cfg = make_cfg(seed=42)
    assert world_dump(build_world(cfg)) == world_dump(build_world(cfg))
    assert world_dump(build_world(cfg, episode_key=(1, 2))) == world_dump(
        build_world(cfg, episode_key=(1, 2))
    )
    assert world_dump(build_world(cfg)) != world_dump(build_world(cfg, episode_key=(0, 1)))


def test_build_world_seed_changes_placement(make_cfg):
    assert world_dump(build_world(make_cfg(seed=1))) != world_dump(build_world(make_cfg(seed=2)))


def test_entities_inside_bounds_many_seeds(make_cfg):
    cfg = make_cfg(n_targets=1, n_uavs=1, n_bs=1, L=500.0, H=300.0)
    for seed in range(10_000):
        world = build_world(replace(cfg, seed=seed))
        t = world.targets[0].position
        assert 0.0 <= t.x <= cfg.L and 0.0 <= t.y <= cfg.H
        lo, hi = cfg.target_alt_range
        assert lo <= t.z <= hi
        u = world.uav_start[0]
        assert 0.0 <= u.x <= cfg.L and 0.0 <= u.y <= cfg.H
        b = world.base_stations[0].position
        assert 0.0 <= b.x <= cfg.L and 0.0 <= b.y <= cfg.H


def test_degenerate_rcs_distribution(make_cfg):
    cfg = make_cfg(rcs_std=0.0, rcs_mean=-20.0, n_targets=50)
    targets = sample_targets(substream(cfg.seed, "targets"), cfg)
    assert all(t.rcs == -20.0 for t in targets)


def test_rcs_sample_mean(make_cfg):
    n = 100_000
    cfg = make_cfg(n_targets=n, rcs_mean=-20.0, rcs_std=5.0)
    targets = sample_targets(substream(123, "targets"), cfg)
    mean = np.mean([t.rcs for t in targets])
    assert abs(mean - cfg.rcs_mean) < 3.0 * cfg.rcs_std / math.sqrt(n)


def test_substream_independent_of_order():
    a = substream(9, "x", 4).random(3)
    b = substream(9, "y", 4).random(3)
    a2 = substream(9, "x", 4).random(3)
    assert np.array_equal(a, a2)
    assert not np.array_equal(a, b)


def test_config_round_trip(tmp_path, make_cfg):
    cfg = make_cfg(L=750.0, literal_db_sinr=True, target_alt_range=(5.0, 80.0))
    tcfg = TrainConfig(epochs=7, learning_rate=3e-3, advantage_target="paper_literal")
    path = tmp_path / "cfg.ini"
    save_config(path, cfg, tcfg)
    cfg2, tcfg2 = load_config(path)
    assert cfg2 == cfg
    assert tcfg2 == tcfg


def test_config_unknown_key(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[world]\nwarp_speed = 9\n")
    with pytest.raises(ConfigError, match="warp_speed"):
        load_config(path)


def test_config_bad_value_reports_context(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[world]\nt_max = soon\n")
    with pytest.raises(ConfigError, match="t_max"):
        load_config(path)


def test_config_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/nowhere.ini")


def test_config_hash_ignores_stopping_knobs(make_cfg):
    cfg = make_cfg()
    h1 = config_hash(cfg, TrainConfig(epochs=10, checkpoint_interval=2))
    h2 = config_hash(cfg, TrainConfig(epochs=99, checkpoint_interval=7))
    h3 = config_hash(cfg, TrainConfig(learning_rate=5e-3))
    assert h1 == h2
    assert h1 != h3


def test_world_dump_format(make_cfg):
    dump = world_dump(build_world(make_cfg()))
    lines = dump.strip().splitlines()
    assert lines == sorted(lines)
    sample = next(line for line in lines if line.startswith("target.0000.x="))
    digits = sample.split("=")[1].split(".")[1]
    assert len(digits) == 9
