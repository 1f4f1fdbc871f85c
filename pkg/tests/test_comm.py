import math

import numpy as np
import pytest

from swarmsense.comm import (
    ChannelPlan,
    ReceptionOutcome,
    channel_attenuation,
    classify,
    interference,
    path_loss,
    sinr,
)
from swarmsense.config import WorldConfig
from swarmsense.world import DegenerateGeometryError, Position3D

ORIGIN = Position3D(0.0, 0.0, 0.0)


def at(x):
    return Position3D(x, 0.0, 0.0)


def grid_plan(n=8, base=2.4e9, spacing=5e6):
    return ChannelPlan(tuple(base + spacing * i for i in range(n)), base, spacing)


def test_path_loss_reference_points():
    assert abs(path_loss(ORIGIN, at(100.0), 0.0) - 113.08) < 1e-9
    assert abs(path_loss(ORIGIN, at(1000.0), 0.0) - 135.58) < 1e-9
    assert abs(path_loss(ORIGIN, at(1.0), 0.0) - 68.08) < 1e-12


def test_path_loss_shadow_adds_linearly():
    assert path_loss(ORIGIN, at(100.0), 7.5) == path_loss(ORIGIN, at(100.0), 0.0) + 7.5


def test_path_loss_zero_distance():
    with pytest.raises(DegenerateGeometryError):
        path_loss(ORIGIN, ORIGIN, 0.0)


def test_attenuation_table():
    plan = grid_plan()
    expected = {0: 0.0, 1: 20.0, 2: 40.0, 3: 50.0, 4: 60.0}
    for dist, att in expected.items():
        assert channel_attenuation(0, dist, plan) == att
        assert channel_attenuation(dist, 0, plan) == att


def test_attenuation_near_band():
    plan = grid_plan()
    # spectral distance >= 5 with tiny relative offset stays in band
    assert channel_attenuation(0, 5, plan) == 95.0
    assert channel_attenuation(0, 6, plan) == 95.0
    assert abs((plan.carriers[6] - plan.carriers[0]) / plan.carriers[6]) <= 0.05


def test_attenuation_far_band():
    plan = grid_plan(n=7, spacing=3e8)
    assert abs((plan.carriers[6] - plan.carriers[0]) / plan.carriers[0]) > 0.05
    assert channel_attenuation(0, 6, plan) == 110.0


def test_interference_empty():
    plan = grid_plan(2)
    shadows = {(0, 1): 0.0, (1, 0): 0.0}
    agg = interference(1, 0, [60.0, 60.0], [ORIGIN, at(100.0)], shadows, plan)
    assert agg == float("-inf")


def test_interference_single_term():
    plan = grid_plan(3)
    positions = [ORIGIN, at(100.0), at(200.0)]
    shadows = {(a, b): 0.0 for a in range(3) for b in range(3) if a != b}
    # sole interferer 2 sits 100 m from receiver 1, one channel away (20 dB)
    agg = interference(1, 0, [70.0, 70.0, 70.0], positions, shadows, plan)
    assert abs(agg - (-43.08 - 20.0)) < 1e-9


def test_interference_two_equal_terms():
    # two interferers each contributing -50 dBm add to about -46.99 dBm
    plan = grid_plan(4)
    # receiver is channel 1; interferers 2 and 3 sit 1 and 2 channels away
    d2 = 10.0 ** ((100.0 - 68.08) / 22.5)  # path loss 100 dB, then 20 dB attenuation
    d3 = 10.0 ** ((80.0 - 68.08) / 22.5)   # path loss 80 dB, then 40 dB attenuation
    positions = [at(500.0), ORIGIN, Position3D(d2, 0.0, 0.0), Position3D(0.0, d3, 0.0)]
    shadows = {(a, b): 0.0 for a in range(4) for b in range(4) if a != b}
    agg = interference(1, 0, [70.0, 0.0, 70.0, 70.0], positions, shadows, plan)
    assert abs(agg - 10.0 * math.log10(2e-5)) < 1e-9


def test_sinr_decoded_case():
    cfg = WorldConfig()
    budget, outcome = sinr(70.0, path_loss(ORIGIN, at(100.0), 0.0), float("-inf"), cfg)
    assert abs(budget.rx_power - (-43.08)) < 1e-9
    assert abs(budget.sinr - 25.92) < 1e-9
    assert outcome is ReceptionOutcome.DECODED
    assert budget.rx_power == budget.tx_power - budget.path_loss


def test_sinr_lost_case():
    cfg = WorldConfig()
    budget, outcome = sinr(50.0, path_loss(ORIGIN, at(1000.0), 0.0), float("-inf"), cfg)
    assert abs(budget.sinr - (-16.58)) < 1e-9
    assert outcome is ReceptionOutcome.LOST


def test_classification_bands():
    cfg = WorldConfig()  # gamma1=-10, gamma2=0
    assert classify(-5.0, cfg) is ReceptionOutcome.DETECTED_ONLY
    assert classify(cfg.gamma2, cfg) is ReceptionOutcome.DECODED
    assert classify(cfg.gamma1, cfg) is ReceptionOutcome.LOST
    assert classify(cfg.gamma1 + 1e-9, cfg) is ReceptionOutcome.DETECTED_ONLY
    rng = np.random.default_rng(2)
    for gamma in rng.uniform(-40, 40, size=500):
        assert classify(float(gamma), cfg) in ReceptionOutcome


def test_sinr_combines_noise_and_interference_linearly():
    cfg = WorldConfig()
    pl = path_loss(ORIGIN, at(100.0), 0.0)
    floor_dbm = cfg.p_n + cfg.sinr_offset
    budget, _ = sinr(70.0, pl, floor_dbm, cfg)  # interference equal to the offset floor
    clean, _ = sinr(70.0, pl, float("-inf"), cfg)
    assert abs((clean.sinr - budget.sinr) - 10.0 * math.log10(2.0)) < 1e-9


def test_sinr_literal_mode():
    cfg = WorldConfig(literal_db_sinr=True)
    pl = path_loss(ORIGIN, at(100.0), 0.0)
    budget, _ = sinr(70.0, pl, -50.0, cfg)
    assert abs(budget.sinr - (70.0 - pl - (-50.0) - cfg.p_n - cfg.sinr_offset)) < 1e-12
    clean, _ = sinr(70.0, pl, float("-inf"), cfg)
    assert abs(clean.sinr - (70.0 - pl - cfg.p_n - cfg.sinr_offset)) < 1e-12


def test_sinr_monotonicity():
    cfg = WorldConfig()
    pl = path_loss(ORIGIN, at(300.0), 0.0)
    gammas = [sinr(p, pl, -60.0, cfg)[0].sinr for p in (50.0, 55.0, 60.0, 65.0, 70.0)]
    assert all(b > a for a, b in zip(gammas, gammas[1:]))
    by_interference = [sinr(60.0, pl, i, cfg)[0].sinr for i in (-90.0, -70.0, -50.0, -30.0)]
    assert all(b < a for a, b in zip(by_interference, by_interference[1:]))


def test_channel_plan_rejects_unordered():
    with pytest.raises(ValueError):
        ChannelPlan((2.4e9, 2.4e9), 2.4e9, 5e6)
