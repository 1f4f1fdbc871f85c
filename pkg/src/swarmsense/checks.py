"""Self-check suites: channel-formula oracles and gradient verification.

These back the `check` CLI subcommand so a deployment can validate the
numerics without the test suite installed.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .comm import ChannelPlan, ReceptionOutcome, channel_attenuation, classify, path_loss, sinr
from .config import TrainConfig, WorldConfig
from .nn import (
    LstmState,
    ParameterSet,
    ffn_forward,
    finite_difference_check,
    init_params,
    lstm_cell_forward,
    multi_head_attention,
    softmax_head,
    value_head,
)
from .sensing import sensing_snr_from_distances, spreading_constant_db, total_reward, sense_step
from .training import make_fd_loss
from .world import Position3D, build_world, substream

FD_TOL = 1e-4


def _check_channel_formulas() -> tuple[bool, str]:
    cfg = WorldConfig()
    p0 = Position3D(0.0, 0.0, 0.0)
    ok = abs(path_loss(p0, Position3D(100.0, 0.0, 0.0), 0.0) - 113.08) < 1e-9
    ok &= abs(path_loss(p0, Position3D(1000.0, 0.0, 0.0), 0.0) - 135.58) < 1e-9

    plan = ChannelPlan(tuple(2.4e9 + 5e6 * i for i in range(8)), 2.4e9, 5e6)
    expected = {0: 0.0, 1: 20.0, 2: 40.0, 3: 50.0, 4: 60.0, 5: 95.0, 6: 95.0, 7: 95.0}
    for dist, att in expected.items():
        ok &= channel_attenuation(0, dist, plan) == att
    wide = ChannelPlan(tuple(2.4e9 + 3e8 * i for i in range(7)), 2.4e9, 3e8)
    ok &= channel_attenuation(0, 6, wide) == 110.0

    ok &= abs(spreading_constant_db(28e9) - (-72.38)) < 0.01
    snr = sensing_snr_from_distances(46.0, 11.0, 11.0, 0.0, 100.0, 100.0, cfg)
    ok &= abs(snr - 14.62) < 0.01

    budget, outcome = sinr(70.0, path_loss(p0, Position3D(100.0, 0.0, 0.0), 0.0), float("-inf"), cfg)
    ok &= abs(budget.sinr - 25.92) < 1e-9 and outcome is ReceptionOutcome.DECODED
    budget, outcome = sinr(50.0, path_loss(p0, Position3D(1000.0, 0.0, 0.0), 0.0), float("-inf"), cfg)
    ok &= abs(budget.sinr - (-16.58)) < 1e-9 and outcome is ReceptionOutcome.LOST
    ok &= classify(-5.0, cfg) is ReceptionOutcome.DETECTED_ONLY
    ok &= classify(cfg.gamma1, cfg) is ReceptionOutcome.LOST
    ok &= classify(cfg.gamma2, cfg) is ReceptionOutcome.DECODED
    return ok, "path loss, attenuation table, sensing budget, SINR gating"


def _check_reward_oracle() -> tuple[bool, str]:
    cfg = WorldConfig(n_uavs=2, n_bs=2, n_targets=5, seed=11)
    ok = True
    for trial in range(5):
        world = build_world(cfg, episode_key=(trial,))
        rng = substream(cfg.seed, "probe", trial)
        positions = [
            Position3D(rng.uniform(0, cfg.L), rng.uniform(0, cfg.H), cfg.uav_alt)
            for _ in range(cfg.n_uavs)
        ]
        reports, record = sense_step(world, positions)
        brute = []
        for m, pos in enumerate(positions):
            entries = []
            for k, bs in enumerate(world.base_stations):
                for i, target in enumerate(world.targets):
                    d1 = math.sqrt(
                        (bs.position.x - target.position.x) ** 2
                        + (bs.position.y - target.position.y) ** 2
                        + (bs.position.z - target.position.z) ** 2
                    )
                    d2 = math.sqrt(
                        (target.position.x - pos.x) ** 2
                        + (target.position.y - pos.y) ** 2
                        + (target.position.z - pos.z) ** 2
                    )
                    snr = (
                        bs.tx_power + bs.tx_gain + cfg.g_r - cfg.p_n
                        + 10.0 * math.log10(299_792_458.0**2 / ((4.0 * math.pi) ** 3 * cfg.f_c**2))
                        + target.rcs - 20.0 * math.log10(d1 * d2)
                    )
                    entries.append((snr, k, i))
            entries.sort(key=lambda e: (-e[0], e[1], e[2]))
            for rank, (snr, k, i) in enumerate(entries, start=1):
                if snr >= cfg.gamma_s and rank <= cfg.q_max:
                    brute.append(snr)
        ok &= record.total_snr == math.fsum(brute)
    return ok, "brute-force reward enumeration on random small worlds"


def _check_gradients() -> tuple[bool, str]:
    rng = np.random.default_rng(123)
    cfg = WorldConfig(
        n_uavs=2, n_bs=1, n_targets=3, q_max=1, msg_dim=4, t_max=3,
        power_levels=(50.0, 60.0, 70.0), seed=5,
    )
    worst = 0.0

    p = ParameterSet({
        "W": ad.tensor(rng.standard_normal((3, 4)) * 0.5),
        "b": ad.tensor(rng.standard_normal((1, 4)) * 0.5),
    })
    x = rng.standard_normal((1, 3))
    report = finite_difference_check(lambda: ad.sum_all(ffn_forward(ad.tensor(x), p["W"], p["b"])), p)
    worst = max(worst, report["max_rel_err"])

    s = 4
    p = ParameterSet({
        "Wx": ad.tensor(rng.standard_normal((s, 4 * s)) * 0.4),
        "Wh": ad.tensor(rng.standard_normal((s, 4 * s)) * 0.4),
        "b": ad.tensor(rng.standard_normal((1, 4 * s)) * 0.4),
    })
    seq = [rng.standard_normal((1, s)) for _ in range(5)]
    h0, c0 = rng.standard_normal((1, s)) * 0.1, rng.standard_normal((1, s)) * 0.1

    def lstm_loss():
        state = LstmState(ad.tensor(h0), ad.tensor(c0))
        for item in seq:
            state = lstm_cell_forward(ad.tensor(item), state, p["Wx"], p["Wh"], p["b"])
        return ad.sum_all(state.hidden)

    report = finite_difference_check(lstm_loss, p)
    worst = max(worst, report["max_rel_err"])

    n_heads, d_k = 3, s
    tensors = {}
    for i in range(n_heads):
        tensors[f"h{i}.Wq"] = ad.tensor(rng.standard_normal((s, d_k)) * 0.4)
        tensors[f"h{i}.Wk"] = ad.tensor(rng.standard_normal((s, d_k)) * 0.4)
        tensors[f"h{i}.Wv"] = ad.tensor(rng.standard_normal((s, d_k)) * 0.4)
    tensors["Wo"] = ad.tensor(rng.standard_normal((n_heads * d_k, s)) * 0.4)
    p = ParameterSet(tensors)
    rows = rng.standard_normal((3, s))

    def attn_loss():
        heads = [(p[f"h{i}.Wq"], p[f"h{i}.Wk"], p[f"h{i}.Wv"]) for i in range(n_heads)]
        return ad.sum_all(multi_head_attention(ad.tensor(rows), heads, p["Wo"], d_k))

    report = finite_difference_check(attn_loss, p)
    worst = max(worst, report["max_rel_err"])

    p = ParameterSet({
        "W": ad.tensor(rng.standard_normal((s, 5)) * 0.5),
        "b": ad.tensor(rng.standard_normal((1, 5)) * 0.5),
        "vW": ad.tensor(rng.standard_normal((s, 1)) * 0.5),
        "vb": ad.tensor(rng.standard_normal((1, 1)) * 0.5),
    })
    hx = rng.standard_normal((1, s))

    def head_loss():
        probs = softmax_head(ad.tensor(hx), p["W"], p["b"])
        val = value_head(ad.tensor(hx), p["vW"], p["vb"])
        return ad.add(ad.log(ad.pick(probs, 0, 2)), val)

    report = finite_difference_check(head_loss, p)
    worst = max(worst, report["max_rel_err"])

    params = init_params(cfg)
    tcfg = TrainConfig(batch_size=1, beta=0.014, reward_scale=0.01)
    report = finite_difference_check(make_fd_loss(params, cfg, tcfg), params)
    worst = max(worst, report["max_rel_err"])

    return worst < FD_TOL, f"finite differences, worst relative error {worst:.3e}"


def run_all_checks(log=print) -> bool:
    suites = [
        ("channel-formulas", _check_channel_formulas),
        ("reward-oracle", _check_reward_oracle),
        ("gradients", _check_gradients),
    ]
    all_ok = True
    for name, fn in suites:
        ok, detail = fn()
        all_ok &= ok
        log(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return all_ok
