"""Command-line driver: train, eval, simulate, check."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .checks import run_all_checks
from .config import ConfigError, TrainConfig, load_config
from .env import SwarmEnv
from .metrics import (
    compute_epoch_metrics,
    emit_metrics_csv,
    format_metrics_row,
    metrics_header,
    parse_metrics_csv,
    write_comm_log,
    write_link_log,
    write_trajectory_csv,
)
from .nn import init_params, load_checkpoint
from .policy import agent_forward, init_runtime
from .training import RolloutBatch, rollout, train
from .world import build_world, substream

DEFAULT_OUT_ENV = "SWARMSENSE_OUT"  # environment variable naming the default output directory


def _default_out() -> Path:
    return Path(os.environ.get(DEFAULT_OUT_ENV, "swarmsense_out"))


def _cmd_train(args) -> int:
    cfg, tcfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.epochs is not None:
        tcfg = replace(tcfg, epochs=args.epochs)
    out = Path(args.out) if args.out else _default_out()
    log = None if args.quiet else print

    if args.runs > 1:
        if args.resume:
            raise ConfigError("--resume cannot be combined with --runs")
        runs = []
        for r in range(args.runs):
            run_cfg = replace(cfg, seed=cfg.seed + r)
            runs.append(train(run_cfg, tcfg, out / f"run_{r:02d}", log=log))
        averaged = []
        for rows in zip(*runs):
            n = len(rows)
            averaged.append(
                type(rows[0])(
                    epoch=rows[0].epoch,
                    mean_discounted_reward=sum(m.mean_discounted_reward for m in rows) / n,
                    pct_targets_covered=sum(m.pct_targets_covered for m in rows) / n,
                    comm_efficiency_pct=sum(m.comm_efficiency_pct for m in rows) / n,
                    mean_loss=sum(m.mean_loss for m in rows) / n,
                )
            )
        emit_metrics_csv(averaged, out / "metrics_mean.csv")
        print(f"wrote {args.runs} runs and averaged metrics under {out}")
        return 0

    train(cfg, tcfg, out, resume_from=args.resume, log=log)
    print(f"wrote metrics and checkpoints under {out}")
    return 0


def _cmd_eval(args) -> int:
    cfg, tcfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    params = init_params(cfg)
    meta = load_checkpoint(args.checkpoint, params)
    eval_tcfg = replace(tcfg, batch_size=args.episodes)
    batch = rollout(params, cfg, eval_tcfg, epoch=0, greedy=args.greedy)
    em = compute_epoch_metrics(batch, cfg)
    print(f"checkpoint epoch: {meta.get('epoch', '?')}")
    print(metrics_header())
    print(format_metrics_row(em))
    if args.out:
        emit_metrics_csv([em], args.out)
    return 0


def _cmd_simulate(args) -> int:
    cfg, _ = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    params = None
    if args.policy == "checkpoint":
        if not args.checkpoint:
            raise ConfigError("--policy checkpoint requires --checkpoint")
        params = init_params(cfg)
        load_checkpoint(args.checkpoint, params)

    world = build_world(cfg)
    env = SwarmEnv(world, substream(cfg.seed, "env", 0, 0))
    obs, msgs = env.reset()
    action_rng = substream(cfg.seed, "act", 0, 0)
    runtimes = None
    if params is not None:
        runtime_rng = substream(cfg.seed, "runtime", 0, 0)
        runtimes = [init_runtime(m, cfg, runtime_rng) for m in range(cfg.n_uavs)]

    covered: set[int] = set()
    traj_rows = []
    link_rows = []
    comm_rows = []
    for t in range(cfg.t_max):
        if params is not None:
            decisions = []
            for m in range(cfg.n_uavs):
                decision, runtimes[m] = agent_forward(
                    params, runtimes[m], obs[m], msgs[m], cfg,
                    rng=action_rng, greedy=args.greedy,
                )
                decisions.append(decision)
            actions = [d.action for d in decisions]
            outgoing = [d.message for d in decisions]
        else:
            from .env import ActionPair, N_MOVES

            actions = [
                ActionPair(
                    int(action_rng.integers(0, N_MOVES)),
                    int(action_rng.integers(0, len(cfg.power_levels))),
                )
                for _ in range(cfg.n_uavs)
            ]
            outgoing = [np.zeros(cfg.msg_dim) for _ in range(cfg.n_uavs)]
        result = env.step(actions, outgoing)
        covered |= result.reward.covered_targets
        for m in range(cfg.n_uavs):
            traj_rows.append(
                (
                    t + 1, m,
                    result.positions[m, 0], result.positions[m, 1],
                    actions[m].move, actions[m].power,
                    result.reward.total_snr, len(covered),
                )
            )
        if args.link_log:
            for reports in result.reports:
                for report in reports:
                    link_rows.append((t + 1, report))
        if args.comm_log:
            for (tx, rx), budget in result.budgets.items():
                comm_rows.append((t + 1, tx, rx, budget, result.outcomes[(tx, rx)]))
        obs, msgs = result.observations, result.messages

    write_trajectory_csv(args.out, traj_rows)
    if args.link_log:
        write_link_log(args.link_log, link_rows)
    if args.comm_log:
        write_comm_log(args.comm_log, comm_rows)
    print(f"wrote trajectory of {cfg.t_max} steps x {cfg.n_uavs} UAVs to {args.out}")
    return 0


def _cmd_check(args) -> int:
    return 0 if run_all_checks() else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmsense",
        description="UAV swarm sensing simulator and policy trainer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a policy and write metrics/checkpoints")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", help=f"output directory (default ${DEFAULT_OUT_ENV} or ./swarmsense_out)")
    p.add_argument("--resume", help="training-state file to continue from")
    p.add_argument("--runs", type=int, default=1, help="independent seed-shifted runs to average")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--greedy", action="store_true")
    p.add_argument("--episodes", type=int, default=5)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="optional metrics CSV path")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("simulate", help="roll one episode and dump trajectory traces")
    p.add_argument("--config", required=True)
    p.add_argument("--policy", choices=("random", "checkpoint"), required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--greedy", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="trajectory.csv")
    p.add_argument("--link-log", help="optional per-step sensing link CSV")
    p.add_argument("--comm-log", help="optional per-step directed link CSV")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("check", help="run the numeric self-check suites")
    p.set_defaults(fn=_cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run_cli(argv) -> int:
    """Programmatic entry point used by the tests."""
    return main(argv)


if __name__ == "__main__":
    raise SystemExit(main())
