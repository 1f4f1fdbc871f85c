"""Per-epoch metrics, CSV emission, and run manifests."""

from __future__ import annotations

import datetime
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .config import TrainConfig, WorldConfig, config_text


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    mean_discounted_reward: float
    pct_targets_covered: float
    comm_efficiency_pct: float
    mean_loss: float


def metrics_header() -> str:
    return "epoch,mean_discounted_reward,pct_targets_covered,comm_efficiency_pct,mean_loss"


def format_metrics_row(m: EpochMetrics) -> str:
    return (
        f"{m.epoch},{m.mean_discounted_reward:.6f},{m.pct_targets_covered:.6f},"
        f"{m.comm_efficiency_pct:.6f},{m.mean_loss:.6f}"
    )


def emit_metrics_csv(records: Sequence[EpochMetrics], path) -> None:
    """Write header plus one 6-decimal row per epoch, newline terminated."""
    lines = [metrics_header()]
    lines.extend(format_metrics_row(m) for m in records)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_metrics_csv(path) -> list[EpochMetrics]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != metrics_header():
        raise ValueError(f"{path}: unexpected metrics header")
    out = []
    for line in lines[1:]:
        epoch, reward, covered, comm, loss = line.split(",")
        out.append(
            EpochMetrics(int(epoch), float(reward), float(covered), float(comm), float(loss))
        )
    return out


def compute_epoch_metrics(batch, cfg: WorldConfig, epoch: int = 0, mean_loss: float = 0.0) -> EpochMetrics:
    """Aggregate one rollout batch into the epoch's summary numbers.

    Coverage counts a target once per episode if any link ever counted it;
    communication efficiency is the share of directed transmissions that
    decoded. Both are percentages; an episode with no transmissions at all
    (single UAV) reports 100 percent vacuously.
    """
    gamma = cfg.discount
    discounted = []
    covered_pcts = []
    decoded = 0
    total = 0
    for episode in batch.episodes:
        acc = 0.0
        weight = 1.0
        for step in episode.steps:
            acc += weight * step.reward
            weight *= gamma
        discounted.append(acc)
        covered_pcts.append(100.0 * len(episode.covered_union) / cfg.n_targets)
        decoded += sum(s.comm_decoded for s in episode.steps)
        total += sum(s.comm_total for s in episode.steps)
    n = len(batch.episodes)
    comm_pct = 100.0 if total == 0 else 100.0 * decoded / total
    return EpochMetrics(
        epoch=epoch,
        mean_discounted_reward=sum(discounted) / n,
        pct_targets_covered=sum(covered_pcts) / n,
        comm_efficiency_pct=comm_pct,
        mean_loss=mean_loss,
    )


def write_manifest(path, cfg: WorldConfig, tcfg: TrainConfig, chash: str) -> None:
    """Run manifest written before training begins."""
    from . import __version__

    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    body = (
        f"version={__version__}\n"
        f"start_time={stamp}\n"
        f"seed={cfg.seed}\n"
        f"config_hash={chash}\n"
        "files=metrics.csv,checkpoint_*.bin,state_*.bin\n"
        "---\n"
    ) + config_text(cfg, tcfg)
    Path(path).write_text(body, encoding="utf-8")


def write_link_log(path, rows: Iterable[tuple]) -> None:
    """Per-step sensing link dump: step,uav,bs,target,snr_db,rank,counted."""
    lines = ["step,uav,bs,target,snr_db,rank,counted"]
    for step, report in rows:
        lines.append(
            f"{step},{report.uav},{report.bs},{report.target},"
            f"{report.snr:.6f},{report.rank},{int(report.counted)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_comm_log(path, rows: Iterable[tuple]) -> None:
    """Per-step directed link dump: step,tx,rx,tx_power_dbm,path_loss_db,interference_dbm,sinr_db,outcome."""
    lines = ["step,tx,rx,tx_power_dbm,path_loss_db,interference_dbm,sinr_db,outcome"]
    for step, tx, rx, budget, outcome in rows:
        lines.append(
            f"{step},{tx},{rx},{budget.tx_power:.6f},{budget.path_loss:.6f},"
            f"{budget.interference:.6f},{budget.sinr:.6f},{outcome.value}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_trajectory_csv(path, rows: Iterable[tuple]) -> None:
    """Per-step trace: step,uav,x,y,move,power,reward,covered_count."""
    lines = ["step,uav,x,y,move,power,reward,covered_count"]
    for step, uav, x, y, move, power, reward, covered in rows:
        lines.append(f"{step},{uav},{x:.6f},{y:.6f},{move},{power},{reward:.6f},{covered}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
