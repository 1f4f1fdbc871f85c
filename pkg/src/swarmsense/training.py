"""Rollout collection, policy-gradient loss with value baseline, RMSProp updates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .comm import ReceptionOutcome
from .config import TrainConfig, WorldConfig, config_hash, config_text
from .env import ActionPair, N_MOVES, SwarmEnv
from .metrics import (
    EpochMetrics,
    compute_epoch_metrics,
    format_metrics_row,
    metrics_header,
    write_manifest,
)
from .nn import ParameterSet, init_params, load_tensors, save_checkpoint, save_tensors
from .policy import AgentDecision, agent_forward, init_runtime
from .world import build_world, substream


@dataclass
class StepRecord:
    """Bookkeeping for one environment step of one episode."""

    reward: float
    covered: frozenset[int]
    comm_decoded: int
    comm_total: int
    actions: list[ActionPair]
    decisions: list[AgentDecision] | None
    positions: np.ndarray | None = None


@dataclass
class EpisodeRecord:
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([s.reward for s in self.steps], dtype=np.float64)

    @property
    def covered_union(self) -> frozenset[int]:
        out: set[int] = set()
        for s in self.steps:
            out |= s.covered
        return frozenset(out)


@dataclass
class RolloutBatch:
    """A batch of full episodes with everything the loss and metrics need."""

    episodes: list[EpisodeRecord]
    cfg: WorldConfig

    @property
    def batch_size(self) -> int:
        return len(self.episodes)

    @property
    def t_prime(self) -> int:
        return self.batch_size * self.cfg.t_max


@dataclass
class OptimizerState:
    """RMSProp accumulators mirroring the parameter shapes."""

    acc: dict[str, np.ndarray]
    decay: float
    eps: float
    lr: float

    @classmethod
    def fresh(cls, params: ParameterSet, tcfg: TrainConfig) -> "OptimizerState":
        return cls(
            acc={name: np.zeros_like(t.data) for name, t in params.items()},
            decay=tcfg.rms_decay,
            eps=tcfg.rms_eps,
            lr=tcfg.learning_rate,
        )


def rollout(
    params: ParameterSet | None,
    cfg: WorldConfig,
    tcfg: TrainConfig,
    epoch: int,
    policy: str = "net",
    greedy: bool = False,
    forced_actions=None,
    keep_positions: bool = False,
) -> RolloutBatch:
    """Play batch_size fresh episodes and record everything for the loss.

    Every random stream is keyed by (cfg.seed, purpose, epoch, episode), so a
    given epoch replays identically across runs and resumes. policy "random"
    draws uniform actions and sends zero messages; forced_actions replays a
    recorded action sequence without consuming the action stream.
    """
    episodes = []
    for ep in range(tcfg.batch_size):
        world = build_world(cfg, episode_key=(epoch, ep))
        env = SwarmEnv(world, substream(cfg.seed, "env", epoch, ep))
        obs, msgs = env.reset()

        runtimes = None
        if policy == "net":
            if params is None:
                raise ValueError("net policy needs parameters")
            runtime_rng = substream(cfg.seed, "runtime", epoch, ep)
            runtimes = [init_runtime(m, cfg, runtime_rng) for m in range(cfg.n_uavs)]
        elif policy != "random":
            raise ValueError(f"unknown policy {policy!r}")
        action_rng = substream(cfg.seed, "act", epoch, ep)

        record = EpisodeRecord()
        for t in range(cfg.t_max):
            if policy == "net":
                decisions = []
                for m in range(cfg.n_uavs):
                    forced = forced_actions[ep][t][m] if forced_actions is not None else None
                    decision, runtimes[m] = agent_forward(
                        params, runtimes[m], obs[m], msgs[m], cfg,
                        rng=action_rng, greedy=greedy, forced=forced,
                    )
                    decisions.append(decision)
                actions = [d.action for d in decisions]
                outgoing = [d.message for d in decisions]
            else:
                decisions = None
                actions = [
                    ActionPair(
                        int(action_rng.integers(0, N_MOVES)),
                        int(action_rng.integers(0, len(cfg.power_levels))),
                    )
                    for _ in range(cfg.n_uavs)
                ]
                outgoing = [np.zeros(cfg.msg_dim) for _ in range(cfg.n_uavs)]

            result = env.step(actions, outgoing)
            decoded = sum(
                1 for o in result.outcomes.values() if o is ReceptionOutcome.DECODED
            )
            record.steps.append(
                StepRecord(
                    reward=result.reward.total_snr,
                    covered=result.reward.covered_targets,
                    comm_decoded=decoded,
                    comm_total=len(result.outcomes),
                    actions=actions,
                    decisions=decisions,
                    positions=result.positions if keep_positions else None,
                )
            )
            obs, msgs = result.observations, result.messages
        episodes.append(record)
    return RolloutBatch(episodes, cfg)


def compute_returns(batch: RolloutBatch, gamma: float, mode: str = "return_to_go") -> list[np.ndarray]:
    """Per-step targets for the value baseline, one array per episode.

    return_to_go gives the tail discounted sum G_t = sum_{u>=t} gamma^(u-t) R_u;
    paper_literal uses the raw per-step reward.
    """
    targets = []
    for ep in batch.episodes:
        rewards = ep.rewards
        if mode == "paper_literal":
            targets.append(rewards.copy())
        elif mode == "return_to_go":
            out = np.zeros_like(rewards)
            acc = 0.0
            for t in range(len(rewards) - 1, -1, -1):
                acc = rewards[t] + gamma * acc
                out[t] = acc
            targets.append(out)
        else:
            raise ValueError(f"unknown returns mode {mode!r}")
    return targets


def _episode_loss_terms(
    episode: EpisodeRecord,
    targets: np.ndarray,
    tcfg: TrainConfig,
    advantage_override=None,
) -> list[Tensor]:
    """Per-(step, agent) loss terms as (1, 1) tensors.

    The advantage multiplying the policy term is a plain number, so no
    gradient flows into the value head through it; the value head learns
    only from its squared-error term.
    """
    terms = []
    for t, step in enumerate(episode.steps):
        if step.decisions is None:
            raise ValueError("batch lacks recorded decisions; roll out with the net policy")
        for m, decision in enumerate(step.decisions):
            target = float(targets[t])
            if advantage_override is not None:
                advantage = float(advantage_override[t][m])
            else:
                advantage = target - float(decision.value.data[0, 0])
            logp = ad.add(decision.logp_move, decision.logp_power)
            terms.append(ad.scale(logp, -advantage))
            err = ad.sub(ad.tensor([[target]]), decision.value)
            terms.append(ad.scale(ad.mul(err, err), tcfg.beta))
            if tcfg.entropy_coef > 0.0:
                for probs in (decision.move_probs_t, decision.power_probs_t):
                    plogp = ad.sum_all(ad.mul(probs, ad.log(probs)))
                    terms.append(ad.scale(plogp, tcfg.entropy_coef))
    return terms


def loss_and_grads(
    params: ParameterSet, batch: RolloutBatch, tcfg: TrainConfig
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean policy-gradient loss over the batch and its parameter gradients.

    Backward runs once per episode in batch order, accumulating into the
    shared parameters, so results match a single joint graph exactly.
    """
    if not batch.episodes:
        raise ValueError("empty batch")
    params.zero_grad()
    returns = compute_returns(batch, batch.cfg.discount, tcfg.advantage_target)
    t_prime = batch.t_prime
    total = 0.0
    for episode, target in zip(batch.episodes, returns):
        terms = _episode_loss_terms(episode, target * tcfg.reward_scale, tcfg)
        episode_sum = ad.sum_list(terms)
        ad.backward(episode_sum, seed=np.full((1, 1), 1.0 / t_prime))
        total += float(episode_sum.data[0, 0]) / t_prime
    return total, params.collect_grads()


def make_fd_loss(params: ParameterSet, cfg: WorldConfig, tcfg: TrainConfig, epoch: int = 0):
    """Deterministic scalar loss closure for finite-difference checks.

    A probe rollout freezes the sampled actions and the advantages at the
    current parameters; the closure replays those episodes so the loss is a
    smooth function of the parameters alone.
    """
    probe = rollout(params, cfg, tcfg, epoch)
    actions = [[step.actions for step in ep.steps] for ep in probe.episodes]
    returns = compute_returns(probe, cfg.discount, tcfg.advantage_target)
    scaled = [r * tcfg.reward_scale for r in returns]
    advantages = [
        [
            [float(scaled[e][t]) - float(d.value.data[0, 0]) for d in step.decisions]
            for t, step in enumerate(ep.steps)
        ]
        for e, ep in enumerate(probe.episodes)
    ]

    def loss_fn() -> Tensor:
        replay = rollout(params, cfg, tcfg, epoch, forced_actions=actions)
        terms = []
        for e, episode in enumerate(replay.episodes):
            terms.extend(
                _episode_loss_terms(episode, scaled[e], tcfg, advantage_override=advantages[e])
            )
        return ad.scale(ad.sum_list(terms), 1.0 / replay.t_prime)

    return loss_fn


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    """Rescale all gradients together when their global norm exceeds max_norm."""
    if max_norm <= 0.0:
        return grads
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm <= max_norm or norm == 0.0:
        return grads
    factor = max_norm / norm
    return {name: g * factor for name, g in grads.items()}


def rmsprop_step(
    params: ParameterSet, grads: dict[str, np.ndarray], opt: OptimizerState
) -> ParameterSet:
    """One RMSProp update in place: acc <- d*acc + (1-d)*g^2, step by g/sqrt(acc)."""
    for name, t in params.items():
        g = grads[name]
        if g.shape != t.data.shape:
            raise ValueError(f"gradient '{name}': shape {g.shape} != {t.data.shape}")
        acc = opt.acc[name]
        acc *= opt.decay
        acc += (1.0 - opt.decay) * g * g
        t.data -= opt.lr * g / (np.sqrt(acc) + opt.eps)
    return params


# --- training loop with exact resume ---


def _state_arrays(params: ParameterSet, opt: OptimizerState) -> dict[str, np.ndarray]:
    arrays = {f"param/{name}": t.data.copy() for name, t in params.items()}
    arrays.update({f"rms/{name}": a.copy() for name, a in opt.acc.items()})
    return arrays


def save_training_state(path, params, opt, epoch: int, chash: str) -> None:
    save_tensors(path, _state_arrays(params, opt), {"config_hash": chash, "epoch": epoch})


def load_training_state(path, params: ParameterSet, opt: OptimizerState) -> int:
    arrays, meta = load_tensors(path)
    params.load_data({k[len("param/"):]: v for k, v in arrays.items() if k.startswith("param/")})
    for name in opt.acc:
        opt.acc[name] = arrays[f"rms/{name}"].copy()
    return int(meta["epoch"])


def train(
    cfg: WorldConfig,
    tcfg: TrainConfig,
    out_dir,
    resume_from=None,
    log=None,
) -> list[EpochMetrics]:
    """Full training run: rollouts, updates, metrics rows, periodic checkpoints.

    Resuming from a saved state file continues in the same output directory
    and reproduces the uninterrupted run byte for byte: all randomness is
    keyed by absolute epoch and the optimizer state is restored exactly.
    """
    cfg.validate()
    tcfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg, tcfg)
    metrics_path = out / "metrics.csv"

    params = init_params(cfg)
    opt = OptimizerState.fresh(params, tcfg)
    if resume_from is not None:
        start_epoch = load_training_state(resume_from, params, opt)
        _, meta = load_tensors(resume_from)
        if meta.get("config_hash") != chash:
            raise ValueError(f"{resume_from}: state was written for a different config")
        if not metrics_path.is_file():
            raise ValueError(f"{metrics_path}: resume expects the run's metrics file in place")
    else:
        start_epoch = 0
        write_manifest(out / "manifest.txt", cfg, tcfg, chash)
        metrics_path.write_text(metrics_header() + "\n", encoding="utf-8")
        save_checkpoint(out / "checkpoint_00000.bin", params, chash, 0)
        save_training_state(out / "state_00000.bin", params, opt, 0, chash)

    history: list[EpochMetrics] = []
    for epoch in range(start_epoch, tcfg.epochs):
        batch = rollout(params, cfg, tcfg, epoch)
        loss, grads = loss_and_grads(params, batch, tcfg)
        grads = clip_global_norm(grads, tcfg.grad_clip)
        rmsprop_step(params, grads, opt)

        em = compute_epoch_metrics(batch, cfg, epoch=epoch, mean_loss=loss)
        history.append(em)
        with open(metrics_path, "a", encoding="utf-8") as fh:
            fh.write(format_metrics_row(em) + "\n")
        if log is not None:
            log(
                f"epoch {epoch:4d}  reward {em.mean_discounted_reward:10.2f}  "
                f"covered {em.pct_targets_covered:6.2f}%  comm {em.comm_efficiency_pct:6.2f}%  "
                f"loss {em.mean_loss:.6f}"
            )

        done = epoch + 1
        if done % tcfg.checkpoint_interval == 0 or done == tcfg.epochs:
            save_checkpoint(out / f"checkpoint_{done:05d}.bin", params, chash, done)
            save_training_state(out / f"state_{done:05d}.bin", params, opt, done, chash)
    return history


def config_fingerprint(cfg: WorldConfig, tcfg: TrainConfig) -> str:
    """Hash plus canonical text, handy for run manifests."""
    return config_hash(cfg, tcfg) + "\n" + config_text(cfg, tcfg)
