"""Per-agent decision pipeline: encoders, attention, message decoder, action heads.

All agents share one ParameterSet; each agent owns only its recurrent state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import WorldConfig
from .env import ActionPair, AdaptedMessage, N_MOVES
from .nn import (
    LstmState,
    ParameterSet,
    ffn_forward,
    lstm_cell_forward,
    multi_head_attention,
    softmax_head,
    two_layer_ffn,
    value_head,
)

INIT_STATE_STD = 0.1  # recurrent states start as small Gaussian noise


@dataclass
class AgentRuntime:
    """Recurrent state of one agent: observation stream plus one stream per sender."""

    index: int
    obs_state: LstmState
    msg_states: dict[int, LstmState]
    last_message: Tensor


@dataclass
class AgentDecision:
    """Distributions, sampled actions, and graph handles for one agent step."""

    move_probs: np.ndarray
    power_probs: np.ndarray
    action: ActionPair
    logp_move: Tensor
    logp_power: Tensor
    message: Tensor
    value: Tensor
    move_probs_t: Tensor
    power_probs_t: Tensor


def init_runtime(index: int, cfg: WorldConfig, rng: np.random.Generator) -> AgentRuntime:
    """Fresh recurrent state; draw order is fixed (hidden then cell, senders ascending)."""
    s = cfg.msg_dim

    def noise() -> Tensor:
        return ad.tensor(rng.normal(0.0, INIT_STATE_STD, size=(1, s)))

    obs_state = LstmState(noise(), noise())
    msg_states = {
        j: LstmState(noise(), noise()) for j in range(cfg.n_uavs) if j != index
    }
    return AgentRuntime(index, obs_state, msg_states, ad.tensor(np.zeros((1, s))))


def sample(probs: np.ndarray, rng: np.random.Generator, greedy: bool = False) -> int:
    """Draw an index from a categorical distribution; greedy takes the argmax."""
    if greedy:
        return int(np.argmax(probs))
    r = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), r, side="right"))
    return min(idx, len(probs) - 1)


def agent_forward(
    params: ParameterSet,
    runtime: AgentRuntime,
    observation: np.ndarray,
    messages: list[AdaptedMessage],
    cfg: WorldConfig,
    rng: np.random.Generator | None = None,
    greedy: bool = False,
    forced: ActionPair | None = None,
) -> tuple[AgentDecision, AgentRuntime]:
    """Run the full decision pipeline for one agent at one step.

    Encodes the observation and every adapted message through their LSTM
    streams, aggregates with multi-head self-attention, decodes the outgoing
    message, and samples movement and power from the two policy heads. The
    new runtime carries the updated recurrent states.
    """
    senders = [m.sender for m in messages]
    expected = [j for j in range(cfg.n_uavs) if j != runtime.index]
    if senders != expected:
        raise ValueError(f"messages must come from senders {expected}, got {senders}")

    x = ad.tensor(np.asarray(observation, dtype=np.float64).reshape(1, -1))
    obs_state = lstm_cell_forward(
        ffn_forward(x, params["obs_ffn.W"], params["obs_ffn.b"]),
        runtime.obs_state,
        params["obs_lstm.Wx"],
        params["obs_lstm.Wh"],
        params["obs_lstm.b"],
    )

    rows = [obs_state.hidden]
    msg_states: dict[int, LstmState] = {}
    for msg in messages:
        if isinstance(msg.payload, Tensor):
            payload = msg.payload
        else:
            payload = ad.tensor(np.asarray(msg.payload, dtype=np.float64).reshape(1, -1))
        tail = ad.tensor([[float(msg.status), float(msg.sender)]])
        encoded = ffn_forward(
            ad.concat([payload, tail], axis=1), params["msg_ffn.W"], params["msg_ffn.b"]
        )
        state = lstm_cell_forward(
            encoded,
            runtime.msg_states[msg.sender],
            params["msg_lstm.Wx"],
            params["msg_lstm.Wh"],
            params["msg_lstm.b"],
        )
        msg_states[msg.sender] = state
        rows.append(state.hidden)

    stacked = rows[0] if len(rows) == 1 else ad.concat(rows, axis=0)
    heads = [
        (params[f"attn.h{i}.Wq"], params[f"attn.h{i}.Wk"], params[f"attn.h{i}.Wv"])
        for i in range(cfg.n_uavs + 1)
    ]
    attended = multi_head_attention(stacked, heads, params["attn.Wo"], cfg.head_dim)
    focus = ad.row(attended, 0)  # the row aligned with the observation embedding

    message = two_layer_ffn(
        focus, params["dec.l1.W"], params["dec.l1.b"], params["dec.l2.W"], params["dec.l2.b"]
    )
    move_probs_t = softmax_head(message, params["mov.W"], params["mov.b"])
    power_probs_t = softmax_head(message, params["pow.W"], params["pow.b"])
    value = value_head(message, params["value.W"], params["value.b"])

    move_probs = move_probs_t.data[0].copy()
    power_probs = power_probs_t.data[0].copy()
    if forced is not None:
        action = forced
    else:
        if rng is None:
            raise ValueError("need an rng to sample actions")
        action = ActionPair(sample(move_probs, rng, greedy), sample(power_probs, rng, greedy))
    if not (0 <= action.move < N_MOVES and 0 <= action.power < len(cfg.power_levels)):
        raise ValueError(f"action out of range: {action}")

    decision = AgentDecision(
        move_probs=move_probs,
        power_probs=power_probs,
        action=action,
        logp_move=ad.log(ad.pick(move_probs_t, 0, action.move)),
        logp_power=ad.log(ad.pick(power_probs_t, 0, action.power)),
        message=message,
        value=value,
        move_probs_t=move_probs_t,
        power_probs_t=power_probs_t,
    )
    new_runtime = AgentRuntime(runtime.index, obs_state, msg_states, message)
    return decision, new_runtime
