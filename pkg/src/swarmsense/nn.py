"""Differentiable building blocks: dense layers, an LSTM cell, multi-head attention,
softmax and value heads, plus parameter initialization, checkpoint IO, and a
finite-difference gradient checker."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import WorldConfig
from .world import substream


@dataclass
class LstmState:
    hidden: Tensor
    cell: Tensor


class ParameterSet:
    """Named parameter tensors with a fixed iteration order."""

    def __init__(self, tensors: dict[str, Tensor]):
        self._tensors = dict(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def data(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def load_data(self, arrays: dict[str, np.ndarray]) -> None:
        """Overwrite parameter values in place; names and shapes must match."""
        missing = set(self._tensors) - set(arrays)
        extra = set(arrays) - set(self._tensors)
        if missing or extra:
            raise ValueError(f"parameter name mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, t in self._tensors.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ValueError(f"parameter '{name}': shape {arr.shape} != {t.data.shape}")
            t.data = arr.copy()

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.grad = None

    def collect_grads(self) -> dict[str, np.ndarray]:
        """Gradients after backward; parameters a loss never touched get zeros."""
        if all(t.grad is None for t in self._tensors.values()):
            raise RuntimeError("no gradients recorded; run a backward pass first")
        return {
            name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
            for name, t in self._tensors.items()
        }

    def size(self) -> int:
        return sum(t.data.size for t in self._tensors.values())


def _uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = math.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_params(cfg: WorldConfig, rng: np.random.Generator | None = None) -> ParameterSet:
    """Build the full learnable parameter set shared by all agents.

    Layer order and per-layer draw order are fixed, so a given seed always
    yields the same initialization.
    """
    if rng is None:
        rng = substream(cfg.seed, "params")
    s = cfg.msg_dim
    d_k = cfg.head_dim
    n_heads = cfg.n_uavs + 1
    obs_dim = cfg.obs_dim
    msg_in = s + 2

    tensors: dict[str, Tensor] = {}

    def layer(name: str, shape: tuple[int, ...], fan_in: int) -> None:
        tensors[name] = ad.tensor(_uniform(rng, shape, fan_in))

    layer("obs_ffn.W", (obs_dim, s), obs_dim)
    layer("obs_ffn.b", (1, s), obs_dim)
    layer("obs_lstm.Wx", (s, 4 * s), s)
    layer("obs_lstm.Wh", (s, 4 * s), s)
    layer("obs_lstm.b", (1, 4 * s), s)
    layer("msg_ffn.W", (msg_in, s), msg_in)
    layer("msg_ffn.b", (1, s), msg_in)
    layer("msg_lstm.Wx", (s, 4 * s), s)
    layer("msg_lstm.Wh", (s, 4 * s), s)
    layer("msg_lstm.b", (1, 4 * s), s)
    for i in range(n_heads):
        layer(f"attn.h{i}.Wq", (s, d_k), s)
        layer(f"attn.h{i}.Wk", (s, d_k), s)
        layer(f"attn.h{i}.Wv", (s, d_k), s)
    layer("attn.Wo", (n_heads * d_k, s), n_heads * d_k)
    layer("dec.l1.W", (s, s), s)
    layer("dec.l1.b", (1, s), s)
    layer("dec.l2.W", (s, s), s)
    layer("dec.l2.b", (1, s), s)
    layer("mov.W", (s, 8), s)
    layer("mov.b", (1, 8), s)
    layer("pow.W", (s, len(cfg.power_levels)), s)
    layer("pow.b", (1, len(cfg.power_levels)), s)
    layer("value.W", (s, 1), s)
    layer("value.b", (1, 1), s)
    return ParameterSet(tensors)


# --- forward blocks ---


def ffn_forward(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """Single affine layer."""
    if x.data.shape[1] != W.data.shape[0]:
        raise ValueError(f"input width {x.data.shape[1]} != weight rows {W.data.shape[0]}")
    return ad.add(ad.matmul(x, W), b)


def two_layer_ffn(x: Tensor, W1: Tensor, b1: Tensor, W2: Tensor, b2: Tensor) -> Tensor:
    """Affine, ReLU, affine."""
    return ffn_forward(ad.relu(ffn_forward(x, W1, b1)), W2, b2)


def lstm_cell_forward(x: Tensor, state: LstmState, Wx: Tensor, Wh: Tensor, b: Tensor) -> LstmState:
    """Standard LSTM cell; gate order in the packed weights is (i, f, g, o)."""
    width = Wh.data.shape[0]
    z = ad.add(ad.add(ad.matmul(x, Wx), ad.matmul(state.hidden, Wh)), b)
    i = ad.sigmoid(ad.cols(z, 0, width))
    f = ad.sigmoid(ad.cols(z, width, 2 * width))
    g = ad.tanh(ad.cols(z, 2 * width, 3 * width))
    o = ad.sigmoid(ad.cols(z, 3 * width, 4 * width))
    cell = ad.add(ad.mul(f, state.cell), ad.mul(i, g))
    hidden = ad.mul(o, ad.tanh(cell))
    return LstmState(hidden, cell)


def multi_head_attention(
    rows: Tensor, heads: list[tuple[Tensor, Tensor, Tensor]], Wo: Tensor, d_k: int
) -> Tensor:
    """Self-attention over the stacked rows; query, key, and value are all `rows`.

    Each head projects to width d_k, scores are scaled by 1/sqrt(d_k) and
    row-softmaxed, and the concatenated heads are projected by Wo.
    """
    inv = 1.0 / math.sqrt(d_k)
    outputs = []
    for Wq, Wk, Wv in heads:
        q = ad.matmul(rows, Wq)
        k = ad.matmul(rows, Wk)
        v = ad.matmul(rows, Wv)
        scores = ad.scale(ad.matmul(q, ad.transpose(k)), inv)
        outputs.append(ad.matmul(ad.softmax_rows(scores), v))
    return ad.matmul(ad.concat(outputs, axis=1), Wo)


def softmax_head(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """Affine layer followed by a softmax; returns a one-row probability tensor."""
    return ad.softmax_rows(ffn_forward(x, W, b))


def value_head(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """Affine layer with scalar output."""
    return ffn_forward(x, W, b)


# --- gradient verification ---


def finite_difference_check(
    loss_fn: Callable[[], Tensor],
    params: ParameterSet,
    eps: float = 1e-5,
    names: list[str] | None = None,
) -> dict:
    """Compare analytic gradients of loss_fn against central finite differences.

    loss_fn must rebuild its graph on every call and be deterministic given
    the current parameter values. Returns the worst relative error over every
    coordinate of the selected parameters.
    """
    params.zero_grad()
    base = loss_fn()
    if base.data.size != 1:
        raise ValueError("loss_fn must return a scalar tensor")
    ad.backward(base)
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in params.items()
    }

    worst = 0.0
    worst_name = ""
    checked = 0
    for name, t in params.items():
        if names is not None and name not in names:
            continue
        flat = t.data.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + eps
            f_plus = float(loss_fn().data.flat[0])
            flat[idx] = original - eps
            f_minus = float(loss_fn().data.flat[0])
            flat[idx] = original
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = analytic[name].reshape(-1)[idx]
            rel = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            checked += 1
            if rel > worst:
                worst = rel
                worst_name = name
    params.zero_grad()
    return {"max_rel_err": worst, "worst_param": worst_name, "coords_checked": checked}


# --- checkpoint format: text header, then little-endian float64 payload ---

_MAGIC = "SWARMSENSE-TENSORS 1"


def save_tensors(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    """Write named float64 arrays with a small JSON meta line."""
    lines = [_MAGIC, "meta " + json.dumps(meta, sort_keys=True)]
    for name, arr in arrays.items():
        shape = "x".join(str(d) for d in arr.shape)
        lines.append(f"tensor {name} {shape}")
    header = ("\n".join(lines) + "\nDATA\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_tensors(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a file written by save_tensors."""
    blob = Path(path).read_bytes()
    marker = blob.index(b"DATA\n")
    head = blob[:marker].decode("utf-8").splitlines()
    if not head or head[0] != _MAGIC:
        raise ValueError(f"{path}: not a tensor checkpoint")
    meta: dict = {}
    specs: list[tuple[str, tuple[int, ...]]] = []
    for line in head[1:]:
        if line.startswith("meta "):
            meta = json.loads(line[len("meta "):])
        elif line.startswith("tensor "):
            _, name, shape_text = line.split(" ", 2)
            shape = tuple(int(d) for d in shape_text.split("x"))
            specs.append((name, shape))
        elif line.strip():
            raise ValueError(f"{path}: unexpected header line {line!r}")
    payload = blob[marker + len(b"DATA\n"):]
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in specs:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        chunk = payload[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise ValueError(f"{path}: truncated payload for tensor '{name}'")
        arrays[name] = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        offset += nbytes
    if offset != len(payload):
        raise ValueError(f"{path}: {len(payload) - offset} trailing bytes")
    return arrays, meta


def save_checkpoint(path, params: ParameterSet, config_hash: str, epoch: int) -> None:
    """Write parameters plus a sidecar text manifest."""
    save_tensors(path, params.data(), {"config_hash": config_hash, "epoch": epoch})
    manifest = Path(str(path) + ".manifest")
    manifest.write_text(f"config_hash={config_hash}\nepoch={epoch}\n", encoding="utf-8")


def load_checkpoint(path, params: ParameterSet) -> dict:
    """Load parameter values in place; returns the checkpoint meta."""
    arrays, meta = load_tensors(path)
    params.load_data(arrays)
    return meta
