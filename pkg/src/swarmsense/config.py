"""Configuration types, validation, and the key=value config file format."""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """Raised when a configuration value violates its contract."""


@dataclass(frozen=True)
class WorldConfig:
    """Physical, spectral, and episode constants for one simulation world."""

    L: float = 1000.0               # arena extent along x, meters
    H: float = 1000.0               # arena extent along y, meters
    t_max: int = 100                # steps per episode
    uav_alt: float = 25.0           # fixed UAV flight altitude, meters
    uav_speed: float = 20.0         # meters per second
    dt: float = 1.0                 # seconds per step
    f_c: float = 28e9               # sensing carrier frequency, Hz
    sigma_shadow: float = 3.56      # shadow fading std deviation, dB
    p_tx_bs: float = 46.0           # base station transmit power, dBm
    p_n: float = -99.0              # average noise power, dBm
    g_tx: float = 11.0              # base station antenna gain, dBi
    g_r: float = 11.0               # UAV antenna gain, dBi
    gamma1: float = -10.0           # SINR at or below which a message is lost, dB
    gamma2: float = 0.0             # SINR at or above which a message decodes, dB
    gamma_s: float = -10.0          # sensing SNR threshold, dB
    sinr_offset: float = 30.0       # constant offset in the SINR budget, dB
    q_max: int = 5                  # per-UAV sensing resolution cap (targets per step)
    n_uavs: int = 5
    n_bs: int = 3
    n_targets: int = 100
    msg_dim: int = 16               # width of inter-UAV messages
    power_levels: tuple[float, ...] = (50.0, 55.0, 60.0, 65.0, 70.0)  # dBm
    comm_base_freq: float = 2.4e9   # Hz, carrier of UAV channel 0
    comm_channel_spacing: float = 5e6  # Hz between adjacent UAV channels
    comm_min_distance: float = 1.0  # m; clamps UAV-UAV budgets at the model's reference point
    rcs_mean: float = -20.0         # target radar cross section mean, dBsm
    rcs_std: float = 5.0            # dBsm
    target_alt_range: tuple[float, float] = (10.0, 120.0)  # meters
    bs_alt: float = 30.0            # base station antenna height, meters
    discount: float = 0.9
    seed: int = 0
    # behavior switches
    literal_db_sinr: bool = False   # subtract interference in dB instead of linear power addition
    normalize_obs: bool = True
    snr_scale: float = 50.0         # dB divisor for observation SNR slots
    z_scale: float = 100.0          # meter divisor for observation altitude slots
    attn_head_dim: int = 0          # per-head projection width, 0 means msg_dim

    def validate(self) -> None:
        _validate_world(self)

    @property
    def head_dim(self) -> int:
        return self.attn_head_dim if self.attn_head_dim > 0 else self.msg_dim

    @property
    def obs_dim(self) -> int:
        return 2 + 6 * self.q_max


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of the policy-gradient training loop."""

    epochs: int = 100
    batch_size: int = 5
    learning_rate: float = 1e-4
    beta: float = 0.014             # value-loss weight
    rms_decay: float = 0.99
    rms_eps: float = 1e-8
    grad_clip: float = 5.0          # global-norm cap, 0 disables clipping
    advantage_target: str = "return_to_go"  # or "paper_literal" (raw per-step reward)
    reward_scale: float = 1.0       # multiplies rewards inside the loss only
    entropy_coef: float = 0.0
    checkpoint_interval: int = 10   # epochs between checkpoints

    def validate(self) -> None:
        _validate_train(self)


def _fail(field_name: str, message: str) -> None:
    raise ConfigError(f"field '{field_name}': {message}")


def _validate_world(cfg: WorldConfig) -> None:
    if cfg.L <= 0 or cfg.H <= 0:
        _fail("L/H", "arena dimensions must be positive")
    if cfg.t_max < 1:
        _fail("t_max", "episode must have at least one step")
    if cfg.uav_speed * cfg.dt <= 0:
        _fail("uav_speed", "per-step displacement must be positive")
    if cfg.uav_alt <= 0:
        _fail("uav_alt", "UAV altitude must be positive")
    if cfg.q_max < 1:
        _fail("q_max", "resolution cap must be at least 1")
    if cfg.n_uavs < 1:
        _fail("n_uavs", "need at least one UAV")
    if cfg.n_bs < 1:
        _fail("n_bs", "need at least one base station")
    if cfg.n_targets < 1:
        _fail("n_targets", "need at least one target")
    if not cfg.gamma1 < cfg.gamma2:
        _fail("gamma1", f"lower SINR threshold {cfg.gamma1} must be below gamma2 {cfg.gamma2}")
    if not 0.0 <= cfg.discount <= 1.0:
        _fail("discount", "discount factor must lie in [0, 1]")
    if not cfg.power_levels:
        _fail("power_levels", "power level set must be nonempty")
    if any(b <= a for a, b in zip(cfg.power_levels, cfg.power_levels[1:])):
        _fail("power_levels", "power levels must be strictly ascending")
    if cfg.msg_dim < 1:
        _fail("msg_dim", "message width must be at least 1")
    if cfg.f_c <= 0 or cfg.comm_base_freq <= 0:
        _fail("f_c", "carrier frequencies must be positive")
    if cfg.comm_channel_spacing <= 0:
        _fail("comm_channel_spacing", "channel spacing must be positive")
    lo, hi = cfg.target_alt_range
    if lo <= 0 or hi < lo:
        _fail("target_alt_range", "need 0 < low <= high")
    if cfg.rcs_std < 0:
        _fail("rcs_std", "standard deviation cannot be negative")
    if cfg.sigma_shadow < 0:
        _fail("sigma_shadow", "standard deviation cannot be negative")
    if cfg.snr_scale <= 0 or cfg.z_scale <= 0:
        _fail("snr_scale", "observation scales must be positive")
    if cfg.attn_head_dim < 0:
        _fail("attn_head_dim", "head width cannot be negative")


def _validate_train(tcfg: TrainConfig) -> None:
    if tcfg.epochs < 0:
        _fail("epochs", "cannot be negative")
    if tcfg.batch_size < 1:
        _fail("batch_size", "need at least one episode per batch")
    if tcfg.learning_rate <= 0:
        _fail("learning_rate", "must be positive")
    if not 0.0 <= tcfg.rms_decay < 1.0:
        _fail("rms_decay", "must lie in [0, 1)")
    if tcfg.rms_eps <= 0:
        _fail("rms_eps", "must be positive")
    if tcfg.grad_clip < 0:
        _fail("grad_clip", "cannot be negative")
    if tcfg.advantage_target not in ("return_to_go", "paper_literal"):
        _fail("advantage_target", f"unknown mode {tcfg.advantage_target!r}")
    if tcfg.reward_scale <= 0:
        _fail("reward_scale", "must be positive")
    if tcfg.beta < 0:
        _fail("beta", "cannot be negative")
    if tcfg.entropy_coef < 0:
        _fail("entropy_coef", "cannot be negative")
    if tcfg.checkpoint_interval < 1:
        _fail("checkpoint_interval", "must be at least 1")


# --- config file format: INI sections [world] and [train], keys mirror field names ---

_TUPLE_FIELDS = {"power_levels", "target_alt_range"}


def _parse_value(field_name: str, raw: str, default):
    if field_name in _TUPLE_FIELDS:
        return tuple(float(part) for part in raw.replace(",", " ").split())
    if isinstance(default, bool):
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _section_to_overrides(path, section_name, parser, defaults) -> dict:
    known = {f.name: getattr(defaults, f.name) for f in fields(defaults)}
    overrides = {}
    for key, raw in parser.items(section_name):
        if key not in known:
            raise ConfigError(f"{path}: [{section_name}] unknown key '{key}'")
        try:
            overrides[key] = _parse_value(key, raw, known[key])
        except ValueError as exc:
            raise ConfigError(f"{path}: [{section_name}] {key} = {raw!r}: {exc}") from exc
    return overrides


def load_config(path) -> tuple[WorldConfig, TrainConfig]:
    """Read a [world]/[train] config file; missing keys keep their defaults."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: config file not found")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive field names
    try:
        parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for section in parser.sections():
        if section not in ("world", "train"):
            raise ConfigError(f"{path}: unknown section [{section}]")
    cfg = WorldConfig()
    tcfg = TrainConfig()
    if parser.has_section("world"):
        cfg = replace(cfg, **_section_to_overrides(path, "world", parser, cfg))
    if parser.has_section("train"):
        tcfg = replace(tcfg, **_section_to_overrides(path, "train", parser, tcfg))
    try:
        cfg.validate()
        tcfg.validate()
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg, tcfg


def save_config(path, cfg: WorldConfig, tcfg: TrainConfig | None = None) -> None:
    """Write a config file that load_config reads back to equal values."""
    lines = ["[world]"]
    for f in fields(cfg):
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
    if tcfg is not None:
        lines.append("")
        lines.append("[train]")
        for f in fields(tcfg):
            lines.append(f"{f.name} = {_format_value(getattr(tcfg, f.name))}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def config_text(cfg: WorldConfig, tcfg: TrainConfig) -> str:
    """Canonical sorted key=value rendering used for hashing."""
    lines = [f"world.{f.name}={_format_value(getattr(cfg, f.name))}" for f in fields(cfg)]
    lines += [f"train.{f.name}={_format_value(getattr(tcfg, f.name))}" for f in fields(tcfg)]
    return "\n".join(sorted(lines)) + "\n"


# Stopping and bookkeeping knobs: changing them never alters the trajectory of
# any epoch that does run, so they stay out of the compatibility hash and a
# stopped run can resume toward a longer horizon.
_HASH_EXCLUDED = ("train.epochs=", "train.checkpoint_interval=")


def config_hash(cfg: WorldConfig, tcfg: TrainConfig) -> str:
    relevant = [
        line
        for line in config_text(cfg, tcfg).splitlines()
        if not line.startswith(_HASH_EXCLUDED)
    ]
    return hashlib.sha256("\n".join(relevant).encode("utf-8")).hexdigest()
