"""Simulator and multi-agent RL engine for UAV-swarm bistatic sensing.

A swarm of UAV sensing receivers learns, via an LSTM-attention policy with
learned inter-UAV messaging over imperfect wireless channels, to position
itself so that the total bistatic sensing SNR of randomly placed targets is
maximized.
"""

__version__ = "0.1.0"

from .config import ConfigError, TrainConfig, WorldConfig, load_config, save_config
from .world import BaseStation, Position3D, Target, World, build_world, distance

__all__ = [
    "BaseStation",
    "ConfigError",
    "Position3D",
    "Target",
    "TrainConfig",
    "World",
    "WorldConfig",
    "build_world",
    "distance",
    "load_config",
    "save_config",
    "__version__",
]
