import pytest

from swarmsense.config import TrainConfig, WorldConfig


@pytest.fixture
def make_cfg():
    """Factory for small worlds that keep tests fast."""

    def _make(**overrides):
        base = dict(
            n_uavs=2,
            n_bs=1,
            n_targets=4,
            q_max=2,
            msg_dim=4,
            t_max=5,
            power_levels=(50.0, 60.0, 70.0),
            seed=7,
        )
        base.update(overrides)
        return WorldConfig(**base)

    return _make


@pytest.fixture
def make_tcfg():
    def _make(**overrides):
        base = dict(epochs=2, batch_size=2, checkpoint_interval=1, reward_scale=0.01)
        base.update(overrides)
        return TrainConfig(**base)

    return _make
