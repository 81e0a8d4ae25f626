import pytest

from trainkit.dataset import make_toy_dataset
from trainkit.train import TrainConfig, train


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy_dataset")
    make_toy_dataset(root, per_dir=2, seed=1)
    return root


@pytest.fixture(scope="session")
def toy_head_run(toy_root, tmp_path_factory):
    """One head-stage toy training run shared across tests."""
    out = tmp_path_factory.mktemp("toy_run")
    cfg = TrainConfig(stage="head", epochs=3, learning_rate=1e-3, optimizer="adam",
                      augmentation=None, toy_scale=True, seed=0)
    return train(cfg, toy_root, out)
