import sys

import pytest

from crossenc.model import TrainConfig
from crossenc.train import train

PY = sys.executable

from test_scorer_train import SMOKE_CFG, write_fixture  # noqa: E402


@pytest.fixture(scope="session")
def trained_checkpoint(tmp_path_factory):
    """A quickly trained miniature checkpoint shared by the serve tests."""
    root = tmp_path_factory.mktemp("ckpt-fixture")
    pairs_file, bundle = write_fixture(root / "fix")
    ckpt = root / "ckpt"
    cfg = TrainConfig(**dict(SMOKE_CFG, max_intervals=4))
    train(pairs_file, bundle, ckpt, cfg)
    return ckpt
