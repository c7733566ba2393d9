import numpy as np
import pytest

from podnn.config import desk_config
from podnn import pipeline


@pytest.fixture(scope="session")
def desk_store(tmp_path_factory):
    """One shared desk-scale offline run (N ~ 1200, n_data = 2000)."""
    out = tmp_path_factory.mktemp("desk") / "store"
    cfg = desk_config(out_dir=str(out))
    store = pipeline.offline(cfg)
    return cfg, store


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
