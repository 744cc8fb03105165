import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

GRAD_SEEDS = list(range(20))


def mitdb_dir():
    root = os.environ.get("ECGMAE_DATA_ROOT")
    if not root:
        return None
    d = os.path.join(root, "mitdb")
    return d if os.path.isfile(os.path.join(d, "100.hea")) else None


requires_data = pytest.mark.requires_data
skip_without_mitdb = pytest.mark.skipif(mitdb_dir() is None,
                                        reason="MITDB not found under $ECGMAE_DATA_ROOT/mitdb")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
