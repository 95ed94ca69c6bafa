import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from sicerep.represent import FrameFeatureSequence, sice_hierarchy


@pytest.fixture(scope="session")
def small_hierarchies():
    """Ten depth-10 hierarchies (d=5) with binary labels, built once."""
    rng = np.random.default_rng(11)
    hiers, labels = [], []
    for k in range(10):
        frames = rng.standard_normal((14, 5)) * (1.0 + 0.5 * (k % 2))
        seq = FrameFeatureSequence(frames, label=f"c{k % 2}", sample_id=f"s{k}")
        hiers.append(sice_hierarchy(seq, tol=1e-8, sample_id=f"s{k}"))
        labels.append(f"c{k % 2}")
    return hiers, labels


@pytest.fixture(autouse=True)
def _silence_nestedness_warnings():
    # support reversals along penalty paths are expected on noisy inputs
    # (see the acceptance notes); unit tests assert them explicitly instead
    import warnings
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="support nestedness violated")
        yield
