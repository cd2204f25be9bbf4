import os

import numpy as np
import pytest
from hypothesis import settings

from vsumeval.ingest import SynthConfig, synth_dataset

settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_synth():
    """Three short synthetic videos with six annotators (one outlier)."""
    return synth_dataset(SynthConfig(n_videos=3, n_frames_min=600, n_frames_max=900, n_annotators=6, seed=11))


@pytest.fixture(scope="session")
def synth_bundle():
    return synth_dataset(SynthConfig(n_videos=5, seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tvsum_paths():
    """Location of the public TVSum annotation file, if configured."""
    root = os.environ.get("VSUMEVAL_DATA_ROOT")
    if not root:
        return None
    tsv = os.path.join(root, "tvsum", "ydata-tvsum50-anno.tsv")
    meta = os.path.join(root, "tvsum", "videos.json")
    if os.path.exists(tsv) and os.path.exists(meta):
        return tsv, meta
    return None
