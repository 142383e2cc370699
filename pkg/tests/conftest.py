import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))  # helpers/fdcheck importable

from tubeground.config import RunConfig
from tubeground.datakit import SyntheticSceneConfig, generate_synthetic


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


@pytest.fixture()
def tiny_run():
    return RunConfig(
        model_dim=12,
        word_dim=8,
        lang_hidden=6,
        frame_hidden=6,
        layers=2,
        window=2,
        widths=[2, 4, 8],
        epochs=2,
        batch_size=4,
        seed=0,
    )


@pytest.fixture(scope="session")
def tiny_scene():
    return SyntheticSceneConfig(
        num_samples=4, num_frames=10, num_regions=3, feature_dim=8, frame_feature_dim=6
    )


@pytest.fixture(scope="session")
def tiny_dataset(tiny_scene):
    return generate_synthetic(tiny_scene, seed=5)
