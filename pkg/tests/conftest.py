import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from faceswap3d.gallery import build_demo_gallery
from faceswap3d.model import generate_synthetic_model


@pytest.fixture(scope="session")
def model_mapping():
    """Standard 500-vertex fixture model with the 68-point mapping."""
    return generate_synthetic_model(1, n_vertices=500)


@pytest.fixture(scope="session")
def small_model_mapping():
    """Tiny model for oracle tests that loop in pure Python."""
    return generate_synthetic_model(2, n_vertices=80, shape_dim=5, expr_dim=3)


@pytest.fixture(scope="session")
def demo_gallery(tmp_path_factory):
    root = tmp_path_factory.mktemp("gallery")
    manifest = build_demo_gallery(root, seed=11)
    return manifest


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
