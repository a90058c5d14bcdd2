import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the shared reference oracles

from tdi import pipeline


@pytest.fixture
def tiny_recipe():
    """A few dozen 16x16 scenes; fast enough for per-test use."""
    sim = pipeline.desk_sim(seed=5).with_(img_w=16, img_h=16, bins=400)
    return pipeline.DatasetRecipe(sim=sim, n_silhouettes=2, depth_steps=3,
                                  lateral_steps=4)
