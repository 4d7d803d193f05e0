import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def warm_sgd_kernel():
    """Compile the layout kernels once so timed tests measure the
    algorithm, not the JIT."""
    from semtopic import _layout_sgd

    coords = np.zeros((4, 2), dtype=np.float32)
    heads = np.array([0, 1], dtype=np.int64)
    tails = np.array([1, 2], dtype=np.int64)
    weights = np.array([1.0, 1.0], dtype=np.float64)
    _layout_sgd.sgd_epoch(coords, heads, tails, weights, 1.5, 0.9, 1.0, 2, 0, 0)
    return True


@pytest.fixture(scope="session")
def three_theme_fixture(tmp_path_factory):
    """A 3-theme synthetic corpus with an embedding store on disk."""
    from semtopic.synth import SynthSpec, THEME_WORDS, write_fixture

    themes = {k: THEME_WORDS[k] for k in ("space", "medicine", "graphics")}
    spec = SynthSpec(
        themes=themes,
        n_docs=120,
        sentences_per_doc=(2, 3),
        anchors={
            "space": ["orbit", "rocket", "nasa"],
            "medicine": ["doctor", "patient", "disease"],
            "graphics": ["jpeg", "image", "pixels"],
        },
        theme_overlap={("space", "medicine"): 0.6},
        seed=11,
    )
    out = tmp_path_factory.mktemp("fixture3")
    paths = write_fixture(out, spec)
    return {"spec": spec, **paths}
