import sys
from pathlib import Path

import pytest
import yaml

sys.path.insert(0, str(Path(__file__).parent))

from laryngobench.synthetic import CohortSpec, generate_cohort  # noqa: E402


@pytest.fixture(scope="session")
def cohort(tmp_path_factory):
    """Small training cohort (with symptoms) plus an external cohort without them."""
    root = tmp_path_factory.mktemp("cohort")
    train = generate_cohort(root, CohortSpec(n=60, malignant_fraction=0.25, rate=16_000, duration=1.0),
                            seed=3, name="train", id_prefix="t")
    ext = generate_cohort(root, CohortSpec(n=20, malignant_fraction=0.25, rate=22_050, duration=1.0,
                                           with_symptoms=False), seed=4, name="external", id_prefix="e")
    return {"root": root, "train": train, "external": ext}


def write_config(cohort, path, **extra):
    """Benchmark config over the small cohort with a one-or-two-cell grid."""
    tr, ex = cohort["train"], cohort["external"]
    cfg = {
        "train": {"manifest": tr["manifest"], "schema": tr["schema"], "embeddings": tr["embeddings"]},
        "external": {"ext": {"manifest": ex["manifest"], "embeddings": ex["embeddings"]}},
        "label_map": tr["label_map"],
        "audio_root": tr["audio_root"],
        "feature_sets": ["embedding"],
        "grid": {
            "svm": {"C": [1], "kernel": ["rbf"], "gamma": ["scale"]},
            "logreg": {"penalty": ["l2"], "C": [0.1, 1], "solver": ["lbfgs"], "max_iterations": [100]},
            "mlp": {"hidden_layer_sizes": [[10]], "activation": ["tanh"], "solver": ["adam"],
                    "learning_rate": ["constant"]},
        },
        "bootstrap": {"n_resamples": 100},
        "timing": {"files": 2, "repeats": 2},
        "folds": 3,
    }
    cfg.update(extra)
    Path(path).write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return path
