import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

from revhelper.corpus import load_corpus
from revhelper.features import build_dataset
from revhelper.ingestion import SynthSpec, generate_synthetic_corpus
from revhelper.labeling import label_corpus
from revhelper.text_features import default_lexicons

ROOT = pathlib.Path(__file__).resolve().parents[1]
DATA = pathlib.Path(__file__).resolve().parent / "data"
MINICORPUS = ROOT / "fixtures" / "minicorpus.json"


@pytest.fixture(scope="session")
def minicorpus_path():
    return MINICORPUS


@pytest.fixture(scope="session")
def minicorpus():
    return load_corpus(MINICORPUS)


@pytest.fixture(scope="session")
def lexicons():
    return default_lexicons()


def make_labeled_dataset(n_prs, strength, seed, useful_fraction=0.5, comments=(2, 4)):
    corpus = generate_synthetic_corpus(
        SynthSpec(
            n_prs=n_prs,
            comments_per_pr=comments,
            useful_fraction=useful_fraction,
            signal_strength=strength,
            seed=seed,
        )
    )
    return build_dataset(label_corpus(corpus))


@pytest.fixture(scope="session")
def signal_dataset():
    """~170 rows with strongly class-separated features."""
    return make_labeled_dataset(60, 1.5, seed=5)


@pytest.fixture(scope="session")
def null_dataset():
    """~170 rows with label-independent features."""
    return make_labeled_dataset(60, 0.0, seed=5)
