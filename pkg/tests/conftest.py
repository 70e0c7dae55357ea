import json
import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from satxplain.surrogate import forest_from_dict  # noqa: E402

# instance of the congressional-voting running example (X1..X16)
VOTE_X = (1, 1, 1, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 1, 0, 1)


def load_vote_forest():
    text = resources.files("satxplain").joinpath("data/vote_forest.json").read_text()
    return forest_from_dict(json.loads(text))


@pytest.fixture
def vote_forest():
    return load_vote_forest()


@pytest.fixture
def vote_x():
    return VOTE_X


@pytest.fixture
def vote_forest_path():
    return Path(str(resources.files("satxplain").joinpath("data/vote_forest.json")))


def feats(*names):
    """Feature indices (0-based) from 1-based names like 4, 12."""
    return frozenset(n - 1 for n in names)


@pytest.fixture(params=["python", "pysat"])
def backend(request):
    """Each SAT backend; both must give identical enumeration results."""
    return request.param
