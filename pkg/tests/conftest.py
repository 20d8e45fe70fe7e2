import pytest

from parley.hypotheses import build_hypothesis_space
from parley.scenario import bundled_scenario, load_scenario

TOY_2ISSUE = {
    "name": "toy-2issue",
    "rounds": 8,
    "min_agree": 2,
    "issues": [
        {"id": "X", "name": "X", "options": ["x1", "x2"]},
        {"id": "Y", "name": "Y", "options": ["y1", "y2", "y3"]},
    ],
    "parties": [
        {
            "id": "truthful",
            "name": "Truthful",
            "veto": False,
            "threshold": 0,
            "scores": {"X": [60, 0], "Y": [30, 15, 0]},
        },
        {
            "id": "other",
            "name": "Other",
            "veto": False,
            "threshold": 0,
            "scores": {"X": [0, 60], "Y": [0, 15, 30]},
        },
    ],
}

# Ground truth of "truthful" equals the hypothesis with weights (2/3, 1/3)
# (weight row 1) and apex-0 shapes on both issues: index 1 * 6 + 0 = 6.
TOY_TRUTH_INDEX = 6


@pytest.fixture(scope="session")
def harbour():
    return bundled_scenario()


@pytest.fixture(scope="session")
def harbour_space(harbour):
    return build_hypothesis_space(harbour)


@pytest.fixture(scope="session")
def toy():
    return load_scenario(TOY_2ISSUE)


@pytest.fixture(scope="session")
def toy_space(toy):
    return build_hypothesis_space(toy)
