import numpy as np
import pytest

from ftrl_steering.game import brockett, make_builtin, modified_rps, regulated_matching_pennies, rps


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def builtins():
    return {
        "rps": rps(0.0),
        "rps_half": rps(0.5),
        "modified_rps": modified_rps(),
        "brockett": brockett(),
        "rmp": regulated_matching_pennies(),
    }


ALL_BUILTINS = [
    ("rps", [0.0]),
    ("rps", [0.5]),
    ("modified_rps", []),
    ("brockett", []),
    ("regulated_matching_pennies", []),
]


@pytest.fixture(params=ALL_BUILTINS, ids=lambda p: f"{p[0]}{p[1] or ''}")
def any_builtin(request):
    name, params = request.param
    return make_builtin(name, params)
