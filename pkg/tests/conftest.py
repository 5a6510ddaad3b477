import sys
import time
from functools import wraps
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ratebv.certify import certify  # noqa: E402
from ratebv.problems import double_well, scalar_play  # noqa: E402
from ratebv.reparam import extract_bv  # noqa: E402


#: wall time spent building each expensive session fixture, for the runtime criterion
FIXTURE_SECONDS = {}


def timed(fn):
    @wraps(fn)
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        FIXTURE_SECONDS[fn.__name__] = time.perf_counter() - t0
        return out
    return wrapper


@pytest.fixture(scope="session")
def play():
    return scalar_play()


@pytest.fixture(scope="session")
def dwell():
    return double_well()


def _extract(P, extend_constant=False):
    return extract_bv(P.spec, P.load, P.z0, P.eps_list, P.tau, P.s_samples,
                      extend_constant=extend_constant)


@pytest.fixture(scope="session")
@timed
def play_bv(play):
    return _extract(play)


@pytest.fixture(scope="session")
@timed
def dwell_bv(dwell):
    return _extract(dwell)


@pytest.fixture(scope="session")
@timed
def play_cert(play, play_bv):
    return certify(play.spec, play.load, play.z0, play_bv[0], "standard")


@pytest.fixture(scope="session")
@timed
def dwell_cert(dwell, dwell_bv):
    return certify(dwell.spec, dwell.load, dwell.z0, dwell_bv[0], "standard")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def _optimize_play(play, alpha, budget=500):
    from ratebv.control import optimize
    from ratebv.model import ControlObjective
    init = play.load.with_values(np.zeros((2, 1)))
    return optimize(play.spec, play.z0, ControlObjective(np.ones(1), alpha), init, budget=budget)


@pytest.fixture(scope="session")
@timed
def opt_play(play):
    """Scalar play steered to z_des = 1 from the zero load, alpha = 1e-2."""
    return _optimize_play(play, 1e-2)


@pytest.fixture(scope="session")
@timed
def opt_play_2alpha(play):
    return _optimize_play(play, 2e-2)


#: one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
