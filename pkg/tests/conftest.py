import numpy as np
import pytest
from hypothesis import settings

from robinbubble.domain import Ball, StarShaped
from robinbubble.robin import RobinEvaluator

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

STAR_HARMONICS = [[0, 0, 1.0], [2, 0, 0.1], [3, 1, 0.05]]


@pytest.fixture(scope="session")
def ball():
    return Ball()


@pytest.fixture(scope="session")
def star():
    return StarShaped(STAR_HARMONICS)


@pytest.fixture(scope="session")
def ev_ball():
    """Unit-ball evaluators keyed by lambda, built once per session."""
    cache = {}

    def get(lam, n=400):
        key = (lam, n)
        if key not in cache:
            cache[key] = RobinEvaluator(lam, Ball(), n=n)
        return cache[key]
    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# ---------------------------------------------------------------- shared expensive results

PROBE_OFFSETS = np.array([[0, 0, 0], [0.5, 0, 0], [0, 1.0, 0], [0, 0, -1.5], [1.0, 1.0, 0]])


@pytest.fixture(scope="session")
def lam_e():
    """lambda* + 0.05 on the unit ball."""
    from robinbubble.critical import lambda_star_ball
    return lambda_star_ball() + 0.05


@pytest.fixture(scope="session")
def window_mus():
    from robinbubble import defaults
    lo, hi = defaults.MU_WINDOW
    return sorted((m for m in defaults.MU_LIST if lo <= m <= hi), reverse=True)


@pytest.fixture(scope="session")
def pipeline_star():
    """lambda* of balls of radius R by the numerical pipeline, cached per R."""
    from robinbubble.critical import lambda_star
    cache = {}

    def get(R=1.0):
        if R not in cache:
            cache[R] = lambda_star(Ball(R))
        return cache[R]
    return get


@pytest.fixture(scope="session")
def expansion_ball(lam_e, window_mus):
    from robinbubble.bubble_energy import expansion_check
    return expansion_check(Ball(), lam_e, np.zeros(3), window_mus)


@pytest.fixture(scope="session")
def pi_expansion_ball(lam_e, window_mus):
    from robinbubble.bubble_energy import pi_expansion_check
    return pi_expansion_check(Ball(), lam_e, np.zeros(3), window_mus, 0.2 * PROBE_OFFSETS)


@pytest.fixture(scope="session")
def ansatz_solver(lam_e):
    from robinbubble.field_solver import NeumannSolver
    return NeumannSolver(lam_e, Ball(), n=800)
