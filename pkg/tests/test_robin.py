import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from robinbubble.critical import lambda_star_ball
from robinbubble.domain import Ball
from robinbubble.errors import DomainError
from robinbubble.robin import (G_ball_analytic, RobinEvaluator, ball_regular_correction,
                               ball_robin, g_ball_analytic, sup_g)

# frozen from oracles.ball_center_closed / oracles.ball_robin_series (mpmath, 30 digits)
G_CENTER = {
    0.025: -9.405648177669104, 0.05: -4.630591517543344, 0.1: -2.2424524036296174,
    0.5: -0.32615641826217895, 1.0: -0.07957747154594767, 2.0: 0.054868538638078695,
    4.0: 0.1425757707052498, 10.0: 0.24991614492686826,
}
G_OFF = {
    (0.5, 0.3): -0.3449674647912074, (0.5, 0.6): -0.4208339515414654,
    (0.5, 0.8): -0.5759232008544448, (0.5, 0.9): -0.832980130362316,
    (1.0, 0.3): -0.09545941714261152, (1.0, 0.6): -0.16273496548146343,
    (1.0, 0.8): -0.30941309894739877, (1.0, 0.9): -0.5617822985202934,
    (2.0, 0.3): 0.0432364077576793, (2.0, 0.6): -0.010872513961987719,
    (2.0, 0.8): -0.1435126795515787, (2.0, 0.9): -0.3874607206913008,
    (4.0, 0.3): 0.1358347997728225, (4.0, 0.6): 0.09855993832217882,
    (4.0, 0.8): -0.013145425229409933, (4.0, 0.9): -0.2428687057661488,
}
LAMBDA_STAR = 1.43923
# numerical error budget by distance from the center at n=400
OFF_TOL = {0.3: 1e-6, 0.6: 1e-6, 0.8: 3e-5, 0.9: 5e-4}


def _dir(r):
    u = np.array([0.48, -0.6, 0.64])
    return r * u / np.linalg.norm(u)


# ---------------------------------------------------------------- closed forms

@pytest.mark.parametrize("lam", sorted(G_CENTER))
def test_center_closed_form(lam):
    assert g_ball_analytic(lam) == pytest.approx(G_CENTER[lam], rel=1e-13, abs=1e-15)


def test_closed_form_examples():
    assert g_ball_analytic(1.0) == pytest.approx(-1.0 / (4 * math.pi), rel=1e-15)
    expected = (2.0 - 4.0 / (1.0 + math.exp(4.0) / 3.0)) / (4 * math.pi)
    assert g_ball_analytic(4.0) == pytest.approx(expected, rel=1e-14)
    assert abs(g_ball_analytic(lambda_star_ball())) < 1e-15
    assert lambda_star_ball() == pytest.approx(LAMBDA_STAR, abs=1e-5)


def test_green_leading_singularity():
    vals = [G_ball_analytic(1.3, r) * 4 * math.pi * r for r in (1e-2, 1e-4, 1e-6)]
    assert abs(vals[-1] - 1.0) < 1e-5 and abs(vals[0] - 1) > abs(vals[1] - 1) > abs(vals[2] - 1)


@pytest.mark.parametrize("r", [0.0, 1.0, -0.1, 1.5])
def test_green_closed_form_rejects_radius(r):
    with pytest.raises(DomainError):
        G_ball_analytic(1.0, r)


def test_closed_form_rejects_lambda():
    with pytest.raises(DomainError):
        g_ball_analytic(0.0)


@pytest.mark.parametrize("key", sorted(G_OFF))
def test_series_matches_oracle(key):
    lam, r = key
    assert ball_robin(lam, _dir(r)) == pytest.approx(G_OFF[key], rel=1e-11, abs=1e-13)


def test_series_radius_scaling():
    # g_{R, lam}(R x) = g_{1, lam R^2}(x) / R
    x = _dir(0.6)
    assert ball_robin(0.25, 2.0 * x, radius=2.0) == pytest.approx(ball_robin(1.0, x) / 2.0,
                                                                 rel=1e-12)
    assert g_ball_analytic(0.25, 2.0) == pytest.approx(g_ball_analytic(1.0) / 2.0, rel=1e-13)


@settings(max_examples=40)
@given(st.tuples(*[st.floats(-0.55, 0.55)] * 3), st.tuples(*[st.floats(-0.55, 0.55)] * 3),
       st.floats(0.1, 8.0))
def test_series_correction_symmetric(x, y, lam):
    x, y = np.array(x), np.array(y)
    a = ball_regular_correction(lam, x, y)
    b = ball_regular_correction(lam, y, x)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@settings(max_examples=40)
@given(st.floats(0.0, 0.95), st.floats(0.05, 3.0), st.floats(1.01, 2.0))
def test_series_increasing_in_lambda(r, lam, factor):
    x = _dir(r)
    assert ball_robin(lam * factor, x) > ball_robin(lam, x)


# ---------------------------------------------------------------- numerical g

@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0, 4.0])
def test_numerical_center_value(ev_ball, lam):
    val = ev_ball(lam).evaluate(np.zeros(3))
    assert abs(val.value - G_CENTER[lam]) <= 1e-6
    assert not val.flagged


def test_numerical_center_at_lambda_star(ev_ball):
    assert abs(ev_ball(lambda_star_ball()).g(np.zeros(3))) <= 1e-5


@pytest.mark.parametrize("key", sorted(G_OFF))
def test_numerical_off_center(ev_ball, key):
    lam, r = key
    assert abs(ev_ball(lam).g(_dir(r)) - G_OFF[key]) <= OFF_TOL[r]


@settings(max_examples=20)
@given(st.floats(0.0, 0.85), st.tuples(*[st.floats(-1, 1)] * 4).filter(
    lambda q: np.linalg.norm(q) > 1e-3))
def test_numerical_g_rotation_invariant_on_ball(ev_ball, r, quat):
    ev = ev_ball(1.0)
    x = _dir(r)
    y = Rotation.from_quat(np.array(quat) / np.linalg.norm(quat)).apply(x)
    tol = 1e-6 if r < 0.7 else 1e-4
    assert abs(ev.g(x) - ev.g(y)) <= tol


def test_margin_violation(ev_ball):
    ev = ev_ball(1.0)
    with pytest.raises(DomainError, match="boundary-asymptotic"):
        ev.g(np.array([0.0, 0.0, 0.99]))
    with pytest.raises(DomainError):
        ev.g(np.array([0.0, 0.0, 1.5]))


def test_star_domain_g_converges(star):
    x = star.center + np.array([0.1, -0.2, 0.15])
    coarse = RobinEvaluator(1.0, star, n=400).g(x)
    fine = RobinEvaluator(1.0, star, n=1600).g(x)
    assert abs(coarse - fine) < 1e-5


def test_regular_part_diagonal_is_g(ev_ball):
    ev = ev_ball(2.0)
    z = _dir(0.4)
    assert ev.regular_part(z, z) == pytest.approx(ev.g(z), abs=1e-12)


def test_g_many_matches_scalar(ev_ball):
    ev = ev_ball(1.0)
    pts = np.array([_dir(0.1), _dir(0.5), [0.2, 0.3, -0.1]])
    vals, res = ev.g_many(pts)
    assert np.allclose(vals, [ev.g(p) for p in pts], rtol=0, atol=1e-14)
    assert np.all(res < 1e-2)


def test_single_solve_per_point_under_threads(ball):
    ev = RobinEvaluator(1.0, ball)
    calls = []
    original = ev._compute

    def counting(pts):
        calls.append(1)
        return original(pts)

    ev._compute = counting
    x = np.array([0.1, 0.2, 0.3])
    out = []
    threads = [threading.Thread(target=lambda: out.append(ev.g(x))) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(calls) == 1 and len(set(out)) == 1


# ---------------------------------------------------------------- derivatives

def test_gradient_at_center_vanishes(ev_ball):
    assert np.linalg.norm(ev_ball(1.0).grad_g(np.zeros(3))) < 1e-6


def test_gradient_points_inward(ev_ball):
    ev = ev_ball(1.0)
    grad = ev.grad_g(np.array([0.3, 0.0, 0.0]))
    assert grad[0] < 0 and abs(grad[1]) < 1e-6 and abs(grad[2]) < 1e-6
    assert ev.g(np.array([0.35, 0, 0])) < ev.g(np.array([0.3, 0, 0])) < ev.g(np.zeros(3))


def test_gradient_matches_directional_difference(ev_ball):
    ev = ev_ball(1.0)
    x = np.array([0.2, -0.3, 0.25])
    e = np.array([1.0, 2.0, -2.0]) / 3.0
    h = 1e-4
    fd = (ev.g(x + h * e) - ev.g(x - h * e)) / (2 * h)
    assert ev.grad_g(x) @ e == pytest.approx(fd, rel=1e-6)


def test_gradient_matches_series(ev_ball):
    ev = ev_ball(1.0)
    x = _dir(0.5)
    h = 1e-4
    fd = np.array([(ball_robin(1.0, x + h * e) - ball_robin(1.0, x - h * e)) / (2 * h)
                   for e in np.eye(3)])
    assert np.allclose(ev.grad_g(x), fd, atol=1e-5)


def test_dg_dlambda_center_matches_closed_form(ev_ball):
    lam = 1.0
    dl = 1e-4
    exact = (g_ball_analytic(lam + dl) - g_ball_analytic(lam - dl)) / (2 * dl)
    num = ev_ball(lam).dg_dlambda(np.zeros(3))
    assert exact > 0 and abs(num - exact) <= 1e-4


@pytest.mark.slow
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_dg_dlambda_positive_at_random_points(ball, lam):
    rng = np.random.default_rng(20240917)
    pts = []
    while len(pts) < 20:
        p = rng.uniform(-0.9, 0.9, 3)
        if np.linalg.norm(p) < 0.9:
            pts.append(p)
    ev = RobinEvaluator(lam, ball)
    assert all(ev.dg_dlambda(p) > 0 for p in pts)


# ---------------------------------------------------------------- supremum

@pytest.fixture(scope="module")
def sups(ev_ball):
    return {lam: sup_g(ev_ball(lam)) for lam in (0.5, 1.0, 2.0)}


def test_sup_on_ball_at_center(sups):
    for lam, res in sups.items():
        assert np.linalg.norm(res.argmax) < 1e-3
        assert res.M == pytest.approx(G_CENTER[lam], abs=1e-6)
        assert res.M >= res.grid_max
        assert len(res.trace) == 8


def test_sup_monotone_in_lambda(sups):
    assert sups[0.5].M < sups[1.0].M < sups[2.0].M
    assert sups[0.5].M < 0


def test_sup_positive_for_large_lambda(ev_ball):
    assert sup_g(ev_ball(10.0)).M > 0


def test_sup_margin_must_exceed_evaluator_margin(ev_ball):
    ev = ev_ball(1.0)
    with pytest.raises(DomainError):
        sup_g(ev, margin=ev.margin)


@pytest.mark.slow
def test_sup_on_star_beats_grid(star):
    ev = RobinEvaluator(2.0, star)
    res = sup_g(ev, resolution=7)
    assert res.M >= res.grid_max
    assert star.contains(res.argmax) and star.dist_to_boundary(res.argmax) > ev.margin
    assert np.linalg.norm(ev.grad_g(res.argmax)) < 1e-4


# ---------------------------------------------------------------- asymptotic regimes

def test_boundary_law_on_ball():
    # g = -1/(8 pi d) + log(d)/(4 pi) + O(1): the remainder settles as d -> 0
    ds = [0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125]
    rem = [ball_robin(1.0, np.array([1 - d, 0, 0])) + 1 / (8 * math.pi * d)
           - math.log(d) / (4 * math.pi) for d in ds]
    steps = np.abs(np.diff(rem))
    assert np.ptp(rem) < 1e-3 and steps[-1] < steps[-2] < steps[-3]
    # blow-up towards the boundary
    assert ball_robin(1.0, np.array([0.99, 0, 0])) < ball_robin(1.0, np.array([0.9, 0, 0]))


def test_small_lambda_trend():
    prod = [lam * g_ball_analytic(lam) for lam in (0.1, 0.05, 0.025)]
    assert prod[0] > prod[1] > prod[2] and prod[2] < 0
    # lam g(0) -> -1/|Omega| = -3/(4 pi) with an O(lam) gap
    gap = [p + 3 / (4 * math.pi) for p in prod]
    assert 0 < gap[2] < gap[1] < gap[0]
    assert gap[0] / gap[1] == pytest.approx(2.0, rel=0.02)
    assert gap[1] / gap[2] == pytest.approx(2.0, rel=0.02)
