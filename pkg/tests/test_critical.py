import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robinbubble.critical import (bubble_prediction, energy_mu_argmax, lambda_star,
                                  lambda_star_ball, reduced_energy_profile, reduced_model,
                                  verify_hypotheses)
from robinbubble.bubble_energy import constants, gamma_constant
from robinbubble.domain import Ball
from robinbubble.errors import BracketError, DomainError
from robinbubble.robin import g_ball_analytic

LAMBDA_STAR = 1.43923
LAMBDA_STAR_ORACLE = 1.4392288398906452     # frozen from oracles.ball_root (mpmath findroot)


def test_ball_root():
    assert lambda_star_ball() == pytest.approx(LAMBDA_STAR_ORACLE, abs=1e-14)
    # the five quoted digits are consistent up to their rounding half-width
    assert abs(lambda_star_ball() - LAMBDA_STAR) <= 5e-6


@pytest.mark.parametrize("R", [0.5, 2.0, 3.0])
def test_ball_root_scales(R):
    assert lambda_star_ball(R) * R * R == pytest.approx(LAMBDA_STAR_ORACLE, rel=1e-14)


def test_gamma_is_four():
    a0, a1, a2, a3 = constants()
    assert a1 / (2 * a2) == pytest.approx(4.0, rel=1e-15)
    assert gamma_constant() == pytest.approx(4.0, rel=1e-15)


# ---------------------------------------------------------------- bisection driver

def _fake(root, slope=1.0):
    calls = []

    def M(lam):
        calls.append(lam)
        return slope * (lam - root), np.zeros(3)
    return M, calls


@pytest.mark.parametrize("root", [0.0011, 0.003, 0.3, 1.0, 1.43923, 7.7, 600.0, 999.0])
def test_bisection_finds_root(root):
    M, _ = _fake(root)
    res = lambda_star(None, tol=1e-6, sup_fn=M)
    assert abs(res.lambda_star - root) <= 1e-6
    assert res.tolerance <= 1e-6
    assert abs(res.M_at_star) <= 1e-6


@given(st.floats(1.001e-3, 999.9), st.floats(1e-3, 1e3))
def test_bracket_invariant(root, slope):
    M, _ = _fake(root, slope)
    res = lambda_star(None, tol=1e-6, sup_fn=M)
    neg = [l for l, m in res.history if m < 0]
    pos = [l for l, m in res.history if m >= 0]
    assert max(neg) < res.lambda_star <= min(pos) + 1e-6
    assert min(pos) - max(neg) <= 2e-6 + 1e-15


def test_no_bracket():
    with pytest.raises(BracketError):
        lambda_star(None, sup_fn=lambda lam: (-1.0, np.zeros(3)))
    with pytest.raises(BracketError):
        lambda_star(None, sup_fn=lambda lam: (1.0, np.zeros(3)))


def test_tolerance_floor():
    with pytest.raises(DomainError):
        lambda_star(None, tol=1e-7, sup_fn=_fake(1.0)[0])


def test_result_serializes():
    res = lambda_star(None, sup_fn=_fake(1.2)[0])
    data = json.loads(json.dumps(res.to_dict()))
    assert data["lambda_star"] == res.lambda_star and len(data["history"]) == len(res.history)


# ---------------------------------------------------------------- numerical pipeline

@pytest.mark.slow
def test_pipeline_on_unit_ball(pipeline_star):
    res = pipeline_star(1.0)
    assert abs(res.lambda_star - LAMBDA_STAR) <= 1e-3
    assert abs(res.lambda_star - lambda_star_ball()) <= 1e-5
    assert np.linalg.norm(res.maximizer) < 1e-3
    assert abs(res.M_at_star) < 1e-5


@pytest.mark.slow
def test_pipeline_radius_scaling(pipeline_star):
    vals = [pipeline_star(R).lambda_star * R * R for R in (0.5, 1.0, 2.0)]
    assert (max(vals) - min(vals)) / min(vals) <= 1e-3


# ---------------------------------------------------------------- predictions

def test_prediction_on_ball(ball, lam_e):
    ls = lambda_star_ball()
    p = bubble_prediction(ball, lam_e, ls)
    assert np.linalg.norm(p.x) < 1e-3
    assert p.g == pytest.approx(g_ball_analytic(lam_e), abs=1e-6)
    assert p.mu == pytest.approx(4.0 * p.g / lam_e, rel=1e-12) and p.mu > 0
    assert p.sandwich_ratio == pytest.approx(p.g / 0.05, rel=1e-9)
    assert json.loads(json.dumps(p.to_dict()))["Lambda"] == 1.0


def test_prediction_below_critical(ball):
    ls = lambda_star_ball()
    with pytest.raises(DomainError):
        bubble_prediction(ball, ls - 0.01, ls)
    with pytest.raises(DomainError):
        bubble_prediction(ball, 1.0)       # sup g < 0 without lambda* given


@pytest.mark.slow
def test_linear_vanishing_and_sandwich(ball):
    ls = lambda_star_ball()
    gaps = [0.1, 0.05, 0.02, 0.01]
    preds = [bubble_prediction(ball, ls + t, ls) for t in gaps]
    ratios = np.array([p.sandwich_ratio for p in preds])
    mu_ratios = np.array([p.mu / t for p, t in zip(preds, gaps)])
    assert np.all(ratios > 0) and ratios.max() / ratios.min() < 1.2
    # mu/(lam - lam*) settles: successive changes shrink
    steps = np.abs(np.diff(mu_ratios))
    assert np.all(mu_ratios > 0) and steps[-1] < steps[0]


def test_reduced_model_symmetric_and_curved():
    lam, g = 1.5, 0.02
    L = np.linspace(0.5, 1.5, 11)
    assert np.allclose(reduced_model(L, lam, g), reduced_model(2 - L, lam, g), rtol=0, atol=1e-15)
    a0, a1, a2, _ = constants()
    c = np.polyfit(L, reduced_model(L, lam, g), 2)
    assert c[0] == pytest.approx(-(a1 ** 2 / (4 * a2)) * g * g / lam, rel=1e-10)
    assert reduced_model(1.0, lam, g) == pytest.approx(a0 + a1 ** 2 / (4 * a2) * g * g / lam)


def test_reduced_profile_peaks_near_one(ball, lam_e, ansatz_solver):
    prof = reduced_energy_profile(ball, lam_e, np.zeros(3), np.arange(0.6, 1.41, 0.1),
                                  solver=ansatz_solver)
    assert abs(prof.argmax - 1.0) <= 0.05
    assert prof.model_argmax == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(prof.mus, 4 * prof.g / lam_e * prof.Lambdas)
    assert len(prof.rows()) == 9


def test_reduced_profile_needs_positive_g(ball):
    with pytest.raises(DomainError):
        reduced_energy_profile(ball, 1.0, np.zeros(3), [1.0])


def test_energy_argmax_near_prediction(ball, lam_e, ansatz_solver):
    target = 4 * g_ball_analytic(lam_e) / lam_e
    mus = target * np.linspace(0.7, 1.3, 7)
    mu_best, E = energy_mu_argmax(ball, lam_e, np.zeros(3), mus, solver=ansatz_solver)
    assert abs(mu_best / target - 1) <= 0.1


# ---------------------------------------------------------------- hypotheses

@pytest.fixture(scope="module")
def hyp_center(ball):
    return verify_hypotheses(ball, lambda_star_ball(), np.zeros(3))


def test_hypotheses_at_center(hyp_center):
    r = hyp_center
    assert abs(r.g) < 1e-5 and np.linalg.norm(r.grad) < 1e-6
    assert np.all(r.eigenvalues < 0) and r.non_singular
    assert r.condition_a and "super-level" in r.region
    assert json.loads(json.dumps(r.to_dict()))["non_singular"] is True


def test_hessian_matches_radial_second_difference(hyp_center):
    # g(r) on the ball is radial: each eigenvalue equals g''(0)
    from robinbubble.robin import ball_robin
    lam = lambda_star_ball()
    h = 2e-3
    g2 = (ball_robin(lam, np.array([h, 0, 0])) + ball_robin(lam, np.array([-h, 0, 0]))
          - 2 * ball_robin(lam, np.zeros(3))) / (h * h)
    assert np.allclose(hyp_center.eigenvalues, g2, rtol=2e-3)


def test_condition_a_on_inner_ball(ball):
    r = verify_hypotheses(ball, lambda_star_ball(), np.zeros(3), region=("ball", np.zeros(3), 0.5))
    assert r.condition_a and r.sup_inside > r.sup_boundary
    assert abs(r.sup_inside) < 1e-5


def test_shifted_point_is_not_critical(ball):
    r = verify_hypotheses(ball, lambda_star_ball(), np.array([0.3, 0.0, 0.0]), resolution=7)
    assert r.grad[0] < -1e-3
