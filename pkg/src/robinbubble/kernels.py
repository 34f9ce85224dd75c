"""Closed-form kernels: Laplace and Yukawa fundamental solutions, the critical bubble.

All functions accept single points (shape ``(3,)``) or stacks (shape ``(..., 3)``)
and broadcast.
"""
import math

import numpy as np

from .errors import DomainError

FOUR_PI = 4.0 * math.pi
BUBBLE_HEIGHT = 3.0 ** 0.25


def _distance(x, y):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(r == 0.0):
        raise DomainError("kernel evaluated at coincident points")
    return d, r


def _scalar(a):
    return float(a) if np.ndim(a) == 0 else a


def laplace_gamma(x, y):
    """1/(4 pi |x - y|)."""
    _, r = _distance(x, y)
    return _scalar(1.0 / (FOUR_PI * r))


def _check_lambda(lam):
    if not lam > 0.0:
        raise DomainError(f"lambda must be positive, got {lam}")
    return math.sqrt(lam)


def yukawa_phi(lam, x, y):
    """exp(-sqrt(lam) r)/(4 pi r), the free-space fundamental solution of -Laplace + lam."""
    k = _check_lambda(lam)
    _, r = _distance(x, y)
    return _scalar(np.exp(-k * r) / (FOUR_PI * r))


def yukawa_phi_normal_derivative(lam, x, y, normal):
    """Derivative of yukawa_phi(lam, x, .) at y along ``normal``."""
    k = _check_lambda(lam)
    d, r = _distance(y, x)
    phi = np.exp(-k * r) / (FOUR_PI * r)
    dn = np.sum(d * np.asarray(normal, dtype=float), axis=-1)
    return _scalar(-phi * (k + 1.0 / r) * dn / r)


def diag_limit(lam):
    """sqrt(lam)/(4 pi), the r -> 0 value of laplace_gamma - yukawa_phi."""
    return _check_lambda(lam) / FOUR_PI


def gamma_minus_phi(lam, r):
    """(1 - exp(-sqrt(lam) r))/(4 pi r) for r >= 0, finite at r = 0.

    expm1 keeps full relative accuracy down to r = 0, so no series switch is
    needed.
    """
    k = _check_lambda(lam)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise DomainError("distance must be nonnegative")
    kr = k * r
    safe = np.where(kr > 0.0, kr, 1.0)
    out = np.where(kr > 0.0, -np.expm1(-safe) / safe, 1.0) * k / FOUR_PI
    return _scalar(out)


class BubbleParams:
    """Center and scale of w(x) = 3^(1/4) mu^(1/2) / sqrt(mu^2 + |x - zeta|^2)."""

    __slots__ = ("zeta", "mu")

    def __init__(self, zeta, mu):
        zeta = np.asarray(zeta, dtype=float).reshape(3)
        if not np.all(np.isfinite(zeta)):
            raise DomainError("bubble center must be finite")
        if not mu > 0.0:
            raise DomainError(f"bubble scale must be positive, got {mu}")
        self.zeta = zeta
        self.mu = float(mu)

    def __repr__(self):
        return f"BubbleParams(zeta={self.zeta.tolist()}, mu={self.mu!r})"


def _bubble_parts(p, x):
    d = np.asarray(x, dtype=float) - p.zeta
    q = p.mu * p.mu + np.sum(d * d, axis=-1)
    return d, q


def bubble_w(p, x):
    _, q = _bubble_parts(p, x)
    return _scalar(BUBBLE_HEIGHT * math.sqrt(p.mu) / np.sqrt(q))


def bubble_w_grad(p, x):
    """Gradient of w in x; the zeta-gradient is its negative."""
    d, q = _bubble_parts(p, x)
    return -BUBBLE_HEIGHT * math.sqrt(p.mu) * d / (q * np.sqrt(q))[..., None]


def bubble_w_dzeta(p, x):
    return -bubble_w_grad(p, x)


def bubble_w_dmu(p, x):
    d, q = _bubble_parts(p, x)
    r2 = q - p.mu * p.mu
    # d/dmu [mu^(1/2) q^(-1/2)] = (r^2 - mu^2) / (2 mu^(1/2) q^(3/2))
    return _scalar(BUBBLE_HEIGHT * (r2 - p.mu * p.mu) / (2.0 * math.sqrt(p.mu) * q * np.sqrt(q)))


def bubble_w_radial(r, mu):
    """w as a function of the distance to the center."""
    r = np.asarray(r, dtype=float)
    return BUBBLE_HEIGHT * math.sqrt(mu) / np.sqrt(mu * mu + r * r)
