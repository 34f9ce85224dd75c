"""Critical parameter lambda*, bubbling-point predictions and the reduced functional.

lambda* is where M(lam) = sup g_lam crosses zero. M is increasing in lam
(g is pointwise increasing), so bisection on its sign is enough and needs no
derivative information from a noisy pipeline.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import defaults
from .bubble_energy import ansatz_energy, constants, gamma_constant
from .errors import BracketError, DomainError
from .field_solver import NeumannSolver
from .robin import RobinEvaluator, sup_g

log = logging.getLogger(__name__)

LAMBDA_RANGE = (1e-3, 1e3)


def lambda_star_ball(radius=1.0, xtol=1e-15):
    """Root of ((k-1)/(k+1)) e^{2k} = 1 with k = sqrt(lam) R, as lam = k^2 / R^2."""
    k = brentq(lambda k: (k - 1.0) * math.exp(2.0 * k) - (k + 1.0), 1.0, 3.0,
               xtol=xtol, rtol=4.0 * np.finfo(float).eps)
    return k * k / (radius * radius)


def ball_root_residual(lam, radius=1.0):
    k = math.sqrt(lam) * radius
    return (k - 1.0) / (k + 1.0) * math.exp(2.0 * k) - 1.0


@dataclass
class CriticalResult:
    lambda_star: float
    maximizer: np.ndarray
    history: list = field(default_factory=list)     # (lam, M) in evaluation order
    tolerance: float = float("nan")                  # half-width of the final bracket
    M_at_star: float = float("nan")

    def to_dict(self):
        return {
            "lambda_star": self.lambda_star,
            "maximizer": np.asarray(self.maximizer).tolist(),
            "tolerance": self.tolerance,
            "M_at_star": self.M_at_star,
            "history": [[float(l), float(m)] for l, m in self.history],
        }


def _sup_function(d, n, inflation, resolution, margin):
    def M(lam):
        ev = RobinEvaluator(lam, d, n=n, inflation=inflation)
        res = sup_g(ev, resolution=resolution, margin=margin)
        return res.M, res.argmax
    return M


def lambda_star(d, tol=1e-6, n=defaults.N_COLLOCATION, inflation=defaults.INFLATION,
                resolution=defaults.SUP_GRID, margin=None, sup_fn=None, start=1.0):
    """Bisection on the sign of M(lam).

    The bracket is found by doubling or halving from ``start``; it must lie in
    [1e-3, 1e3]. ``sup_fn(lam) -> (M, argmax)`` replaces the numerical
    pipeline when given.
    """
    if tol < 1e-6:
        raise DomainError("tol must be >= 1e-6")
    M = sup_fn or _sup_function(d, n, inflation, resolution, margin)
    history = []
    cache = {}

    def evaluate(lam):
        if lam not in cache:
            cache[lam] = M(lam)
            history.append((lam, cache[lam][0]))
            log.debug("lambda=%.12g  M=%.6e", lam, cache[lam][0])
        return cache[lam][0]

    lo_bound, hi_bound = LAMBDA_RANGE
    lam = start
    m = evaluate(lam)
    if m < 0.0:
        lo, hi = lam, min(2.0 * lam, hi_bound)
        while evaluate(hi) < 0.0:
            if hi >= hi_bound:
                raise BracketError(f"M stays negative up to lambda={hi_bound}")
            lo, hi = hi, min(2.0 * hi, hi_bound)
    else:
        lo, hi = max(0.5 * lam, lo_bound), lam
        while evaluate(lo) >= 0.0:
            if lo <= lo_bound:
                raise BracketError(f"M stays nonnegative down to lambda={lo_bound}")
            lo, hi = max(0.5 * lo, lo_bound), lo
    while hi - lo > 2.0 * tol:
        mid = 0.5 * (lo + hi)
        if evaluate(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        assert evaluate(lo) < 0.0 <= evaluate(hi)
    star = 0.5 * (lo + hi)
    m_star, argmax = M(star)
    return CriticalResult(star, argmax, history, 0.5 * (hi - lo), float(m_star))


@dataclass
class BubblePrediction:
    lam: float
    x: np.ndarray
    g: float
    mu: float
    Lambda: float = 1.0
    lambda_star: float = None
    sandwich_ratio: float = None     # g / (lam - lambda*)

    def to_dict(self):
        return {
            "lambda": self.lam,
            "x": np.asarray(self.x).tolist(),
            "g": self.g,
            "mu": self.mu,
            "Lambda": self.Lambda,
            "lambda_star": self.lambda_star,
            "sandwich_ratio": self.sandwich_ratio,
        }


def bubble_prediction(d, lam, lam_star=None, n=defaults.N_COLLOCATION,
                      inflation=defaults.INFLATION, resolution=defaults.SUP_GRID,
                      refine_grid=None):
    """x_lam = argmax g_lam and mu_lam = gamma g_lam(x_lam)/lam with gamma = a1/(2 a2) = 4.

    With ``refine_grid`` (values of Lambda), Lambda is set to the argmax of the
    reduced energy on that grid instead of 1.
    """
    if lam_star is not None and lam <= lam_star:
        raise DomainError(f"lambda={lam} is not above lambda*={lam_star}")
    ev = RobinEvaluator(lam, d, n=n, inflation=inflation)
    res = sup_g(ev, resolution=resolution)
    if res.M <= 0.0:
        raise DomainError(f"sup g = {res.M:.3e} <= 0: no bubbling regime at lambda={lam}")
    mu = gamma_constant() * res.M / lam
    Lambda = 1.0
    if refine_grid is not None:
        prof = reduced_energy_profile(d, lam, res.argmax, refine_grid, g=res.M)
        Lambda = prof.argmax
    ratio = res.M / (lam - lam_star) if lam_star is not None else None
    return BubblePrediction(lam, res.argmax, res.M, mu, Lambda, lam_star, ratio)


@dataclass
class EnergyProfile:
    lam: float
    zeta: np.ndarray
    g: float
    Lambdas: np.ndarray
    mus: np.ndarray
    energies: np.ndarray
    model: np.ndarray        # a0 + (a1^2/4a2)(g^2/lam)(2 Lambda - Lambda^2)

    @property
    def argmax(self):
        return float(self.Lambdas[int(np.argmax(self.energies))])

    @property
    def model_argmax(self):
        return float(self.Lambdas[int(np.argmax(self.model))])

    def rows(self):
        return [{"Lambda": float(L), "mu": float(m), "E": float(e), "psi_model": float(p)}
                for L, m, e, p in zip(self.Lambdas, self.mus, self.energies, self.model)]


def reduced_model(Lambda, lam, g):
    a0, a1, a2, _ = constants()
    L = np.asarray(Lambda, dtype=float)
    return a0 + a1 * a1 / (4.0 * a2) * g * g / lam * (2.0 * L - L * L)


def reduced_energy_profile(d, lam, zeta, Lambdas, g=None, n=defaults.N_ANSATZ,
                           inflation=defaults.INFLATION, level=defaults.QUAD_LEVEL,
                           solver=None):
    """Energy of U_{zeta, mu(Lambda)} with mu = (a1/2a2)(g/lam) Lambda, per Lambda."""
    zeta = np.asarray(zeta, dtype=float).reshape(3)
    Lambdas = np.asarray(Lambdas, dtype=float)
    solver = solver or NeumannSolver(lam, d, n=n, inflation=inflation)
    if g is None:
        g = RobinEvaluator(lam, d, solver=solver).g(zeta)
    if g <= 0.0:
        raise DomainError(f"g(zeta) = {g:.3e} <= 0; the reduced functional needs g > 0")
    mus = gamma_constant() * g / lam * Lambdas
    energies = np.array([ansatz_energy(d, lam, zeta, mu, solver, level)[0] for mu in mus])
    return EnergyProfile(lam, zeta, g, Lambdas, mus, energies, reduced_model(Lambdas, lam, g))


def energy_mu_argmax(d, lam, zeta, mus, n=defaults.N_ANSATZ, inflation=defaults.INFLATION,
                     level=defaults.QUAD_LEVEL, solver=None):
    """Grid argmax over mu of E(U_{zeta, mu}), refined by a parabola through the top three."""
    mus = np.asarray(mus, dtype=float)
    solver = solver or NeumannSolver(lam, d, n=n, inflation=inflation)
    E = np.array([ansatz_energy(d, lam, zeta, mu, solver, level)[0] for mu in mus])
    j = int(np.argmax(E))
    if 0 < j < len(mus) - 1:
        c = np.polyfit(mus[j - 1:j + 2], E[j - 1:j + 2], 2)
        return float(-c[1] / (2.0 * c[0])), E
    return float(mus[j]), E


@dataclass
class HypothesisReport:
    lam0: float
    x0: np.ndarray
    g: float
    grad: np.ndarray
    hessian: np.ndarray
    eigenvalues: np.ndarray
    min_abs_eigenvalue: float
    nondegeneracy_threshold: float
    non_singular: bool
    sup_inside: float
    sup_boundary: float
    condition_a: bool
    region: str

    def to_dict(self):
        out = {}
        for k, v in self.__dict__.items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


def verify_hypotheses(d, lam0, x0, region=None, n=defaults.N_COLLOCATION,
                      inflation=defaults.INFLATION, resolution=15, boundary_points=200):
    """Report on the two alternative hypotheses at (lam0, x0).

    (a) compares sup g over a region D with sup g on its boundary. ``region``
    is ``("ball", center, radius)``; by default D is the grid super-level set
    {g > (max g + min g)/2}, whose boundary is the set of grid points of D
    with a grid neighbour outside D.
    (b) finite-difference Hessian at x0 and its eigenvalues.
    """
    x0 = np.asarray(x0, dtype=float).reshape(3)
    ev = RobinEvaluator(lam0, d, n=n, inflation=inflation)
    gx = ev.g(x0)
    grad = ev.grad_g(x0)
    H = ev.hessian(x0)
    eig = np.linalg.eigvalsh(H)
    grid = d.interior_grid(resolution, ev.margin)
    gvals, _ = ev.g_many(grid, check=False)
    scale = float(np.max(np.abs(gvals)))
    thresh = 1e-3 * scale / d.diameter ** 2
    min_abs = float(np.min(np.abs(eig)))

    if region is not None:
        _, c, rad = region
        c = np.asarray(c, dtype=float)
        inside = grid[np.linalg.norm(grid - c, axis=1) < rad]
        from .domain import fibonacci_directions
        ring = c + rad * fibonacci_directions(boundary_points)
        sup_in = max(float(np.max(ev.g_many(inside, check=False)[0])) if len(inside) else -math.inf,
                     float(ev.g(c)))
        sup_bd = float(np.max(ev.g_many(ring, check=False)[0]))
        label = f"ball(center={c.tolist()}, radius={rad})"
    else:
        level = 0.5 * (gvals.max() + gvals.min())
        axis = np.linspace(-d.max_radius, d.max_radius, resolution)
        step = axis[1] - axis[0]
        key = {tuple(np.round((p - d.center) / step).astype(int)): v for p, v in zip(grid, gvals)}
        in_set = {k for k, v in key.items() if v > level}
        border = []
        for k in in_set:
            for dk in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
                nb = (k[0] + dk[0], k[1] + dk[1], k[2] + dk[2])
                if nb not in in_set:
                    border.append(key[k])
                    break
        sup_in = float(max(key[k] for k in in_set))
        sup_bd = float(max(border)) if border else -math.inf
        label = f"super-level set g > {level:.6g}"
    return HypothesisReport(
        lam0, x0, float(gx), grad, H, eig, min_abs, thresh, bool(min_abs > thresh),
        sup_in, sup_bd, bool(sup_in > sup_bd), label,
    )
