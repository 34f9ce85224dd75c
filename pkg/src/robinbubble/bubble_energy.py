"""Single-bubble ansatz U = w + pi, its energy, and the small-mu expansion checks.

U solves -Laplace U + lam U = w^5 with zero Neumann data. Since w = Gamma * w^5
in all of R^3, the whole-space solution of that equation is

    Phi * w^5 = w - D,    D = (Gamma - Phi) * w^5,

and D is radial about zeta with a smooth kernel, so it is computed by 1D
quadrature. The remaining boundary mismatch is a homogeneous field h from the
Neumann solver: U = w - D + h and pi = -D + h.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp

from . import _backend, defaults
from .errors import DomainError
from .field_solver import NeumannSolver
from .kernels import BUBBLE_HEIGHT, FOUR_PI, BubbleParams, bubble_w, bubble_w_grad
from .robin import RobinEvaluator

SQRT3 = math.sqrt(3.0)

# radial panels for D: GL order and geometric panel counts (see _core_py)
_GL_ORDER = 16
_N_INNER = 24
_N_OUTER = 36


def constants():
    """(a0, a1, a2, a3) in closed form."""
    p2 = math.pi ** 2
    return (SQRT3 * p2 / 4.0, 8.0 * SQRT3 * p2, SQRT3 * p2, 120.0 * SQRT3 * p2 * p2)


def gamma_constant():
    a0, a1, a2, a3 = constants()
    return a1 / (2.0 * a2)


def _w01(r):
    return BUBBLE_HEIGHT / math.sqrt(1.0 + r * r)


def _radial_integral(f):
    """4 pi int_0^inf r^2 f(r) dr, split at r = 1 for quad."""
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=400)
    head = quad(lambda r: r * r * f(r), 0.0, 1.0, **opts)[0]
    tail = quad(lambda r: r * r * f(r), 1.0, math.inf, **opts)[0]
    return 4.0 * math.pi * (head + tail)


def bubble_moments():
    """(int w^6, int w^5, int w^4) over R^3 for the unit bubble, by radial quadrature."""
    return tuple(_radial_integral(lambda r, p=p: _w01(r) ** p) for p in (6, 5, 4))


def constants_by_quadrature():
    """Recompute (a0, a1, a2, a3) from their defining integrals over R^3."""
    w6, w5, w4 = bubble_moments()
    q = BUBBLE_HEIGHT

    def a2_integrand(r):
        # w (1/r - 1/sqrt(1+r^2)) + w^5 r / 2; the first bracket rewritten to
        # avoid cancellation at large r
        s = math.sqrt(1.0 + r * r)
        gap = 1.0 / (r * s * (s + r)) if r > 0.0 else math.inf
        w = q / s
        return w * gap + 0.5 * w ** 5 * r

    opts = dict(epsabs=0.0, epsrel=1e-13, limit=400)
    # r^2 * w/(r s (s + r)) is finite at 0, so integrate r^2 f directly
    head = quad(lambda r: r * r * a2_integrand(r) if r > 0.0 else 0.0, 0.0, 1.0, **opts)[0]
    tail = quad(lambda r: r * r * a2_integrand(r), 1.0, math.inf, **opts)[0]
    a2 = 0.5 * q * 4.0 * math.pi * (head + tail)
    return (w6 / 3.0, 2.0 * math.pi * q * w5, a2, 40.0 * math.pi ** 2 * SQRT3 * w4)


def energy_model(mu, lam, g, consts=None):
    a0, a1, a2, a3 = consts or constants()
    mu = np.asarray(mu, dtype=float)
    return a0 + a1 * mu * g - a2 * mu * mu * lam - a3 * mu * mu * g * g


# ----------------------------------------------------------------------------
# radial potential D


def bubble_source_potential(r, mu, lam):
    """D(r) = ((Gamma - Phi) * w^5)(r) and D'(r) for a bubble of scale mu."""
    x, w = np.polynomial.legendre.leggauss(_GL_ORDER)
    return _backend.bubble_source_potential(
        np.asarray(r, dtype=float).ravel(), mu, math.sqrt(lam), x, w, _N_INNER, _N_OUTER
    )


@dataclass
class BubbleAnsatz:
    lam: float
    zeta: np.ndarray
    mu: float
    h: object                    # HelmholtzField fixing the boundary flux
    flux_residual: float         # max |dU/dnu| on a check sample, relative to max U
    params: BubbleParams = field(repr=False, default=None)

    def _radial(self, x):
        d = x - self.zeta
        r = np.sqrt(np.sum(d * d, axis=1))
        uniq, inv = np.unique(r, return_inverse=True)
        D, dD = bubble_source_potential(uniq, self.mu, self.lam)
        return d, r, D[inv], dD[inv]

    def pi(self, x):
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, 3)
        _, _, D, _ = self._radial(pts)
        vals = self.h.eval(pts) - D
        return float(vals[0]) if x.ndim == 1 else vals

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, 3)
        vals = bubble_w(self.params, pts) + self.pi(pts)
        return float(vals[0]) if x.ndim == 1 else vals

    def eval_grad(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d, r, D, dD = self._radial(x)
        hv, hg = self.h.eval_grad(x)
        safe = np.where(r > 0.0, r, 1.0)
        radial_grad = (dD / safe)[:, None] * d
        vals = bubble_w(self.params, x) - D + hv
        grads = bubble_w_grad(self.params, x) - radial_grad + hg
        return vals, grads


def _ansatz_flux(params, lam):
    def flux(points, normals):
        d = points - params.zeta
        r = np.sqrt(np.sum(d * d, axis=1))
        _, dD = bubble_source_potential(r, params.mu, lam)
        grad_v = bubble_w_grad(params, points) - (dD / r)[:, None] * d
        return -np.sum(grad_v * normals, axis=1)
    return flux


def build_ansatz(d, lam, zeta, mu, solver=None, margin=None, **solver_kw):
    """U = w - D + h with zero flux on the boundary (h from the Neumann solver)."""
    zeta = np.asarray(zeta, dtype=float).reshape(3)
    diam = d.diameter
    margin = defaults.MARGIN_FRACTION * diam if margin is None else margin
    if not d.contains(zeta) or d.dist_to_boundary(zeta) < margin:
        raise DomainError("bubble center must be interior, away from the boundary margin")
    if not 1e-3 * diam <= mu <= 0.5 * diam:
        raise DomainError(f"mu={mu} outside [1e-3, 0.5] x diameter")
    if solver is None:
        solver_kw.setdefault("n", defaults.N_ANSATZ)
        solver = NeumannSolver(lam, d, **solver_kw)
    elif solver.lam != lam:
        raise DomainError("solver was built for a different lambda")
    params = BubbleParams(zeta, mu)
    flux = _ansatz_flux(params, lam)
    h = solver.solve(flux)
    ans = BubbleAnsatz(lam, zeta, float(mu), h, float("nan"), params)
    chk = solver.check
    _, grads = ans.eval_grad(chk.points)
    dn = np.sum(grads * chk.normals, axis=1)
    peak = float(ans.eval(zeta[None, :])[0])
    ans.flux_residual = float(np.max(np.abs(dn)) / abs(peak))
    return ans


def energy(d, lam, u, q):
    """1/2 int |grad u|^2 + lam/2 int u^2 - 1/6 int u^6 by the quadrature q.

    ``u`` needs ``eval_grad(points) -> (values, gradients)``.
    """
    vals, grads = u.eval_grad(q.nodes)
    dens = 0.5 * np.sum(grads * grads, axis=1) + 0.5 * lam * vals ** 2 - vals ** 6 / 6.0
    return math.fsum(dens * q.weights)


def energy_by_identity(ans, q):
    """E(U) = 1/2 int w^5 U - 1/6 int U^6, valid when U has zero flux exactly."""
    vals = ans.eval(q.nodes)
    w5 = bubble_w(ans.params, q.nodes) ** 5
    return math.fsum((0.5 * w5 * vals - vals ** 6 / 6.0) * q.weights)


# ----------------------------------------------------------------------------
# fits


def loglog_slope(mus, values):
    """Slope of log|values| against log mu, or None when the magnitudes are not
    monotone in mu (the fit would then be meaningless)."""
    mus = np.asarray(mus, dtype=float)
    mags = np.abs(np.asarray(values, dtype=float))
    order = np.argsort(mus)
    m = mags[order]
    monotone = bool(np.all(np.diff(m) > 0.0)) and np.all(m > 0.0)
    if not monotone:
        return None, False
    slope = float(np.polyfit(np.log(mus[order]), np.log(m), 1)[0])
    return slope, True


@dataclass
class ExpansionReport:
    lam: float
    zeta: np.ndarray
    g: float
    mus: np.ndarray
    measured: np.ndarray
    model: np.ndarray
    remainders: np.ndarray
    slope: float = None
    monotone: bool = True
    flux_residuals: np.ndarray = None
    identity_gap: np.ndarray = None

    @property
    def flagged(self):
        return not self.monotone

    def leading_ratio(self):
        """(E - a0)/(mu a1 g) per mu; tends to 1 as mu -> 0."""
        a0, a1, _, _ = constants()
        return (self.measured - a0) / (self.mus * a1 * self.g)

    def rows(self):
        return [
            {"mu": float(m), "E_measured": float(e), "E_model": float(mm), "remainder": float(r)}
            for m, e, mm, r in zip(self.mus, self.measured, self.model, self.remainders)
        ]

    def summary(self):
        return {
            "lambda": self.lam,
            "zeta": self.zeta.tolist(),
            "g": self.g,
            "slope": self.slope,
            "monotone": self.monotone,
            "flagged": self.flagged,
            "max_flux_residual": float(np.max(self.flux_residuals)),
        }


def _evaluator(d, lam, solver, n, inflation):
    if solver is None:
        solver = NeumannSolver(lam, d, n=n, inflation=inflation)
    return RobinEvaluator(lam, d, solver=solver, n=n, inflation=inflation), solver


def ansatz_energy(d, lam, zeta, mu, solver, level=defaults.QUAD_LEVEL):
    ans = build_ansatz(d, lam, zeta, mu, solver=solver)
    q = d.volume_quadrature(zeta, mu, level)
    return energy(d, lam, ans, q), ans, q


def expansion_check(d, lam, zeta, mus, n=defaults.N_ANSATZ, inflation=defaults.INFLATION,
                    level=defaults.QUAD_LEVEL, solver=None):
    """Measured E(U) against a0 + a1 mu g - a2 mu^2 lam - a3 mu^2 g^2."""
    mus = np.asarray(mus, dtype=float)
    if np.any(np.diff(mus) >= 0.0):
        raise DomainError("mu list must be strictly decreasing")
    zeta = np.asarray(zeta, dtype=float).reshape(3)
    ev, solver = _evaluator(d, lam, solver, n, inflation)
    g = ev.g(zeta)
    measured, res, gaps = [], [], []
    for mu in mus:
        E, ans, q = ansatz_energy(d, lam, zeta, mu, solver, level)
        measured.append(E)
        res.append(ans.flux_residual)
        gaps.append(E - energy_by_identity(ans, q))
    measured = np.array(measured)
    model = energy_model(mus, lam, g)
    rem = measured - model
    slope, monotone = loglog_slope(mus, rem)
    return ExpansionReport(lam, zeta, g, mus, measured, model, rem, slope, monotone,
                           np.array(res), np.array(gaps))


# ----------------------------------------------------------------------------
# the radial problem for D0


@dataclass
class D0Solution:
    """-Laplace D0 = lam 3^(1/4) [1/sqrt(1+r^2) - 1/r], D0 -> 0 at infinity."""
    lam: float
    r: np.ndarray
    values: np.ndarray
    tail: tuple          # (c1, c2): D0 ~ (c1 log r + c2)/r beyond r_max
    shift: float         # constant removed so that D0 -> 0
    _dense: object = field(repr=False, default=None)
    r0: float = 0.0
    r_max: float = 0.0

    def slope_at_origin(self):
        """D0'(0+) from the source expansion; D0 is Lipschitz, not C^1, at 0."""
        return 0.5 * self.lam * BUBBLE_HEIGHT

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inner = r < self.r0
        far = r > self.r_max
        mid = ~(inner | far)
        if np.any(mid):
            out[mid] = self._dense(r[mid])[0] - self.shift
        if np.any(inner):
            d0 = self._dense(self.r0)[0] - self.shift
            out[inner] = d0 - self.slope_at_origin() * (self.r0 - r[inner])
        if np.any(far):
            c1, c2 = self.tail
            rf = r[far]
            out[far] = (c1 * np.log(rf) + c2) / rf
        return out


def d0_source(r):
    """1/sqrt(1+r^2) - 1/r, written without cancellation; negative for r > 0."""
    r = np.asarray(r, dtype=float)
    s = np.sqrt(1.0 + r * r)
    return -1.0 / (r * s * (s + r))


def d0_solve(lam, r_max=defaults.D0_RMAX, r0=1e-6, rtol=1e-12, atol=1e-14):
    """Integrate (r^2 D0')' = -lam 3^(1/4)(r^2/sqrt(1+r^2) - r) outward, then match the tail.

    The state is (D, F = r^2 D'). The tail (c1 log r + c2)/r plus a constant is
    fitted on [r_max/2, r_max]; the constant is then removed.
    """
    if r_max < 100:
        raise DomainError("r_max must be >= 100")
    c = lam * BUBBLE_HEIGHT

    def rhs(r, y):
        return [y[1] / (r * r), -c * r * r * float(d0_source(r))]

    # F(r) = -c int_0^r s^2 (1/sqrt(1+s^2) - 1/s) ds = c (r^2/2 - r^3/3 + r^5/10 - ...)
    F0 = c * (r0 * r0 / 2.0 - r0 ** 3 / 3.0 + r0 ** 5 / 10.0)
    sol = solve_ivp(rhs, (r0, r_max), [0.0, F0], method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True)
    if not sol.success:
        raise RuntimeError(f"D0 integration failed: {sol.message}")
    rr = np.linspace(0.5 * r_max, r_max, 200)
    D = sol.sol(rr)[0]
    A = np.stack([np.ones_like(rr), np.log(rr) / rr, 1.0 / rr], axis=1)
    (d_inf, c1, c2), *_ = np.linalg.lstsq(A, D, rcond=None)
    return D0Solution(lam, sol.t, sol.y[0] - d_inf, (float(c1), float(c2)), float(d_inf),
                      sol.sol, r0, r_max)


def d0_closed_form(lam, r):
    """-(lam 3^(1/4)/2)(sqrt(1+r^2) - r + asinh(r)/r); used as a test oracle."""
    r = np.asarray(r, dtype=float)
    s = np.sqrt(1.0 + r * r)
    safe = np.where(r > 0.0, r, 1.0)
    ratio = np.where(r > 0.0, np.arcsinh(safe) / safe, 1.0)
    return -0.5 * lam * BUBBLE_HEIGHT * (1.0 / (s + r) + ratio)


# ----------------------------------------------------------------------------
# the pi expansion


@dataclass
class PiExpansionReport:
    lam: float
    zeta: np.ndarray
    probes: np.ndarray
    mus: np.ndarray
    residuals: np.ndarray          # (mu, probe)
    residuals_without_d0: np.ndarray
    slope: float = None
    slope_without_d0: float = None
    probe_slopes: list = None
    monotone: bool = True

    @property
    def flagged(self):
        return not self.monotone

    def summary(self):
        return {
            "lambda": self.lam,
            "slope": self.slope,
            "slope_without_d0": self.slope_without_d0,
            "probe_slopes": self.probe_slopes,
            "flagged": self.flagged,
        }


def pi_expansion_check(d, lam, zeta, mus, probes, n=defaults.N_ANSATZ,
                       inflation=defaults.INFLATION, solver=None, d0=None):
    """Residual of mu^(-1/2) pi(x) + 4 pi 3^(1/4) H(zeta, x) + mu D0((x - zeta)/mu).

    The slope is fitted to the largest residual over the probes at each mu;
    the same fit without the D0 term is reported for comparison.
    """
    mus = np.asarray(mus, dtype=float)
    if np.any(np.diff(mus) >= 0.0):
        raise DomainError("mu list must be strictly decreasing")
    zeta = np.asarray(zeta, dtype=float).reshape(3)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    for p in probes:
        if not d.contains(p):
            raise DomainError(f"probe {p.tolist()} is outside the domain")
    ev, solver = _evaluator(d, lam, solver, n, inflation)
    H = ev.regular_part(zeta, probes)
    d0 = d0 or d0_solve(lam)
    dist = np.linalg.norm(probes - zeta, axis=1)
    full, ablated = [], []
    for mu in mus:
        ans = build_ansatz(d, lam, zeta, mu, solver=solver)
        lead = ans.pi(probes) / math.sqrt(mu) + FOUR_PI * BUBBLE_HEIGHT * H
        ablated.append(lead)
        full.append(lead + mu * d0(dist / mu))
    full, ablated = np.array(full), np.array(ablated)
    slope, mono = loglog_slope(mus, np.max(np.abs(full), axis=1))
    slope_ab, _ = loglog_slope(mus, np.max(np.abs(ablated), axis=1))
    per_probe = [loglog_slope(mus, full[:, j])[0] for j in range(probes.shape[0])]
    return PiExpansionReport(lam, zeta, probes, mus, full, ablated, slope, slope_ab,
                             per_probe, mono)
