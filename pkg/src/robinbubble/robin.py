"""Robin function g(x) = H(x, x) of the Neumann Green's function of -Laplace + lam.

H = Gamma - G is the regular part. With G(., x) = Phi(. - x) + u_x, where u_x
solves the homogeneous Neumann problem with flux -d/dnu Phi(. - x), the
diagonal is g(x) = sqrt(lam)/(4 pi) - u_x(x): no singular cancellation.
"""
import math
import threading
from concurrent.futures import Future
from dataclasses import dataclass, field

import numpy as np
from scipy.special import spherical_in

from . import _backend, defaults
from ._core_py import _xcosh_minus_sinh
from .errors import DomainError, InvariantViolation
from .field_solver import NeumannSolver
from .kernels import FOUR_PI, gamma_minus_phi

# ----------------------------------------------------------------------------
# ball closed forms


def _ball_correction_amplitude(k):
    """B with u_0(r) = B sinh(k r)/(4 pi r) for the unit ball, i.e. zero flux at r = 1.

    B = (1 + k) exp(-k) / (k cosh k - sinh k); the denominator goes through a
    series for small k and the exp(-2k) form for large k.
    """
    if k > 20.0:
        e = math.exp(-2.0 * k)
        return 2.0 * (k + 1.0) * e / ((k - 1.0) + (k + 1.0) * e)
    return (1.0 + k) * math.exp(-k) / float(_xcosh_minus_sinh(np.array([k]))[0])


def g_ball_analytic(lam, radius=1.0):
    """g at the center of a ball: (1/4 pi)[k - 2k / (1 + ((k-1)/(k+1)) e^{2k})] for R = 1.

    Other radii follow from g_{R, lam}(0) = g_{1, lam R^2}(0) / R.
    """
    if not lam > 0.0:
        raise DomainError(f"lambda must be positive, got {lam}")
    k = math.sqrt(lam) * radius
    return k * (1.0 - _ball_correction_amplitude(k)) / (FOUR_PI * radius)


def G_ball_analytic(lam, r):
    """G(0, x) on the unit ball with |x| = r, 0 < r < 1."""
    if not 0.0 < r < 1.0:
        raise DomainError(f"r must be in (0, 1), got {r}")
    if not lam > 0.0:
        raise DomainError(f"lambda must be positive, got {lam}")
    k = math.sqrt(lam)
    B = _ball_correction_amplitude(k)
    return (math.exp(-k * r) + B * math.sinh(k * r)) / (FOUR_PI * r)


def _bessel_ratios(z, L):
    """rho_l = i_{l+1}(z)/i_l(z) for l = 0..L by backward recurrence."""
    rho = np.empty(L + 1)
    r = z / (2 * L + 5)
    for l in range(L + 40, L - 1, -1):
        r = z / ((2 * l + 3) + z * r)
    rho[L] = r
    for l in range(L, 0, -1):
        rho[l - 1] = z / ((2 * l + 1) + z * rho[l])
    return rho


def _series_order(t):
    if t <= 0.0:
        return 2
    return int(min(max(math.ceil(-40.0 / math.log(t)), 20), 40000))


def ball_regular_correction(lam, x, y, radius=1.0, center=(0.0, 0.0, 0.0)):
    """u(x, y) = G(x, y) - Phi(x - y) on a ball, by the spherical-harmonic series.

    u = sum_l b_l i_l(k|x|) i_l(k|y|) P_l(cos angle), b_l fixed by the zero-flux
    condition. Ratios of modified spherical Bessel functions are accumulated in
    log form so the series stays finite for points close to the sphere.
    """
    c = np.asarray(center, dtype=float)
    x = (np.asarray(x, dtype=float) - c) / radius
    y = (np.asarray(y, dtype=float) - c) / radius
    lam1 = lam * radius * radius
    k = math.sqrt(lam1)
    rx, ry = float(np.linalg.norm(x)), float(np.linalg.norm(y))
    if rx >= 1.0 or ry >= 1.0:
        raise DomainError("points must be inside the ball")
    cosg = 1.0 if rx == 0.0 or ry == 0.0 else float(np.clip(x @ y / (rx * ry), -1.0, 1.0))
    L = _series_order(rx * ry)
    rk = _bessel_ratios(k, L)
    # P_l = i_l(k) kn_l(k), with i_0 kn_0 = (1 - e^{-2k}) pi / (4 k^2)
    P = np.empty(L + 1)
    P[0] = -math.pi * math.expm1(-2.0 * k) / (4.0 * k * k)
    half_pi_k2 = math.pi / (2.0 * k * k)
    for l in range(L):
        P[l + 1] = rk[l] * (half_pi_k2 - rk[l] * P[l])
    l = np.arange(L + 1)
    dlog_i = rk + l / k
    knp_i = -(half_pi_k2 - rk * P) + (l / k) * P
    coef = -(k / (2.0 * math.pi ** 2)) * (2 * l + 1) * knp_i / dlog_i
    i0k = spherical_in(0, k)

    def log_ratio(rr):
        out = np.full(L + 1, -np.inf)
        out[0] = math.log(spherical_in(0, k * rr) / i0k)
        if rr > 0.0:
            rz = _bessel_ratios(k * rr, L)
            out[1:] = out[0] + np.cumsum(np.log(rz[:-1] / rk[:-1]))
        return out

    lx, ly = log_ratio(rx), log_ratio(ry)
    leg = np.empty(L + 1)
    leg[0] = 1.0
    if L > 0:
        leg[1] = cosg
    for n in range(1, L):
        leg[n + 1] = ((2 * n + 1) * cosg * leg[n] - n * leg[n - 1]) / (n + 1)
    with np.errstate(under="ignore"):
        terms = coef * np.exp(lx + ly) * leg
    return math.fsum(terms) / radius


def ball_robin(lam, x, radius=1.0, center=(0.0, 0.0, 0.0)):
    """g(x) on a ball at any interior point, by the series."""
    return math.sqrt(lam) / FOUR_PI - ball_regular_correction(lam, x, x, radius, center)


# ----------------------------------------------------------------------------
# numerical evaluator


@dataclass(frozen=True)
class RobinValue:
    value: float
    residual: float
    flagged: bool


@dataclass
class SupResult:
    M: float
    argmax: np.ndarray
    trace: list = field(default_factory=list)   # (start, converged point, value)
    grid_max: float = float("nan")


class RobinEvaluator:
    """g, grad g and d g / d lam for one (lam, domain) pair.

    Regular fields are cached per source point; concurrent calls for the same
    point wait on a single solve.
    """

    def __init__(self, lam, domain, n=defaults.N_COLLOCATION, inflation=defaults.INFLATION,
                 margin=None, solver=None, **solver_kw):
        if not lam > 0.0:
            raise DomainError(f"lambda must be positive, got {lam}")
        self.lam = float(lam)
        self.k = math.sqrt(lam)
        self.domain = domain
        self.margin = defaults.MARGIN_FRACTION * domain.diameter if margin is None else float(margin)
        self._solver_args = dict(n=n, inflation=inflation, **solver_kw)
        self.solver = solver or NeumannSolver(self.lam, domain, **self._solver_args)
        self._lock = threading.Lock()
        self._cache = {}
        self._siblings = {}

    def sibling(self, lam):
        """Evaluator with the same settings at another lambda (cached)."""
        with self._lock:
            ev = self._siblings.get(lam)
            if ev is None:
                ev = RobinEvaluator(lam, self.domain, margin=self.margin, **self._solver_args)
                self._siblings[lam] = ev
        return ev

    def _check_margin(self, x, extra=0.0):
        if not self.domain.contains(x):
            raise DomainError(f"point {np.asarray(x).tolist()} is outside the domain")
        d = self.domain.dist_to_boundary(x)
        if d < self.margin + extra:
            raise DomainError(
                f"point is {d:.3g} from the boundary, inside the margin {self.margin + extra:.3g}; "
                "use the boundary-asymptotic regime (g ~ -1/(8 pi d)) there"
            )

    def _compute(self, pts):
        C, rel, images = self.solver.point_source_fields(pts)
        vals = self.solver.image_values(pts, images)
        for lo in range(0, pts.shape[0], 256):
            hi = lo + 256
            K = _backend.yukawa_matrix(pts[lo:hi], self.solver.charges, self.k)
            vals[lo:hi] += np.einsum("ij,ji->i", K, C[:, lo:hi])
        return self.k / FOUR_PI - vals, rel

    def evaluate(self, x, check=True):
        x = np.asarray(x, dtype=float).reshape(3)
        if check:
            self._check_margin(x)
        key = tuple(x.tolist())
        with self._lock:
            fut = self._cache.get(key)
            owner = fut is None
            if owner:
                fut = self._cache[key] = Future()
        if owner:
            try:
                v, rel = self._compute(x[None, :])
                res = RobinValue(float(v[0]), float(rel[0]),
                                 bool(rel[0] > self.solver.residual_threshold))
            except BaseException as exc:
                with self._lock:
                    del self._cache[key]
                fut.set_exception(exc)
                raise
            fut.set_result(res)
        return fut.result()

    def g(self, x):
        return self.evaluate(x).value

    def g_many(self, points, check=True):
        """Vector of g values; skips the per-point cache."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if check:
            for p in pts:
                self._check_margin(p)
        return self._compute(pts)

    def _g_unchecked(self, x):
        return self.evaluate(x, check=False).value

    def grad_g(self, x, h=None):
        """Central differences with one Richardson step, h = 1e-4 * diameter by default."""
        x = np.asarray(x, dtype=float).reshape(3)
        h = defaults.GRAD_STEP_FRACTION * self.domain.diameter if h is None else h
        self._check_margin(x, extra=h)
        E = np.eye(3)
        pts = np.concatenate([x + h * E, x - h * E, x + 0.5 * h * E, x - 0.5 * h * E])
        v, _ = self._compute(pts)
        d1 = (v[0:3] - v[3:6]) / (2.0 * h)
        d2 = (v[6:9] - v[9:12]) / h
        return (4.0 * d2 - d1) / 3.0

    def hessian(self, x, h=None):
        x = np.asarray(x, dtype=float).reshape(3)
        h = defaults.HESSIAN_STEP * self.domain.diameter if h is None else h
        self._check_margin(x, extra=h * math.sqrt(2.0))
        E = np.eye(3)
        pts = [x]
        for i in range(3):
            pts += [x + h * E[i], x - h * E[i]]
        for i in range(3):
            for j in range(i + 1, 3):
                for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    pts.append(x + h * (si * E[i] + sj * E[j]))
        v, _ = self._compute(np.array(pts))
        H = np.empty((3, 3))
        for i in range(3):
            H[i, i] = (v[1 + 2 * i] + v[2 + 2 * i] - 2.0 * v[0]) / (h * h)
        idx = 7
        for i in range(3):
            for j in range(i + 1, 3):
                pp, pm, mp, mm = v[idx:idx + 4]
                H[i, j] = H[j, i] = (pp - pm - mp + mm) / (4.0 * h * h)
                idx += 4
        return H

    def dg_dlambda(self, x, rel_step=defaults.DLAMBDA_STEP):
        x = np.asarray(x, dtype=float).reshape(3)
        self._check_margin(x)
        dl = rel_step * self.lam
        up = self.sibling(self.lam + dl)._g_unchecked(x)
        dn = self.sibling(self.lam - dl)._g_unchecked(x)
        val = (up - dn) / (2.0 * dl)
        if not val > 0.0:
            raise InvariantViolation(
                f"d g / d lambda = {val:.3e} <= 0 at {x.tolist()}, lambda={self.lam}; "
                "solver accuracy is insufficient"
            )
        return val

    def green(self, x, y):
        """G(x, y) = Phi(x - y) + u_y(x)."""
        x = np.asarray(x, dtype=float).reshape(3)
        y = np.asarray(y, dtype=float).reshape(3)
        r = float(np.linalg.norm(x - y))
        if r == 0.0:
            raise DomainError("green evaluated on the diagonal; use g")
        f = self.solver.point_source_field(y)
        return math.exp(-self.k * r) / (FOUR_PI * r) + f.eval(x)

    def regular_part(self, zeta, x):
        """H(zeta, x) = (Gamma - Phi)(|x - zeta|) - u_zeta(x); finite at x = zeta."""
        zeta = np.asarray(zeta, dtype=float).reshape(3)
        x = np.asarray(x, dtype=float)
        f = self.solver.point_source_field(zeta)
        r = np.linalg.norm(x - zeta, axis=-1)
        return gamma_minus_phi(self.lam, r) - f.eval(x)

    def sup_g(self, resolution=defaults.SUP_GRID, margin=None, starts=defaults.SUP_STARTS,
              max_iter=200, step_tol=1e-10):
        return sup_g(self, resolution, margin, starts, max_iter, step_tol)


def g(ev, x):
    return ev.g(x)


def grad_g(ev, x):
    return ev.grad_g(x)


def dg_dlambda(ev, x):
    return ev.dg_dlambda(x)


def sup_g(ev, resolution=defaults.SUP_GRID, margin=None, starts=defaults.SUP_STARTS,
          max_iter=200, step_tol=1e-10):
    """Multistart gradient ascent from the best grid values.

    Ties in M are broken by first found. Raises if every start ends on the
    margin, which means the margin hides the maximizer.
    """
    d = ev.domain
    margin = 1.5 * ev.margin if margin is None else float(margin)
    if margin <= ev.margin:
        raise DomainError("sup_g margin must exceed the evaluator margin")
    h = defaults.GRAD_STEP_FRACTION * d.diameter
    grid = d.interior_grid(resolution, margin)
    if grid.shape[0] == 0:
        raise DomainError("no grid points survive the margin")
    vals, _ = ev.g_many(grid, check=False)
    order = np.argsort(-vals, kind="stable")[:starts]
    diam = d.diameter

    def inside(p):
        return d.contains(p) and d.dist_to_boundary(p) >= margin

    def value(p):
        return ev._compute(p[None, :])[0][0]

    trace = []
    best = None
    for j in order:
        x = grid[j].copy()
        fx = vals[j]
        t = 0.1 * diam
        for _ in range(max_iter):
            grad = ev.grad_g(x, h) if d.dist_to_boundary(x) > ev.margin + h else np.zeros(3)
            gn = float(np.linalg.norm(grad))
            if gn == 0.0:
                break
            direction = grad / gn
            t = min(2.0 * t, 0.25 * diam)
            moved = False
            while t > step_tol * diam:
                cand = x + t * direction
                if inside(cand):
                    fc = value(cand)
                    if fc >= fx + 1e-4 * t * gn:
                        x, fx, moved = cand, fc, True
                        break
                t *= 0.5
            if not moved:
                break
        trace.append((grid[j].copy(), x.copy(), float(fx)))
        if best is None or fx > best[1]:
            best = (x, float(fx))
    if all(d.dist_to_boundary(end) < margin * (1.0 + 1e-6) + step_tol * diam
           for _, end, _ in trace):
        raise DomainError("every ascent stalled on the margin; decrease the margin")
    return SupResult(M=best[1], argmax=best[0], trace=trace, grid_max=float(vals[order[0]]))
