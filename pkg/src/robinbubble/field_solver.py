"""Interior Neumann solver for -Laplace u + lam u = 0 and Yukawa Newton potentials.

Fields are superpositions of Yukawa kernels centered at charges outside the
domain (method of fundamental solutions), so they satisfy the PDE exactly;
only the boundary flux is fitted, by truncated-SVD least squares.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend, defaults
from .domain import fibonacci_directions
from .errors import ConstructionError, DomainError

FOUR_PI = 4.0 * math.pi
_GL8 = np.polynomial.legendre.leggauss(8)


IMAGE_REACH = (0.2, 0.3)   # image strength fades from 1 to 0 over this band of d / diameter


def _image_weight(t):
    lo, hi = IMAGE_REACH
    z = min(max((t - lo) / (hi - lo), 0.0), 1.0)
    return 1.0 - z * z * (3.0 - 2.0 * z)


def source_images(domain, x, k, p=None):
    """Exterior image charges that absorb the boundary flux peak of Phi(. - x).

    Uses the interior Neumann images of the sphere tangent to the boundary at
    the point p nearest to x, with the local mean curvature: a point charge
    R/r at distance R^2/r from the sphere center plus a line of density 1/R
    running outward along the normal. Exact for the Laplace flux of a ball up
    to a constant; the leftover flux is smooth and left to the least-squares
    fit. Flat or concave spots get a mirror charge only. The charges fade
    smoothly to zero across the ``IMAGE_REACH`` band of depths, so the result
    varies smoothly with x. Returns (points, charges); ``p`` is the nearest
    boundary point if already known.
    """
    x = np.asarray(x, dtype=float).reshape(3)
    p = domain.nearest_boundary_point(x) if p is None else np.asarray(p, dtype=float)
    d = float(np.linalg.norm(p - x))
    weight = _image_weight(d / domain.diameter)
    if weight == 0.0:
        return np.empty((0, 3)), np.empty(0)
    nu = domain.normal_at(p)
    kappa = domain.mean_curvature(p)
    R = 1.0 / kappa if kappa > 0.0 else math.inf
    if d * kappa < 1e-3 or R <= d:
        P, q = (2.0 * p - x)[None, :], np.ones(1)
    else:
        r = R - d
        t0 = R * R / r
        w0 = 0.25 * (t0 - r)
        n_panels = max(1, int(math.ceil(math.log2(max(40.0 / (k * w0), 1.0)))) + 1)
        edges = np.concatenate([[0.0], w0 * 2.0 ** np.arange(n_panels)])
        lo, hi = edges[:-1, None], edges[1:, None]
        gx, gw = _GL8
        s = (0.5 * (hi - lo) * (gx + 1.0) + lo).ravel()
        w = (0.5 * (hi - lo) * gw).ravel()
        t = np.concatenate([[t0], t0 + s])
        P = (p - R * nu) + t[:, None] * nu
        q = np.concatenate([[R / r], w / R])
    # a line leaving a non-convex boundary may cross back in; drop those nodes
    keep = ~np.asarray(domain.contains(P), dtype=bool)
    return P[keep], weight * q[keep]


@dataclass(frozen=True)
class SolveReport:
    residual: float           # max |flux fit - flux| on the collocation points
    relative_residual: float  # residual / max |flux|
    check_residual: float     # same, on an independent boundary sample (nan if unavailable)
    flagged: bool


@dataclass(frozen=True)
class HelmholtzField:
    """sum_c coeffs[c] * exp(-k |x - charges[c]|) / (4 pi |x - charges[c]|)."""
    charges: np.ndarray
    coeffs: np.ndarray
    lam: float
    report: SolveReport = field(default=None)

    @property
    def k(self):
        return math.sqrt(self.lam)

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        vals = _backend.yukawa_potential(x.reshape(-1, 3), self.charges, self.coeffs, self.k)
        return float(vals[0]) if x.ndim == 1 else vals

    def eval_grad(self, x):
        x = np.asarray(x, dtype=float)
        vals, grads = _backend.yukawa_potential_grad(
            x.reshape(-1, 3), self.charges, self.coeffs, self.k
        )
        return (float(vals[0]), grads[0]) if x.ndim == 1 else (vals, grads)

    def __add__(self, other):
        if other.lam != self.lam:
            raise ValueError("cannot add fields with different lambda")
        return HelmholtzField(
            np.concatenate([self.charges, other.charges]),
            np.concatenate([self.coeffs, other.coeffs]),
            self.lam,
        )


class NeumannSolver:
    """Least-squares MFS solver bound to one (lam, domain) pair.

    Immutable after construction; ``solve`` may be called concurrently.
    """

    def __init__(self, lam, domain, n=defaults.N_COLLOCATION, inflation=defaults.INFLATION,
                 svd_cut=defaults.SVD_CUT, residual_threshold=defaults.RESIDUAL_THRESHOLD,
                 n_charges=None, images=True):
        if not lam > 0.0:
            raise DomainError(f"lambda must be positive, got {lam}")
        if n < 50:
            raise DomainError("build_solver needs n >= 50")
        if not 0.0 < inflation <= 1.0:
            raise DomainError(f"inflation must be in (0, 1], got {inflation}")
        self.lam = float(lam)
        self.k = math.sqrt(lam)
        self.domain = domain
        self.n = int(n)
        self.inflation = float(inflation)
        self.svd_cut = float(svd_cut)
        self.residual_threshold = float(residual_threshold)
        self.images = bool(images)

        m = int(n_charges) if n_charges else self.n // 2
        u = fibonacci_directions(m)
        rho = domain.radius(u)
        self.charges = domain.center + ((1.0 + self.inflation) * rho)[:, None] * u
        if np.any(domain.contains(self.charges)):
            raise ConstructionError("a charge point landed inside the domain")

        self.sample = domain.boundary_sample(self.n)
        # independent check points, interleaved with the collocation ones
        self.check = domain.boundary_sample(2 * self.n + 1)

        A = _backend.yukawa_normal_derivative_matrix(
            self.sample.points, self.sample.normals, self.charges, self.k
        )
        sw = np.sqrt(self.sample.weights)
        U, s, Vt = np.linalg.svd(A * sw[:, None], full_matrices=False)
        keep = s > self.svd_cut * s[0]
        self.singular_values = s
        self.rank = int(np.count_nonzero(keep))
        self._A = A
        self._pinv = (Vt[keep].T / s[keep]) @ (U[:, keep].T * sw[None, :])
        self._A_check = _backend.yukawa_normal_derivative_matrix(
            self.check.points, self.check.normals, self.charges, self.k
        )

    def diagnostics(self):
        s = self.singular_values
        return {
            "lambda": self.lam,
            "n_collocation": self.n,
            "n_charges": int(self.charges.shape[0]),
            "inflation": self.inflation,
            "svd_cut": self.svd_cut,
            "rank": self.rank,
            "sigma_max": float(s[0]),
            "sigma_min": float(s[-1]),
            "sigma_min_kept": float(s[self.rank - 1]),
            "condition": float(s[0] / s[-1]),
        }

    def diagnostics_json(self):
        return json.dumps(self.diagnostics(), indent=2)

    def _report(self, coeffs, flux, check_flux):
        fit = self._A @ coeffs
        res = np.max(np.abs(fit - flux), axis=0)
        scale = np.max(np.abs(flux), axis=0)
        rel = np.where(scale > 0.0, res / np.where(scale > 0.0, scale, 1.0), res)
        if check_flux is not None:
            chk = np.max(np.abs(self._A_check @ coeffs - check_flux), axis=0)
            chk = np.where(scale > 0.0, chk / np.where(scale > 0.0, scale, 1.0), chk)
        else:
            chk = np.full_like(rel, np.nan)
        return res, rel, chk

    def solve(self, flux):
        """Fit a field whose normal derivative matches ``flux`` on the boundary.

        ``flux`` is either a callable ``flux(points, normals) -> values`` or an
        array of values at ``self.sample.points``.
        """
        if callable(flux):
            values = np.asarray(flux(self.sample.points, self.sample.normals), dtype=float)
            check = np.asarray(flux(self.check.points, self.check.normals), dtype=float)
        else:
            values = np.asarray(flux, dtype=float)
            check = None
        if values.shape != (self.n,):
            raise DomainError(f"flux must have {self.n} values, got shape {values.shape}")
        coeffs = self._pinv @ values
        res, rel, chk = self._report(coeffs, values, check)
        worst = rel if check is None else max(rel, chk)
        report = SolveReport(float(res), float(rel), float(chk),
                             bool(worst > self.residual_threshold))
        return HelmholtzField(self.charges, coeffs, self.lam, report)

    def source_images(self, sources):
        """(points, charges) of the images of each source; empty for deep sources."""
        sources = np.asarray(sources, dtype=float).reshape(-1, 3)
        out = [(np.empty((0, 3)), np.empty(0))] * len(sources)
        if not self.images:
            return out
        near = np.flatnonzero(self.domain.maybe_within(sources, IMAGE_REACH[1] * self.domain.diameter))
        if len(near):
            P = self.domain.nearest_boundary_points(sources[near])
            for j, p in zip(near, P):
                out[j] = source_images(self.domain, sources[j], self.k, p)
        return out

    def _source_flux(self, sample, sources, images):
        F = _backend.yukawa_normal_derivative_matrix(sample.points, sample.normals, sources, self.k)
        for j, (P, q) in enumerate(images):
            if len(q):
                F[:, j] += _backend.yukawa_normal_derivative_matrix(
                    sample.points, sample.normals, P, self.k) @ q
        return -F

    def point_source_fields(self, sources):
        """Fitted part of the corrections u_x for each source x (columns).

        u_x = (images of x) + (fitted field) has flux -d/dnu Phi(. - x). Returns
        (coeffs of shape (charges, sources), relative residuals, images), with
        images a list of (points, charges) per source.
        """
        sources = np.asarray(sources, dtype=float).reshape(-1, 3)
        images = self.source_images(sources)
        F = self._source_flux(self.sample, sources, images)
        C = self._pinv @ F
        # residuals are relative to the flux of the bare source
        scale = np.max(np.abs(_backend.yukawa_normal_derivative_matrix(
            self.sample.points, self.sample.normals, sources, self.k)), axis=0)
        rel = np.max(np.abs(self._A @ C - F), axis=0) / scale
        chk = np.max(np.abs(self._A_check @ C - self._source_flux(self.check, sources, images)),
                     axis=0) / scale
        return C, np.maximum(rel, chk), images

    def image_values(self, sources, images):
        """Potential of each source's images at the source itself."""
        return np.array([_backend.yukawa_potential(x[None, :], P, q, self.k)[0] if len(q) else 0.0
                         for x, (P, q) in zip(np.asarray(sources).reshape(-1, 3), images)])

    def point_source_field(self, x):
        C, rel, images = self.point_source_fields(x)
        P, q = images[0]
        report = SolveReport(float("nan"), float(rel[0]), float(rel[0]),
                             bool(rel[0] > self.residual_threshold))
        return HelmholtzField(np.concatenate([self.charges, P]), np.concatenate([C[:, 0], q]),
                              self.lam, report)


def build_solver(lam, d, n=defaults.N_COLLOCATION, inflation=defaults.INFLATION, **kw):
    return NeumannSolver(lam, d, n=n, inflation=inflation, **kw)


def solve_neumann(s, flux):
    return s.solve(flux)


def ball_volume_potential(lam, R):
    """int over the ball of radius R of Phi(y) dy, i.e. the constant-source potential at the center."""
    k = math.sqrt(lam)
    kR = k * R
    return -(math.expm1(-kR) + kR * math.exp(-kR)) / lam


def newton_potential(lam, d, source, x, q, n_theta=24):
    """int_Omega Phi(x - y) source(y) dy with singularity subtraction.

    The smooth part  int Phi(x - y)(source(y) - source(x)) dy  uses the volume
    quadrature ``q``; the rest is source(x) * int Phi(x - y) dy by a polar rule
    about x, radial part in closed form.
    """
    x = np.asarray(x, dtype=float).reshape(3)
    if not d.contains(x):
        raise DomainError("newton_potential needs an interior point")
    k = math.sqrt(lam)
    sx = float(np.asarray(source(x[None, :])).ravel()[0])
    s_nodes = np.asarray(source(q.nodes), dtype=float)
    smooth = _backend.subtracted_newton_sum(x[None, :], [sx], q.nodes, q.weights, s_nodes, k)[0]
    dirs, w, exits = d.polar_rule(x, n_theta)
    kR = k * exits
    # int_0^R exp(-k t)/(4 pi t) t^2 dt = (1 - exp(-kR)(1 + kR)) / (4 pi lam)
    radial = -(np.expm1(-kR) + kR * np.exp(-kR)) / (FOUR_PI * lam)
    return float(smooth + sx * math.fsum(w * radial))
