"""Geometry of the domain: membership, boundary samples, distances, volume quadrature.

Two kinds are supported. ``Ball`` has exact formulas for everything.
``StarShaped`` is described by a radial function rho(theta, phi) about a
center, given as a finite real spherical-harmonic expansion normalized so
that the (0, 0) harmonic is identically 1 (so ``[[0, 0, R]]`` is a ball of
radius R).
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import sph_harm_y

from . import defaults
from .errors import ConfigError, DomainError

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class BoundarySample:
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    # unit directions from the domain center that generated each point
    directions: np.ndarray = field(repr=False, default=None)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class VolumeQuadrature:
    """Product rule around ``peak``.

    ``radii`` holds |node - peak| so radial integrands can be evaluated
    without recomputing distances; ``radius_index`` maps each node to its
    entry in ``unique_radii``.
    """
    nodes: np.ndarray
    weights: np.ndarray
    peak: np.ndarray
    radii: np.ndarray
    unique_radii: np.ndarray = field(repr=False, default=None)
    radius_index: np.ndarray = field(repr=False, default=None)

    def __len__(self):
        return self.nodes.shape[0]

    def integrate(self, values):
        return math.fsum(np.asarray(values, dtype=float) * self.weights)


def fibonacci_directions(n):
    j = np.arange(n)
    z = 1.0 - (2.0 * j + 1.0) / n
    s = np.sqrt(1.0 - z * z)
    phi = GOLDEN_ANGLE * j
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def sphere_product_rule(n_theta):
    """Gauss-Legendre in cos(theta) times the trapezoid rule in phi.

    Exact for spherical harmonics of degree below 2 n_theta. Weights sum to 4 pi.
    """
    x, w = np.polynomial.legendre.leggauss(n_theta)
    n_phi = 2 * n_theta
    phi = (np.arange(n_phi) + 0.5) * (2.0 * math.pi / n_phi)
    ct = np.repeat(x, n_phi)
    st = np.sqrt(1.0 - ct * ct)
    ph = np.tile(phi, n_theta)
    dirs = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)
    weights = np.repeat(w, n_phi) * (2.0 * math.pi / n_phi)
    return dirs, weights


def _angles(u):
    theta = np.arccos(np.clip(u[..., 2], -1.0, 1.0))
    phi = np.arctan2(u[..., 1], u[..., 0])
    return theta, phi


def _radial_edges(scale, R):
    """0, scale/8, scale/4, ... doubling, clipped at R."""
    edges = [0.0]
    e = scale / 8.0
    while e < R:
        edges.append(e)
        e *= 2.0
    if R - edges[-1] < 0.25 * edges[-1] and len(edges) > 1:
        edges[-1] = R
    else:
        edges.append(R)
    return np.asarray(edges)


def level_orders(level):
    """(radial GL order per panel, number of polar nodes) for a refinement level."""
    if level < 0:
        raise DomainError("quadrature level must be >= 0")
    return 8 + 4 * level, 8 + 8 * level


class Domain:
    """Star-shaped domain about ``center`` with radial function ``rho``.

    Subclasses provide ``radius(u)`` and ``radius_derivs(theta, phi)``.
    """

    kind = "abstract"

    def __init__(self, center=(0.0, 0.0, 0.0)):
        self.center = np.asarray(center, dtype=float).reshape(3)
        if not np.all(np.isfinite(self.center)):
            raise DomainError("center must be finite")

    # -- radial function -------------------------------------------------
    def radius(self, u):
        theta, phi = _angles(np.asarray(u, dtype=float))
        return self.radius_derivs(theta, phi)[0]

    def radius_derivs(self, theta, phi):
        raise NotImplementedError

    # -- derived scalars -------------------------------------------------
    @property
    def diameter(self):
        raise NotImplementedError

    @property
    def max_radius(self):
        raise NotImplementedError

    @property
    def volume(self):
        dirs, w = sphere_product_rule(48)
        return math.fsum(w * self.radius(dirs) ** 3) / 3.0

    # -- membership and distance ----------------------------------------
    def contains(self, x):
        x = np.asarray(x, dtype=float)
        d = x - self.center
        r = np.sqrt(np.sum(d * d, axis=-1))
        safe = np.where(r > 0.0, r, 1.0)[..., None]
        u = np.where(r[..., None] > 0.0, d / safe, np.array([0.0, 0.0, 1.0]))
        inside = r < self.radius(u)
        return bool(inside) if inside.ndim == 0 else inside

    def _require_inside(self, x):
        if not self.contains(x):
            raise DomainError(f"point {np.asarray(x).tolist()} is not inside the domain")

    def dist_to_boundary(self, x):
        raise NotImplementedError

    def nearest_boundary_point(self, x):
        raise NotImplementedError

    def dist_to_boundary_many(self, X):
        return np.array([self.dist_to_boundary(x) for x in np.asarray(X).reshape(-1, 3)])

    def nearest_boundary_points(self, X):
        return np.array([self.nearest_boundary_point(x) for x in np.asarray(X).reshape(-1, 3)])

    def maybe_within(self, X, width):
        """Mask that is true for every row of X within ``width`` of the boundary (may over-include)."""
        return self.dist_to_boundary_many(X) <= width

    def _surface_frame(self, u):
        """Radius, unit outward normal and area factor dS/dOmega along directions u."""
        theta, phi = _angles(u)
        # rho_phi / sin(theta) is 0/0 on the axis; step off it (error O(1e-9))
        theta = np.clip(theta, 1e-9, math.pi - 1e-9)
        rho, rho_t, rho_p = self.radius_derivs(theta, phi)
        st = np.sin(theta)
        e_t = np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -st], axis=1)
        e_p = np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], axis=1)
        rho_p_s = rho_p / st
        nrm = rho[:, None] * u - rho_t[:, None] * e_t - rho_p_s[:, None] * e_p
        nrm /= np.linalg.norm(nrm, axis=1)[:, None]
        dS = rho * np.sqrt(rho * rho + rho_t * rho_t + rho_p_s * rho_p_s)
        return rho, nrm, dS

    def normal_at(self, p):
        """Unit outward normal at the boundary point p."""
        v = np.asarray(p, dtype=float).reshape(3) - self.center
        return self._surface_frame((v / np.linalg.norm(v))[None, :])[1][0]

    def mean_curvature(self, p, h=None):
        """Mean curvature at the boundary point p (positive where convex).

        Average of 2 height / s^2 over 16 tangent directions, with neighbours
        at tangential offset h (default 2% of the diameter) projected radially
        onto the surface.
        """
        p = np.asarray(p, dtype=float).reshape(3)
        nu = self.normal_at(p)
        h = 0.02 * self.diameter if h is None else h
        a = np.cross(nu, [1.0, 0.0, 0.0])
        if np.linalg.norm(a) < 0.5:
            a = np.cross(nu, [0.0, 1.0, 0.0])
        a /= np.linalg.norm(a)
        b = np.cross(nu, a)
        ang = np.arange(16) * (np.pi / 8.0)
        t = np.cos(ang)[:, None] * a + np.sin(ang)[:, None] * b
        v = p + h * t - self.center
        u = v / np.linalg.norm(v, axis=1)[:, None]
        q = self.center + self.radius(u)[:, None] * u - p
        height = q @ nu
        s2 = np.sum(q * q, axis=1) - height * height
        return float(np.mean(-2.0 * height / s2))

    def ray_exit(self, origin, dirs):
        """Distance t > 0 at which origin + t u first leaves the domain, for each u."""
        raise NotImplementedError

    # -- samples ---------------------------------------------------------
    def boundary_sample(self, n):
        if n < 12:
            raise DomainError("boundary_sample needs n >= 12")
        u = fibonacci_directions(n)
        rho, nrm, dS = self._surface_frame(u)
        return BoundarySample(
            points=self.center + rho[:, None] * u,
            normals=nrm,
            weights=(4.0 * math.pi / n) * dS,
            directions=u,
        )

    def interior_grid(self, resolution, margin=0.0):
        """Points of a cubic grid over the bounding box at distance >= margin from the boundary."""
        R = self.max_radius
        axis = np.linspace(-R, R, resolution)
        g = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
        g = g + self.center
        g = g[self.contains(g)]
        if margin > 0.0 and g.size:
            g = g[self.dist_to_boundary_many(g) >= margin]
        return g

    def volume_quadrature(self, peak, scale, level=defaults.QUAD_LEVEL):
        """Spherical product rule centered at ``peak``.

        Radial Gauss-Legendre panels start at scale/8 and double out to the
        exit distance along each direction; directions come from
        ``sphere_product_rule``.
        """
        peak = np.asarray(peak, dtype=float).reshape(3)
        self._require_inside(peak)
        if not scale > 0.0:
            raise DomainError("scale must be positive")
        n_r, n_t = level_orders(level)
        gx, gw = np.polynomial.legendre.leggauss(n_r)
        dirs, dw = sphere_product_rule(n_t)
        exits = self.ray_exit(peak, dirs)
        nodes, weights, radii = [], [], []
        cache = {}
        for u, wu, R in zip(dirs, dw, exits):
            key = float(R)
            if key not in cache:
                edges = _radial_edges(scale, R)
                a, b = edges[:-1, None], edges[1:, None]
                t = (0.5 * (b - a) * (gx + 1.0) + a).ravel()
                wt = (0.5 * (b - a) * gw).ravel() * t * t
                cache[key] = (t, wt)
            t, wt = cache[key]
            nodes.append(peak + t[:, None] * u)
            weights.append(wu * wt)
            radii.append(t)
        radii = np.concatenate(radii)
        unique, inverse = np.unique(radii, return_inverse=True)
        return VolumeQuadrature(
            nodes=np.concatenate(nodes),
            weights=np.concatenate(weights),
            peak=peak,
            radii=radii,
            unique_radii=unique,
            radius_index=inverse,
        )

    def polar_rule(self, x, n_theta=24):
        """Directions, weights and exit distances for polar integrals about x."""
        dirs, w = sphere_product_rule(n_theta)
        return dirs, w, self.ray_exit(np.asarray(x, dtype=float), dirs)

    # -- serialization ---------------------------------------------------
    def to_config(self):
        raise NotImplementedError


class Ball(Domain):
    kind = "ball"

    def __init__(self, radius=1.0, center=(0.0, 0.0, 0.0)):
        super().__init__(center)
        if not (radius > 0.0 and math.isfinite(radius)):
            raise DomainError(f"radius must be positive and finite, got {radius}")
        self.R = float(radius)

    def __repr__(self):
        return f"Ball(radius={self.R!r}, center={self.center.tolist()})"

    def radius(self, u):
        u = np.asarray(u, dtype=float)
        return np.full(u.shape[:-1], self.R) if u.ndim > 1 else self.R

    def radius_derivs(self, theta, phi):
        theta = np.asarray(theta, dtype=float)
        return np.full_like(theta, self.R), np.zeros_like(theta), np.zeros_like(theta)

    @property
    def diameter(self):
        return 2.0 * self.R

    @property
    def max_radius(self):
        return self.R

    @property
    def volume(self):
        return 4.0 * math.pi * self.R ** 3 / 3.0

    @property
    def area(self):
        return 4.0 * math.pi * self.R ** 2

    def contains(self, x):
        d = np.asarray(x, dtype=float) - self.center
        inside = np.sum(d * d, axis=-1) < self.R * self.R
        return bool(inside) if inside.ndim == 0 else inside

    def dist_to_boundary(self, x):
        self._require_inside(x)
        return self.R - float(np.linalg.norm(np.asarray(x, dtype=float) - self.center))

    def dist_to_boundary_many(self, X):
        return self.R - np.linalg.norm(np.asarray(X, dtype=float).reshape(-1, 3) - self.center, axis=1)

    def nearest_boundary_points(self, X):
        V = np.asarray(X, dtype=float).reshape(-1, 3) - self.center
        r = np.linalg.norm(V, axis=1)
        U = np.where(r[:, None] > 0.0, V / np.where(r > 0.0, r, 1.0)[:, None], [0.0, 0.0, 1.0])
        return self.center + self.R * U

    def nearest_boundary_point(self, x):
        v = np.asarray(x, dtype=float).reshape(3) - self.center
        r = float(np.linalg.norm(v))
        u = v / r if r > 0.0 else np.array([0.0, 0.0, 1.0])
        return self.center + self.R * u

    def normal_at(self, p):
        v = np.asarray(p, dtype=float).reshape(3) - self.center
        return v / np.linalg.norm(v)

    def mean_curvature(self, p, h=None):
        return 1.0 / self.R

    def ray_exit(self, origin, dirs):
        o = np.asarray(origin, dtype=float) - self.center
        dirs = np.asarray(dirs, dtype=float)
        b = dirs @ o
        c = o @ o - self.R * self.R
        return -b + np.sqrt(b * b - c)

    def boundary_sample(self, n):
        if n < 12:
            raise DomainError("boundary_sample needs n >= 12")
        u = fibonacci_directions(n)
        return BoundarySample(
            points=self.center + self.R * u,
            normals=u.copy(),
            weights=np.full(n, self.area / n),
            directions=u,
        )

    def to_config(self):
        cfg = {"kind": "ball", "radius": self.R}
        if np.any(self.center != 0.0):
            cfg["center"] = self.center.tolist()
        return cfg


def real_harmonic(l, m, theta, phi):
    """4 pi-normalized real spherical harmonic and its (theta, phi) derivatives.

    Normalized so the mean of its square over the sphere is 1; (0, 0) is
    identically 1. No Condon-Shortley phase.
    """
    val, dv = sph_harm_y(l, abs(m), theta, phi, diff_n=1)
    scale = math.sqrt(4.0 * math.pi)
    if m == 0:
        part = np.real
    else:
        scale *= math.sqrt(2.0) * (-1.0) ** m
        part = np.real if m > 0 else np.imag
    return scale * part(val), scale * part(dv[..., 0]), scale * part(dv[..., 1])


class StarShaped(Domain):
    kind = "star"

    def __init__(self, harmonics, center=(0.0, 0.0, 0.0)):
        super().__init__(center)
        terms = []
        for entry in harmonics:
            if len(entry) != 3:
                raise DomainError(f"harmonic entry must be [l, m, c], got {entry!r}")
            l, m, c = int(entry[0]), int(entry[1]), float(entry[2])
            if l < 0 or abs(m) > l:
                raise DomainError(f"invalid harmonic index (l={l}, m={m})")
            terms.append((l, m, c))
        if not terms:
            raise DomainError("star domain needs at least one harmonic")
        self.harmonics = tuple(terms)
        dense = fibonacci_directions(4000)
        rho = self.radius(dense)
        if np.min(rho) <= 0.0:
            raise DomainError("radial function is not positive everywhere")
        self._dense_dirs = dense
        self._dense_points = self.center + rho[:, None] * dense
        self._rmin = float(np.min(rho))
        self._rmax = float(np.max(rho))
        self._diameter = None

    def __repr__(self):
        return f"StarShaped(harmonics={list(self.harmonics)!r}, center={self.center.tolist()})"

    def radius_derivs(self, theta, phi):
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        rho = np.zeros_like(theta)
        rt = np.zeros_like(theta)
        rp = np.zeros_like(theta)
        for l, m, c in self.harmonics:
            y, yt, yp = real_harmonic(l, m, theta, phi)
            rho += c * y
            rt += c * yt
            rp += c * yp
        return rho, rt, rp

    @property
    def max_radius(self):
        return 1.02 * self._rmax

    @property
    def diameter(self):
        if self._diameter is None:
            from scipy.spatial.distance import pdist
            self._diameter = float(np.max(pdist(self._dense_points[::4])))
        return self._diameter

    def _surface_point(self, v):
        v = np.asarray(v, dtype=float)
        u = v / np.linalg.norm(v)
        return self.center + self.radius(u[None, :])[0] * u

    def nearest_boundary_points(self, X, n_seeds=3, tol=1e-8, max_iter=400):
        """Closest surface points to each row of X.

        Seeds are the nearest dense samples; each is refined by a compass
        search over directions (3x3 stencil in the tangent plane, step halved
        when the center wins), vectorized over all queries and seeds.
        """
        X = np.asarray(X, dtype=float).reshape(-1, 3)
        Q = X.shape[0]
        d2 = np.sum((X[:, None, :] - self._dense_points[None, :, :]) ** 2, axis=2)
        seeds = np.argsort(d2, axis=1)[:, :n_seeds]
        u = self._dense_dirs[seeds].reshape(-1, 3)
        Y = np.repeat(X, n_seeds, axis=0)
        a = np.cross(u, [1.0, 0.0, 0.0])
        alt = np.cross(u, [0.0, 1.0, 0.0])
        a = np.where((np.linalg.norm(a, axis=1) < 0.5)[:, None], alt, a)
        a /= np.linalg.norm(a, axis=1)[:, None]
        b = np.cross(u, a)
        stencil = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)
        step = np.full(u.shape[0], math.sqrt(4.0 * math.pi / len(self._dense_dirs)))
        for _ in range(max_iter):
            active = step > tol
            if not np.any(active):
                break
            cand = (u[:, None, :] + step[:, None, None]
                    * (stencil[None, :, 0:1] * a[:, None, :] + stencil[None, :, 1:2] * b[:, None, :]))
            cand /= np.linalg.norm(cand, axis=2)[:, :, None]
            pts = self.center + self.radius(cand.reshape(-1, 3)).reshape(-1, 9)[:, :, None] * cand
            f = np.sum((pts - Y[:, None, :]) ** 2, axis=2)
            k = np.argmin(f, axis=1)
            # moves must beat rounding noise, else the step never shrinks
            stay = f[np.arange(len(k)), k] >= f[:, 4] * (1.0 - 1e-13) - 1e-300
            new_u = cand[np.arange(len(k)), k]
            u = np.where((active & ~stay)[:, None], new_u, u)
            step = np.where(active & stay, 0.5 * step, step)
            # keep the tangent frame orthogonal to the moving direction
            a = a - np.sum(a * u, axis=1)[:, None] * u
            a /= np.linalg.norm(a, axis=1)[:, None]
            b = np.cross(u, a)
        P = self.center + self.radius(u)[:, None] * u
        dist2 = np.sum((P - Y) ** 2, axis=1).reshape(Q, n_seeds)
        best = np.argmin(dist2, axis=1)
        return P.reshape(Q, n_seeds, 3)[np.arange(Q), best]

    def nearest_boundary_point(self, x):
        return self.nearest_boundary_points(np.asarray(x, dtype=float).reshape(1, 3))[0]

    def maybe_within(self, X, width):
        X = np.asarray(X, dtype=float).reshape(-1, 3)
        d2 = np.min(np.sum((X[:, None, :] - self._dense_points[None, :, :]) ** 2, axis=2), axis=1)
        # dense samples are at most about one spacing from the true nearest point
        slack = 2.0 * self._rmax * math.sqrt(4.0 * math.pi / len(self._dense_dirs))
        return np.sqrt(d2) <= width + slack

    def dist_to_boundary_many(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, 3)
        return np.linalg.norm(self.nearest_boundary_points(X) - X, axis=1)

    def dist_to_boundary(self, x):
        x = np.asarray(x, dtype=float).reshape(3)
        self._require_inside(x)
        return float(np.linalg.norm(self.nearest_boundary_point(x) - x))

    def ray_exit(self, origin, dirs, n_scan=64, n_bisect=60):
        o = np.asarray(origin, dtype=float).reshape(3)
        dirs = np.asarray(dirs, dtype=float)
        span = 2.0 * self._rmax + np.linalg.norm(o - self.center)

        def outside(t):
            p = o + t[:, None] * dirs - self.center
            r = np.linalg.norm(p, axis=1)
            safe = np.where(r > 0.0, r, 1.0)[:, None]
            return r - self.radius(p / safe) > 0.0

        lo = np.zeros(dirs.shape[0])
        hi = np.full(dirs.shape[0], np.nan)
        for s in np.linspace(span / n_scan, span, n_scan):
            t = np.full(dirs.shape[0], s)
            out = outside(t) & np.isnan(hi)
            hi[out] = s
        if np.any(np.isnan(hi)):
            raise DomainError("ray did not leave the domain")
        lo = np.maximum(hi - span / n_scan, 0.0)
        for _ in range(n_bisect):
            mid = 0.5 * (lo + hi)
            out = outside(mid)
            hi = np.where(out, mid, hi)
            lo = np.where(out, lo, mid)
        return 0.5 * (lo + hi)

    def to_config(self):
        cfg = {"kind": "star", "harmonics": [list(h) for h in self.harmonics]}
        if np.any(self.center != 0.0):
            cfg["center"] = self.center.tolist()
        return cfg


def from_config(cfg):
    """Build a domain from its JSON description (a dict or a JSON string)."""
    if isinstance(cfg, str):
        try:
            cfg = json.loads(cfg)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"domain config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("domain config must be an object with a 'kind' field")
    center = cfg.get("center", (0.0, 0.0, 0.0))
    try:
        if cfg["kind"] == "ball":
            return Ball(float(cfg.get("radius", 1.0)), center)
        if cfg["kind"] == "star":
            return StarShaped(cfg["harmonics"], center)
    except (KeyError, TypeError, DomainError) as exc:
        raise ConfigError(f"bad domain config: {exc}") from exc
    raise ConfigError(f"unknown domain kind {cfg['kind']!r}")


def contains(d, x):
    return d.contains(x)


def dist_to_boundary(d, x):
    return d.dist_to_boundary(x)


def boundary_sample(d, n):
    return d.boundary_sample(n)


def volume_quadrature(d, peak, scale, level=defaults.QUAD_LEVEL):
    return d.volume_quadrature(peak, scale, level)
