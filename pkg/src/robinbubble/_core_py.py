"""Pure numpy versions of the hot kernels.

Every function here has a twin with the same signature in ``_core.pyx``.
Inputs are assumed already validated and C-contiguous float64.
"""
import numpy as np

FOUR_PI = 4.0 * np.pi
_SERIES_CUT = 0.5


def yukawa_matrix(targets, sources, k):
    d = targets[:, None, :] - sources[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    return np.exp(-k * r) / (FOUR_PI * r)


def yukawa_normal_derivative_matrix(points, normals, sources, k):
    """A[j, c] = d/dnu_y exp(-k|y - s|)/(4 pi |y - s|) at y = points[j]."""
    d = points[:, None, :] - sources[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    phi = np.exp(-k * r) / (FOUR_PI * r)
    dn = np.einsum("ijk,ik->ij", d, normals)
    return -phi * (k + 1.0 / r) * dn / r


def yukawa_potential(targets, sources, coeffs, k, chunk=4096):
    out = np.empty(targets.shape[0])
    for lo in range(0, targets.shape[0], chunk):
        hi = lo + chunk
        out[lo:hi] = yukawa_matrix(targets[lo:hi], sources, k) @ coeffs
    return out


def yukawa_potential_grad(targets, sources, coeffs, k, chunk=4096):
    vals = np.empty(targets.shape[0])
    grads = np.empty((targets.shape[0], 3))
    for lo in range(0, targets.shape[0], chunk):
        hi = lo + chunk
        d = targets[lo:hi, None, :] - sources[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
        phi = np.exp(-k * r) / (FOUR_PI * r)
        vals[lo:hi] = phi @ coeffs
        radial = -phi * (k + 1.0 / r) / r * coeffs[None, :]
        grads[lo:hi] = np.einsum("ij,ijk->ik", radial, d)
    return vals, grads


def subtracted_newton_sum(targets, src_targets, nodes, weights, src_nodes, k,
                          chunk=512):
    """sum_j w_j Phi(x_i - y_j) (s_j - s_i); coincident pairs contribute 0."""
    out = np.empty(targets.shape[0])
    for lo in range(0, targets.shape[0], chunk):
        hi = lo + chunk
        d = targets[lo:hi, None, :] - nodes[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(r > 0.0, np.exp(-k * r) / (FOUR_PI * r), 0.0)
        diff = src_nodes[None, :] - src_targets[lo:hi, None]
        out[lo:hi] = (phi * diff) @ weights
    return out


def _x_minus_sinh(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < _SERIES_CUT
    xs = x[small]
    x2 = xs * xs
    term = -xs * x2 / 6.0
    acc = term.copy()
    for n in range(2, 12):
        term = term * x2 / ((2 * n) * (2 * n + 1))
        acc += term
    out[small] = acc
    xl = x[~small]
    out[~small] = xl - np.sinh(xl)
    return out


def _xcosh_minus_sinh(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < _SERIES_CUT
    xs = x[small]
    x2 = xs * xs
    # sum_{n>=1} 2n x^(2n+1)/(2n+1)!
    power = xs.copy()
    fact = 1.0
    acc = np.zeros_like(xs)
    for n in range(1, 12):
        power = power * x2
        fact *= (2 * n) * (2 * n + 1)
        acc += 2 * n * power / fact
    out[small] = acc
    xl = x[~small]
    out[~small] = xl * np.cosh(xl) - np.sinh(xl)
    return out


def _em1p(a):
    """(1 + a) exp(-a) - 1 without cancellation."""
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    small = np.abs(a) < _SERIES_CUT
    xs = a[small]
    # sum_{m>=2} (-1)^m (1 - m) a^m / m!
    power = xs * xs
    fact = 2.0
    acc = -power / 2.0
    for m in range(3, 24):
        power = power * (-xs)
        fact *= m
        acc += (1 - m) * power / fact
    out[small] = acc
    xl = a[~small]
    out[~small] = (1.0 + xl) * np.exp(-xl) - 1.0
    return out


def _sinhc(x):
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = x != 0.0
    out[nz] = np.sinh(x[nz]) / x[nz]
    return out


def _bubble_source(s, mu):
    # s * w^5(s) for the unit-height profile 3^(1/4) mu^(1/2) / sqrt(mu^2 + s^2)
    return 3.0 ** 1.25 * mu ** 2.5 * s / (mu * mu + s * s) ** 2.5


def bubble_source_potential(r, mu, k, gl_x, gl_w, n_inner, n_outer, chunk=2048):
    """Radial potential of w^5 under the smooth kernel Gamma - Phi_k.

    Returns (D(r), D'(r)). ``n_inner``/``n_outer`` are the numbers of
    geometric panels on [0, r] and [r, inf).
    """
    D = np.zeros(r.shape[0])
    dD = np.zeros(r.shape[0])
    # reference nodes on [0, 1]
    t = 0.5 * (gl_x + 1.0)
    tw = 0.5 * gl_w
    inner_scale = 2.0 ** -np.arange(n_inner, -1, -1.0)
    for lo in range(0, r.shape[0], chunk):
        rr = r[lo:lo + chunk]
        a = k * rr
        # inner edges: 0, r 2^-n_inner, ..., r/2, r
        edges = np.concatenate(
            [np.zeros((rr.size, 1)), rr[:, None] * inner_scale[None, :]], axis=1
        )
        left = edges[:, :-1]
        width = edges[:, 1:] - left
        s = (left[:, :, None] + width[:, :, None] * t[None, None, :]).reshape(rr.size, -1)
        ws = (width[:, :, None] * tw[None, None, :]).reshape(rr.size, -1)
        b = k * s
        sf = _bubble_source(s, mu)
        sinh_b = np.sinh(b)
        inner_D = (_x_minus_sinh(b) - sinh_b * np.expm1(-a)[:, None]) / k
        inner_dD = (-_x_minus_sinh(b) + _em1p(a)[:, None] * sinh_b) / k
        I_D = np.sum(ws * sf * inner_D, axis=1)
        I_dD = np.sum(ws * sf * inner_dD, axis=1)
        # outer panels: r + w0 (2^j - 1)
        w0 = np.maximum(rr, mu) / 4.0
        edges = rr[:, None] + w0[:, None] * (2.0 ** np.arange(n_outer + 1)[None, :] - 1.0)
        left = edges[:, :-1]
        width = edges[:, 1:] - left
        s = (left[:, :, None] + width[:, :, None] * t[None, None, :]).reshape(rr.size, -1)
        ws = (width[:, :, None] * tw[None, None, :]).reshape(rr.size, -1)
        b = k * s
        sf = _bubble_source(s, mu)
        a_safe = np.where(a > 0.0, a, 1.0)
        head = np.where(a > 0.0, _x_minus_sinh(a) / a_safe, 0.0)
        outer_D = head[:, None] - _sinhc(a)[:, None] * np.expm1(-b)
        J_D = np.sum(ws * sf * outer_D, axis=1)
        J_dD = np.sum(ws * sf * np.exp(-b), axis=1)
        pos = rr > 0.0
        rs = np.where(pos, rr, 1.0)
        D[lo:lo + chunk] = np.where(pos, I_D / rs, 0.0) + J_D
        dD[lo:lo + chunk] = np.where(
            pos, (I_dD - _xcosh_minus_sinh(a) / k * J_dD) / (rs * rs), 0.0
        )
    return D, dD
