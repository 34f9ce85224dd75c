# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_core_py``.

Same signatures and the same quadrature layout, so results agree with the
numpy versions to rounding.
"""
import numpy as np

from libc.math cimport cosh, exp, expm1, fabs, sinh, sqrt

cdef double FOUR_PI = 12.566370614359172
cdef double SERIES_CUT = 0.5


def yukawa_matrix(const double[:, ::1] targets, const double[:, ::1] sources, double k):
    cdef Py_ssize_t m = targets.shape[0], n = sources.shape[0], i, j
    cdef double dx, dy, dz, r
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    for i in range(m):
        for j in range(n):
            dx = targets[i, 0] - sources[j, 0]
            dy = targets[i, 1] - sources[j, 1]
            dz = targets[i, 2] - sources[j, 2]
            r = sqrt(dx * dx + dy * dy + dz * dz)
            o[i, j] = exp(-k * r) / (FOUR_PI * r)
    return out


def yukawa_normal_derivative_matrix(const double[:, ::1] points, const double[:, ::1] normals,
                                    const double[:, ::1] sources, double k):
    cdef Py_ssize_t m = points.shape[0], n = sources.shape[0], i, j
    cdef double dx, dy, dz, r, phi, dn
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    for i in range(m):
        for j in range(n):
            dx = points[i, 0] - sources[j, 0]
            dy = points[i, 1] - sources[j, 1]
            dz = points[i, 2] - sources[j, 2]
            r = sqrt(dx * dx + dy * dy + dz * dz)
            phi = exp(-k * r) / (FOUR_PI * r)
            dn = dx * normals[i, 0] + dy * normals[i, 1] + dz * normals[i, 2]
            o[i, j] = -phi * (k + 1.0 / r) * dn / r
    return out


def yukawa_potential(const double[:, ::1] targets, const double[:, ::1] sources,
                     const double[::1] coeffs, double k):
    cdef Py_ssize_t m = targets.shape[0], n = sources.shape[0], i, j
    cdef double dx, dy, dz, r, acc
    out = np.empty(m)
    cdef double[::1] o = out
    for i in range(m):
        acc = 0.0
        for j in range(n):
            dx = targets[i, 0] - sources[j, 0]
            dy = targets[i, 1] - sources[j, 1]
            dz = targets[i, 2] - sources[j, 2]
            r = sqrt(dx * dx + dy * dy + dz * dz)
            acc += coeffs[j] * exp(-k * r) / (FOUR_PI * r)
        o[i] = acc
    return out


def yukawa_potential_grad(const double[:, ::1] targets, const double[:, ::1] sources,
                          const double[::1] coeffs, double k):
    cdef Py_ssize_t m = targets.shape[0], n = sources.shape[0], i, j
    cdef double dx, dy, dz, r, phi, rad, acc, gx, gy, gz
    vals = np.empty(m)
    grads = np.empty((m, 3))
    cdef double[::1] v = vals
    cdef double[:, ::1] g = grads
    for i in range(m):
        acc = 0.0
        gx = 0.0
        gy = 0.0
        gz = 0.0
        for j in range(n):
            dx = targets[i, 0] - sources[j, 0]
            dy = targets[i, 1] - sources[j, 1]
            dz = targets[i, 2] - sources[j, 2]
            r = sqrt(dx * dx + dy * dy + dz * dz)
            phi = coeffs[j] * exp(-k * r) / (FOUR_PI * r)
            acc += phi
            rad = -phi * (k + 1.0 / r) / r
            gx += rad * dx
            gy += rad * dy
            gz += rad * dz
        v[i] = acc
        g[i, 0] = gx
        g[i, 1] = gy
        g[i, 2] = gz
    return vals, grads


def subtracted_newton_sum(const double[:, ::1] targets, const double[::1] src_targets,
                          const double[:, ::1] nodes, const double[::1] weights,
                          const double[::1] src_nodes, double k):
    cdef Py_ssize_t m = targets.shape[0], q = nodes.shape[0], i, j
    cdef double dx, dy, dz, r, acc, s0
    out = np.empty(m)
    cdef double[::1] o = out
    for i in range(m):
        acc = 0.0
        s0 = src_targets[i]
        for j in range(q):
            dx = targets[i, 0] - nodes[j, 0]
            dy = targets[i, 1] - nodes[j, 1]
            dz = targets[i, 2] - nodes[j, 2]
            r = sqrt(dx * dx + dy * dy + dz * dz)
            if r > 0.0:
                acc += weights[j] * exp(-k * r) / (FOUR_PI * r) * (src_nodes[j] - s0)
        o[i] = acc
    return out


cdef inline double x_minus_sinh(double x) nogil:
    cdef double x2, term, acc
    cdef int n
    if fabs(x) < SERIES_CUT:
        x2 = x * x
        term = -x * x2 / 6.0
        acc = term
        for n in range(2, 12):
            term = term * x2 / ((2 * n) * (2 * n + 1))
            acc += term
        return acc
    return x - sinh(x)


cdef inline double xcosh_minus_sinh(double x) nogil:
    cdef double x2, power, fact, acc
    cdef int n
    if fabs(x) < SERIES_CUT:
        x2 = x * x
        power = x
        fact = 1.0
        acc = 0.0
        for n in range(1, 12):
            power = power * x2
            fact *= (2 * n) * (2 * n + 1)
            acc += 2 * n * power / fact
        return acc
    return x * cosh(x) - sinh(x)


cdef inline double em1p(double a) nogil:
    cdef double power, fact, acc
    cdef int m
    if fabs(a) < SERIES_CUT:
        power = a * a
        fact = 2.0
        acc = -power / 2.0
        for m in range(3, 24):
            power = power * (-a)
            fact *= m
            acc += (1 - m) * power / fact
        return acc
    return (1.0 + a) * exp(-a) - 1.0


cdef inline double bubble_source(double s, double mu) nogil:
    cdef double q = mu * mu + s * s
    return 3.9482220388574776 * mu * mu * sqrt(mu) * s / (q * q * sqrt(q))


def bubble_source_potential(const double[::1] r, double mu, double k,
                            const double[::1] gl_x, const double[::1] gl_w,
                            int n_inner, int n_outer):
    cdef Py_ssize_t m = r.shape[0], i, p, q, nq = gl_x.shape[0]
    cdef double rr, a, left, right, width, s, b, sf, wq, sinh_b
    cdef double I_D, I_dD, J_D, J_dD, head, sinhc_a, em1_a, expm1_a, w0, scale
    D = np.zeros(m)
    dD = np.zeros(m)
    cdef double[::1] Dv = D
    cdef double[::1] dDv = dD
    for i in range(m):
        rr = r[i]
        a = k * rr
        I_D = 0.0
        I_dD = 0.0
        if rr > 0.0:
            expm1_a = expm1(-a)
            em1_a = em1p(a)
            left = 0.0
            for p in range(n_inner + 1):
                right = rr * 2.0 ** (p - n_inner)
                width = right - left
                for q in range(nq):
                    s = left + width * 0.5 * (gl_x[q] + 1.0)
                    wq = width * 0.5 * gl_w[q]
                    b = k * s
                    sf = bubble_source(s, mu)
                    sinh_b = sinh(b)
                    I_D += wq * sf * (x_minus_sinh(b) - sinh_b * expm1_a) / k
                    I_dD += wq * sf * (-x_minus_sinh(b) + em1_a * sinh_b) / k
                left = right
        J_D = 0.0
        J_dD = 0.0
        if a > 0.0:
            head = x_minus_sinh(a) / a
            sinhc_a = sinh(a) / a
        else:
            head = 0.0
            sinhc_a = 1.0
        w0 = (rr if rr > mu else mu) / 4.0
        left = rr
        scale = 1.0
        for p in range(n_outer):
            scale *= 2.0
            right = rr + w0 * (scale - 1.0)
            width = right - left
            for q in range(nq):
                s = left + width * 0.5 * (gl_x[q] + 1.0)
                wq = width * 0.5 * gl_w[q]
                b = k * s
                sf = bubble_source(s, mu)
                J_D += wq * sf * (head - sinhc_a * expm1(-b))
                J_dD += wq * sf * exp(-b)
            left = right
        if rr > 0.0:
            Dv[i] = I_D / rr + J_D
            dDv[i] = (I_dD - xcosh_minus_sinh(a) / k * J_dD) / (rr * rr)
        else:
            Dv[i] = J_D
            dDv[i] = 0.0
    return D, dD
