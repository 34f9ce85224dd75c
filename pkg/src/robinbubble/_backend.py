"""Kernel backend selection.

The compiled extension ``robinbubble._core`` is used when it imports; set
``ROBINBUBBLE_BACKEND=python`` to force the numpy fallback.
"""
import os

import numpy as np

from . import _core_py

BACKEND = "python"
_impl = _core_py

if os.environ.get("ROBINBUBBLE_BACKEND", "").lower() != "python":
    try:
        from . import _core as _impl  # noqa: F811
        BACKEND = "compiled"
    except ImportError:
        _impl = _core_py


def _points(a):
    return np.ascontiguousarray(np.asarray(a, dtype=float).reshape(-1, 3))


def _vec(a):
    return np.ascontiguousarray(np.asarray(a, dtype=float).ravel())


def use(name):
    """Switch backend at runtime ("compiled" or "python"); returns the old name."""
    global _impl, BACKEND
    old = BACKEND
    if name == "python":
        _impl, BACKEND = _core_py, "python"
    elif name == "compiled":
        from . import _core
        _impl, BACKEND = _core, "compiled"
    else:
        raise ValueError(f"unknown backend {name!r}")
    return old


def yukawa_matrix(targets, sources, k):
    return _impl.yukawa_matrix(_points(targets), _points(sources), float(k))


def yukawa_normal_derivative_matrix(points, normals, sources, k):
    return _impl.yukawa_normal_derivative_matrix(
        _points(points), _points(normals), _points(sources), float(k)
    )


def yukawa_potential(targets, sources, coeffs, k):
    return _impl.yukawa_potential(_points(targets), _points(sources), _vec(coeffs), float(k))


def yukawa_potential_grad(targets, sources, coeffs, k):
    return _impl.yukawa_potential_grad(
        _points(targets), _points(sources), _vec(coeffs), float(k)
    )


def subtracted_newton_sum(targets, src_targets, nodes, weights, src_nodes, k):
    return _impl.subtracted_newton_sum(
        _points(targets), _vec(src_targets), _points(nodes), _vec(weights),
        _vec(src_nodes), float(k),
    )


def bubble_source_potential(r, mu, k, gl_x, gl_w, n_inner, n_outer):
    return _impl.bubble_source_potential(
        _vec(r), float(mu), float(k), _vec(gl_x), _vec(gl_w), int(n_inner), int(n_outer)
    )
