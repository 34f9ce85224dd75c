"""Compiled vs numpy kernels on the hot paths of the solver and the ansatz.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import math
import time

import numpy as np

from robinbubble import _backend
from robinbubble.domain import fibonacci_directions


def _cases(rng):
    k = math.sqrt(1.5)
    pts = fibonacci_directions(800)
    charges = 2.0 * fibonacci_directions(400)
    targets = rng.uniform(-0.5, 0.5, (2000, 3))
    coeffs = rng.normal(size=400)
    nodes = rng.uniform(-0.9, 0.9, (20000, 3))
    weights = rng.uniform(0.0, 1e-4, 20000)
    src = rng.normal(size=20000)
    x = rng.uniform(-0.3, 0.3, (8, 3))
    gx, gw = np.polynomial.legendre.leggauss(16)
    r = np.linspace(0.0, 1.0, 200)
    return {
        "normal_derivative_matrix 800x400": lambda: _backend.yukawa_normal_derivative_matrix(
            pts, pts, charges, k),
        "potential 2000 targets x 400": lambda: _backend.yukawa_potential(
            targets, charges, coeffs, k),
        "potential_grad 2000 x 400": lambda: _backend.yukawa_potential_grad(
            targets, charges, coeffs, k),
        "subtracted_newton_sum 8 x 20000": lambda: _backend.subtracted_newton_sum(
            x, src[:8], nodes, weights, src, k),
        "bubble_source_potential 200 radii": lambda: _backend.bubble_source_potential(
            r, 0.05, k, gx, gw, 24, 36),
    }


def bench(repeat=5):
    rng = np.random.default_rng(0)
    cases = _cases(rng)
    rows = []
    for name, fn in cases.items():
        timing = {}
        outputs = {}
        for backend in ("python", "compiled"):
            _backend.use(backend)
            outputs[backend] = fn()
            best = math.inf
            for _ in range(repeat):
                t0 = time.perf_counter()
                fn()
                best = min(best, time.perf_counter() - t0)
            timing[backend] = best
        a, b = outputs["python"], outputs["compiled"]
        if isinstance(a, tuple):
            diff = max(float(np.max(np.abs(np.asarray(u) - np.asarray(v)))) for u, v in zip(a, b))
        else:
            diff = float(np.max(np.abs(a - b)))
        rows.append((name, timing["python"], timing["compiled"], diff))
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    try:
        _backend.use("compiled")
    except ImportError:
        raise SystemExit("compiled extension not built; run pip install -e . --no-build-isolation")
    print(f"{'kernel':38s} {'python [ms]':>12s} {'compiled [ms]':>14s} {'speedup':>8s} {'max diff':>10s}")
    for name, tp, tc, diff in bench(args.repeat):
        print(f"{name:38s} {1e3 * tp:12.2f} {1e3 * tc:14.2f} {tp / tc:8.1f} {diff:10.1e}")


if __name__ == "__main__":
    main()
