"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 a numerical check failed.
"""
import argparse
import logging
import math
import os
import sys
import time

import numpy as np

from . import _backend, defaults
from .bubble_energy import (constants, constants_by_quadrature, expansion_check,
                            pi_expansion_check)
from .critical import ball_root_residual, lambda_star, lambda_star_ball
from .domain import Ball
from .errors import ConfigError, RobinBubbleError
from .io import dumps, load_config, write_csv, write_json
from .robin import RobinEvaluator, ball_robin, g_ball_analytic

log = logging.getLogger("robinbubble")

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2


def _out_path(args, cfg, name):
    out = args.out or (cfg.out if cfg else None)
    return os.path.join(out, name) if out else None


def _mu_list(args, cfg):
    if args.mu_list:
        try:
            mus = [float(m) for m in args.mu_list.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad --mu-list: {exc}") from exc
    else:
        mus = list(cfg.mu_list)
    return sorted(mus, reverse=True)


def _lambda(args, cfg, default=None):
    lam = args.__dict__.get("lam") or cfg.lam or default
    if lam is None:
        raise ConfigError("no lambda given (use --lambda or a 'lambda' config entry)")
    return lam


def cmd_ball_analytic(args):
    star = lambda_star_ball()
    table = [(lam, g_ball_analytic(lam)) for lam in (0.5, 1.0, star, 2.0, 4.0, 10.0)]
    print(f"lambda* = {star:.15g}")
    print(f"root residual = {ball_root_residual(star):.3e}")
    print("lambda, g(0)")
    for lam, g in table:
        print(f"{lam:.17g}, {g:.17g}")
    path = _out_path(args, None, "ball_analytic.json")
    if path:
        write_json(path, {"lambda_star": star, "root_residual": ball_root_residual(star),
                          "g_center": [[l, g] for l, g in table]})
    return EXIT_OK


def cmd_robin_map(args, cfg):
    lam = _lambda(args, cfg, default=1.0)
    ev = RobinEvaluator(lam, cfg.domain, **cfg.solver_kw())
    resolution = args.grid or cfg.grid
    pts = cfg.domain.interior_grid(resolution, ev.margin)
    vals, res = ev.g_many(pts, check=False)
    rows = [(*p, v, r) for p, v, r in zip(pts, vals, res)]
    header = ["x", "y", "z", "g", "residual"]
    path = _out_path(args, cfg, "robin_map.csv")
    if path:
        write_csv(path, header, rows)
        print(f"wrote {len(rows)} rows to {path}")
    else:
        print(",".join(header))
        for row in rows:
            print(",".join("%.17g" % v for v in row))
    return EXIT_OK


def cmd_lambda_star(args, cfg):
    res = lambda_star(cfg.domain, tol=cfg.tol, n=cfg.n, inflation=cfg.inflation,
                      resolution=args.grid or cfg.grid)
    data = res.to_dict()
    data["meta"] = {"seed": defaults.SEED, "backend": _backend.BACKEND}
    print(dumps(data))
    path = _out_path(args, cfg, "lambda_star.json")
    if path:
        write_json(path, data)
        write_csv(_out_path(args, cfg, "lambda_star_history.csv"), ["lambda", "M"], res.history)
    return EXIT_OK


def cmd_energy_sweep(args, cfg):
    lam = _lambda(args, cfg)
    mus = _mu_list(args, cfg)
    rep = expansion_check(cfg.domain, lam, cfg.zeta, mus, n=cfg.n_ansatz,
                          inflation=cfg.inflation, level=cfg.quad_level)
    header = ["mu", "E_measured", "E_model", "remainder"]
    path = _out_path(args, cfg, "energy_sweep.csv")
    if path:
        write_csv(path, header, rep.rows())
        write_json(_out_path(args, cfg, "energy_fit.json"), rep.summary())
    print(",".join(header))
    for row in rep.rows():
        print(",".join("%.17g" % row[h] for h in header))
    print(dumps(rep.summary()))
    return EXIT_OK


def _check(results, name, ok, detail):
    results.append({"check": name, "passed": bool(ok), "detail": detail})
    log.info("%s %s: %s", "PASS" if ok else "FAIL", name, detail)


def run_checks(cfg, lam=None, mus=None):
    """Property battery; returns a list of {check, passed, detail}."""
    d = cfg.domain
    results = []
    diam = d.diameter
    lam = lam or cfg.lam or 1.0
    ev = RobinEvaluator(lam, d, **cfg.solver_kw())
    c = d.center

    # Green symmetry on well-separated central pairs
    pairs = [(c + 0.2 * diam * np.array(a), c + 0.2 * diam * np.array(b)) for a, b in
             (((0.5, 0.0, 0.0), (0.0, 0.5, 0.3)), ((-0.3, 0.4, 0.0), (0.2, -0.2, 0.6)),
              ((0.0, 0.0, -0.6), (0.7, 0.1, 0.0)))]
    asym = max(abs(ev.green(x, y) - ev.green(y, x)) for x, y in pairs)
    _check(results, "green_symmetry", asym <= 1e-6, f"max |G(x,y)-G(y,x)| = {asym:.3e}")

    # d g / d lambda > 0 at probes
    probes = [c + 0.25 * diam * np.array(p) for p in
              ((0, 0, 0), (0.5, 0, 0), (0, -0.6, 0.3), (0.3, 0.3, 0.3))]
    try:
        dg = [ev.dg_dlambda(p) for p in probes]
        _check(results, "dg_dlambda_positive", min(dg) > 0.0, f"min = {min(dg):.4e}")
    except RobinBubbleError as exc:
        _check(results, "dg_dlambda_positive", False, str(exc))

    # constants
    rel = max(abs(q / a - 1.0) for q, a in zip(constants_by_quadrature(), constants()))
    _check(results, "constants", rel <= 1e-8, f"max relative error {rel:.2e}")

    if isinstance(d, Ball):
        R = d.R
        # boundary law g = -1/(8 pi d) + log(d)/(4 pi) + O(1), checked in units of R
        ds = np.array([0.1, 0.05, 0.025, 0.0125])
        rem = np.array([R * ball_robin(1.0 / R ** 2, c + np.array([R * (1.0 - t), 0.0, 0.0]), R, c)
                        + 1.0 / (8.0 * math.pi * t) - math.log(t) / (4.0 * math.pi) for t in ds])
        spread = float(np.max(rem) - np.min(rem))
        _check(results, "boundary_asymptotics", spread < 0.01,
               f"g + 1/(8 pi d) - log(d)/(4 pi) = {np.round(rem, 5).tolist()}")
        trend = [l * g_ball_analytic(l, R) for l in (0.1 / R ** 2, 0.05 / R ** 2, 0.025 / R ** 2)]
        ok = trend[0] > trend[1] > trend[2] and trend[2] < 0.0
        _check(results, "small_lambda_trend", ok, f"lambda g(0) = {np.round(trend, 6).tolist()}")
        M10 = RobinEvaluator(10.0 / R ** 2, d, **cfg.solver_kw()).sup_g().M
        _check(results, "large_lambda_positive", M10 > 0.0, f"M = {M10:.6g}")
        err = abs(ev.g(c) - g_ball_analytic(lam, R))
        _check(results, "ball_center_oracle", err <= 1e-6, f"|g(0) - analytic| = {err:.2e}")

    lam_e = cfg.lam
    if lam_e is None and isinstance(d, Ball):
        lam_e = lambda_star_ball(d.R) + 0.05 / d.R ** 2
    if lam_e is not None:
        mus = mus or [m for m in cfg.mu_list if defaults.MU_WINDOW[0] <= m <= defaults.MU_WINDOW[1]]
        mus = sorted(mus, reverse=True)
        rep = expansion_check(d, lam_e, cfg.zeta, mus, n=cfg.n_ansatz, inflation=cfg.inflation,
                              level=cfg.quad_level)
        ok = rep.slope is not None and rep.slope >= 2.7
        _check(results, "energy_expansion_slope", ok, f"slope = {rep.slope}")
        probe = cfg.zeta + 0.1 * diam * np.array([[0, 0, 0], [0.5, 0, 0], [0, 1.0, 0],
                                                  [0, 0, -1.5], [1.0, 1.0, 0]])
        pr = pi_expansion_check(d, lam_e, cfg.zeta, mus, probe, n=cfg.n_ansatz,
                                inflation=cfg.inflation)
        ok = pr.slope is not None and pr.slope >= 1.7
        _check(results, "pi_expansion_slope", ok,
               f"slope = {pr.slope}, without D0 = {pr.slope_without_d0}")
    return results


def cmd_verify(args, cfg):
    lam = args.__dict__.get("lam")
    mus = _mu_list(args, cfg) if args.mu_list else None
    results = run_checks(cfg, lam=lam, mus=mus)
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['check']}: {r['detail']}")
    path = _out_path(args, cfg, "verify.json")
    if path:
        write_json(path, {"checks": results, "meta": {"seed": defaults.SEED,
                                                      "backend": _backend.BACKEND}})
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_CHECK


COMMANDS = {
    "robin-map": cmd_robin_map,
    "lambda-star": cmd_lambda_star,
    "energy-sweep": cmd_energy_sweep,
    "verify": cmd_verify,
}


def build_parser():
    p = argparse.ArgumentParser(prog="robinbubble", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        sp.add_argument("--config", required=needs_config, help="JSON run configuration")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--lambda", dest="lam", type=float, help="override lambda")
        sp.add_argument("--grid", type=int, help="grid points per axis")
        sp.add_argument("--mu-list", help="comma-separated mu values")
        sp.add_argument("--verbose", action="store_true")

    common(sub.add_parser("ball-analytic", help="lambda* and g(0) for the unit ball"),
           needs_config=False)
    common(sub.add_parser("robin-map", help="g on an interior grid (CSV)"))
    common(sub.add_parser("lambda-star", help="lambda* by bisection (JSON)"))
    common(sub.add_parser("energy-sweep", help="energy expansion over mu (CSV)"))
    common(sub.add_parser("verify", help="run the property battery"))
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        if args.command == "ball-analytic":
            code = cmd_ball_analytic(args)
        else:
            cfg = load_config(args.config)
            code = COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("%s finished in %.2fs (backend %s)", args.command, time.perf_counter() - t0,
             _backend.BACKEND)
    return code


if __name__ == "__main__":
    sys.exit(main())
