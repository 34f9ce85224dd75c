"""Run configuration and atomic CSV/JSON output."""
import csv
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import defaults
from .domain import Domain, from_config
from .errors import ConfigError


def _atomic_write(path, write):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path, header, rows):
    """Comma-separated, header row, floats with 17 significant digits."""
    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row[h] for h in header]
            w.writerow([_fmt(v) for v in row])
    _atomic_write(path, write)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(path, data):
    _atomic_write(path, lambda fh: (json.dump(data, fh, indent=2, default=_jsonable),
                                    fh.write("\n")))


def dumps(data):
    return json.dumps(data, indent=2, default=_jsonable)


@dataclass
class RunConfig:
    domain: Domain
    n: int = defaults.N_COLLOCATION
    n_ansatz: int = defaults.N_ANSATZ
    inflation: float = defaults.INFLATION
    svd_cut: float = defaults.SVD_CUT
    lam: float = None
    zeta: np.ndarray = None
    mu_list: tuple = defaults.MU_LIST
    grid: int = defaults.SUP_GRID
    tol: float = 1e-6
    quad_level: int = defaults.QUAD_LEVEL
    out: str = None
    raw: dict = field(default_factory=dict, repr=False)

    def solver_kw(self):
        return {"n": self.n, "inflation": self.inflation, "svd_cut": self.svd_cut}


def load_config(source):
    """Parse a run configuration from a path, a JSON string or a dict.

    A bare domain description (``{"kind": "ball", ...}``) is accepted as a
    config with default settings.
    """
    if isinstance(source, dict):
        cfg = source
    else:
        text = source
        if isinstance(source, os.PathLike) or (
                isinstance(source, str) and not source.lstrip().startswith("{")):
            if not os.path.exists(source):
                raise ConfigError(f"config file not found: {source}")
            try:
                with open(source) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config {source}: {exc}") from exc
        try:
            cfg = json.loads(text)
        except (json.JSONDecodeError, TypeError) as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if "kind" in cfg:
        cfg = {"domain": cfg}
    if "domain" not in cfg:
        raise ConfigError("config needs a 'domain' entry")
    domain = from_config(cfg["domain"])
    solver = cfg.get("solver", {})
    try:
        rc = RunConfig(
            domain=domain,
            n=int(solver.get("n", defaults.N_COLLOCATION)),
            n_ansatz=int(solver.get("n_ansatz", defaults.N_ANSATZ)),
            inflation=float(solver.get("inflation", defaults.INFLATION)),
            svd_cut=float(solver.get("svd_cut", defaults.SVD_CUT)),
            lam=float(cfg["lambda"]) if "lambda" in cfg else None,
            zeta=np.asarray(cfg.get("zeta", domain.center), dtype=float).reshape(3),
            mu_list=tuple(float(m) for m in cfg.get("mu_list", defaults.MU_LIST)),
            grid=int(cfg.get("grid", defaults.SUP_GRID)),
            tol=float(cfg.get("tolerances", {}).get("lambda_star", 1e-6)),
            quad_level=int(cfg.get("quad_level", defaults.QUAD_LEVEL)),
            out=cfg.get("out"),
            raw=cfg,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    for name in ("inflation", "svd_cut", "tol"):
        if not getattr(rc, name) > 0.0:
            raise ConfigError(f"{name} must be positive")
    if rc.n < 50 or rc.grid < 2:
        raise ConfigError("solver n must be >= 50 and grid >= 2")
    if rc.lam is not None and not rc.lam > 0.0:
        raise ConfigError("lambda must be positive")
    return rc
