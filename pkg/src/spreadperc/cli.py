"""Command-line driver: ``spreadperc <subcommand> [--config file.json] [flags]``.

Outputs are CSV; when ``--out`` is given a ``<out>.json`` sidecar records the
resolved config, seed and library versions.  Exit codes: 0 success, 1 config
error, 2 numerical or convergence error.
"""

import argparse
import csv
import io
import json
import math
import platform
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from ._accel import get_backend
from .branching import survival_probability
from .errors import (BracketError, ConvergenceError, InvalidArgumentError, InvalidConfigError,
                     NotNormalizedError, SpreadPercError)
from .estimate import GIANT, WRAP, giant_curve, threshold_trend, torus_window
from .geometry import FREE, TORUS, Window, sample_poisson, save_cloud
from .graph import STATS_HEADER, sample_graph
from .kernel import from_config as kernel_from_config
from .renorm import (BoxGrid, GoodEventConfig, GraphSample, calibrate_a, derived_bond_field,
                     estimate_good_probability, iid_bond_sample, spanning_exists)
from .rng import Stream
from .spectral import OperatorGrid, power_iteration

SUBCOMMANDS = ("sample", "sweep", "threshold", "gw", "opnorm", "renorm", "bond")


@dataclass
class RunConfig:
    d: int = 2
    r: float = 8.0
    lam: float = 2.0
    lambda_grid: list = None
    r_list: list = None
    kernel: dict = field(default_factory=lambda: {"shape": "ball", "parameters": {}})
    window_scale: float = 48.0
    boundary: str = TORUS
    replicates: int = 32
    seed: int = 0
    out: str = None
    # subcommand-specific
    L: float = 4.0
    a: float = None
    theta: float = 0.05
    criterion: str = "wrap"
    m: int = 32
    tol: float = None
    lam_lo: float = 0.5
    lam_hi: float = 3.0
    batches: int = 4
    operator_boundary: str = "free"
    max_iter: int = 50_000
    p: float = 0.8639
    bond_shape: list = field(default_factory=lambda: [64, 64])
    bond_grid: int = 8
    spanning_out: str = None
    points_out: str = None

    def kernel_spec(self):
        cfg = dict(self.kernel)
        cfg["d"] = self.d
        return kernel_from_config(cfg)


# config-file / flag key -> RunConfig attribute
_ALIASES = {"lambda": "lam", "lambda-grid": "lambda_grid", "r-list": "r_list",
            "window-scale": "window_scale", "lam-lo": "lam_lo", "lam-hi": "lam_hi",
            "operator-boundary": "operator_boundary", "max-iter": "max_iter",
            "bond-shape": "bond_shape", "bond-grid": "bond_grid", "spanning-out": "spanning_out",
            "points-out": "points_out", "lambda_lo": "lam_lo", "lambda_hi": "lam_hi"}
_FIELDS = {f.name for f in fields(RunConfig)}


def _finite(name, value):
    if value is None:
        return
    vals = value if isinstance(value, (list, tuple)) else [value]
    for v in vals:
        if isinstance(v, (int, float)) and not math.isfinite(v):
            raise InvalidConfigError(f"{name} must be finite, got {v}")


def parse_config(source=None, **overrides) -> RunConfig:
    """Merge a JSON file (or dict) with keyword overrides, apply defaults and validate."""
    raw = {}
    if isinstance(source, dict):
        raw.update(source)
    elif source is not None:
        try:
            with open(source) as fh:
                raw.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfigError(f"cannot read config {source}: {exc}")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    data = {}
    unknown = []
    for key, value in raw.items():
        name = _ALIASES.get(key, key.replace("-", "_"))
        if name not in _FIELDS:
            unknown.append(key)
        else:
            data[name] = value
    if unknown:
        raise InvalidConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = RunConfig(**data)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    for f in fields(RunConfig):
        _finite(f.name, getattr(cfg, f.name))
    if int(cfg.d) != cfg.d or cfg.d < 1:
        raise InvalidConfigError(f"d must be an integer >= 1, got {cfg.d}")
    cfg.d = int(cfg.d)
    if not cfg.r > 0:
        raise InvalidConfigError(f"r must be > 0, got {cfg.r}")
    if cfg.lam < 0:
        raise InvalidConfigError(f"lambda must be >= 0, got {cfg.lam}")
    if int(cfg.replicates) != cfg.replicates or cfg.replicates < 1:
        raise InvalidConfigError(f"replicates must be an integer >= 1, got {cfg.replicates}")
    if cfg.r_list is not None:
        for k, r in enumerate(cfg.r_list):
            if not (isinstance(r, (int, float)) and r > 0):
                raise InvalidConfigError(f"r_list[{k}] = {r} must be > 0")
    if cfg.lambda_grid is not None and any(l < 0 for l in cfg.lambda_grid):
        raise InvalidConfigError("lambda_grid entries must be >= 0")
    if cfg.boundary not in (TORUS, FREE):
        raise InvalidConfigError(f"boundary must be torus or free, got {cfg.boundary!r}")
    if cfg.criterion not in ("wrap", "giant"):
        raise InvalidConfigError(f"criterion must be 'wrap' or 'giant', got {cfg.criterion!r}")
    if not cfg.window_scale > 0:
        raise InvalidConfigError("window_scale must be > 0")
    if not 0 <= cfg.p <= 1:
        raise InvalidConfigError(f"p must lie in [0, 1], got {cfg.p}")
    if cfg.a is not None and not cfg.a > 0:
        raise InvalidConfigError(f"a must be > 0, got {cfg.a}")
    if cfg.seed < 0 or int(cfg.seed) != cfg.seed:
        raise InvalidConfigError(f"seed must be a nonnegative integer, got {cfg.seed}")


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _window(cfg):
    if cfg.boundary == TORUS:
        return torus_window(cfg.r, cfg.d, cfg.window_scale)
    return Window.cube(cfg.window_scale * cfg.r, cfg.d, FREE)


def _run_sample(cfg, stream):
    spec = cfg.kernel_spec()
    win = _window(cfg)
    rows = []
    for k in range(cfg.replicates):
        s = stream.child(k)
        cloud = sample_poisson(win, 1.0, s.child(0))
        if k == 0 and cfg.points_out:
            save_cloud(cloud, cfg.points_out)
        st = sample_graph(cloud, spec, cfg.lam, cfg.r, s.child(1))
        rows.append(st.row(k, cfg.r, cfg.lam, cfg.d))
    return STATS_HEADER, rows


def _run_sweep(cfg, stream):
    grid = cfg.lambda_grid or [cfg.lam]
    curve = giant_curve(cfg.kernel_spec(), cfg.r, grid, _window(cfg), cfg.replicates, stream)
    header = ["lambda", "mean_C1_frac", "mean_C2_frac", "ci_lo", "ci_hi", "wrap_frac"]
    return header, [[row[h] for h in header] for row in curve.table()]


def _run_threshold(cfg, stream):
    r_list = cfg.r_list or [cfg.r]
    kw = dict(replicates=cfg.replicates, tol=cfg.tol or 0.01, lam_lo=cfg.lam_lo, lam_hi=cfg.lam_hi,
              batches=cfg.batches, criterion=WRAP if cfg.criterion == "wrap" else GIANT, theta=cfg.theta)
    if len(r_list) == 1:
        from .estimate import threshold_bisect
        win = torus_window(r_list[0], cfg.d, cfg.window_scale)
        ests = [threshold_bisect(cfg.kernel_spec(), r_list[0], win, stream=stream.child(0),
                                 allow_infinite=True, **kw)]
    else:
        ests = threshold_trend(cfg.kernel_spec(), r_list, cfg.window_scale, stream, **kw).estimates
    return ["r", "lambda_c", "ci_lo", "ci_hi", "criterion"], [e.row() for e in ests]


def _run_gw(cfg, stream):
    lams = cfg.lambda_grid or [cfg.lam]
    rows = []
    for lam in lams:
        res = survival_probability(lam)
        rows.append([lam, res.psi, res.residual])
    return ["lambda", "psi", "residual"], rows


def _run_opnorm(cfg, stream):
    grid = OperatorGrid(cfg.L, cfg.m, cfg.kernel_spec(), cfg.lam, boundary=cfg.operator_boundary)
    res = power_iteration(grid, tol=cfg.tol or 1e-11, max_iter=cfg.max_iter)
    return ["d", "lambda", "L", "m", "norm", "iterations"], [[cfg.d, cfg.lam, cfg.L, cfg.m, res.norm, res.iterations]]


def _run_renorm(cfg, stream):
    spec = cfg.kernel_spec()
    a = cfg.a if cfg.a is not None else calibrate_a(spec, cfg.lam, cfg.r, cfg.L, 50, stream.child(0))
    est = estimate_good_probability(spec, cfg.lam, cfg.r, cfg.L, a, max(cfg.replicates, 30), stream.child(1))
    rows = [[cfg.r, cfg.lam, cfg.L, a, est.p_hat, est.ci_lo, est.ci_hi]]
    if cfg.spanning_out:
        grid = BoxGrid(cfg.L, (cfg.bond_grid, cfg.bond_grid), cfg.r, cfg.d)
        good = GoodEventConfig(a, cfg.r ** cfg.d)
        span_rows = []
        for k in range(cfg.replicates):
            s = stream.child(2).child(k)
            cloud = sample_poisson(grid.window(), 1.0, s.child(0))
            field_ = derived_bond_field(GraphSample(cloud, spec, cfg.lam, cfg.r, s.child(1)), grid, good)
            span_rows.append([k, int(spanning_exists(field_, 0))])
        _emit(cfg.spanning_out, ["replicate", "spanning"], span_rows, cfg, "renorm")
    return ["r", "lambda", "L", "a", "p_good", "ci_lo", "ci_hi"], rows


def _run_bond(cfg, stream):
    shape = tuple(int(x) for x in cfg.bond_shape)
    rows = [[k, int(spanning_exists(iid_bond_sample(cfg.p, shape, stream.child(k)), 0))]
            for k in range(cfg.replicates)]
    return ["replicate", "spanning"], rows


_RUNNERS = {"sample": _run_sample, "sweep": _run_sweep, "threshold": _run_threshold, "gw": _run_gw,
            "opnorm": _run_opnorm, "renorm": _run_renorm, "bond": _run_bond}


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def metadata(cfg: RunConfig, subcommand: str, header) -> dict:
    import numba
    import scipy

    return {
        "subcommand": subcommand,
        "config": asdict(cfg),
        "seed": cfg.seed,
        "columns": list(header),
        "backend": get_backend(),
        "versions": {"spreadperc": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "numba": numba.__version__, "python": platform.python_version()},
    }


def _emit(path, header, rows, cfg, subcommand):
    text = _csv_text(header, rows)
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)
    with open(str(path) + ".json", "w") as fh:
        json.dump(metadata(cfg, subcommand, header), fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def run(subcommand: str, cfg: RunConfig) -> int:
    if subcommand not in _RUNNERS:
        raise InvalidConfigError(f"unknown subcommand {subcommand!r}")
    header, rows = _RUNNERS[subcommand](cfg, Stream.from_seed(cfg.seed))
    _emit(cfg.out, header, rows, cfg, subcommand)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidConfigError(message)


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spreadperc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--d", type=int)
        p.add_argument("--r", type=float)
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--lambda-grid", dest="lambda_grid", type=_floats)
        p.add_argument("--r-list", dest="r_list", type=_floats)
        p.add_argument("--kernel", type=json.loads, help='e.g. \'{"shape": "annulus", "parameters": {...}}\'')
        p.add_argument("--window-scale", dest="window_scale", type=float)
        p.add_argument("--boundary", choices=(TORUS, FREE))
        p.add_argument("--replicates", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--L", type=float)
        p.add_argument("--a", type=float)
        p.add_argument("--theta", type=float)
        p.add_argument("--criterion", choices=("wrap", "giant"))
        p.add_argument("--m", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--lam-lo", dest="lam_lo", type=float)
        p.add_argument("--lam-hi", dest="lam_hi", type=float)
        p.add_argument("--batches", type=int)
        p.add_argument("--operator-boundary", dest="operator_boundary", choices=("free", "torus"))
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--p", type=float)
        p.add_argument("--bond-shape", dest="bond_shape", type=_ints)
        p.add_argument("--bond-grid", dest="bond_grid", type=int)
        p.add_argument("--spanning-out", dest="spanning_out")
        p.add_argument("--points-out", dest="points_out")
    return parser


def main(argv=None) -> int:
    try:
        args = vars(build_parser().parse_args(argv))
        subcommand = args.pop("subcommand")
        config = args.pop("config")
        if args.get("kernel") is not None:
            args["kernel"].pop("d", None)
        cfg = parse_config(config, **args)
        return run(subcommand, cfg)
    except (InvalidConfigError, InvalidArgumentError, NotNormalizedError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, BracketError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except SpreadPercError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
