"""Command-line front end: ``skewlab {eval,sweep,verify-theorem1,selftest}``.

Exit codes: 0 success, 1 selftest mismatch, 2 configuration error,
3 invalid model or domain, 4 inadmissible schedule.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .closed_form import exit_prob, green_solution, limit_coefficient, limit_solution, mean_exit
from .errors import (ConfigError, InadmissibleSchedule, InvalidGeometry, InvalidParams, OutOfDomain,
                     SkewLabError, UnsupportedGeometry, WrongKind)
from .fd_oracle import BvpProblem, solve_bvp, solve_limit_bvp
from .model import (Geometry, ModelKind, ModelSpec, Regime, Schedule, SkewParams, classify_regime,
                    config_to_schedule, config_to_spec, default_schedule, has_schedule, parse_config,
                    spec_to_config)
from .walk_engine import (Boundary, Killing, PathFunctionalSpec, build_chain, estimate_killed_functional,
                          simulate_reflected_elastic)

SWEEP_COLUMNS = ("kind", "eps", "alpha", "lambda", "x", "phi", "v_closed", "v_fd", "v_mc", "mc_se",
                 "v_limit", "abs_err", "regime", "C", "cond_alpha_eps_over_lambda")
VERIFY_COLUMNS = ("kind", "eps", "alpha", "lambda", "x", "regime", "G", "lhs", "lhs_se", "rhs", "rhs_se",
                  "z", "v_limit", "cond_alpha_eps_over_lambda")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INVALID, EXIT_INADMISSIBLE = 0, 1, 2, 3, 4
DEFAULT_SEED = 20240601


# --------------------------------------------------------------------------
# source catalog

@dataclass(frozen=True)
class Source:
    name: str
    fn: Callable[[float], float]

    @property
    def is_one(self) -> bool:
        return self.name == "one"

    def __call__(self, x: float) -> float:
        return self.fn(x)


def _parse_points(text: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        pairs = [item.split(":") for item in text.split(",") if item.strip()]
        xs, ys = zip(*((float(a), float(b)) for a, b in pairs))
    except ValueError:
        raise ConfigError(f"f.points: expected 'x:y, x:y, ...', got {text!r}") from None
    xs, ys = np.array(xs), np.array(ys)
    if len(xs) < 2 or np.any(np.diff(xs) <= 0) or not np.all(np.isfinite(ys)):
        raise ConfigError("f.points: need at least two points with increasing x and finite y")
    return xs, ys


def make_source(cfg: dict[str, str], ell: float) -> Source:
    """``f`` from the config: ``one``, ``linear``, ``indicator_left`` or ``table``."""
    name = cfg.get("f", "one")
    if name == "one":
        return Source(name, lambda x: 1.0)
    if name == "linear":
        return Source(name, lambda x: float(x))
    if name == "indicator_left":
        return Source(name, lambda x: 1.0 if x <= ell else 0.0)
    if name == "table":
        if "f.points" not in cfg:
            raise ConfigError("f = table needs f.points")
        xs, ys = _parse_points(cfg["f.points"])
        return Source(name, lambda x: float(np.interp(x, xs, ys)))
    raise ConfigError(f"unknown f {name!r}; choose one, linear, indicator_left or table")


# --------------------------------------------------------------------------
# output helpers

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value)) if math.isfinite(value) else ("inf" if value > 0 else "nan")
    return str(value)


def rows_to_csv(columns: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _json_value(value):
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else str(float(value))
    return value


def rows_to_json(columns: Sequence[str], rows: Sequence[dict], metadata: dict) -> str:
    body = {"metadata": metadata, "columns": list(columns),
            "rows": [{c: _json_value(row.get(c)) for c in columns} for row in rows]}
    return json.dumps(body, indent=2) + "\n"


def atomic_write(path: str, text: str) -> None:
    """Write through a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _metadata(args, **extra) -> dict:
    meta = {"version": f"skewlab {__version__}", "seed": args.seed,
            "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
    meta.update(extra)
    return meta


def _emit(args, columns, rows, metadata, stem: str | None, out_dir: str | None = None) -> None:
    """Print the table in ``--format``; with a ``stem`` also write ``stem.csv`` and ``stem.json``."""
    csv_text = rows_to_csv(columns, rows)
    json_text = rows_to_json(columns, rows, metadata)
    out_dir = args.out if out_dir is None else out_dir
    if stem is not None and out_dir is not None:
        atomic_write(os.path.join(out_dir, f"{stem}.csv"), csv_text)
        atomic_write(os.path.join(out_dir, f"{stem}.json"), json_text)
    sys.stdout.write(csv_text if args.format == "csv" else json_text)


# --------------------------------------------------------------------------
# config and argument helpers

def _load_config(path: str | None) -> dict[str, str]:
    if path is None:
        raise ConfigError("--config is required")
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None


def _resolve_x(tokens: Sequence[str], spec: ModelSpec) -> list[float]:
    named = {"l": spec.l, "ell": spec.ell, "r": spec.r}
    out = []
    for tok in tokens:
        if tok in named:
            out.append(named[tok])
            continue
        try:
            out.append(float(tok))
        except ValueError:
            raise ConfigError(f"--x: expected a number or one of l, ell, r, got {tok!r}") from None
    return out


def _fractions(spec_or_geom, fracs: Sequence[float]) -> list[float]:
    l, ell = spec_or_geom.l, spec_or_geom.ell
    return [l + f * (ell - l) for f in fracs]


_REQUIRED = object()


def _float_key(cfg, key, default=_REQUIRED):
    if key not in cfg:
        if default is _REQUIRED:
            raise ConfigError(f"missing key {key!r}")
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError(f"key {key!r}: not a number: {cfg[key]!r}") from None


def _limit_values(kind: ModelKind, geometry: Geometry, regime: Regime, f: Source, xs, h: float):
    if f.is_one:
        return [float(limit_solution(kind, geometry, regime, x)) for x in xs]
    grid = solve_limit_bvp(kind, geometry, regime, f, h)
    return [float(grid(x)) for x in xs]


def _closed_value(spec: ModelSpec, f: Source, x: float) -> float:
    return float(mean_exit(spec, x)) if f.is_one else green_solution(spec, f, x)


# --------------------------------------------------------------------------
# subcommands

def cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    schedule = config_to_schedule(cfg) if has_schedule(cfg) else None
    spec = config_to_spec(cfg, schedule)
    f = make_source(cfg, spec.ell)
    xs = _resolve_x(args.x or ["ell"], spec)
    for x in xs:
        if not spec.l <= x <= spec.r:
            raise OutOfDomain(f"x={x} outside [l, r] = [{spec.l}, {spec.r}]")
    columns = ["x", "phi", "v"]
    grid = None
    if args.oracle == "fd":
        columns.append("v_fd")
        grid = solve_bvp(BvpProblem(spec, f, args.h))
    rows = []
    for x in xs:
        row = {"x": x, "phi": float(exit_prob(spec, x)), "v": _closed_value(spec, f, x)}
        if grid is not None:
            row["v_fd"] = float(grid(x))
        rows.append(row)
    _emit(args, columns, rows, _metadata(args, config=spec_to_config(spec)), None)
    return EXIT_OK


@dataclass(frozen=True)
class SweepPlan:
    template: ModelSpec
    schedule: Schedule
    eps: tuple[float, ...]
    xs: tuple[float, ...]
    f: Source
    fd: bool = False
    n_paths: int = 0
    h: float = 1e-3
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ConfigError("sweep eps grid must be strictly decreasing")
        for x in self.xs:
            if not self.template.l < x < self.template.ell:
                raise OutOfDomain(f"sweep point x={x} outside (l, ell) = ({self.template.l}, {self.template.ell})")


def run_sweep(plan: SweepPlan) -> tuple[list[dict], Regime, float]:
    """Rows of the sweep table; the last row carries only the limit data."""
    plan.schedule.check_admissible()
    regime = classify_regime(plan.schedule)
    kind, geom = plan.template.kind, plan.template.geometry
    C = limit_coefficient(kind, geom, regime)
    limits = _limit_values(kind, geom, regime, plan.f, plan.xs, plan.h)
    specs = [plan.schedule.spec_at(eps, geom, kind) for eps in plan.eps]  # fail before any work
    rows = []
    for spec in specs:
        grid = solve_bvp(BvpProblem(spec, plan.f, plan.h)) if plan.fd else None
        chain = build_chain(spec, plan.h, (Boundary.ABSORB, Boundary.ABSORB)) if plan.n_paths else None
        for x, v_lim in zip(plan.xs, limits):
            v = _closed_value(spec, plan.f, x)
            row = {"kind": kind.value, "eps": spec.eps, "alpha": spec.alpha, "lambda": spec.lam, "x": x,
                   "phi": float(exit_prob(spec, x)), "v_closed": v, "v_limit": v_lim,
                   "abs_err": abs(v - v_lim), "regime": str(regime), "C": C,
                   "cond_alpha_eps_over_lambda": plan.schedule.condition(spec.eps)}
            if grid is not None:
                row["v_fd"] = float(grid(x))
            if chain is not None:
                x_node = chain.grid[chain.node_index(x, tol=0.51 * plan.h)]
                est = estimate_killed_functional(chain, x_node, PathFunctionalSpec(plan.f, Killing.ABSORBING_SHELL),
                                                 plan.n_paths, plan.seed)
                row["v_mc"], row["mc_se"] = est.mean, est.std_error
            rows.append(row)
    rows.append({"kind": kind.value, "eps": 0.0, "regime": str(regime), "C": C,
                 "cond_alpha_eps_over_lambda": 0.0})
    return rows, regime, C


def _sweep_plan(args, cfg) -> SweepPlan:
    if not has_schedule(cfg):
        raise ConfigError("sweep needs schedule.a, schedule.p, schedule.b, schedule.q")
    schedule = config_to_schedule(cfg)
    schedule.check_admissible()
    kind = ModelKind.parse(cfg.get("kind", ""))
    eps0 = args.eps0 if args.eps0 is not None else _float_key(cfg, "eps")
    k_max = args.k_max if args.k_max is not None else int(_float_key(cfg, "sweep.k_max", 8))
    eps = tuple(eps0 * 2.0**-k for k in range(k_max + 1))
    template = schedule.spec_at(eps0, Geometry(_float_key(cfg, "l"), _float_key(cfg, "ell"), eps0), kind)
    xs = _resolve_x(args.x, template) if args.x else _fractions(template, (0.3, 0.5, 0.7))
    n_paths = args.n_paths if args.n_paths is not None else int(_float_key(cfg, "sweep.n_paths", 0))
    h = args.h if args.h is not None else _float_key(cfg, "sweep.h", 1e-3)
    fd = args.fd or cfg.get("sweep.fd", "false").lower() in ("1", "true", "yes")
    return SweepPlan(template, schedule, eps, tuple(xs), make_source(cfg, template.ell), fd, n_paths, h, args.seed)


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    plan = _sweep_plan(args, cfg)
    rows, regime, C = run_sweep(plan)
    meta = _metadata(args, config=spec_to_config(plan.template, plan.schedule),
                     regime=str(regime), C=C, f=plan.f.name)
    _emit(args, SWEEP_COLUMNS, rows, meta, "sweep", args.out or ".")
    return EXIT_OK


def verify_theorem1(kind: ModelKind, geometry: Geometry, schedule: Schedule, eps: float, f: Source,
                     xs: Sequence[float], n_paths: int, h: float, seed: int) -> list[dict]:
    """Two-sided check: killed skew chain at ``eps`` against the reflected elastic chain.

    The two estimates use independent seeds so that their difference has
    variance ``lhs_se**2 + rhs_se**2``.
    """
    regime = classify_regime(schedule)
    spec = schedule.spec_at(eps, geometry, kind)
    G = regime.rate
    limits = _limit_values(kind, geometry, regime, f, xs, min(h, 1e-3))
    chain = build_chain(spec, h, (Boundary.ABSORB, Boundary.ABSORB))
    lhs_spec = PathFunctionalSpec(f, Killing.ABSORBING_SHELL)
    rows = []
    for x, v_lim in zip(xs, limits):
        x_node = chain.grid[chain.node_index(x, tol=0.51 * h)]
        lhs = estimate_killed_functional(chain, x_node, lhs_spec, n_paths, seed)
        rhs = simulate_reflected_elastic(spec, G, f, x_node, n_paths, seed + 1, h)
        se = math.hypot(lhs.std_error, rhs.std_error)
        diff = lhs.mean - rhs.mean
        z = diff / se if se > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))
        rows.append({"kind": kind.value, "eps": eps, "alpha": spec.alpha, "lambda": spec.lam, "x": x,
                     "regime": str(regime), "G": G, "lhs": lhs.mean, "lhs_se": lhs.std_error,
                     "rhs": rhs.mean, "rhs_se": rhs.std_error, "z": z, "v_limit": v_lim,
                     "cond_alpha_eps_over_lambda": schedule.condition(eps)})
    return rows


def cmd_verify_theorem1(args) -> int:
    cfg = _load_config(args.config)
    kind = ModelKind.parse(cfg.get("kind", ""))
    if args.regime is not None:
        regime = Regime.robin(args.G) if args.regime == "robin" else (
            Regime.neumann() if args.regime == "neumann" else Regime.dirichlet())
        schedule = default_schedule(regime)
    elif has_schedule(cfg):
        schedule = config_to_schedule(cfg)
    else:
        raise ConfigError("give schedule.* keys in the config or --regime")
    schedule.check_admissible()
    eps0 = _float_key(cfg, "eps", 0.2)
    k_max = args.k_max if args.k_max is not None else int(_float_key(cfg, "sweep.k_max", 8))
    eps = args.eps if args.eps is not None else eps0 * 2.0**-k_max
    geometry = Geometry(_float_key(cfg, "l"), _float_key(cfg, "ell"), eps)
    probe = schedule.spec_at(eps, geometry, kind)
    xs = _resolve_x(args.x, probe) if args.x else _fractions(probe, (0.4, 0.6))
    for x in xs:
        if not probe.l < x <= probe.ell:
            raise OutOfDomain(f"x={x} outside (l, ell] = ({probe.l}, {probe.ell}]")
    f = make_source(cfg, probe.ell)
    rows = verify_theorem1(kind, geometry, schedule, eps, f, xs, args.n_paths, args.h, args.seed)
    meta = _metadata(args, config=spec_to_config(probe, schedule), n_paths=args.n_paths, h=args.h, f=f.name)
    _emit(args, VERIFY_COLUMNS, rows, meta, "verify_theorem1")
    worst = max(abs(r["z"]) for r in rows)
    return EXIT_OK if worst <= 3.0 else EXIT_FAIL


SELFTEST_SPEC = ModelSpec(ModelKind.LINE, Geometry(0.0, 1.0, 0.5), SkewParams(0.5, 1.0))


def selftest_rows(seed: int, n_paths: int = 20_000, h: float = 0.01) -> list[dict]:
    """Closed form, FD and MC on the symmetric line model where ``v = x (r - x)``."""
    spec = SELFTEST_SPEC
    one = Source("one", lambda x: 1.0)
    grid = solve_bvp(BvpProblem(spec, one, h))
    chain = build_chain(spec, h, (Boundary.ABSORB, Boundary.ABSORB))
    rows = []
    for x in (0.25, 0.5, 0.75, 1.0, 1.25):
        est = estimate_killed_functional(chain, x, PathFunctionalSpec(one, Killing.ABSORBING_SHELL), n_paths, seed)
        rows.append({"kind": spec.kind.value, "eps": spec.eps, "alpha": spec.alpha, "lambda": spec.lam, "x": x,
                     "phi": float(exit_prob(spec, x)), "v_closed": float(mean_exit(spec, x)),
                     "v_fd": float(grid(x)), "v_mc": est.mean, "mc_se": est.std_error})
    return rows


def cmd_selftest(args) -> int:
    rows = selftest_rows(args.seed)
    ok = all(abs(r["v_closed"] - r["x"] * (SELFTEST_SPEC.r - r["x"])) <= 1e-12
             and abs(r["v_fd"] - r["v_closed"]) <= 1e-9
             and abs(r["v_mc"] - r["v_closed"]) <= 4 * r["mc_se"] for r in rows)
    _emit(args, SWEEP_COLUMNS, rows, _metadata(args, passed=ok), "selftest")
    print(f"selftest {'passed' if ok else 'FAILED'}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value model/schedule file")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Monte Carlo seed")
    common.add_argument("--out", metavar="DIR", help="directory for report files")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="stdout format")

    parser = argparse.ArgumentParser(prog="skewlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"skewlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="closed-form exit probability and mean exit time")
    p.add_argument("--x", nargs="+", action="extend", metavar="X", help="points (numbers or l, ell, r)")
    p.add_argument("--oracle", choices=("fd",), help="append a finite-difference column")
    p.add_argument("--h", type=float, default=1e-3, help="FD grid step")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="eps -> 0 sweep under the configured schedule")
    p.add_argument("--x", nargs="+", action="extend", metavar="X")
    p.add_argument("--eps0", type=float, help="largest eps (default: config eps)")
    p.add_argument("--k-max", type=int, help="eps = eps0 * 2**-k for k = 0..k_max (default 8)")
    p.add_argument("--fd", action="store_true", help="add the finite-difference column")
    p.add_argument("--n-paths", type=int, help="Monte Carlo paths per point (0 skips MC)")
    p.add_argument("--h", type=float, help="grid step for FD and MC")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-theorem1", parents=[common], help="killed skew walk vs reflected elastic walk")
    p.add_argument("--regime", choices=("neumann", "robin", "dirichlet"),
                   help="use the built-in schedule for this regime instead of the config schedule")
    p.add_argument("--G", type=float, default=1.0, help="Robin rate for --regime robin")
    p.add_argument("--x", nargs="+", action="extend", metavar="X")
    p.add_argument("--eps", type=float, help="shell thickness (default: config eps * 2**-k_max)")
    p.add_argument("--k-max", type=int)
    p.add_argument("--n-paths", type=int, default=200_000)
    p.add_argument("--h", type=float, default=2e-3)
    p.set_defaults(func=cmd_verify_theorem1)

    p = sub.add_parser("selftest", parents=[common], help="deterministic consistency run")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InadmissibleSchedule as exc:
        print(f"skewlab: inadmissible schedule: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except ConfigError as exc:
        print(f"skewlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidGeometry, InvalidParams, OutOfDomain, UnsupportedGeometry, WrongKind) as exc:
        print(f"skewlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SkewLabError as exc:
        print(f"skewlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
