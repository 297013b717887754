"""Command-line interface: ``xdlasso {simulate,test,empirical}``.

Exit codes: 0 success, 2 invalid configuration or input, 3 experiment aborted
by the failure policy, 4 singular score vector.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .core import RegressionSample, TuningConfig
from .data import (PERIODS, build_inflation_unrate_sample, build_return_ep_sample,
                   load_fred_md, persistence_table)
from .exceptions import (DomainError, ExperimentAborted, SingularScore, XDlassoError)
from .inference import DLASSO, XDLASSO, DebiasedLasso
from .ivx import IvxConfig
from .simulate import (ALL_METHODS, SimulationConfig, calibrate_tuning_constants, pilot_config,
                       run_power_experiment, run_size_experiment)

log = logging.getLogger("xdlasso")

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_SINGULAR = 0, 2, 3, 4

METHOD_NAMES = {"xdlasso": XDLASSO, "dlasso": DLASSO}


class ConfigError(Exception):
    """Invalid flag value; the message names the flag."""


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    version: str
    duration_seconds: float = 0.0
    outputs: dict = field(default_factory=dict)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=str) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n")


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def resolve_threads(value: int | None) -> int:
    if value is None:
        env = os.environ.get("XDLASSO_THREADS")
        if env:
            try:
                value = int(env)
            except ValueError:
                raise ConfigError(f"XDLASSO_THREADS must be an integer, got {env!r}") from None
        else:
            value = 1
    if value < 1:
        raise ConfigError("--threads must be >= 1")
    return value


def stars(p: float) -> str:
    if p <= 0.01:
        return "***"
    if p <= 0.05:
        return "**"
    if p <= 0.10:
        return "*"
    return ""


def _float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{flag} must be a comma-separated list of numbers") from None


def _add_tuning_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("tuning")
    g.add_argument("--tuning", choices=["cv", "calibrated", "fixed"], default="cv")
    g.add_argument("--lambda", dest="lam", type=float, help="main penalty (fixed tuning)")
    g.add_argument("--mu", type=float, help="auxiliary penalty (fixed tuning)")
    g.add_argument("--c-lambda", type=float, help="rate constant for lambda (calibrated)")
    g.add_argument("--c-mu", type=float, help="rate constant for mu (calibrated)")
    g.add_argument("--c-mu-dlasso", type=float, help="rate constant for the Dlasso mu")
    g.add_argument("--cv-folds", type=int, default=10)
    g.add_argument("--r", type=float, default=1.0, help="tail exponent in the penalty rates")
    g.add_argument("--c-zeta", type=float, default=5.0)
    g.add_argument("--tau", type=float, default=0.5)


def _tuning(args, allow_missing_calibration: bool = False) -> TuningConfig | None:
    kw = {"r": args.r, "cv_folds": args.cv_folds}
    if args.cv_folds < 2:
        raise ConfigError("--cv-folds must be >= 2")
    if args.r <= 0:
        raise ConfigError("--r must be positive")
    if args.tuning == "cv":
        return TuningConfig.cv(**kw)
    if args.tuning == "fixed":
        if args.lam is None or args.mu is None:
            raise ConfigError("--tuning fixed requires --lambda and --mu")
        if args.lam < 0 or args.mu < 0:
            raise ConfigError("--lambda and --mu must be nonnegative")
        return TuningConfig.fixed(args.lam, args.mu, **kw)
    if args.c_lambda is None or args.c_mu is None:
        if allow_missing_calibration:
            return None
        raise ConfigError("--tuning calibrated requires --c-lambda and --c-mu")
    if args.c_lambda < 0 or args.c_mu < 0:
        raise ConfigError("--c-lambda and --c-mu must be nonnegative")
    return TuningConfig.calibrated(args.c_lambda, args.c_mu, args.c_mu_dlasso, **kw)


def _ivx(args) -> IvxConfig:
    if not 0 < args.tau < 1:
        raise ConfigError(f"--tau must lie in (0, 1), got {args.tau}")
    if not args.c_zeta > 0:
        raise ConfigError("--c-zeta must be positive")
    return IvxConfig(c_zeta=args.c_zeta, tau=args.tau)


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha < 1:
        raise ConfigError(f"--alpha must lie in (0, 1), got {alpha}")


# ---------------------------------------------------------------- simulate

def cmd_simulate(args) -> int:
    start = time.perf_counter()
    if args.reps < 1:
        raise ConfigError(f"--reps must be >= 1, got {args.reps}")
    for flag, v, lo in (("--n", args.n, 50), ("--px", args.px, 5), ("--pz", args.pz, 5)):
        if v < lo:
            raise ConfigError(f"{flag} must be >= {lo}, got {v}")
    _check_alpha(args.alpha)
    workers = resolve_threads(args.threads)
    ivx = _ivx(args)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    bad = [m for m in methods if m not in ALL_METHODS]
    if bad or not methods:
        raise ConfigError(f"--methods must be drawn from {','.join(ALL_METHODS)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {}
    tuning = _tuning(args, allow_missing_calibration=True)
    calibration = None
    if tuning is None:
        pilot = pilot_config(innovation=args.dgp, target=args.target,
                             replications=args.pilot_reps, base_seed=args.seed + 1,
                             tuning=TuningConfig.cv(r=args.r, cv_folds=args.cv_folds), ivx=ivx)
        consts = calibrate_tuning_constants(pilot, with_dlasso=DLASSO in methods, workers=workers)
        tuning = consts.tuning(r=args.r, cv_folds=args.cv_folds)
        calibration = {"c_lambda": consts.c_lambda, "c_mu": consts.c_mu,
                       "c_mu_dlasso": consts.c_mu_dlasso, "pilot_reps": args.pilot_reps}
        write_json(out / "calibration.json", calibration)
        outputs["calibration"] = str(out / "calibration.json")
    try:
        config = SimulationConfig(n=args.n, p_x=args.px, p_z=args.pz, innovation=args.dgp,
                                  target=args.target, replications=args.reps,
                                  base_seed=args.seed, alpha=args.alpha, tuning=tuning, ivx=ivx,
                                  methods=methods)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    if args.coef_grid:
        grid = _float_list(args.coef_grid, "--coef-grid")
        if any(g < 0 or g > 0.5 for g in grid):
            raise ConfigError("--coef-grid values must lie in [0, 0.5]")
        curve = run_power_experiment(config, grid, workers)
        write_csv(out / "power.csv", curve.rows())
        write_json(out / "power.json", {"config": config.to_dict(),
                                        "grid": curve.grid.tolist(), "rows": curve.rows()})
        outputs.update(csv=str(out / "power.csv"), json=str(out / "power.json"))
        for row in curve.rows():
            log.info("%s %s=%.3f rate=%.3f", row["method"], args.target,
                     row["beta1"] if args.target == "beta" else row["gamma1"],
                     row["rejection_rate"])
    else:
        report = run_size_experiment(config, workers)
        write_csv(out / "size.csv", report.rows())
        write_json(out / "size.json", report.to_json())
        outputs.update(csv=str(out / "size.csv"), json=str(out / "size.json"))
        for name, m in report.methods.items():
            path = out / f"tstats_{name}.csv"
            write_csv(path, [{"t_stat": float(t)} for t in m.t_stats])
            outputs[f"tstats_{name}"] = str(path)
        for row in report.rows():
            print(f"{row['method']:>10}  size={row['rejection_rate']:.3f}  "
                  f"(mc s.e. {row['mc_se']:.3f}, failures {row['failures']})")
    manifest = RunManifest(
        command="simulate", config={**vars(args), "resolved": config.to_dict(),
                                    "calibration": calibration},
        seed=args.seed, version=__version__,
        duration_seconds=time.perf_counter() - start,
        outputs={k: {"path": v, "sha256": _digest(Path(v))} for k, v in outputs.items()})
    manifest.config.pop("func", None)
    manifest.write(out / "manifest.json")
    return EXIT_OK


# -------------------------------------------------------------------- test

def _read_sample(path: str, target: str, predictor: str, controls: str | None,
                 lag: bool) -> RegressionSample:
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as exc:
        raise ConfigError(f"--data: cannot read {path}: {exc}") from None
    for flag, col in (("--target", target), ("--predictor", predictor)):
        if col not in df.columns:
            raise ConfigError(f"{flag}: column {col!r} not found in {path}")
    if controls:
        ctrl = [c.strip() for c in controls.split(",") if c.strip()]
        missing = [c for c in ctrl if c not in df.columns]
        if missing:
            raise ConfigError(f"--controls: columns {missing} not found in {path}")
    else:
        numeric = df.select_dtypes(include=[np.number]).columns
        ctrl = [c for c in numeric if c not in (target, predictor)]
    names = [predictor] + ctrl
    y = df[target].to_numpy(dtype=float)
    W = df[names].to_numpy(dtype=float)
    if lag:
        y, W = y[1:], W[:-1]
    ok = np.isfinite(y) & np.all(np.isfinite(W), axis=1)
    if not ok.all():
        log.warning("dropping %d incomplete rows", int((~ok).sum()))
    return RegressionSample(y[ok], W[ok], names)


def cmd_test(args) -> int:
    start = time.perf_counter()
    _check_alpha(args.alpha)
    ivx = _ivx(args)
    tuning = _tuning(args)
    sample = _read_sample(args.data, args.target, args.predictor, args.controls, args.lag)
    dl = DebiasedLasso(sample, tuning, ivx)
    res = dl.test(0, METHOD_NAMES[args.method], args.theta0, args.alpha)
    print(f"method     {res.method}\n"
          f"predictor  {args.predictor}\n"
          f"estimate   {res.estimate:.6g}\n"
          f"std.err.   {res.stderr:.6g}\n"
          f"t-stat     {res.t_stat:.4f}\n"
          f"p-value    {res.p_value:.4g}\n"
          f"{100 * (1 - args.alpha):g}% CI     [{res.ci[0]:.6g}, {res.ci[1]:.6g}]\n"
          f"decision   {'reject' if res.reject else 'do not reject'} H0: theta = {args.theta0:g}")
    if args.out:
        out = Path(args.out)
        payload = {**res.to_dict(), "n": sample.n, "p": sample.p}
        write_json(out, payload)
        manifest = RunManifest(command="test", config={k: v for k, v in vars(args).items()
                                                       if k != "func"},
                               seed=None, version=__version__,
                               duration_seconds=time.perf_counter() - start,
                               outputs={"json": {"path": str(out), "sha256": _digest(out)}})
        manifest.write(out.with_name(out.stem + ".manifest.json"))
    return EXIT_OK


# --------------------------------------------------------------- empirical

BUILDERS = {"return-ep": build_return_ep_sample,
            "inflation-unrate": build_inflation_unrate_sample}


def _periods(app: str, text: str | None) -> list:
    if not text:
        return list(PERIODS[app])
    out = []
    for item in text.split(","):
        item = item.strip()
        if ":" in item:
            a, b = item.split(":", 1)
            try:
                np.datetime64(a, "M"), np.datetime64(b, "M")
            except ValueError:
                raise ConfigError(f"--periods: bad range {item!r}, use YYYY-MM:YYYY-MM") from None
            out.append((a, b))
        elif item in PERIODS[app]:
            out.append(item)
        else:
            raise ConfigError(f"--periods: unknown period {item!r} for {app}; "
                              f"known: {', '.join(PERIODS[app])} or YYYY-MM:YYYY-MM")
    return out


def cmd_empirical(args) -> int:
    start = time.perf_counter()
    _check_alpha(args.alpha)
    ivx = _ivx(args)
    tuning = _tuning(args)
    periods = _periods(args.app, args.periods)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods or any(m not in METHOD_NAMES for m in methods):
        raise ConfigError("--methods must be drawn from xdlasso,dlasso")
    dataset = load_fred_md(args.fred)
    out = Path(args.out)
    rows = []
    for period in periods:
        emp = BUILDERS[args.app](dataset, period, max_missing_share=args.max_missing)
        label = period if isinstance(period, str) else f"{period[0]}:{period[1]}"
        dl = DebiasedLasso(emp.sample, tuning, ivx)
        for m in methods:
            res = dl.test(0, METHOD_NAMES[m], 0.0, args.alpha)
            rows.append({"period": label, "start": emp.period[0], "end": emp.period[1],
                         "method": res.method, "predictor": emp.predictor,
                         "estimate": res.estimate, "stderr": res.stderr,
                         "t_stat": res.t_stat, "p_value": res.p_value,
                         "stars": stars(res.p_value), "n": emp.sample.n, "p": emp.sample.p,
                         "dropped_rows": emp.dropped_rows,
                         "dropped_columns": len(emp.dropped_columns),
                         "lambda": res.lam, "mu": res.mu})
            print(f"{label:>24} {res.method:>8}  {res.estimate:8.3f}{stars(res.p_value):<3} "
                  f"({res.stderr:.3f})  n={emp.sample.n} p={emp.sample.p}")
    diag = persistence_table(dataset, args.app, periods)
    write_csv(out / f"{args.app}_estimates.csv", rows)
    write_csv(out / f"{args.app}_persistence.csv", diag)
    outputs = {"estimates": out / f"{args.app}_estimates.csv",
               "persistence": out / f"{args.app}_persistence.csv"}
    manifest = RunManifest(command="empirical",
                           config={k: v for k, v in vars(args).items() if k != "func"},
                           seed=None, version=__version__,
                           duration_seconds=time.perf_counter() - start,
                           outputs={k: {"path": str(v), "sha256": _digest(v)}
                                    for k, v in outputs.items()})
    manifest.write(out / f"{args.app}_manifest.json")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xdlasso", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo size or power experiment")
    p.add_argument("--dgp", choices=["iid", "ar1"], default="iid")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--px", type=int, default=150)
    p.add_argument("--pz", type=int, default=300)
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=20240501)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--target", choices=["beta", "gamma"], default="beta",
                   help="test the first unit-root (beta) or stationary (gamma) coefficient")
    p.add_argument("--coef-grid", help="comma-separated values of the tested coefficient; "
                                       "runs a power experiment")
    p.add_argument("--methods", default=",".join(ALL_METHODS))
    p.add_argument("--pilot-reps", type=int, default=500,
                   help="pilot replications when calibrated constants are not given")
    p.add_argument("--threads", type=int)
    p.add_argument("--out", default="xdlasso-out")
    _add_tuning_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("test", help="test one coefficient in a CSV data set")
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True, help="outcome column")
    p.add_argument("--predictor", required=True, help="regressor of interest")
    p.add_argument("--controls", help="comma-separated control columns (default: all other "
                                      "numeric columns)")
    p.add_argument("--lag", action="store_true",
                   help="lag regressors one row (otherwise rows are taken as already aligned)")
    p.add_argument("--theta0", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--method", choices=sorted(METHOD_NAMES), default="xdlasso")
    p.add_argument("--out", help="JSON output path")
    _add_tuning_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("empirical", help="FRED-MD applications")
    p.add_argument("--fred", required=True)
    p.add_argument("--app", choices=sorted(BUILDERS), required=True)
    p.add_argument("--periods", help="comma-separated period names or YYYY-MM:YYYY-MM ranges")
    p.add_argument("--methods", default="xdlasso,dlasso")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--max-missing", type=float, default=0.05,
                   help="drop control columns with a larger missing share in the window")
    p.add_argument("--out", default="xdlasso-out")
    _add_tuning_flags(p)
    p.set_defaults(func=cmd_empirical)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except SingularScore as exc:
        print(f"singular score: {exc}. The auxiliary residual is orthogonal to the predictor; "
              "try a smaller mu or check for collinear columns.", file=sys.stderr)
        return EXIT_SINGULAR
    except (XDlassoError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
