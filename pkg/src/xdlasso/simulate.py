"""Monte Carlo size and power experiments for predictive regressions.

The design mixes ``p_x`` unit-root and ``p_z`` stationary regressors.  The
stationary block ``v_t = (u_t, dX_t, Z_t)`` is Gaussian with covariance
``0.5**|i-j|`` except that ``Z`` is uncorrelated with ``u``; under the AR(1)
variant every component but ``u`` follows an AR(1) with coefficient 0.3.

Randomness: replication ``r`` draws from ``numpy.random.Generator(PCG64)``
seeded with ``SeedSequence([base_seed, r])``; standard normals come from
numpy's ziggurat sampler and are correlated through the Cholesky factor of the
covariance matrix.  Replications are therefore independent of execution order.
"""

from __future__ import annotations

import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import RegressionSample, TuningConfig
from .exceptions import DomainError, ExperimentAborted, XDlassoError
from .inference import (DLASSO, IVX_ORACLE, OLS_ORACLE, XDLASSO, DebiasedLasso,
                        ivx_oracle_test, ols_oracle_test)
from .ivx import IvxConfig
from .lasso import theoretical_lambda, theoretical_mu

log = logging.getLogger(__name__)

ALL_METHODS = (XDLASSO, DLASSO, IVX_ORACLE, OLS_ORACLE)


@dataclass(frozen=True)
class SimulationConfig:
    n: int = 300
    p_x: int = 150
    p_z: int = 300
    innovation: str = "iid"
    beta1: float = 0.0
    gamma1: float = 0.0
    target: str = "beta"
    replications: int = 2000
    base_seed: int = 20240501
    alpha: float = 0.05
    tuning: TuningConfig = field(default_factory=TuningConfig)
    ivx: IvxConfig = field(default_factory=IvxConfig)
    methods: tuple[str, ...] = ALL_METHODS
    ar_coef: float = 0.3
    burn_in: int = 200
    max_failure_rate: float = 0.01

    def __post_init__(self):
        if self.n < 50:
            raise DomainError("n must be at least 50")
        if self.p_x < 5 or self.p_z < 5:
            raise DomainError("p_x and p_z must be at least 5")
        if self.replications < 1:
            raise DomainError("replications must be >= 1")
        if self.innovation not in ("iid", "ar1"):
            raise DomainError("innovation must be 'iid' or 'ar1'")
        if self.target not in ("beta", "gamma"):
            raise DomainError("target must be 'beta' or 'gamma'")
        if not 0 < self.alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")
        if self.burn_in < 0:
            raise DomainError("burn_in must be nonnegative")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise DomainError(f"unknown methods {sorted(unknown)}")

    @property
    def p(self) -> int:
        return self.p_x + self.p_z

    @property
    def tested_index(self) -> int:
        return 0 if self.target == "beta" else self.p_x

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


def covariance_matrix(p_x: int, p_z: int) -> np.ndarray:
    """Covariance of ``(u, dX, Z)``: ``0.5**|i-j|`` with the ``u``-``Z`` entries zeroed."""
    dim = 1 + p_x + p_z
    idx = np.arange(dim)
    S = 0.5 ** np.abs(idx[:, None] - idx[None, :])
    S[0, 1 + p_x:] = 0.0
    S[1 + p_x:, 0] = 0.0
    return S


def true_coefficients(config: SimulationConfig) -> np.ndarray:
    beta = np.zeros(config.p_x)
    beta[0] = config.beta1
    beta[1:5] = 0.5 / math.sqrt(config.n)
    gamma = np.zeros(config.p_z)
    gamma[0] = config.gamma1
    gamma[1:3] = 0.5
    gamma[3:5] = 0.25
    return np.concatenate([beta, gamma])


@dataclass(frozen=True)
class SimulatedSample:
    sample: RegressionSample
    theta: np.ndarray
    active_set: np.ndarray


def _factor(config: SimulationConfig) -> np.ndarray:
    return np.linalg.cholesky(covariance_matrix(config.p_x, config.p_z))


def generate_dgp(config: SimulationConfig, replication_index: int,
                 chol: np.ndarray | None = None) -> SimulatedSample:
    """One simulated sample; deterministic in ``(base_seed, replication_index)``.

    ``X_0 = 0``.  For AR(1) innovations the recursion starts at zero and the
    first ``burn_in`` periods are discarded.
    """
    if chol is None:
        chol = _factor(config)
    n, px = config.n, config.p_x
    dim = chol.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence([config.base_seed, replication_index]))
    burn = config.burn_in if config.innovation == "ar1" else 0
    xi = rng.standard_normal((burn + n + 1, dim)) @ chol.T
    if config.innovation == "ar1":
        rho = np.full(dim, config.ar_coef)
        rho[0] = 0.0
        v = np.empty_like(xi)
        prev = np.zeros(dim)
        for t in range(xi.shape[0]):
            prev = rho * prev + xi[t]
            v[t] = prev
        v = v[burn:]
    else:
        v = xi
    u = v[1:, 0]
    X = np.zeros((n, px))
    X[1:] = np.cumsum(v[1:n, 1:1 + px], axis=0)
    Z = v[:n, 1 + px:]
    W = np.hstack([X, Z])
    theta = true_coefficients(config)
    y = W @ theta + u
    active = np.concatenate([np.arange(1, 5), px + np.arange(1, 5)])
    return SimulatedSample(RegressionSample(y, W), theta, active)


def _one_replication(config: SimulationConfig, rep: int, chol: np.ndarray) -> dict:
    sim = generate_dgp(config, rep, chol)
    j = config.tested_index
    theta0 = 0.0
    out: dict[str, dict] = {}
    dl = None
    for method in config.methods:
        try:
            if method in (XDLASSO, DLASSO):
                if dl is None:
                    dl = DebiasedLasso(sim.sample, config.tuning, config.ivx)
                res = dl.test(j, method, theta0, config.alpha)
            elif method == IVX_ORACLE:
                res = ivx_oracle_test(sim.sample, j, sim.active_set, theta0, config.alpha,
                                      config.ivx)
            else:
                res = ols_oracle_test(sim.sample, j, sim.active_set, theta0, config.alpha)
            out[method] = {"t": res.t_stat, "estimate": res.estimate, "stderr": res.stderr,
                           "ci_length": res.ci_length, "reject": res.reject,
                           "lambda": res.lam, "mu": res.mu}
        except XDlassoError as exc:
            out[method] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


def _run_chunk(args):
    config, reps = args
    chol = _factor(config)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return [(r, _one_replication(config, r, chol)) for r in reps]


def run_replications(config: SimulationConfig, workers: int = 1) -> list[dict]:
    """Per-replication results, ordered by replication index."""
    reps = list(range(config.replications))
    if workers <= 1:
        pairs = _run_chunk((config, reps))
    else:
        chunks = [(config, reps[i::workers]) for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            pairs = [p for chunk in ex.map(_run_chunk, chunks) for p in chunk]
    pairs.sort(key=lambda x: x[0])
    return [res for _, res in pairs]


@dataclass
class MethodSummary:
    method: str
    rejection_rate: float
    mc_se: float
    median_ci_length: float
    failures: int
    t_stats: np.ndarray
    estimates: np.ndarray
    stderrs: np.ndarray

    @property
    def n_ok(self) -> int:
        return int(self.t_stats.size)


@dataclass
class SizeReport:
    config: SimulationConfig
    methods: dict[str, MethodSummary]
    elapsed: float = 0.0

    def rate(self, method: str) -> float:
        return self.methods[method].rejection_rate

    def rows(self) -> list[dict]:
        c = self.config
        out = []
        for name, m in self.methods.items():
            out.append({
                "innovation": c.innovation, "n": c.n, "p_x": c.p_x, "p_z": c.p_z,
                "target": c.target, "beta1": c.beta1, "gamma1": c.gamma1,
                "tuning": c.tuning.lambda_rule, "method": name,
                "replications": c.replications, "ok": m.n_ok, "failures": m.failures,
                "rejection_rate": m.rejection_rate, "mc_se": m.mc_se,
                "median_ci_length": m.median_ci_length,
            })
        return out

    def to_json(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "rows": self.rows(),
            "t_stats": {k: v.t_stats.tolist() for k, v in self.methods.items()},
            "estimates": {k: v.estimates.tolist() for k, v in self.methods.items()},
            "stderrs": {k: v.stderrs.tolist() for k, v in self.methods.items()},
        }


def summarize(config: SimulationConfig, results: list[dict]) -> SizeReport:
    R = len(results)
    methods = {}
    for method in config.methods:
        ok = [r[method] for r in results if "error" not in r[method]]
        failures = R - len(ok)
        if failures > config.max_failure_rate * R:
            errors = sorted({r[method]["error"] for r in results if "error" in r[method]})
            raise ExperimentAborted(
                f"{method}: {failures}/{R} replications failed; e.g. {errors[:3]}")
        if failures:
            log.warning("%s: %d of %d replications failed and were excluded", method, failures, R)
        t = np.array([o["t"] for o in ok])
        rate = float(np.mean([o["reject"] for o in ok])) if ok else float("nan")
        methods[method] = MethodSummary(
            method=method, rejection_rate=rate,
            mc_se=float(math.sqrt(rate * (1 - rate) / len(ok))) if ok else float("nan"),
            median_ci_length=float(np.median([o["ci_length"] for o in ok])) if ok else float("nan"),
            failures=failures, t_stats=t,
            estimates=np.array([o["estimate"] for o in ok]),
            stderrs=np.array([o["stderr"] for o in ok]))
    return SizeReport(config=config, methods=methods)


def run_size_experiment(config: SimulationConfig, workers: int = 1) -> SizeReport:
    """Rejection rates of H0: theta_j = 0 for the tested coefficient."""
    start = time.perf_counter()
    report = summarize(config, run_replications(config, workers))
    report.elapsed = time.perf_counter() - start
    return report


@dataclass
class PowerCurve:
    config: SimulationConfig
    grid: np.ndarray
    reports: list[SizeReport]

    def rates(self, method: str = XDLASSO) -> np.ndarray:
        return np.array([r.rate(method) for r in self.reports])

    def rows(self) -> list[dict]:
        return [row for r in self.reports for row in r.rows()]


def run_power_experiment(config: SimulationConfig, coefficient_grid, workers: int = 1
                         ) -> PowerCurve:
    """Rejection rates as the tested coefficient moves over ``coefficient_grid``.

    The other of ``beta1``/``gamma1`` is held at zero; replication seeds do not
    depend on the coefficient, so the zero point reproduces the size experiment.
    """
    grid = np.asarray(coefficient_grid, dtype=float)
    if np.any(grid < 0) or np.any(grid > 0.5):
        raise DomainError("coefficient grid must lie in [0, 0.5]")
    reports = []
    for value in grid:
        if config.target == "beta":
            cfg = replace(config, beta1=float(value), gamma1=0.0)
        else:
            cfg = replace(config, gamma1=float(value), beta1=0.0)
        reports.append(run_size_experiment(cfg, workers))
    return PowerCurve(config=config, grid=grid, reports=reports)


@dataclass(frozen=True)
class CalibratedConstants:
    c_lambda: float
    c_mu: float
    c_mu_dlasso: float | None
    lambdas: np.ndarray
    mus: np.ndarray

    def tuning(self, **kw) -> TuningConfig:
        return TuningConfig.calibrated(self.c_lambda, self.c_mu, self.c_mu_dlasso, **kw)


def pilot_config(innovation: str = "iid", target: str = "beta", replications: int = 500,
                 base_seed: int = 777, **kw) -> SimulationConfig:
    """Pilot design used for calibration: n=400, (p_x, p_z) = (100, 150)."""
    return SimulationConfig(n=400, p_x=100, p_z=150, innovation=innovation, target=target,
                            replications=replications, base_seed=base_seed, **kw)


def constants_from_penalties(lambdas, mus, n: int, p: int, r: float = 1.0,
                             tau: float = 0.5) -> tuple[float, float]:
    """Median rate constants implied by cross-validated penalties."""
    lam_rate = theoretical_lambda(n, p, r, 1.0)
    mu_rate = theoretical_mu(n, p, r, tau, 1.0)
    return (float(np.median(np.asarray(lambdas) / lam_rate)),
            float(np.median(np.asarray(mus) / mu_rate)))


def _pilot_chunk(args):
    config, reps, with_dlasso = args
    chol = _factor(config)
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for rep in reps:
            sim = generate_dgp(config, rep, chol)
            dl = DebiasedLasso(sim.sample, TuningConfig.cv(**_cv_kwargs(config.tuning)),
                               config.ivx)
            j = config.tested_index
            lam = dl.main_fit.lam
            mu = dl.score(j, "ivx_standardized").aux_fit.lam
            mu_d = dl.score(j, "standardized_regressor").aux_fit.lam if with_dlasso else np.nan
            out.append((rep, lam, mu, mu_d))
    return out


def _cv_kwargs(t: TuningConfig) -> dict:
    return {"r": t.r, "cv_folds": t.cv_folds, "lambda_grid_size": t.lambda_grid_size,
            "grid_ratio": t.grid_ratio}


def calibrate_tuning_constants(config: SimulationConfig | None = None, *, with_dlasso: bool = True,
                               workers: int = 1) -> CalibratedConstants:
    """Median rate constants over pilot replications tuned by block CV."""
    if config is None:
        config = pilot_config()
    reps = list(range(config.replications))
    if workers <= 1:
        rows = _pilot_chunk((config, reps, with_dlasso))
    else:
        chunks = [(config, reps[i::workers], with_dlasso) for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = [row for chunk in ex.map(_pilot_chunk, chunks) for row in chunk]
    rows.sort(key=lambda x: x[0])
    lambdas = np.array([r[1] for r in rows])
    mus = np.array([r[2] for r in rows])
    r, tau = config.tuning.r, config.ivx.tau
    c_lam, c_mu = constants_from_penalties(lambdas, mus, config.n, config.p, r, tau)
    c_mu_d = None
    if with_dlasso:
        c_mu_d = constants_from_penalties(lambdas, [r_[3] for r_ in rows], config.n, config.p,
                                          r, tau)[1]
    return CalibratedConstants(c_lambda=c_lam, c_mu=c_mu, c_mu_dlasso=c_mu_d,
                               lambdas=lambdas, mus=mus)


def save_report_json(report: SizeReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json(), fh, indent=2, default=float)
