"""Debiased LASSO t-tests for a single coefficient.

``DebiasedLasso`` runs the main standardized-LASSO regression once and then
builds score vectors for any coefficient:

* XDlasso: the score is the residual of an auxiliary LASSO of the standardized
  IVX instrument of ``w_j`` on the other regressors;
* Dlasso: the same auxiliary regression with ``w_j / sd_j`` as the target.

Both use the one-step correction

    theta_j = theta_j^S + sum(r * u_hat) / sum(r * w_j)
    se_j    = sqrt(sigma_u^2 * sum(r^2)) / |sum(r * w_j)|

where ``r`` is aligned with the lagged regressors (row t of ``W``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import RegressionSample, TuningConfig
from .exceptions import DomainError, RankDeficient, SingularScore
from .ivx import IvxConfig, column_instrument
from .lasso import CvReport, GramSolver, LassoFit, theoretical_lambda, theoretical_mu

SINGULAR_TOL = 1e-10

XDLASSO = "XDlasso"
DLASSO = "Dlasso"
IVX_ORACLE = "IVX-oracle"
OLS_ORACLE = "OLS-oracle"
IVX_SIMPLE = "IVX"


@dataclass(frozen=True)
class ScoreVector:
    r_hat: np.ndarray
    aux_fit: LassoFit
    target_kind: str
    target: np.ndarray
    cv: CvReport | None = None


@dataclass(frozen=True)
class InferenceResult:
    estimate: float
    stderr: float
    t_stat: float
    p_value: float
    ci: tuple[float, float]
    method: str
    slasso_estimate: float
    score_w_inner: float
    theta0: float = 0.0
    alpha: float = 0.05
    lam: float | None = None
    mu: float | None = None
    column: str | None = None

    @property
    def reject(self) -> bool:
        return abs(self.t_stat) > stats.norm.ppf(1.0 - self.alpha / 2.0)

    @property
    def ci_length(self) -> float:
        return self.ci[1] - self.ci[0]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "column": self.column,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "t_stat": self.t_stat,
            "p_value": self.p_value,
            "ci": list(self.ci),
            "alpha": self.alpha,
            "theta0": self.theta0,
            "reject": bool(self.reject),
            "slasso_estimate": self.slasso_estimate,
            "score_w_inner": self.score_w_inner,
            "lambda": self.lam,
            "mu": self.mu,
        }


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")


def t_test(estimate: float, stderr: float, theta0: float, alpha: float,
           **fields) -> InferenceResult:
    """Two-sided normal t-test and (1 - alpha) confidence interval."""
    _check_alpha(alpha)
    t = (estimate - theta0) / stderr
    z = stats.norm.ppf(1.0 - alpha / 2.0)
    return InferenceResult(
        estimate=float(estimate), stderr=float(stderr), t_stat=float(t),
        p_value=float(2.0 * stats.norm.sf(abs(t))),
        ci=(float(estimate - z * stderr), float(estimate + z * stderr)),
        theta0=float(theta0), alpha=float(alpha), **fields)


def debias(slasso_j: float, resid: np.ndarray, r_hat: np.ndarray, w_j: np.ndarray,
           sigma_u_sq: float, target: np.ndarray | None = None) -> tuple[float, float, float]:
    """One-step corrected estimate, its standard error and ``sum(r * w_j)``.

    With ``target`` given, a score that is numerically zero relative to the
    centered target (a perfect auxiliary fit) is also treated as singular.
    """
    rnorm = np.linalg.norm(r_hat)
    if target is not None and not rnorm > SINGULAR_TOL * np.linalg.norm(target - target.mean()):
        raise SingularScore("auxiliary regression fits the target exactly; the score vanishes")
    rw = float(r_hat @ w_j)
    if not abs(rw) > SINGULAR_TOL * rnorm * np.linalg.norm(w_j):
        raise SingularScore("score vector is orthogonal to the regressor of interest")
    est = slasso_j + float(r_hat @ resid) / rw
    se = np.sqrt(sigma_u_sq * float(r_hat @ r_hat)) / abs(rw)
    return est, float(se), rw


def debias_by_bias_term(sample: RegressionSample, j: int, fit: LassoFit,
                        r_hat: np.ndarray) -> float:
    """Same estimate written as a linear estimator minus its estimated shrinkage bias."""
    w_j = sample.W[:, j]
    rw = r_hat @ w_j
    others = np.delete(np.arange(sample.p), j)
    lin = (r_hat @ sample.y) / rw
    bias = (r_hat @ (sample.W[:, others] @ fit.coefficients[others])) / rw
    return float(lin - bias)


class DebiasedLasso:
    """Shared Step-1 fit plus per-coefficient XDlasso/Dlasso tests.

    Parameters
    ----------
    sample : RegressionSample
    tuning : TuningConfig
        Penalty rules for the main (lambda) and auxiliary (mu) regressions.
    ivx : IvxConfig
        Instrument constants; ``tau`` also enters the calibrated rate for mu.
    """

    def __init__(self, sample: RegressionSample, tuning: TuningConfig = TuningConfig(),
                 ivx: IvxConfig = IvxConfig()):
        self.sample = sample
        self.tuning = tuning
        self.ivx = ivx
        needs_cv = tuning.lambda_rule == "cv" or tuning.mu_rule == "cv"
        self.solver = GramSolver(sample.W, tuning.cv_folds if needs_cv else None,
                                 grid_size=tuning.lambda_grid_size,
                                 grid_ratio=tuning.grid_ratio)
        self._main: LassoFit | None = None
        self.main_cv: CvReport | None = None

    @property
    def main_fit(self) -> LassoFit:
        """Step 1: standardized LASSO of y on all regressors."""
        if self._main is None:
            s, t = self.sample, self.tuning
            cols = self.solver.cols_without(None)
            if t.lambda_rule == "cv":
                self.main_cv = self.solver.cv(s.y, cols)
                lam = self.main_cv.selected_lambda
            elif t.lambda_rule == "calibrated":
                lam = theoretical_lambda(s.n, s.p, t.r, t.lambda_value)
            else:
                lam = float(t.lambda_value)
            self._main = self.solver.fit(s.y, cols, lam)
        return self._main

    def _mu(self, kind: str, cols, target) -> tuple[float, CvReport | None]:
        t = self.tuning
        if t.mu_rule == "cv":
            rep = self.solver.cv(target, cols)
            return rep.selected_lambda, rep
        if t.mu_rule == "calibrated":
            c_mu = t.mu_value
            if kind == "standardized_regressor" and t.mu_value_dlasso is not None:
                c_mu = t.mu_value_dlasso
            return theoretical_mu(self.sample.n, self.sample.p, t.r, self.ivx.tau, c_mu), None
        return float(t.mu_value), None

    def target(self, j: int, kind: str) -> np.ndarray:
        w_j = self.sample.W[:, j]
        if kind == "ivx_standardized":
            return column_instrument(w_j, self.ivx)
        if kind == "standardized_regressor":
            return w_j / np.sqrt(np.mean((w_j - w_j.mean()) ** 2))
        raise DomainError(f"unknown target kind {kind!r}")

    def score(self, j: int, kind: str = "ivx_standardized", mu: float | None = None) -> ScoreVector:
        """Steps 2-3: auxiliary regression of the (instrumented) target on ``W_{-j}``."""
        if self.sample.p < 2:
            raise DomainError("auxiliary regression needs p >= 2")
        v = self.target(j, kind)
        cols = self.solver.cols_without(j)
        rep = None
        if mu is None:
            mu, rep = self._mu(kind, cols, v)
        if mu < 0:
            raise DomainError("mu must be nonnegative")
        aux = self.solver.fit(v, cols, mu)
        return ScoreVector(r_hat=aux.residuals, aux_fit=aux, target_kind=kind, target=v, cv=rep)

    def test(self, j: int, method: str = XDLASSO, theta0: float = 0.0,
             alpha: float = 0.05) -> InferenceResult:
        """Steps 4-5 for coefficient ``j`` (0-based index or column name)."""
        j = self.sample.column_index(j)
        kind = {XDLASSO: "ivx_standardized", DLASSO: "standardized_regressor"}.get(method)
        if kind is None:
            raise DomainError(f"unknown method {method!r}")
        main = self.main_fit
        sc = self.score(j, kind)
        est, se, rw = debias(main.coefficients[j], main.residuals, sc.r_hat,
                             self.sample.W[:, j], main.sigma_u_sq, sc.target)
        name = self.sample.column_names[j] if self.sample.column_names else None
        return t_test(est, se, theta0, alpha, method=method,
                      slasso_estimate=float(main.coefficients[j]), score_w_inner=rw,
                      lam=main.lam, mu=sc.aux_fit.lam, column=name)


def auxiliary_score(sample: RegressionSample, j: int, target_kind: str, mu: float,
                    ivx: IvxConfig = IvxConfig()) -> ScoreVector:
    dl = DebiasedLasso(sample, TuningConfig.fixed(0.0, mu), ivx)
    return dl.score(sample.column_index(j), target_kind, mu)


def xdlasso_test(sample: RegressionSample, j, theta0: float = 0.0, alpha: float = 0.05,
                 tuning: TuningConfig = TuningConfig(), ivx: IvxConfig = IvxConfig()
                 ) -> InferenceResult:
    return DebiasedLasso(sample, tuning, ivx).test(j, XDLASSO, theta0, alpha)


def dlasso_test(sample: RegressionSample, j, theta0: float = 0.0, alpha: float = 0.05,
                tuning: TuningConfig = TuningConfig()) -> InferenceResult:
    return DebiasedLasso(sample, tuning).test(j, DLASSO, theta0, alpha)


def _ols(X: np.ndarray, y: np.ndarray):
    if X.shape[1] >= X.shape[0]:
        raise RankDeficient("more regressors than observations")
    q, r = np.linalg.qr(X)
    d = np.abs(np.diag(r))
    if d.min() <= 1e-10 * max(d.max(), 1.0):
        raise RankDeficient("low-dimensional design is singular")
    beta = np.linalg.solve(r, q.T @ y)
    return beta, y - X @ beta, r


def _oracle_design(sample: RegressionSample, j: int, active_set) -> tuple[np.ndarray, list[int]]:
    others = [int(k) for k in active_set if int(k) != j]
    X = np.column_stack([np.ones(sample.n), sample.W[:, j], sample.W[:, others]])
    return X, others


def ivx_oracle_test(sample: RegressionSample, j: int, active_set=(), theta0: float = 0.0,
                    alpha: float = 0.05, ivx: IvxConfig = IvxConfig(),
                    method: str = IVX_ORACLE) -> InferenceResult:
    """IVX-type test in the low-dimensional regression on ``w_j`` and ``active_set``.

    The OLS fit replaces the main LASSO and the score is the OLS residual of the
    standardized instrument on the intercept and the active regressors.  With an
    empty active set this is the simple-regression IVX test.
    """
    j = sample.column_index(j)
    X, others = _oracle_design(sample, j, active_set)
    beta, resid, _ = _ols(X, sample.y)
    zt = column_instrument(sample.W[:, j], ivx)
    Z = np.delete(X, 1, axis=1)
    _, r_hat, _ = _ols(Z, zt)
    est, se, rw = debias(beta[1], resid, r_hat, sample.W[:, j], float(np.mean(resid ** 2)), zt)
    return t_test(est, se, theta0, alpha, method=method, slasso_estimate=float(beta[1]),
                  score_w_inner=rw)


def ols_oracle_test(sample: RegressionSample, j: int, active_set=(), theta0: float = 0.0,
                    alpha: float = 0.05) -> InferenceResult:
    """Classical homoskedastic OLS t-test in the low-dimensional regression."""
    j = sample.column_index(j)
    X, _ = _oracle_design(sample, j, active_set)
    beta, resid, r = _ols(X, sample.y)
    dof = X.shape[0] - X.shape[1]
    if dof <= 0:
        raise RankDeficient("no residual degrees of freedom")
    s2 = float(resid @ resid) / dof
    rinv = np.linalg.solve(r, np.eye(r.shape[0]))
    var = s2 * float(rinv[1] @ rinv[1])
    return t_test(float(beta[1]), np.sqrt(var), theta0, alpha, method=OLS_ORACLE,
                  slasso_estimate=float(beta[1]), score_w_inner=float("nan"))
