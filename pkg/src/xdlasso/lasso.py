"""Standardized LASSO by coordinate descent, lambda paths and block CV.

The objective is

    (1/n) * sum_t (y_t - a - W_{t-1}' theta)^2 + lam * sum_j sd_j * |theta_j|

with an unpenalized intercept ``a``.  Internally the problem is solved on
centered, sd-scaled columns where the penalty is uniform; with the ``1/n``
loss the soft-threshold level of a coordinate update is ``lam / 2``.

All solvers work from second-moment (Gram) matrices, so that the folds of a
block cross-validation and the auxiliary regressions of the inference step can
share one pass over the data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np

from .core import SD_TOL, RegressionSample, standardize_design
from .exceptions import DegenerateColumn, DomainError, InsufficientData, NotConvergedWarning

TOL = 1e-7
MAX_ITER = 100_000
PIVOT_TOL = 1e-10
REFRESH_EVERY = 16


def soft_threshold(z: float, gamma: float) -> float:
    if gamma < 0:
        raise DomainError("gamma must be nonnegative")
    return math.copysign(max(abs(z) - gamma, 0.0), z) if z != 0 else 0.0


@numba.njit(cache=True)
def _sweep(C, g, b, thr, idx, m):
    maxd = 0.0
    p = C.shape[0]
    for ii in range(m):
        k = idx[ii]
        ckk = C[k, k]
        if ckk <= 0.0:
            continue
        bk = b[k]
        z = g[k] + ckk * bk
        if z > thr:
            nb = (z - thr) / ckk
        elif z < -thr:
            nb = (z + thr) / ckk
        else:
            nb = 0.0
        d = nb - bk
        if d != 0.0:
            row = C[k]
            for l in range(p):
                g[l] -= d * row[l]
            b[k] = nb
            ad = abs(d)
            if ad > maxd:
                maxd = ad
    return maxd


@numba.njit(cache=True)
def _chol_append(L, k, C, A, j):
    """Extend the Cholesky factor of C[A[:k], A[:k]] by column ``j``; False if singular."""
    w = np.empty(k)
    for i in range(k):
        s = C[A[i], j]
        for q in range(i):
            s -= L[i, q] * w[q]
        w[i] = s / L[i, i]
    piv = C[j, j]
    for i in range(k):
        piv -= w[i] * w[i]
    if piv <= PIVOT_TOL * C[j, j]:
        return False
    for i in range(k):
        L[k, i] = w[i]
    L[k, k] = np.sqrt(piv)
    return True


@numba.njit(cache=True)
def _chol_solve(L, k, rhs):
    x = np.empty(k)
    for i in range(k):
        s = rhs[i]
        for q in range(i):
            s -= L[i, q] * x[q]
        x[i] = s / L[i, i]
    for i in range(k - 1, -1, -1):
        s = x[i]
        for q in range(i + 1, k):
            s -= L[q, i] * x[q]
        x[i] = s / L[i, i]
    return x


@numba.njit(cache=True)
def _homotopy(C, c, lambdas, out_B):
    """Exact piecewise-linear LASSO path (LARS with the lasso modification).

    Tracks the support while the threshold ``lam / 2`` decreases through
    ``lambdas`` (assumed nonincreasing) and records the solution at every grid
    value.  Returns how many grid values were filled before the path either
    ended or hit a numerically singular support.
    """
    p = C.shape[0]
    nl = lambdas.shape[0]
    b = np.zeros(p)
    g = c.copy()
    L = np.zeros((p, p))
    A = np.empty(p, dtype=np.int64)
    sgn = np.empty(p)
    inA = np.zeros(p, dtype=np.bool_)
    k = 0
    thr = 0.0
    jmax = -1
    for j in range(p):
        if C[j, j] > 0.0 and abs(c[j]) > thr:
            thr = abs(c[j])
            jmax = j
    li = 0
    while li < nl and 0.5 * lambdas[li] >= thr:
        out_B[li] = b
        li += 1
    if jmax < 0:
        while li < nl:
            out_B[li] = b
            li += 1
        return nl
    if not _chol_append(L, 0, C, A, jmax):
        return li
    A[0] = jmax
    sgn[0] = np.sign(c[jmax])
    inA[jmax] = True
    k = 1
    last_drop = -1
    events = 0
    while li < nl:
        events += 1
        if events > 20 * p + 100:
            return li
        d = _chol_solve(L, k, sgn[:k])
        a = np.zeros(p)
        for i in range(k):
            row = C[A[i]]
            di = d[i]
            for l in range(p):
                a[l] += di * row[l]
        target = 0.5 * lambdas[li]
        step = thr - target
        kind = 0
        who = -1
        for l in range(p):
            if inA[l] or C[l, l] <= 0.0 or l == last_drop:
                continue
            den = 1.0 - a[l]
            if den > 1e-12:
                s = (thr - g[l]) / den
                if 0.0 <= s < step:
                    step = s
                    kind = 1
                    who = l
            den = 1.0 + a[l]
            if den > 1e-12:
                s = (thr + g[l]) / den
                if 0.0 <= s < step:
                    step = s
                    kind = 1
                    who = l
        for i in range(k):
            if d[i] != 0.0:
                s = -b[A[i]] / d[i]
                if 0.0 < s < step:
                    step = s
                    kind = 2
                    who = i
        for i in range(k):
            b[A[i]] += step * d[i]
        thr -= step
        if events % REFRESH_EVERY == 0:
            # recompute correlations from the coefficients to limit drift
            for l in range(p):
                g[l] = c[l]
            for i in range(k):
                row = C[A[i]]
                bi = b[A[i]]
                for l in range(p):
                    g[l] -= bi * row[l]
        else:
            for l in range(p):
                g[l] -= step * a[l]
        if kind == 0:
            out_B[li] = b
            li += 1
            last_drop = -1
        elif kind == 1:
            if not _chol_append(L, k, C, A, who):
                return li
            A[k] = who
            sgn[k] = 1.0 if g[who] > 0 else -1.0
            inA[who] = True
            k += 1
            last_drop = -1
        else:
            j = A[who]
            b[j] = 0.0
            inA[j] = False
            for i in range(who, k - 1):
                A[i] = A[i + 1]
                sgn[i] = sgn[i + 1]
            k -= 1
            last_drop = j
            for i in range(k):
                for q in range(i + 1):
                    L[i, q] = 0.0
            kk = 0
            for i in range(k):
                if not _chol_append(L, kk, C, A, A[i]):
                    return li
                kk += 1
            if k == 0:
                # support emptied: restart from the largest correlation
                best = -1.0
                jn = -1
                for l in range(p):
                    if C[l, l] > 0.0 and abs(g[l]) > best and l != last_drop:
                        best = abs(g[l])
                        jn = l
                if jn < 0 or not _chol_append(L, 0, C, A, jn):
                    return li
                A[0] = jn
                sgn[0] = np.sign(g[jn])
                inA[jn] = True
                k = 1
    return li


@numba.njit(cache=True)
def _cd_path(C, c, lambdas, b0, starts, nstarts, tol, max_iter, out_B, out_iter, out_conv):
    """Cyclic coordinate descent over a penalty grid.

    ``C`` is the scaled Gram matrix (1/n) X'X, ``c`` = (1/n) X'y.  Grid value
    ``li < nstarts`` is started from ``starts[li]``; later values are warm
    started from the previous solution (``b0`` for the first).  Each solve
    alternates a full sweep with active-set sweeps and stops once a full sweep
    changes no coefficient by more than ``tol``.
    """
    p = C.shape[0]
    b = b0.copy()
    g = c - C @ b
    full = np.arange(p)
    act = np.empty(p, dtype=np.int64)
    for li in range(lambdas.shape[0]):
        if li < nstarts:
            for l in range(p):
                b[l] = starts[li, l]
                g[l] = c[l]
            for q in range(p):
                if b[q] != 0.0:
                    row = C[q]
                    bq = b[q]
                    for l in range(p):
                        g[l] -= bq * row[l]
        thr = 0.5 * lambdas[li]
        it = 0
        conv = False
        while it < max_iter:
            maxd = _sweep(C, g, b, thr, full, p)
            it += 1
            if maxd < tol:
                conv = True
                break
            m = 0
            for q in range(p):
                if b[q] != 0.0:
                    act[m] = q
                    m += 1
            while it < max_iter:
                maxd = _sweep(C, g, b, thr, act, m)
                it += 1
                if maxd < tol:
                    break
        out_B[li] = b
        out_iter[li] = it
        out_conv[li] = conv


def _solve_path(C, c, lambdas, tol=TOL, max_iter=MAX_ITER, b0=None):
    """Solutions over ``lambdas``: homotopy warm starts polished by coordinate descent."""
    lambdas = np.ascontiguousarray(lambdas, dtype=float)
    C = np.ascontiguousarray(C)
    c = np.ascontiguousarray(c)
    p = C.shape[0]
    nl = lambdas.shape[0]
    B = np.empty((nl, p))
    iters = np.empty(nl, dtype=np.int64)
    conv = np.empty(nl, dtype=np.bool_)
    starts = np.zeros((nl, p))
    nstarts = 0
    if b0 is None:
        b0 = np.zeros(p)
        if nl and np.all(np.diff(lambdas) <= 0):
            nstarts = _homotopy(C, c, lambdas, starts)
    _cd_path(C, c, lambdas, np.asarray(b0, dtype=float), starts, nstarts, tol, max_iter,
             B, iters, conv)
    return B, iters, conv


@dataclass(frozen=True)
class LassoFit:
    intercept: float
    coefficients: np.ndarray
    residuals: np.ndarray
    sigma_u_sq: float
    lam: float
    iterations: int
    converged: bool

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.coefficients)


@dataclass(frozen=True)
class CvReport:
    grid: np.ndarray
    fold_errors: np.ndarray
    selected_lambda: float

    @property
    def mean_errors(self) -> np.ndarray:
        return self.fold_errors.mean(axis=1)

    @property
    def selected_index(self) -> int:
        return int(np.flatnonzero(self.grid == self.selected_lambda)[0])


def objective(sample: RegressionSample, intercept: float, coefficients, lam: float) -> float:
    """Penalized Slasso objective at ``(intercept, coefficients)``."""
    sds = standardize_design(sample.W).sds
    coefficients = np.asarray(coefficients, dtype=float)
    r = sample.y - intercept - sample.W @ coefficients
    return float(np.mean(r * r) + lam * np.sum(sds * np.abs(coefficients)))


def _scaled_problem(sample: RegressionSample):
    design = standardize_design(sample.W)
    X = design.transform(sample.W)
    yc = sample.y - sample.y.mean()
    n = sample.n
    return design, X, yc, (X.T @ X) / n, (X.T @ yc) / n


def _finish(y, W, means, sds, b, lam, iters, conv) -> LassoFit:
    theta = b / sds
    intercept = float(y.mean() - means @ theta)
    resid = y - intercept - W @ theta
    return LassoFit(intercept=intercept, coefficients=theta, residuals=resid,
                    sigma_u_sq=float(np.mean(resid * resid)), lam=float(lam),
                    iterations=int(iters), converged=bool(conv))


def _warn_unconverged(conv, lam):
    if not conv:
        warnings.warn(f"coordinate descent did not converge at lambda={lam:.4g}",
                      NotConvergedWarning, stacklevel=3)


def slasso_fit(sample: RegressionSample, lam: float, *, tol: float = TOL,
               max_iter: int = MAX_ITER) -> LassoFit:
    """Standardized LASSO fit at a single penalty, started from zero."""
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    design, _, _, C, c = _scaled_problem(sample)
    B, iters, conv = _solve_path(C, c, [lam], tol, max_iter)
    _warn_unconverged(conv[0], lam)
    return _finish(sample.y, sample.W, design.means, design.sds, B[0], lam, iters[0], conv[0])


def slasso_path(sample: RegressionSample, lambdas, *, tol: float = TOL,
                max_iter: int = MAX_ITER) -> list[LassoFit]:
    """Warm-started fits along ``lambdas`` (solved in the given order)."""
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(lambdas < 0):
        raise DomainError("lambda must be nonnegative")
    design, _, _, C, c = _scaled_problem(sample)
    B, iters, conv = _solve_path(C, c, lambdas, tol, max_iter)
    fits = []
    for i, lam in enumerate(lambdas):
        _warn_unconverged(conv[i], lam)
        fits.append(_finish(sample.y, sample.W, design.means, design.sds, B[i], lam,
                            iters[i], conv[i]))
    return fits


def lambda_max(sample: RegressionSample) -> float:
    """Smallest penalty at which every slope is exactly zero."""
    _, _, _, _, c = _scaled_problem(sample)
    return float(2.0 * np.max(np.abs(c)))


def default_grid_ratio(n: int, p: int) -> float:
    return 1e-4 if n > p else 1e-2


def geometric_grid(lam_max: float, size: int = 100, ratio: float = 1e-4) -> np.ndarray:
    if lam_max <= 0:
        return np.zeros(1)
    if size == 1:
        return np.array([lam_max])
    return lam_max * np.geomspace(1.0, ratio, size)


def lambda_path(sample: RegressionSample, size: int = 100,
                ratio: float | None = None) -> np.ndarray:
    """Decreasing geometric grid from ``lambda_max`` to ``lambda_max * ratio``.

    ``ratio`` defaults to 1e-4 when n > p and 1e-2 otherwise.
    """
    if ratio is None:
        ratio = default_grid_ratio(sample.n, sample.p)
    return geometric_grid(lambda_max(sample), size, ratio)


def block_folds(n: int, k: int) -> list[tuple[int, int]]:
    """Contiguous chronological blocks ``[start, stop)`` with sizes differing by at most one."""
    if k < 2:
        raise DomainError("need at least two folds")
    if n < 2 * k:
        raise InsufficientData(f"n={n} is too small for {k} folds")
    edges = np.floor(np.arange(k + 1) * n / k).astype(int)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(k)]


class DesignMoments:
    """Cached block-wise second moments of a design for fast refits.

    Columns are shifted by their full-sample means before any products are
    accumulated, which keeps the moment-based covariances well conditioned.
    A block structure is fixed at construction; ``k=None`` keeps only the
    full-sample moments.
    """

    def __init__(self, W: np.ndarray, k: int | None = None):
        W = np.asarray(W, dtype=float)
        self.n, self.p = W.shape
        self.shift = W.mean(axis=0)
        self.W0 = W - self.shift
        self.S = self.W0.T @ self.W0
        self.s = self.W0.sum(axis=0)
        self.folds = block_folds(self.n, k) if k is not None else []
        self.block_S = [self.W0[a:b].T @ self.W0[a:b] for a, b in self.folds]
        self.block_s = [self.W0[a:b].sum(axis=0) for a, b in self.folds]

    def _moments(self, fold: int | None):
        if fold is None:
            return self.n, self.S, self.s
        a, b = self.folds[fold]
        m = self.n - (b - a)
        if m < 2:
            raise InsufficientData("training complement has fewer than two rows")
        return m, self.S - self.block_S[fold], self.s - self.block_s[fold]

    def problem(self, v: np.ndarray, cols: np.ndarray, fold: int | None = None):
        """Scaled Gram, scaled cross-moment and scaling for target ``v`` on ``cols``.

        Returns ``(C, c, means, sds, vbar)`` where means are in the shifted
        coordinates.  Columns that are constant on the training rows get a zero
        Gram row so their coefficient stays at zero.
        """
        m, S, s = self._moments(fold)
        if fold is None:
            Wt, vt = self.W0, v
        else:
            a, b = self.folds[fold]
            Wt = np.concatenate([self.W0[:a], self.W0[b:]])
            vt = np.concatenate([v[:a], v[b:]])
        mean = s[cols] / m
        cov = S[np.ix_(cols, cols)] / m - np.outer(mean, mean)
        sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        ok = sd > SD_TOL
        inv = np.where(ok, 1.0 / np.where(ok, sd, 1.0), 0.0)
        vbar = vt.mean()
        cross = (Wt[:, cols].T @ (vt - vbar)) / m
        C = cov * inv[:, None] * inv[None, :]
        c = cross * inv
        sd = np.where(ok, sd, 1.0)
        return C, c, mean, sd, vbar, ok


def _lambda_max_from(c) -> float:
    return float(2.0 * np.max(np.abs(c))) if c.size else 0.0


def _cv_errors(mom: DesignMoments, v: np.ndarray, cols: np.ndarray, grid: np.ndarray,
               tol=TOL, max_iter=MAX_ITER) -> np.ndarray:
    errs = np.empty((grid.shape[0], len(mom.folds)))
    for f, (a, b) in enumerate(mom.folds):
        C, c, mean, sd, vbar, ok = mom.problem(v, cols, f)
        B, _, _ = _solve_path(C, c, grid, tol, max_iter)
        theta = B * np.where(ok, 1.0 / sd, 0.0)
        Xv = mom.W0[a:b][:, cols] - mean
        pred = vbar + Xv @ theta.T
        errs[:, f] = np.mean((v[a:b, None] - pred) ** 2, axis=0)
    return errs


def _select(grid: np.ndarray, errs: np.ndarray) -> float:
    # np.argmin keeps the first minimizer, i.e. the largest penalty on ties
    return float(grid[int(np.argmin(errs.mean(axis=1)))])


def block_cv(sample: RegressionSample, grid, k: int = 10) -> CvReport:
    """Block k-fold cross-validation of the penalty over ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty vector")
    mom = DesignMoments(sample.W, k)
    cols = np.arange(sample.p)
    errs = _cv_errors(mom, sample.y, cols, grid)
    return CvReport(grid=grid, fold_errors=errs, selected_lambda=_select(grid, errs))


class GramSolver:
    """Fits for several targets and column subsets over one design.

    Used by the inference routines: the main regression, the auxiliary
    regressions and their cross-validations all reuse the cached moments.
    """

    def __init__(self, W: np.ndarray, k: int | None = None, *, tol: float = TOL,
                 max_iter: int = MAX_ITER, grid_size: int = 100,
                 grid_ratio: float | None = None):
        self.W = np.asarray(W, dtype=float)
        self.mom = DesignMoments(self.W, k)
        self.tol = tol
        self.max_iter = max_iter
        self.grid_size = grid_size
        n, p = self.W.shape
        self.grid_ratio = grid_ratio if grid_ratio is not None else default_grid_ratio(n, p)
        sds = np.sqrt(np.diag(self.mom.S) / n - (self.mom.s / n) ** 2)
        bad = np.flatnonzero(sds <= SD_TOL)
        if bad.size:
            raise DegenerateColumn(int(bad[0]), float(sds[bad[0]]))

    def cols_without(self, j: int | None) -> np.ndarray:
        cols = np.arange(self.W.shape[1])
        return cols if j is None else np.delete(cols, j)

    def grid(self, v: np.ndarray, cols: np.ndarray) -> np.ndarray:
        _, c, *_ = self.mom.problem(v, cols)
        return geometric_grid(_lambda_max_from(c), self.grid_size, self.grid_ratio)

    def cv(self, v: np.ndarray, cols: np.ndarray) -> CvReport:
        if not self.mom.folds:
            raise ValueError("solver was built without a fold structure")
        grid = self.grid(v, cols)
        errs = _cv_errors(self.mom, v, cols, grid, self.tol, self.max_iter)
        return CvReport(grid=grid, fold_errors=errs, selected_lambda=_select(grid, errs))

    def fit(self, v: np.ndarray, cols: np.ndarray, lam: float, path=None) -> LassoFit:
        """Fit at ``lam``; with ``path`` given, warm-start along its entries >= lam."""
        C, c, mean, sd, vbar, _ = self.mom.problem(v, cols)
        if path is not None:
            lambdas = np.append(path[path > lam], lam)
        else:
            lambdas = np.array([lam])
        B, iters, conv = _solve_path(C, c, lambdas, self.tol, self.max_iter)
        _warn_unconverged(conv[-1], lam)
        theta = B[-1] / sd
        Wc = self.W[:, cols]
        intercept = float(vbar - (mean + self.mom.shift[cols]) @ theta)
        resid = v - intercept - Wc @ theta
        return LassoFit(intercept=intercept, coefficients=theta, residuals=resid,
                        sigma_u_sq=float(np.mean(resid * resid)), lam=float(lam),
                        iterations=int(iters.sum()), converged=bool(conv[-1]))


def kkt_gap(sample: RegressionSample, fit: LassoFit) -> float:
    """Largest violation of the Slasso optimality conditions (0 at an exact optimum)."""
    design = standardize_design(sample.W)
    X = design.transform(sample.W)
    r = sample.y - fit.intercept - sample.W @ fit.coefficients
    grad = (2.0 / sample.n) * (X.T @ r)
    lam = fit.lam
    active = fit.coefficients != 0
    viol = np.where(active,
                    np.abs(grad - lam * np.sign(fit.coefficients)),
                    np.abs(grad) - lam)
    # intercept stationarity
    viol = np.append(viol, abs(2.0 * r.mean()))
    return float(max(viol.max(), 0.0))


def theoretical_lambda(n: int, p: int, r: float = 1.0, c_lambda: float = 1.0) -> float:
    """``c_lambda * (log p)^(3/2 + 1/(2r)) / sqrt(n)``."""
    if n <= 1 or p <= 1 or r <= 0 or c_lambda < 0:
        raise DomainError("need n > 1, p > 1, r > 0 and c_lambda >= 0")
    return c_lambda * math.log(p) ** (1.5 + 0.5 / r) / math.sqrt(n)


def theoretical_mu(n: int, p: int, r: float = 1.0, tau: float = 0.5,
                   c_mu: float = 1.0) -> float:
    """``c_mu * (log p)^(2 + 1/(2r)) / sqrt(n^min(tau, 1 - tau))``."""
    if not 0 < tau < 1:
        raise DomainError("tau must lie in (0, 1)")
    if n <= 1 or p <= 1 or r <= 0 or c_mu < 0:
        raise DomainError("need n > 1, p > 1, r > 0 and c_mu >= 0")
    return c_mu * math.log(p) ** (2.0 + 0.5 / r) / math.sqrt(n ** min(tau, 1.0 - tau))
