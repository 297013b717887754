"""Acceptance criteria, each run at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (collected in the pytest summary
section "acceptance criteria").  The Monte Carlo criteria are marked ``slow``;
on one core the whole module takes roughly an hour.  Set
``XDLASSO_ACCEPT_WORKERS`` to spread replications over processes and
``XDLASSO_FRED_MD`` to a FRED-MD CSV to run the empirical check.

Run standalone with ``python tests/test_acceptance.py`` or through pytest.
"""

import os
import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

from xdlasso.core import RegressionSample, TuningConfig
from xdlasso.inference import DLASSO, XDLASSO, DebiasedLasso, debias_by_bias_term
from xdlasso.ivx import IvxConfig, ivx_recursion, make_rho
from xdlasso.lasso import kkt_gap, lambda_max, slasso_fit
from xdlasso.simulate import (SimulationConfig, calibrate_tuning_constants, generate_dgp,
                              pilot_config, run_power_experiment, run_size_experiment)

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run
    ACCEPTANCE_LINES = []

WORKERS = int(os.environ.get("XDLASSO_ACCEPT_WORKERS", "1"))
R_SPOT = 500


def record(number, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


# ----------------------------------------------------------------- 1

def _grid_oracle(sample: RegressionSample, lam: float):
    """Minimize the profiled objective by successively refined Cartesian grids."""
    W, y, n = sample.W, sample.y, sample.n
    Wc = W - W.mean(0)
    yc = y - y.mean()
    sds = np.sqrt(np.mean(Wc ** 2, 0))
    C, c, yy = Wc.T @ Wc / n, Wc.T @ yc / n, yc @ yc / n

    def f(T):
        return yy - 2 * T @ c + np.einsum("ij,jk,ik->i", T, C, T) + lam * np.abs(T) @ sds

    ols = np.linalg.lstsq(Wc, yc, rcond=None)[0]
    # the weighted l1 norm of the optimum is bounded by that of OLS
    bound = np.sum(sds * np.abs(ols)) / sds * 1.05 + 1e-12
    axes = [np.union1d(np.linspace(-b, b, 41), [0.0]) for b in bound]
    step = 2 * bound / 40
    best = None
    for _ in range(9):
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(axes))
        vals = f(mesh)
        best = mesh[np.argmin(vals)]
        step = step / 10
        axes = []
        for j, b in enumerate(best):
            ax = b + step[j] * np.arange(-20, 21)
            if ax[0] <= 0 <= ax[-1]:
                ax = np.union1d(ax, [0.0])
            axes.append(ax)
    return f(best[None])[0], best


def test_criterion_1_solver_matches_grid_oracle():
    worst_gap = worst_kkt = -np.inf
    for seed in range(200):
        rng = np.random.default_rng([1, seed])
        n = int(rng.integers(8, 31))
        p = int(rng.integers(1, 4))
        W = rng.standard_normal((n, p)) * rng.uniform(0.3, 3, p) + rng.normal(0, 1, p)
        theta = rng.normal(0, 1, p) * (rng.random(p) < 0.7)
        y = rng.normal() + W @ theta + rng.standard_normal(n)
        s = RegressionSample(y, W)
        lam = float(rng.uniform(0.0, 1.1)) * lambda_max(s)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = slasso_fit(s, lam)
        mean_w = W.mean(0)
        obj_fit = np.mean((y - y.mean() - (W - mean_w) @ fit.coefficients) ** 2) + \
            lam * np.sum(np.sqrt(np.mean((W - mean_w) ** 2, 0)) * np.abs(fit.coefficients))
        obj_grid, _ = _grid_oracle(s, lam)
        worst_gap = max(worst_gap, obj_fit - obj_grid)
        worst_kkt = max(worst_kkt, kkt_gap(s, fit))
    ok = worst_gap <= 1e-8 and worst_kkt <= 1e-6
    record(1, ok, f"max objective gap {worst_gap:.2e} (<= 1e-8), max KKT gap "
                  f"{worst_kkt:.2e} (<= 1e-6) over 200 instances")
    assert ok


# ----------------------------------------------------------------- 2

def test_criterion_2_debiasing_identity():
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng([2, seed])
        cfg = SimulationConfig(n=int(rng.integers(60, 200)), p_x=int(rng.integers(5, 40)),
                               p_z=int(rng.integers(5, 60)), replications=1,
                               innovation=["iid", "ar1"][seed % 2], base_seed=seed)
        s = generate_dgp(cfg, 0).sample
        tuning = TuningConfig.fixed(float(rng.uniform(0.01, 0.3)), float(rng.uniform(0.01, 0.5)))
        dl = DebiasedLasso(s, tuning)
        for j in (0, cfg.p_x):
            for method, kind in ((XDLASSO, "ivx_standardized"),
                                 (DLASSO, "standardized_regressor")):
                est = dl.test(j, method).estimate
                alt = debias_by_bias_term(s, j, dl.main_fit, dl.score(j, kind).r_hat)
                worst = max(worst, abs(est - alt))
    ok = worst <= 1e-10
    record(2, ok, f"max |one-step - bias-corrected| = {worst:.2e} (<= 1e-10), 100 instances")
    assert ok


# ----------------------------------------------------------------- 3

def test_criterion_3_ivx_recursion_double_sum():
    worst = 0.0
    for n in (10, 50, 200, 400, 600):
        for tau, c in ((0.5, 5.0), (0.3, 1.0), (0.9, 2.0)):
            rng = np.random.default_rng([3, n, int(10 * tau)])
            w = np.cumsum(rng.standard_normal(n + 1))
            rho = make_rho(max(n, 30), IvxConfig(c_zeta=c, tau=tau))
            dw = np.diff(w)
            t = np.arange(1, n + 1)
            expo = t[:, None] - t[None, :]
            powers = np.where(expo >= 0, rho ** np.maximum(expo, 0), 0.0)
            oracle = np.concatenate([[0.0], powers @ dw])
            worst = max(worst, float(np.max(np.abs(ivx_recursion(w, rho) - oracle))))
    ok = worst <= 1e-9
    record(3, ok, f"max |recursion - double sum| = {worst:.2e} (<= 1e-9), n up to 600")
    assert ok


# ------------------------------------------------------------- 4 and 5

_CACHE = {}


def _case1_main():
    if "case1" not in _CACHE:
        cfg = SimulationConfig(n=300, p_x=150, p_z=300, innovation="iid", replications=R_SPOT,
                               base_seed=4001)
        _CACHE["case1"] = run_size_experiment(cfg, WORKERS)
    return _CACHE["case1"]


@pytest.mark.slow
def test_criterion_4_t_statistic_distribution():
    rep = _case1_main()
    t_xd = rep.methods[XDLASSO].t_stats
    t_d = rep.methods[DLASSO].t_stats
    m, sd, md = t_xd.mean(), t_xd.std(ddof=1), t_d.mean()
    ok = abs(m) < 0.15 and 0.85 <= sd <= 1.15 and abs(md) > 0.4
    record(4, ok, f"XDlasso t mean {m:+.3f} (|.|<0.15), sd {sd:.3f} (in [0.85,1.15]); "
                  f"Dlasso t mean {md:+.3f} (|.|>0.4); R={len(t_xd)}")
    assert ok


@pytest.mark.slow
def test_criterion_5a_case1_size():
    rep = _case1_main()
    xd, d = rep.rate(XDLASSO), rep.rate(DLASSO)
    ok = abs(xd - 0.057) <= 0.03 and d > 0.40
    record("5a", ok, f"Case I (150,300) n=300: XDlasso size {xd:.3f} (0.057+-0.03), "
                     f"Dlasso size {d:.3f} (>0.40)")
    assert ok


@pytest.mark.slow
def test_criterion_5b_case2_size():
    cfg = SimulationConfig(n=600, p_x=100, p_z=150, innovation="ar1", replications=R_SPOT,
                           base_seed=4002, methods=(XDLASSO,))
    xd = run_size_experiment(cfg, WORKERS).rate(XDLASSO)
    ok = abs(xd - 0.073) <= 0.03
    record("5b", ok, f"Case II (100,150) n=600: XDlasso size {xd:.3f} (0.073+-0.03)")
    assert ok


@pytest.mark.slow
def test_criterion_5c_gamma_size():
    cfg = SimulationConfig(n=600, p_x=50, p_z=100, innovation="iid", target="gamma",
                           replications=R_SPOT, base_seed=4003, methods=(XDLASSO,))
    xd = run_size_experiment(cfg, WORKERS).rate(XDLASSO)
    ok = abs(xd - 0.060) <= 0.03
    record("5c", ok, f"Case I (50,100) n=600 gamma: XDlasso size {xd:.3f} (0.060+-0.03)")
    assert ok


# ----------------------------------------------------------------- 6

@pytest.mark.slow
def test_criterion_6_standard_error_rates():
    ns = [200, 300, 400, 500, 600]
    med_b, med_g = [], []
    for n in ns:
        cfg = SimulationConfig(n=n, p_x=50, p_z=100, replications=200, base_seed=4006)
        se_b, se_g = [], []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for r in range(cfg.replications):
                s = generate_dgp(cfg, r).sample
                dl = DebiasedLasso(s, cfg.tuning, cfg.ivx)
                se_b.append(dl.test(0).stderr)
                se_g.append(dl.test(cfg.p_x).stderr)
        med_b.append(np.median(se_b))
        med_g.append(np.median(se_g))
    slope_b = np.polyfit(np.log(ns), np.log(med_b), 1)[0]
    slope_g = np.polyfit(np.log(ns), np.log(med_g), 1)[0]
    ok = -0.90 <= slope_b <= -0.60 and -0.65 <= slope_g <= -0.35
    record(6, ok, f"log-median s.e. slope: unit root {slope_b:.3f} (in [-0.90,-0.60]), "
                  f"stationary {slope_g:.3f} (in [-0.65,-0.35])")
    assert ok


# ----------------------------------------------------------------- 7

@pytest.mark.slow
def test_criterion_7_power_monotone():
    grid = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    curves = {}
    for target in ("beta", "gamma"):
        cfg = SimulationConfig(n=600, p_x=50, p_z=100, target=target, replications=300,
                               base_seed=4007, methods=(XDLASSO,))
        curves[target] = run_power_experiment(cfg, grid, WORKERS).rates(XDLASSO)
    b, g = curves["beta"], curves["gamma"]
    mono = all(np.diff(b) >= -0.05) and all(np.diff(g) >= -0.05)
    dom = all(b[1:] >= g[1:] - 0.05)
    ok = mono and dom
    record(7, ok, f"power beta {np.round(b, 3).tolist()}, gamma {np.round(g, 3).tolist()}; "
                  f"monotone={mono}, unit root >= stationary - 0.05: {dom}")
    assert ok


# ----------------------------------------------------------------- 8

CALIBRATED_SPOTS = [
    # (label, innovation, target, n, p_x, p_z, reference calibrated XDlasso size)
    ("Case I (150,300) n=300 beta", "iid", "beta", 300, 150, 300, 0.053),
    ("Case II (100,150) n=600 beta", "ar1", "beta", 600, 100, 150, 0.052),
    ("Case I (50,100) n=600 gamma", "iid", "gamma", 600, 50, 100, 0.058),
]


@pytest.mark.slow
@pytest.mark.parametrize("spot", CALIBRATED_SPOTS, ids=lambda s: s[0])
def test_criterion_8_calibrated_size(spot):
    label, innov, target, n, px, pz, ref = spot
    pilot = pilot_config(innovation=innov, target=target, replications=100, base_seed=4108)
    consts = calibrate_tuning_constants(pilot, with_dlasso=False, workers=WORKERS)
    cfg = SimulationConfig(n=n, p_x=px, p_z=pz, innovation=innov, target=target,
                           replications=R_SPOT, base_seed=4008, methods=(XDLASSO,),
                           tuning=consts.tuning())
    xd = run_size_experiment(cfg, WORKERS).rate(XDLASSO)
    ok = abs(xd - ref) <= 0.04
    record(8, ok, f"{label}: calibrated XDlasso size {xd:.3f} ({ref}+-0.04); "
                  f"C_lambda={consts.c_lambda:.4f}, C_mu={consts.c_mu:.4f}")
    assert ok


# ----------------------------------------------------------------- 9

RETURN_EP_XD = {"full": (0.002, ""), "pre-1994": (0.057, "*"), "post-1994": (-0.001, "")}
INFLATION_XD = {"full": (-0.021, ""), "pre-volcker": (0.013, ""),
          "volcker-greenspan": (0.155, ""), "bernanke-yellen-powell": (0.020, "")}
RETURN_EP_AR1 = {"full": (0.224, 0.993), "pre-1994": (0.255, 0.994), "post-1994": (0.193, 0.979)}
INFLATION_AR1 = {"full": (0.621, 1.000), "pre-volcker": (0.640, 0.986),
                "volcker-greenspan": (0.623, 0.992), "bernanke-yellen-powell": (0.543, 0.938)}


def test_criterion_9_empirical_manual():
    path = os.environ.get("XDLASSO_FRED_MD")
    if not path:
        line = ("SKIP  criterion 9: manual check; set XDLASSO_FRED_MD to a FRED-MD CSV "
                "(see demos/empirical_reproduction.py)")
        print(line)
        ACCEPTANCE_LINES.append(line)
        pytest.skip("no FRED-MD vintage supplied")
    from xdlasso.cli import stars
    from xdlasso.data import (build_inflation_unrate_sample, build_return_ep_sample,
                              load_fred_md, persistence_table)
    ds = load_fred_md(path)
    ok = True
    details = []
    apps = (("return-ep", build_return_ep_sample, RETURN_EP_XD, RETURN_EP_AR1),
            ("inflation-unrate", build_inflation_unrate_sample, INFLATION_XD, INFLATION_AR1))
    for app, builder, table, ar1 in apps:
        for period, (est_ref, star_ref) in table.items():
            res = DebiasedLasso(builder(ds, period).sample).test(0)
            good = abs(res.estimate - est_ref) <= 0.1 * abs(est_ref) and \
                stars(res.p_value) == star_ref
            ok &= good
            details.append(f"{app}/{period} {res.estimate:.3f}{stars(res.p_value)}"
                           f" vs {est_ref}{star_ref}")
        for row in persistence_table(ds, app, list(ar1)):
            got = [v for k, v in row.items() if k.endswith("AR(1) Coef.")]
            good = all(abs(a - b) <= 0.01 for a, b in zip(got, ar1[row["period"]]))
            ok &= good
    record(9, ok, "; ".join(details))
    assert ok


# ---------------------------------------------------------------- 10

def test_criterion_10_tcode_and_diagnostics():
    import tempfile

    from xdlasso.data import apply_tcode, load_fred_md, persistence_diagnostics
    from xdlasso.exceptions import MissingTcodeRow, NonPositiveForLog
    checks = {}
    checks["code 1 identity"] = np.array_equal(apply_tcode([1.0, 2.5, -3.0], 1), [1.0, 2.5, -3.0])
    checks["code 5 two-point"] = abs(apply_tcode([100, 110], 5)[0] - 0.0953101798) < 1e-9
    checks["code 6 geometric"] = np.allclose(apply_tcode(2.0 * 1.03 ** np.arange(10), 6), 0,
                                             atol=1e-12)
    try:
        apply_tcode([1.0, 0.0], 5)
        checks["log of nonpositive"] = False
    except NonPositiveForLog:
        checks["log of nonpositive"] = True
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "f.csv"
        p.write_text("sasdate,A,B,C\nTransform:,1,5,2\n1/1/1960,1,2,3\n2/1/1960,2,3,4\n")
        checks["tcode round trip"] = load_fred_md(p).tcodes.tolist() == [1, 5, 2]
        p.write_text("sasdate,A\n1/1/1960,1\n2/1/1960,2\n")
        try:
            load_fred_md(p)
            checks["missing tcode row"] = False
        except MissingTcodeRow:
            checks["missing tcode row"] = True
    iid = [persistence_diagnostics(np.random.default_rng([7, r]).standard_normal(5000))
           for r in range(200)]
    checks["iid AR(1) within 0.05"] = all(abs(d.ar1_coef) < 0.05 for d in iid)
    checks["iid ADF p<0.05 in >=95%"] = np.mean([d.adf_pvalue < 0.05 for d in iid]) >= 0.95
    rw = [persistence_diagnostics(np.random.default_rng([8, r]).standard_normal(5000).cumsum())
          for r in range(200)]
    checks["random walk ADF p>0.10 in >=90%"] = np.mean([d.adf_pvalue > 0.10 for d in rw]) >= 0.90
    x = np.random.default_rng(0).standard_normal(300).cumsum()
    X = np.column_stack([np.ones(299), x[:-1]])
    slope = np.linalg.solve(X.T @ X, X.T @ x[1:])[1]
    checks["AR(1) vs normal equations"] = abs(persistence_diagnostics(x).ar1_coef - slope) < 1e-10
    failed = [k for k, v in checks.items() if not v]
    ok = not failed
    record(10, ok, f"{len(checks) - len(failed)}/{len(checks)} TCODE/diagnostic examples pass"
                   + (f"; failed: {failed}" if failed else ""))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
