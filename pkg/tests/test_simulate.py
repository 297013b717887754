import math
from dataclasses import replace

import numpy as np
import pytest

from xdlasso.core import TuningConfig
from xdlasso.exceptions import DomainError, ExperimentAborted
from xdlasso.inference import IVX_ORACLE, OLS_ORACLE, XDLASSO
from xdlasso.lasso import theoretical_lambda, theoretical_mu
from xdlasso.simulate import (SimulationConfig, constants_from_penalties, covariance_matrix,
                              generate_dgp, run_power_experiment, run_size_experiment,
                              summarize, true_coefficients)

FAST = TuningConfig.fixed(0.05, 0.1)


def small(**kw):
    base = dict(n=80, p_x=6, p_z=8, replications=4, tuning=FAST, base_seed=11)
    base.update(kw)
    return SimulationConfig(**base)


def test_covariance_structure():
    S = covariance_matrix(3, 4)
    assert S.shape == (8, 8)
    assert S[1, 2] == 0.5 and S[1, 3] == 0.25
    assert np.all(S[0, 4:] == 0) and np.all(S[4:, 0] == 0)
    assert S[0, 1] == 0.5 and S[3, 4] == 0.5
    np.linalg.cholesky(S)


def test_true_coefficients():
    th = true_coefficients(small(beta1=0.2, gamma1=0.1))
    np.testing.assert_allclose(th[:6], [0.2] + [0.5 / math.sqrt(80)] * 4 + [0.0])
    np.testing.assert_allclose(th[6:], [0.1, 0.5, 0.5, 0.25, 0.25, 0, 0, 0])


def test_dgp_structure_and_determinism():
    cfg = small()
    a, b = generate_dgp(cfg, 3), generate_dgp(cfg, 3)
    np.testing.assert_array_equal(a.sample.W, b.sample.W)
    np.testing.assert_array_equal(a.sample.y, b.sample.y)
    assert not np.array_equal(generate_dgp(cfg, 4).sample.y, a.sample.y)
    W = a.sample.W
    assert np.all(W[0, :6] == 0)  # X_0 = 0
    np.testing.assert_array_equal(a.active_set, [1, 2, 3, 4, 7, 8, 9, 10])
    # Regenerate the innovations by hand: u_t, dX_t, Z_t from the Cholesky factor.
    rng = np.random.default_rng(np.random.SeedSequence([11, 3]))
    v = rng.standard_normal((81, 15)) @ np.linalg.cholesky(covariance_matrix(6, 8)).T
    np.testing.assert_allclose(np.diff(W[:, :6], axis=0), v[1:80, 1:7], atol=1e-12)
    np.testing.assert_allclose(W[:, 6:], v[:80, 7:], atol=1e-12)
    np.testing.assert_allclose(a.sample.y - W @ a.theta, v[1:, 0], atol=1e-12)


def test_ar1_without_persistence_equals_iid():
    iid = generate_dgp(small(), 0)
    ar = generate_dgp(small(innovation="ar1", ar_coef=0.0, burn_in=0), 0)
    np.testing.assert_array_equal(iid.sample.W, ar.sample.W)
    np.testing.assert_array_equal(iid.sample.y, ar.sample.y)


def test_ar1_innovations_are_persistent():
    cfg = small(n=2000, innovation="ar1", replications=1)
    Z = generate_dgp(cfg, 0).sample.W[:, 6]
    rho = np.corrcoef(Z[1:], Z[:-1])[0, 1]
    assert 0.2 < rho < 0.4


def test_config_validation():
    for kw in (dict(replications=0), dict(n=10), dict(innovation="x"), dict(target="z"),
               dict(alpha=0.0), dict(methods=("foo",))):
        with pytest.raises(DomainError):
            small(**kw)


def test_size_report_fields():
    rep = run_size_experiment(small())
    assert set(rep.methods) == {XDLASSO, "Dlasso", IVX_ORACLE, OLS_ORACLE}
    for m in rep.methods.values():
        assert m.n_ok == 4 and m.failures == 0
        r = m.rejection_rate
        assert m.mc_se == pytest.approx(math.sqrt(r * (1 - r) / 4))
    rows = rep.rows()
    assert rows[0]["method"] == XDLASSO and rows[0]["replications"] == 4


def test_results_independent_of_workers():
    cfg = small(replications=3, methods=(XDLASSO,))
    a = run_size_experiment(cfg, workers=1)
    b = run_size_experiment(cfg, workers=2)
    np.testing.assert_array_equal(a.methods[XDLASSO].t_stats, b.methods[XDLASSO].t_stats)


def test_failure_policy():
    cfg = small(replications=200, methods=(XDLASSO,))
    ok = {XDLASSO: {"t": 0.1, "estimate": 0.0, "stderr": 1.0, "ci_length": 1.0,
                    "reject": False}}
    bad = {XDLASSO: {"error": "SingularScore: x"}}
    rep = summarize(cfg, [ok] * 198 + [bad] * 2)
    assert rep.methods[XDLASSO].failures == 2
    assert rep.methods[XDLASSO].n_ok == 198
    with pytest.raises(ExperimentAborted):
        summarize(cfg, [ok] * 197 + [bad] * 3)


def test_power_zero_reproduces_size():
    cfg = small(methods=(XDLASSO,))
    curve = run_power_experiment(cfg, [0.0, 0.3])
    size = run_size_experiment(cfg)
    np.testing.assert_array_equal(curve.reports[0].methods[XDLASSO].t_stats,
                                  size.methods[XDLASSO].t_stats)
    assert curve.reports[1].config.beta1 == 0.3
    with pytest.raises(DomainError):
        run_power_experiment(cfg, [0.7])


def test_gamma_target_uses_stationary_column():
    cfg = small(target="gamma")
    assert cfg.tested_index == 6
    curve = run_power_experiment(cfg, [0.25])
    assert curve.reports[0].config.gamma1 == 0.25
    assert curve.reports[0].config.beta1 == 0.0


def test_constants_from_penalties_inverts_rates():
    n, p = 400, 250
    lams = [theoretical_lambda(n, p, 1.0, c) for c in (0.01, 0.02, 0.03)]
    mus = [theoretical_mu(n, p, 1.0, 0.5, c) for c in (0.1, 0.4, 0.2)]
    cl, cm = constants_from_penalties(lams, mus, n, p)
    assert cl == pytest.approx(0.02)
    assert cm == pytest.approx(0.2)


def test_large_effect_is_detected():
    cfg = replace(small(n=300, replications=5, methods=(XDLASSO,)), beta1=0.5)
    assert run_size_experiment(cfg).rate(XDLASSO) == 1.0
