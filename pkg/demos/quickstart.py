"""Test one coefficient in a simulated high-dimensional predictive regression.

The design mixes 50 unit-root and 100 stationary regressors.  The first
unit-root coefficient is zero, so a well-sized test should not reject it.
XDlasso instruments the regressor with its own mildly integrated filter;
Dlasso uses the raw regressor and tends to over-reject for unit roots.

    python demos/quickstart.py
"""

from xdlasso import DebiasedLasso, SimulationConfig, generate_dgp

config = SimulationConfig(n=400, p_x=50, p_z=100)
sim = generate_dgp(config, replication_index=0)
sample = sim.sample
print(f"n = {sample.n}, p = {sample.p}, true theta_1 = {sim.theta[0]}")

# One object shares the cross-validated main LASSO across tests.
dl = DebiasedLasso(sample)
print(f"cross-validated lambda = {dl.main_fit.lam:.4f}, "
      f"{dl.main_fit.active.size} nonzero slopes")

for j, label in ((0, "unit-root X_1"), (config.p_x, "stationary Z_1")):
    for method in ("XDlasso", "Dlasso"):
        res = dl.test(j, method)
        print(f"{label:>15} {method:>8}: estimate {res.estimate:+.4f}  s.e. {res.stderr:.4f}  "
              f"t {res.t_stat:+.2f}  p {res.p_value:.3f}")
