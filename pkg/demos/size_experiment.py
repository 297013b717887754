"""Monte Carlo rejection rates under the null for all four tests.

Reproduces one cell of a size table at a reduced number of replications.
Expect XDlasso and the IVX oracle near 5%, while Dlasso and the OLS oracle
over-reject when the tested regressor has a unit root.

    python demos/size_experiment.py [replications] [workers]
"""

import sys

from xdlasso import SimulationConfig, run_size_experiment

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 100
workers = int(sys.argv[2]) if len(sys.argv) > 2 else 1

config = SimulationConfig(n=300, p_x=50, p_z=100, innovation="iid", replications=reps)
report = run_size_experiment(config, workers=workers)

print(f"H0: beta_1 = 0, n={config.n}, (p_x, p_z)=({config.p_x}, {config.p_z}), R={reps}")
print(f"{'method':>11} {'size':>6} {'mc s.e.':>8} {'CI length':>10}")
for row in report.rows():
    print(f"{row['method']:>11} {row['rejection_rate']:6.3f} {row['mc_se']:8.3f} "
          f"{row['median_ci_length']:10.3f}")
print(f"elapsed {report.elapsed:.0f}s")
