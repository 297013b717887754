"""Power of XDlasso for a unit-root and a stationary coefficient.

The standard error of a unit-root coefficient shrinks faster with n than that
of a stationary one, so at equal effect sizes the unit-root test has more power.
Replication seeds do not depend on the coefficient value, so the first grid
point is exactly the size experiment.

    python demos/power_curves.py [replications]
"""

import sys

from xdlasso import SimulationConfig, run_power_experiment

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 50
grid = [0.0, 0.1, 0.2, 0.3]

print(f"{'coef':>6}" + "".join(f"{g:>8.2f}" for g in grid))
for target in ("beta", "gamma"):
    config = SimulationConfig(n=400, p_x=50, p_z=100, target=target, replications=reps,
                              methods=("XDlasso",))
    rates = run_power_experiment(config, grid).rates("XDlasso")
    print(f"{target:>6}" + "".join(f"{r:8.3f}" for r in rates))
