"""Calibrate penalty constants from cross-validated pilot runs, then reuse them.

Each pilot replication picks lambda and mu by block cross-validation; dividing
by the theoretical rates gives per-replication constants whose medians are the
calibrated C_lambda and C_mu.  The calibrated rule then scales automatically
with n and p and skips cross-validation entirely.

    python demos/calibration.py [pilot_replications]
"""

import sys

from xdlasso import SimulationConfig, calibrate_tuning_constants, run_size_experiment
from xdlasso.simulate import pilot_config

pilots = int(sys.argv[1]) if len(sys.argv) > 1 else 20
consts = calibrate_tuning_constants(pilot_config(replications=pilots), with_dlasso=False)
print(f"C_lambda = {consts.c_lambda:.4f}, C_mu = {consts.c_mu:.4f} from {pilots} pilots")

config = SimulationConfig(n=600, p_x=50, p_z=100, replications=100,
                          tuning=consts.tuning(), methods=("XDlasso",))
report = run_size_experiment(config)
print(f"calibrated XDlasso size at n=600: {report.rate('XDlasso'):.3f} "
      f"(R=100, {report.elapsed:.0f}s)")
