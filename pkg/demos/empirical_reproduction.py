"""Run both FRED-MD applications on a user-supplied vintage.

Downloads are out of scope: pass the path of a FRED-MD monthly CSV (the
"current.csv" layout with a "Transform:" row).  For each subperiod the script
prints the persistence diagnostics of the outcome and the predictor, then the
XDlasso and Dlasso estimates with significance stars (10/5/1%).

    python demos/empirical_reproduction.py path/to/fred-md.csv
"""

import logging
import sys

from xdlasso import DebiasedLasso
from xdlasso.cli import stars
from xdlasso.data import (PERIODS, build_inflation_unrate_sample, build_return_ep_sample,
                          load_fred_md, persistence_table)

logging.basicConfig(level=logging.INFO, format="%(message)s")
dataset = load_fred_md(sys.argv[1])
print(f"{len(dataset.names)} series, {dataset.dates[0]} to {dataset.dates[-1]}")

for app, builder in (("return-ep", build_return_ep_sample),
                     ("inflation-unrate", build_inflation_unrate_sample)):
    print(f"\n== {app} ==")
    for row in persistence_table(dataset, app):
        print("  " + ", ".join(f"{k} {v:.3f}" if isinstance(v, float) else str(v)
                               for k, v in row.items()))
    for period in PERIODS[app]:
        emp = builder(dataset, period)
        dl = DebiasedLasso(emp.sample)
        cells = []
        for method in ("XDlasso", "Dlasso"):
            res = dl.test(0, method)
            cells.append(f"{method} {res.estimate:+.3f}{stars(res.p_value):<3} "
                         f"({res.stderr:.3f})")
        print(f"  {period:>24} n={emp.sample.n:<4} p={emp.sample.p:<4} " + "  ".join(cells))
