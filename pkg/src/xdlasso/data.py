"""FRED-MD ingestion, TCODE transforms, persistence diagnostics and the two
empirical regression samples (stock returns on the log earnings-price ratio,
inflation on the unemployment rate).

The FRED-MD CSV layout is a header row, a ``Transform:`` row of codes and then
one row per month with the date in the first column (``sasdate``).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .core import SD_TOL, RegressionSample
from .exceptions import (EmptyWindow, FormatError, InsufficientObservations, MissingSeries,
                         MissingTcodeRow, NonPositiveForLog)

log = logging.getLogger(__name__)

SP500 = "S&P 500"
SP_PE = "S&P PE ratio"
CPI = "CPIAUCSL"
UNRATE = "UNRATE"

# Leading observations lost by each code.  Code 7 differences a growth rate and
# therefore loses two.
TCODE_ORDER = {1: 0, 2: 1, 3: 2, 4: 0, 5: 1, 6: 2, 7: 2}

PERIODS = {
    "return-ep": {
        "full": ("1960-01", "2019-12"),
        "pre-1994": ("1960-01", "1993-12"),
        "post-1994": ("1994-01", "2024-04"),
    },
    "inflation-unrate": {
        "full": ("1960-01", "2019-12"),
        "pre-volcker": ("1960-01", "1979-07"),
        "volcker-greenspan": ("1979-08", "2006-01"),
        "bernanke-yellen-powell": ("2006-02", "2024-04"),
    },
}


@dataclass(frozen=True)
class MacroDataset:
    """Monthly panel with one TCODE per column; missing cells are NaN."""

    dates: np.ndarray
    names: tuple[str, ...]
    values: np.ndarray
    tcodes: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (self.dates.size, len(self.names)):
            raise ValueError("values must be dates x names")
        if self.tcodes.size != len(self.names):
            raise ValueError("one tcode per column required")
        if not np.all(np.isin(self.tcodes, list(TCODE_ORDER))):
            raise ValueError("tcodes must lie in 1..7")
        if self.dates.size > 1 and np.any(np.diff(self.dates.astype(int)) != 1):
            raise ValueError("dates must be consecutive months")

    def column(self, name: str) -> np.ndarray:
        if name not in self.names:
            raise MissingSeries(name)
        return self.values[:, self.names.index(name)]

    def tcode(self, name: str) -> int:
        if name not in self.names:
            raise MissingSeries(name)
        return int(self.tcodes[self.names.index(name)])

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=pd.PeriodIndex(self.dates, freq="M"),
                            columns=list(self.names))


def _parse_month(text: str):
    text = text.strip()
    if not text:
        return None
    for fmt in ("%m/%d/%Y", "%Y-%m-%d", "%Y-%m", "%Y/%m/%d", "%m/%Y"):
        try:
            ts = pd.to_datetime(text, format=fmt)
        except (ValueError, TypeError):
            continue
        return np.datetime64(ts.strftime("%Y-%m"), "M")
    return None


def _parse_cell(text: str, row: int, col: str) -> float:
    text = text.strip()
    if text == "" or text.upper() in ("NA", "NAN", "."):
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise FormatError(f"non-numeric value {text!r}", row=row, column=col) from None


def load_fred_md(path) -> MacroDataset:
    """Parse a FRED-MD style CSV.

    Rows whose date cell cannot be parsed are skipped (blank trailing lines are
    common in published vintages); their row numbers are kept in
    ``provenance["rejected_rows"]``.  Row numbers are 1-based file lines.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError("empty file", row=1)
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise FormatError("need a date column and at least one series", row=1)
    names = header[1:]
    if len(set(names)) != len(names):
        raise FormatError("duplicate column names", row=1)
    if len(rows) < 2 or not rows[1] or not rows[1][0].strip().lower().startswith("transform"):
        raise MissingTcodeRow("second row must hold the 'Transform:' codes", row=2)
    codes = []
    for k, name in enumerate(names):
        cell = rows[1][k + 1].strip() if k + 1 < len(rows[1]) else ""
        try:
            code = int(float(cell))
        except ValueError:
            raise FormatError(f"invalid tcode {cell!r}", row=2, column=name) from None
        if code not in TCODE_ORDER:
            raise FormatError(f"tcode {code} outside 1..7", row=2, column=name)
        codes.append(code)
    dates, data, rejected = [], [], []
    for i, row in enumerate(rows[2:], start=3):
        if not row or all(not c.strip() for c in row):
            continue
        d = _parse_month(row[0])
        if d is None:
            rejected.append(i)
            continue
        if len(row) - 1 > len(names):
            raise FormatError(f"row has {len(row) - 1} values, expected {len(names)}", row=i)
        cells = row[1:] + [""] * (len(names) - (len(row) - 1))
        data.append([_parse_cell(c, i, names[k]) for k, c in enumerate(cells)])
        dates.append(d)
    if not dates:
        raise FormatError("no dated observations", row=3)
    dates = np.array(dates, dtype="datetime64[M]")
    steps = np.diff(dates.astype(int))
    if np.any(steps != 1):
        bad = int(np.flatnonzero(steps != 1)[0]) + 1
        raise FormatError(f"dates not consecutive months at {dates[bad]}", column=header[0])
    values = np.array(data, dtype=float)
    if rejected:
        log.warning("%s: skipped %d rows with unparseable dates", path, len(rejected))
    prov = {"path": str(path), "rows": int(values.shape[0]), "columns": len(names),
            "rejected_rows": rejected, "missing_cells": int(np.isnan(values).sum())}
    log.info("loaded %s: %d months x %d series from %s", path.name, values.shape[0],
             len(names), dates[0])
    return MacroDataset(dates=dates, names=tuple(names), values=values,
                        tcodes=np.array(codes, dtype=int), provenance=prov)


def _log(x: np.ndarray) -> np.ndarray:
    finite = x[np.isfinite(x)]
    if np.any(finite <= 0):
        raise NonPositiveForLog("log transform needs a strictly positive series")
    return np.log(x)


def apply_tcode(series, code: int) -> np.ndarray:
    """FRED-MD transformation; leading observations lost to differencing are dropped.

    1 level, 2 first difference, 3 second difference, 4 log, 5 log difference,
    6 second log difference, 7 first difference of the growth rate.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if code not in TCODE_ORDER:
        raise ValueError(f"tcode {code} outside 1..7")
    if x.size <= TCODE_ORDER[code]:
        raise InsufficientObservations(f"tcode {code} needs more than {TCODE_ORDER[code]} values")
    if code == 1:
        return x.copy()
    if code == 2:
        return np.diff(x)
    if code == 3:
        return np.diff(x, 2)
    if code == 4:
        return _log(x)
    if code == 5:
        return np.diff(_log(x))
    if code == 6:
        return np.diff(_log(x), 2)
    return np.diff(x[1:] / x[:-1] - 1.0)


def transform_aligned(series, code: int) -> np.ndarray:
    """``apply_tcode`` padded with leading NaN to the input length."""
    out = apply_tcode(series, code)
    return np.concatenate([np.full(TCODE_ORDER[code], np.nan), out])


@dataclass(frozen=True)
class PersistenceDiagnostic:
    ar1_coef: float
    adf_stat: float
    adf_pvalue: float
    lags: int
    nobs: int = 0


# Asymptotic Dickey-Fuller p-values (constant, no trend) on a grid of the
# t-statistic from -5.0 to 2.7 in steps of 0.1, from MacKinnon's response surface.
_ADF_GRID = np.round(np.arange(-5.0, 2.71, 0.1), 1)
_ADF_P = np.array([
    0.00002, 0.00003, 0.00005, 0.00008, 0.00013, 0.00020, 0.00030, 0.00044, 0.00066,
    0.00097, 0.00141, 0.00203, 0.00291, 0.00411, 0.00576, 0.00799, 0.01096, 0.01488,
    0.01998, 0.02655, 0.03489, 0.04535, 0.05827, 0.07404, 0.09300, 0.11547, 0.14174,
    0.17197, 0.20625, 0.24451, 0.28657, 0.33206, 0.38046, 0.43111, 0.48359, 0.53351,
    0.58228, 0.62917, 0.67360, 0.71507, 0.75326, 0.78797, 0.81912, 0.84675, 0.87098,
    0.89202, 0.91010, 0.92550, 0.93852, 0.94944, 0.95853, 0.96606, 0.97226, 0.97734,
    0.98149, 0.98487, 0.98762, 0.98984, 0.99164, 0.99309, 0.99427, 0.99522, 0.99599,
    0.99661, 0.99711, 0.99752, 0.99786, 0.99813, 0.99835, 0.99853, 0.99867, 0.99879,
    0.99888, 0.99896, 0.99901, 0.99905, 0.99908, 0.99909])
P_MIN, P_MAX = 0.001, 0.999


def adf_pvalue(stat: float) -> float:
    """Linear interpolation in the embedded table, clamped to ``[0.001, 0.999]``."""
    p = float(np.interp(stat, _ADF_GRID, _ADF_P))
    return min(max(p, P_MIN), P_MAX)


def _ols_t(X, y, k):
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    dof = X.shape[0] - X.shape[1]
    s2 = resid @ resid / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return beta, beta[k] / math.sqrt(cov[k, k])


def ar1_coefficient(x) -> float:
    x = np.asarray(x, dtype=float)
    a, b = x[:-1], x[1:]
    ac = a - a.mean()
    return float(ac @ (b - b.mean()) / (ac @ ac))


def default_adf_lags(length: int) -> int:
    """``floor(n ** (1/3))`` with ``n = length - 1`` observations of the differences."""
    m = length - 1
    k = int(math.floor(m ** (1.0 / 3.0)))
    while (k + 1) ** 3 <= m:
        k += 1
    while k ** 3 > m:
        k -= 1
    return k


def persistence_diagnostics(series, lags: int | None = None) -> PersistenceDiagnostic:
    """AR(1) slope and augmented Dickey-Fuller test with a constant."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise ValueError("series must be a finite vector")
    if lags is None:
        lags = default_adf_lags(x.size) if x.size > 1 else 0
    if lags < 0:
        raise ValueError("lags must be nonnegative")
    rows = x.size - 1 - lags
    if x.size <= lags + 2 or rows <= lags + 2:
        raise InsufficientObservations(f"{x.size} observations are too few for {lags} lags")
    dx = np.diff(x)
    y = dx[lags:]
    cols = [np.ones(rows), x[lags:-1]]
    cols += [dx[lags - i:-i] for i in range(1, lags + 1)]
    X = np.column_stack(cols)
    _, stat = _ols_t(X, y, 1)
    return PersistenceDiagnostic(ar1_coef=ar1_coefficient(x), adf_stat=float(stat),
                                 adf_pvalue=adf_pvalue(stat), lags=int(lags), nobs=rows)


@dataclass(frozen=True)
class EmpiricalSample:
    """Lag-aligned regression sample plus the bookkeeping of its construction."""

    sample: RegressionSample
    dates: np.ndarray
    outcome: str
    predictor: str
    period: tuple[str, str]
    dropped_rows: int
    dropped_columns: tuple[str, ...]

    def frame(self) -> pd.DataFrame:
        s = self.sample
        df = pd.DataFrame(s.W, columns=list(s.column_names))
        df.insert(0, self.outcome, s.y)
        df.insert(0, "date", [str(d) for d in self.dates])
        return df


def resolve_period(app: str, period) -> tuple[str, str]:
    if isinstance(period, (tuple, list)):
        start, end = period
        return str(start), str(end)
    try:
        return PERIODS[app][period]
    except KeyError:
        raise KeyError(f"unknown period {period!r} for {app}; known: {sorted(PERIODS[app])}") \
            from None


def _build(dataset: MacroDataset, outcome_name: str, outcome: np.ndarray,
           predictor_name: str, exclude: set[str], period: tuple[str, str],
           max_missing_share: float) -> EmpiricalSample:
    start, end = (np.datetime64(p, "M") for p in period)
    if end < start:
        raise EmptyWindow(f"period {period} is empty")
    names = [predictor_name]
    cols = [dataset.column(predictor_name)]
    for name, code in zip(dataset.names, dataset.tcodes):
        if name in exclude:
            continue
        x = dataset.column(name)
        try:
            cols.append(transform_aligned(x, int(code)))
        except NonPositiveForLog:
            log.warning("%s: nonpositive values under tcode %d; column dropped", name, code)
            continue
        names.append(name)
    X = np.column_stack(cols)
    lagged = np.vstack([np.full((1, X.shape[1]), np.nan), X[:-1]])
    in_window = (dataset.dates >= start) & (dataset.dates <= end)
    if not in_window.any():
        raise EmptyWindow(f"no observations in {period}")
    y = outcome[in_window]
    W = lagged[in_window]
    dates = dataset.dates[in_window]
    miss = np.isnan(W).mean(axis=0)
    if np.isnan(W[:, 0]).mean() > max_missing_share or np.isnan(y).mean() > max_missing_share:
        log.warning("outcome or predictor has more than %.0f%% missing in window",
                    100 * max_missing_share)
    keep = miss <= max_missing_share
    keep[0] = True
    dropped_cols = [n for n, k in zip(names, keep) if not k]
    if dropped_cols:
        log.info("dropped %d control columns with > %.0f%% missing: %s", len(dropped_cols),
                 100 * max_missing_share, ", ".join(dropped_cols))
    W = W[:, keep]
    names = [n for n, k in zip(names, keep) if k]
    ok = np.isfinite(y) & np.all(np.isfinite(W), axis=1)
    dropped_rows = int((~ok).sum())
    y, W, dates = y[ok], W[ok], dates[ok]
    if y.size < 3:
        raise EmptyWindow(f"fewer than three complete rows in {period}")
    sd = W.std(axis=0)
    const = sd <= SD_TOL
    const[0] = False
    if const.any():
        dropped_cols += [n for n, c in zip(names, const) if c]
        W = W[:, ~const]
        names = [n for n, c in zip(names, const) if not c]
    log.info("%s on lagged %s, %s to %s: n=%d, p=%d, %d rows dropped", outcome_name,
             predictor_name, dates[0], dates[-1], y.size, W.shape[1], dropped_rows)
    return EmpiricalSample(sample=RegressionSample(y, W, names), dates=dates,
                           outcome=outcome_name, predictor=predictor_name,
                           period=(str(start), str(end)), dropped_rows=dropped_rows,
                           dropped_columns=tuple(dropped_cols))


def return_series(price) -> np.ndarray:
    """Monthly log return, NaN in the first month."""
    return np.concatenate([[np.nan], np.diff(_log(np.asarray(price, dtype=float)))])


def log_ep(pe) -> np.ndarray:
    return -_log(np.asarray(pe, dtype=float))


def inflation_series(cpi) -> np.ndarray:
    """Monthly inflation in percent, ``100 * dlog(CPI)``, NaN in the first month."""
    return 100.0 * return_series(cpi)


def build_return_ep_sample(dataset: MacroDataset, period="full",
                           max_missing_share: float = 0.05) -> EmpiricalSample:
    """Log return of the S&P 500 on the lagged log earnings-price ratio and the
    remaining TCODE-transformed series, all lagged one month.

    Control columns with more than ``max_missing_share`` missing months in the
    window are dropped; remaining incomplete rows are deleted listwise.
    """
    window = resolve_period("return-ep", period)
    ret = return_series(dataset.column(SP500))
    ds = _with_column(dataset, "logEP", log_ep(dataset.column(SP_PE)))
    return _build(ds, "Return", ret, "logEP", {SP500, SP_PE, "logEP"}, window,
                  max_missing_share)


def build_inflation_unrate_sample(dataset: MacroDataset, period="full",
                                  max_missing_share: float = 0.05) -> EmpiricalSample:
    """Monthly CPI inflation on the lagged unemployment rate (levels) and the
    remaining TCODE-transformed series, all lagged one month."""
    window = resolve_period("inflation-unrate", period)
    infl = inflation_series(dataset.column(CPI))
    dataset.column(UNRATE)
    return _build(dataset, "Inflation", infl, UNRATE, {CPI, UNRATE}, window, max_missing_share)


def _with_column(dataset: MacroDataset, name: str, values: np.ndarray) -> MacroDataset:
    return MacroDataset(dates=dataset.dates, names=dataset.names + (name,),
                        values=np.column_stack([dataset.values, values]),
                        tcodes=np.append(dataset.tcodes, 1), provenance=dataset.provenance)


def persistence_table(dataset: MacroDataset, app: str, periods=None) -> list[dict]:
    """AR(1) and ADF diagnostics of the outcome and the predictor per period."""
    if app == "return-ep":
        series = {"Return": return_series(dataset.column(SP500)),
                  "logEP": log_ep(dataset.column(SP_PE))}
    elif app == "inflation-unrate":
        series = {"Inflation": inflation_series(dataset.column(CPI)),
                  "Unrate": dataset.column(UNRATE).astype(float)}
    else:
        raise KeyError(f"unknown application {app!r}")
    periods = list(PERIODS[app]) if periods is None else periods
    out = []
    for period in periods:
        start, end = (np.datetime64(p, "M") for p in resolve_period(app, period))
        mask = (dataset.dates >= start) & (dataset.dates <= end)
        row = {"period": period if isinstance(period, str) else f"{start}:{end}"}
        for label, x in series.items():
            v = x[mask]
            v = v[np.isfinite(v)]
            d = persistence_diagnostics(v)
            row[f"{label} AR(1) Coef."] = d.ar1_coef
            row[f"{label} ADF $p$-value"] = d.adf_pvalue
        out.append(row)
    return out
