"""Domain types and design scaling shared by every estimator.

A :class:`RegressionSample` is already lag-aligned: row ``t`` of ``W`` holds the
regressors dated ``t-1`` and ``y[t]`` the outcome dated ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import DegenerateColumn, DomainError

SD_TOL = 1e-12


@dataclass(frozen=True)
class RegressionSample:
    y: np.ndarray
    W: np.ndarray
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=float)
        W = np.asarray(self.W, dtype=float)
        if W.ndim == 1:
            W = W[:, None]
        W = np.ascontiguousarray(W)
        if y.ndim != 1:
            raise ValueError("y must be one-dimensional")
        if W.ndim != 2 or W.shape[0] != y.shape[0]:
            raise ValueError(f"W has shape {W.shape}, expected ({y.shape[0]}, p)")
        if y.shape[0] < 2 or W.shape[1] < 1:
            raise ValueError("need n >= 2 and p >= 1")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(W))):
            raise ValueError("sample contains non-finite values")
        names = self.column_names
        if names is not None:
            names = tuple(str(c) for c in names)
            if len(names) != W.shape[1]:
                raise ValueError("column_names length does not match p")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.W.shape[1]

    def column_index(self, key: int | str) -> int:
        """Resolve a 0-based index or a column name."""
        if isinstance(key, str):
            if self.column_names is None or key not in self.column_names:
                raise KeyError(key)
            return self.column_names.index(key)
        j = int(key)
        if not 0 <= j < self.p:
            raise IndexError(f"column {j} out of range for p={self.p}")
        return j

    def subset(self, rows) -> "RegressionSample":
        return RegressionSample(self.y[rows], self.W[rows], self.column_names)


@dataclass(frozen=True)
class ScaledDesign:
    """Column means and population-style (divisor n) standard deviations."""

    means: np.ndarray
    sds: np.ndarray

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.sds)

    def transform(self, W: np.ndarray) -> np.ndarray:
        return (np.asarray(W, dtype=float) - self.means) / self.sds


def standardize_design(W) -> ScaledDesign:
    """Per-column mean and standard deviation with divisor ``n``.

    Raises :class:`DegenerateColumn` for the first column whose standard
    deviation is within ``1e-12`` of zero.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    if W.shape[0] < 2:
        raise ValueError("need at least two rows")
    if not np.all(np.isfinite(W)):
        raise ValueError("design contains non-finite values")
    means = W.mean(axis=0)
    sds = np.sqrt(((W - means) ** 2).mean(axis=0))
    bad = np.flatnonzero(sds <= SD_TOL)
    if bad.size:
        raise DegenerateColumn(int(bad[0]), float(sds[bad[0]]))
    return ScaledDesign(means=means, sds=sds)


_RULES = ("cv", "calibrated", "fixed")


@dataclass(frozen=True)
class TuningConfig:
    """How the main (lambda) and auxiliary (mu) penalties are chosen.

    ``lambda_value``/``mu_value`` hold the rate constant for ``"calibrated"``
    and the penalty itself for ``"fixed"``; they are ignored under ``"cv"``.
    """

    lambda_rule: str = "cv"
    lambda_value: float | None = None
    mu_rule: str = "cv"
    mu_value: float | None = None
    r: float = 1.0
    cv_folds: int = 10
    lambda_grid_size: int = 100
    grid_ratio: float | None = None
    mu_value_dlasso: float | None = None

    def __post_init__(self):
        for name in ("lambda_rule", "mu_rule"):
            if getattr(self, name) not in _RULES:
                raise DomainError(f"{name} must be one of {_RULES}")
        for rule, value, name in (
            (self.lambda_rule, self.lambda_value, "lambda_value"),
            (self.mu_rule, self.mu_value, "mu_value"),
        ):
            if rule != "cv" and (value is None or value < 0):
                raise DomainError(f"{name} must be a nonnegative number for rule {rule!r}")
        if self.cv_folds < 2:
            raise DomainError("cv_folds must be >= 2")
        if self.grid_ratio is not None and not 0 < self.grid_ratio < 1:
            raise DomainError("grid_ratio must lie in (0, 1)")
        if self.r <= 0:
            raise DomainError("r must be positive")
        if self.lambda_grid_size < 1:
            raise DomainError("lambda_grid_size must be >= 1")

    @classmethod
    def cv(cls, **kw) -> "TuningConfig":
        return cls(lambda_rule="cv", mu_rule="cv", **kw)

    @classmethod
    def fixed(cls, lam: float, mu: float, **kw) -> "TuningConfig":
        return cls(lambda_rule="fixed", lambda_value=lam, mu_rule="fixed", mu_value=mu, **kw)

    @classmethod
    def calibrated(cls, c_lambda: float, c_mu: float, c_mu_dlasso: float | None = None,
                   **kw) -> "TuningConfig":
        return cls(lambda_rule="calibrated", lambda_value=c_lambda,
                   mu_rule="calibrated", mu_value=c_mu, mu_value_dlasso=c_mu_dlasso, **kw)


def as_names(names: Sequence[str] | None, p: int) -> list[str]:
    if names is None:
        return [f"w{j + 1}" for j in range(p)]
    return list(names)
