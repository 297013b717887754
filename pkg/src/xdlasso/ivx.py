"""Self-generated IVX instruments.

The instrument filters the increments of a regressor through a mildly
integrated AR(1) recursion,

    zeta_t = rho * zeta_{t-1} + (w_t - w_{t-1}),   zeta_0 = 0,
    rho = 1 - C_zeta / n**tau,

and is then divided by its sample standard deviation (divisor n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .core import SD_TOL
from .exceptions import DegenerateInstrument, DomainError


@dataclass(frozen=True)
class IvxConfig:
    c_zeta: float = 5.0
    tau: float = 0.5

    def __post_init__(self):
        if not self.c_zeta > 0:
            raise DomainError("c_zeta must be positive")
        if not 0 < self.tau < 1:
            raise DomainError("tau must lie in (0, 1)")


@dataclass(frozen=True)
class IvxInstrument:
    """Instrument for one regressor.

    ``zeta``/``standardized`` hold periods ``1..n``; ``aligned`` holds the
    standardized values for periods ``0..n-1`` (starting with the zero initial
    value), i.e. the rows that pair with ``W_{t-1}`` in a predictive regression.
    """

    zeta: np.ndarray
    sd: float
    standardized: np.ndarray
    rho: float

    @property
    def aligned(self) -> np.ndarray:
        return np.concatenate(([0.0], self.standardized[:-1]))


def make_rho(n: int, config: IvxConfig = IvxConfig()) -> float:
    """Autoregressive root ``1 - C_zeta / n**tau``; must be strictly positive."""
    if n < 2:
        raise DomainError("n must be at least 2")
    rho = 1.0 - config.c_zeta / n ** config.tau
    if rho <= 0.0:
        raise DomainError(f"rho = {rho:.4g} <= 0: n={n} too small for c_zeta={config.c_zeta}")
    return rho


@numba.njit(cache=True)
def _recursion(dw, rho):
    out = np.empty(dw.shape[0] + 1)
    out[0] = 0.0
    z = 0.0
    for t in range(dw.shape[0]):
        z = rho * z + dw[t]
        out[t + 1] = z
    return out


def ivx_recursion(w, rho: float) -> np.ndarray:
    """``zeta_0..zeta_m`` for a series ``w_0..w_m`` (``zeta_0 = 0``)."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise ValueError("w must be a non-empty vector")
    return _recursion(np.diff(w), float(rho))


def generate_instrument(w, config: IvxConfig = IvxConfig(), *,
                        rho: float | None = None) -> IvxInstrument:
    """Instrument from ``w_0..w_n`` (length ``n + 1``).

    ``rho`` overrides the value implied by ``config`` and ``n``.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 3:
        raise ValueError("need a series of at least three observations")
    if not np.all(np.isfinite(w)):
        raise ValueError("series contains non-finite values")
    n = w.size - 1
    if rho is None:
        rho = make_rho(n, config)
    full = ivx_recursion(w, rho)
    lagged = full[:-1]
    sd = float(np.sqrt(np.mean((lagged - lagged.mean()) ** 2)))
    if sd <= SD_TOL:
        raise DegenerateInstrument(f"instrument standard deviation {sd:.3g} is (near) zero")
    zeta = full[1:]
    return IvxInstrument(zeta=zeta, sd=sd, standardized=zeta / sd, rho=float(rho))


def column_instrument(column, config: IvxConfig = IvxConfig(), *,
                      rho: float | None = None) -> np.ndarray:
    """Standardized instrument aligned with a lagged design column.

    ``column`` holds ``w_0..w_{n-1}`` as stored in a lag-aligned design; the
    result holds the standardized ``zeta_0..zeta_{n-1}`` with ``rho`` based on
    the ``n`` rows.  Only the recursion values used by the regression enter
    the standardization, so no pre-sample observation is needed.
    """
    column = np.asarray(column, dtype=float)
    n = column.size
    if rho is None:
        rho = make_rho(n, config)
    full = ivx_recursion(column, rho)
    sd = float(np.sqrt(np.mean((full - full.mean()) ** 2)))
    if sd <= SD_TOL:
        raise DegenerateInstrument(f"instrument standard deviation {sd:.3g} is (near) zero")
    return full / sd
