"""IVX-desparsified LASSO inference for high-dimensional predictive regressions."""

__version__ = "0.1.0"

from .core import RegressionSample, ScaledDesign, TuningConfig, standardize_design
from .exceptions import *  # noqa: F401,F403
from .inference import (DebiasedLasso, InferenceResult, dlasso_test, ivx_oracle_test,
                        ols_oracle_test, xdlasso_test)
from .ivx import IvxConfig, IvxInstrument, generate_instrument, ivx_recursion
from .lasso import LassoFit, block_cv, kkt_gap, lambda_path, slasso_fit, slasso_path
from .simulate import (SimulationConfig, calibrate_tuning_constants, generate_dgp,
                       run_power_experiment, run_size_experiment)

__all__ = [
    "RegressionSample", "ScaledDesign", "TuningConfig", "standardize_design",
    "DebiasedLasso", "InferenceResult", "dlasso_test", "ivx_oracle_test", "ols_oracle_test",
    "xdlasso_test", "IvxConfig", "IvxInstrument", "generate_instrument", "ivx_recursion",
    "LassoFit", "block_cv", "kkt_gap", "lambda_path", "slasso_fit", "slasso_path",
    "SimulationConfig", "calibrate_tuning_constants", "generate_dgp", "run_power_experiment",
    "run_size_experiment",
]
