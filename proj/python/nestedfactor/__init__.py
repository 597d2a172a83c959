"""Nested factor models of stock returns and their volatilities."""

from ._core import (
    Calibration,
    InputError,
    LinearFactorModel,
    NfmError,
    NumericalError,
    VolModel,
    __version__,
    backtest,
    calibrate,
    copula_pairs,
    elliptical_medial,
    empirical_copula_point,
    gamma_p,
    log_abs_correlation,
    match_beta,
    phi0,
    rho_blomqvist,
    run_command,
    simulate,
)

__all__ = [
    "Calibration",
    "InputError",
    "LinearFactorModel",
    "NfmError",
    "NumericalError",
    "VolModel",
    "__version__",
    "backtest",
    "calibrate",
    "copula_pairs",
    "elliptical_medial",
    "empirical_copula_point",
    "gamma_p",
    "log_abs_correlation",
    "match_beta",
    "phi0",
    "rho_blomqvist",
    "run_command",
    "simulate",
]
