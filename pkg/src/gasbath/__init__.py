"""Test particle in an ideal quantum gas.

Dynamic structure factors of free Bose, Fermi and classical gases, the
collision dynamics they generate, and the quantum Brownian motion limit.
"""

__version__ = "0.1.0"

from .brownian import (BrownianCoefficients, GaussianMomentState, brownian_coefficients,
                       coefficients_from_dpp, compute_dpp, qbm_consistency_vs_kinetics,
                       qbm_moment_evolution)
from .dsf import (FreeBrownian, FreeExact, MaxwellBoltzmann, MBBrownian, SeriesTruncated,
                  Tabulated, dsf_brownian, dsf_free_exact, dsf_mb, dsf_mb_brownian, dsf_series,
                  make_model)
from .errors import (CondensationError, ConfigError, ConvergenceError, DomainError,
                     GasbathError, MonitorViolation, StepSizeError)
from .statmech import GasParameters, Statistics, solve_fugacity
from .tmatrix import ConstantTMatrix, GaussianCutoffTMatrix

__all__ = [
    "BrownianCoefficients", "GaussianMomentState", "brownian_coefficients",
    "coefficients_from_dpp", "compute_dpp", "qbm_consistency_vs_kinetics",
    "qbm_moment_evolution",
    "FreeBrownian", "FreeExact", "MaxwellBoltzmann", "MBBrownian", "SeriesTruncated",
    "Tabulated", "dsf_brownian", "dsf_free_exact", "dsf_mb", "dsf_mb_brownian", "dsf_series",
    "make_model",
    "CondensationError", "ConfigError", "ConvergenceError", "DomainError", "GasbathError",
    "MonitorViolation", "StepSizeError",
    "GasParameters", "Statistics", "solve_fugacity",
    "ConstantTMatrix", "GaussianCutoffTMatrix",
]
