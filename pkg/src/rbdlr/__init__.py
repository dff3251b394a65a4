from .core import (
    Dataset,
    FitReport,
    FitResult,
    Hyperparams,
    InvalidInputError,
    Mode,
    SolverDivergenceError,
    SolverState,
    block_diag_value,
    l21_norm,
    objective_value,
)
from .solver import fit, fit_fllrr

__version__ = "0.1.0"
