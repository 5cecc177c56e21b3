"""Online set-membership identification of LTV errors-in-variables systems."""

from .identifier import (
    ConfigError,
    EmptyFpsError,
    IdentifierConfig,
    PuiState,
    RegressorWindow,
    StepRecord,
    central_estimate,
    measurement_update,
    run,
    time_update,
)
from .lp import LinearProgram, LpSolution, LpStatus, SolverFailure, Tolerances, solve
from .mccormick import Box, envelope, m_term_bounds
from .model import (
    Constant,
    Dataset,
    InputSpec,
    ModelOrder,
    NoiseSpec,
    Sinusoid,
    delta_for_snr,
    simulate,
    snr_input,
    snr_output,
    variation_bound_of,
)

__version__ = "0.1.0"
