"""Mean-field states, fluctuation spectra and correlations of a condensate in a driven cavity."""

from .correlations import (log_negativity, lyapunov_covariance, quadrature_covariance,
                           steady_correlations)
from .exceptions import (CavityBECError, ConvergenceError, DefectiveSpectrumError,
                         InvalidCovarianceError, NoSteadyStateError)
from .fluctuations import Stability, build_matrix, eigendecompose, stability
from .meanfield import Representation, continue_branch, solve
from .params import GridConfig, PhysicalParams, swave_frequency, validate
from .sweep import detuning_sweep, find_critical_point, phase_diagram

__version__ = "0.1.0"
