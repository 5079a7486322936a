"""Classical and quantum synchronisation of two membranes in one cavity."""

__version__ = "0.1.0"

from .classical import (IntegratorConfig, PhaseSeries, derivatives,
                        instantaneous_phase, integrate, phase_difference,
                        stationary_phase)
from .correlations import (ReducedCM, f_function, gaussian_discord,
                           log_negativity, reduce, symplectic_eigenvalues)
from .model import (ClassicalState, SyncMetrics, SystemParams, Trajectory,
                    thermal_occupation, validate)
from .quantum import (diffusion_matrix, drift_matrix, initial_cm,
                      phase_diff_variance, propagate_cm, time_average)
from .sweep import SweepSpec, find_threshold, run_sweep

__all__ = [
    "ClassicalState", "IntegratorConfig", "PhaseSeries", "ReducedCM",
    "SweepSpec", "SyncMetrics", "SystemParams", "Trajectory", "derivatives",
    "diffusion_matrix", "drift_matrix", "f_function", "find_threshold",
    "gaussian_discord", "initial_cm", "instantaneous_phase", "integrate",
    "log_negativity", "phase_diff_variance", "phase_difference",
    "propagate_cm", "reduce", "run_sweep", "stationary_phase",
    "symplectic_eigenvalues", "thermal_occupation", "time_average",
    "validate",
]
