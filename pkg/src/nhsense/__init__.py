"""Sensitivity, noise and stability of driven nonreciprocal bosonic chains."""

__version__ = "0.1.0"

from .conditions import (ConditionReport, check_c1, check_c2, check_c3, check_c4,
                         check_conditions, repair_to_c1, robustness_probe,
                         synthesize_balanced_gain)
from .errors import (ConditioningError, ConfigError, ConvergenceError, DivergentSeriesError,
                     NHSenseError, ParameterError, UnstableDynamicsError, ZeroPhotonError)
from .model import (CouplingTemplate, NoiseInputMap, QuadratureGenerator, SensorParams,
                    assemble_generator, build_h_p, build_h_x, build_noise_input_map,
                    derive_params)
from .response import (InformationMatrices, SensingReport, information_matrices,
                       n_tot_linear, noise_power_beyond, noise_power_linear,
                       signal_power_beyond, signal_power_linear, snr_beyond,
                       snr_per_photon_linear, steady_state_mean)
from .stability import (StabilityReport, analyze_stability, gamma_stability_scan,
                        necessary_bound_case1, necessary_bound_case2, spectral_stability)
from .timedomain import (TrajectoryEnsemble, lyapunov_covariance, monte_carlo_noise_power,
                         steady_mean_ode)

__all__ = [
    "ConditionReport", "ConditioningError", "ConfigError", "ConvergenceError",
    "CouplingTemplate", "DivergentSeriesError", "InformationMatrices", "NHSenseError",
    "NoiseInputMap", "ParameterError", "QuadratureGenerator", "SensingReport", "SensorParams",
    "StabilityReport", "TrajectoryEnsemble", "UnstableDynamicsError", "ZeroPhotonError",
    "analyze_stability", "assemble_generator", "build_h_p", "build_h_x",
    "build_noise_input_map", "check_c1", "check_c2", "check_c3", "check_c4",
    "check_conditions", "derive_params", "gamma_stability_scan", "information_matrices",
    "lyapunov_covariance", "monte_carlo_noise_power", "n_tot_linear", "necessary_bound_case1",
    "necessary_bound_case2", "noise_power_beyond", "noise_power_linear", "repair_to_c1",
    "robustness_probe", "signal_power_beyond", "signal_power_linear", "snr_beyond",
    "snr_per_photon_linear", "spectral_stability", "steady_mean_ode", "steady_state_mean",
    "synthesize_balanced_gain",
]
