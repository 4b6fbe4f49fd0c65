"""Numerical laboratory for the 1D defocusing nonlinear wave equation."""

__version__ = "0.1.0"

from .errors import (ConfigError, NumericalFault, PaddingError,
                     ResolutionExhausted, ResourceCapError)
from .fields import (FieldState, Grid, ModelParams, Norms, Profile,
                     gaussian_profile, initial_data, make_grid, noise_profile,
                     norms, traveling_profile, zero_profile)
from .integrator import (SolverParams, Trajectory, discrete_energy, evolve,
                         mirror_concat, nonlinear_difference_quotient,
                         read_snapshot, solver_params, step, write_snapshot)
from .kernels import BACKEND
from .stress_energy import (ParallelogramSpec, StressEnergyFields,
                            WindowFunction, case3_identity_residual,
                            case_bounds_check, conservation_residuals,
                            densities, energy_flux_identity, light_ray_flux,
                            parallelogram_integral, windowed_flux_functionals)
from .worldline import (ConcentrationTrace, Eps0Family, LipschitzEnvelope,
                        concentration_times, dichotomy_step, envelope_evaluate,
                        extract_lipschitz_worldline, holder_check,
                        is_spacelike, particle_number)
from .rademacher import (ApproxDiffSet, LipschitzSample,
                         MultiscaleDecomposition, QuietScaleResult,
                         ScaleWindow, approx_diff_set, decompose,
                         find_quiet_scale)
from .harness import (DecayCurve, ExperimentConfig, decay_curve, load_config,
                      run_experiment, scaling_fit, simulate)
