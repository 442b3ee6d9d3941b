"""Singular-perturbation signal differentiators.

Second-order observers whose state x2 tracks the derivative of an input
signal: a linear high-gain variant, finite-time power-law variants, and
hybrid variants combining both.  The package bundles the stretched-time
reference systems with their Lyapunov verifiers, test-signal generators,
tracking metrics, and an experiment CLI; the hot integration loops run in a
compiled core with a pure-Python fallback.
"""

from ._backend import COMPILED, backend_name
from .core import (HYBRID, HYBRID_ALT, LINEAR, NONLINEAR, NONLINEAR_ALT,
                   VARIANTS, DiffState, DifferentiatorConfig, GainSchedule,
                   gain_at, rhs, sig)
from .errors import (CornerError, CsvParseError, DivergenceError, GuardError,
                     ValidationError)
from .integrate import (EULER, RK4, IntegratorSpec, RawTrajectory, Trajectory,
                        simulate, simulate_raw, simulate_w_form, step)
from .metrics import (MetricsReport, build_report, chattering_index,
                      convergence_time, epsilon_order, fit_sinusoid,
                      linear_freq_response, peak_transient,
                      steady_state_error)
from .reference import (TimeScaleSystem, exp_decay_fit, homogeneity_residual,
                        homogeneity_weights, lyapunov, lyapunov_rate,
                        rhs_timescale, settling_time, simulate_timescale)
from .signals import (Corner, NoiseSpec, Polynomial, Sampled, Signal, Sine,
                      Triangular, ingest_samples, read_signal_csv)

__version__ = "0.1.0"
