"""Tracking-performance metrics and the linear frequency-response oracle."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .integrate import Trajectory

#: fraction of max|vdot| that defines the convergence band
DEFAULT_BAND = 0.01
#: peaking transients live on the 1/g time scale; 0.1 s covers it at the
#: gains used here
DEFAULT_PEAK_WINDOW = 0.1
#: fraction of the horizon treated as the steady-state window
STEADY_WINDOW_FRACTION = 0.2
DEFAULT_DEADBAND = 1e-4

CSV_COLUMNS = ("label", "converged", "convergence_time", "steady_state_error",
               "peak_transient", "chattering_index", "wall_time_s", "notes")


def convergence_time(traj: Trajectory, band_fraction: float = DEFAULT_BAND):
    """First t* with |e2(t)| <= band_fraction * max|vdot| for all t >= t*.

    Returns None when the error still leaves the band at the end of the
    horizon.  Larger bands can only give earlier (or equal) times.
    """
    if not 0.0 < band_fraction < 1.0:
        raise ValidationError(f"band_fraction must be in (0, 1), got {band_fraction}")
    band = band_fraction * float(np.max(np.abs(traj.vdot)))
    bad = np.nonzero(np.abs(traj.e2) > band)[0]
    if bad.size == 0:
        return float(traj.t[0])
    last = bad[-1]
    if last + 1 >= len(traj):
        return None
    return float(traj.t[last + 1])


def steady_state_error(traj: Trajectory,
                       window_fraction: float = STEADY_WINDOW_FRACTION) -> float:
    """sup|e2| over the final window_fraction of the horizon."""
    if not 0.0 < window_fraction <= 1.0:
        raise ValidationError(f"window_fraction must be in (0, 1], got {window_fraction}")
    n = len(traj)
    start = min(n - 1, int(math.floor(n * (1.0 - window_fraction))))
    return float(np.max(np.abs(traj.e2[start:])))


def peak_transient(traj: Trajectory, window: float = DEFAULT_PEAK_WINDOW) -> float:
    """max|x2| over [t0, t0 + window]."""
    t_end = traj.t[0] + window
    if window > traj.t[-1] - traj.t[0] + 1e-12:
        raise ValidationError(
            f"peak window {window:g} exceeds the horizon {traj.t[-1] - traj.t[0]:g}")
    mask = traj.t <= t_end
    return float(np.max(np.abs(traj.x2[mask])))


def chattering_index(traj: Trajectory, deadband: float = DEFAULT_DEADBAND,
                     band_fraction: float = DEFAULT_BAND) -> float:
    """Sign reversals per second of the steady-state e2 increments.

    Increments with |delta| <= deadband are ignored; a reversal is a sign
    change between consecutive significant increments.  The steady-state
    window starts at the convergence time; a non-converged trajectory is an
    error.
    """
    t_conv = convergence_time(traj, band_fraction)
    if t_conv is None:
        raise ValidationError("trajectory never converged; no steady-state window")
    mask = traj.t >= t_conv
    e2 = traj.e2[mask]
    t = traj.t[mask]
    span = float(t[-1] - t[0]) if t.size > 1 else 0.0
    if span <= 0.0:
        return 0.0
    delta = np.diff(e2)
    sig = np.sign(delta[np.abs(delta) > deadband])
    if sig.size < 2:
        return 0.0
    reversals = int(np.count_nonzero(sig[1:] != sig[:-1]))
    return reversals / span


def epsilon_order(points) -> float:
    """Least-squares slope of log(error) versus log(epsilon).

    Non-positive error values sit below the noise floor and are excluded;
    fewer than 3 usable points is an error.
    """
    slope, _, used, _ = epsilon_order_fit(points)
    return slope


def epsilon_order_fit(points):
    """(slope, intercept, points_used, points_excluded) of the log-log fit."""
    pts = [(float(e), float(err)) for e, err in points]
    if any(e <= 0.0 or not math.isfinite(e) for e, _ in pts):
        raise ValidationError("epsilon values must be positive and finite")
    used = [(e, err) for e, err in pts if err > 0.0 and math.isfinite(err)]
    excluded = len(pts) - len(used)
    if len(used) < 3:
        raise ValidationError(
            f"need >= 3 points with positive error, have {len(used)}")
    x = np.log([e for e, _ in used])
    y = np.log([err for _, err in used])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept), len(used), excluded


def linear_freq_response(a10: float, a20: float, epsilon: float,
                         omega: float) -> tuple[float, float]:
    """Analytic gain of the linear differentiator from v to x2 at s = j*omega:

        H(s) = s / (1 + (eps^2 s^2 + a20 eps s) / a10)

    Returns (magnitude, phase).  As eps -> 0 the gain tends to the ideal
    differentiator s.
    """
    if omega < 0.0:
        raise ValidationError(f"omega must be >= 0, got {omega}")
    if epsilon <= 0.0 or a10 <= 0.0 or a20 <= 0.0:
        raise ValidationError("a10, a20 and epsilon must be positive")
    s = 1j * omega
    h = s / (1.0 + (epsilon * epsilon * s * s + a20 * epsilon * s) / a10)
    return (abs(h), cmath.phase(h))


def fit_sinusoid(t, y, omega: float) -> tuple[float, float]:
    """Least-squares fit y ~ amp * sin(omega t + phase); returns (amp, phase)."""
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    basis = np.column_stack([np.sin(omega * t), np.cos(omega * t)])
    (a, b), *_ = np.linalg.lstsq(basis, y, rcond=None)
    return (float(math.hypot(a, b)), float(math.atan2(b, a)))


@dataclass
class MetricsReport:
    """Flat summary of one run; serializes to key=value text and a CSV row."""

    label: str = "run"
    convergence_time: float | None = None
    steady_state_error: float = math.nan
    peak_transient: float = math.nan
    chattering_index: float | None = None
    wall_time_s: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_text(self) -> str:
        conv = "not converged" if self.convergence_time is None \
            else f"{self.convergence_time:.9g}"
        chat = "" if self.chattering_index is None else f"{self.chattering_index:.9g}"
        wall = "" if self.wall_time_s is None else f"{self.wall_time_s:.4g}"
        lines = [
            f"label = {self.label}",
            f"convergence_time = {conv}",
            f"steady_state_error = {self.steady_state_error:.9g}",
            f"peak_transient = {self.peak_transient:.9g}",
            f"chattering_index = {chat}",
            f"wall_time_s = {wall}",
            f"notes = {'; '.join(self.notes)}",
        ]
        return "\n".join(lines)

    def csv_row(self) -> list[str]:
        return [
            self.label,
            "1" if self.convergence_time is not None else "0",
            "" if self.convergence_time is None else f"{self.convergence_time:.17g}",
            f"{self.steady_state_error:.17g}",
            f"{self.peak_transient:.17g}",
            "" if self.chattering_index is None else f"{self.chattering_index:.17g}",
            "" if self.wall_time_s is None else f"{self.wall_time_s:.6g}",
            "; ".join(self.notes),
        ]


def build_report(traj: Trajectory, label: str = "run",
                 band_fraction: float = DEFAULT_BAND,
                 peak_window: float = DEFAULT_PEAK_WINDOW,
                 deadband: float = DEFAULT_DEADBAND,
                 fast_time_constant: float | None = None,
                 wall_time_s: float | None = None) -> MetricsReport:
    """Compute the standard metric set for one trajectory."""
    notes = []
    horizon = float(traj.t[-1] - traj.t[0])
    if fast_time_constant is not None and horizon < 10.0 * fast_time_constant:
        notes.append(
            f"horizon {horizon:g} shorter than 10x the fast time constant "
            f"{fast_time_constant:g}; convergence time unreliable")
    t_conv = convergence_time(traj, band_fraction)
    chat = None
    if t_conv is None:
        notes.append("not converged within the horizon")
    else:
        chat = chattering_index(traj, deadband, band_fraction)
    window = min(peak_window, horizon)
    return MetricsReport(
        label=label,
        convergence_time=t_conv,
        steady_state_error=steady_state_error(traj),
        peak_transient=peak_transient(traj, window),
        chattering_index=chat,
        wall_time_s=wall_time_s,
        notes=notes,
    )
