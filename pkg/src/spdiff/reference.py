"""Time-scale reference systems, their Lyapunov functions and homogeneity.

Each differentiator is the boundary layer of a second-order system in the
stretched time tau: z1' = z2, z2' = f2(z1, z2).  These systems carry the
convergence story (exponential for the linear one, finite-time for the
power-law and hybrid ones), and they all admit the same family of Lyapunov
candidates

    V = a11*|z1|^(1+p1)/(1+p1) + (a10*z1^2 + z2^2)/2
    dV/dtau = -a21*|z2|^(1+p2) - a20*z2^2

with p1/p2 the inner/outer exponents and absent terms dropping out through
zero gains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import (HYBRID, HYBRID_ALT, LINEAR, NONLINEAR, NONLINEAR_ALT,
                   DifferentiatorConfig, GainSchedule, rhs)
from .errors import DivergenceError, ValidationError
from .integrate import _METHOD_CODES, DIVERGENCE_LIMIT, IntegratorSpec, \
    RawTrajectory, _count_steps, _pick_stride

_EMPTY = np.empty(0)
_UNIT_GAIN = GainSchedule.fixed(1.0)


@dataclass(frozen=True)
class TimeScaleSystem:
    """Reference system in stretched time; same parameter rules as the
    matching differentiator variant."""

    variant: str
    a10: float = 0.0
    a20: float = 0.0
    a11: float = 0.0
    a21: float = 0.0
    alpha: float | None = None
    alpha1: float | None = None
    alpha2: float | None = None

    def __post_init__(self):
        # reuse the differentiator validation wholesale
        object.__setattr__(self, "_config", DifferentiatorConfig(
            variant=self.variant, schedule=_UNIT_GAIN, a10=self.a10,
            a20=self.a20, a11=self.a11, a21=self.a21, alpha=self.alpha,
            alpha1=self.alpha1, alpha2=self.alpha2))

    @property
    def config(self) -> DifferentiatorConfig:
        return self._config

    @property
    def inner_exponent(self) -> float | None:
        return self._config.inner_exponent

    @property
    def outer_exponent(self) -> float | None:
        return self._config.outer_exponent


def rhs_timescale(system: TimeScaleSystem, z1: float, z2: float):
    """(dz1, dz2) in stretched time; the differentiator rhs at unit gain
    and zero input."""
    return rhs(system.config, (z1, z2), 0.0, 0.0)


def lyapunov(system: TimeScaleSystem, z1: float, z2: float) -> float:
    """Lyapunov candidate V(z1, z2); positive definite for every variant."""
    if not (math.isfinite(z1) and math.isfinite(z2)):
        raise ValidationError(f"lyapunov needs finite inputs, got ({z1}, {z2})")
    v = 0.5 * z2 * z2
    variant = system.variant
    if variant in (LINEAR, HYBRID, HYBRID_ALT):
        v += 0.5 * system.a10 * z1 * z1
    if variant != LINEAR:
        p1 = system.inner_exponent
        v += system.a11 * math.pow(abs(z1), 1.0 + p1) / (1.0 + p1)
    return v


def lyapunov_rate(system: TimeScaleSystem, z1: float, z2: float) -> float:
    """Analytic dV/dtau along trajectories; <= 0 everywhere by formula."""
    if not (math.isfinite(z1) and math.isfinite(z2)):
        raise ValidationError(f"lyapunov_rate needs finite inputs, got ({z1}, {z2})")
    rate = 0.0
    variant = system.variant
    if variant in (LINEAR, HYBRID, HYBRID_ALT):
        rate -= system.a20 * z2 * z2
    if variant != LINEAR:
        rate -= system.a21 * math.pow(abs(z2), 1.0 + system.outer_exponent)
    return rate


def homogeneity_weights(alpha: float, k: float) -> tuple[float, float]:
    """Dilation weights (r1, r2) making the power-law field homogeneous of
    degree k < 0: r1 = k(2-alpha)/(alpha-1), r2 = k/(alpha-1)."""
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    if not k < 0.0:
        raise ValidationError(f"degree k must be negative, got {k}")
    r1 = k * (2.0 - alpha) / (alpha - 1.0)
    r2 = k / (alpha - 1.0)
    return (r1, r2)


def homogeneity_residual(system: TimeScaleSystem, points, lambdas,
                         k: float = -1.0) -> float:
    """Max relative residual of f2(l^r1 z1, l^r2 z2) = l^(r2+k) f2(z1, z2)
    over the given points and scalings.  Only the pure power-law systems are
    homogeneous; hybrid variants are rejected."""
    if system.variant == NONLINEAR:
        r1, r2 = homogeneity_weights(system.alpha, k)
    elif system.variant == NONLINEAR_ALT:
        # r1*alpha1 = r2*alpha2 = r2 + k
        r2 = k / (system.alpha2 - 1.0)
        r1 = (r2 + k) / system.alpha1
    else:
        raise ValidationError(
            f"{system.variant} mixes linear and power terms; not homogeneous")
    worst = 0.0
    for z1, z2 in points:
        _, f = rhs_timescale(system, z1, z2)
        for lam in lambdas:
            _, fl = rhs_timescale(system, lam ** r1 * z1, lam ** r2 * z2)
            want = lam ** (r2 + k) * f
            denom = max(abs(want), abs(fl), 1e-300)
            worst = max(worst, abs(fl - want) / denom)
    return worst


def simulate_timescale(system: TimeScaleSystem, init, horizon: float,
                       spec: IntegratorSpec | None = None,
                       record_every: int = 1,
                       max_samples=None) -> RawTrajectory:
    """Integrate the reference system from tau = 0 to tau = horizon."""
    spec = spec or IntegratorSpec(h=1e-3)
    n_steps = _count_steps((0.0, horizon), spec.h)
    if max_samples is not None:
        record_every = max(record_every, _pick_stride(n_steps, max_samples))
    n_rec = n_steps // record_every + 1
    out_t = np.empty(n_rec)
    out_z1 = np.empty(n_rec)
    out_z2 = np.empty(n_rec)
    code, a10, a20, a11, a21, p1, p2 = system.config.kernel_params()
    try:
        _backend.kernel.run_sim(
            code, a10, a20, a11, a21, p1, p2,
            0, 1.0, 0.0, 0.0,              # fixed unit gain
            0, 0.0, 0.0, 0.0, 0.0,         # zero input signal
            _EMPTY, _EMPTY, _EMPTY, 0.0, 0,
            _METHOD_CODES[spec.method], 0.0, spec.h, n_steps, record_every,
            float(init[0]), float(init[1]), DIVERGENCE_LIMIT,
            out_t, out_z1, out_z2)
    except ArithmeticError as exc:
        raise DivergenceError(float(str(exc).split()[0])) from None
    return RawTrajectory(t=out_t, y=np.column_stack([out_z1, out_z2]))


def settling_time(traj: RawTrajectory, tolerance: float = 1e-3):
    """First tau after which max(|z1|, |z2|) stays <= tolerance through the
    end of the horizon; None when the trajectory never settles."""
    if len(traj) == 0:
        raise ValidationError("empty trajectory")
    if tolerance < 0.0:
        raise ValidationError(f"tolerance must be >= 0, got {tolerance}")
    norm = np.max(np.abs(traj.y), axis=1)
    bad = np.nonzero(norm > tolerance)[0]
    if bad.size == 0:
        return float(traj.t[0])
    last = bad[-1]
    if last + 1 >= len(traj):
        return None
    return float(traj.t[last + 1])


def exp_decay_fit(traj: RawTrajectory, floor_ratio: float = 1e-6):
    """Log-linear fit of the Euclidean norm over its decaying segment.

    Returns (slope, r_squared).  The segment runs from tau = 0 until the
    norm first drops below floor_ratio times its initial value (after that
    integration noise dominates the log).
    """
    norm = np.sqrt(np.sum(traj.y ** 2, axis=1))
    if norm[0] <= 0.0:
        raise ValidationError("decay fit needs a nonzero initial state")
    floor = floor_ratio * norm[0]
    below = np.nonzero(norm < floor)[0]
    end = below[0] if below.size else len(norm)
    if end < 3:
        raise ValidationError("decaying segment too short to fit")
    t = traj.t[:end]
    y = np.log(norm[:end])
    slope, intercept = np.polyfit(t, y, 1)
    fit = slope * t + intercept
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return float(slope), r2


def dissipation_residuals(system: TimeScaleSystem, traj: RawTrajectory,
                          guard_width: int | None = None):
    """Central-difference check of dV/dtau against the analytic rate.

    Returns (residual, valid) arrays over interior samples: residual is
    |FD - rate| / (1 + |rate|), and valid masks the samples where the
    central-difference oracle applies.  V is C1 but not C2 where z1 or z2
    crosses zero (the power terms kink there), so samples whose stencil
    neighbourhood straddles a sign change are excluded; guard_width defaults
    to 0.05 tau-units worth of samples.
    """
    z1 = traj.y[:, 0]
    z2 = traj.y[:, 1]
    if len(traj) < 3:
        raise ValidationError("need at least 3 samples")
    h = float(traj.t[1] - traj.t[0])
    V = np.array([lyapunov(system, a, b) for a, b in zip(z1, z2)])
    rate = np.array([lyapunov_rate(system, a, b) for a, b in zip(z1, z2)])
    fd = (V[2:] - V[:-2]) / (2.0 * h)
    residual = np.abs(fd - rate[1:-1]) / (1.0 + np.abs(rate[1:-1]))
    if guard_width is None:
        guard_width = max(1, int(round(0.05 / h)))
    valid = np.ones(len(traj), dtype=bool)
    if system.variant != LINEAR:
        for comp in (z1, z2):
            flips = np.nonzero(np.sign(comp[1:]) != np.sign(comp[:-1]))[0]
            for i in flips:
                valid[max(0, i - guard_width):i + guard_width + 2] = False
    return residual, valid[1:-1]
