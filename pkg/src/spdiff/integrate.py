"""Fixed-step explicit integration of differentiator and reference systems.

The differentiator runs go through the selected backend kernel (compiled or
pure Python); `step` and `simulate_raw` are generic helpers for arbitrary
vector fields, used by the reference checks and the order-of-accuracy tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .core import DiffState, DifferentiatorConfig, GainSchedule, W_FORM_CODE
from .errors import DivergenceError, GuardError, ValidationError
from .signals import Signal

RK4 = "rk4"
EULER = "euler"
_METHOD_CODES = {RK4: 0, EULER: 1}

#: h must resolve the boundary layer: h <= eps_min / STIFFNESS_FACTOR, where
#: eps_min = 1 / max_t g(t).  The fast eigenvalues scale like g, and RK4's
#: stability region ends near |lambda h| ~ 2.8; 20 leaves comfortable margin.
STIFFNESS_FACTOR = 20.0

#: peaking is large but bounded; anything beyond this is a runaway run
DIVERGENCE_LIMIT = 1e9

#: default cap on retained samples per run (full rate available on request)
MAX_SAMPLES = 100_000


@dataclass(frozen=True)
class IntegratorSpec:
    method: str = RK4
    h: float = 1e-6

    def __post_init__(self):
        if self.method not in _METHOD_CODES:
            raise ValidationError(f"unknown method {self.method!r}")
        if not (math.isfinite(self.h) and self.h > 0.0):
            raise ValidationError(f"step size must be positive, got {self.h}")


@dataclass
class Trajectory:
    """Uniformly sampled run of one differentiator.

    e1 = x1 - v and e2 = x2 - vdot are the tracking errors; vdot uses the
    right-hand slope at corner instants.
    """

    t: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    v: np.ndarray
    vdot: np.ndarray
    e1: np.ndarray = field(init=False)
    e2: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.t.size
        for name in ("x1", "x2", "v", "vdot"):
            arr = getattr(self, name)
            if arr.size != n:
                raise ValidationError(f"column {name} has {arr.size} samples, expected {n}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"column {name} contains non-finite values")
        if n >= 2:
            dt = np.diff(self.t)
            h = dt[0]
            if np.any(np.abs(dt - h) > 1e-9 * max(1.0, abs(self.t[-1]))):
                raise ValidationError("trajectory samples are not uniformly spaced")
        self.e1 = self.x1 - self.v
        self.e2 = self.x2 - self.vdot

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def h(self) -> float:
        """Recording interval (integration step times any decimation)."""
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    def __len__(self) -> int:
        return self.t.size


@dataclass
class RawTrajectory:
    """Generic sampled run: times and an (n, d) state array."""

    t: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return self.t.size


def step(f, y, t: float, h: float, method: str = RK4):
    """One explicit step of y' = f(t, y); classical RK4 or forward Euler."""
    if h <= 0.0 or not math.isfinite(h):
        raise ValidationError(f"step size must be positive, got {h}")
    y = np.asarray(y, dtype=np.float64)

    def _eval(ts, ys):
        k = np.asarray(f(ts, ys), dtype=np.float64)
        if not np.all(np.isfinite(k)):
            raise DivergenceError(ts, f"vector field non-finite at t={ts:.12g}")
        return k

    k1 = _eval(t, y)
    if method == EULER:
        return y + h * k1
    if method != RK4:
        raise ValidationError(f"unknown method {method!r}")
    k2 = _eval(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = _eval(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = _eval(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _count_steps(t_span, h: float) -> int:
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValidationError(f"need t1 > t0, got span ({t0}, {t1})")
    n = int(round((t1 - t0) / h))
    if n < 1:
        raise ValidationError(f"span ({t0}, {t1}) shorter than one step h={h}")
    return n


def _pick_stride(n_steps: int, max_samples) -> int:
    """Smallest recording stride keeping <= max_samples, preferring exact
    divisors of n_steps so the final state is retained."""
    if max_samples is None or n_steps + 1 <= max_samples:
        return 1
    k0 = -(-n_steps // (max_samples - 1))
    for k in range(k0, min(n_steps, 2 * k0 + 64) + 1):
        if n_steps % k == 0:
            return k
    return k0


def simulate_raw(f, init, t_span, spec: IntegratorSpec | None = None,
                 record_every: int = 1, max_samples=None) -> RawTrajectory:
    """Integrate an arbitrary vector field f(t, y) over t_span."""
    spec = spec or IntegratorSpec()
    n_steps = _count_steps(t_span, spec.h)
    if record_every <= 0:
        raise ValidationError("record_every must be >= 1")
    if max_samples is not None:
        record_every = max(record_every, _pick_stride(n_steps, max_samples))
    t0 = float(t_span[0])
    y = np.asarray(init, dtype=np.float64)
    ts = [t0]
    ys = [y.copy()]
    for i in range(n_steps):
        t = t0 + i * spec.h
        y = step(f, y, t, spec.h, spec.method)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > DIVERGENCE_LIMIT:
            raise DivergenceError(t0 + (i + 1) * spec.h)
        if (i + 1) % record_every == 0:
            ts.append(t0 + (i + 1) * spec.h)
            ys.append(y.copy())
    return RawTrajectory(t=np.asarray(ts), y=np.vstack(ys))


def check_guard(schedule: GainSchedule, h: float):
    """Stiffness guard: h must resolve the fast time scale 1/g_max."""
    eps_min = 1.0 / schedule.g_max
    required = eps_min / STIFFNESS_FACTOR
    if h > required * (1.0 + 1e-12):
        raise GuardError(
            f"step h={h:g} too coarse for max gain {schedule.g_max:g}; "
            f"need h <= {required:g}")


def _run_packed(variant_code, gains, schedule: GainSchedule, signal: Signal,
                t_span, spec: IntegratorSpec, init, record_every, max_samples):
    check_guard(schedule, spec.h)
    n_steps = _count_steps(t_span, spec.h)
    t0 = float(t_span[0])
    lo, hi = signal.domain()
    if t0 < lo or t0 + n_steps * spec.h > hi:
        raise ValidationError(
            f"span ({t0}, {t0 + n_steps * spec.h}) leaves the signal domain "
            f"[{lo}, {hi}]")
    if record_every is None:
        record_every = _pick_stride(n_steps, max_samples)
    elif record_every <= 0:
        raise ValidationError("record_every must be >= 1")
    n_rec = n_steps // record_every + 1
    out_t = np.empty(n_rec)
    out_x1 = np.empty(n_rec)
    out_x2 = np.empty(n_rec)
    a10, a20, a11, a21, p1, p2 = gains
    sched_mode = 0 if schedule.mode == "fixed" else 1
    kind, pa, pb, pc, pd, coeffs, stimes, svalues, namp, nseed = signal.kernel_params()
    if isinstance(init, DiffState):
        x1_0, x2_0 = init.x1, init.x2
    else:
        x1_0, x2_0 = float(init[0]), float(init[1])
    try:
        _backend.kernel.run_sim(
            variant_code, a10, a20, a11, a21, p1, p2,
            sched_mode, schedule.g, schedule.mu, schedule.t_max,
            kind, pa, pb, pc, pd,
            np.ascontiguousarray(coeffs), np.ascontiguousarray(stimes),
            np.ascontiguousarray(svalues), namp, nseed,
            _METHOD_CODES[spec.method], t0, spec.h, n_steps, record_every,
            x1_0, x2_0, DIVERGENCE_LIMIT, out_t, out_x1, out_x2)
    except ArithmeticError as exc:
        bad_t = float(str(exc).split()[0])
        raise DivergenceError(bad_t) from None
    v = signal.values(out_t)
    vdot = signal.derivatives(out_t)
    return Trajectory(t=out_t, x1=out_x1, x2=out_x2, v=v, vdot=vdot)


def simulate(config: DifferentiatorConfig, signal: Signal, t_span,
             spec: IntegratorSpec | None = None, init=DiffState(),
             record_every: int | None = None,
             max_samples: int | None = MAX_SAMPLES) -> Trajectory:
    """Run one differentiator against a signal over t_span = (t0, t1).

    The retained samples are every record_every-th integration state
    (auto-chosen to keep at most max_samples when not given); decimation
    never alters retained values.
    """
    spec = spec or IntegratorSpec()
    code, a10, a20, a11, a21, p1, p2 = config.kernel_params()
    return _run_packed(code, (a10, a20, a11, a21, p1, p2), config.schedule,
                       signal, t_span, spec, init, record_every, max_samples)


def simulate_w_form(a10: float, a20: float, schedule: GainSchedule,
                    signal: Signal, t_span, spec: IntegratorSpec | None = None,
                    init=DiffState(), record_every: int | None = None,
                    max_samples: int | None = MAX_SAMPLES) -> Trajectory:
    """First-order-coupled realization of the linear differentiator:

        w1' = w2 - a20*g*(w1 - v)
        w2' = -a10*g^2*(w1 - v)

    The change of variables x1 = w1 - a20*w2/(a10*g), x2 = w2 maps it onto
    the standard linear form, so the x2/w2 trajectories coincide.  Recorded
    columns hold (w1, w2); e1 is w1 - v, the front-end residual.
    """
    if a10 <= 0.0 or a20 <= 0.0:
        raise ValidationError("w-form requires a10 > 0 and a20 > 0")
    spec = spec or IntegratorSpec()
    return _run_packed(W_FORM_CODE, (a10, a20, 0.0, 0.0, 0.0, 0.0), schedule,
                       signal, t_span, spec, init, record_every, max_samples)
