"""Differentiator configurations and right-hand sides.

Five second-order variants estimate a signal v(t) and its derivative:

  linear          dx2 = -a10*g^2*e - a20*g*x2
  nonlinear       dx2 = -a11*g^2*sig(e)^(alpha/(2-alpha)) - a21*g^(2-alpha)*sig(x2)^alpha
  nonlinear-alt   dx2 = -a11*g^2*sig(e)^alpha1           - a21*g^(2-alpha2)*sig(x2)^alpha2
  hybrid          linear + nonlinear terms, exponents from alpha
  hybrid-alt      linear + nonlinear terms, exponents alpha1/alpha2

with e = x1 - v, dx1 = x2, and g the (possibly time-varying) high gain.
Everything is written in gain form (g plays the role of 1/epsilon) so a
ramped gain may start from g(0) = 0: every term carries a positive power
of g and the vector field vanishes smoothly there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError

LINEAR = "linear"
NONLINEAR = "nonlinear"
NONLINEAR_ALT = "nonlinear-alt"
HYBRID = "hybrid"
HYBRID_ALT = "hybrid-alt"

VARIANTS = (LINEAR, NONLINEAR, NONLINEAR_ALT, HYBRID, HYBRID_ALT)

# kernel dispatch codes; 5 is the first-order-coupled realization of the
# linear variant (see integrate.simulate_w_form)
KERNEL_CODES = {LINEAR: 0, NONLINEAR: 1, NONLINEAR_ALT: 2, HYBRID: 3, HYBRID_ALT: 4}
W_FORM_CODE = 5

_LINEAR_FAMILY = (LINEAR, HYBRID, HYBRID_ALT)
_POWER_FAMILY = (NONLINEAR, NONLINEAR_ALT, HYBRID, HYBRID_ALT)


def sig(y: float, alpha: float) -> float:
    """Odd power function |y|**alpha * sign(y), with sig(0) = 0.

    Continuous but non-Lipschitz at 0 for alpha < 1, which is what makes the
    power-law variants finite-time convergent.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValidationError(f"sig exponent must be in (0, 1], got {alpha}")
    if not math.isfinite(y):
        raise ValidationError(f"sig argument must be finite, got {y}")
    if y == 0.0:
        return 0.0
    m = abs(y)
    m = math.sqrt(m) if alpha == 0.5 else math.pow(m, alpha)
    return m if y > 0.0 else -m


@dataclass(frozen=True)
class GainSchedule:
    """Fixed gain g, or the peaking-reduction ramp g(t) = min(mu*t, mu*t_max)."""

    mode: str = "fixed"
    g: float = 0.0
    mu: float = 0.0
    t_max: float = 0.0

    @staticmethod
    def fixed(g: float) -> "GainSchedule":
        if not (math.isfinite(g) and g > 0.0):
            raise ValidationError(f"fixed gain must be positive and finite, got {g}")
        return GainSchedule(mode="fixed", g=float(g))

    @staticmethod
    def ramp(mu: float, t_max: float) -> "GainSchedule":
        if not (math.isfinite(mu) and mu > 0.0):
            raise ValidationError(f"ramp rate mu must be positive, got {mu}")
        if not (math.isfinite(t_max) and t_max > 0.0):
            raise ValidationError(f"ramp t_max must be positive, got {t_max}")
        return GainSchedule(mode="ramp", mu=float(mu), t_max=float(t_max))

    def __post_init__(self):
        if self.mode not in ("fixed", "ramp"):
            raise ValidationError(f"unknown gain schedule mode {self.mode!r}")

    @property
    def g_max(self) -> float:
        return self.g if self.mode == "fixed" else self.mu * self.t_max

    def gain_at(self, t: float) -> float:
        if t < 0.0 or not math.isfinite(t):
            raise ValidationError(f"gain requested at invalid time t={t}")
        if self.mode == "fixed":
            return self.g
        a = self.mu * t
        b = self.mu * self.t_max
        return a if a < b else b


def gain_at(schedule: GainSchedule, t: float) -> float:
    return schedule.gain_at(t)


@dataclass(frozen=True)
class DiffState:
    """Differentiator state: x1 tracks the signal, x2 its derivative."""

    x1: float = 0.0
    x2: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x1) and math.isfinite(self.x2)):
            raise ValidationError(f"state must be finite, got ({self.x1}, {self.x2})")


@dataclass(frozen=True)
class DifferentiatorConfig:
    """One differentiator variant with its gains, exponents and gain schedule.

    Gains without a role in the chosen variant are ignored.  Validation runs
    at construction; the right-hand side assumes a validated config.
    """

    variant: str
    schedule: GainSchedule
    a10: float = 0.0
    a20: float = 0.0
    a11: float = 0.0
    a21: float = 0.0
    alpha: float | None = None
    alpha1: float | None = None
    alpha2: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(
                f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        for name in ("a10", "a20", "a11", "a21"):
            val = getattr(self, name)
            if not math.isfinite(val) or val < 0.0:
                raise ValidationError(f"{name} must be finite and >= 0, got {val}")
        if self.variant in _LINEAR_FAMILY:
            if not (self.a10 > 0.0 and self.a20 > 0.0):
                raise ValidationError(
                    f"{self.variant} requires a10 > 0 and a20 > 0")
        if self.variant in _POWER_FAMILY:
            if not (self.a11 > 0.0 and self.a21 > 0.0):
                raise ValidationError(
                    f"{self.variant} requires a11 > 0 and a21 > 0")
        if self.variant in (NONLINEAR, HYBRID):
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ValidationError(
                    f"{self.variant} requires alpha in (0, 1), got {self.alpha}")
        if self.variant in (NONLINEAR_ALT, HYBRID_ALT):
            a1, a2 = self.alpha1, self.alpha2
            if a2 is None or not 0.0 < a2 < 1.0:
                raise ValidationError(
                    f"{self.variant} requires alpha2 in (0, 1), got {a2}")
            lo = a2 / (2.0 - a2)
            if a1 is None or not lo < a1 < 1.0:
                raise ValidationError(
                    f"{self.variant} requires alpha2/(2-alpha2) < alpha1 < 1, "
                    f"i.e. alpha1 in ({lo:.6g}, 1), got {a1}")
        # derived inner exponent stays in (0, 1) for every valid config
        p1 = self.inner_exponent
        if p1 is not None:
            assert 0.0 < p1 < 1.0

    @property
    def inner_exponent(self) -> float | None:
        """Exponent on the tracking error e inside sig(e)^p."""
        if self.variant in (NONLINEAR, HYBRID):
            return self.alpha / (2.0 - self.alpha)
        if self.variant in (NONLINEAR_ALT, HYBRID_ALT):
            return self.alpha1
        return None

    @property
    def outer_exponent(self) -> float | None:
        """Exponent on the velocity state inside sig(x2)^p."""
        if self.variant in (NONLINEAR, HYBRID):
            return self.alpha
        if self.variant in (NONLINEAR_ALT, HYBRID_ALT):
            return self.alpha2
        return None

    def kernel_params(self) -> tuple:
        """(variant_code, a10, a20, a11, a21, p1, p2) for the backends."""
        p1 = self.inner_exponent
        p2 = self.outer_exponent
        return (KERNEL_CODES[self.variant], self.a10, self.a20, self.a11,
                self.a21, 0.0 if p1 is None else p1, 0.0 if p2 is None else p2)


def rhs(config: DifferentiatorConfig, state, v: float, t: float):
    """Right-hand side (dx1, dx2) of the differentiator at time t.

    `state` is a DiffState or an (x1, x2) pair.  This is the reference
    implementation; the compiled kernel reproduces it term for term.
    """
    if isinstance(state, DiffState):
        x1, x2 = state.x1, state.x2
    else:
        x1, x2 = state
    if not (math.isfinite(x1) and math.isfinite(x2) and math.isfinite(v)):
        raise ValidationError(
            f"rhs needs finite inputs, got state=({x1}, {x2}), v={v}")
    g = config.schedule.gain_at(t)
    e = x1 - v
    gg = g * g
    variant = config.variant
    if variant == LINEAR:
        return (x2, -(config.a10 * gg) * e - (config.a20 * g) * x2)
    p1 = config.inner_exponent
    p2 = config.outer_exponent
    cep = config.a11 * gg
    cxp = config.a21 * math.pow(g, 2.0 - p2)
    if variant in (NONLINEAR, NONLINEAR_ALT):
        return (x2, -cep * sig(e, p1) - cxp * sig(x2, p2))
    return (x2, -(config.a10 * gg) * e - cep * sig(e, p1)
            - (config.a20 * g) * x2 - cxp * sig(x2, p2))
