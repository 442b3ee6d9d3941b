"""Test signals with analytic derivatives and corner metadata.

Every signal knows its value v(t), its derivative vdot(t) wherever that
exists, and the list of corner instants where only one-sided derivatives
exist (e.g. the slope flips of a triangular wave).  Additive noise, when
configured, is a pure function of (seed, evaluation time), so replaying a
run reproduces the same noisy stream regardless of call order.
"""

from __future__ import annotations

import csv
import math
import struct
from bisect import bisect_right
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import CornerError, CsvParseError, ValidationError

_U64 = (1 << 64) - 1
_TWO53 = 9007199254740992.0  # 2**53


def _mix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


def noise_unit(seed: int, t: float) -> float:
    """Deterministic uniform draw in [-1, 1) keyed on (seed, bits of t)."""
    bits = struct.unpack("<Q", struct.pack("<d", t))[0]
    z = _mix64(_mix64((seed & _U64) ^ bits))
    return float(z >> 11) * (2.0 / _TWO53) - 1.0


def _noise_unit_array(seed: int, t: np.ndarray) -> np.ndarray:
    bits = np.ascontiguousarray(t, dtype=np.float64).view(np.uint64)
    with np.errstate(over="ignore"):
        z = bits ^ np.uint64(seed & _U64)
        for _ in range(2):
            z = z + np.uint64(0x9E3779B97F4A7C15)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * (2.0 / _TWO53) - 1.0


@dataclass(frozen=True)
class NoiseSpec:
    """Uniform additive noise on [-amplitude, +amplitude), seeded."""

    amplitude: float
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0.0):
            raise ValidationError(f"noise amplitude must be >= 0, got {self.amplitude}")


class Corner(NamedTuple):
    t: float
    left: float
    right: float


class Signal:
    """Base class; subclasses implement the noise-free value/derivative."""

    noise: NoiseSpec | None = None

    # -- scalar interface -------------------------------------------------
    def value(self, t: float) -> float:
        v = self._value(t)
        if self.noise is not None and self.noise.amplitude > 0.0:
            v += self.noise.amplitude * noise_unit(self.noise.seed, t)
        return v

    def derivative(self, t: float) -> float:
        """Analytic derivative of the noise-free signal; raises CornerError
        exactly at corner instants (use corners() for the one-sided slopes)."""
        return self._derivative(t)

    # -- vector interface (trajectory bookkeeping) ------------------------
    def values(self, t: np.ndarray) -> np.ndarray:
        v = self._values(np.asarray(t, dtype=np.float64))
        if self.noise is not None and self.noise.amplitude > 0.0:
            v = v + self.noise.amplitude * _noise_unit_array(self.noise.seed, t)
        return v

    def derivatives(self, t: np.ndarray) -> np.ndarray:
        """Derivative sampled on a grid; corner instants get the right slope."""
        return self._derivatives(np.asarray(t, dtype=np.float64))

    def corners(self, t0: float, t1: float) -> list[Corner]:
        """Corner instants with (left, right) derivatives inside [t0, t1]."""
        return []

    # -- kernel packing ----------------------------------------------------
    _EMPTY = np.empty(0, dtype=np.float64)

    def kernel_params(self) -> tuple:
        """(kind, pa, pb, pc, pd, coeffs, times, values, noise_amp, noise_seed)."""
        kind, pa, pb, pc, pd, coeffs, times, values = self._packed()
        amp, seed = 0.0, 0
        if self.noise is not None:
            amp, seed = self.noise.amplitude, self.noise.seed & _U64
        return (kind, pa, pb, pc, pd, coeffs, times, values, amp, seed)

    def domain(self) -> tuple[float, float]:
        return (-math.inf, math.inf)


class Sine(Signal):
    """offset + amplitude * sin(angular_frequency * t + phase)."""

    def __init__(self, amplitude=1.0, angular_frequency=1.0, phase=0.0,
                 offset=0.0, noise=None):
        if angular_frequency <= 0.0:
            raise ValidationError("angular_frequency must be positive")
        self.amplitude = float(amplitude)
        self.angular_frequency = float(angular_frequency)
        self.phase = float(phase)
        self.offset = float(offset)
        self.noise = noise

    def _value(self, t):
        return self.offset + self.amplitude * math.sin(
            self.angular_frequency * t + self.phase)

    def _derivative(self, t):
        return self.amplitude * self.angular_frequency * math.cos(
            self.angular_frequency * t + self.phase)

    def _values(self, t):
        return self.offset + self.amplitude * np.sin(
            self.angular_frequency * t + self.phase)

    def _derivatives(self, t):
        return self.amplitude * self.angular_frequency * np.cos(
            self.angular_frequency * t + self.phase)

    def _packed(self):
        return (1, self.amplitude, self.angular_frequency, self.phase,
                self.offset, self._EMPTY, self._EMPTY, self._EMPTY)


class Triangular(Signal):
    """Periodic triangular wave, period T, starting at 0 rising.

    Rises with slope 4A/T for half a period (to 2A), falls back to 0 over
    the second half.  Corners sit at every half-period multiple k*T/2 with
    alternating one-sided slopes -/+ 4A/T.
    """

    def __init__(self, amplitude=1.0, period=2.0 * math.pi, noise=None):
        if amplitude <= 0.0 or period <= 0.0:
            raise ValidationError("triangular amplitude and period must be positive")
        self.amplitude = float(amplitude)
        self.period = float(period)
        self.noise = noise

    @property
    def slope(self) -> float:
        return 4.0 * self.amplitude / self.period

    def _fold(self, t):
        u = math.fmod(t, self.period)
        if u < 0.0:
            u += self.period
        return u

    def _value(self, t):
        u = self._fold(t)
        half = 0.5 * self.period
        return self.slope * u if u < half else self.slope * (self.period - u)

    def _derivative(self, t):
        u = self._fold(t)
        half = 0.5 * self.period
        if u == 0.0 or u == half:
            raise CornerError(
                f"t={t!r} is a corner of the triangular wave; "
                "query corners() for the one-sided slopes")
        return self.slope if u < half else -self.slope

    def _values(self, t):
        u = np.mod(t, self.period)
        half = 0.5 * self.period
        return np.where(u < half, self.slope * u, self.slope * (self.period - u))

    def _derivatives(self, t):
        u = np.mod(t, self.period)
        return np.where(u < 0.5 * self.period, self.slope, -self.slope)

    def corners(self, t0, t1):
        half = 0.5 * self.period
        s = self.slope
        out = []
        k = math.ceil(t0 / half - 1e-12)
        while k * half <= t1 + 1e-12:
            tc = k * half
            if t0 <= tc <= t1:
                if k % 2 == 0:   # valley: falling -> rising
                    out.append(Corner(tc, -s, s))
                else:            # peak: rising -> falling
                    out.append(Corner(tc, s, -s))
            k += 1
        return out

    def _packed(self):
        return (2, self.amplitude, self.period, 0.0, 0.0,
                self._EMPTY, self._EMPTY, self._EMPTY)


class Polynomial(Signal):
    """c0 + c1*t + c2*t^2 + ... (ascending coefficients)."""

    def __init__(self, coefficients, noise=None):
        coeffs = np.asarray(coefficients, dtype=np.float64)
        if coeffs.ndim != 1 or coeffs.size == 0 or not np.all(np.isfinite(coeffs)):
            raise ValidationError("polynomial needs a non-empty finite coefficient list")
        self.coefficients = coeffs
        self.noise = noise

    def _value(self, t):
        v = 0.0
        for c in self.coefficients[::-1]:
            v = v * t + c
        return v

    def _derivative(self, t):
        v = 0.0
        n = self.coefficients.size
        for i in range(n - 1, 0, -1):
            v = v * t + i * self.coefficients[i]
        return v

    def _values(self, t):
        v = np.zeros_like(t)
        for c in self.coefficients[::-1]:
            v = v * t + c
        return v

    def _derivatives(self, t):
        v = np.zeros_like(t)
        for i in range(self.coefficients.size - 1, 0, -1):
            v = v * t + i * self.coefficients[i]
        return v

    def _packed(self):
        return (3, 0.0, 0.0, 0.0, 0.0, self.coefficients, self._EMPTY, self._EMPTY)


class Sampled(Signal):
    """Piecewise-linear interpolant of (time, value) samples.

    The derivative is the segment slope; interior breakpoints are corners.
    Evaluation outside [times[0], times[-1]] is an error.
    """

    def __init__(self, times, values, noise=None):
        t = np.asarray(times, dtype=np.float64)
        v = np.asarray(values, dtype=np.float64)
        if t.ndim != 1 or t.size < 2:
            raise ValidationError("sampled signal needs at least two samples")
        if t.shape != v.shape:
            raise ValidationError(
                f"times and values length mismatch: {t.size} vs {v.size}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValidationError("sampled signal needs finite times and values")
        if np.any(np.diff(t) <= 0.0):
            raise ValidationError("sample times must be strictly increasing")
        if noise is not None and noise.amplitude > 0.0:
            # noise is baked into the stored samples (keyed on each sample
            # time) so the interpolant stays consistent with its slopes
            v = v + noise.amplitude * _noise_unit_array(noise.seed, t)
        self.times = t
        self.sample_values = v
        self.noise = None

    def domain(self):
        return (float(self.times[0]), float(self.times[-1]))

    def _check(self, t):
        if t < self.times[0] or t > self.times[-1]:
            raise ValidationError(
                f"t={t!r} outside sampled domain [{self.times[0]!r}, {self.times[-1]!r}]")

    def _segment(self, t):
        i = bisect_right(self.times, t) - 1
        return min(max(i, 0), self.times.size - 2)

    def _value(self, t):
        self._check(t)
        i = self._segment(t)
        ts, vs = self.times, self.sample_values
        slope = (vs[i + 1] - vs[i]) / (ts[i + 1] - ts[i])
        return float(vs[i] + slope * (t - ts[i]))

    def _derivative(self, t):
        self._check(t)
        interior = (t > self.times[0]) and (t < self.times[-1])
        if interior and t in self.times:
            raise CornerError(
                f"t={t!r} is a breakpoint of the sampled signal; "
                "query corners() for the one-sided slopes")
        i = self._segment(t)
        ts, vs = self.times, self.sample_values
        return float((vs[i + 1] - vs[i]) / (ts[i + 1] - ts[i]))

    def _values(self, t):
        if np.any(t < self.times[0]) or np.any(t > self.times[-1]):
            raise ValidationError("evaluation grid leaves the sampled domain")
        return np.interp(t, self.times, self.sample_values)

    def _derivatives(self, t):
        if np.any(t < self.times[0]) or np.any(t > self.times[-1]):
            raise ValidationError("evaluation grid leaves the sampled domain")
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1,
                      0, self.times.size - 2)
        slopes = np.diff(self.sample_values) / np.diff(self.times)
        return slopes[idx]

    def corners(self, t0, t1):
        out = []
        slopes = np.diff(self.sample_values) / np.diff(self.times)
        for i in range(1, self.times.size - 1):
            tc = float(self.times[i])
            if t0 <= tc <= t1:
                out.append(Corner(tc, float(slopes[i - 1]), float(slopes[i])))
        return out

    def _packed(self):
        return (4, 0.0, 0.0, 0.0, 0.0, self._EMPTY, self.times, self.sample_values)


def ingest_samples(times, values, interpolation="linear") -> Sampled:
    """Build a Sampled signal from measured (t, v) pairs."""
    if interpolation != "linear":
        raise ValidationError(f"unsupported interpolation {interpolation!r}")
    return Sampled(times, values)


def read_signal_csv(path) -> Sampled:
    """Strictly parse a two-column (t, v) CSV with a header row."""
    times, values = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if lineno == 1:
                if len(row) != 2:
                    raise CsvParseError(f"line 1: expected 2 header fields, got {len(row)}")
                continue
            if not row:
                continue
            if len(row) != 2:
                raise CsvParseError(f"line {lineno}: expected 2 fields, got {len(row)}")
            try:
                t, v = float(row[0]), float(row[1])
            except ValueError:
                raise CsvParseError(f"line {lineno}: non-numeric field in {row!r}") from None
            if times and t <= times[-1]:
                raise CsvParseError(
                    f"line {lineno}: time {t!r} not increasing (previous {times[-1]!r})")
            times.append(t)
            values.append(v)
    if len(times) < 2:
        raise CsvParseError("need at least two data rows")
    return Sampled(times, values)
