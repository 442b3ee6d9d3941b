import math

import numpy as np
import pytest

from spdiff.core import DiffState, DifferentiatorConfig, GainSchedule
from spdiff.errors import DivergenceError, GuardError, ValidationError
from spdiff.integrate import (EULER, RK4, IntegratorSpec, Trajectory,
                              simulate, simulate_raw, simulate_w_form, step)
from spdiff.metrics import steady_state_error, convergence_time
from spdiff.reference import TimeScaleSystem, lyapunov, rhs_timescale
from spdiff.signals import Polynomial, Sine

G300 = GainSchedule.fixed(300.0)
LINEAR6 = DifferentiatorConfig("linear", G300, a10=5.0, a20=2.0)
HYBRID6 = DifferentiatorConfig("hybrid-alt", G300, a10=5.0, a11=0.5, a20=2.0,
                               a21=0.5, alpha1=0.5, alpha2=0.5)
SINE = Sine(1.0, 1.0, 0.0)


class TestStep:
    def test_zero_field(self):
        y = step(lambda t, y: np.zeros_like(y), [1.0, -2.0, 3.0], 0.0, 0.5)
        np.testing.assert_array_equal(y, [1.0, -2.0, 3.0])

    def test_exponential_taylor(self):
        # RK4 on x' = x equals the 4th-order Taylor polynomial of e^h
        h = 0.1
        y = step(lambda t, y: y, [1.0], 0.0, h)
        expected = 1.0 + h + h**2 / 2.0 + h**3 / 6.0 + h**4 / 24.0
        assert y[0] == pytest.approx(expected, abs=1e-16)

    def test_harmonic_oscillator_period(self):
        f = lambda t, y: np.array([y[1], -y[0]])
        n = 6283
        h = 2.0 * math.pi / n
        y = np.array([1.0, 0.0])
        for i in range(n):
            y = step(f, y, i * h, h)
        assert abs(y[0] - 1.0) < 1e-9
        assert abs(y[1]) < 1e-9

    def test_euler(self):
        y = step(lambda t, y: y, [1.0], 0.0, 0.1, method=EULER)
        assert y[0] == pytest.approx(1.1, abs=1e-16)

    def test_non_finite_field(self):
        with pytest.raises(DivergenceError):
            step(lambda t, y: np.full_like(y, math.nan), [1.0], 0.0, 0.1)

    def test_bad_step(self):
        with pytest.raises(ValidationError):
            step(lambda t, y: y, [1.0], 0.0, -0.1)


class TestOrder:
    @staticmethod
    def global_error(method, h):
        n = int(round(1.0 / h))
        y = np.array([1.0])
        for i in range(n):
            y = step(lambda t, yy: yy, y, i * h, h, method)
        return abs(y[0] - math.e)

    def test_rk4_halving_ratio(self):
        ratio = self.global_error(RK4, 0.01) / self.global_error(RK4, 0.005)
        assert 12.0 <= ratio <= 20.0

    def test_euler_halving_ratio(self):
        ratio = self.global_error(EULER, 0.001) / self.global_error(EULER, 0.0005)
        assert 1.8 <= ratio <= 2.2


class TestSimulateRaw:
    def test_constant(self):
        traj = simulate_raw(lambda t, y: np.zeros_like(y), [2.0, -1.0],
                            (0.0, 1.0), IntegratorSpec(h=0.01))
        assert np.all(traj.y[:, 0] == 2.0)
        assert np.all(traj.y[:, 1] == -1.0)

    def test_decay(self):
        traj = simulate_raw(lambda t, y: -y, [1.0], (0.0, 1.0),
                            IntegratorSpec(h=1e-3))
        assert traj.y[-1, 0] == pytest.approx(math.exp(-1.0), abs=1e-10)

    def test_lyapunov_monotone_for_linear_reference(self):
        sys_ = TimeScaleSystem("linear", a10=1.0, a20=1.0)
        f = lambda t, z: np.array(rhs_timescale(sys_, z[0], z[1]))
        traj = simulate_raw(f, [1.0, 1.0], (0.0, 10.0), IntegratorSpec(h=1e-3))
        v = np.array([lyapunov(sys_, z1, z2) for z1, z2 in traj.y])
        assert np.all(np.diff(v) <= 1e-12)
        assert v[-1] < 1e-3 * v[0]


class TestSimulate:
    def test_zero_signal_stays_at_equilibrium(self):
        traj = simulate(HYBRID6, Polynomial([0.0]), (0.0, 0.01),
                        IntegratorSpec(h=1e-6))
        assert np.all(traj.x1 == 0.0)
        assert np.all(traj.x2 == 0.0)

    def test_deterministic(self):
        a = simulate(HYBRID6, SINE, (0.0, 0.02), IntegratorSpec(h=1e-6))
        b = simulate(HYBRID6, SINE, (0.0, 0.02), IntegratorSpec(h=1e-6))
        np.testing.assert_array_equal(a.x2, b.x2)
        np.testing.assert_array_equal(a.t, b.t)

    def test_decimation_preserves_samples(self):
        full = simulate(LINEAR6, SINE, (0.0, 0.01), IntegratorSpec(h=1e-6),
                        max_samples=None)
        thin = simulate(LINEAR6, SINE, (0.0, 0.01), IntegratorSpec(h=1e-6),
                        record_every=50)
        np.testing.assert_array_equal(thin.x2, full.x2[::50])
        np.testing.assert_array_equal(thin.t, full.t[::50])

    def test_max_samples_cap(self):
        traj = simulate(LINEAR6, SINE, (0.0, 0.1), IntegratorSpec(h=1e-6),
                        max_samples=1001)
        assert len(traj) <= 1001

    def test_guard_violation_names_required_step(self):
        with pytest.raises(GuardError, match="need h <="):
            simulate(LINEAR6, SINE, (0.0, 1.0), IntegratorSpec(h=1e-3))

    def test_guard_scales_with_gain(self):
        cfg = DifferentiatorConfig("linear", GainSchedule.fixed(10.0),
                                   a10=5.0, a20=2.0)
        simulate(cfg, SINE, (0.0, 0.1), IntegratorSpec(h=1e-3))  # 1e-3 <= 1/200

    def test_divergence_reports_time(self):
        with pytest.raises(DivergenceError) as err:
            simulate(LINEAR6, SINE, (0.0, 0.01), IntegratorSpec(h=1e-6),
                     init=DiffState(0.0, 2e9))
        assert err.value.t == pytest.approx(1e-6, rel=1e-6)

    def test_steady_state_matches_frequency_response(self):
        # independent oracle: e2 amplitude = |H(j) - j| from the transfer gain
        traj = simulate(LINEAR6, SINE, (0.0, 5.0), IntegratorSpec(h=1e-6))
        sse = steady_state_error(traj)
        eps = 1.0 / 300.0
        s = 1j
        h = s / (1.0 + (eps * eps * s * s + 2.0 * eps * s) / 5.0)
        expected = abs(h - s)
        assert sse < 1e-2            # "on the order of 1e-2 or smaller"
        assert sse == pytest.approx(expected, rel=0.05)

    def test_hybrid_convergence_time_near_8ms(self):
        traj = simulate(HYBRID6, SINE, (0.0, 5.0), IntegratorSpec(h=1e-6))
        ts = convergence_time(traj, 0.01)
        assert 0.004 <= ts <= 0.016   # 0.008 s within a factor of 2

    def test_span_validation(self):
        with pytest.raises(ValidationError):
            simulate(LINEAR6, SINE, (1.0, 1.0), IntegratorSpec(h=1e-6))

    def test_trajectory_columns(self):
        traj = simulate(LINEAR6, SINE, (0.0, 0.001), IntegratorSpec(h=1e-6))
        np.testing.assert_array_equal(traj.e1, traj.x1 - traj.v)
        np.testing.assert_array_equal(traj.e2, traj.x2 - traj.vdot)
        np.testing.assert_allclose(np.diff(traj.t), traj.h, rtol=1e-9)


class TestWForm:
    def test_matches_standard_realization(self):
        a = simulate(LINEAR6, SINE, (0.0, 0.2), IntegratorSpec(h=1e-6),
                     max_samples=None)
        b = simulate_w_form(5.0, 2.0, G300, SINE, (0.0, 0.2),
                            IntegratorSpec(h=1e-6), max_samples=None)
        assert np.max(np.abs(a.x2 - b.x2)) < 1e-9

    def test_validation(self):
        with pytest.raises(ValidationError):
            simulate_w_form(0.0, 2.0, G300, SINE, (0.0, 0.1))


class TestTrajectoryValidation:
    def test_non_uniform_rejected(self):
        t = np.array([0.0, 1.0, 3.0])
        z = np.zeros(3)
        with pytest.raises(ValidationError):
            Trajectory(t=t, x1=z, x2=z, v=z, vdot=z)

    def test_non_finite_rejected(self):
        t = np.array([0.0, 1.0, 2.0])
        z = np.zeros(3)
        bad = np.array([0.0, math.nan, 0.0])
        with pytest.raises(ValidationError):
            Trajectory(t=t, x1=bad, x2=z, v=z, vdot=z)
