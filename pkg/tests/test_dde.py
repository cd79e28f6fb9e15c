import numpy as np
import pytest

from hlflock import (
    EmptyHorizon,
    HistoryBuffer,
    MisalignedDelay,
    NonFiniteState,
    OutOfWindow,
    StepperConfig,
    integrate,
    seed_history,
)
from hlflock.acceptance import ORDER_TEST, euler_delay_oracle


def const_history(c, dim=1):
    return lambda s: np.full(dim, float(c))


class TestSeeding:
    def test_constant_history_samples(self):
        buf = seed_history(const_history(2.5), tau=1.0, h=0.25)
        times, samples, _ = buf.arrays()
        assert len(buf) == 5
        assert np.allclose(times, [-1.0, -0.75, -0.5, -0.25, 0.0])
        assert np.all(samples == 2.5)

    def test_linear_history_samples_the_line(self):
        buf = seed_history(lambda s: np.array([s]), tau=1.0, h=0.5)
        times, samples, derivs = buf.arrays()
        assert np.allclose(times, [-1.0, -0.5, 0.0])
        assert np.allclose(samples[:, 0], [-1.0, -0.5, 0.0])
        assert np.allclose(derivs[:, 0], 1.0)  # finite differences exact on lines

    def test_zero_delay_single_sample(self):
        buf = seed_history(const_history(1.0), tau=0.0, h=0.1)
        assert len(buf) == 1
        assert buf.latest_time == 0.0

    def test_misaligned_delay_rejected(self):
        with pytest.raises(MisalignedDelay):
            seed_history(const_history(0.0), tau=1.0, h=0.3)

    def test_empty_horizon_rejected(self):
        with pytest.raises(EmptyHorizon):
            StepperConfig(h=0.1, t_end=0.0)

    def test_horizon_truncates_to_whole_steps(self):
        assert StepperConfig(h=0.05, t_end=2.0).n_steps == 40
        assert StepperConfig(h=0.05, t_end=1.03).n_steps == 20
        assert StepperConfig(h=0.05, t_end=0.01).n_steps == 1


class TestQuery:
    def test_grid_point_is_stored_sample(self):
        buf = seed_history(lambda s: np.array([np.sin(s)]), tau=1.0, h=0.25)
        _, samples, _ = buf.arrays()
        assert buf.query(-0.5)[0] == samples[2][0]

    def test_constant_history_everywhere(self):
        buf = seed_history(const_history(7.25), tau=1.0, h=0.25)
        for t in (-0.9, -0.63, -0.1, 0.0):
            assert buf.query(t)[0] == pytest.approx(7.25, rel=1e-14)

    def test_cubic_with_exact_derivatives_is_reproduced(self):
        # Hermite interpolation is exact on cubics when fed exact slopes
        p = np.poly1d([1.0, -2.0, 3.0, -1.0])
        dp = p.deriv()
        h = 0.5
        times = [-1.0, -0.5, 0.0]
        buf = HistoryBuffer(h=h, tau=1.0)
        buf.seed(times, [np.array([p(t)]) for t in times], [np.array([dp(t)]) for t in times])
        assert buf.query(-0.25)[0] == pytest.approx(p(-0.25), abs=1e-12)
        assert buf.query(-0.8)[0] == pytest.approx(p(-0.8), abs=1e-12)

    def test_out_of_window(self):
        buf = seed_history(const_history(0.0), tau=1.0, h=0.25)
        with pytest.raises(OutOfWindow):
            buf.query(-1.5)
        with pytest.raises(OutOfWindow):
            buf.query(0.5)

    def test_windowed_buffer_trims_old_samples(self):
        buf = seed_history(const_history(1.0), tau=0.5, h=0.25, window=0.5)
        cfg = StepperConfig(h=0.25, t_end=3.0, window=0.5)
        integrate(lambda t, y, yd: yd - y, buf, cfg)
        with pytest.raises(OutOfWindow):
            buf.query(0.0)
        assert buf.query(buf.latest_time - 0.5) is not None


class TestIntegrate:
    def test_constant_history_is_a_fixed_point(self):
        buf = seed_history(const_history(3.0), tau=1.0, h=0.25)
        traj = integrate(lambda t, y, yd: 0.8 * (yd - y), buf, StepperConfig(h=0.25, t_end=4.0))
        assert np.all(traj.states == 3.0)

    def test_windowed_run_matches_full_retention(self):
        def rhs(t, y, yd):
            return np.array([0.6 * (yd[0] - y[0])])

        hist = lambda s: np.array([np.cos(2 * s)])
        buf_full = seed_history(hist, 0.5, 0.05)
        traj_full = integrate(rhs, buf_full, StepperConfig(h=0.05, t_end=2.0))
        buf_win = seed_history(hist, 0.5, 0.05, window=0.5)
        traj_win = integrate(rhs, buf_win, StepperConfig(h=0.05, t_end=2.0, window=0.5))
        assert np.array_equal(traj_full.states, traj_win.states)

    def test_determinism_bitwise(self):
        def make():
            buf = seed_history(lambda s: np.array([np.sin(3 * s), np.cos(s)]), 0.5, 0.05)
            return integrate(
                lambda t, y, yd: np.array([yd[1] - y[0], 0.5 * (yd[0] - y[1])]),
                buf,
                StepperConfig(h=0.05, t_end=5.0),
            )

        a, b = make(), make()
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.derivs, b.derivs)

    def test_euler_never_interpolates(self):
        buf = seed_history(lambda s: np.array([np.sin(s)]), tau=0.5, h=0.1)
        integrate(
            lambda t, y, yd: 0.3 * (yd - y),
            buf,
            StepperConfig(h=0.1, t_end=3.0, scheme="explicit-euler"),
        )
        assert buf.interpolated_queries == 0

    def test_rk4_interpolates_only_half_steps(self):
        buf = seed_history(lambda s: np.array([np.sin(s)]), tau=0.5, h=0.1)
        integrate(lambda t, y, yd: 0.3 * (yd - y), buf, StepperConfig(h=0.1, t_end=1.0))
        assert buf.interpolated_queries == 10  # one off-grid lookup per step

    def test_non_finite_state_reports_time(self):
        buf = seed_history(const_history(1.0), tau=0.5, h=0.25)
        bad = lambda t, y, yd: np.array([np.inf])
        with pytest.raises(NonFiniteState) as err:
            integrate(bad, buf, StepperConfig(h=0.25, t_end=2.0))
        assert err.value.time == pytest.approx(0.25)

    def test_zero_delay_reduces_to_plain_rk4(self):
        # y' = -y from 1: classical rk4 with exact one-step multipliers
        buf = seed_history(const_history(1.0), tau=0.0, h=0.1)
        traj = integrate(lambda t, y, yd: -y, buf, StepperConfig(h=0.1, t_end=1.0))
        z = -0.1
        growth = 1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24
        assert traj.states[-1][0] == pytest.approx(growth**10, rel=1e-15)

    def test_trajectory_dense_query_spans_history_and_run(self):
        buf = seed_history(lambda s: np.array([1.0 + s]), tau=0.5, h=0.25)
        traj = integrate(lambda t, y, yd: 0.4 * (yd - y), buf, StepperConfig(h=0.25, t_end=2.0))
        assert traj.query(-0.25)[0] == pytest.approx(0.75, rel=1e-12)
        mid = traj.query(1.13)
        assert np.isfinite(mid).all()
        with pytest.raises(OutOfWindow):
            traj.query(2.5)


class TestConvergenceOrder:
    def test_rk4_order_at_least_two_vs_fine_reference(self):
        # reference: the same scheme far below the test range, so the
        # measured drop reflects the subject, not the reference
        a, tau, t_end, omega = (ORDER_TEST[k] for k in ("a", "tau", "t_end", "omega"))
        hist = lambda s: np.array([np.cos(omega * s)])
        rhs = lambda t, y, yd: a * (yd - y)

        def solve(h):
            traj = integrate(rhs, seed_history(hist, tau, h), StepperConfig(h=h, t_end=t_end))
            return traj.states[traj.run_slice][:, 0]

        h_ref = 0.0015625
        ref = solve(h_ref)
        errors = []
        for h in (0.1, 0.05, 0.025):
            stride = int(round(h / h_ref))
            errors.append(np.abs(solve(h) - ref[::stride]).max())
        ratios = [errors[i] / errors[i + 1] for i in range(2)]
        assert min(ratios) >= 4.0, ratios

    def test_euler_oracle_is_consistent_with_itself(self):
        # first-order reference: against a 4x-finer run of itself, deviations
        # scale like (4-1)/(2-1) = 3 when the step halves
        a, tau = 1.0, 0.5
        hist = lambda s: np.cos(s)
        fine = euler_delay_oracle(a, tau, hist, 2.0, 0.0001)[::4]
        coarse = euler_delay_oracle(a, tau, hist, 2.0, 0.0004)
        finer = euler_delay_oracle(a, tau, hist, 2.0, 0.0002)[::2]
        e_coarse = np.abs(coarse - fine).max()
        e_half = np.abs(finer - fine).max()
        assert e_coarse / e_half == pytest.approx(3.0, rel=0.2)
