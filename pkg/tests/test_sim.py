import numpy as np
import pytest

from hlflock import (
    ConstantInitialData,
    CuckerSmaleKernel,
    HistoryExhausted,
    HLGraph,
    LinearInitialData,
    MisalignedDelay,
    PowerDecayForcing,
    SampledInitialData,
    SimSpec,
    StepperConfig,
    flock_rhs,
    integrate,
    make_flock_rhs,
    pack_state,
    positions,
    run,
    run_scalar,
    scalar_rhs,
    velocities,
)
from hlflock.sim import seed_flock_history


def chain_spec(n=2, beta=0.0, tau=0.5, h=0.01, t_end=5.0, x=None, v=None, dim=1, forcing=None):
    x = x if x is not None else [[float(i)] for i in range(n)]
    v = v if v is not None else [[0.0]] + [[1.0]] * (n - 1)
    kwargs = {}
    if forcing is not None:
        kwargs["forcing"] = forcing
    return SimSpec(
        graph=HLGraph.chain(n),
        kernel=CuckerSmaleKernel(H=1.0, sigma=1.0, beta=beta),
        tau=tau,
        dim=dim,
        initial=ConstantInitialData(positions=x, velocities=v),
        stepper=StepperConfig(h=h, t_end=t_end),
        **kwargs,
    )


class TestStateLayout:
    def test_pack_and_views_roundtrip(self):
        x = np.arange(6.0).reshape(3, 2)
        v = np.arange(6.0, 12.0).reshape(3, 2)
        state = pack_state(x, v)
        assert state.shape == (12,)
        assert np.array_equal(positions(state, 3, 2), x)
        assert np.array_equal(velocities(state, 3, 2), v)

    def test_sampled_initial_data_interpolates(self):
        data = SampledInitialData(
            s_grid=np.array([-1.0, 0.0]),
            positions=np.array([[[0.0]], [[2.0]]]),
            velocities=np.array([[[1.0]], [[1.0]]]),
        )
        state = data.state_at(-0.5)
        assert state[0] == pytest.approx(1.0)


class TestFlockRhs:
    def test_consensus_is_an_equilibrium(self):
        spec = chain_spec(n=3, v=[[0.5], [0.5], [0.5]])
        state = spec.initial.state_at(0.0)
        out = flock_rhs(spec, 0.0, state, state)
        assert np.array_equal(out[3:], np.zeros(3))  # all accelerations vanish
        assert np.array_equal(out[:3], velocities(state, 3, 1).ravel())

    def test_two_agent_constant_kernel_form(self):
        spec = chain_spec(n=2, beta=0.0)
        now = pack_state([[0.0], [1.0]], [[0.0], [0.3]])
        delayed = pack_state([[0.0], [5.0]], [[0.0], [9.9]])
        out = flock_rhs(spec, 0.0, now, delayed)
        # follower pulled toward the leader's *delayed* velocity at unit rate,
        # evaluated against its own *current* velocity
        assert out[3] == pytest.approx(1.0 * (0.0 - 0.3))

    def test_leader_acceleration_is_zero_without_forcing(self):
        spec = chain_spec(n=4)
        now = spec.initial.state_at(0.0)
        out = flock_rhs(spec, 0.0, now, now)
        assert out[4] == 0.0

    def test_driven_leader_takes_the_forcing(self):
        spec = chain_spec(n=2, forcing=PowerDecayForcing(amplitude=2.0, mu=2.0))
        now = spec.initial.state_at(0.0)
        out = flock_rhs(spec, 1.0, now, now)
        assert out[2] == pytest.approx(2.0 * 0.25)

    def test_edge_weights_scale_the_rate(self):
        graph = HLGraph.from_leader_lists([(), (1,)], weights={(2, 1): 2.5})
        spec = SimSpec(
            graph=graph,
            kernel=CuckerSmaleKernel(H=1.0, sigma=1.0, beta=0.0),
            tau=0.5,
            dim=1,
            initial=ConstantInitialData(positions=[[0.0], [1.0]], velocities=[[0.0], [1.0]]),
            stepper=StepperConfig(h=0.01, t_end=1.0),
        )
        now = spec.initial.state_at(0.0)
        out = flock_rhs(spec, 0.0, now, now)
        assert out[3] == pytest.approx(2.5 * (0.0 - 1.0))


class TestSpecValidation:
    def test_misaligned_delay_rejected_before_integration(self):
        with pytest.raises(MisalignedDelay):
            chain_spec(tau=0.5, h=0.3)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            SimSpec(
                graph=HLGraph.chain(3),
                kernel=CuckerSmaleKernel(),
                tau=0.0,
                dim=1,
                initial=ConstantInitialData(positions=[[0.0]], velocities=[[0.0]]),
                stepper=StepperConfig(h=0.1, t_end=1.0),
            )

    def test_negative_delay_rejected(self):
        with pytest.raises(ValueError):
            chain_spec(tau=-0.5)


class TestRun:
    def test_single_agent_moves_linearly(self):
        spec = SimSpec(
            graph=HLGraph.from_leader_lists([()]),
            kernel=CuckerSmaleKernel(),
            tau=0.5,
            dim=2,
            initial=ConstantInitialData(positions=[[1.0, 2.0]], velocities=[[0.5, -0.25]]),
            stepper=StepperConfig(h=0.05, t_end=4.0),
        )
        traj, diag = run(spec)
        sl = traj.run_slice
        t = traj.times[sl]
        expect_x = 1.0 + 0.5 * t
        assert np.allclose(traj.states[sl][:, 0], expect_x, atol=1e-12)
        assert np.allclose(traj.states[sl][:, 2:4], [0.5, -0.25], atol=0)
        assert diag.V.max() == 0.0

    def test_two_agent_constant_kernel_decays_exponentially(self):
        spec = chain_spec(n=2, beta=0.0, tau=0.5, h=0.01, t_end=8.0)
        traj, diag = run(spec)
        sl = traj.run_slice
        t = traj.times[sl]
        gap = np.abs(traj.states[sl][:, 3] - traj.states[sl][:, 2])
        assert np.max(np.abs(gap - np.exp(-t)) / np.exp(-t)) < 1e-6

    def test_velocity_diameter_shrinks_with_divergent_tail(self):
        spec = chain_spec(n=2, beta=0.25, tau=0.5, h=0.01, t_end=20.0)
        _, diag = run(spec)
        assert diag.V[-1] < diag.V[0]

    def test_leader_trajectory_independent_of_followers(self):
        base = chain_spec(n=3, beta=0.25, v=[[0.7], [1.0], [-1.0]], t_end=3.0)
        perturbed = chain_spec(n=3, beta=0.25, v=[[0.7], [-2.0], [0.4]], t_end=3.0)
        traj_a, _ = run(base)
        traj_b, _ = run(perturbed)
        # columns of agent 1: x in 0, v in 3 (layout x1 x2 x3 v1 v2 v3)
        assert np.array_equal(traj_a.states[:, 0], traj_b.states[:, 0])
        assert np.array_equal(traj_a.states[:, 3], traj_b.states[:, 3])

    def test_equal_velocities_stay_equal_exactly(self):
        spec = chain_spec(n=4, beta=0.25, v=[[0.3]] * 4, x=[[0.0], [1.0], [3.0], [6.0]], t_end=5.0)
        traj, diag = run(spec)
        assert diag.V.max() == 0.0
        assert np.all(diag.cross_v == 0.0)  # delayed cross-differences too

    def test_two_agent_gap_non_increasing_after_delay(self):
        spec = SimSpec(
            graph=HLGraph.chain(2),
            kernel=CuckerSmaleKernel(H=1.0, sigma=1.0, beta=0.25),
            tau=0.5,
            dim=1,
            initial=LinearInitialData(
                positions=[[0.0], [2.0]],
                velocities=[[0.2], [1.4]],
                velocity_slopes=[[0.5], [-0.3]],
            ),
            stepper=StepperConfig(h=0.01, t_end=10.0),
        )
        traj, diag = run(spec)
        after = diag.times >= spec.tau - 1e-12
        gaps = diag.V[after]
        assert np.all(np.diff(gaps) <= 1e-9)

    def test_hull_confinement_quick(self):
        rng = np.random.default_rng(7)
        spec = SimSpec(
            graph=HLGraph.from_leader_lists([(), (1,), (1, 2), (2,), (1, 3, 4)]),
            kernel=CuckerSmaleKernel(H=1.0, sigma=1.0, beta=0.5),
            tau=0.25,
            dim=2,
            initial=ConstantInitialData(
                positions=rng.uniform(-2, 2, (5, 2)), velocities=rng.uniform(-1, 1, (5, 2))
            ),
            stepper=StepperConfig(h=0.05, t_end=6.0),
        )
        traj, _ = run(spec)
        v0 = np.linalg.norm(spec.initial.velocities, axis=1).max()
        v_run = traj.states[traj.run_slice][:, 10:].reshape(-1, 5, 2)
        assert np.linalg.norm(v_run, axis=2).max() <= v0 * (1 + 1e-9)


class TestScalarSystem:
    def test_equal_values_are_stationary(self):
        spec = chain_spec(n=3, beta=0.25, t_end=2.0)
        flock_traj = integrate(make_flock_rhs(spec), seed_flock_history(spec), spec.stepper)
        eta = run_scalar(spec, flock_traj, lambda s: np.full(3, 1.5))
        assert np.all(eta.states == 1.5)

    def test_first_value_constant(self):
        spec = chain_spec(n=3, beta=0.25, t_end=2.0)
        flock_traj = integrate(make_flock_rhs(spec), seed_flock_history(spec), spec.stepper)
        eta = run_scalar(spec, flock_traj, lambda s: np.array([2.0, 0.5 - s, 0.0]))
        assert np.all(eta.states[:, 0] == 2.0)

    def test_nonnegative_histories_stay_nonnegative(self):
        spec = chain_spec(n=4, beta=0.25, t_end=4.0, v=[[1.0], [-1.0], [0.5], [-0.5]])
        flock_traj = integrate(make_flock_rhs(spec), seed_flock_history(spec), spec.stepper)
        eta = run_scalar(
            spec, flock_traj, lambda s: np.array([0.0, 1.0 + s / 2, 2.0, 0.3 * (s + 1)])
        )
        assert eta.states.min() >= -1e-9

    def test_history_exhausted_beyond_flock_record(self):
        spec = chain_spec(n=2, beta=0.25, t_end=2.0)
        flock_traj = integrate(make_flock_rhs(spec), seed_flock_history(spec), spec.stepper)
        long_spec = chain_spec(n=2, beta=0.25, t_end=4.0)
        with pytest.raises(HistoryExhausted):
            run_scalar(long_spec, flock_traj, lambda s: np.ones(2))

    def test_scalar_rhs_matches_displayed_form(self):
        spec = chain_spec(n=2, beta=0.0, t_end=2.0)
        flock_traj = integrate(make_flock_rhs(spec), seed_flock_history(spec), spec.stepper)
        out = scalar_rhs(spec, flock_traj, 1.0, np.array([4.0, 1.0]), np.array([4.0, 2.0]))
        assert out[0] == 0.0
        assert out[1] == pytest.approx(1.0 * (4.0 - 1.0))
