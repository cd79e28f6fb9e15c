"""Right-hand sides and orchestration for delayed leadership flocks.

State layout: positions first, then velocities, agent-major —
``[x_1 .. x_N, v_1 .. v_N]`` with d components each, so a flock state is a
flat vector of length 2*N*d. The velocity equation is deliberately
asymmetric in time: communication rates and the neighbours' velocities are
taken at t - tau while the agent's own velocity is taken at t.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dde import HistoryBuffer, StepperConfig, Trajectory, integrate, seed_history
from .errors import HistoryExhausted, MisalignedDelay, OutOfWindow
from .graph import HLGraph, ensure_valid
from .kernels import Forcing, Kernel, ZeroForcing, forcing_eval, psi_eval

__all__ = [
    "positions",
    "velocities",
    "pack_state",
    "ConstantInitialData",
    "LinearInitialData",
    "SampledInitialData",
    "InitialData",
    "SimSpec",
    "flock_rhs",
    "make_flock_rhs",
    "scalar_rhs",
    "make_scalar_rhs",
    "seed_flock_history",
    "run",
    "run_scalar",
]


def positions(state: np.ndarray, n: int, d: int) -> np.ndarray:
    """(n, d) view of the position block."""
    return state[: n * d].reshape(n, d)


def velocities(state: np.ndarray, n: int, d: int) -> np.ndarray:
    """(n, d) view of the velocity block."""
    return state[n * d :].reshape(n, d)


def pack_state(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape != v.shape or x.ndim != 2:
        raise ValueError("positions and velocities must both be (n, d) arrays")
    return np.concatenate([x.ravel(), v.ravel()])


@dataclass(frozen=True, eq=False)
class ConstantInitialData:
    """Frozen agents on the whole history interval."""

    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.positions, dtype=float))
        v = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        if x.shape != v.shape:
            raise ValueError("positions and velocities must have matching shapes")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def state_at(self, s: float) -> np.ndarray:
        return pack_state(self.positions, self.velocities)


@dataclass(frozen=True, eq=False)
class LinearInitialData:
    """Affine history: value(s) = value(0) + s * slope for s in [-tau, 0].

    Slopes default to zero; passing ``position_slopes=velocities`` gives a
    ballistic history.
    """

    positions: np.ndarray
    velocities: np.ndarray
    position_slopes: np.ndarray | None = None
    velocity_slopes: np.ndarray | None = None

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.positions, dtype=float))
        v = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        xs = np.zeros_like(x) if self.position_slopes is None else np.atleast_2d(np.asarray(self.position_slopes, dtype=float))
        vs = np.zeros_like(v) if self.velocity_slopes is None else np.atleast_2d(np.asarray(self.velocity_slopes, dtype=float))
        if not (x.shape == v.shape == xs.shape == vs.shape):
            raise ValueError("all blocks must share one (n, d) shape")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)
        object.__setattr__(self, "position_slopes", xs)
        object.__setattr__(self, "velocity_slopes", vs)

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def state_at(self, s: float) -> np.ndarray:
        return pack_state(
            self.positions + s * self.position_slopes,
            self.velocities + s * self.velocity_slopes,
        )


@dataclass(frozen=True, eq=False)
class SampledInitialData:
    """Tabulated history, linearly interpolated between samples.

    ``s_grid`` must cover [-tau, 0]; ``positions`` and ``velocities`` are
    (k, n, d) stacks aligned with it.
    """

    s_grid: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s_grid, dtype=float)
        x = np.asarray(self.positions, dtype=float)
        v = np.asarray(self.velocities, dtype=float)
        if s.ndim != 1 or len(s) < 2 or np.any(np.diff(s) <= 0):
            raise ValueError("s_grid must be an increasing vector of at least two times")
        if x.shape != v.shape or x.ndim != 3 or x.shape[0] != len(s):
            raise ValueError("positions/velocities must be (k, n, d) stacks matching s_grid")
        object.__setattr__(self, "s_grid", s)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    @property
    def n_agents(self) -> int:
        return self.positions.shape[1]

    @property
    def dim(self) -> int:
        return self.positions.shape[2]

    def state_at(self, s: float) -> np.ndarray:
        if s < self.s_grid[0] - 1e-12 or s > self.s_grid[-1] + 1e-12:
            raise ValueError(f"history requested at s={s!r} outside the sampled range")
        k = int(np.searchsorted(self.s_grid, s, side="right") - 1)
        k = min(max(k, 0), len(self.s_grid) - 2)
        t0, t1 = self.s_grid[k], self.s_grid[k + 1]
        w = (s - t0) / (t1 - t0)
        x = (1 - w) * self.positions[k] + w * self.positions[k + 1]
        v = (1 - w) * self.velocities[k] + w * self.velocities[k + 1]
        return pack_state(x, v)


InitialData = ConstantInitialData | LinearInitialData | SampledInitialData


@dataclass(frozen=True, eq=False)
class SimSpec:
    """Everything one flock run needs: who listens to whom, how strongly,
    with what delay, from what initial data, stepped how."""

    graph: HLGraph
    kernel: Kernel
    tau: float
    dim: int
    initial: InitialData
    stepper: StepperConfig
    forcing: Forcing = ZeroForcing()

    def __post_init__(self):
        ensure_valid(self.graph)
        if self.tau < 0:
            raise ValueError("delay must be nonnegative")
        if self.dim < 1:
            raise ValueError("dimension must be at least 1")
        if self.initial.n_agents != self.graph.n_agents:
            raise ValueError(
                f"initial data covers {self.initial.n_agents} agents, graph has {self.graph.n_agents}"
            )
        if self.initial.dim != self.dim:
            raise ValueError(f"initial data dimension {self.initial.dim} != dim {self.dim}")
        if self.tau > 0:
            m = self.tau / self.stepper.h
            if abs(m - round(m)) > 1e-9 * max(1.0, m) or round(m) < 1:
                raise MisalignedDelay(
                    f"delay {self.tau:g} is not an integer multiple of step {self.stepper.h:g}"
                )

    @property
    def n_agents(self) -> int:
        return self.graph.n_agents

    @property
    def state_dim(self) -> int:
        return 2 * self.n_agents * self.dim

    def history_callable(self) -> Callable[[float], np.ndarray]:
        return self.initial.state_at


def _edge_arrays(graph: HLGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ii, jj, ww = [], [], []
    for i, j, w in graph.edges():
        ii.append(i - 1)
        jj.append(j - 1)
        ww.append(w)
    return np.array(ii, dtype=int), np.array(jj, dtype=int), np.array(ww, dtype=float)


def make_flock_rhs(spec: SimSpec) -> Callable[[float, np.ndarray, np.ndarray], np.ndarray]:
    """Compile the flock right-hand side with precomputed edge arrays.

    dx_i/dt = v_i(t); dv_i/dt sums, over the leaders j of i,
    psi(|x_i(t-tau) - x_j(t-tau)|) * (v_j(t-tau) - v_i(t)), with the optional
    per-edge weight multiplying psi. A driven agent 1 gets dv_1/dt = f(t)
    instead (its leader set is empty, so nothing is overwritten).
    """
    n, d = spec.n_agents, spec.dim
    nd = n * d
    ii, jj, ww = _edge_arrays(spec.graph)
    kernel = spec.kernel
    forcing = spec.forcing
    driven = not isinstance(forcing, ZeroForcing)

    def rhs(t: float, now: np.ndarray, delayed: np.ndarray) -> np.ndarray:
        out = np.empty_like(now)
        out[:nd] = now[nd:]
        acc = np.zeros((n, d))
        if len(ii):
            x_d = delayed[:nd].reshape(n, d)
            v_d = delayed[nd:].reshape(n, d)
            v_now = now[nd:].reshape(n, d)
            gaps = x_d[ii] - x_d[jj]
            rates = ww * psi_eval(kernel, np.sqrt(np.einsum("ed,ed->e", gaps, gaps)))
            np.add.at(acc, ii, rates[:, None] * (v_d[jj] - v_now[ii]))
        if driven:
            acc[0] = forcing_eval(forcing, t, d)
        out[nd:] = acc.ravel()
        return out

    return rhs


def flock_rhs(spec: SimSpec, t: float, now: np.ndarray, delayed: np.ndarray) -> np.ndarray:
    """One-shot evaluation of the flock right-hand side."""
    return make_flock_rhs(spec)(t, now, delayed)


def make_scalar_rhs(
    spec: SimSpec, position_source: Trajectory
) -> Callable[[float, np.ndarray, np.ndarray], np.ndarray]:
    """Companion scalar system riding on recorded flock positions.

    d eta_i/dt sums psi(|x_i(t-tau) - x_j(t-tau)|) * (eta_j(t-tau) - eta_i(t))
    over the leaders j of i, with the communication rates rebuilt from the
    given trajectory's positions. eta_1 stays constant since agent 1 has no
    leaders.
    """
    n, d = spec.n_agents, spec.dim
    nd = n * d
    ii, jj, ww = _edge_arrays(spec.graph)
    kernel = spec.kernel
    tau = spec.tau

    def rhs(t: float, now: np.ndarray, delayed: np.ndarray) -> np.ndarray:
        out = np.zeros_like(now)
        if len(ii):
            try:
                flock_state = position_source.query(t - tau)
            except OutOfWindow as exc:
                raise HistoryExhausted(
                    f"flock positions not recorded at t={t - tau:g}"
                ) from exc
            x_d = flock_state[:nd].reshape(n, d)
            gaps = x_d[ii] - x_d[jj]
            rates = ww * psi_eval(kernel, np.sqrt(np.einsum("ed,ed->e", gaps, gaps)))
            np.add.at(out, ii, rates * (delayed[jj] - now[ii]))
        return out

    return rhs


def scalar_rhs(
    spec: SimSpec,
    position_source: Trajectory,
    t: float,
    now: np.ndarray,
    delayed: np.ndarray,
) -> np.ndarray:
    """One-shot evaluation of the companion scalar right-hand side."""
    return make_scalar_rhs(spec, position_source)(t, now, delayed)


def seed_flock_history(spec: SimSpec) -> HistoryBuffer:
    return seed_history(spec.history_callable(), spec.tau, spec.stepper.h, spec.stepper.window)


def run(spec: SimSpec, observers: Sequence = ()) -> tuple[Trajectory, "DiagnosticsSeries"]:
    """Seed, integrate, and post-process one flock run.

    Returns the trajectory (history segment included) and the standard
    diagnostics computed on its grid.
    """
    from .diagnostics import compute_diagnostics  # cycle guard

    buffer = seed_flock_history(spec)
    traj = integrate(make_flock_rhs(spec), buffer, spec.stepper, observers=observers)
    diag = compute_diagnostics(traj, spec)
    return traj, diag


def run_scalar(
    spec: SimSpec,
    position_source: Trajectory,
    initial: Callable[[float], np.ndarray],
) -> Trajectory:
    """Integrate the companion scalar system against recorded positions.

    ``initial`` must return a length-N vector of eta values for s in
    [-tau, 0].
    """
    buffer = seed_history(initial, spec.tau, spec.stepper.h, spec.stepper.window)
    return integrate(make_scalar_rhs(spec, position_source), buffer, spec.stepper)
