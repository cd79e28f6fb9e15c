"""Fixed-step method-of-steps integration for constant-delay systems.

Solves y'(t) = G(t, y(t), y(t - tau)) with a continuous history on
[-tau, 0]. The step h is chosen so tau is a whole number of steps: delayed
lookups at grid times then hit stored samples exactly, and the four-stage
scheme only ever interpolates at past half-steps, where a cubic Hermite
patch built from stored values and derivatives applies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import EmptyHorizon, MisalignedDelay, NonFiniteState, OutOfWindow

__all__ = [
    "HistoryBuffer",
    "StepperConfig",
    "Trajectory",
    "seed_history",
    "integrate",
    "SCHEMES",
]

SCHEMES = ("rk4", "explicit-euler")

_GRID_SNAP = 1e-9  # fraction of h within which a query counts as a grid hit


def _delay_steps(tau: float, h: float) -> int:
    """Number of steps per delay; raises MisalignedDelay if tau/h is not whole."""
    if tau < 0:
        raise ValueError("delay must be nonnegative")
    if tau == 0.0:
        return 0
    m = tau / h
    m_int = round(m)
    if m_int < 1 or abs(m - m_int) > 1e-9 * max(1.0, m):
        raise MisalignedDelay(f"delay {tau:g} is not an integer multiple of step {h:g}")
    return m_int


def _hermite(theta: float, h: float, y0, d0, y1, d1):
    # Cubic Hermite basis on one grid cell, theta in (0, 1).
    t2 = theta * theta
    t3 = t2 * theta
    return (
        (2 * t3 - 3 * t2 + 1) * y0
        + (t3 - 2 * t2 + theta) * h * d0
        + (-2 * t3 + 3 * t2) * y1
        + (t3 - t2) * h * d1
    )


class HistoryBuffer:
    """Dense, interpolable record of a state on a uniform grid.

    Stores samples and their derivatives at grid times start_time + k*h.
    Grid-time queries return stored samples bitwise; off-grid queries use
    cubic Hermite interpolation on the bracketing cell. A finite ``window``
    trims old samples once they fall more than the window behind the newest
    time; ``window=None`` retains everything.

    A derivative override can be attached to a grid point for use as the
    *left* endpoint of its cell, so a one-sided derivative jump (as at the
    junction between prescribed history and integrated solution) does not
    pollute interpolation on either side.
    """

    def __init__(self, h: float, tau: float, window: float | None = None):
        if h <= 0:
            raise ValueError("step size must be positive")
        if window is not None and window < tau:
            raise ValueError("retention window must cover the delay")
        self.h = float(h)
        self.tau = float(tau)
        self.window = window
        self._times: list[float] = []
        self._samples: list[np.ndarray] = []
        self._derivs: list[np.ndarray] = []
        self._right_derivs: dict[int, np.ndarray] = {}
        self._first_index = 0  # grid index of the first retained sample
        self.interpolated_queries = 0

    # -- construction ------------------------------------------------------

    def seed(self, times: Sequence[float], samples: Sequence[np.ndarray], derivs: Sequence[np.ndarray]):
        if self._times:
            raise RuntimeError("buffer already seeded")
        self._times = [float(t) for t in times]
        self._samples = [np.array(s, dtype=float) for s in samples]
        self._derivs = [np.array(d, dtype=float) for d in derivs]
        return self

    def append(self, t: float, y: np.ndarray, dydt: np.ndarray) -> None:
        expected = self._times[-1] + self.h
        if abs(t - expected) > _GRID_SNAP * self.h:
            raise ValueError(f"append at t={t!r} breaks the grid (expected {expected!r})")
        self._times.append(float(t))
        self._samples.append(np.array(y, dtype=float))
        self._derivs.append(np.array(dydt, dtype=float))
        if self.window is not None:
            cutoff = t - self.window
            while len(self._times) > 2 and self._times[1] <= cutoff + _GRID_SNAP * self.h:
                self._times.pop(0)
                self._samples.pop(0)
                self._derivs.pop(0)
                self._right_derivs.pop(self._first_index, None)
                self._first_index += 1

    def set_right_derivative(self, t: float, dydt: np.ndarray) -> None:
        """Attach a right-sided derivative at a grid time."""
        k = self._locate_exact(t)
        self._right_derivs[self._first_index + k] = np.array(dydt, dtype=float)

    def replace_latest_derivative(self, dydt: np.ndarray) -> None:
        self._derivs[-1] = np.array(dydt, dtype=float)

    # -- queries -----------------------------------------------------------

    @property
    def start_time(self) -> float:
        return self._times[0]

    @property
    def latest_time(self) -> float:
        return self._times[-1]

    @property
    def latest(self) -> np.ndarray:
        return self._samples[-1]

    def __len__(self) -> int:
        return len(self._times)

    def _locate_exact(self, t: float) -> int:
        k = round((t - self._times[0]) / self.h)
        if not 0 <= k < len(self._times) or abs(t - self._times[k]) > _GRID_SNAP * self.h:
            raise OutOfWindow(f"t={t!r} is not a retained grid time")
        return int(k)

    def query(self, t: float) -> np.ndarray:
        """State at time t within the retained window."""
        t0, t1 = self._times[0], self._times[-1]
        if t < t0 - _GRID_SNAP * self.h or t > t1 + _GRID_SNAP * self.h:
            raise OutOfWindow(f"query at t={t!r} outside retained window [{t0:g}, {t1:g}]")
        u = (t - t0) / self.h
        k = round(u)
        if abs(u - k) <= _GRID_SNAP:
            return self._samples[int(k)].copy()
        k = int(np.floor(u))
        theta = u - k
        self.interpolated_queries += 1
        d_left = self._right_derivs.get(self._first_index + k, self._derivs[k])
        return _hermite(theta, self.h, self._samples[k], d_left, self._samples[k + 1], self._derivs[k + 1])

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Copies of the retained (times, samples, derivatives)."""
        return (
            np.array(self._times),
            np.array(self._samples),
            np.array(self._derivs),
        )


def _finite_difference_derivs(samples: np.ndarray, h: float) -> np.ndarray:
    """Second-order finite differences along axis 0 (one-sided at the ends)."""
    n = len(samples)
    d = np.zeros_like(samples)
    if n == 1:
        return d
    if n == 2:
        d[0] = d[1] = (samples[1] - samples[0]) / h
        return d
    d[1:-1] = (samples[2:] - samples[:-2]) / (2 * h)
    d[0] = (-3 * samples[0] + 4 * samples[1] - samples[2]) / (2 * h)
    d[-1] = (3 * samples[-1] - 4 * samples[-2] + samples[-3]) / (2 * h)
    return d


def seed_history(
    initial: Callable[[float], np.ndarray],
    tau: float,
    h: float,
    window: float | None = None,
) -> HistoryBuffer:
    """Populate a buffer from continuous initial data on [-tau, 0].

    Samples at -tau, -tau + h, ..., 0; derivative slots are filled with
    second-order finite differences of the sampled data. With tau = 0 the
    buffer holds the single state at t = 0.
    """
    m = _delay_steps(tau, h)
    buf = HistoryBuffer(h=h, tau=tau, window=window)
    times = [(k - m) * h for k in range(m + 1)]
    times[-1] = 0.0
    samples = np.array([np.asarray(initial(t), dtype=float) for t in times])
    if samples.ndim != 2:
        raise ValueError("initial data must return a flat state vector")
    derivs = _finite_difference_derivs(samples, h)
    buf.seed(times, list(samples), list(derivs))
    return buf


@dataclass(frozen=True)
class StepperConfig:
    """Step size, scheme, and horizon for one integration run."""

    h: float
    t_end: float
    scheme: str = "rk4"
    dense_output: str = "cubic-hermite"
    window: float | None = None

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("step size h must be positive")
        if self.t_end <= 0:
            raise EmptyHorizon(f"t_end={self.t_end!r} leaves nothing to integrate")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.dense_output != "cubic-hermite":
            raise ValueError("cubic-hermite is the only dense output supported")

    @property
    def n_steps(self) -> int:
        """Whole steps fitting in [0, t_end] (at least one)."""
        return max(1, int(np.floor(self.t_end / self.h + 1e-9)))


@dataclass(eq=False)
class Trajectory:
    """Time-indexed record of one run, including the seeded history segment.

    ``derivs`` holds the right-hand side at each sample, which doubles as the
    per-step metadata needed for dense interpolation between grid points.
    """

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    h: float
    tau: float
    meta: dict = field(default_factory=dict)
    right_derivs: dict = field(default_factory=dict)

    @property
    def start_time(self) -> float:
        return float(self.times[0])

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    def grid_index(self, t: float) -> int:
        k = round((t - self.times[0]) / self.h)
        if not 0 <= k < len(self.times) or abs(t - self.times[k]) > _GRID_SNAP * self.h:
            raise OutOfWindow(f"t={t!r} is not a grid time of this trajectory")
        return int(k)

    def query(self, t: float) -> np.ndarray:
        """Dense state lookup anywhere in [start_time, end_time]."""
        t0, t1 = float(self.times[0]), float(self.times[-1])
        if t < t0 - _GRID_SNAP * self.h or t > t1 + _GRID_SNAP * self.h:
            raise OutOfWindow(f"query at t={t!r} outside trajectory span [{t0:g}, {t1:g}]")
        u = (t - t0) / self.h
        k = round(u)
        if abs(u - k) <= _GRID_SNAP:
            return self.states[int(k)].copy()
        k = int(np.floor(u))
        theta = u - k
        d_left = self.right_derivs.get(k, self.derivs[k])
        return _hermite(theta, self.h, self.states[k], d_left, self.states[k + 1], self.derivs[k + 1])

    @property
    def run_slice(self) -> slice:
        """Indices of the integrated part (t >= 0)."""
        return slice(self.grid_index(0.0), len(self.times))


RHS = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
Observer = Callable[[float, np.ndarray], None]


def integrate(
    rhs: RHS,
    buffer: HistoryBuffer,
    cfg: StepperConfig,
    observers: Iterable[Observer] = (),
) -> Trajectory:
    """Advance the delayed system from t = 0 to cfg.t_end in steps of h.

    The delayed argument at a stage time s is buffer.query(s - tau) when
    tau > 0 (always in the past since tau >= h) and the stage state itself
    when tau = 0. Each accepted step is appended to the buffer and the
    trajectory; observers run after each step. Raises
    :class:`NonFiniteState` if any component stops being finite.
    """
    h = cfg.h
    if abs(buffer.h - h) > 1e-12 * h:
        raise ValueError("buffer step and stepper step differ")
    tau = buffer.tau
    if tau > 0:
        _delay_steps(tau, h)  # re-validate alignment against this h
    observers = tuple(observers)
    n_steps = cfg.n_steps
    nfev = 0

    y = np.array(buffer.latest, dtype=float)

    # Right derivative at t = 0: the prescribed history and the equation
    # generally disagree there, so keep both one-sided values.
    d0 = rhs(0.0, y, buffer.query(-tau) if tau > 0 else y)
    nfev += 1
    if tau > 0:
        buffer.set_right_derivative(0.0, d0)
    else:
        buffer.replace_latest_derivative(d0)

    hist_times, hist_states, hist_derivs = buffer.arrays()
    if tau > 0:
        k0 = int(round((0.0 - hist_times[0]) / h))
        right_derivs = {k0: np.array(d0, dtype=float)}
    else:
        right_derivs = {}

    traj_times = list(hist_times)
    traj_states = list(hist_states)
    traj_derivs = list(hist_derivs)

    d_here = d0  # RHS at the current grid point, reused as the first stage
    for step in range(n_steps):
        t = step * h
        t_next = (step + 1) * h
        if cfg.scheme == "explicit-euler":
            y_next = y + h * d_here
            if tau > 0:
                yd_next = buffer.query(t_next - tau)
            nfev_step = 0
        else:
            half = t + 0.5 * h
            k1 = d_here
            y2 = y + 0.5 * h * k1
            if tau > 0:
                yd_half = buffer.query(half - tau)
                yd_next = buffer.query(t_next - tau)
                k2 = rhs(half, y2, yd_half)
                y3 = y + 0.5 * h * k2
                k3 = rhs(half, y3, yd_half)
                y4 = y + h * k3
                k4 = rhs(t_next, y4, yd_next)
            else:
                k2 = rhs(half, y2, y2)
                y3 = y + 0.5 * h * k2
                k3 = rhs(half, y3, y3)
                y4 = y + h * k3
                k4 = rhs(t_next, y4, y4)
            y_next = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            nfev_step = 3
        if not np.all(np.isfinite(y_next)):
            raise NonFiniteState(t_next)
        d_next = rhs(t_next, y_next, yd_next if tau > 0 else y_next)
        nfev += nfev_step + 1
        buffer.append(t_next, y_next, d_next)
        traj_times.append(t_next)
        traj_states.append(y_next)
        traj_derivs.append(np.array(d_next, dtype=float))
        for obs in observers:
            obs(t_next, y_next)
        y = y_next
        d_here = d_next

    return Trajectory(
        times=np.array(traj_times),
        states=np.array(traj_states),
        derivs=np.array(traj_derivs),
        h=h,
        tau=tau,
        meta={
            "scheme": cfg.scheme,
            "n_steps": n_steps,
            "rhs_evaluations": nfev,
            "interpolated_queries": buffer.interpolated_queries,
        },
        right_derivs=right_derivs,
    )
