"""Observables over completed runs: diameters, delayed cross-differences,
leader-average deviations, alignment functionals, and decay-law fits.

All series live on the run's time grid (t >= 0). The flocking verdict is a
desk-scale stand-in for the asymptotic definition: the velocity diameter
must have collapsed and the spatial diameter must show no growth trend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import (
    InsufficientData,
    NonPositiveSamples,
    OffsetUnavailable,
)
from .dde import Trajectory
from .graph import HLGraph
from .kernels import Kernel, KernelPrimitive, phi_eval
from .sim import SimSpec, positions, velocities

__all__ = [
    "diameters",
    "diameter_series",
    "cross_differences",
    "leader_deviations",
    "PairFunctional",
    "LevelFunctional",
    "LyapunovSeries",
    "lyapunov_pair",
    "DecayFit",
    "fit_decay",
    "DiagnosticsSeries",
    "compute_diagnostics",
    "VerdictThresholds",
    "FlockingReport",
    "flocking_verdict",
]


def diameters(state: np.ndarray, n: int, d: int) -> tuple[float, float]:
    """Largest pairwise Euclidean distances in position and in velocity."""
    x = positions(state, n, d)
    v = velocities(state, n, d)
    return _max_pairwise(x), _max_pairwise(v)


def _max_pairwise(block: np.ndarray) -> float:
    diff = block[:, None, :] - block[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=2)).max())


def _run_grid(traj: Trajectory, n: int, d: int):
    sl = traj.run_slice
    times = traj.times[sl]
    states = traj.states[sl]
    x = states[:, : n * d].reshape(len(times), n, d)
    v = states[:, n * d :].reshape(len(times), n, d)
    return times, x, v


def diameter_series(traj: Trajectory, n: int, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(times, X, V) on the run grid."""
    times, x, v = _run_grid(traj, n, d)
    dx = x[:, :, None, :] - x[:, None, :, :]
    dv = v[:, :, None, :] - v[:, None, :, :]
    X = np.sqrt((dx * dx).sum(axis=3)).max(axis=(1, 2))
    V = np.sqrt((dv * dv).sum(axis=3)).max(axis=(1, 2))
    return times, X, V


def cross_differences(traj: Trajectory, n: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    """|v_i(t - tau) - v_j(t)| for every ordered pair, per run-grid time.

    With the delay aligned to the grid, the lagged velocities are stored
    samples, so no interpolation enters. At tau = 0 this reduces to the plain
    pairwise-difference matrix whose maximum is the velocity diameter.
    """
    times, _, v = _run_grid(traj, n, d)
    lag = round(traj.tau / traj.h) if traj.tau > 0 else 0
    sl = traj.run_slice
    start = sl.start - lag  # reaches into the seeded history for t < tau
    all_v = traj.states[:, n * d :].reshape(len(traj.times), n, d)
    v_lag = all_v[start : start + len(times)]
    diff = v_lag[:, :, None, :] - v[:, None, :, :]
    return times, np.sqrt((diff * diff).sum(axis=3))


def leader_deviations(
    traj: Trajectory, graph: HLGraph, d: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-agent distance from the average of its direct leaders.

    Returns (times, |x_l - mean of leaders' x|, |v_l - mean of leaders' v|),
    each (T, N). Agents without leaders get NaN columns.
    """
    n = graph.n_agents
    times, x, v = _run_grid(traj, n, d)
    xdev = np.full((len(times), n), np.nan)
    vdev = np.full((len(times), n), np.nan)
    for l in range(1, n + 1):
        ls = graph.leader_set(l)
        if not ls:
            continue
        idx = [j - 1 for j in ls]
        x_hat = x[:, idx, :].mean(axis=1)
        v_hat = v[:, idx, :].mean(axis=1)
        xdev[:, l - 1] = np.linalg.norm(x[:, l - 1, :] - x_hat, axis=1)
        vdev[:, l - 1] = np.linalg.norm(v[:, l - 1, :] - v_hat, axis=1)
    return times, xdev, vdev


@dataclass(frozen=True)
class PairFunctional:
    """Two-body functional |v_f - v_l| +/- Phi(|x_f - x_l| + offset).

    The offset freezes the follower-leader speed gap at t = tau times the
    delay, after which the functional is non-increasing along solutions.
    """

    follower: int = 2
    leader: int = 1

    def label(self) -> str:
        return f"pair_{self.leader}_{self.follower}"


@dataclass(frozen=True)
class LevelFunctional:
    """Leader-average functional |v_dev_l| +/- d_l * Phi(|x_dev_l| + offset).

    The offset is tau * D0 plus an empirical bound on the leaders' spread
    around their average; pass ``m_l=None`` to take that bound from the run
    itself.
    """

    agent: int
    m_l: float | None = None

    def label(self) -> str:
        return f"level_{self.agent}"


@dataclass(eq=False)
class LyapunovSeries:
    label: str
    times: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    offset: float

    def max_step_increment(self, t_from: float = 0.0) -> float:
        """Largest one-step increase of either branch from t_from onward."""
        mask = self.times >= t_from - 1e-12
        worst = -math.inf
        for series in (self.plus, self.minus):
            vals = series[mask]
            if len(vals) >= 2:
                worst = max(worst, float(np.diff(vals).max()))
        return worst


def _history_speed_bound(traj: Trajectory, n: int, d: int) -> float:
    """Largest agent speed over the seeded history samples (D0)."""
    sl = traj.run_slice
    hist = traj.states[: sl.start + 1]
    v = hist[:, n * d :].reshape(len(hist), n, d)
    return float(np.linalg.norm(v, axis=2).max())


def lyapunov_pair(
    traj: Trajectory,
    kernel: Kernel,
    primitive: KernelPrimitive,
    config: PairFunctional | LevelFunctional,
    graph: HLGraph | None = None,
    dim: int | None = None,
) -> LyapunovSeries:
    """Sample both branches of an alignment functional on the grid t >= tau.

    Raises :class:`OffsetUnavailable` when the trajectory is too short to fix
    the offset constant.
    """
    tau = traj.tau
    if traj.end_time < tau - 1e-12:
        raise OffsetUnavailable(f"trajectory ends at {traj.end_time:g}, before t=tau={tau:g}")
    if isinstance(config, PairFunctional):
        if graph is None or dim is None:
            raise ValueError("pair functional needs graph and dim context")
        n, d = graph.n_agents, dim
        times, x, v = _run_grid(traj, n, d)
        f, l = config.follower - 1, config.leader - 1
        gap = np.linalg.norm(x[:, f, :] - x[:, l, :], axis=1)
        vgap = np.linalg.norm(v[:, f, :] - v[:, l, :], axis=1)
        k_tau = int(np.searchsorted(times, tau - 1e-12))
        offset = vgap[k_tau] * tau
        weight = 1.0
    else:
        if graph is None or dim is None:
            raise ValueError("level functional needs graph and dim context")
        n, d = graph.n_agents, dim
        l = config.agent
        ls = graph.leader_set(l)
        if not ls:
            raise ValueError(f"agent {l} has no leaders; the level functional is undefined")
        times, xdev, vdev = leader_deviations(traj, graph, d)
        gap = xdev[:, l - 1]
        vgap = vdev[:, l - 1]
        k_tau = int(np.searchsorted(times, tau - 1e-12))
        if config.m_l is None:
            idx = [j - 1 for j in ls]
            _, x, _ = _run_grid(traj, n, d)
            x_hat = x[:, idx, :].mean(axis=1)
            spread = np.linalg.norm(x[:, idx, :] - x_hat[:, None, :], axis=2).max()
            m_l = float(spread)
        else:
            m_l = config.m_l
        offset = tau * _history_speed_bound(traj, n, d) + m_l
        weight = float(len(ls))

    times_out = times[k_tau:]
    phi_vals = np.array([phi_eval(primitive, kernel, g + offset) for g in gap[k_tau:]])
    plus = vgap[k_tau:] + weight * phi_vals
    minus = vgap[k_tau:] - weight * phi_vals
    return LyapunovSeries(
        label=config.label(), times=times_out, plus=plus, minus=minus, offset=offset
    )


@dataclass(frozen=True)
class DecayFit:
    """Log-domain least-squares fit of a decay law.

    ``rate`` is B for V ~ C exp(-B t) or p for V ~ C (1+t)^-p; ``residual``
    is the largest log-domain deviation over the fitted window.
    """

    model: Literal["exponential", "power"]
    window: tuple[float, float]
    C: float
    rate: float
    residual: float
    n_samples: int


def fit_decay(
    times: np.ndarray,
    values: np.ndarray,
    model: Literal["exponential", "power"] = "exponential",
    window: tuple[float, float] | None = None,
) -> DecayFit:
    """Fit log V against t (exponential) or log(1+t) (power) by least squares.

    Only strictly positive samples inside the window are used; the default
    window is the last half of the series, skipping the startup transient.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if model not in ("exponential", "power"):
        raise ValueError(f"unknown decay model {model!r}")
    if window is None:
        window = (float(times[0] + 0.5 * (times[-1] - times[0])), float(times[-1]))
    lo, hi = window
    in_window = (times >= lo - 1e-12) & (times <= hi + 1e-12)
    if not np.any(in_window):
        raise InsufficientData(f"no samples in window [{lo:g}, {hi:g}]")
    pos = in_window & (values > 0)
    if not np.any(pos):
        raise NonPositiveSamples("no strictly positive samples in the fit window")
    if pos.sum() < 10:
        raise InsufficientData(f"only {int(pos.sum())} positive samples in window; need 10")
    t = times[pos]
    y = np.log(values[pos])
    x = t if model == "exponential" else np.log1p(t)
    A = np.column_stack([x, np.ones_like(x)])
    coeffs, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope, intercept = float(coeffs[0]), float(coeffs[1])
    resid = float(np.abs(y - (A @ coeffs)).max())
    return DecayFit(
        model=model,
        window=(lo, hi),
        C=math.exp(intercept),
        rate=-slope,
        residual=resid,
        n_samples=int(pos.sum()),
    )


@dataclass(eq=False)
class DiagnosticsSeries:
    """Everything observable about one run, on its time grid."""

    times: np.ndarray
    X: np.ndarray
    V: np.ndarray
    cross_v: np.ndarray | None = None  # (T, N, N)
    x_dev: np.ndarray | None = None  # (T, N), NaN where undefined
    v_dev: np.ndarray | None = None
    lyapunov: tuple[LyapunovSeries, ...] = ()
    n_agents: int = 0
    dim: int = 0
    tau: float = 0.0


def compute_diagnostics(
    traj: Trajectory,
    spec: SimSpec,
    with_cross: bool = True,
    with_deviations: bool = True,
    lyapunov_configs: tuple | None = None,
    primitive: KernelPrimitive | None = None,
) -> DiagnosticsSeries:
    """Standard post-run diagnostics bundle.

    By default includes the delayed cross-differences, the leader-average
    deviations, and the two-body functional for agents (1, 2) whenever the
    flock has at least two agents.
    """
    n, d = spec.n_agents, spec.dim
    times, X, V = diameter_series(traj, n, d)
    cross = x_dev = v_dev = None
    if with_cross:
        _, cross = cross_differences(traj, n, d)
    if with_deviations:
        _, x_dev, v_dev = leader_deviations(traj, spec.graph, d)
    if lyapunov_configs is None:
        lyapunov_configs = (PairFunctional(follower=2, leader=1),) if n >= 2 else ()
    primitive = primitive or KernelPrimitive()
    lyap = tuple(
        lyapunov_pair(traj, spec.kernel, primitive, cfg, graph=spec.graph, dim=d)
        for cfg in lyapunov_configs
    )
    return DiagnosticsSeries(
        times=times,
        X=X,
        V=V,
        cross_v=cross,
        x_dev=x_dev,
        v_dev=v_dev,
        lyapunov=lyap,
        n_agents=n,
        dim=d,
        tau=spec.tau,
    )


@dataclass(frozen=True)
class VerdictThresholds:
    """Cutoffs for calling a run flocked.

    ``v_ratio_max`` bounds V(t_end)/V(0); the spatial no-growth test allows
    the final-quarter maximum of X to exceed the earlier maximum by the
    relative tolerance plus the absolute one.
    """

    v_ratio_max: float = 1e-2
    x_growth_rel: float = 1e-3
    x_growth_abs: float = 1e-9


@dataclass(frozen=True)
class FlockingReport:
    flocking: bool
    x_no_growth: bool
    v_ratio: float
    v_ratio_ok: bool
    exponential_fit: DecayFit | None
    power_fit: DecayFit | None
    thresholds: VerdictThresholds


def flocking_verdict(
    diag: DiagnosticsSeries, thresholds: VerdictThresholds = VerdictThresholds()
) -> FlockingReport:
    """Desk-scale flocking check: X stopped growing and V collapsed.

    The no-growth test compares the final quarter's maximum of X against the
    maximum over the first three quarters, so a linearly spreading flock
    fails while residual creep toward a spatial asymptote passes. Decay fits
    are attached when enough positive samples exist.
    """
    times, X, V = diag.times, diag.X, diag.V
    split = times[0] + 0.75 * (times[-1] - times[0])
    early = X[times <= split]
    late = X[times > split]
    if len(late) == 0:
        x_ok = True
    else:
        x_ok = bool(
            late.max() <= early.max() * (1 + thresholds.x_growth_rel) + thresholds.x_growth_abs
        )
    v0, v_end = float(V[0]), float(V[-1])
    v_ratio = 0.0 if v0 == 0.0 else v_end / v0
    v_ok = v_ratio <= thresholds.v_ratio_max

    def try_fit(model):
        try:
            return fit_decay(times, V, model=model)
        except (InsufficientData, NonPositiveSamples):
            return None

    return FlockingReport(
        flocking=bool(x_ok and v_ok),
        x_no_growth=x_ok,
        v_ratio=v_ratio,
        v_ratio_ok=bool(v_ok),
        exponential_fit=try_fit("exponential"),
        power_fit=try_fit("power"),
        thresholds=thresholds,
    )
