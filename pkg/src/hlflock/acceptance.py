"""The verification suites: executable checks of the model's guarantees.

Each check runs a fixed, seeded desk-scale scenario and compares against
either an exact law, an independent brute-force oracle, or a structural
bound. Suites group the checks for the CLI ``verify`` subcommand; the
pytest acceptance module runs every check individually.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .dde import StepperConfig, integrate, seed_history
from .diagnostics import fit_decay, flocking_verdict
from .graph import HLGraph
from .kernels import CuckerSmaleKernel, PowerDecayForcing
from .runner import execute_run
from .sim import (
    ConstantInitialData,
    LinearInitialData,
    SimSpec,
    make_flock_rhs,
    run as run_sim,
    run_scalar,
    seed_flock_history,
)

__all__ = ["CheckResult", "SUITES", "run_check", "run_suite", "CHECKS"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    duration_s: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        detail = "  ".join(f"{k}={v}" for k, v in self.details.items())
        return f"[{status}] {self.name}: {detail}"


def _timed(fn):
    def wrapper() -> CheckResult:
        started = time.perf_counter()
        result = fn()
        result.duration_s = time.perf_counter() - started
        result.details["seconds"] = f"{result.duration_s:.2f}"
        return result

    return wrapper


def _random_valid_graph(rng: np.random.Generator, n_max: int = 6) -> HLGraph:
    n = int(rng.integers(2, n_max + 1))
    leaders = [()]
    for i in range(2, n + 1):
        k = int(rng.integers(1, i))
        chosen = rng.choice(np.arange(1, i), size=k, replace=False)
        leaders.append(tuple(int(j) for j in sorted(chosen)))
    return HLGraph.from_leader_lists(leaders)


# --- 1. exact decay law for the constant-kernel pair ----------------------


@_timed
def check_analytic_rate() -> CheckResult:
    """Two agents, constant kernel H=1: the velocity gap is exactly exp(-t)."""
    spec = SimSpec(
        graph=HLGraph.chain(2),
        kernel=CuckerSmaleKernel(H=1.0, sigma=1.0, beta=0.0),
        tau=0.5,
        dim=1,
        initial=ConstantInitialData(positions=[[0.0], [1.0]], velocities=[[0.0], [1.0]]),
        stepper=StepperConfig(h=0.01, t_end=20.0),
    )
    traj, diag = run_sim(spec)
    sl = traj.run_slice
    t = traj.times[sl]
    gap = np.abs(traj.states[sl][:, 3] - traj.states[sl][:, 2])
    exact = np.exp(-t)
    rel_err = float(np.max(np.abs(gap - exact) / exact))
    fit = fit_decay(diag.times, diag.V, model="exponential")
    passed = rel_err < 1e-6 and abs(fit.rate - 1.0) <= 0.01
    return CheckResult(
        "analytic-rate",
        passed,
        {"max_rel_err": f"{rel_err:.3e}", "fitted_B": f"{fit.rate:.6f}"},
    )


# --- 2. positivity of the companion scalar system --------------------------


@_timed
def check_positivity() -> CheckResult:
    """100 random hierarchies: nonnegative scalar histories stay nonnegative."""
    rng = np.random.default_rng(20260808)
    betas = (0.0, 0.25, 0.5)
    taus = (0.25, 1.0)
    h = 0.05
    worst = np.inf
    for run_i in range(100):
        graph = _random_valid_graph(rng)
        n = graph.n_agents
        beta = betas[run_i % len(betas)]
        tau = taus[run_i % len(taus)]
        spec = SimSpec(
            graph=graph,
            kernel=CuckerSmaleKernel(H=1.0, sigma=1.0, beta=beta),
            tau=tau,
            dim=1,
            initial=ConstantInitialData(
                positions=rng.uniform(-3, 3, size=(n, 1)),
                velocities=rng.uniform(-1, 1, size=(n, 1)),
            ),
            stepper=StepperConfig(h=h, t_end=4.0),
        )
        flock_traj = integrate(make_flock_rhs(spec), seed_flock_history(spec), spec.stepper)
        eta_left = rng.uniform(0.0, 2.0, size=n)
        eta_right = rng.uniform(0.0, 2.0, size=n)
        pinned = int(rng.integers(0, n))  # one agent rides the zero boundary
        eta_left[pinned] = eta_right[pinned] = 0.0

        def eta_history(s: float) -> np.ndarray:
            if tau == 0:
                return eta_right.copy()
            w = (s + tau) / tau
            return (1 - w) * eta_left + w * eta_right

        eta_traj = run_scalar(spec, flock_traj, eta_history)
        worst = min(worst, float(eta_traj.states.min()))
    passed = worst >= -1e-9
    return CheckResult("positivity", passed, {"min_eta": f"{worst:.3e}", "runs": 100})


# --- 3. velocity hull confinement ------------------------------------------


@_timed
def check_hull() -> CheckResult:
    """Speeds never leave the ball spanned by the initial histories."""
    rng = np.random.default_rng(31415926)
    betas = (0.0, 0.25, 0.5)
    taus = (0.25, 1.0)
    dims = (1, 2, 3)
    worst_excess = -np.inf
    for run_i in range(100):
        graph = _random_valid_graph(rng)
        n = graph.n_agents
        d = dims[run_i % len(dims)]
        spec = SimSpec(
            graph=graph,
            kernel=CuckerSmaleKernel(H=1.0, sigma=1.0, beta=betas[run_i % len(betas)]),
            tau=taus[run_i % len(taus)],
            dim=d,
            initial=LinearInitialData(
                positions=rng.uniform(-3, 3, size=(n, d)),
                velocities=rng.uniform(-1, 1, size=(n, d)),
                velocity_slopes=rng.uniform(-0.5, 0.5, size=(n, d)),
            ),
            stepper=StepperConfig(h=0.05, t_end=4.0),
        )
        traj = integrate(make_flock_rhs(spec), seed_flock_history(spec), spec.stepper)
        hist = traj.states[: traj.run_slice.start + 1]
        D0 = float(np.linalg.norm(hist[:, n * d :].reshape(len(hist), n, d), axis=2).max())
        v_run = traj.states[traj.run_slice][:, n * d :].reshape(-1, n, d)
        vmax = float(np.linalg.norm(v_run, axis=2).max())
        worst_excess = max(worst_excess, vmax - D0 * (1 + 1e-9))
    passed = worst_excess <= 0.0
    return CheckResult("hull", passed, {"worst_excess": f"{worst_excess:.3e}", "runs": 100})


# --- 4./5. exponential flocking and alignment-functional monotonicity ------


def _flocking_spec() -> SimSpec:
    return SimSpec(
        graph=HLGraph.chain(5),
        kernel=CuckerSmaleKernel(H=1.0, sigma=1.0, beta=0.25),
        tau=0.5,
        dim=1,
        initial=ConstantInitialData(
            positions=[[0.0], [8.0], [20.0], [38.0], [60.0]],
            velocities=[[1.0], [-0.5], [0.5], [-1.0], [0.0]],
        ),
        stepper=StepperConfig(h=0.01, t_end=60.0),
    )


def flocking_run_config() -> RunConfig:
    """Criterion-4 scenario as a RunConfig (shared with the determinism check)."""
    spec = _flocking_spec()
    return RunConfig(
        graph=spec.graph,
        kernel=spec.kernel,
        tau=spec.tau,
        dim=spec.dim,
        initial=spec.initial,
        stepper=spec.stepper,
        stem="flocking5",
        seed=42,
    )


@_timed
def check_exponential_flocking() -> CheckResult:
    """Five-agent chain with a divergent-tail kernel collapses exponentially."""
    spec = _flocking_spec()
    traj, diag = run_sim(spec)
    v_ratio = float(diag.V[-1] / diag.V[0])
    fit = fit_decay(diag.times, diag.V, model="exponential")
    report = flocking_verdict(diag)
    final = diag.cross_v[-1]
    peak = diag.cross_v.max(axis=0)
    cross_ok = bool(np.all((peak == 0.0) | (final <= 1e-3 * np.where(peak > 0, peak, 1.0))))
    passed = (
        v_ratio <= 1e-3
        and fit.rate > 0
        and fit.residual < 0.5
        and report.x_no_growth
        and cross_ok
    )
    return CheckResult(
        "exponential-flocking",
        passed,
        {
            "V_ratio": f"{v_ratio:.3e}",
            "fitted_B": f"{fit.rate:.4f}",
            "residual": f"{fit.residual:.4f}",
            "x_no_growth": report.x_no_growth,
            "cross_ok": cross_ok,
        },
    )


@_timed
def check_lyapunov_monotonicity() -> CheckResult:
    """Pair functional on agents (1,2) of the flocking run never steps upward
    past the settling time 2*tau (slack 1e-8)."""
    spec = _flocking_spec()
    _, diag = run_sim(spec)
    series = diag.lyapunov[0]
    worst = series.max_step_increment(t_from=2 * spec.tau)
    passed = worst <= 1e-8
    return CheckResult("lyapunov-monotonicity", passed, {"max_increment": f"{worst:.3e}"})


# --- 6. driven leader: bounded speed, polynomial collapse -------------------


@_timed
def check_freewill() -> CheckResult:
    """Depth-3 chain with leader acceleration (1+t)^-3: speed bound and
    (1+t)-weighted velocity diameter both hold."""
    mu, gamma = 3.0, 3.0
    amplitude = 1.0
    spec = SimSpec(
        graph=HLGraph.chain(3),
        kernel=CuckerSmaleKernel(H=1.0, sigma=1.0, beta=0.25),
        tau=0.5,
        dim=1,
        initial=ConstantInitialData(
            positions=[[0.0], [1.0], [2.0]],
            velocities=[[0.5], [-0.25], [0.25]],
        ),
        stepper=StepperConfig(h=0.005, t_end=200.0),
        forcing=PowerDecayForcing(amplitude=amplitude, mu=mu),
    )
    traj, diag = run_sim(spec)
    n, d = 3, 1
    v1 = np.abs(traj.states[traj.run_slice][:, n * d])
    v1_0 = 0.5
    bound = v1_0 + amplitude / (mu - 1.0) + 1e-9
    speed_ok = bool(v1.max() <= bound)
    weighted = diag.V * (1.0 + diag.times) ** (mu - gamma + 1.0)
    half = len(weighted) // 2
    weight_ok = bool(weighted[half:].max() <= weighted[:half].max())
    return CheckResult(
        "freewill",
        speed_ok and weight_ok,
        {
            "max_leader_speed": f"{v1.max():.12f}",
            "bound": f"{bound:.12f}",
            "weighted_V_first": f"{weighted[:half].max():.3e}",
            "weighted_V_second": f"{weighted[half:].max():.3e}",
        },
    )


# --- 7. no smallness condition on the delay ---------------------------------


@_timed
def check_delay_sweep() -> CheckResult:
    """A fixed 4-agent flock reaches consensus at every tested delay."""
    verdicts = {}
    for tau in (0.0, 0.25, 0.5, 1.0, 2.0):
        spec = SimSpec(
            graph=HLGraph.from_leader_lists([(), (1,), (1,), (2, 3)]),
            kernel=CuckerSmaleKernel(H=1.0, sigma=1.0, beta=0.25),
            tau=tau,
            dim=1,
            initial=ConstantInitialData(
                positions=[[0.0], [2.0], [4.0], [7.0]],
                velocities=[[0.5], [-0.5], [0.5], [-0.5]],
            ),
            stepper=StepperConfig(h=0.05, t_end=60.0),
        )
        traj, diag = run_sim(spec)
        verdicts[tau] = flocking_verdict(diag).flocking
    passed = all(verdicts.values())
    return CheckResult(
        "delay-sweep", passed, {f"tau={tau:g}": ok for tau, ok in verdicts.items()}
    )


# --- 8. integrator order against a brute-force oracle ------------------------

ORDER_TEST = {"a": 16.0, "tau": 0.5, "t_end": 3.0, "omega": 2.0}


def euler_delay_oracle(a: float, tau: float, history, t_end: float, h: float) -> np.ndarray:
    """Independent fixed-step Euler loop for eta' = a*(eta(t-tau) - eta(t)).

    Deliberately bypasses the buffer/stepper machinery: a flat array with an
    index offset for the lag. Returns samples on [0, t_end].
    """
    m = int(round(tau / h))
    n = int(round(t_end / h))
    eta = np.empty(n + m + 1)
    for k in range(m + 1):
        eta[k] = history((k - m) * h)
    for k in range(n):
        i = m + k
        eta[i + 1] = eta[i] + h * a * (eta[i - m] - eta[i])
    return eta[m:]


def _order_subject(h: float) -> np.ndarray:
    a, tau, t_end, omega = (ORDER_TEST[k] for k in ("a", "tau", "t_end", "omega"))
    buf = seed_history(lambda s: np.array([np.cos(omega * s)]), tau, h)
    traj = integrate(
        lambda t, y, yd: a * (yd - y), buf, StepperConfig(h=h, t_end=t_end)
    )
    return traj.states[traj.run_slice][:, 0]


@_timed
def check_integrator_order() -> CheckResult:
    """Halving h cuts the rk4 error at least fourfold against Euler at h/1000."""
    a, tau, t_end, omega = (ORDER_TEST[k] for k in ("a", "tau", "t_end", "omega"))
    errors = []
    for h in (0.1, 0.05, 0.025):
        subject = _order_subject(h)
        oracle = euler_delay_oracle(
            a, tau, lambda s: np.cos(omega * s), t_end, h / 1000.0
        )[::1000]
        errors.append(float(np.abs(subject - oracle).max()))
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    passed = all(r >= 4.0 for r in ratios)
    return CheckResult(
        "integrator-order",
        passed,
        {
            "errors": "[" + ", ".join(f"{e:.3e}" for e in errors) + "]",
            "ratios": "[" + ", ".join(f"{r:.2f}" for r in ratios) + "]",
        },
    )


# --- 9. bitwise determinism of the persisted artifacts -----------------------


@_timed
def check_determinism() -> CheckResult:
    """The flocking config writes byte-identical trajectory CSVs on reruns."""
    import tempfile
    from pathlib import Path

    config = flocking_run_config()
    with tempfile.TemporaryDirectory() as tmp:
        a = execute_run(config, out_dir=Path(tmp) / "first")
        b = execute_run(config, out_dir=Path(tmp) / "second")
        first = a.trajectory_csv.read_bytes()
        second = b.trajectory_csv.read_bytes()
        diag_same = a.diagnostics_csv.read_bytes() == b.diagnostics_csv.read_bytes()
    passed = first == second and diag_same
    return CheckResult(
        "determinism",
        passed,
        {"trajectory_identical": first == second, "diagnostics_identical": diag_same},
    )


CHECKS = {
    "analytic-rate": check_analytic_rate,
    "positivity": check_positivity,
    "hull": check_hull,
    "exponential-flocking": check_exponential_flocking,
    "lyapunov-monotonicity": check_lyapunov_monotonicity,
    "freewill": check_freewill,
    "delay-sweep": check_delay_sweep,
    "integrator-order": check_integrator_order,
    "determinism": check_determinism,
}

SUITES = {
    "positivity": ("positivity",),
    "hull": ("hull",),
    "flocking": ("analytic-rate", "exponential-flocking", "lyapunov-monotonicity", "delay-sweep"),
    "freewill": ("freewill",),
    "convergence": ("integrator-order", "determinism"),
}


def run_check(name: str) -> CheckResult:
    return CHECKS[name]()


def run_suite(suite: str) -> list[CheckResult]:
    if suite == "all":
        return [run_check(name) for name in CHECKS]
    if suite not in SUITES:
        raise KeyError(f"unknown suite {suite!r}; options: {sorted(SUITES)} or 'all'")
    return [run_check(name) for name in SUITES[suite]]
