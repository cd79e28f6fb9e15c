"""Run configuration: YAML parsing, validation, and round-tripping.

A config file has sections ``graph``, ``kernel``, ``sim``, ``stepper`` and
optional ``forcing``, ``output``, ``diagnostics``, ``sweep``, ``seed``. All
quantities are plain numbers (no expression language); times share the
simulation's one time unit, and positions/velocities are per-axis components.
Validation collects every problem before reporting.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .errors import ConfigError
from .graph import HLGraph, validate
from .kernels import (
    CuckerSmaleKernel,
    Forcing,
    Kernel,
    PowerDecayForcing,
    TabulatedForcing,
    TabulatedKernel,
    ZeroForcing,
)
from .dde import StepperConfig
from .sim import (
    ConstantInitialData,
    InitialData,
    LinearInitialData,
    SampledInitialData,
    SimSpec,
)

__all__ = ["RunConfig", "SweepAxis", "parse_config", "load_config", "config_to_mapping"]

DIAGNOSTIC_SERIES = ("cross-differences", "leader-deviations", "lyapunov-pair", "lyapunov-levels")
DEFAULT_DIAGNOSTICS = ("cross-differences", "leader-deviations", "lyapunov-pair")


@dataclass(frozen=True)
class SweepAxis:
    parameter: str  # dotted path into the config mapping, e.g. "kernel.beta"
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ValueError(f"sweep axis {self.parameter!r} has no values")


@dataclass(eq=False)
class RunConfig:
    graph: HLGraph
    kernel: Kernel
    tau: float
    dim: int
    initial: InitialData
    stepper: StepperConfig
    forcing: Forcing = ZeroForcing()
    output_dir: str = "runs"
    stem: str = "run"
    diagnostics: tuple[str, ...] = DEFAULT_DIAGNOSTICS
    sweep_axes: tuple[SweepAxis, ...] = ()
    seed: int = 0

    def sim_spec(self) -> SimSpec:
        return SimSpec(
            graph=self.graph,
            kernel=self.kernel,
            tau=self.tau,
            dim=self.dim,
            initial=self.initial,
            stepper=self.stepper,
            forcing=self.forcing,
        )


def _graph_from_mapping(node: Mapping, problems: list[str]) -> HLGraph | None:
    try:
        n = int(node["n_agents"])
    except (KeyError, TypeError, ValueError):
        problems.append("graph.n_agents must be given as an integer")
        return None
    leader_lists: dict[int, tuple[int, ...]] = {}
    for entry in node.get("leaders", []) or []:
        try:
            agent = int(entry["agent"])
            leader_lists[agent] = tuple(int(j) for j in entry["leaders"])
        except (KeyError, TypeError, ValueError):
            problems.append(f"graph.leaders entry {entry!r} must look like {{agent: i, leaders: [j, ...]}}")
            return None
        if agent < 1 or agent > n:
            problems.append(f"graph.leaders names agent {agent}, outside 1..{n}")
            return None
    weights = None
    if node.get("weights"):
        weights = {}
        for entry in node["weights"]:
            try:
                weights[(int(entry["agent"]), int(entry["leader"]))] = float(entry["weight"])
            except (KeyError, TypeError, ValueError):
                problems.append(f"graph.weights entry {entry!r} must give agent, leader, weight")
                return None
    try:
        graph = HLGraph.from_leader_lists(
            [leader_lists.get(i, ()) for i in range(1, n + 1)], weights=weights
        )
    except ValueError as exc:
        problems.append(f"graph: {exc}")
        return None
    result = validate(graph)
    if not result.ok:
        problems.extend(f"graph: {v}" for v in result.violations)
        return None
    return graph


def _kernel_from_mapping(node: Mapping, problems: list[str]) -> Kernel | None:
    form = node.get("form", "cucker-smale")
    try:
        if form == "cucker-smale":
            return CuckerSmaleKernel(
                H=float(node.get("H", 1.0)),
                sigma=float(node.get("sigma", 1.0)),
                beta=float(node.get("beta", 0.25)),
            )
        if form == "tabulated":
            return TabulatedKernel(knots=tuple(node["knots"]), values=tuple(node["values"]))
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(f"kernel: {exc}")
        return None
    problems.append(f"kernel.form must be 'cucker-smale' or 'tabulated', got {form!r}")
    return None


def _forcing_from_mapping(node: Mapping | None, problems: list[str]) -> Forcing | None:
    if not node:
        return ZeroForcing()
    form = node.get("form", "zero")
    try:
        if form == "zero":
            return ZeroForcing()
        if form == "power-decay":
            direction = node.get("direction")
            return PowerDecayForcing(
                amplitude=float(node["amplitude"]),
                mu=float(node["mu"]),
                direction=tuple(direction) if direction is not None else None,
            )
        if form == "user-tabulated":
            return TabulatedForcing(
                times=tuple(node["samples"]["times"]),
                values=tuple(tuple(row) for row in node["samples"]["values"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(f"forcing: {exc}")
        return None
    problems.append(f"forcing.form must be zero, power-decay, or user-tabulated, got {form!r}")
    return None


def _initial_from_mapping(node: Mapping, problems: list[str]) -> InitialData | None:
    form = node.get("form", "constant")
    try:
        if form == "constant":
            return ConstantInitialData(
                positions=np.asarray(node["positions"], dtype=float),
                velocities=np.asarray(node["velocities"], dtype=float),
            )
        if form == "linear":
            def opt(key):
                return np.asarray(node[key], dtype=float) if key in node else None

            return LinearInitialData(
                positions=np.asarray(node["positions"], dtype=float),
                velocities=np.asarray(node["velocities"], dtype=float),
                position_slopes=opt("position_slopes"),
                velocity_slopes=opt("velocity_slopes"),
            )
        if form == "sampled":
            return SampledInitialData(
                s_grid=np.asarray(node["s_grid"], dtype=float),
                positions=np.asarray(node["positions"], dtype=float),
                velocities=np.asarray(node["velocities"], dtype=float),
            )
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(f"sim.initial: {exc}")
        return None
    problems.append(f"sim.initial.form must be constant, linear, or sampled, got {form!r}")
    return None


def parse_config(mapping: Mapping[str, Any]) -> RunConfig:
    """Build a validated RunConfig from a parsed mapping.

    Raises :class:`ConfigError` listing every problem found. Errors that only
    surface when the parts are combined (delay misalignment, shape clashes)
    are raised by ``RunConfig.sim_spec`` with their own typed exceptions.
    """
    problems: list[str] = []
    if not isinstance(mapping, Mapping):
        raise ConfigError(["top level must be a mapping"])

    graph = kernel = initial = stepper = None
    if "graph" not in mapping:
        problems.append("missing section: graph")
    else:
        graph = _graph_from_mapping(mapping["graph"], problems)
    if "kernel" not in mapping:
        problems.append("missing section: kernel")
    else:
        kernel = _kernel_from_mapping(mapping["kernel"], problems)
    forcing = _forcing_from_mapping(mapping.get("forcing"), problems)

    sim_node = mapping.get("sim")
    tau = 0.0
    dim = 1
    if sim_node is None:
        problems.append("missing section: sim")
    else:
        try:
            tau = float(sim_node.get("tau", 0.0))
            dim = int(sim_node.get("dim", 1))
        except (TypeError, ValueError) as exc:
            problems.append(f"sim: {exc}")
        if "initial" not in sim_node:
            problems.append("sim.initial is required")
        else:
            initial = _initial_from_mapping(sim_node["initial"], problems)

    step_node = mapping.get("stepper")
    if step_node is None:
        problems.append("missing section: stepper")
    else:
        try:
            stepper = StepperConfig(
                h=float(step_node["h"]),
                t_end=float(step_node["t_end"]),
                scheme=str(step_node.get("scheme", "rk4")),
                window=(float(step_node["window"]) if step_node.get("window") is not None else None),
            )
        except KeyError as exc:
            problems.append(f"stepper: missing field {exc}")
        except Exception as exc:
            problems.append(f"stepper: {exc}")

    out_node = mapping.get("output", {}) or {}
    output_dir = str(out_node.get("directory", "runs"))
    stem = str(out_node.get("stem", "run"))

    diagnostics = tuple(mapping.get("diagnostics", DEFAULT_DIAGNOSTICS))
    for name in diagnostics:
        if name not in DIAGNOSTIC_SERIES:
            problems.append(f"diagnostics: unknown series {name!r}; options are {DIAGNOSTIC_SERIES}")

    sweep_axes: list[SweepAxis] = []
    sweep_node = mapping.get("sweep") or {}
    for axis in sweep_node.get("axes", []) or []:
        try:
            sweep_axes.append(SweepAxis(parameter=str(axis["parameter"]), values=tuple(axis["values"])))
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"sweep: {exc}")
    for axis in sweep_axes:
        if _dig(mapping, axis.parameter) is _MISSING:
            problems.append(f"sweep axis {axis.parameter!r} does not name an existing parameter")

    seed = int(mapping.get("seed", 0))

    if problems:
        raise ConfigError(problems)

    config = RunConfig(
        graph=graph,
        kernel=kernel,
        tau=tau,
        dim=dim,
        initial=initial,
        stepper=stepper,
        forcing=forcing,
        output_dir=output_dir,
        stem=stem,
        diagnostics=diagnostics,
        sweep_axes=tuple(sweep_axes),
        seed=seed,
    )
    return config


_MISSING = object()


def _dig(mapping: Mapping, dotted: str):
    node: Any = mapping
    for part in dotted.split("."):
        if not isinstance(node, Mapping) or part not in node:
            return _MISSING
        node = node[part]
    return node


def set_dotted(mapping: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = mapping
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def load_config(path: str | Path) -> RunConfig:
    """Parse a YAML config file."""
    with open(path, "r", encoding="utf-8") as fh:
        mapping = yaml.safe_load(fh)
    if mapping is None:
        raise ConfigError([f"{path}: empty config"])
    return parse_config(mapping)


def config_to_mapping(config: RunConfig) -> dict:
    """Echo a RunConfig back to a plain mapping that re-parses equivalently."""
    graph_node: dict[str, Any] = {
        "n_agents": config.graph.n_agents,
        "leaders": [
            {"agent": i, "leaders": list(config.graph.leader_set(i))}
            for i in range(1, config.graph.n_agents + 1)
            if config.graph.leader_set(i)
        ],
    }
    if config.graph.weights:
        graph_node["weights"] = [
            {"agent": i, "leader": j, "weight": w}
            for (i, j), w in sorted(config.graph.weights.items())
        ]

    k = config.kernel
    if isinstance(k, CuckerSmaleKernel):
        kernel_node = {"form": "cucker-smale", "H": k.H, "sigma": k.sigma, "beta": k.beta}
    else:
        kernel_node = {"form": "tabulated", "knots": list(k.knots), "values": list(k.values)}

    f = config.forcing
    if isinstance(f, ZeroForcing):
        forcing_node = {"form": "zero"}
    elif isinstance(f, PowerDecayForcing):
        forcing_node = {"form": "power-decay", "amplitude": f.amplitude, "mu": f.mu}
        if f.direction is not None:
            forcing_node["direction"] = list(f.direction)
    else:
        forcing_node = {
            "form": "user-tabulated",
            "samples": {
                "times": list(f.times),
                "values": [list(row) for row in f.values],
            },
        }

    ini = config.initial
    if isinstance(ini, ConstantInitialData):
        initial_node = {
            "form": "constant",
            "positions": ini.positions.tolist(),
            "velocities": ini.velocities.tolist(),
        }
    elif isinstance(ini, LinearInitialData):
        initial_node = {
            "form": "linear",
            "positions": ini.positions.tolist(),
            "velocities": ini.velocities.tolist(),
            "position_slopes": ini.position_slopes.tolist(),
            "velocity_slopes": ini.velocity_slopes.tolist(),
        }
    else:
        initial_node = {
            "form": "sampled",
            "s_grid": ini.s_grid.tolist(),
            "positions": ini.positions.tolist(),
            "velocities": ini.velocities.tolist(),
        }

    mapping: dict[str, Any] = {
        "graph": graph_node,
        "kernel": kernel_node,
        "forcing": forcing_node,
        "sim": {"tau": config.tau, "dim": config.dim, "initial": initial_node},
        "stepper": {
            "h": config.stepper.h,
            "t_end": config.stepper.t_end,
            "scheme": config.stepper.scheme,
            **({"window": config.stepper.window} if config.stepper.window is not None else {}),
        },
        "output": {"directory": config.output_dir, "stem": config.stem},
        "diagnostics": list(config.diagnostics),
        "seed": config.seed,
    }
    if config.sweep_axes:
        mapping["sweep"] = {
            "axes": [{"parameter": ax.parameter, "values": list(ax.values)} for ax in config.sweep_axes]
        }
    return mapping
