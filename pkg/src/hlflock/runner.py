"""Run execution and persistence: trajectory/diagnostics CSVs, summaries,
parameter sweeps with a machine-readable index.

Numbers are written with 17 significant digits so identical runs produce
byte-identical CSVs.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, SweepAxis, config_to_mapping, parse_config, set_dotted
from .diagnostics import (
    DiagnosticsSeries,
    LevelFunctional,
    PairFunctional,
    compute_diagnostics,
    flocking_verdict,
)
from .dde import Trajectory, integrate
from .sim import SimSpec, make_flock_rhs, seed_flock_history

__all__ = [
    "RunArtifacts",
    "execute_run",
    "run_sweep",
    "summarize_sweep",
    "write_sweep_summary_csv",
]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass(frozen=True)
class RunArtifacts:
    directory: Path
    trajectory_csv: Path
    diagnostics_csv: Path
    summary_json: Path
    summary: dict


def _lyapunov_configs(config: RunConfig):
    configs = []
    if "lyapunov-pair" in config.diagnostics and config.graph.n_agents >= 2:
        configs.append(PairFunctional(follower=2, leader=1))
    if "lyapunov-levels" in config.diagnostics:
        for agent in range(2, config.graph.n_agents + 1):
            if config.graph.leader_set(agent):
                configs.append(LevelFunctional(agent=agent))
    return tuple(configs)


def write_trajectory_csv(path: Path, traj: Trajectory, n: int, d: int) -> None:
    header = ["t"]
    header += [f"x{i}_{k}" for i in range(1, n + 1) for k in range(1, d + 1)]
    header += [f"v{i}_{k}" for i in range(1, n + 1) for k in range(1, d + 1)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for t, row in zip(traj.times, traj.states):
            fh.write(",".join([_fmt(t)] + [_fmt(v) for v in row]) + "\n")


def write_diagnostics_csv(path: Path, diag: DiagnosticsSeries) -> None:
    n = diag.n_agents
    header = ["t", "X", "V"]
    blocks: list[np.ndarray] = [diag.times, diag.X, diag.V]
    if diag.cross_v is not None:
        header += [f"cross_{i}_{j}" for i in range(1, n + 1) for j in range(1, n + 1)]
        blocks.append(diag.cross_v.reshape(len(diag.times), n * n))
    if diag.x_dev is not None:
        header += [f"xdev_{i}" for i in range(1, n + 1)]
        header += [f"vdev_{i}" for i in range(1, n + 1)]
        blocks.append(diag.x_dev)
        blocks.append(diag.v_dev)
    lyap_cols = []
    for series in diag.lyapunov:
        header += [f"Lplus_{series.label}", f"Lminus_{series.label}"]
        pad = len(diag.times) - len(series.times)
        lyap_cols.append(np.concatenate([np.full(pad, np.nan), series.plus]))
        lyap_cols.append(np.concatenate([np.full(pad, np.nan), series.minus]))
    blocks.extend(lyap_cols)
    table = np.column_stack([b.reshape(len(diag.times), -1) for b in blocks])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in table:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fit_node(fit) -> dict | None:
    if fit is None:
        return None
    return {
        "model": fit.model,
        "window": list(fit.window),
        "C": fit.C,
        "rate": fit.rate,
        "residual": fit.residual,
        "n_samples": fit.n_samples,
    }


def execute_run(config: RunConfig, out_dir: Path | str | None = None) -> RunArtifacts:
    """Simulate one config and write trajectory CSV, diagnostics CSV, summary JSON."""
    spec: SimSpec = config.sim_spec()
    directory = Path(out_dir) if out_dir is not None else Path(config.output_dir)
    directory.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    traj = integrate(make_flock_rhs(spec), seed_flock_history(spec), spec.stepper)
    diag = compute_diagnostics(
        traj,
        spec,
        with_cross="cross-differences" in config.diagnostics,
        with_deviations="leader-deviations" in config.diagnostics,
        lyapunov_configs=_lyapunov_configs(config),
    )
    elapsed = time.perf_counter() - started

    report = flocking_verdict(diag)
    summary = {
        "version": __version__,
        "config": config_to_mapping(config),
        "verdict": {
            "flocking": report.flocking,
            "x_no_growth": report.x_no_growth,
            "v_ratio": report.v_ratio,
            "v_ratio_ok": report.v_ratio_ok,
        },
        "fits": {
            "exponential": _fit_node(report.exponential_fit),
            "power": _fit_node(report.power_fit),
        },
        "n_steps": spec.stepper.n_steps,
        "runtime_seconds": elapsed,
    }

    trajectory_csv = directory / f"{config.stem}_trajectory.csv"
    diagnostics_csv = directory / f"{config.stem}_diagnostics.csv"
    summary_json = directory / f"{config.stem}_summary.json"
    write_trajectory_csv(trajectory_csv, traj, spec.n_agents, spec.dim)
    write_diagnostics_csv(diagnostics_csv, diag)
    with open(summary_json, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return RunArtifacts(
        directory=directory,
        trajectory_csv=trajectory_csv,
        diagnostics_csv=diagnostics_csv,
        summary_json=summary_json,
        summary=summary,
    )


def _axis_label(axes: tuple[SweepAxis, ...], axis: SweepAxis) -> str:
    short = axis.parameter.rsplit(".", 1)[-1]
    if sum(1 for a in axes if a.parameter.rsplit(".", 1)[-1] == short) > 1:
        return axis.parameter.replace(".", "-")
    return short


def expand_sweep(config: RunConfig) -> list[tuple[dict, str, dict]]:
    """Cartesian expansion of the sweep axes.

    Returns (overridden mapping, run directory name, parameter assignment)
    per run, in deterministic axis order.
    """
    base = config_to_mapping(config)
    base.pop("sweep", None)
    axes = config.sweep_axes
    labels = [_axis_label(axes, ax) for ax in axes]
    runs = []
    for combo in product(*(ax.values for ax in axes)):
        mapping = json.loads(json.dumps(base))  # deep copy of plain data
        params = {}
        for ax, label, value in zip(axes, labels, combo):
            set_dotted(mapping, ax.parameter, value)
            params[ax.parameter] = value
        name = "_".join(f"{label}={value:g}" if isinstance(value, float) else f"{label}={value}"
                        for label, value in zip(labels, combo))
        runs.append((mapping, name or "single", params))
    return runs


def _sweep_worker(args: tuple[dict, str]) -> dict:
    mapping, run_dir = args
    try:
        cfg = parse_config(mapping)
        artifacts = execute_run(cfg, out_dir=run_dir)
        return {"status": "ok", "summary": str(artifacts.summary_json)}
    except Exception as exc:  # recorded per-run, the sweep itself continues
        return {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}


def run_sweep(config: RunConfig, out_root: Path | str | None = None, workers: int = 1) -> Path:
    """Run every sweep combination, one directory per run, then write the index.

    Runs execute concurrently up to ``workers``; each writes only into its own
    directory and the coordinator writes ``index.json`` once at the end.
    """
    if not config.sweep_axes:
        raise ValueError("config has no sweep axes")
    root = Path(out_root) if out_root is not None else Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    runs = expand_sweep(config)
    jobs = [(mapping, str(root / name)) for mapping, name, _ in runs]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_worker, jobs))
    else:
        outcomes = [_sweep_worker(job) for job in jobs]

    index = {
        "sweep": [{"parameter": ax.parameter, "values": list(ax.values)} for ax in config.sweep_axes],
        "runs": [
            {
                "parameters": params,
                "directory": name,
                **outcome,
            }
            for (_, name, params), outcome in zip(runs, outcomes)
        ],
    }
    index_path = root / "index.json"
    with open(index_path, "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return index_path


def summarize_sweep(index_path: Path | str) -> tuple[list[str], list[list[str]], list[str]]:
    """Tabulate a finished sweep: one row per run.

    Returns (header, rows, warnings). Missing or failed runs produce a row
    with empty result fields and a warning, never an exception.
    """
    index_path = Path(index_path)
    with open(index_path, "r", encoding="utf-8") as fh:
        index = json.load(fh)
    params_order: list[str] = []
    for run in index.get("runs", []):
        for key in run.get("parameters", {}):
            if key not in params_order:
                params_order.append(key)
    header = params_order + ["status", "flocking", "rate", "residual"]
    rows: list[list[str]] = []
    warnings: list[str] = []
    if not index.get("runs"):
        warnings.append(f"{index_path}: index contains no runs")
    root = index_path.parent
    for run in index.get("runs", []):
        row = [str(run.get("parameters", {}).get(p, "")) for p in params_order]
        status = run.get("status", "missing")
        summary_file = root / run.get("directory", "")
        stem_files = sorted(summary_file.glob("*_summary.json")) if summary_file.is_dir() else []
        if status != "ok" or not stem_files:
            if status == "ok":
                status = "missing"
            warnings.append(f"run {run.get('directory')!r}: {status}" + (f" ({run.get('error')})" if run.get("error") else ""))
            rows.append(row + [status, "", "", ""])
            continue
        with open(stem_files[0], "r", encoding="utf-8") as fh:
            summary = json.load(fh)
        fit = summary.get("fits", {}).get("exponential") or {}
        rows.append(
            row
            + [
                "ok",
                str(summary.get("verdict", {}).get("flocking", "")),
                _fmt(fit["rate"]) if "rate" in fit else "",
                _fmt(fit["residual"]) if "residual" in fit else "",
            ]
        )
    return header, rows, warnings


def write_sweep_summary_csv(index_path: Path | str, out_path: Path | str) -> list[str]:
    header, rows, warnings = summarize_sweep(index_path)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    return warnings
