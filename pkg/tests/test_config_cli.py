import json

import pytest
import yaml

from hlflock import ConfigError, MisalignedDelay
from hlflock.cli import main
from hlflock.config import config_to_mapping, load_config, parse_config
from hlflock.runner import execute_run, run_sweep, summarize_sweep, write_sweep_summary_csv


def minimal_mapping(**overrides):
    mapping = {
        "graph": {
            "n_agents": 2,
            "leaders": [{"agent": 2, "leaders": [1]}],
        },
        "kernel": {"form": "cucker-smale", "H": 1.0, "sigma": 1.0, "beta": 0.25},
        "sim": {
            "tau": 0.5,
            "dim": 1,
            "initial": {
                "form": "constant",
                "positions": [[0.0], [1.0]],
                "velocities": [[0.0], [1.0]],
            },
        },
        "stepper": {"h": 0.05, "t_end": 2.0, "scheme": "rk4"},
        "output": {"directory": "runs/mini", "stem": "mini"},
        "seed": 7,
    }
    mapping.update(overrides)
    return mapping


class TestParsing:
    def test_minimal_config_parses(self):
        config = parse_config(minimal_mapping())
        assert config.graph.n_agents == 2
        assert config.tau == 0.5
        assert config.stem == "mini"

    def test_round_trip_is_equivalent(self):
        config = parse_config(minimal_mapping())
        echoed = config_to_mapping(config)
        again = parse_config(echoed)
        assert config_to_mapping(again) == echoed

    def test_graph_violations_reported_together(self):
        mapping = minimal_mapping()
        mapping["graph"] = {
            "n_agents": 3,
            "leaders": [{"agent": 1, "leaders": [2]}],  # upward edge + empty sets
        }
        with pytest.raises(ConfigError) as err:
            parse_config(mapping)
        text = str(err.value)
        assert "agent 1" in text and "agent 2" in text and "agent 3" in text

    def test_missing_sections_listed(self):
        with pytest.raises(ConfigError) as err:
            parse_config({"kernel": {"form": "cucker-smale"}})
        text = str(err.value)
        assert "graph" in text and "sim" in text and "stepper" in text

    def test_unknown_diagnostics_rejected(self):
        mapping = minimal_mapping(diagnostics=["cross-differences", "nonsense"])
        with pytest.raises(ConfigError, match="nonsense"):
            parse_config(mapping)

    def test_sweep_axis_must_name_existing_parameter(self):
        mapping = minimal_mapping(sweep={"axes": [{"parameter": "kernel.gamma", "values": [1]}]})
        with pytest.raises(ConfigError, match="kernel.gamma"):
            parse_config(mapping)

    def test_misaligned_delay_rejected_before_integration(self):
        mapping = minimal_mapping()
        mapping["stepper"]["h"] = 0.3
        config = parse_config(mapping)
        with pytest.raises(MisalignedDelay):
            config.sim_spec()

    def test_yaml_file_loading(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("# demo config\n" + yaml.safe_dump(minimal_mapping()))
        config = load_config(path)
        assert config.seed == 7


class TestRunner:
    def test_simulate_writes_three_artifacts(self, tmp_path):
        config = parse_config(minimal_mapping())
        artifacts = execute_run(config, out_dir=tmp_path)
        assert artifacts.trajectory_csv.exists()
        assert artifacts.diagnostics_csv.exists()
        assert artifacts.summary_json.exists()
        header = artifacts.trajectory_csv.read_text().splitlines()[0]
        assert header == "t,x1_1,x2_1,v1_1,v2_1"

    def test_reruns_are_bitwise_identical(self, tmp_path):
        config = parse_config(minimal_mapping())
        a = execute_run(config, out_dir=tmp_path / "a")
        b = execute_run(config, out_dir=tmp_path / "b")
        assert a.trajectory_csv.read_bytes() == b.trajectory_csv.read_bytes()
        assert a.diagnostics_csv.read_bytes() == b.diagnostics_csv.read_bytes()

    def test_sweep_expands_cartesian_and_indexes(self, tmp_path):
        mapping = minimal_mapping(
            sweep={"axes": [{"parameter": "kernel.beta", "values": [0.1, 0.25, 0.5]}]}
        )
        config = parse_config(mapping)
        index_path = run_sweep(config, out_root=tmp_path)
        index = json.loads(index_path.read_text())
        assert [run["parameters"]["kernel.beta"] for run in index["runs"]] == [0.1, 0.25, 0.5]
        assert all(run["status"] == "ok" for run in index["runs"])
        assert sorted(p.name for p in tmp_path.iterdir() if p.is_dir()) == [
            "beta=0.1",
            "beta=0.25",
            "beta=0.5",
        ]

    def test_sweep_summary_table(self, tmp_path):
        mapping = minimal_mapping(
            sweep={"axes": [{"parameter": "sim.tau", "values": [0.0, 0.25, 0.5]}]}
        )
        mapping["stepper"]["t_end"] = 30.0
        config = parse_config(mapping)
        index_path = run_sweep(config, out_root=tmp_path)
        header, rows, warnings = summarize_sweep(index_path)
        assert header[:1] == ["sim.tau"]
        assert len(rows) == 3
        assert not warnings
        # every delay flocks: no smallness condition on tau
        flocking_col = header.index("flocking")
        assert all(row[flocking_col] == "True" for row in rows)

    def test_summary_reports_missing_runs(self, tmp_path):
        mapping = minimal_mapping(
            sweep={"axes": [{"parameter": "kernel.beta", "values": [0.1, 0.2]}]}
        )
        config = parse_config(mapping)
        index_path = run_sweep(config, out_root=tmp_path)
        # damage one run directory
        victim = tmp_path / "beta=0.1" / "mini_summary.json"
        victim.unlink()
        header, rows, warnings = summarize_sweep(index_path)
        assert len(rows) == 2
        assert any("beta=0.1" in w for w in warnings)
        out_csv = tmp_path / "table.csv"
        warnings2 = write_sweep_summary_csv(index_path, out_csv)
        assert out_csv.exists() and warnings2

    def test_empty_index_gives_empty_table_and_warning(self, tmp_path):
        index_path = tmp_path / "index.json"
        index_path.write_text(json.dumps({"runs": []}))
        header, rows, warnings = summarize_sweep(index_path)
        assert rows == []
        assert warnings


class TestCli:
    def test_simulate_smoke(self, tmp_path, capsys):
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump(minimal_mapping()))
        code = main(["simulate", str(path), "--output", str(tmp_path / "out")])
        assert code == 0
        out = capsys.readouterr().out
        assert "flocking=" in out
        assert (tmp_path / "out" / "mini_trajectory.csv").exists()

    def test_simulate_rejects_misaligned_delay(self, tmp_path, capsys):
        mapping = minimal_mapping()
        mapping["stepper"]["h"] = 0.3
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump(mapping))
        code = main(["simulate", str(path), "--output", str(tmp_path / "out")])
        assert code == 2
        assert "integer multiple" in capsys.readouterr().err
        assert not (tmp_path / "out" / "mini_trajectory.csv").exists()

    def test_sweep_and_summary_commands(self, tmp_path, capsys):
        mapping = minimal_mapping(
            sweep={"axes": [{"parameter": "kernel.beta", "values": [0.1, 0.5]}]}
        )
        path = tmp_path / "sweep.yaml"
        path.write_text(yaml.safe_dump(mapping))
        code = main(["sweep", str(path), "--output", str(tmp_path / "out"), "--workers", "2"])
        assert code == 0
        index = tmp_path / "out" / "index.json"
        assert index.exists()
        capsys.readouterr()  # drain the sweep command's output
        code = main(["summary", str(index)])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3  # header + two runs

    def test_verify_exit_status(self, capsys):
        code = main(["verify", "hull"])
        assert code == 0
        out = capsys.readouterr().out
        assert "[PASS] hull" in out
