import json

import numpy as np
import pytest

from isalib.cli import (
    EXIT_COLLAPSED,
    EXIT_ERROR,
    EXIT_MAX_ITERATIONS,
    EXIT_OK,
    RunConfig,
    main,
)
from isalib.ensemble import read_ensemble_csv
from isalib.errors import ConfigError


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def toy_run_config(tmp_path, **overrides):
    data = {
        "target": "toy2d",
        "init": {"mcmc": {"walkers": 4, "steps": 5, "keep": 20}},
        "isa": {"family": "gaussian", "samples": 5000, "max_iterations": 5},
        "seed": 2001,
        "workers": 1,
        "output_dir": str(tmp_path / "out"),
    }
    data.update(overrides)
    return data


class TestRunConfig:
    def test_round_trip(self, tmp_path):
        data = toy_run_config(tmp_path)
        config = RunConfig.load(write_config(tmp_path, data))
        assert RunConfig.from_dict(config.to_dict()) == config

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"target": "toy2d", "init": {}, "isa": {}, "bogus": 1})

    def test_unknown_target_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"target": "banana", "init": {"file": "x"}, "isa": {}})

    def test_exactly_one_init_strategy(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(
                {
                    "target": "toy2d",
                    "init": {"mcmc": {"walkers": 4, "steps": 1, "keep": 1}, "file": "x"},
                    "isa": {},
                }
            )
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"target": "toy2d", "init": {}, "isa": {}})

    def test_walker_floor(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(
                {
                    "target": "toy2d",
                    "init": {"mcmc": {"walkers": 3, "steps": 1, "keep": 1}},
                    "isa": {},
                }
            )

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            RunConfig.load(str(path))


class TestRunCommand:
    def test_toy_run_outputs(self, tmp_path, capsys):
        path = write_config(tmp_path, toy_run_config(tmp_path))
        code = main(["run", "--config", path])
        out_dir = tmp_path / "out"
        assert code in (EXIT_OK, EXIT_MAX_ITERATIONS)
        trace = json.loads((out_dir / "trace.json").read_text())
        assert trace["stopped_reason"] in ("converged", "max_iterations")
        assert len(trace["records"]) >= 1
        ens = read_ensemble_csv(out_dir / "ensemble.csv")
        assert ens.n == 5000
        assert (out_dir / "triangle.svg").exists()
        assert "stopped:" in capsys.readouterr().out

    def test_gaussian_converges_exit_zero(self, tmp_path):
        ens_dir = tmp_path / "seed_ens"
        ens_dir.mkdir()
        # self-start: a broad file-based initial ensemble around the target
        rng = np.random.Generator(np.random.Philox(0))
        samples = rng.standard_normal((500, 2)) * 2.0
        lines = ["weight,theta_0,theta_1"] + [
            f"{1.0 / 500}, {s[0]}, {s[1]}" for s in samples
        ]
        ens_path = ens_dir / "init.csv"
        ens_path.write_text("\n".join(lines) + "\n")
        data = {
            "target": "gaussian",
            "gaussian": {"mean": [0.0, 0.0], "covariance": [1.0, 0.0, 0.0, 1.0]},
            "init": {"file": str(ens_path)},
            "isa": {"samples": 4000, "max_iterations": 8},
            "seed": 3,
            "output_dir": str(tmp_path / "out"),
        }
        code = main(["run", "--config", write_config(tmp_path, data)])
        assert code == EXIT_OK

    def test_collapse_exit_code(self, tmp_path):
        # initial ensemble far outside the toy support: every importance
        # draw fails and the run collapses
        rng = np.random.Generator(np.random.Philox(0))
        samples = 100.0 + 0.01 * rng.standard_normal((30, 2))
        lines = ["weight,theta_0,theta_1"] + [
            f"{1.0 / 30},{s[0]},{s[1]}" for s in samples
        ]
        ens_path = tmp_path / "far.csv"
        ens_path.write_text("\n".join(lines) + "\n")
        data = {
            "target": "toy2d",
            "init": {"file": str(ens_path)},
            "isa": {"samples": 50, "max_iterations": 4},
            "seed": 1,
            "output_dir": str(tmp_path / "out"),
        }
        code = main(["run", "--config", write_config(tmp_path, data)])
        assert code == EXIT_COLLAPSED
        trace = json.loads((tmp_path / "out" / "trace.json").read_text())
        assert trace["stopped_reason"] == "collapsed"

    def test_missing_config_exit_one(self, capsys):
        assert main(["run", "--config", "/nonexistent.json"]) == EXIT_ERROR
        assert "error:" in capsys.readouterr().err

    def test_output_override(self, tmp_path):
        path = write_config(tmp_path, toy_run_config(tmp_path))
        other = tmp_path / "elsewhere"
        main(["run", "--config", path, "--output", str(other)])
        assert (other / "trace.json").exists()

    def test_seed_override_changes_draws(self, tmp_path):
        path = write_config(tmp_path, toy_run_config(tmp_path))
        main(["run", "--config", path, "--output", str(tmp_path / "a"), "--seed", "2001"])
        main(["run", "--config", path, "--output", str(tmp_path / "b"), "--seed", "2001"])
        main(["run", "--config", path, "--output", str(tmp_path / "c"), "--seed", "2002"])
        a = (tmp_path / "a" / "ensemble.csv").read_bytes()
        assert a == (tmp_path / "b" / "ensemble.csv").read_bytes()
        assert a != (tmp_path / "c" / "ensemble.csv").read_bytes()

    def test_worker_override_bitwise_identical(self, tmp_path):
        path = write_config(tmp_path, toy_run_config(tmp_path))
        main(["run", "--config", path, "--output", str(tmp_path / "w1"), "--workers", "1"])
        main(["run", "--config", path, "--output", str(tmp_path / "w4"), "--workers", "4"])
        assert (tmp_path / "w1" / "ensemble.csv").read_bytes() == (
            tmp_path / "w4" / "ensemble.csv"
        ).read_bytes()
        assert (tmp_path / "w1" / "trace.json").read_text() != ""


class TestInitCommands:
    def test_init_mcmc_writes_ensemble(self, tmp_path):
        path = write_config(tmp_path, toy_run_config(tmp_path))
        assert main(["init-mcmc", "--config", path]) == EXIT_OK
        ens = read_ensemble_csv(tmp_path / "out" / "init_ensemble.csv")
        assert ens.n == 20
        np.testing.assert_allclose(ens.weights, 1.0 / 20.0)

    def test_init_gmm_finds_toy_modes(self, tmp_path, capsys):
        data = toy_run_config(tmp_path, init={"gmm": {"n_starts": 40, "confidence": 0.95}})
        assert main(["init-gmm", "--config", write_config(tmp_path, data)]) == EXIT_OK
        modes = json.loads((tmp_path / "out" / "modes.json").read_text())
        assert len(modes["modes"]) == 5
        assert modes["status_counts"]["converged"] >= 35
        proposal = json.loads((tmp_path / "out" / "init_proposal.json").read_text())
        assert proposal["family"] == "gaussian_mixture"
        assert "found 5 distinct modes" in capsys.readouterr().out

    def test_init_gmm_requires_gmm_section(self, tmp_path):
        path = write_config(tmp_path, toy_run_config(tmp_path))
        assert main(["init-gmm", "--config", path]) == EXIT_ERROR


class TestBaselineCommand:
    def test_chain_and_iact_written(self, tmp_path):
        data = toy_run_config(
            tmp_path, init={"mcmc": {"walkers": 4, "steps": 2000, "keep": 20}}
        )
        assert main(["mcmc-baseline", "--config", write_config(tmp_path, data)]) == EXIT_OK
        report = json.loads((tmp_path / "out" / "iact.json").read_text())
        assert report["walkers"] == 4
        assert report["steps"] == 2000
        assert len(report["iact"]) == 2
        assert all(t >= 1.0 for t in report["iact"])
        chain = np.loadtxt(tmp_path / "out" / "chain.csv", delimiter=",", skiprows=1)
        assert chain.shape == (8000, 2)


class TestExportTriangle:
    def test_round_trip_through_csv(self, tmp_path):
        run_path = write_config(tmp_path, toy_run_config(tmp_path))
        main(["run", "--config", run_path])
        data = toy_run_config(
            tmp_path,
            init={"file": str(tmp_path / "out" / "ensemble.csv")},
            output_dir=str(tmp_path / "tri"),
        )
        assert main(["export-triangle", "--config", write_config(tmp_path, data, "t.json")]) == EXIT_OK
        assert (tmp_path / "tri" / "triangle.svg").exists()
        assert (tmp_path / "tri" / "hist2d_theta_0_theta_1.csv").exists()


class TestWorkersEnv:
    def test_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ISA_WORKERS", "3")
        path = write_config(tmp_path, toy_run_config(tmp_path))
        assert main(["init-mcmc", "--config", path]) == EXIT_OK
