import json
import math
import re

import pytest

from spincavity.cli import main
from spincavity.config import ConfigError, resolve_config

TWO_PI = 2 * math.pi

FAST_CONFIG = {
    "N": 2,
    "eta": TWO_PI * 0.05,
    "delta": TWO_PI * 0.1,
    "Omega": TWO_PI * 0.6,
    "n_max": 8,
    "source": "effective",
    "n_time_samples": 21,
    "settings": {"rel_tol": 1e-9},
}


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


class TestConfigResolution:
    def test_defaults_materialized(self):
        cfg = resolve_config({"N": 2, "eta": 1.0, "delta": 2.0})
        assert cfg.raw["n_max"] == 12
        assert cfg.raw["source"] == "effective"
        assert cfg.raw["k"] == 1

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            resolve_config({"N": 2, "eta": 1.0, "delta": 2.0, "bogus": 1})

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="missing required"):
            resolve_config({"N": 2})

    def test_preset_overlay(self):
        cfg = resolve_config({"N": 3, "n_time_samples": 5}, preset_name="paper_n2")
        assert cfg.raw["N"] == 3
        assert cfg.raw["eta"] == pytest.approx(TWO_PI * 0.05)
        assert cfg.raw["lambda_params"]["q_factor"] == 1e9

    def test_sweep_vocabulary(self):
        with pytest.raises(ConfigError, match="axis name"):
            resolve_config({"N": 2, "eta": 1.0, "delta": 2.0,
                            "sweep": {"axes": [{"name": "phi", "values": [0.1]}]}})
        with pytest.raises(ConfigError, match="finite"):
            resolve_config({"N": 2, "eta": 1.0, "delta": 2.0,
                            "sweep": {"axes": [{"name": "Omega", "values": [1e40]}]}})


class TestSimulate:
    def test_writes_outputs(self, tmp_path):
        cfg = write_config(tmp_path, FAST_CONFIG)
        code = main(["simulate", "--config", cfg, "--out", str(tmp_path / "out")])
        assert code == 0
        rows = (tmp_path / "out" / "trajectory.csv").read_text().splitlines()
        assert rows[0] == "t_ns,fidelity,F_in_model,norm_defect,top_fock_pop"
        assert len(rows) == 1 + FAST_CONFIG["n_time_samples"]
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert 0.0 <= summary["final_fidelity"] <= 1.0
        assert summary["commensurability"]["satisfied"] is True

    def test_numeric_fields_have_twelve_digits(self, tmp_path):
        cfg = write_config(tmp_path, FAST_CONFIG)
        main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")])
        line = (tmp_path / "o" / "trajectory.csv").read_text().splitlines()[3]
        for cell in line.split(","):
            assert re.fullmatch(r"-?\d\.\d{12}e[+-]\d{2,3}", cell), cell

    def test_negative_delta_exit_3(self, tmp_path, capsys):
        cfg = write_config(tmp_path, dict(FAST_CONFIG, delta=-1.0))
        code = main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 3
        assert "delta must be > 0" in capsys.readouterr().err

    def test_malformed_json_exit_2(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 2

    def test_unknown_key_exit_2(self, tmp_path):
        cfg = write_config(tmp_path, dict(FAST_CONFIG, nonsense=3))
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_single_qubit_contract(self, tmp_path):
        cfg = write_config(tmp_path, dict(FAST_CONFIG, N=1, n_time_samples=7))
        code = main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 0
        rows = (tmp_path / "o" / "trajectory.csv").read_text().splitlines()
        assert len(rows) == 8
        assert rows[2].split(",")[1] == ""  # fidelity column empty
        summary = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert "final_fidelity" not in summary

    def test_determinism_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, FAST_CONFIG)
        main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
        main(["simulate", "--config", cfg, "--out", str(tmp_path / "b")])
        for name in ("trajectory.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_config_round_trip(self, tmp_path):
        cfg = write_config(tmp_path, FAST_CONFIG)
        main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")])
        summary = json.loads((tmp_path / "o" / "summary.json").read_text())
        resolved = summary["config"]
        # defaults materialized alongside the explicit fields
        assert resolved["k"] == 1
        assert resolved["fidelity_mode"] == "trace"
        assert resolved["N"] == 2

    def test_requires_config_or_preset(self):
        assert main(["simulate", "--out", "/tmp/nowhere"]) == 2


class TestSweep:
    def test_thermal_sweep_constant_fidelity(self, tmp_path):
        data = dict(FAST_CONFIG, n_max=27, n_time_samples=3, Omega=0.0)
        data["sweep"] = {"axes": [{"name": "n_bar", "values": [0.0, 0.5, 1.0]}]}
        data["settings"] = {"rel_tol": 1e-10}
        cfg = write_config(tmp_path, data)
        code = main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 0
        rows = (tmp_path / "o" / "sweep.csv").read_text().splitlines()
        assert rows[0].startswith("n_bar,final_fidelity")
        fids = [float(r.split(",")[1]) for r in rows[1:]]
        assert len(fids) == 3
        assert max(fids) - min(fids) < 1e-6

    def test_two_axes_row_order(self, tmp_path):
        data = dict(FAST_CONFIG, n_time_samples=3, n_max=6)
        data["sweep"] = {"axes": [
            {"name": "eta", "values": [TWO_PI * 0.05, TWO_PI * 0.06]},
            {"name": "k", "values": [1, 2]},
        ]}
        cfg = write_config(tmp_path, data)
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
        rows = (tmp_path / "o" / "sweep.csv").read_text().splitlines()
        assert len(rows) == 5
        first = [float(r.split(",")[0]) for r in rows[1:]]
        assert first == sorted(first)  # row-major over the first axis

    def test_missing_axes_exit_2(self, tmp_path):
        data = dict(FAST_CONFIG)
        data["sweep"] = {"axes": []}
        cfg = write_config(tmp_path, data)
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_sweep_without_sweep_block_exit_2(self, tmp_path):
        cfg = write_config(tmp_path, FAST_CONFIG)
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_parallel_jobs_match_serial(self, tmp_path):
        data = dict(FAST_CONFIG, n_time_samples=3, n_max=6)
        data["sweep"] = {"axes": [{"name": "Omega", "values": [0.0, TWO_PI * 0.6]}]}
        cfg = write_config(tmp_path, data)
        main(["sweep", "--config", cfg, "--out", str(tmp_path / "serial")])
        main(["sweep", "--config", cfg, "--out", str(tmp_path / "par"), "--jobs", "2"])
        assert (tmp_path / "serial" / "sweep.csv").read_bytes() == \
            (tmp_path / "par" / "sweep.csv").read_bytes()


class TestBudgetCommand:
    def test_preset_budget(self, tmp_path, capsys):
        code = main(["budget", "--preset", "paper_n4", "--out", str(tmp_path)])
        assert code == 0
        payload = json.loads((tmp_path / "budget.json").read_text())
        assert payload["eta_rad_per_ns"] == pytest.approx(TWO_PI * 0.05, rel=1e-10)
        assert payload["gate_time_ns"] == pytest.approx(10.0, rel=1e-10)
        assert payload["kappa_rad_per_ns"] == pytest.approx(TWO_PI * 4.70632e-4, rel=1e-5)
        assert "eta_rad_per_ns" in capsys.readouterr().out

    def test_missing_gamma0_exit_2(self, tmp_path, capsys):
        data = dict(FAST_CONFIG)
        data["lambda_params"] = {
            "G": TWO_PI, "Omega_L": TWO_PI * 0.5, "Delta": TWO_PI * 20,
            "omega_c": TWO_PI * 4.7e5, "omega_10": TWO_PI * 2.88, "q_factor": 1e9,
        }
        cfg = write_config(tmp_path, data)
        assert main(["budget", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "gamma0" in capsys.readouterr().err

    def test_zero_q_exit_3(self, tmp_path):
        data = dict(FAST_CONFIG)
        data["lambda_params"] = {
            "G": TWO_PI, "Omega_L": TWO_PI * 0.5, "Delta": TWO_PI * 20,
            "omega_c": TWO_PI * 4.7e5, "omega_10": TWO_PI * 2.88,
            "gamma0": TWO_PI * 0.083, "q_factor": 0.0,
        }
        cfg = write_config(tmp_path, data)
        assert main(["budget", "--config", cfg, "--out", str(tmp_path)]) == 3


class TestValidateCommand:
    def test_fast_level_passes(self, capsys):
        code = main(["validate", "--level", "fast"])
        out = capsys.readouterr().out
        assert code == 0, out
        assert "PASS" in out
        assert "gating checks passed" in out
