"""
Tests for the command-line interface.

Tests cover:
- Spectral table output
- recon1d outputs and report fields
- Phantom sinogram CSV layout
- Sweep outputs, determinism and optional recording
- Exit codes and JSON error lines for usage, validation, certified range,
  numerical failure and clamped truncation
- Experiment config validation
"""

import json
import sys
from pathlib import Path

import pandas as pd
import pytest

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from pswf_recon.cli import ExperimentConfig, run
from pswf_recon.pswf_core import NumericalFailure

SWEEP_CONFIG = {
    "phantom": "hat",
    "c": 20.0,
    "r": 20.0,
    "sigma": 1.0,
    "alpha": 0.5,
    "deltas": [1e-2, 1e-3],
    "seeds": [0, 1],
    "beta": 0.4,
    "mu": 0.4,
}


def error_lines(stderr: str):
    """JSON error records written to stderr."""
    return [json.loads(line) for line in stderr.splitlines() if line.startswith('{"error"')]


@pytest.fixture
def sweep_config_path(tmp_path):
    """Sweep config JSON on disk."""
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(SWEEP_CONFIG), encoding="utf-8")
    return path


class TestPswfTable:
    """Test the pswf table command."""

    def test_writes_table(self, tmp_path):
        """Test c = 10, n = 15 gives 16 rows with decreasing lambda."""
        out = tmp_path / "table.csv"
        assert run(["pswf", "table", "--c", "10", "--n", "15", "--out", str(out)]) == 0

        table = pd.read_csv(out)
        assert list(table.columns) == ["n", "chi", "lambda", "abs_mu", "arg_mu"]
        assert len(table) == 16
        assert table["lambda"].is_monotonic_decreasing

    def test_stdout(self, capsys):
        """Test the table goes to stdout without --out."""
        assert run(["pswf", "table", "--c", "2", "--n", "3"]) == 0
        assert capsys.readouterr().out.startswith("n,chi,lambda,abs_mu,arg_mu")

    def test_invalid_bandwidth(self, capsys):
        """Test c <= 0 exits 1 with a validation record."""
        assert run(["pswf", "table", "--c", "-1", "--n", "3"]) == 1
        assert error_lines(capsys.readouterr().err)[-1]["error"] == "validation"

    def test_numerical_failure(self, mocker, capsys):
        """Test a NumericalFailure maps to exit 2."""
        mocker.patch("pswf_recon.cli.pswf_core.build_basis", side_effect=NumericalFailure("tail check"))

        assert run(["pswf", "table", "--c", "10", "--n", "15"]) == 2
        record = error_lines(capsys.readouterr().err)[-1]
        assert record == {"error": "numerical_failure", "message": "tail check"}

    def test_floor_above_lambda_zero(self, capsys):
        """Test an empty certified range exits 2, not as a validation error."""
        assert run(["pswf", "table", "--c", "0.1", "--n", "3", "--lambda-floor", "0.9"]) == 2
        record = error_lines(capsys.readouterr().err)[-1]
        assert record["error"] == "numerical_failure"
        assert "below the floor" in record["message"]


class TestRecon1D:
    """Test the recon1d command."""

    def test_exact_data_report(self, tmp_path):
        """Test N = 0 gives an error equal to the projection error, and all outputs exist."""
        out = tmp_path / "hat"
        code = run(["recon1d", "--c", "20", "--alpha", "0.5", "--delta", "1e-3", "--phantom", "hat",
                    "--noise-scale", "0", "--points", "51", "--out", str(out)])
        assert code == 0

        report = json.loads((out / "report.json").read_text())
        assert report["n_star"] == report["n_used"]
        assert report["l2_error"] == pytest.approx(report["projection_error"], rel=0.1)
        assert report["l2_error"] <= report["lemma13_bound"] * 1.01
        assert report["config"]["alpha"] == 0.5

        coeffs = pd.read_csv(out / "coeffs.csv")
        assert list(coeffs.columns) == ["n", "re", "im"]
        assert len(coeffs) == report["n_used"] + 1
        recon = pd.read_csv(out / "recon.csv")
        assert len(recon) == 51

    def test_invalid_alpha(self, tmp_path, capsys):
        """Test alpha = 1.5 exits 1 naming the interval."""
        code = run(["recon1d", "--c", "20", "--alpha", "1.5", "--delta", "1e-3", "--out", str(tmp_path)])

        assert code == 1
        record = error_lines(capsys.readouterr().err)[-1]
        assert record["error"] == "validation"
        assert "(0, 1)" in record["message"]

    def test_clamped(self, tmp_path, capsys):
        """Test a clamped n* still writes outputs and exits 2."""
        out = tmp_path / "clamped"
        code = run(["recon1d", "--c", "20", "--alpha", "0.5", "--delta", "1e-3",
                    "--lambda-floor", "0.5", "--out", str(out)])

        assert code == 2
        assert json.loads((out / "report.json").read_text())["clamped"] is True
        assert error_lines(capsys.readouterr().err)[-1]["error"] == "clamped"

    def test_rejects_2d_phantom(self, tmp_path, capsys):
        """Test that argparse choices reject a disk for recon1d."""
        assert run(["recon1d", "--c", "20", "--alpha", "0.5", "--delta", "1e-3",
                    "--phantom", "disk", "--out", str(tmp_path)]) == 1
        assert error_lines(capsys.readouterr().err)[-1]["error"] == "usage"


class TestUsage:
    """Test argument errors."""

    def test_unknown_flag(self, capsys):
        """Test an unknown flag exits 1."""
        assert run(["pswf", "table", "--c", "1", "--n", "2", "--bogus"]) == 1
        assert error_lines(capsys.readouterr().err)[-1]["error"] == "usage"

    def test_missing_command(self, capsys):
        """Test that a subcommand is required."""
        assert run([]) == 1


class TestPhantomSinogram:
    """Test the phantom sinogram command."""

    def test_csv_layout(self, tmp_path):
        """Test M * K rows with columns y, theta, value."""
        out = tmp_path / "sino.csv"
        code = run(["phantom", "sinogram", "--kind", "disk", "--radius", "0.5",
                    "--angles", "12", "--samples", "33", "--out", str(out)])
        assert code == 0

        frame = pd.read_csv(out)
        assert list(frame.columns) == ["y", "theta", "value"]
        assert len(frame) == 33 * 12
        assert frame["value"].max() == pytest.approx(1.0)


@pytest.mark.integration
class TestSweep:
    """Test the sweep command."""

    def test_outputs(self, tmp_path, sweep_config_path):
        """Test sweep.csv columns and the report echo of the config."""
        out = tmp_path / "run"
        assert run(["--threads", "2", "sweep", "--config", str(sweep_config_path), "--out", str(out)]) == 0

        table = pd.read_csv(out / "sweep.csv")
        assert list(table.columns) == ["delta", "n_star", "mean_error", "lemma13_bound", "fit_residual"]
        assert len(table) == 2
        report = json.loads((out / "report.json").read_text())
        assert report["config"]["deltas"] == [1e-2, 1e-3]

    def test_deterministic(self, tmp_path, sweep_config_path):
        """Test two runs with different thread counts write identical bytes."""
        first, second = tmp_path / "a", tmp_path / "b"
        assert run(["--threads", "1", "sweep", "--config", str(sweep_config_path), "--out", str(first)]) == 0
        assert run(["--threads", "3", "sweep", "--config", str(sweep_config_path), "--out", str(second)]) == 0

        for name in ("sweep.csv", "report.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_record(self, mocker, tmp_path, sweep_config_path):
        """Test --record stores the run through the db helpers."""
        init_db = mocker.patch("pswf_recon.db.init_db")
        record = mocker.patch("pswf_recon.db.record_sweep", return_value=7)

        code = run(["sweep", "--config", str(sweep_config_path), "--out", str(tmp_path / "run"),
                    "--record", "--notes", "baseline"])

        assert code == 0
        init_db.assert_called_once()
        assert record.call_args.kwargs["notes"] == "baseline"
        assert record.call_args.args[1] == "hat"

    def test_invalid_config(self, tmp_path, capsys):
        """Test an invalid config exits 1."""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({**SWEEP_CONFIG, "alpha": 1.5}), encoding="utf-8")

        assert run(["sweep", "--config", str(path), "--out", str(tmp_path / "run")]) == 1
        assert "(0, 1)" in error_lines(capsys.readouterr().err)[-1]["message"]


class TestExperimentConfig:
    """Test config validation."""

    def test_valid(self):
        """Test the reference config validates and round-trips."""
        config = ExperimentConfig.from_dict(SWEEP_CONFIG)
        assert config.to_dict()["phantom"] == "hat"

    def test_unknown_key(self):
        """Test unknown keys are refused."""
        with pytest.raises(ValueError, match="Unknown config keys"):
            ExperimentConfig.from_dict({**SWEEP_CONFIG, "gamma": 1})

    def test_missing_key(self):
        """Test missing keys are listed."""
        payload = dict(SWEEP_CONFIG)
        del payload["seeds"]
        with pytest.raises(ValueError, match="seeds"):
            ExperimentConfig.from_dict(payload)

    def test_c_consistency(self):
        """Test c must equal r * sigma."""
        with pytest.raises(ValueError, match="r \\* sigma"):
            ExperimentConfig.from_dict({**SWEEP_CONFIG, "r": 10.0})

    def test_beta_range(self):
        """Test beta must lie below 1 - alpha."""
        with pytest.raises(ValueError, match="1 - alpha"):
            ExperimentConfig.from_dict({**SWEEP_CONFIG, "beta": 0.6})

    def test_mu_range(self):
        """Test mu must lie below nu + (d - 1) / 2 for the indicator."""
        with pytest.raises(ValueError, match="mu must lie"):
            ExperimentConfig.from_dict({**SWEEP_CONFIG, "phantom": "indicator", "mu": 0.6})

    def test_deltas_decreasing(self):
        """Test unordered deltas are refused."""
        with pytest.raises(ValueError, match="strictly decreasing"):
            ExperimentConfig.from_dict({**SWEEP_CONFIG, "deltas": [1e-3, 1e-2]})

    def test_min_angles(self):
        """Test fewer than 8 angles are refused."""
        with pytest.raises(ValueError, match="angles"):
            ExperimentConfig.from_dict({**SWEEP_CONFIG, "angles": 4})

    def test_invalid_json(self, tmp_path):
        """Test a malformed file is a ValueError."""
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ValueError, match="not valid JSON"):
            ExperimentConfig.from_json(path)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
