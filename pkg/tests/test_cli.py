import json
from pathlib import Path

import pytest
import yaml

from elastic_imaging.app.cli import EXIT_CONFIG, EXIT_EXISTS, EXIT_OK, THREADS_ENV, main, resolve_threads
from elastic_imaging.domain.errors import ConfigError
from tests.scenarios import SMALL_SHAPE_CELLS, SMALL_YAML


def _write(tmp_path: Path, data) -> Path:
    p = tmp_path / "scenario.yaml"
    p.write_text(yaml.safe_dump(data), encoding="utf-8")
    return p


def test_dry_run_writes_nothing(config_file: Path, tmp_path: Path, capsys):
    out = tmp_path / "run"
    assert main(["roundtrip", "--config", str(config_file), "--out", str(out), "--dry-run"]) == EXIT_OK
    assert not out.exists()
    printed = capsys.readouterr().out
    assert "5x5x5 nodes" in printed
    assert "measurements" in printed and "results" in printed


def test_bad_config_exit_code(tmp_path: Path, capsys):
    p = _write(tmp_path, dict(SMALL_YAML, medium={"lam": 1.0, "mu": 0.0}))
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "run")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path: Path):
    assert main(["simulate", "--config", str(tmp_path / "nope.yaml"), "--dry-run"]) == EXIT_CONFIG


def test_existing_output_needs_force(config_file: Path, tmp_path: Path):
    out = tmp_path / "run"
    args = ["spectrum", "--config", str(config_file), "--out", str(out)]
    assert main(args) == EXIT_OK
    assert main(args) == EXIT_EXISTS
    assert main(args + ["--force"]) == EXIT_OK


def test_spectrum_report(config_file: Path, tmp_path: Path):
    out = tmp_path / "run"
    assert main(["spectrum", "--config", str(config_file), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "spectrum" / "spectrum.json").read_text(encoding="utf-8"))
    assert report["cells"] == SMALL_SHAPE_CELLS
    res = report["resonance"]
    assert res["cluster"] == [res["n0"]]
    assert 0 < res["omega"] < res["omega_n0"]
    assert res["rho1"] == pytest.approx(8000.0)
    assert len(report["modes"]) == 10


def test_roundtrip_is_reproducible(config_file: Path, tmp_path: Path):
    runs = [tmp_path / "a", tmp_path / "b"]
    assert main(["roundtrip", "--config", str(config_file), "--out", str(runs[0])]) == EXIT_OK
    assert main(["roundtrip", "--config", str(config_file), "--out", str(runs[1]), "--threads", "2"]) == EXIT_OK
    for name in ("lattice.csv", "summary.json"):
        a = (runs[0] / "results" / name).read_bytes()
        b = (runs[1] / "results" / name).read_bytes()
        assert a == b
    assert (runs[0] / "measurements" / "sweep.npz").exists()
    assert (runs[0] / "measurements" / "config.yaml").exists()
    meta = json.loads((runs[0] / "results" / "metadata.json").read_text(encoding="utf-8"))
    assert "inversion" in meta["timings_s"]


def test_invert_reads_stored_measurements(config_file: Path, tmp_path: Path):
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(config_file), "--out", str(out)]) == EXIT_OK
    assert main(["invert", "--config", str(config_file), "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "results" / "summary.json").read_text(encoding="utf-8"))
    assert summary["provenance"]["source"] == "surrogate"
    assert summary["metrics"]["linf_vs_model"] <= 1e-6


# -----------------------------
# Thread count precedence
# -----------------------------
def test_threads_flag_wins(config):
    assert resolve_threads(3, config, environ={THREADS_ENV: "5"}) == 3


def test_threads_env_beats_config(config):
    cfg = config.model_copy(update={"threads": 2})
    assert resolve_threads(None, cfg, environ={THREADS_ENV: "5"}) == 5
    assert resolve_threads(None, cfg, environ={}) == 2
    assert resolve_threads(None, config, environ={}) == 1


@pytest.mark.parametrize("value", ["abc", "0", "-2"])
def test_threads_env_must_be_positive_integer(config, value):
    with pytest.raises(ConfigError):
        resolve_threads(None, config, environ={THREADS_ENV: value})
