from pathlib import Path

import pytest

from elastic_imaging.adapters.storage.config_store import load_config, parse_config, save_config
from elastic_imaging.domain.enums import DataSource, ExteriorRecovery, PhantomKind, ShapeKind
from elastic_imaging.domain.errors import ConfigError
from tests.scenarios import SMALL_YAML


def test_minimal_config_fills_defaults():
    config = parse_config({"medium": {"lam": 1.0, "mu": 1.0}, "phantom": {"kind": "gaussian", "amplitude": 1.0}})
    assert config.phantom.kind == PhantomKind.GAUSSIAN
    assert config.domain.resolution == 11
    assert config.source == DataSource.SURROGATE
    assert config.exterior_recovery() == ExteriorRecovery.POINT_SOURCE
    assert config.tikhonov.alphas()[0] == pytest.approx(1e-1)
    assert config.reference_shape.kind == ShapeKind.ELLIPSOID
    assert (config.inclusion.c1, config.resonance.b, config.resonance.sign) == (20.0, 0.5, -1)


def test_auto_recovery_is_point_source_for_every_source():
    for source in ("surrogate", "full"):
        config = parse_config(dict(SMALL_YAML, source=source, inversion={"exterior_recovery": "auto"}))
        assert config.exterior_recovery() == ExteriorRecovery.POINT_SOURCE


def test_planted_recovery_only_when_requested():
    assert parse_config(SMALL_YAML).exterior_recovery() == ExteriorRecovery.PLANTED
    config = parse_config({"medium": {"lam": 1.0, "mu": 1.0}, "phantom": {"kind": "gaussian"}})
    assert config.inversion.exterior_recovery == ExteriorRecovery.AUTO
    assert config.exterior_recovery() != ExteriorRecovery.PLANTED


def test_medium_and_phantom_are_required():
    with pytest.raises(ConfigError) as exc:
        parse_config({"medium": {"lam": 1.0, "mu": 1.0}})
    assert exc.value.field == "phantom"


def test_negative_shear_modulus_names_the_section():
    with pytest.raises(ConfigError) as exc:
        parse_config({"medium": {"lam": 1.0, "mu": -1.0}, "phantom": {}})
    assert exc.value.field.startswith("medium")


def test_unknown_key_is_rejected():
    data = dict(SMALL_YAML, inclusion={"a": 0.05, "rho2": 3.0})
    with pytest.raises(ConfigError, match="unknown key 'rho2'") as exc:
        parse_config(data)
    assert exc.value.field == "inclusion.rho2"


def test_non_mapping_rejected():
    with pytest.raises(ConfigError):
        parse_config([1, 2, 3])


def test_yaml_syntax_error_reports_line(tmp_path: Path):
    p = tmp_path / "broken.yaml"
    p.write_text("medium:\n  lam: 1.0\n  mu: [1.0, 2.0\nphantom: {}\n", encoding="utf-8")
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert exc.value.line is not None
    assert exc.value.line >= 3


def test_missing_file(tmp_path: Path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.yaml")


def test_load_config_from_file(config_file: Path):
    config = load_config(config_file)
    assert config.sweep.n == 3
    assert config.domain.resolution == 9


def test_save_and_load_keep_the_hash(config, tmp_path: Path):
    p = tmp_path / "out" / "config.yaml"
    save_config(config, p)
    again = load_config(p)
    assert again.config_hash() == config.config_hash()
    assert again == config


def test_hash_ignores_output_and_threads(config):
    moved = config.model_copy(update={"threads": 4, "output": config.output.model_copy(update={"directory": "x"})})
    assert moved.config_hash() == config.config_hash()
    reseeded = config.model_copy(update={"noise": config.noise.model_copy(update={"seed": 9})})
    assert reseeded.config_hash() != config.config_hash()
