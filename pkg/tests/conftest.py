from pathlib import Path

import pytest
import yaml

from elastic_imaging.domain.config import ScenarioConfig
from elastic_imaging.domain.medium import ElasticMedium
from elastic_imaging.services.spectrum.newtonian import newtonian_eigensystem
from elastic_imaging.domain.enums import ShapeKind
from elastic_imaging.services.spectrum.shapes import reference_shape
from tests.scenarios import SMALL_AXES, SMALL_YAML, small_config


@pytest.fixture
def homogeneous() -> ElasticMedium:
    return ElasticMedium(lam=1.0, mu=1.0, rho_tilde=1.0)


@pytest.fixture
def config() -> ScenarioConfig:
    return small_config()


@pytest.fixture(scope="session")
def eig_small():
    return newtonian_eigensystem(
        reference_shape(ShapeKind.ELLIPSOID, 5, SMALL_AXES), ElasticMedium(lam=1.0, mu=1.0, rho_tilde=1.0))


@pytest.fixture
def config_file(tmp_path: Path) -> Path:
    p = tmp_path / "scenario.yaml"
    p.write_text(yaml.safe_dump(SMALL_YAML), encoding="utf-8")
    return p
