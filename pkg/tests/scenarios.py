from elastic_imaging.domain.config import (
    DomainConfig,
    InversionConfig,
    MediumConfig,
    PhantomConfig,
    ReferenceShapeConfig,
    ScenarioConfig,
    SphereConfig,
    SweepConfig,
)
from elastic_imaging.domain.enums import ExteriorRecovery, PhantomKind, ShapeKind

SMALL_AXES = (1.0, 0.7, 0.45)
# ellipsoid at resolution 5: 21 cells, simple resonance
SMALL_SHAPE_CELLS = 21
CENTRE_NODE = 62


def small_config(**overrides) -> ScenarioConfig:
    """Desk-sized scenario: Ω at resolution 11, a 5x5x5 lattice, 72 sphere directions."""
    data = dict(
        medium=MediumConfig(),
        phantom=PhantomConfig(kind=PhantomKind.GAUSSIAN, amplitude=1.0, width=0.18),
        domain=DomainConfig(resolution=11),
        reference_shape=ReferenceShapeConfig(kind=ShapeKind.ELLIPSOID, resolution=5, axes=SMALL_AXES),
        sweep=SweepConfig(n=5),
        sphere=SphereConfig(n_theta=6),
    )
    data.update(overrides)
    return ScenarioConfig(**data)


def planted_config(**overrides) -> ScenarioConfig:
    """small_config with Step 2 replaced by the planted exterior differences."""
    overrides.setdefault("inversion", InversionConfig(exterior_recovery=ExteriorRecovery.PLANTED))
    return small_config(**overrides)


SMALL_YAML = {
    "medium": {"lam": 1.0, "mu": 1.0, "rho_tilde": 1.0},
    "phantom": {"kind": "gaussian", "amplitude": 1.0, "width": 0.18},
    "domain": {"resolution": 11},
    "reference_shape": {"kind": "ellipsoid", "resolution": 5, "axes": list(SMALL_AXES)},
    "sweep": {"n": 5},
    "sphere": {"n_theta": 6},
    "inversion": {"exterior_recovery": "planted"},
}
