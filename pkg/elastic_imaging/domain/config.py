from __future__ import annotations

import hashlib
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from elastic_imaging.domain.enums import DataSource, ExteriorRecovery, PhantomKind, ShapeKind, SphereRule
from elastic_imaging.domain.medium import check_lame

Vec3 = Tuple[float, float, float]
ComplexLike = Union[float, Tuple[float, float]]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class MediumConfig(_Section):
    lam: float = 1.0
    mu: float = 1.0
    rho_tilde: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _lame(self) -> "MediumConfig":
        check_lame(self.lam, self.mu)
        return self


class PhantomConfig(_Section):
    kind: PhantomKind = PhantomKind.CONSTANT
    amplitude: float = 0.0
    center: Vec3 = (0.0, 0.0, 0.0)
    width: float = Field(default=0.18, gt=0)
    # layered: smooth step across the plane normal.x = offset, windowed radially
    normal: Vec3 = (0.0, 0.0, 1.0)
    offset: float = 0.0
    taper: float = Field(default=0.15, gt=0)
    window_inner: float = Field(default=0.45, gt=0)
    window_outer: float = Field(default=0.8, gt=0)

    @model_validator(mode="after")
    def _window(self) -> "PhantomConfig":
        if self.window_inner >= self.window_outer:
            raise ValueError("window_inner must be < window_outer")
        return self


class DomainConfig(_Section):
    center: Vec3 = (0.0, 0.0, 0.0)
    radius: float = Field(default=1.0, gt=0)
    resolution: int = Field(default=11, ge=3)


class ReferenceShapeConfig(_Section):
    kind: ShapeKind = ShapeKind.ELLIPSOID
    resolution: int = Field(default=6, ge=2)
    axes: Vec3 = (1.0, 0.7, 0.45)

    @field_validator("axes")
    @classmethod
    def _axes(cls, v):
        if min(v) <= 0:
            raise ValueError("ellipsoid axes must be positive")
        return v


class InclusionConfig(_Section):
    a: float = Field(default=0.05, gt=0, lt=1)
    c1: float = Field(default=20.0, gt=0)


class ResonanceConfig(_Section):
    mode: Optional[int] = Field(default=None, ge=0)
    h: float = Field(default=0.5, gt=0, lt=1)
    b: float = Field(default=0.5, ge=0)
    sign: Literal[1, -1] = -1


def _unit(v: Vec3, name: str) -> Vec3:
    arr = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(arr))
    if n == 0.0:
        raise ValueError(f"{name} must be nonzero")
    return tuple(float(x) for x in arr / n)


class IncidenceConfig(_Section):
    # p-wave along the long axis of the default ellipsoid, the axis of its resonant moment
    theta: Vec3 = (1.0, 0.0, 0.0)
    theta_perp: Vec3 = (0.0, 1.0, 0.0)
    beta1: ComplexLike = 1.0
    beta2: ComplexLike = 0.0

    @model_validator(mode="after")
    def _frame(self) -> "IncidenceConfig":
        t = np.asarray(_unit(self.theta, "theta"))
        tp = np.asarray(_unit(self.theta_perp, "theta_perp"))
        if abs(float(t @ tp)) > 1e-9:
            raise ValueError("theta and theta_perp must be orthogonal")
        return self

    def unit_theta(self) -> Vec3:
        return _unit(self.theta, "theta")

    def unit_theta_perp(self) -> Vec3:
        # remove round-off so the frame passes the 1e-12 check
        t = np.asarray(self.unit_theta())
        tp = np.asarray(_unit(self.theta_perp, "theta_perp"))
        tp = tp - (tp @ t) * t
        return _unit(tuple(tp), "theta_perp")

    @staticmethod
    def as_complex(v: ComplexLike) -> complex:
        if isinstance(v, (tuple, list)):
            return complex(v[0], v[1])
        return complex(v)


class SweepConfig(_Section):
    n: int = Field(default=5, ge=3)
    stride: int = Field(default=1, ge=1)
    center: Vec3 = (0.0, 0.0, 0.0)


class SphereConfig(_Section):
    rule: SphereRule = SphereRule.GAUSS
    n_theta: int = Field(default=12, ge=2)
    n_points: int = Field(default=256, ge=8)


class SurfaceConfig(_Section):
    radius_factor: float = Field(default=1.5, gt=1.0)
    anchors: List[Vec3] = Field(default_factory=lambda: [(0.0, 0.0, 3.0)])

    @field_validator("anchors")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("at least one anchor point is required")
        return v


class NoiseConfig(_Section):
    delta: float = Field(default=0.0, ge=0)
    delta1: float = Field(default=0.0, ge=0)
    seed: int = Field(default=0, ge=0)


class TikhonovConfig(_Section):
    alpha_max: float = Field(default=1e-1, gt=0)
    alpha_min: float = Field(default=1e-9, gt=0)
    noise_floor: float = Field(default=1e-4, ge=0)
    collision_ceiling: float = Field(default=0.2, gt=0)

    @model_validator(mode="after")
    def _range(self) -> "TikhonovConfig":
        if self.alpha_min > self.alpha_max:
            raise ValueError("alpha_min must be <= alpha_max")
        return self

    def alphas(self) -> List[float]:
        """Geometric sweep, one value per decade, largest first."""
        hi = int(round(np.log10(self.alpha_max)))
        lo = int(round(np.log10(self.alpha_min)))
        return [10.0 ** e for e in range(hi, lo - 1, -1)]


class InversionConfig(_Section):
    tau_factor: float = Field(default=1e-3, gt=0)
    tau_f_factor: float = Field(default=1e-3, gt=0)
    step1_noise_floor: float = Field(default=0.0, ge=0)
    exterior_recovery: ExteriorRecovery = ExteriorRecovery.AUTO


class OutputConfig(_Section):
    directory: str = "runs/default"
    eigen_cache: Optional[str] = None


class ScenarioConfig(_Section):
    medium: MediumConfig
    phantom: PhantomConfig
    domain: DomainConfig = Field(default_factory=DomainConfig)
    reference_shape: ReferenceShapeConfig = Field(default_factory=ReferenceShapeConfig)
    inclusion: InclusionConfig = Field(default_factory=InclusionConfig)
    resonance: ResonanceConfig = Field(default_factory=ResonanceConfig)
    incidence: IncidenceConfig = Field(default_factory=IncidenceConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    sphere: SphereConfig = Field(default_factory=SphereConfig)
    surface: SurfaceConfig = Field(default_factory=SurfaceConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    tikhonov: TikhonovConfig = Field(default_factory=TikhonovConfig)
    inversion: InversionConfig = Field(default_factory=InversionConfig)
    source: DataSource = DataSource.SURROGATE
    output: OutputConfig = Field(default_factory=OutputConfig)
    threads: Optional[int] = Field(default=None, ge=1)

    def config_hash(self) -> str:
        payload = self.model_dump_json(exclude={"output", "threads"})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def exterior_recovery(self) -> ExteriorRecovery:
        mode = self.inversion.exterior_recovery
        if mode == ExteriorRecovery.AUTO:
            return ExteriorRecovery.POINT_SOURCE
        return mode
