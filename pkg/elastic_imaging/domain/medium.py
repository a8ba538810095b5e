from __future__ import annotations

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from elastic_imaging.domain.errors import InvalidMediumError
from elastic_imaging.domain.grid import VoxelGrid

_UNIT_TOL = 1e-12


def check_lame(lam: float, mu: float) -> None:
    if not mu > 0:
        raise InvalidMediumError(f"μ > 0 violated (mu={mu})")
    if not 3.0 * lam + 2.0 * mu > 0:
        raise InvalidMediumError(f"3λ + 2μ > 0 violated (lam={lam}, mu={mu})")


class OmegaDomain(BaseModel):
    """The ball Ω carrying the variable background density."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    center: np.ndarray = Field(default_factory=lambda: np.zeros(3))
    radius: float = Field(default=1.0, gt=0)

    @field_validator("center", mode="before")
    @classmethod
    def _center(cls, v):
        return np.asarray(v, dtype=float).reshape(3)

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.linalg.norm(pts - self.center[None, :], axis=1) < self.radius


class ElasticMedium(BaseModel):
    """
    Isotropic background: Lamé constants, exterior density rho_tilde and
    the density rho_field sampled on the cells of `grid` (covering Ω).
    Without a grid the medium is homogeneous.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    lam: float
    mu: float
    rho_tilde: float = Field(gt=0)

    grid: Optional[VoxelGrid] = None
    rho_field: Optional[np.ndarray] = None
    domain: Optional[OmegaDomain] = None

    @field_validator("rho_field", mode="before")
    @classmethod
    def _rho(cls, v):
        if v is None:
            return None
        return np.asarray(v, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def _check(self) -> "ElasticMedium":
        check_lame(self.lam, self.mu)
        if (self.grid is None) != (self.rho_field is None):
            raise ValueError("grid and rho_field must be given together")
        if self.rho_field is not None:
            if self.rho_field.shape[0] != self.grid.n_cells:
                raise ValueError("rho_field needs one sample per grid cell")
            if not np.all(self.rho_field > 0):
                raise InvalidMediumError("density must be strictly positive everywhere")
            if self.domain is not None:
                outside = ~self.domain.contains(self.grid.centers())
                if np.any(np.abs(self.rho_field[outside] - self.rho_tilde) > 0):
                    raise InvalidMediumError("density must equal rho_tilde outside Ω")
        return self

    @property
    def p_modulus(self) -> float:
        return self.lam + 2.0 * self.mu

    @property
    def gamma1(self) -> float:
        return 0.5 * (1.0 / self.mu + 1.0 / self.p_modulus)

    @property
    def gamma2(self) -> float:
        return 0.5 * (1.0 / self.mu - 1.0 / self.p_modulus)

    def contrast(self) -> np.ndarray:
        """rho_0 - rho_tilde per cell of the background grid."""
        if self.rho_field is None:
            return np.zeros(0)
        return self.rho_field - self.rho_tilde

    def is_homogeneous(self) -> bool:
        return self.rho_field is None or not np.any(self.contrast() != 0.0)

    def with_density(self, rho_field: np.ndarray) -> "ElasticMedium":
        return ElasticMedium(
            lam=self.lam, mu=self.mu, rho_tilde=self.rho_tilde,
            grid=self.grid, rho_field=rho_field, domain=self.domain,
        )

    def homogeneous(self) -> "ElasticMedium":
        return ElasticMedium(lam=self.lam, mu=self.mu, rho_tilde=self.rho_tilde)


class Wavenumbers(BaseModel):
    model_config = ConfigDict(frozen=True)

    kappa_p: float = Field(ge=0)
    kappa_s: float = Field(ge=0)
    c_p: float = Field(gt=0)
    c_s: float = Field(gt=0)


def _vec3(v) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(3)


class PlaneWave(BaseModel):
    """U^i(x) = beta1 theta e^{i kp theta.x} + beta2 theta_perp e^{i ks theta.x}"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    theta: np.ndarray
    theta_perp: np.ndarray
    beta1: complex = 1.0
    beta2: complex = 0.0
    omega: float = Field(gt=0)

    @field_validator("theta", "theta_perp", mode="before")
    @classmethod
    def _vec(cls, v):
        return _vec3(v)

    @field_validator("beta1", "beta2", mode="before")
    @classmethod
    def _complex(cls, v):
        if isinstance(v, (list, tuple)):
            return complex(v[0], v[1])
        return complex(v)

    @model_validator(mode="after")
    def _frame(self) -> "PlaneWave":
        if abs(np.linalg.norm(self.theta) - 1.0) > _UNIT_TOL:
            raise ValueError("|theta| must be 1")
        if abs(np.linalg.norm(self.theta_perp) - 1.0) > _UNIT_TOL:
            raise ValueError("|theta_perp| must be 1")
        if abs(float(self.theta @ self.theta_perp)) > _UNIT_TOL:
            raise ValueError("theta and theta_perp must be orthogonal")
        return self

    @classmethod
    def pressure(cls, theta, omega: float, beta: complex = 1.0) -> "PlaneWave":
        from elastic_imaging.domain.farfield import tangent_frames

        d = _vec3(theta)
        t1, _ = tangent_frames(d[None, :])
        return cls(theta=d, theta_perp=t1[0], beta1=beta, beta2=0.0, omega=omega)

    @classmethod
    def shear(cls, theta, polarization, omega: float, beta: complex = 1.0) -> "PlaneWave":
        return cls(theta=_vec3(theta), theta_perp=_vec3(polarization), beta1=0.0, beta2=beta, omega=omega)

    def reciprocity_weight(self, medium: ElasticMedium) -> np.ndarray:
        """(lam + 2 mu) beta1 theta + mu beta2 theta_perp"""
        return medium.p_modulus * self.beta1 * self.theta + medium.mu * self.beta2 * self.theta_perp

