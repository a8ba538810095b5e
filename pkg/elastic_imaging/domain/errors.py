from __future__ import annotations

from typing import Optional


class ElasticImagingError(Exception):
    """Base class for every error raised by elastic_imaging."""


class InvalidMediumError(ElasticImagingError, ValueError):
    """Lamé constants or densities violate a physical constraint."""


class SingularityError(ElasticImagingError, ValueError):
    """A fundamental tensor was evaluated at coincident points."""


class NonSymmetricMatrixError(ElasticImagingError, ValueError):
    pass


class NoRadiatingModeError(ElasticImagingError):
    """Every eigenfunction has (numerically) vanishing volume mean."""


class ResonanceCollisionError(ElasticImagingError):
    """
    A resolvent was requested at (or next to) an eigenvalue of the
    volume operator. `eigenvalue` is the offending one.
    """

    def __init__(self, message: str, eigenvalue: Optional[float] = None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class ZeroDetuningError(ElasticImagingError, ZeroDivisionError):
    """The incident frequency sits exactly on the resonance."""


class SolverError(ElasticImagingError):
    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class SourceInsideDomainError(ElasticImagingError, ValueError):
    pass


class DirectionMismatchError(ElasticImagingError, ValueError):
    """Far-field data were not sampled on the directions a kernel needs."""


class InsufficientContrastError(ElasticImagingError):
    """Before/after far-field difference is below the noise floor."""


class IndeterminateSignError(ElasticImagingError):
    """No lattice node carries a moment above the guard threshold."""


class PhantomError(ElasticImagingError, ValueError):
    pass


class ConfigError(ElasticImagingError):
    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        super().__init__(message)
        self.line = line
        self.field = field


class CacheMismatchError(ElasticImagingError):
    """A cached artifact was produced with different assembly parameters."""


class OutputExistsError(ElasticImagingError):
    pass


class StageError(ElasticImagingError):
    """A fatal error inside one stage of a scenario run."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class DegenerateResonanceError(ElasticImagingError):
    """
    The resonant eigenvalue is degenerate, so E_B has rank > 1 and the
    lattice data no longer factor as (V^t . m) G m for a fixed moment m.
    """

    def __init__(self, message: str, cluster: Optional[list] = None):
        super().__init__(message)
        self.cluster = cluster or []
