from enum import Enum


class DataSource(str, Enum):
    FULL = "full"
    SURROGATE = "surrogate"


class PhantomKind(str, Enum):
    CONSTANT = "constant"
    GAUSSIAN = "gaussian"
    LAYERED = "layered"


class ShapeKind(str, Enum):
    BALL = "ball"
    ELLIPSOID = "ellipsoid"


class SphereRule(str, Enum):
    GAUSS = "gauss"          # Gauss-Legendre in cos(theta) x uniform phi
    FIBONACCI = "fibonacci"  # equal weights


class ExteriorRecovery(str, Enum):
    AUTO = "auto"
    POINT_SOURCE = "point_source"
    PLANTED = "planted"


class MaskReason(str, Enum):
    NONE = "none"
    MEASUREMENT_FAILED = "measurement_failed"
    INSUFFICIENT_CONTRAST = "insufficient_contrast"
    SMALL_MOMENT = "small_moment"
    STENCIL = "stencil"
    SMALL_DENOMINATOR = "small_denominator"
    NUMERICAL = "numerical"
