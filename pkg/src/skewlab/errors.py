"""Exception hierarchy shared by all skewlab modules."""


class SkewLabError(ValueError):
    """Base class for every error raised by skewlab."""


class InvalidGeometry(SkewLabError):
    pass


class InvalidParams(SkewLabError):
    pass


class InadmissibleSchedule(SkewLabError):
    pass


class OutOfDomain(SkewLabError):
    pass


class WrongKind(SkewLabError):
    pass


class UnsupportedGeometry(SkewLabError):
    pass


class QuadratureFailure(SkewLabError):
    pass


class GridTooCoarse(SkewLabError):
    pass


class SingularSystem(SkewLabError):
    pass


class UnboundedF(SkewLabError):
    pass


class ConfigError(SkewLabError):
    """Malformed configuration text (syntax or unknown keys)."""
