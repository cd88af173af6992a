"""Parameter and geometry types, eps-schedules and regime classification.

A model is a killed diffusion on ``(l, r)`` with ``r = ell + eps``.  On
``(l, ell)`` it moves with unit variance; on the thin shell ``(ell, r)`` with
variance ``lambda``; at ``ell`` it enters the shell with probability
``alpha``.  ``ModelKind.LINE`` is the one-dimensional process,
``ModelKind.BESSEL2`` its radial (planar) counterpart.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InadmissibleSchedule, InvalidGeometry, InvalidParams

__all__ = [
    "ModelKind",
    "Geometry",
    "SkewParams",
    "ModelSpec",
    "validate",
    "Schedule",
    "RegimeVariant",
    "Regime",
    "classify_regime",
    "default_schedule",
    "format_decimal",
    "spec_to_config",
    "parse_config",
    "config_to_spec",
    "config_to_schedule",
]


class ModelKind(enum.Enum):
    LINE = "line"
    BESSEL2 = "bessel2"

    @classmethod
    def parse(cls, text: str) -> "ModelKind":
        key = text.strip().lower()
        aliases = {"line": cls.LINE, "bessel": cls.BESSEL2, "bessel2": cls.BESSEL2}
        try:
            return aliases[key]
        except KeyError:
            raise ConfigError(f"unknown model kind {text!r}") from None


@dataclass(frozen=True)
class Geometry:
    l: float
    ell: float
    eps: float

    @property
    def r(self) -> float:
        return self.ell + self.eps


@dataclass(frozen=True)
class SkewParams:
    alpha: float
    lam: float


@dataclass(frozen=True)
class ModelSpec:
    """A validated (kind, geometry, params) triple.  Build it with :func:`validate`."""

    kind: ModelKind
    geometry: Geometry
    params: SkewParams

    # shorthands used all over the numerical code
    @property
    def l(self) -> float:
        return self.geometry.l

    @property
    def ell(self) -> float:
        return self.geometry.ell

    @property
    def eps(self) -> float:
        return self.geometry.eps

    @property
    def r(self) -> float:
        return self.geometry.r

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def lam(self) -> float:
        return self.params.lam

    def with_params(self, alpha: float, lam: float, eps: float | None = None) -> "ModelSpec":
        g = self.geometry
        geom = Geometry(g.l, g.ell, g.eps if eps is None else eps)
        return validate(geom, SkewParams(alpha, lam), self.kind)


def validate(geometry: Geometry, params: SkewParams, kind: ModelKind) -> ModelSpec:
    """Check every invariant of the model and return the composite spec.

    Raises
    ------
    InvalidGeometry
        Ordering ``0 <= l < ell < r`` violated, non-finite values, or a
        Bessel model with ``l == 0`` (the origin is an entrance boundary).
    InvalidParams
        ``alpha`` outside ``(0, 1)`` or ``lambda <= 0``.
    """
    l, ell, eps = float(geometry.l), float(geometry.ell), float(geometry.eps)
    if not all(math.isfinite(v) for v in (l, ell, eps)):
        raise InvalidGeometry(f"non-finite geometry {geometry}")
    if l < 0:
        raise InvalidGeometry(f"l must be >= 0, got {l}")
    if not ell > l:
        raise InvalidGeometry(f"need l < ell, got l={l}, ell={ell}")
    if not eps > 0:
        raise InvalidGeometry(f"shell thickness eps must be > 0, got {eps}")
    if kind is ModelKind.BESSEL2 and l == 0:
        raise InvalidGeometry("Bessel model requires l > 0")
    alpha, lam = float(params.alpha), float(params.lam)
    if not (math.isfinite(alpha) and 0.0 < alpha < 1.0):
        raise InvalidParams(f"alpha must lie in (0, 1), got {alpha}")
    if not (math.isfinite(lam) and lam > 0.0):
        raise InvalidParams(f"lambda must be > 0, got {lam}")
    return ModelSpec(kind, Geometry(l, ell, eps), SkewParams(alpha, lam))


@dataclass(frozen=True)
class Schedule:
    """Power-law schedule ``alpha = a * eps**p`` and ``lambda = b * eps**q``."""

    a: float
    p: float
    b: float
    q: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise InvalidParams(f"schedule prefactors must be positive, got a={self.a}, b={self.b}")

    def alpha(self, eps: float) -> float:
        return self.a * eps**self.p

    def lam(self, eps: float) -> float:
        return self.b * eps**self.q

    def condition(self, eps: float) -> float:
        """The quantity ``alpha * eps / lambda`` that must vanish as eps -> 0."""
        return self.alpha(eps) * eps / self.lam(eps)

    @property
    def condition_exponent(self) -> float:
        return self.p + 1.0 - self.q

    @property
    def admissible(self) -> bool:
        return self.condition_exponent > 0

    def check_admissible(self) -> None:
        if not self.admissible:
            raise InadmissibleSchedule(
                "schedule violates lim_{eps->0} alpha*eps/lambda = 0: "
                f"alpha*eps/lambda = {self.a / self.b:g} * eps^{self.condition_exponent:g}"
            )

    def spec_at(self, eps: float, template: ModelSpec | Geometry, kind: ModelKind | None = None) -> ModelSpec:
        """Instantiate the model at shell thickness ``eps``.

        Raises :class:`InvalidParams` when ``alpha(eps)`` leaves ``(0, 1)``.
        """
        if isinstance(template, ModelSpec):
            geom, kind = template.geometry, template.kind
        else:
            geom = template
        if kind is None:
            raise TypeError("kind required when template is a Geometry")
        return validate(Geometry(geom.l, geom.ell, eps), SkewParams(self.alpha(eps), self.lam(eps)), kind)


class RegimeVariant(enum.Enum):
    NEUMANN = "neumann"
    ROBIN = "robin"
    DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class Regime:
    variant: RegimeVariant
    G: float | None = None

    def __post_init__(self):
        if self.variant is RegimeVariant.ROBIN:
            if self.G is None or not (0 < self.G < math.inf):
                raise InvalidParams(f"Robin regime needs a finite positive rate G, got {self.G}")
        elif self.G is not None:
            raise InvalidParams(f"{self.variant.value} regime carries no rate")

    @classmethod
    def neumann(cls) -> "Regime":
        return cls(RegimeVariant.NEUMANN)

    @classmethod
    def robin(cls, G: float) -> "Regime":
        return cls(RegimeVariant.ROBIN, float(G))

    @classmethod
    def dirichlet(cls) -> "Regime":
        return cls(RegimeVariant.DIRICHLET)

    @classmethod
    def from_rate(cls, G: float) -> "Regime":
        """0 -> Neumann, inf -> Dirichlet, anything in between -> Robin(G)."""
        if G == 0:
            return cls.neumann()
        if G == math.inf:
            return cls.dirichlet()
        return cls.robin(G)

    @property
    def rate(self) -> float:
        """Elastic killing rate at ``ell``: 0, G or infinity."""
        if self.variant is RegimeVariant.NEUMANN:
            return 0.0
        if self.variant is RegimeVariant.DIRICHLET:
            return math.inf
        return self.G

    def __str__(self) -> str:
        if self.variant is RegimeVariant.ROBIN:
            return f"robin(G={format_decimal(self.G)})"
        return self.variant.value


_EXPONENT_TOL = 1e-12


def classify_regime(schedule: Schedule) -> Regime:
    """Limit boundary condition at ``ell`` selected by the schedule.

    The answer depends on ``lim alpha/eps``: zero gives Neumann, a finite
    value ``G`` gives Robin with that rate, infinity gives Dirichlet.
    """
    schedule.check_admissible()
    if abs(schedule.p - 1.0) <= _EXPONENT_TOL:
        return Regime.robin(schedule.a)
    if schedule.p > 1.0:
        return Regime.neumann()
    return Regime.dirichlet()


def default_schedule(regime: Regime) -> Schedule:
    """A representative admissible schedule for each regime.

    Dirichlet uses ``alpha = eps**0.1``: ``alpha/eps`` then blows up fast
    enough for finite-eps values to sit close to the limit.
    """
    if regime.variant is RegimeVariant.NEUMANN:
        return Schedule(1.0, 2.0, 1.0, 1.0)
    if regime.variant is RegimeVariant.ROBIN:
        return Schedule(regime.G, 1.0, 1.0, 0.5)
    return Schedule(1.0, 0.1, 1.0, 0.0)


# --------------------------------------------------------------------------
# flat ``key = value`` configuration format

SPEC_KEYS = ("kind", "l", "ell", "eps", "alpha", "lambda")
SCHEDULE_KEYS = ("schedule.a", "schedule.p", "schedule.b", "schedule.q")


def format_decimal(value: float) -> str:
    """Shortest positional decimal that round-trips through ``float``."""
    return np.format_float_positional(float(value), unique=True, trim="-")


def spec_to_config(spec: ModelSpec | None = None, schedule: Schedule | None = None, **extra) -> str:
    lines = []
    if spec is not None:
        lines.append(f"kind = {spec.kind.value}")
        for key, val in (("l", spec.l), ("ell", spec.ell), ("eps", spec.eps),
                         ("alpha", spec.alpha), ("lambda", spec.lam)):
            lines.append(f"{key} = {format_decimal(val)}")
    if schedule is not None:
        for key in ("a", "p", "b", "q"):
            lines.append(f"schedule.{key} = {format_decimal(getattr(schedule, key))}")
    for key, val in extra.items():
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Returns the raw string values; numeric conversion happens in the
    ``config_to_*`` helpers so that unknown or malformed entries can be
    reported with their key.
    """
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _number(cfg: dict[str, str], key: str) -> float:
    try:
        return float(cfg[key])
    except KeyError:
        raise ConfigError(f"missing key {key!r}") from None
    except ValueError:
        raise ConfigError(f"key {key!r}: not a number: {cfg[key]!r}") from None


def has_schedule(cfg: dict[str, str]) -> bool:
    return any(k in cfg for k in SCHEDULE_KEYS)


def config_to_schedule(cfg: dict[str, str]) -> Schedule:
    a, p, b, q = (_number(cfg, k) for k in SCHEDULE_KEYS)
    return Schedule(a, p, b, q)


def config_to_spec(cfg: dict[str, str], schedule: Schedule | None = None) -> ModelSpec:
    """Build a validated spec.

    ``alpha`` and ``lambda`` may be omitted when a schedule is given; they are
    then evaluated at the configured ``eps``.
    """
    if "kind" not in cfg:
        raise ConfigError("missing key 'kind'")
    kind = ModelKind.parse(cfg["kind"])
    l, ell, eps = _number(cfg, "l"), _number(cfg, "ell"), _number(cfg, "eps")
    if schedule is not None and "alpha" not in cfg and "lambda" not in cfg:
        alpha, lam = schedule.alpha(eps), schedule.lam(eps)
    else:
        alpha, lam = _number(cfg, "alpha"), _number(cfg, "lambda")
    return validate(Geometry(l, ell, eps), SkewParams(alpha, lam), kind)
