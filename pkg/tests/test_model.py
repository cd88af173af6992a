import math

import pytest
from hypothesis import given, strategies as st

from skewlab.errors import ConfigError, InadmissibleSchedule, InvalidGeometry, InvalidParams
from skewlab.model import (Geometry, ModelKind, ModelSpec, Regime, RegimeVariant, Schedule, SkewParams,
                           classify_regime, config_to_schedule, config_to_spec, default_schedule,
                           parse_config, spec_to_config, validate)

from conftest import any_specs


def test_validate_accepts_bessel_annulus():
    spec = validate(Geometry(0.5, 1.0, 0.1), SkewParams(0.3, 0.5), ModelKind.BESSEL2)
    assert spec.kind is ModelKind.BESSEL2
    assert spec.r == pytest.approx(1.1)


def test_validate_rejects_bessel_with_l_zero():
    with pytest.raises(InvalidGeometry):
        validate(Geometry(0.0, 1.0, 0.1), SkewParams(0.3, 0.5), ModelKind.BESSEL2)


def test_validate_accepts_line_with_l_zero():
    spec = validate(Geometry(0.0, 1.0, 0.1), SkewParams(0.5, 1.0), ModelKind.LINE)
    assert spec.l == 0.0


@pytest.mark.parametrize("geom", [Geometry(1.0, 1.0, 0.1), Geometry(1.2, 1.0, 0.1), Geometry(0.0, 1.0, 0.0),
                                  Geometry(-0.1, 1.0, 0.1), Geometry(0.0, 1.0, math.nan)])
def test_validate_rejects_bad_geometry(geom):
    with pytest.raises(InvalidGeometry):
        validate(geom, SkewParams(0.5, 1.0), ModelKind.LINE)


@pytest.mark.parametrize("alpha, lam", [(0.0, 1.0), (1.0, 1.0), (-0.2, 1.0), (0.5, 0.0), (0.5, -1.0),
                                        (math.nan, 1.0), (0.5, math.inf)])
def test_validate_rejects_bad_params(alpha, lam):
    with pytest.raises(InvalidParams):
        validate(Geometry(0.0, 1.0, 0.1), SkewParams(alpha, lam), ModelKind.LINE)


@pytest.mark.parametrize("schedule, expected", [
    (Schedule(1, 2, 1, 1), Regime.neumann()),
    (Schedule(3, 1, 1, 0.5), Regime.robin(3.0)),
    (Schedule(1, 0.5, 1, 0), Regime.dirichlet()),
])
def test_classify_regime_examples(schedule, expected):
    assert classify_regime(schedule) == expected


def test_classify_regime_rejects_inadmissible():
    with pytest.raises(InadmissibleSchedule, match="alpha\\*eps/lambda = 0"):
        classify_regime(Schedule(1, 1, 1, 2))


@given(a=st.floats(0.01, 10), p=st.floats(0.0, 3.0), b=st.floats(0.01, 10),
       dq=st.floats(0.01, 2.0), c=st.floats(0.1, 10))
def test_classification_is_scale_free(a, p, b, dq, c):
    q = p + 1 - dq
    original = Schedule(a, p, b, q)
    # eps' = c eps  =>  alpha = a c^-p eps'^p, lambda = b c^-q eps'^q
    rescaled = Schedule(a * c**-p, p, b * c**-q, q)
    r0, r1 = classify_regime(original), classify_regime(rescaled)
    assert r0.variant is r1.variant
    if r0.variant is RegimeVariant.ROBIN:
        assert r1.G == pytest.approx(a / c)


@given(eps=st.floats(1e-6, 1.0))
def test_schedule_condition_matches_definition(eps):
    s = Schedule(2.0, 1.5, 0.5, 0.25)
    assert s.condition(eps) == pytest.approx(s.alpha(eps) * eps / s.lam(eps), rel=1e-12)


@pytest.mark.parametrize("regime", [Regime.neumann(), Regime.robin(1.0), Regime.robin(3.0), Regime.dirichlet()])
def test_default_schedules_classify_back(regime):
    assert classify_regime(default_schedule(regime)) == regime


def test_regime_rate_and_str():
    assert Regime.neumann().rate == 0.0
    assert Regime.robin(2.5).rate == 2.5
    assert math.isinf(Regime.dirichlet().rate)
    assert str(Regime.robin(1.0)) == "robin(G=1)"
    assert Regime.from_rate(0.0) == Regime.neumann()
    assert Regime.from_rate(math.inf) == Regime.dirichlet()


@given(spec=any_specs)
def test_config_round_trip_is_bit_exact(spec):
    back = config_to_spec(parse_config(spec_to_config(spec)))
    assert back == spec


@given(a=st.floats(0.01, 10), p=st.floats(0, 3), b=st.floats(0.01, 10), q=st.floats(-1, 3))
def test_schedule_round_trip(a, p, b, q):
    s = Schedule(a, p, b, q)
    assert config_to_schedule(parse_config(spec_to_config(schedule=s))) == s


def test_config_comments_and_schedule_defaults():
    cfg = parse_config("# header\nkind = bessel  # radial\nl = 0.5\nell = 1\neps = 0.04\n"
                       "schedule.a = 3\nschedule.p = 1\nschedule.b = 1\nschedule.q = 0.5\n")
    spec = config_to_spec(cfg, config_to_schedule(cfg))
    assert spec.alpha == pytest.approx(0.12)
    assert spec.lam == pytest.approx(0.2)


@pytest.mark.parametrize("text", ["kind line\n", "= 3\n", "l = 1\nl = 2\n"])
def test_config_syntax_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_config_missing_and_malformed_values():
    with pytest.raises(ConfigError):
        config_to_spec(parse_config("kind = line\nl = 0\nell = 1\n"))
    with pytest.raises(ConfigError):
        config_to_spec(parse_config("kind = line\nl = zero\nell = 1\neps = 1\nalpha=.5\nlambda=1\n"))
    with pytest.raises(ConfigError):
        config_to_spec(parse_config("kind = torus\nl = 0\nell = 1\neps = 1\nalpha=.5\nlambda=1\n"))


def test_with_params_keeps_geometry():
    spec = ModelSpec(ModelKind.LINE, Geometry(0.0, 1.0, 0.1), SkewParams(0.5, 1.0))
    other = spec.with_params(0.2, 3.0, eps=0.05)
    assert (other.l, other.ell, other.eps, other.alpha, other.lam) == (0.0, 1.0, 0.05, 0.2, 3.0)
