import numpy as np
import pytest
from hypothesis import strategies as st

from skewlab.model import Geometry, ModelKind, SkewParams, validate

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Record one pass/fail line per acceptance check; echoed in the terminal summary."""

    def record(criterion: int, label: str, passed: bool, detail: str = "") -> bool:
        line = f"criterion {criterion} [{label}] {'PASS' if passed else 'FAIL'}"
        if detail:
            line += f"  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# --------------------------------------------------------------------------
# random valid specs

alphas = st.floats(0.02, 0.98)
lambdas = st.floats(0.05, 20.0)


@st.composite
def line_specs(draw):
    l = draw(st.floats(0.0, 1.0))
    ell = l + draw(st.floats(0.2, 2.0))
    eps = draw(st.floats(0.01, 1.0))
    return validate(Geometry(l, ell, eps), SkewParams(draw(alphas), draw(lambdas)), ModelKind.LINE)


@st.composite
def bessel_specs(draw):
    l = draw(st.floats(0.1, 1.5))
    ell = l * draw(st.floats(1.2, 3.0))
    eps = draw(st.floats(0.01, 1.0))
    return validate(Geometry(l, ell, eps), SkewParams(draw(alphas), draw(lambdas)), ModelKind.BESSEL2)


any_specs = st.one_of(line_specs(), bessel_specs())


def random_spec(rng: np.random.Generator, kind: ModelKind):
    """Randomised spec for the oracle-triangle sweeps (numpy RNG, fixed seed by caller)."""
    alpha = rng.uniform(0.05, 0.95)
    lam = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
    eps = rng.uniform(0.02, 0.5)
    if kind is ModelKind.LINE:
        l = rng.uniform(0.0, 0.5)
        ell = l + rng.uniform(0.5, 1.5)
    else:
        l = rng.uniform(0.2, 1.0)
        ell = l * rng.uniform(1.5, 3.0)
    return validate(Geometry(l, ell, eps), SkewParams(alpha, lam), kind)
