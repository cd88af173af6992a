import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skewlab.closed_form import limit_solution, mean_exit
from skewlab.errors import InvalidGeometry, QuadratureFailure, UnboundedF
from skewlab.fd_oracle import BvpProblem, solve_bvp, solve_limit_bvp, shell_trace_limit
from skewlab.model import Geometry, ModelKind, Regime, SkewParams, validate

from conftest import any_specs

LINE, BESSEL = ModelKind.LINE, ModelKind.BESSEL2
ONE = lambda x: 1.0  # noqa: E731


def spec(kind, l, ell, eps, alpha, lam):
    return validate(Geometry(l, ell, eps), SkewParams(alpha, lam), kind)


def sup_error(s, h, interface="balance"):
    grid = solve_bvp(BvpProblem(s, ONE, h, interface))
    return float(np.max(np.abs(grid.v - mean_exit(s, grid.x))))


def test_symmetric_line_example():
    s = spec(LINE, 0.0, 1.0, 0.5, 0.5, 1.0)
    grid = solve_bvp(BvpProblem(s, ONE, 1e-3))
    assert np.max(np.abs(grid.v - grid.x * (1.5 - grid.x))) <= 1e-6


def test_bessel_example_converges():
    s = spec(BESSEL, 0.5, 1.0, 0.05, 0.3, 0.4)
    errs = [sup_error(s, h) for h in (4e-3, 2e-3, 1e-3)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.0)


def test_one_sided_interface_is_first_order():
    s = spec(BESSEL, 0.5, 1.0, 0.05, 0.3, 0.4)
    errs = [sup_error(s, h, "one_sided") for h in (2e-3, 1e-3, 5e-4)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 0.9)
    # the flux-balance row is markedly more accurate at the same h
    assert sup_error(s, 1e-3) < errs[-1] / 10


def test_zero_source_gives_zero():
    s = spec(BESSEL, 0.5, 1.0, 0.05, 0.3, 0.4)
    grid = solve_bvp(BvpProblem(s, lambda x: 0.0, 1e-2))
    assert np.all(grid.v == 0.0)


def test_min_nodes_per_side():
    s = spec(LINE, 0.0, 1.0, 1e-4, 0.3, 0.4)
    grid = solve_bvp(BvpProblem(s, ONE, 1e-2))
    k = int(np.searchsorted(grid.x, 1.0))
    assert grid.x[k] == 1.0
    assert len(grid.x) - 1 - k >= 16 and k >= 16


def test_bad_inputs():
    s = spec(LINE, 0.0, 1.0, 0.5, 0.5, 1.0)
    with pytest.raises(ValueError):
        BvpProblem(s, ONE, 0.0)
    with pytest.raises(ValueError):
        BvpProblem(s, ONE, 1e-2, "ghost")
    with pytest.raises(UnboundedF):
        solve_bvp(BvpProblem(s, lambda x: math.nan, 1e-2))


@settings(max_examples=25, deadline=None)
@given(s=any_specs)
def test_discrete_maximum_principle(s):
    h = (s.ell - s.l) / 64
    grid = solve_bvp(BvpProblem(s, lambda x: 1.0 + x, h))
    assert np.all(grid.v[1:-1] > 0)


@settings(max_examples=25, deadline=None)
@given(s=any_specs)
def test_converges_to_closed_form(s):
    h = (s.ell - s.l) / 200
    errs = [sup_error(s, h), sup_error(s, h / 2), sup_error(s, h / 4)]
    scale = float(np.max(mean_exit(s, np.linspace(s.l, s.r, 41))))
    if errs[0] <= 1e-11 * scale:  # exact case (line)
        assert max(errs) <= 1e-9 * scale
        return
    assert errs[2] < errs[1] < errs[0]
    assert math.log2(errs[0] / errs[2]) / 2 >= 1.0


def test_grid_function_csv_and_interp():
    s = spec(LINE, 0.0, 1.0, 0.5, 0.5, 1.0)
    grid = solve_bvp(BvpProblem(s, ONE, 0.05))
    lines = grid.to_csv().strip().splitlines()
    assert lines[0] == "x,v" and len(lines) == len(grid.x) + 1
    assert grid(0.75) == pytest.approx(0.5625, abs=1e-3)


# -- limit problems ----------------------------------------------------------

def test_limit_line_neumann_example():
    g = Geometry(0.0, 1.0, 0.1)
    grid = solve_limit_bvp(LINE, g, Regime.neumann(), ONE, 1e-3)
    assert np.max(np.abs(grid.v - (2 * grid.x - grid.x**2))) <= 1e-6


def test_limit_bessel_dirichlet_example():
    g = Geometry(0.5, 1.0, 0.1)
    grid = solve_limit_bvp(BESSEL, g, Regime.dirichlet(), ONE, 1e-3)
    C = 0.75 / (2 * math.log(2))
    exact = C * np.log(grid.x / 0.5) - (grid.x**2 - 0.25) / 2
    assert np.max(np.abs(grid.v - exact)) <= 1e-5


@pytest.mark.parametrize("regime", [Regime.neumann(), Regime.robin(0.1), Regime.robin(1.0), Regime.robin(10.0),
                                    Regime.dirichlet()], ids=str)
@pytest.mark.parametrize("kind, geom", [(LINE, Geometry(0.0, 1.0, 0.1)), (BESSEL, Geometry(0.5, 1.0, 0.1))])
def test_limit_bvp_matches_limit_solution(kind, geom, regime):
    grid = solve_limit_bvp(kind, geom, regime, ONE, 1e-3)
    assert np.max(np.abs(grid.v - limit_solution(kind, geom, regime, grid.x))) <= 1e-5


def test_robin_tends_to_neumann():
    g = Geometry(0.5, 1.0, 0.1)
    neumann = solve_limit_bvp(BESSEL, g, Regime.neumann(), ONE, 1e-3).v
    gaps = [np.max(np.abs(solve_limit_bvp(BESSEL, g, Regime.robin(G), ONE, 1e-3).v - neumann))
            for G in (1e-1, 1e-2, 1e-3)]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-3


def test_limit_bvp_bessel_needs_positive_l():
    with pytest.raises(InvalidGeometry):
        solve_limit_bvp(BESSEL, Geometry(0.0, 1.0, 0.1), Regime.neumann(), ONE, 1e-2)


# -- shell trace -------------------------------------------------------------

def test_shell_trace_constant():
    eps = [0.1, 0.01, 1e-3]
    tr = shell_trace_limit(ONE, ONE, Geometry(0.0, 1.0, 0.1), eps)
    assert tr.boundary == pytest.approx(2 * math.pi)
    for e, val in zip(eps, tr.values):
        assert val == pytest.approx(math.pi * ((1 + e) ** 2 - 1) / e, rel=1e-12)


def test_shell_trace_vanishing_u():
    u = lambda x: 0.0 if x < 2.0 else 1.0  # noqa: E731
    tr = shell_trace_limit(ONE, u, Geometry(0.0, 1.0, 0.1), [0.5, 0.1])
    assert tr.values == (0.0, 0.0) and tr.boundary == 0.0


def test_shell_trace_linear_u():
    tr = shell_trace_limit(ONE, lambda x: x, Geometry(0.0, 1.0, 0.1), [1e-3])
    assert abs(tr.values[0] - 2 * math.pi) <= 1e-2


@given(eps=st.floats(1e-5, 0.5), c=st.floats(0.1, 5.0))
def test_shell_trace_first_order(eps, c):
    tr = shell_trace_limit(lambda x: c, lambda x: 1.0 + x, Geometry(0.0, 1.0, 0.1), [eps])
    assert abs(tr.values[0] - tr.boundary) <= 10 * eps * tr.boundary


def test_shell_trace_rejects_bad_eps():
    with pytest.raises(ValueError):
        shell_trace_limit(ONE, ONE, Geometry(0.0, 1.0, 0.1), [0.0])


def test_shell_trace_quadrature_failure():
    with pytest.raises(QuadratureFailure):
        shell_trace_limit(ONE, lambda x: abs(x - 1.05) ** -0.5 if x != 1.05 else 1e6,
                          Geometry(0.0, 1.0, 0.1), [0.1])
