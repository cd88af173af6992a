"""Finite-difference solver for the stationary transmission problems.

Solves ``A v = -f`` on ``(l, r)`` with ``v(l) = v(r) = 0``, continuity at
``ell`` and the flux condition ``(1 - alpha) v'(ell-) = alpha v'(ell+)``, and
the limit problems on ``(l, ell)`` with a Neumann, Robin or Dirichlet
condition at ``ell``.  Central differences in the interior (with the
``v'/x`` term for the radial model) give a tridiagonal M-matrix system.

Two interface rows are available:

``"balance"`` (default)
    conservative flux balance over the dual cell ``[ell - h/2, ell + h'/2]``
    including its share of the source; exact for the line with ``f = 1``
    and second order for the radial model.
``"one_sided"``
    the bare first-order flux equality
    ``(1 - alpha)(v_ell - v_-)/h = alpha (v_+ - v_ell)/h'``.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.linalg import solve_banded

from .errors import InvalidGeometry, QuadratureFailure, SingularSystem, UnboundedF
from .model import Geometry, ModelKind, ModelSpec, Regime, RegimeVariant

__all__ = [
    "BvpProblem",
    "GridFunction",
    "solve_bvp",
    "solve_limit_bvp",
    "ShellTrace",
    "shell_trace_limit",
    "MIN_SIDE_NODES",
]

MIN_SIDE_NODES = 16


@dataclass(frozen=True)
class GridFunction:
    x: np.ndarray
    v: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.x, self.v)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "v"])
        for xi, vi in zip(self.x, self.v):
            w.writerow([repr(float(xi)), repr(float(vi))])
        return buf.getvalue()


@dataclass(frozen=True)
class BvpProblem:
    spec: ModelSpec
    f: Callable[[float], float]
    h: float
    interface: str = "balance"

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"grid step must be positive, got {self.h}")
        if self.interface not in ("balance", "one_sided"):
            raise ValueError(f"unknown interface row {self.interface!r}")


def _eval_f(f, x: np.ndarray) -> np.ndarray:
    fv = np.array([float(f(xi)) for xi in x])
    if not np.all(np.isfinite(fv)):
        raise UnboundedF("source f is not finite on the grid")
    return fv


def _side(lo: float, hi: float, h: float) -> np.ndarray:
    n = max(MIN_SIDE_NODES, math.ceil((hi - lo) / h - 1e-9))
    return np.linspace(lo, hi, n + 1)


def _interior_rows(x, h, var, bessel, lower, diag, upper, rows):
    """Fill ``-(var/2)(v'' + v'/x)`` rows (central differences) for ``rows``."""
    c = var / (2 * h * h)
    lower[rows] = -c
    upper[rows] = -c
    diag[rows] = 2 * c
    if bessel:
        d = var / (4 * h * x[rows])
        lower[rows] += d
        upper[rows] -= d


def _solve(lower, diag, upper, rhs):
    n = len(diag)
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    try:
        v = solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    if not np.all(np.isfinite(v)):
        raise SingularSystem("non-finite solution")
    return v


def solve_bvp(problem: BvpProblem) -> GridFunction:
    """Grid solution of the full transmission problem on ``[l, r]``."""
    spec, h = problem.spec, problem.h
    a, lam, ell = spec.alpha, spec.lam, spec.ell
    bessel = spec.kind is ModelKind.BESSEL2
    left = _side(spec.l, ell, h)
    right = _side(ell, spec.r, h)
    x = np.concatenate([left, right[1:]])
    n, k = len(x), len(left) - 1
    h1, h2 = left[1] - left[0], right[1] - right[0]
    fv = _eval_f(problem.f, x)

    lower, diag, upper = np.zeros(n), np.ones(n), np.zeros(n)
    rhs = fv.copy()
    _interior_rows(x, h1, 1.0, bessel, lower, diag, upper, np.arange(1, k))
    _interior_rows(x, h2, lam, bessel, lower, diag, upper, np.arange(k + 1, n - 1))

    # interface row: (1-a) w- (v_ell - v_-)/h1 - a w+ (v_+ - v_ell)/h2 = source
    if bessel:
        wl, wr = ell - h1 / 2, ell + h2 / 2
    else:
        wl = wr = 1.0
    cl, cr = (1 - a) * wl / h1, a * wr / h2
    lower[k], diag[k], upper[k] = -cl, cl + cr, -cr
    if problem.interface == "balance":
        if bessel:
            mass = (1 - a) * (ell**2 - (ell - h1 / 2) ** 2) + a / lam * ((ell + h2 / 2) ** 2 - ell**2)
        else:
            mass = (1 - a) * h1 + a / lam * h2
        rhs[k] = fv[k] * mass
    else:
        rhs[k] = 0.0

    rhs[0] = rhs[-1] = 0.0
    return GridFunction(x, _solve(lower, diag, upper, rhs))


def solve_limit_bvp(kind: ModelKind, geometry: Geometry, regime: Regime,
                    f: Callable[[float], float], h: float) -> GridFunction:
    """Grid solution of ``A v = -f`` on ``[l, ell]`` with the regime's condition at ``ell``.

    Neumann and Robin use a ghost node ``v_{N+1} = v_{N-1} - 2 h G v_N``.
    """
    if not h > 0:
        raise ValueError(f"grid step must be positive, got {h}")
    if kind is ModelKind.BESSEL2 and not geometry.l > 0:
        raise InvalidGeometry("Bessel model requires l > 0")
    bessel = kind is ModelKind.BESSEL2
    x = _side(geometry.l, geometry.ell, h)
    n = len(x)
    hs = x[1] - x[0]
    fv = _eval_f(f, x)
    lower, diag, upper = np.zeros(n), np.ones(n), np.zeros(n)
    rhs = fv.copy()
    _interior_rows(x, hs, 1.0, bessel, lower, diag, upper, np.arange(1, n - 1))
    rhs[0] = 0.0
    if regime.variant is RegimeVariant.DIRICHLET:
        rhs[-1] = 0.0
    else:
        G = regime.rate
        c = 1.0 / (2 * hs * hs)
        lower[-1] = -2 * c
        diag[-1] = 2 * c + 2 * c * hs * G
        if bessel:
            diag[-1] += G / (2 * x[-1])
    return GridFunction(x, _solve(lower, diag, upper, rhs))


@dataclass(frozen=True)
class ShellTrace:
    eps: tuple[float, ...]
    values: tuple[float, ...]
    boundary: float


def shell_trace_limit(a: Callable[[float], float], u: Callable[[float], float], geometry: Geometry,
                      eps_list, tol: float = 1e-12) -> ShellTrace:
    """Averages ``(1/eps) int_{Sigma_eps} a |u|^2`` over thin planar shells.

    Radial ``a`` and ``u`` are assumed, so the shell integral is
    ``int_ell^{ell+eps} a(x) u(x)^2 2 pi x dx``.  The limit value is the
    boundary integral ``2 pi ell a(ell) u(ell)^2``.
    """
    ell = geometry.ell
    values = []
    for eps in eps_list:
        if not eps > 0:
            raise ValueError(f"shell thickness must be positive, got {eps}")
        integrand = lambda s: a(s) * u(s) ** 2 * 2 * math.pi * s  # noqa: E731
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(integrand, ell, ell + eps, epsabs=0.0, epsrel=tol, limit=200)
            except (integrate.IntegrationWarning, OverflowError) as exc:
                raise QuadratureFailure(f"shell integral for eps={eps} failed: {exc}") from None
        if not math.isfinite(val) or err > max(tol * abs(val), 1e-300):
            raise QuadratureFailure(f"shell integral for eps={eps} missed tolerance (err={err})")
        values.append(val / eps)
    boundary = 2 * math.pi * ell * a(ell) * u(ell) ** 2
    return ShellTrace(tuple(float(e) for e in eps_list), tuple(values), boundary)
