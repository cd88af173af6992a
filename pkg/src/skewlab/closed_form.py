"""Exact exit quantities and thin-shell limits.

Two independent routes to the mean exit time are provided:

* ``mean_exit_line`` / ``mean_exit_bessel`` evaluate the explicit two-branch
  formulas (constants ``I1, I2`` for the line, ``Pi_1..Pi_4, Pi*`` for the
  annulus);
* ``green_solution`` integrates the Green-function representation
  ``v = 2 (1 - phi) Sigma_minus + 2 phi Sigma_plus`` numerically, for any
  bounded source ``f``.

The line formula is written for an interface at 1.  The line generator is
translation invariant, so a model with interface ``ell`` is evaluated in the
shifted coordinate ``t = x - ell + 1``.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InvalidGeometry, OutOfDomain, QuadratureFailure, UnsupportedGeometry, WrongKind
from .model import Geometry, ModelKind, ModelSpec, Regime, RegimeVariant
from .scale_speed import ScaleSpeed, Side

__all__ = [
    "ExitQuantities",
    "exit_quantities",
    "exit_prob",
    "mean_exit_line",
    "mean_exit_bessel",
    "mean_exit",
    "green_solution",
    "cell_exit_time",
    "reflected_cell_time",
    "limit_coefficient",
    "limit_solution",
    "bc_residual",
    "DEFAULT_QUAD_TOL",
]

DEFAULT_QUAD_TOL = 1e-10


@dataclass(frozen=True)
class ExitQuantities:
    """Per-spec constants of the explicit mean-exit formulas.

    Line models fill ``I1`` and ``I2`` (in the shifted coordinate where the
    interface sits at 1).  Bessel models fill ``Pi1 .. Pi4``, ``Pi_star``,
    all evaluated at ``r``.
    """

    spec: ModelSpec
    I1: float = math.nan
    I2: float = math.nan
    Pi1: float = math.nan
    Pi2: float = math.nan
    Pi3: float = math.nan
    Pi4: float = math.nan
    Pi_star: float = math.nan

    @property
    def coefficient(self) -> float:
        """Coefficient of the left branch: ``2 a I1/I2`` or ``2 Pi*/((1-a) Pi3)``."""
        a = self.spec.alpha
        if self.spec.kind is ModelKind.LINE:
            return 2 * a * self.I1 / self.I2
        return 2 * self.Pi_star / ((1 - a) * self.Pi3)


@functools.lru_cache(maxsize=256)
def exit_quantities(spec: ModelSpec) -> ExitQuantities:
    a, lam = spec.alpha, spec.lam
    if spec.kind is ModelKind.LINE:
        L = spec.l - spec.ell + 1.0
        eps = spec.eps
        I1 = (1 - a) / a * eps + eps**2 / (2 * lam) + (1 - L**2) / 2
        I2 = (1 - a) * eps - a * (L - 1)
        return ExitQuantities(spec, I1=I1, I2=I2)

    l, ell, r = spec.l, spec.ell, spec.r
    ln_r_ell = math.log1p(spec.eps / ell)
    ln_ell_l = math.log(ell / l)
    Pi1 = 0.5 * (ell**2 + a / (1 - a) * (r**2 - ell**2) / lam) * math.log(ell)
    Pi2 = 0.5 * ((1 - a) / a * ell**2 + (r**2 - ell**2) / lam) * ln_r_ell
    Pi3 = ln_ell_l / (1 - a) + ln_r_ell / a
    Pi4 = (ell**2 / 2 * math.log(ell) - l**2 / 2 * math.log(l) - (ell**2 - l**2) / 4
           + a / (1 - a) * (r**2 - ell**2) / (2 * lam) * math.log(ell)
           + r**2 / (2 * lam) * ln_r_ell - (r**2 - ell**2) / (4 * lam))
    Pi_star = ((1 - a) / (2 * a) - 1 / (2 * lam)) * ell**2 * ln_r_ell \
        + (ell**2 - l**2) / 4 + (r**2 - ell**2) / (4 * lam)
    return ExitQuantities(spec, Pi1=Pi1, Pi2=Pi2, Pi3=Pi3, Pi4=Pi4, Pi_star=Pi_star)


def _closed_domain(spec: ModelSpec, x):
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < spec.l) or np.any(arr > spec.r):
        bad = arr[(arr < spec.l) | (arr > spec.r) | ~np.isfinite(arr)] if arr.ndim else arr
        raise OutOfDomain(f"x={bad} outside [l, r] = [{spec.l}, {spec.r}]")
    return arr


def _out(arr, value):
    return float(value) if np.ndim(arr) == 0 else value


def exit_prob(spec: ModelSpec, x):
    """Probability of leaving ``(l, r)`` through ``r``: ``S(l, x] / S(l, r]``."""
    arr = _closed_domain(spec, x)
    a, l, ell = spec.alpha, spec.l, spec.ell
    if spec.kind is ModelKind.LINE:
        left = (arr - l) / (1 - a)
        right = (ell - l) / (1 - a) + (arr - ell) / a
    else:
        left = np.log(arr / l) / (1 - a)
        right = math.log(ell / l) / (1 - a) + np.log1p((arr - ell) / ell) / a
    total = (ell - l) / (1 - a) + spec.eps / a if spec.kind is ModelKind.LINE \
        else math.log(ell / l) / (1 - a) + math.log1p(spec.eps / ell) / a
    phi = np.clip(np.where(arr <= ell, left, right) / total, 0.0, 1.0)
    phi = np.where(arr == spec.r, 1.0, np.where(arr == l, 0.0, phi))
    return _out(arr, phi)


def mean_exit_line(spec: ModelSpec, x):
    """Mean exit time from ``(l, r)`` for the line model."""
    if spec.kind is not ModelKind.LINE:
        raise WrongKind("mean_exit_line needs a LINE model")
    arr = _closed_domain(spec, x)
    q = exit_quantities(spec)
    a, lam = spec.alpha, spec.lam
    t = arr - spec.ell + 1.0
    L = spec.l - spec.ell + 1.0
    ratio = q.I1 / q.I2
    left = 2 * (ratio - t / a) * (a * t - a * L) + t**2 + L**2 - 2 * L * t
    u = t - 1.0
    right = (2 * (ratio - 1 / a - u / (lam * (1 - a))) * ((1 - a) * u - a * (L - 1))
             + 1 + L**2 + 2 * a / (1 - a) * u / lam - 2 * L
             - a / (1 - a) * 2 * L / lam * u + u**2 / lam)
    v = np.where(t <= 1.0, left, right)
    # exact zeros at the killing boundaries
    v = np.where((arr == spec.l) | (arr == spec.r), 0.0, v)
    return _out(arr, v)


def mean_exit_bessel(spec: ModelSpec, x):
    """Mean exit time from the annulus ``l < |x| < r`` for the radial model."""
    if spec.kind is not ModelKind.BESSEL2:
        raise WrongKind("mean_exit_bessel needs a BESSEL2 model")
    arr = _closed_domain(spec, x)
    q = exit_quantities(spec)
    a, lam, l, ell = spec.alpha, spec.lam, spec.l, spec.ell
    c = 2 * q.Pi_star / ((1 - a) * q.Pi3)
    left = c * np.log(arr / l) - (arr**2 - l**2) / 2
    right = (c * math.log(ell / l) - (ell**2 - l**2) / 2
             + (2 * q.Pi_star / (a * q.Pi3) + ell**2 / lam - (1 - a) / a * ell**2) * np.log(arr / ell)
             - (arr**2 - ell**2) / (2 * lam))
    v = np.where(arr <= ell, left, right)
    v = np.where((arr == l) | (arr == spec.r), 0.0, v)
    return _out(arr, v)


def mean_exit(spec: ModelSpec, x):
    if spec.kind is ModelKind.LINE:
        return mean_exit_line(spec, x)
    return mean_exit_bessel(spec, x)


# --------------------------------------------------------------------------
# Green-function route

def _quad(fun, lo: float, hi: float, tol: float) -> float:
    if hi <= lo:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(fun, lo, hi, epsabs=tol, epsrel=0.0, limit=200)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(f"quadrature on [{lo}, {hi}] failed: {exc}") from None
    if not math.isfinite(val) or err > tol:
        raise QuadratureFailure(f"quadrature on [{lo}, {hi}] missed tolerance {tol} (err={err})")
    return val


def green_solution(spec: ModelSpec, f, x: float, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """Solve ``A v = -f`` with zero data at ``l`` and ``r``, evaluated at ``x``.

    Uses ``v = 2 (1 - phi) Sigma_minus + 2 phi Sigma_plus`` with
    ``Sigma_minus(x) = int_l^x S(l, eta] f m d eta`` and
    ``Sigma_plus(x) = int_x^r S(eta, r] f m d eta``, each integral split at
    ``ell`` and computed to absolute tolerance ``quad_tol``.
    """
    x = float(_closed_domain(spec, x))
    ss = ScaleSpeed(spec)
    l, ell, r = spec.l, spec.ell, spec.r

    def pieces(lo, hi):
        out = []
        if lo < min(hi, ell):
            out.append((lo, min(hi, ell), Side.LEFT))
        if max(lo, ell) < hi:
            out.append((max(lo, ell), hi, Side.RIGHT))
        return out

    def minus_integrand(side):
        return lambda eta: ss.scale_increment(l, eta) * f(eta) * ss.speed_density(eta, side)

    def plus_integrand(side):
        return lambda eta: ss.scale_increment(eta, r) * f(eta) * ss.speed_density(eta, side)

    sig_minus = sum(_quad(minus_integrand(s), lo, hi, quad_tol) for lo, hi, s in pieces(l, x))
    sig_plus = sum(_quad(plus_integrand(s), lo, hi, quad_tol) for lo, hi, s in pieces(x, r))
    phi = exit_prob(spec, x)
    return 2 * (1 - phi) * sig_minus + 2 * phi * sig_plus


# --------------------------------------------------------------------------
# small-cell exit times (holding times of the embedded chain)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _gauss(fun, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return half * float(np.dot(_GL_WEIGHTS, fun(mid + half * _GL_NODES)))


def _scale_from(ss: ScaleSpeed, base: float, eta: np.ndarray, side: Side) -> np.ndarray:
    """Vectorised ``|S(eta) - S(base)|`` for ``eta`` on one side of ``ell``."""
    a = ss.alpha
    k = (1 - a) if side is Side.LEFT else a
    if ss.kind is ModelKind.BESSEL2:
        return np.abs(np.log1p((eta - base) / base)) / k
    return np.abs(eta - base) / k


def cell_exit_time(spec: ModelSpec, a: float, b: float, x: float) -> float:
    """Mean exit time from a small cell ``(a, b)`` inside ``[l, r]`` started at ``x``.

    ``ell`` may lie inside the cell.  The Green-function integrals are
    computed piecewise with 16-point Gauss-Legendre, which is exact to
    rounding for the polynomial (line) and ``x log x`` (Bessel) integrands
    on short cells, and free of the cancellation that the explicit formulas
    suffer when ``b - a`` is tiny.
    """
    if not (spec.l <= a < x < b <= spec.r):
        raise OutOfDomain(f"need l <= a < x < b <= r, got a={a}, x={x}, b={b}")
    ss = ScaleSpeed(spec)
    ell = spec.ell
    s_ax = ss.scale_increment(a, x)
    s_xb = ss.scale_increment(x, b)

    def lower(lo, hi):
        # int_lo^hi (S(eta) - S(a)) m(eta) d eta
        total = 0.0
        for p_lo, p_hi, side in ((lo, min(hi, ell), Side.LEFT), (max(lo, ell), hi, Side.RIGHT)):
            if p_hi > p_lo:
                offset = ss.scale_increment(a, p_lo)
                total += _gauss(lambda e: (offset + _scale_from(ss, p_lo, e, side))
                                * ss.speed_density(e, side), p_lo, p_hi)
        return total

    def upper(lo, hi):
        # int_lo^hi (S(b) - S(eta)) m(eta) d eta
        total = 0.0
        for p_lo, p_hi, side in ((lo, min(hi, ell), Side.LEFT), (max(lo, ell), hi, Side.RIGHT)):
            if p_hi > p_lo:
                offset = ss.scale_increment(p_hi, b)
                total += _gauss(lambda e: (offset + _scale_from(ss, p_hi, e, side))
                                * ss.speed_density(e, side), p_lo, p_hi)
        return total

    return 2 * (s_xb * lower(a, x) + s_ax * upper(x, b)) / (s_ax + s_xb)


def reflected_cell_time(spec: ModelSpec, a: float, b: float) -> float:
    """Mean time to reach ``a`` from ``b`` when ``b`` is a reflecting barrier.

    Only used on the left side of ``ell`` (``b <= ell``).
    """
    if not (spec.l <= a < b <= spec.ell):
        raise OutOfDomain(f"need l <= a < b <= ell, got a={a}, b={b}")
    ss = ScaleSpeed(spec)
    return 2 * _gauss(lambda e: _scale_from(ss, a, e, Side.LEFT) * ss.speed_density(e, Side.LEFT), a, b)


# --------------------------------------------------------------------------
# thin-shell limits

def _check_limit_geometry(kind: ModelKind, geometry: Geometry) -> None:
    if not isinstance(kind, ModelKind):
        raise WrongKind(f"unknown model kind {kind!r}")
    if kind is ModelKind.LINE:
        if geometry.l != 0.0 or geometry.ell != 1.0:
            raise UnsupportedGeometry("line limit coefficients are only available for l=0, ell=1")
    elif not geometry.l > 0:
        raise InvalidGeometry("Bessel limit requires l > 0")


def limit_coefficient(kind: ModelKind, geometry: Geometry, regime: Regime) -> float:
    """Coefficient ``C`` of the eps -> 0 limit of the mean exit time.

    Line (``l=0, ell=1``): ``v = C x - x**2``.
    Bessel: ``v = C ln(x/l) - (x**2 - l**2)/2``.
    """
    _check_limit_geometry(kind, geometry)
    v = regime.variant
    if kind is ModelKind.LINE:
        if v is RegimeVariant.NEUMANN:
            return 2.0
        if v is RegimeVariant.DIRICHLET:
            return 1.0
        G = regime.G
        return (2 + G) / (1 + G)
    l, ell = geometry.l, geometry.ell
    if v is RegimeVariant.NEUMANN:
        return ell**2
    if v is RegimeVariant.DIRICHLET:
        return (ell**2 - l**2) / (2 * math.log(ell / l))
    G = regime.G
    return (ell / G + (ell**2 - l**2) / 2) / (1 / (ell * G) + math.log(ell / l))


def _limit_profile(kind: ModelKind, geometry: Geometry, C: float, x):
    """Limit profile and its derivative at ``x`` for a given coefficient."""
    l = geometry.l
    if kind is ModelKind.LINE:
        y = np.asarray(x, dtype=float) - l
        return C * y - y**2, C - 2 * y
    x = np.asarray(x, dtype=float)
    return C * np.log(x / l) - (x**2 - l**2) / 2, C / x - x


def limit_solution(kind: ModelKind, geometry: Geometry, regime: Regime, x):
    C = limit_coefficient(kind, geometry, regime)
    arr = np.asarray(x, dtype=float)
    if np.any(arr < geometry.l) or np.any(arr > geometry.ell):
        raise OutOfDomain(f"x={x} outside [l, ell] = [{geometry.l}, {geometry.ell}]")
    val, _ = _limit_profile(kind, geometry, C, arr)
    return _out(arr, val)


def bc_residual(kind: ModelKind, geometry: Geometry, regime: Regime, C: float) -> float:
    """Residual of the regime's boundary identity at ``ell`` for the profile built from ``C``.

    Robin: ``v'(ell) + G v(ell)``; Neumann: ``v'(ell)``; Dirichlet: ``v(ell)``.
    """
    val, der = _limit_profile(kind, geometry, C, geometry.ell)
    val, der = float(val), float(der)
    if regime.variant is RegimeVariant.NEUMANN:
        return der
    if regime.variant is RegimeVariant.DIRICHLET:
        return val
    return der + regime.G * val
