"""Piecewise scale and speed functions of the skew diffusions.

For both kinds the generator is ``A = 1/2 d/dM d/dS``.  Left of ``ell`` the
conductance is ``(1 - alpha)`` (times ``x`` for Bessel) and the variance 1;
right of it the conductance is ``alpha`` (times ``x``) and the variance
``lambda``.  The additive constants of ``S`` and ``M`` are fixed so that on
``(0, ell]`` they read ``x/(1-alpha)``, ``(1-alpha) x`` (line) and
``ln(x)/(1-alpha)``, ``(1-alpha) x**2 / 2`` (Bessel).
"""
from __future__ import annotations

import csv
import enum
import io
import math

import numpy as np

from .errors import OutOfDomain
from .model import ModelKind, ModelSpec

__all__ = ["Side", "ScaleSpeed"]


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


def _log_ratio(b: float, a: float) -> float:
    """``ln(b/a)`` without cancellation when ``b`` is close to ``a``."""
    return math.log1p((b - a) / a)


class ScaleSpeed:
    """Scale density/function and speed density/measure for one model.

    Every evaluator accepts a scalar or an array.  Densities are undefined at
    the interface itself unless ``side`` selects a one-sided value.
    """

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.kind = spec.kind
        self.l, self.ell, self.r = spec.l, spec.ell, spec.r
        self.alpha, self.lam = spec.alpha, spec.lam
        self._bessel = spec.kind is ModelKind.BESSEL2

    # -- domain helpers ---------------------------------------------------
    def _closed(self, x):
        arr = np.asarray(x, dtype=float)
        if np.any(~np.isfinite(arr)) or np.any(arr < self.l) or np.any(arr > self.r):
            raise OutOfDomain(f"x={x} outside [l, r] = [{self.l}, {self.r}]")
        return arr

    def _open(self, x, side: Side | None):
        arr = np.asarray(x, dtype=float)
        if np.any(~np.isfinite(arr)) or np.any(arr <= self.l) or np.any(arr >= self.r):
            raise OutOfDomain(f"x={x} outside (l, r) = ({self.l}, {self.r})")
        at_ell = arr == self.ell
        if side is None and np.any(at_ell):
            raise OutOfDomain("density at the interface ell needs an explicit side")
        if side is Side.LEFT:
            left = arr <= self.ell
        elif side is Side.RIGHT:
            left = arr < self.ell
        else:
            left = arr < self.ell
        return arr, left

    @staticmethod
    def _out(arr, value):
        return float(value) if np.ndim(arr) == 0 else value

    # -- coefficients -----------------------------------------------------
    def conductance(self, x, side: Side | None = None):
        """Divergence-form weight ``a(x)``; equals ``1/s(x)``."""
        arr, left = self._open(x, side)
        base = arr if self._bessel else np.ones_like(arr)
        return self._out(arr, np.where(left, (1 - self.alpha) * base, self.alpha * base))

    def variance(self, x, side: Side | None = None):
        arr, left = self._open(x, side)
        return self._out(arr, np.where(left, 1.0, self.lam))

    # -- scale ------------------------------------------------------------
    def scale_density(self, x, side: Side | None = None):
        arr, left = self._open(x, side)
        base = 1.0 / arr if self._bessel else np.ones_like(arr)
        return self._out(arr, np.where(left, base / (1 - self.alpha), base / self.alpha))

    def scale_function(self, x):
        arr = self._closed(x)
        a, ell = self.alpha, self.ell
        with np.errstate(divide="ignore"):
            if self._bessel:
                left = np.log(arr) / (1 - a)
                right = math.log(ell) / (1 - a) + np.log(arr / ell) / a
            else:
                left = arr / (1 - a)
                right = ell / (1 - a) + (arr - ell) / a
        return self._out(arr, np.where(arr <= ell, left, right))

    def scale_increment(self, x1: float, x2: float) -> float:
        """``S(x2) - S(x1)`` computed piecewise, accurate for close points."""
        self._closed([x1, x2])
        if x2 < x1:
            return -self.scale_increment(x2, x1)
        a, ell = self.alpha, self.ell
        lo_left, hi_left = x1, min(x2, ell)
        lo_right, hi_right = max(x1, ell), x2
        total = 0.0
        if hi_left > lo_left:
            total += (_log_ratio(hi_left, lo_left) if self._bessel else hi_left - lo_left) / (1 - a)
        if hi_right > lo_right:
            total += (_log_ratio(hi_right, lo_right) if self._bessel else hi_right - lo_right) / a
        return total

    # -- speed ------------------------------------------------------------
    def speed_density(self, x, side: Side | None = None):
        arr, left = self._open(x, side)
        base = arr if self._bessel else np.ones_like(arr)
        return self._out(arr, np.where(left, (1 - self.alpha) * base, self.alpha / self.lam * base))

    def speed_measure(self, x):
        arr = self._closed(x)
        a, lam, ell = self.alpha, self.lam, self.ell
        if self._bessel:
            left = (1 - a) / 2 * arr**2
            right = (1 - a) / 2 * ell**2 + a / (2 * lam) * (arr**2 - ell**2)
        else:
            left = (1 - a) * arr
            right = (1 - a) * ell + a / lam * (arr - ell)
        return self._out(arr, np.where(arr <= ell, left, right))

    # -- debugging dump ---------------------------------------------------
    def table_csv(self, n: int = 101) -> str:
        """Tabulate ``(x, S(x), M(x))`` on ``n`` equispaced points of ``[l, r]``."""
        xs = np.linspace(self.l, self.r, n)
        if self._bessel:
            xs[0] = self.l  # l > 0 here, S finite
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "S", "M"])
        for x, s, m in zip(xs, self.scale_function(xs), self.speed_measure(xs)):
            w.writerow([repr(float(x)), repr(float(s)), repr(float(m))])
        return buf.getvalue()
