"""Cubic polynomial and cubic-spline kernel.

The central construction is ``integrate_twice``: a cubic spline is
parametrized by its second derivative (a continuous piecewise-linear
function) plus two integration constants.  Double integration is done in
closed form piece by piece, so the result is twice continuously
differentiable by construction, with no continuity constraints to solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError


@dataclass(frozen=True)
class Cubic:
    """One cubic polynomial on ``[a, b]``, stored in the local variable
    ``s = t - a`` to avoid cancellation for large ``t``."""

    a: float
    b: float
    c3: float
    c2: float
    c1: float
    c0: float

    def __post_init__(self):
        if not self.a < self.b:
            raise DomainError(f"empty interval [{self.a}, {self.b}]")
        if not np.all(np.isfinite([self.c3, self.c2, self.c1, self.c0])):
            raise NumericError("non-finite cubic coefficients")

    def __call__(self, t, order: int = 0):
        s = np.asarray(t, dtype=float) - self.a
        if order == 0:
            return ((self.c3 * s + self.c2) * s + self.c1) * s + self.c0
        if order == 1:
            return (3.0 * self.c3 * s + 2.0 * self.c2) * s + self.c1
        if order == 2:
            return 6.0 * self.c3 * s + 2.0 * self.c2
        raise DomainError(f"order must be 0, 1 or 2, got {order}")


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function given by knots and values."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape or k.size < 2:
            raise DomainError("knots/values must be 1-D arrays of equal length >= 2")
        if not np.all(np.diff(k) > 0):
            raise DomainError("knots must be strictly increasing")
        if not np.all(np.isfinite(k)) or not np.all(np.isfinite(v)):
            raise NumericError("non-finite knots or values")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=float), self.knots, self.values)


def integral_between(pl: PiecewiseLinear, a: float, b: float) -> float:
    """Exact integral of ``pl`` over ``[a, b]`` (trapezoid on each piece)."""
    k, v = pl.knots, pl.values
    if not (k[0] <= a <= b <= k[-1]):
        raise DomainError(f"integration bounds [{a}, {b}] outside domain [{k[0]}, {k[-1]}]")
    # clip the knot sequence to [a, b] and evaluate the end values
    inside = (k > a) & (k < b)
    ts = np.concatenate(([a], k[inside], [b]))
    vs = pl(ts)
    return float(np.sum(0.5 * (vs[1:] + vs[:-1]) * np.diff(ts)))


class CubicSpline:
    """A sequence of cubics over shared knots.

    Pieces are half-open ``[t_k, t_{k+1})`` with the final piece closed on
    the right, so evaluation at knots is unambiguous.
    """

    def __init__(self, pieces: list[Cubic]):
        if not pieces:
            raise DomainError("spline needs at least one piece")
        for p, q in zip(pieces, pieces[1:]):
            if p.b != q.a:
                raise DomainError("pieces must tile the domain contiguously")
        self.pieces = tuple(pieces)
        self.knots = np.array([p.a for p in pieces] + [pieces[-1].b])

    @property
    def a(self) -> float:
        return float(self.knots[0])

    @property
    def b(self) -> float:
        return float(self.knots[-1])

    def __call__(self, t, order: int = 0):
        ts = np.asarray(t, dtype=float)
        scalar = ts.ndim == 0
        ts = np.atleast_1d(ts)
        if np.any(ts < self.a) or np.any(ts > self.b):
            raise DomainError(f"evaluation outside domain [{self.a}, {self.b}]")
        idx = np.clip(np.searchsorted(self.knots, ts, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(ts)
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = self.pieces[k](ts[sel], order)
        return float(out[0]) if scalar else out


def integrate_twice(pl: PiecewiseLinear, c: float, d: float) -> CubicSpline:
    """Analytic double integral of ``pl`` with slope ``c`` and value ``d``
    at the first knot.

    The result satisfies ``out''(t) == pl(t)`` exactly on every piece, so it
    is C^2 across knots with no extra conditions.
    """
    knots, vals = pl.knots, pl.values
    pieces = []
    slope, value = float(c), float(d)
    for k in range(len(knots) - 1):
        h = knots[k + 1] - knots[k]
        v0, v1 = vals[k], vals[k + 1]
        m = (v1 - v0) / h
        cub = Cubic(float(knots[k]), float(knots[k + 1]), m / 6.0, v0 / 2.0, slope, value)
        pieces.append(cub)
        value = cub(knots[k + 1])
        slope = cub(knots[k + 1], order=1)
    return CubicSpline(pieces)
