"""Analytic tails for the unbounded motifs.

Each tail anchors exactly to the last transition point: value, first and
second derivative there are matched in closed form, the shape signs hold on
the open tail, and the motif-specific long-term property (asymptotic
doubling time / incrementing factor, or horizontal asymptote and half-time)
is realized by construction.

Only three parametrizations exist; the remaining motifs are exact mirrors
(negate the trajectory).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .cubic import CubicSpline, PiecewiseLinear, integrate_twice
from .errors import ConvergenceError, DomainError
from .semantics import ASYM, ASYMPTOTE, DIVERGENT, GAMMA, T_HALF, Motif

LOG2 = math.log(2.0)
LOG3 = math.log(3.0)
LOG4 = math.log(4.0)


@dataclass(frozen=True)
class _ExpForm:
    """theta1*exp(theta2*s) + theta3*s^2 + theta4*s + theta5, s = t - t_end.

    Increasing and convex for s > 0 because every theta except theta5 is
    non-negative; the doubling gap converges to log(2)/theta2.
    """

    t_end: float
    th1: float
    th2: float
    th3: float
    th4: float
    th5: float

    def __call__(self, t, order: int = 0):
        s = np.asarray(t, dtype=float) - self.t_end
        if self.th1 == 0.0:
            e = np.zeros_like(s)  # avoid 0 * inf once exp(th2*s) overflows
        else:
            with np.errstate(over="ignore"):
                e = np.exp(self.th2 * s)
        if order == 0:
            return self.th1 * e + self.th3 * s * s + self.th4 * s + self.th5
        if order == 1:
            return self.th1 * self.th2 * e + 2.0 * self.th3 * s + self.th4
        if order == 2:
            return self.th1 * self.th2**2 * e + 2.0 * self.th3
        raise DomainError(f"order must be 0, 1 or 2, got {order}")


@dataclass(frozen=True)
class _LogForm:
    """theta1*log(theta2*s^2 + theta3*s + 1) + theta4, s = t - t_end.

    Increasing, concave (strictly for s > 0), divergent; the increment
    x(2t) - x(t) converges to theta1*log(4).
    """

    t_end: float
    th1: float
    th2: float
    th3: float
    th4: float

    def __call__(self, t, order: int = 0):
        s = np.asarray(t, dtype=float) - self.t_end
        q = self.th2 * s * s + self.th3 * s + 1.0
        dq = 2.0 * self.th2 * s + self.th3
        if order == 0:
            return self.th1 * np.log(q) + self.th4
        if order == 1:
            return self.th1 * dq / q
        if order == 2:
            return self.th1 * (2.0 * self.th2 * q - dq * dq) / (q * q)
        raise DomainError(f"order must be 0, 1 or 2, got {order}")


@dataclass(frozen=True)
class _SigForm:
    """theta1 / (1 + exp(g(s))) + theta2 with a concave warp spline g.

    g rises from 0 with prescribed initial slope, bends over a two-piece
    cubic segment and continues linearly, so the trajectory decays from
    x(t_end) = theta1/2 + theta2 to the asymptote theta2, crossing the
    midpoint where g = log(3).
    """

    t_end: float
    th1: float
    th2: float
    g_spline: CubicSpline
    g2_end: float   # g at the end of the spline segment
    g2_slope: float  # slope of the linear continuation

    def _g(self, s: np.ndarray, order: int) -> np.ndarray:
        s = np.atleast_1d(s)
        out = np.empty_like(s)
        cut = self.g_spline.b
        inside = s <= cut
        if np.any(inside):
            out[inside] = self.g_spline(s[inside] + self.g_spline.a, order)
        if np.any(~inside):
            tail_s = s[~inside]
            if order == 0:
                out[~inside] = self.g2_end + self.g2_slope * (tail_s - cut)
            elif order == 1:
                out[~inside] = self.g2_slope
            else:
                out[~inside] = 0.0
        return out

    def __call__(self, t, order: int = 0):
        s = np.asarray(t, dtype=float) - self.t_end
        g = self._g(s, 0)
        sg, sng = expit(g), expit(-g)
        if order == 0:
            return self.th1 * sng + self.th2
        dh = -self.th1 * sg * sng
        dg = self._g(s, 1)
        if order == 1:
            return dh * dg
        ddh = self.th1 * sg * sng * np.tanh(g / 2.0)
        return ddh * dg * dg + dh * self._g(s, 2)


@dataclass(frozen=True)
class Tail:
    """Unbounded part of a trajectory on ``[t_end, inf)``."""

    motif: Motif
    inner: object
    flip: bool
    props: dict

    @property
    def t_end(self) -> float:
        return self.inner.t_end

    def __call__(self, t, order: int = 0):
        ts = np.asarray(t, dtype=float)
        scalar = ts.ndim == 0
        if np.any(ts < self.t_end - 1e-12):
            raise DomainError("tail evaluated before its anchor point")
        val = np.atleast_1d(self.inner(np.atleast_1d(ts), order))
        if self.flip:
            val = -val
        return float(val[0]) if scalar else val


def _build_exp(t_end: float, x_end: float, d1: float, d2: float, gamma: float) -> _ExpForm:
    th2 = LOG2 / gamma
    th1 = max(0.0, min(d1 / (2.0 * th2), d2 / (2.0 * th2**2), 1.0))
    th3 = (d2 - th1 * th2**2) / 2.0
    th4 = d1 - th1 * th2
    return _ExpForm(t_end, th1, th2, th3, th4, x_end - th1)


def _build_log(t_end: float, x_end: float, d1: float, gamma: float) -> _LogForm:
    th1 = gamma / LOG4
    th3 = d1 / th1
    return _LogForm(t_end, th1, th3 * th3 / 2.0, th3, x_end)


def _build_sig(t_end: float, x_end: float, d1: float, h: float, t_half: float) -> _SigForm:
    th1 = 2.0 * (x_end - h)
    a = -2.0 * d1 / (x_end - h)  # initial slope of the warp, > 0
    span = t_half - t_end
    cap = 1.5 * LOG3 / a
    if span <= cap:
        t2 = span
        v1 = 4.0 * (LOG3 - a * span) / span**2
    else:
        t2 = cap
        v1 = 4.0 * (LOG3 - a * span) / (2.0 * t2 * span - t2 * t2)
    pl = PiecewiseLinear(np.array([0.0, t2 / 2.0, t2]), np.array([0.0, v1, 0.0]))
    g = integrate_twice(pl, a, 0.0)
    return _SigForm(t_end, th1, h, g, float(g(t2)), float(g(t2, order=1)))


def predict_tail(
    motif: Motif,
    tail_props: dict,
    t_end: float,
    x_end: float,
    d1_end: float,
    d2_end: float,
) -> Tail:
    """Tail matching ``(x_end, d1_end, d2_end)`` at ``t_end`` exactly and
    realizing the given motif-specific properties.

    For exponential-like motifs a vanishing first derivative is accepted
    (that is what a minimum/maximum transition into the tail produces); the
    remaining motifs need a strictly signed slope and a structurally zero
    second derivative.
    """
    vals = [t_end, x_end, d1_end, d2_end, *tail_props.values()]
    if not np.all(np.isfinite(vals)):
        raise DomainError("non-finite tail inputs")

    if motif.kind == DIVERGENT:
        gamma = tail_props.get(GAMMA)
        if gamma is None or gamma <= 0:
            raise DomainError("gamma_star must be > 0")
        if motif.mon == motif.curv:  # exponential-like: ++u or --u
            d1, d2 = d1_end * motif.mon, d2_end * motif.mon
            if d1 < 0 or d2 < 0 or (d1 == 0 and d2 == 0):
                raise DomainError(f"end derivatives incompatible with {motif}")
            inner = _build_exp(t_end, x_end * motif.mon, d1, d2, gamma)
            return Tail(motif, inner, motif.mon < 0, dict(tail_props))
        # logarithm-like: +-u or -+u
        if d2_end != 0.0:
            raise DomainError(f"d2_end is structurally 0 for {motif}")
        if d1_end * motif.mon <= 0:
            raise DomainError(f"d1_end sign incompatible with {motif}")
        inner = _build_log(t_end, x_end * motif.mon, d1_end * motif.mon, gamma)
        return Tail(motif, inner, motif.mon < 0, dict(tail_props))

    if motif.kind != ASYMPTOTE:
        raise DomainError(f"{motif} is not an unbounded motif")
    h, t_half = tail_props.get(ASYM), tail_props.get(T_HALF)
    if h is None or t_half is None:
        raise DomainError("asymptote tail needs h and t_half")
    if d2_end != 0.0:
        raise DomainError("d2_end is structurally 0 for asymptote tails")
    if d1_end * motif.mon <= 0:
        raise DomainError(f"d1_end sign incompatible with {motif}")
    if (x_end - h) * (-motif.mon) <= 0:
        raise DomainError("asymptote on the wrong side of the last transition value")
    if t_half <= t_end:
        raise DomainError("t_half must come after t_end")
    s = motif.mon * -1.0  # -+h keeps values, +-h mirrors
    inner = _build_sig(t_end, x_end * s, d1_end * s, h * s, t_half)
    return Tail(motif, inner, s < 0, dict(tail_props))


def measure_tail_props(tail: Tail, horizon_multiplier: float = 1000.0, span: float = 1.0) -> dict:
    """Numeric estimates of the tail properties, for verification.

    ``span`` sets the time scale (typically the bounded-part width); the
    measurement horizon is ``horizon_multiplier * span`` past the anchor.
    """
    inner = tail.inner
    t0 = tail.t_end
    horizon = horizon_multiplier * span

    if isinstance(inner, _SigForm):
        # asymptote: the sigmoid term underflows once the warp is large
        far = inner.g_spline.b + (800.0 - inner.g2_end) / max(inner.g2_slope, 1e-12)
        h = float(tail(t0 + max(far, horizon), 0))
        x_end = float(tail(t0, 0))
        target = 0.5 * (x_end + h)
        hi = t0 + span
        f = lambda t: float(tail(t, 0)) - target
        while f(hi) * f(t0 + 1e-12 * max(1.0, abs(t0))) > 0:
            hi = t0 + (hi - t0) * 2.0
            if hi - t0 > 1e12 * span:
                raise ConvergenceError("half-time bisection failed to bracket")
        t_half = brentq(f, t0 + 1e-12 * max(1.0, abs(t0)), hi, xtol=1e-12)
        return {ASYM: h, T_HALF: float(t_half)}

    if isinstance(inner, _ExpForm):
        # doubling gap measured where the exponential term dominates but is
        # still far from overflow
        s_meas = min(horizon, 200.0 / inner.th2)
        t = t0 + s_meas
        xt = float(inner(t, 0))
        if xt <= 0:
            raise ConvergenceError("tail not yet positive at the measurement point")
        gamma_hi = 10.0 * (LOG2 / inner.th2 + span)
        f = lambda g: float(inner(t + g, 0)) - 2.0 * xt
        if f(gamma_hi) < 0:
            raise ConvergenceError("doubling-gap bisection failed to bracket")
        gamma = brentq(f, 0.0, gamma_hi, xtol=1e-12)
        return {GAMMA: float(gamma)}

    # log-like: increment between t and 2t
    t = max(horizon, 2.0 * abs(t0) + span)
    gamma = float(inner(2.0 * t, 0) - inner(t, 0))
    return {GAMMA: gamma}
