"""Differentiable trajectory forward pass used by the fitting code.

The public predictors build object graphs (cubics, splines, tails); training
needs the same map from unconstrained raw parameters to trajectory values as
one batched, autograd-friendly computation.  This module implements that
pipeline in torch for a fixed composition:

    raw matrix [B, R]  ->  valid properties  ->  piece coefficients
                       ->  values at the observation times [B, N]

The transforms make every finite raw vector produce a valid property set:
interval fractions go through a softmax and scale to a sigmoid-bounded
t_end, value increments through a softplus signed by the motif, the start
derivative through a sigmoid scaled to its allowed open interval, and tail
properties through softplus with domain-specific anchoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import DomainError, StructuralError
from .semantics import (
    ASYM,
    ASYMPTOTE,
    DIVERGENT,
    EXTREMUM,
    GAMMA,
    INFLECTION,
    T_HALF,
    Composition,
    _D1_RANGE_KAPPA,
)

LOG2 = math.log(2.0)
LOG3 = math.log(3.0)
LOG4 = math.log(4.0)

#: relative floor for the divergent-tail gamma, in units of the time span
GAMMA_FLOOR = 1e-3
#: sigmoid range margin for the last transition time, in units of the span
T_END_MARGIN = 0.05

torch.set_default_dtype(torch.float64)


@dataclass(frozen=True)
class PropertyRanges:
    """Scales the transforms need: the start time and the largest
    observation time of the training data."""

    t_start: float
    t_max: float

    @property
    def span(self) -> float:
        return self.t_max - self.t_start


@dataclass(frozen=True)
class RawLayout:
    """Slot names and positions of the raw parameter vector for one
    composition."""

    composition: Composition
    names: tuple[str, ...]
    slices: dict

    @property
    def size(self) -> int:
        return max(s.stop for s in self.slices.values())

    @staticmethod
    def for_composition(c: Composition) -> "RawLayout":
        n = c.n_points
        slots: list[tuple[str, int]] = []
        if n >= 2:
            slots += [("t_end", 1), ("t_frac", n - 1), ("x_start", 1), ("dx", n - 1), ("d1_start", 1)]
        else:
            slots.append(("x_start", 1))
            slots.append(("d1_end", 1))
            tail = c.tail_motif
            if tail.kind == DIVERGENT and tail.mon == tail.curv:
                slots.append(("d2_end", 1))
        if c.tail_motif.kind == DIVERGENT:
            slots.append((GAMMA, 1))
        else:
            slots += [("h_offset", 1), ("t_half_offset", 1)]
        names, slices, pos = [], {}, 0
        for name, width in slots:
            names.append(name)
            slices[name] = slice(pos, pos + width)
            pos += width
        return RawLayout(c, tuple(names), slices)


def _softplus_inv(y: float) -> float:
    if y > 30.0:
        return y
    return math.log(math.expm1(max(y, 1e-12)))


def _logit(p: float) -> float:
    p = min(max(p, 1e-9), 1 - 1e-9)
    return math.log(p / (1 - p))


class DifferentiableTrajectory:
    """Raw-parameters-to-values pipeline for one composition.

    ``pins`` maps property names to imposed constant values (they bypass the
    raw path entirely, so their gradient is zero); ``bounds`` maps names to
    (lo, hi) clamping intervals applied after the usual transform.
    """

    def __init__(
        self,
        c: Composition,
        ranges: PropertyRanges,
        pins: dict | None = None,
        bounds: dict | None = None,
    ):
        self.c = c
        self.ranges = ranges
        self.layout = RawLayout.for_composition(c)
        self.pins = dict(pins or {})
        self.bounds = dict(bounds or {})
        if ranges.span <= 0:
            raise DomainError("t_max must exceed t_start")
        kinds = c.transitions()
        self.kinds = kinds
        if c.n_points >= 2:
            key = (c.motifs[0].mon, c.motifs[0].curv, kinds[0])
            self.d1_coeffs = _D1_RANGE_KAPPA[key]
        self.mons = torch.tensor([m.mon for m in c.bounded_motifs], dtype=torch.float64)

    # -- helpers -----------------------------------------------------------

    def _slot(self, raw: torch.Tensor, name: str) -> torch.Tensor:
        return raw[:, self.layout.slices[name]]

    def _apply_pin_bound(self, name: str, value: torch.Tensor) -> torch.Tensor:
        if name in self.pins:
            return torch.full_like(value, float(self.pins[name]))
        if name in self.bounds:
            lo, hi = self.bounds[name]
            return value.clamp(min=lo, max=hi)
        return value

    # -- property pipeline --------------------------------------------------

    def properties(self, raw: torch.Tensor) -> dict:
        """All transformed properties as a dict of [B]-shaped tensors (the
        transition coordinates are [B, n])."""
        c, r = self.c, self.ranges
        n = c.n_points
        B = raw.shape[0]
        out: dict = {}

        if n >= 2:
            t_end_u = torch.sigmoid(self._slot(raw, "t_end")[:, 0])
            t_end = r.t_start + (T_END_MARGIN + (1 - T_END_MARGIN) * t_end_u) * r.span
            t_end = self._apply_pin_bound("t_end", t_end)
            fracs = torch.softmax(self._slot(raw, "t_frac"), dim=1)
            cum = torch.cumsum(fracs, dim=1)
            t0 = torch.full((B,), r.t_start, dtype=raw.dtype)
            t = torch.cat([t0[:, None], t0[:, None] + cum * (t_end - t0)[:, None]], dim=1)

            x0 = self._apply_pin_bound("x_start", self._slot(raw, "x_start")[:, 0])
            dx = torch.nn.functional.softplus(self._slot(raw, "dx"))
            steps = dx * self.mons[None, :]
            x = torch.cat([x0[:, None], x0[:, None] + torch.cumsum(steps, dim=1)], dim=1)

            kappa = (x[:, 1] - x[:, 0]) / (t[:, 1] - t[:, 0])
            a, b = self.d1_coeffs
            u = torch.sigmoid(self._slot(raw, "d1_start")[:, 0])
            d1_start = kappa * (a + u * (b - a))
            d1_start = self._apply_pin_bound("d1_start", d1_start)
            out.update(t=t, x=x, d1_start=d1_start)
        else:
            x0 = self._apply_pin_bound("x_start", self._slot(raw, "x_start")[:, 0])
            t = torch.full((B, 1), r.t_start, dtype=raw.dtype)
            x = x0[:, None]
            tail = c.tail_motif
            d1 = tail.mon * torch.nn.functional.softplus(self._slot(raw, "d1_end")[:, 0])
            d1 = self._apply_pin_bound("d1_end", d1)
            if "d2_end" in self.layout.slices:
                d2 = tail.curv * torch.nn.functional.softplus(self._slot(raw, "d2_end")[:, 0])
                d2 = self._apply_pin_bound("d2_end", d2)
            else:
                d2 = torch.zeros_like(d1)
            out.update(t=t, x=x, d1_start=d1, d1_end=d1, d2_end=d2)
        return out

    def piece_coefficients(self, props: dict) -> list[tuple]:
        """Per-piece local cubic coefficients (c3, c2, c1, c0), plus the
        implied end derivatives appended to ``props``."""
        c = self.c
        n = c.n_points
        t, x = props["t"], props["x"]
        pieces = []
        for i in range(n - 1):
            tl, tr = t[:, i], t[:, i + 1]
            xl, xr = x[:, i], x[:, i + 1]
            dt = tr - tl
            kappa = (xr - xl) / dt
            left_kind = "slope" if i == 0 else ("slope0" if self.kinds[i - 1] == EXTREMUM else INFLECTION)
            right_kind = self.kinds[i]
            if left_kind in ("slope", "slope0"):
                s1 = props["d1_start"] if left_kind == "slope" else torch.zeros_like(kappa)
                if right_kind == EXTREMUM:
                    c3 = (s1 - 2.0 * kappa) / dt**2
                    c2 = (3.0 * kappa - 2.0 * s1) / dt
                else:
                    c3 = (s1 - kappa) / (2.0 * dt**2)
                    c2 = -3.0 * (s1 - kappa) / (2.0 * dt)
                c1 = s1
            else:  # inflection on the left
                if right_kind == EXTREMUM:
                    c3 = -kappa / (2.0 * dt**2)
                    c2 = torch.zeros_like(kappa)
                    c1 = 1.5 * kappa
                else:  # line between two inflections
                    c3 = torch.zeros_like(kappa)
                    c2 = torch.zeros_like(kappa)
                    c1 = kappa
            pieces.append((c3, c2, c1, xl))

        if n >= 2:
            c3, c2, c1, _ = pieces[-1]
            dt = t[:, -1] - t[:, -2]
            if self.kinds[-1] == EXTREMUM:
                props["d1_end"] = torch.zeros_like(dt)
                props["d2_end"] = 6.0 * c3 * dt + 2.0 * c2
            else:
                props["d1_end"] = (3.0 * c3 * dt + 2.0 * c2) * dt + c1
                props["d2_end"] = torch.zeros_like(dt)
        return pieces

    def tail_properties(self, props: dict) -> dict:
        """Tail property transforms; they may depend on the (implied) end
        derivatives, so this runs after ``piece_coefficients``."""
        c, r = self.c, self.ranges
        x_end = props["x"][:, -1]
        t_end = props["t"][:, -1]
        tail = c.tail_motif
        raw = props.pop("_raw")
        if tail.kind == DIVERGENT:
            g = GAMMA_FLOOR * r.span + torch.nn.functional.softplus(self._slot(raw, GAMMA)[:, 0]) * r.span
            props[GAMMA] = self._apply_pin_bound(GAMMA, g)
        else:
            off = torch.nn.functional.softplus(self._slot(raw, "h_offset")[:, 0])
            h = x_end + tail.mon * off
            h = self._apply_pin_bound(ASYM, h)
            floor = LOG3 * (x_end - h).abs() / (2.0 * props["d1_end"].abs().clamp(min=1e-12))
            th_off = torch.nn.functional.softplus(self._slot(raw, "t_half_offset")[:, 0]) * r.span
            t_half = t_end + floor + th_off
            t_half = self._apply_pin_bound(T_HALF, t_half)
            props[ASYM] = h
            props[T_HALF] = t_half
        return props

    # -- evaluation ----------------------------------------------------------

    def _tail_values(self, props: dict, ts: torch.Tensor, order_zero_only=True) -> torch.Tensor:
        tail = self.c.tail_motif
        t_end = props["t"][:, -1][:, None]
        x_end = props["x"][:, -1][:, None]
        d1 = props["d1_end"][:, None]
        d2 = props["d2_end"][:, None]
        s = (ts - t_end).clamp(min=0.0)

        if tail.kind == DIVERGENT and tail.mon == tail.curv:
            sign = float(tail.mon)
            xe, e1, e2 = sign * x_end, sign * d1, sign * d2
            gamma = props[GAMMA][:, None]
            th2 = LOG2 / gamma
            th1 = torch.minimum(torch.minimum(e1 / (2 * th2), e2 / (2 * th2**2)), torch.ones_like(th2))
            th1 = th1.clamp(min=0.0)
            th3 = (e2 - th1 * th2**2) / 2.0
            th4 = e1 - th1 * th2
            th5 = xe - th1
            val = th1 * torch.exp((th2 * s).clamp(max=700.0)) + th3 * s * s + th4 * s + th5
            return sign * val
        if tail.kind == DIVERGENT:
            sign = float(tail.mon)
            xe, e1 = sign * x_end, sign * d1
            gamma = props[GAMMA][:, None]
            th1 = gamma / LOG4
            th3 = e1 / th1
            th2 = th3 * th3 / 2.0
            val = th1 * torch.log(th2 * s * s + th3 * s + 1.0) + xe
            return sign * val

        sign = -float(tail.mon)  # -+h evaluates directly, +-h mirrors
        xe, e1 = sign * x_end, sign * d1
        h = sign * props[ASYM][:, None]
        t_half = props[T_HALF][:, None]
        th1 = 2.0 * (xe - h)
        a = -2.0 * e1 / (xe - h)
        span = (t_half - t_end).clamp(min=1e-12)
        cap = 1.5 * LOG3 / a
        t2 = torch.minimum(span, cap)
        v1 = torch.where(
            span <= cap,
            4.0 * (LOG3 - a * span) / span**2,
            4.0 * (LOG3 - a * span) / (2.0 * t2 * span - t2 * t2),
        )
        t1 = t2 / 2.0
        # g on [0, t1]: a*s + v1 s^3/(6 t1); on [t1, t2]: cubic continuation;
        # beyond t2: linear with the end slope
        g_t1 = a * t1 + v1 * t1 * t1 / 6.0
        dg_t1 = a + v1 * t1 / 2.0
        tau = (s - t1).clamp(min=0.0)
        tau2 = torch.minimum(tau, t2 - t1)
        g_mid = g_t1 + dg_t1 * tau2 + v1 * (tau2**2 / 2.0 - tau2**3 / (6.0 * (t2 - t1)))
        g_end = g_t1 + dg_t1 * (t2 - t1) + v1 * ((t2 - t1) ** 2 / 2.0 - (t2 - t1) ** 2 / 6.0)
        dg_end = a + v1 * t2 / 2.0
        s1 = torch.minimum(s, t1)
        g = a * s1 + v1 * s1**3 / (6.0 * t1)
        g = torch.where(s > t1, g_mid, g)
        g = torch.where(s > t2, g_end + dg_end * (s - t2), g)
        val = th1 * torch.sigmoid(-g) + h
        return sign * val

    def values(self, raw: torch.Tensor, ts: torch.Tensor) -> tuple[torch.Tensor, dict]:
        """Trajectory values at ``ts`` ([B, N] or [N]) plus the transformed
        properties and smoothness diagnostics."""
        if ts.dim() == 1:
            ts = ts[None, :].expand(raw.shape[0], -1)
        props = self.properties(raw)
        pieces = self.piece_coefficients(props)
        props["_raw"] = raw
        props = self.tail_properties(props)

        t = props["t"]
        t_end = t[:, -1][:, None]
        if pieces:
            vals = torch.zeros_like(ts)
            n_pieces = len(pieces)
            for i, (c3, c2, c1, c0) in enumerate(pieces):
                tl = t[:, i][:, None]
                tr = t[:, i + 1][:, None]
                lo = (ts >= tl) if i > 0 else torch.ones_like(ts, dtype=torch.bool)
                hi = (ts < tr) if i < n_pieces - 1 else (ts <= tr)
                mask = (lo & hi).to(ts.dtype)
                s = ts - tl
                piece_vals = ((c3[:, None] * s + c2[:, None]) * s + c1[:, None]) * s + c0[:, None]
                vals = vals + mask * piece_vals
            tail_mask = (ts > t_end).to(ts.dtype)
            vals = vals + tail_mask * self._tail_values(props, ts)
        else:
            vals = self._tail_values(props, ts)

        props["_mismatch"] = self._derivative_mismatches(props, pieces)
        return vals, props

    def _derivative_mismatches(self, props: dict, pieces: list) -> torch.Tensor:
        """Jumps of the unconstrained derivative at internal transitions
        (first derivative at inflections, second at extrema); [B, n-2]."""
        n = self.c.n_points
        t = props["t"]
        if n < 3:
            B = t.shape[0]
            return torch.zeros((B, 0), dtype=t.dtype)
        jumps = []
        for i in range(1, n - 1):
            dt = t[:, i] - t[:, i - 1]
            c3l, c2l, c1l, _ = pieces[i - 1]
            c3r, c2r, c1r, _ = pieces[i]
            if self.kinds[i - 1] == INFLECTION:
                left = (3.0 * c3l * dt + 2.0 * c2l) * dt + c1l
                right = c1r
            else:
                left = 6.0 * c3l * dt + 2.0 * c2l
                right = 2.0 * c2r
            jumps.append(right - left)
        return torch.stack(jumps, dim=1)


def training_loss(
    dt: DifferentiableTrajectory,
    raw: torch.Tensor,
    ts: torch.Tensor,
    ys: torch.Tensor,
    derivative_penalty: float = 0.01,
    end_derivative_penalty: float = 0.0,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Mean per-sample trajectory MSE plus the two shape penalties.

    Returns (total loss, per-sample MSE vector).  The first penalty damps
    derivative jumps at internal transition points, the second keeps the
    final slope from running away.
    """
    vals, props = dt.values(raw, ts)
    per_sample = ((vals - ys) ** 2).mean(dim=1)
    mse = per_sample.mean()
    penalty = torch.zeros((), dtype=vals.dtype)
    mism = props["_mismatch"]
    if mism.numel():
        penalty = penalty + derivative_penalty * (mism**2).sum(dim=1).mean()
    if end_derivative_penalty:
        penalty = penalty + end_derivative_penalty * (props["d1_end"] ** 2).mean()
    return mse + penalty, per_sample


def _smooth(ys: np.ndarray, width: int = 5) -> np.ndarray:
    if len(ys) < width:
        return ys.astype(float)
    kernel = np.ones(width) / width
    pad = width // 2
    padded = np.concatenate([np.repeat(ys[0], pad), ys, np.repeat(ys[-1], pad)])
    return np.convolve(padded, kernel, mode="valid")


def _estimate_transition_times(c: Composition, ts: np.ndarray, ys: np.ndarray) -> np.ndarray | None:
    """Locate the composition's transition points in one noisy sample.

    Extrema are sign changes of the smoothed first difference, inflections
    of the smoothed second difference, searched left to right with the
    direction each transition requires.  A failed pass retries with a
    narrower smoothing window, which resolves transitions close to the
    window edges.  Returns None when the data does not show the requested
    structure at all.
    """
    if len(ys) < 7:
        return None
    for width in (5, 3):
        found = _transition_pass(c, ts, np.asarray(ys, dtype=float), width)
        if found is not None:
            return found
    return None


def _transition_pass(c: Composition, ts: np.ndarray, ys: np.ndarray, width: int) -> np.ndarray | None:
    smooth = _smooth(ys, width)
    tm = ts[1:-1]
    d1 = (smooth[2:] - smooth[:-2]) / (ts[2:] - ts[:-2])
    d2 = np.gradient(d1, tm)

    kinds = c.transitions()
    motifs = c.motifs
    found = []
    start = 0
    for k, kind in enumerate(kinds):
        if kind == EXTREMUM:
            signal, direction = d1, -motifs[k].mon  # e.g. + -> - at a maximum
        else:
            signal, direction = d2, motifs[k + 1].curv
        hit = None
        for i in range(start, len(tm) - 1):
            if signal[i] * direction < 0 and signal[i + 1] * direction >= 0:
                hit = i
                break
        if hit is None:
            return None
        found.append(0.5 * (tm[hit] + tm[hit + 1]))
        start = hit + 1
    return np.asarray(found)


def _estimate_asymptote(ys: np.ndarray, mon: int, amp: float) -> float:
    """Geometric extrapolation of the tail from the last three observations:
    the remaining gap of a near-exponential approach is d * rho / (1 - rho)."""
    d_prev = ys[-2] - ys[-3]
    d_last = ys[-1] - ys[-2]
    offset = 0.25 * amp
    if d_prev * mon > 0 and d_last * mon > 0:
        rho = min(max(d_last / d_prev, 0.05), 0.95)
        offset = abs(d_last) * rho / (1.0 - rho)
    return float(ys[-1] + mon * max(offset, 0.02 * amp))


def _estimate_half_time(ts: np.ndarray, ys: np.ndarray, y_ref: float, h: float, mon: int) -> float:
    """First observation time where the trajectory crosses midway between
    ``y_ref`` and the asymptote estimate."""
    target = 0.5 * (y_ref + h)
    gap = (ys - target) * (-mon)  # positive while the midpoint is not reached
    for i in range(1, len(ts)):
        if gap[i] <= 0 < gap[i - 1]:
            w = gap[i - 1] / (gap[i - 1] - gap[i])
            return float(ts[i - 1] + w * (ts[i] - ts[i - 1]))
    return float(ts[-1])


def initial_raw(
    c: Composition,
    ranges: PropertyRanges,
    ts: np.ndarray | None = None,
    ys: np.ndarray | None = None,
    info: dict | None = None,
) -> np.ndarray:
    """Data-driven starting point in raw space.

    Transition times are located in the sample where its finite differences
    show them (falling back to a spread over most of the window), value
    increments start at the observed amplitudes, the start derivative at the
    middle of its allowed interval, and tail properties at estimates read
    off the observations (extrapolated asymptote, half-crossing time,
    first-step slope).  ``info`` (if given) records whether the transition
    structure was actually found in the data.
    """
    if info is None:
        info = {}
    layout = RawLayout.for_composition(c)
    raw = np.zeros(layout.size)
    have_data = ts is not None and ys is not None and len(np.atleast_1d(ys)) >= 3
    ys = np.asarray(ys, dtype=float) if have_data else np.array([0.0, 0.5, 1.0])
    ts = np.asarray(ts, dtype=float) if have_data else np.array([0.0, 0.5, 1.0])
    amp = max(float(np.ptp(ys)), 1e-3)
    y0 = float(ys[0])
    slope0 = abs((ys[1] - ys[0]) / (ts[1] - ts[0])) if ts[1] > ts[0] else amp

    n = c.n_points
    tail = c.tail_motif
    info["transitions_found"] = True
    if n >= 2:
        raw[layout.slices["x_start"]] = y0
        cuts = _estimate_transition_times(c, ts, ys) if have_data else None
        info["transitions_found"] = cuts is not None
        if cuts is not None:
            frac = (cuts[-1] - ranges.t_start) / ranges.span
            frac = min(max(frac, T_END_MARGIN + 0.01), 0.99)
            raw[layout.slices["t_end"]] = _logit((frac - T_END_MARGIN) / (1 - T_END_MARGIN))
            gaps = np.diff(np.concatenate([[ranges.t_start], cuts]))
            raw[layout.slices["t_frac"]] = np.log(np.maximum(gaps / gaps.sum(), 1e-3))
            y_cut = np.interp(cuts, ts, _smooth(ys))
            dx = np.abs(np.diff(np.concatenate([[y0], y_cut])))
            raw[layout.slices["dx"]] = [_softplus_inv(max(v, 0.02 * amp)) for v in dx]
            t_end_est = float(cuts[-1])
            y_ref = float(y_cut[-1])
            # start the first derivative at the observed first-step slope,
            # expressed inside its allowed interval
            kappa_est = (y_cut[0] - y0) / max(cuts[0] - ranges.t_start, 1e-9)
            if kappa_est != 0.0:
                first = c.motifs[0]
                a_c, b_c = _D1_RANGE_KAPPA[(first.mon, first.curv, c.transitions()[0])]
                u = (slope0 / abs(kappa_est) - a_c) / (b_c - a_c)
                raw[layout.slices["d1_start"]] = _logit(float(np.clip(u, 0.02, 0.98)))
        else:
            raw[layout.slices["t_end"]] = _logit((0.8 - T_END_MARGIN) / (1 - T_END_MARGIN))
            step = max(amp / max(n - 1, 1), 0.05 * amp)
            raw[layout.slices["dx"]] = _softplus_inv(step)
            # t_frac and d1_start stay at 0: equal intervals, mid-range slope
            t_end_est = ranges.t_start + 0.8 * ranges.span
            i_end = int(np.searchsorted(ts, t_end_est)) if have_data else len(ys) - 1
            i_end = min(max(i_end, 1), len(ys) - 1)
            y_ref = float(ys[i_end])
        d1_est = max(slope0, 0.05 * amp / ranges.span)
    else:
        raw[layout.slices["x_start"]] = y0
        d1_est = max(slope0, 0.01 * amp / ranges.span)
        raw[layout.slices["d1_end"]] = _softplus_inv(d1_est)
        if "d2_end" in layout.slices:
            raw[layout.slices["d2_end"]] = _softplus_inv(0.1)
        t_end_est = ranges.t_start
        y_ref = y0

    if tail.kind == DIVERGENT:
        raw[layout.slices[GAMMA]] = _softplus_inv(0.5)
    else:
        h_est = _estimate_asymptote(ys, tail.mon, amp) if have_data else y_ref + tail.mon * 0.25 * amp
        offset = max(tail.mon * (h_est - y_ref), 0.02 * amp)
        raw[layout.slices["h_offset"]] = _softplus_inv(offset)
        t_half_est = _estimate_half_time(ts, ys, y_ref, y_ref + tail.mon * offset, tail.mon)
        floor = LOG3 * offset / (2.0 * d1_est)
        extra = max((t_half_est - t_end_est - floor) / ranges.span, 2e-4)
        raw[layout.slices["t_half_offset"]] = _softplus_inv(extra)
    return raw
