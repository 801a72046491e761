"""Full predicted trajectories: piecewise-cubic bounded part plus a tail."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cubic import CubicSpline
from .errors import DomainError
from .semantics import Composition, PropertySet, SemanticRep
from .tails import Tail, predict_tail
from .traj_c0 import BoundedTrajectory, predict_c0


@dataclass(frozen=True)
class PredictedTrajectory:
    """Evaluable trajectory on ``[t_0, inf)`` with two derivatives.

    ``bounded`` is either the per-motif cubic construction or the smooth
    spline from the C^2 predictor, or ``None`` when the composition is a
    lone unbounded motif.  ``status`` records which construction produced
    the bounded part (``"c0"``, ``"c2"``, ``"fallback_c0"`` or ``"empty"``).
    """

    rep: SemanticRep
    bounded: BoundedTrajectory | CubicSpline | None
    tail: Tail
    status: str

    @property
    def t_start(self) -> float:
        return float(self.rep.properties.t[0])

    @property
    def t_end(self) -> float:
        return float(self.rep.properties.t_end)

    def __call__(self, t, order: int = 0):
        ts = np.asarray(t, dtype=float)
        scalar = ts.ndim == 0
        ts = np.atleast_1d(ts)
        if np.any(ts < self.t_start - 1e-12):
            raise DomainError("evaluation before t_0")
        out = np.empty_like(ts)
        before = ts <= self.t_end
        if np.any(before):
            if self.bounded is None:
                # lone unbounded motif: only t_end itself lies "before"
                out[before] = self.tail(np.maximum(ts[before], self.t_end), order)
            else:
                out[before] = self.bounded(ts[before], order)
        if np.any(~before):
            out[~before] = self.tail(ts[~before], order)
        return float(out[0]) if scalar else out


def assemble_c0(c: Composition, p: PropertySet, check: bool = True) -> PredictedTrajectory:
    """Trajectory from the fast predictor: bounded part via one cubic per
    motif, tail anchored to the (possibly implied) end derivatives."""
    bounded = predict_c0(c, p, check=check)
    d1_end, d2_end = bounded.implied_d1_end, bounded.implied_d2_end
    tail = predict_tail(c.tail_motif, p.tail, p.t_end, p.x_end, d1_end, d2_end)
    rep = SemanticRep(c, p)
    return PredictedTrajectory(rep, bounded if bounded.pieces else None, tail, "c0" if bounded.pieces else "empty")


def assemble_c2(
    c: Composition, p: PropertySet, threshold: float = 1e-3, seed: int = 0
) -> PredictedTrajectory:
    """Trajectory from the smooth predictor, falling back to the fast one.

    When the smooth fit succeeds the spline hits the stored end derivatives
    exactly, so the tail junction is twice continuously differentiable; on
    fallback the tail re-anchors to the fast construction's implied end
    derivatives, as during training.
    """
    from .traj_c2 import EXACT, predict_c2

    bounded, status = predict_c2(c, p, threshold=threshold, seed=seed)
    rep = SemanticRep(c, p)
    if bounded is None:  # lone unbounded motif
        tail = predict_tail(c.tail_motif, p.tail, p.t_end, p.x_end, p.d1_end, p.d2_end)
        return PredictedTrajectory(rep, None, tail, "empty")
    if status == EXACT:
        tail = predict_tail(c.tail_motif, p.tail, p.t_end, p.x_end, p.d1_end, p.d2_end)
        return PredictedTrajectory(rep, bounded, tail, "c2")
    tail = predict_tail(c.tail_motif, p.tail, p.t_end, p.x_end, bounded.implied_d1_end, bounded.implied_d2_end)
    return PredictedTrajectory(rep, bounded, tail, "fallback_c0")
