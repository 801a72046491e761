"""Fast trajectory predictor: one cubic per bounded motif.

Each cubic is pinned by four linear conditions: the values at both ends of
its interval, plus one derivative condition per end (the prescribed start
derivative at t_0, a vanishing first derivative at extrema, a vanishing
second derivative at inflections).  The systems are solved in closed form
in the local variable, which keeps the map from properties to trajectory
values cheap and smooth enough to differentiate through during training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cubic import Cubic
from .errors import DegenerateInputError, DomainError
from .semantics import (
    EXTREMUM,
    INFLECTION,
    Composition,
    PropertySet,
    derivative_start_range,
    validate_semantics,
)

# re-exported here because the start-derivative table is part of this
# predictor's contract
from .semantics import derivative_range  # noqa: F401


def solve_piece(
    t_left: float,
    t_right: float,
    x_left: float,
    x_right: float,
    left: tuple[str, float],
    right_kind: str,
) -> Cubic:
    """Cubic through both endpoint values with one derivative condition per
    end.

    ``left`` is ``("slope", value)`` for a prescribed first derivative or
    ``("inflection", 0)`` for a vanishing second derivative at the left end;
    ``right_kind`` is ``extremum`` (x'(right) = 0) or ``inflection``
    (x''(right) = 0).
    """
    dt = t_right - t_left
    if dt <= 0:
        raise DegenerateInputError(f"coincident or reversed transition times: {t_left}, {t_right}")
    kappa = (x_right - x_left) / dt
    kind, val = left
    if kind == "slope":
        s1 = val
        if right_kind == EXTREMUM:
            c3 = (s1 - 2.0 * kappa) / dt**2
            c2 = (3.0 * kappa - 2.0 * s1) / dt
        elif right_kind == INFLECTION:
            c3 = (s1 - kappa) / (2.0 * dt**2)
            c2 = -3.0 * (s1 - kappa) / (2.0 * dt)
        else:
            raise DomainError(f"unknown right condition {right_kind!r}")
        return Cubic(t_left, t_right, c3, c2, s1, x_left)
    if kind == "inflection":
        if right_kind == EXTREMUM:
            return Cubic(t_left, t_right, -kappa / (2.0 * dt**2), 0.0, 1.5 * kappa, x_left)
        if right_kind == INFLECTION:
            # both ends inflections: the piece degenerates to a line
            return Cubic(t_left, t_right, 0.0, 0.0, kappa, x_left)
        raise DomainError(f"unknown right condition {right_kind!r}")
    raise DomainError(f"unknown left condition {kind!r}")


@dataclass(frozen=True)
class BoundedTrajectory:
    """Piecewise-cubic bounded part, one piece per bounded motif.

    Continuous by construction; each piece carries its motif's shape on the
    open interval whenever the start derivative was strictly inside its
    allowed range.  ``implied_d1_end``/``implied_d2_end`` report the
    derivative at the last transition point that the construction did not
    constrain (the other one vanishes structurally unless the composition
    pinned it).
    """

    knots: np.ndarray
    pieces: tuple[Cubic, ...]
    implied_d1_end: float
    implied_d2_end: float

    @property
    def t_end(self) -> float:
        return float(self.knots[-1])

    def __call__(self, t, order: int = 0):
        ts = np.asarray(t, dtype=float)
        scalar = ts.ndim == 0
        ts = np.atleast_1d(ts)
        if not self.pieces:
            raise DomainError("empty bounded part cannot be evaluated")
        if np.any(ts < self.knots[0]) or np.any(ts > self.knots[-1]):
            raise DomainError("evaluation outside the bounded domain")
        idx = np.clip(np.searchsorted(self.knots, ts, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(ts)
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = self.pieces[k](ts[sel], order)
        return float(out[0]) if scalar else out


def predict_c0(c: Composition, p: PropertySet, check: bool = True) -> BoundedTrajectory:
    """Bounded part conforming to ``(c, p)`` (empty for a lone unbounded
    motif, with ``t_end := t_0``).

    With ``check`` the property set is validated first, including the strict
    start-derivative range; training-time range enforcement is the caller's
    job (the property transforms keep the derivative inside the open
    interval by construction).
    """
    if check:
        report = validate_semantics(c, p)
        if not report.ok:
            raise DomainError("; ".join(report.violations))

    n = c.n_points
    if n == 1:
        return BoundedTrajectory(p.t.copy(), (), p.d1_end, p.d2_end)

    kinds = c.transitions()
    pieces = []
    for i in range(n - 1):
        left = ("slope", float(p.d1_start)) if i == 0 else (
            ("slope", 0.0) if kinds[i - 1] == EXTREMUM else ("inflection", 0.0)
        )
        pieces.append(
            solve_piece(float(p.t[i]), float(p.t[i + 1]), float(p.x[i]), float(p.x[i + 1]), left, kinds[i])
        )

    last = pieces[-1]
    t_end = float(p.t[-1])
    if kinds[-1] == EXTREMUM:
        d1_end, d2_end = 0.0, float(last(t_end, order=2))
    else:
        d1_end, d2_end = float(last(t_end, order=1)), 0.0
    return BoundedTrajectory(p.t.copy(), tuple(pieces), d1_end, d2_end)


def start_derivative_inside(c: Composition, p: PropertySet) -> bool:
    """Whether d1_start sits strictly inside its allowed open interval."""
    if len(c) < 2:
        return True
    lo, hi = derivative_start_range(c, p)
    return lo < p.d1_start < hi
