"""Finite-difference extraction of the shape of a densely sampled trajectory.

This is a testing/scoring oracle, not a production path: it recovers the
sequence of (monotonicity, curvature) sign segments and the transition
points between them from central finite differences on a uniform grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AmbiguityError, DomainError
from .semantics import Composition, Motif

#: Minimum number of consecutive near-zero curvature points that count as a
#: genuinely flat region rather than a transition crossing.
_MIN_FLAT_RUN = 8

#: Signed runs shorter than this are finite-difference artifacts (e.g. the
#: second-difference spike where a merely-continuous construction kinks) and
#: are absorbed into their neighbourhood.
_MIN_SIGNED_RUN = 3


@dataclass(frozen=True)
class ExtractedShape:
    """Sign segments and internal transition times of a sampled window.

    ``segments`` holds (mon, curv) sign pairs per maximal interval; a
    curvature of 0 marks a straight-line region.  ``transitions`` has one
    entry between consecutive segments.
    """

    segments: tuple[tuple[int, int], ...]
    transitions: tuple[float, ...]

    def matches(self, c: Composition, flat_ok: bool = True) -> bool:
        """Whether the extracted shape realizes composition ``c``.

        With ``flat_ok`` a zero-curvature segment counts as matching where a
        legitimately degenerate (infinitesimal-curvature) construction can
        occur: a bounded motif flanked by two inflection points, an
        exponential-like tail entered through an inflection, or both fused
        into one straight stretch (in which case the last transition point
        is invisible and the shape has one segment less than the
        composition).
        """
        kinds = c.transitions()
        tail = c.tail_motif

        def flat_allowed(i: int, motif) -> bool:
            if not flat_ok:
                return False
            if motif.bounded:
                left = i > 0 and kinds[i - 1] == "inflection"
                right = i < len(kinds) and kinds[i] == "inflection"
                return left and right
            linearizable = motif.kind == "u" and motif.mon == motif.curv
            return linearizable and (not kinds or kinds[-1] == "inflection")

        def align(segments, motifs) -> bool:
            for i, ((mon, curv), motif) in enumerate(zip(segments, motifs)):
                if mon != motif.mon:
                    return False
                if curv != motif.curv and not (curv == 0 and flat_allowed(i, motif)):
                    return False
            return True

        if len(self.segments) == len(c.motifs):
            return align(self.segments, c.motifs)

        # fused case: a straight bounded piece running into a straight tail
        if (
            flat_ok
            and len(self.segments) == len(c.motifs) - 1
            and len(c.motifs) >= 3
            and kinds[-1] == "inflection"
            and kinds[-2] == "inflection"
            and tail.kind == "u"
            and tail.mon == tail.curv
        ):
            mon, curv = self.segments[-1]
            if mon == tail.mon and curv == 0:
                return align(self.segments[:-1], c.motifs[:-2])
        return False



def _crossings(ts: np.ndarray, d: np.ndarray, tol: float) -> tuple[list[float], list[tuple[int, int, int]]]:
    """Sign runs of ``d`` with tolerance ``tol``: returns transition times
    (one per sign change) and runs as (start, stop, sign) index triples."""
    cls = np.zeros(d.shape, dtype=int)
    cls[d > tol] = 1
    cls[d < -tol] = -1

    runs: list[list[int]] = []  # [start, stop, sign]
    for i, s in enumerate(cls):
        if runs and runs[-1][2] == s:
            runs[-1][1] = i + 1
        else:
            runs.append([i, i + 1, s])

    # iteratively absorb artifacts: short zero runs are crossings or
    # tangential touches, short signed runs are spikes from kinks
    def too_short(r):
        width = r[1] - r[0]
        return width < (_MIN_FLAT_RUN if r[2] == 0 else _MIN_SIGNED_RUN)

    while len(runs) > 1:
        victims = [k for k, r in enumerate(runs) if too_short(r)]
        if not victims:
            break
        # absorb the shortest first; boundary runs extend their neighbour
        k = min(victims, key=lambda k: runs[k][1] - runs[k][0])
        r = runs.pop(k)
        if not runs:
            runs = [r]
            break
        if k == 0:
            runs[0][0] = r[0]
        elif k >= len(runs):
            runs[-1][1] = r[1]
        elif runs[k - 1][2] == runs[k][2]:
            runs[k - 1][1] = runs[k][1]
            del runs[k]

    times = []
    for left, right in zip(runs, runs[1:]):
        i, j = left[1] - 1, right[0]
        if left[2] != 0 and right[2] != 0 and np.sign(d[i]) != np.sign(d[j]) and d[i] != d[j]:
            # interpolate the zero crossing between the closest points
            t0, t1, y0, y1 = ts[i], ts[j], d[i], d[j]
            times.append(float(t0 - y0 * (t1 - t0) / (y1 - y0)))
        else:
            times.append(float(0.5 * (ts[i] + ts[j])))
    return times, [(r[0], r[1], r[2]) for r in runs]


def extract_shape(ts: np.ndarray, xs: np.ndarray, curvature_tol: float | None = None) -> ExtractedShape:
    """Recover sign segments and transitions from dense uniform samples.

    ``curvature_tol`` defaults to ``1e-6 *`` the sampled value range.
    Straight-line regions are reported as curvature-0 segments; callers that
    cannot use them should go through :func:`extract_semantics`.
    """
    ts = np.asarray(ts, dtype=float)
    xs = np.asarray(xs, dtype=float)
    if ts.ndim != 1 or ts.shape != xs.shape or ts.size < 16:
        raise DomainError("need matching 1-D arrays with at least 16 samples")
    h = np.diff(ts)
    if not np.allclose(h, h[0], rtol=1e-8):
        raise DomainError("samples must be on a uniform grid")
    h = float(h[0])

    d1 = (xs[2:] - xs[:-2]) / (2.0 * h)
    d2 = (xs[2:] - 2.0 * xs[1:-1] + xs[:-2]) / (h * h)
    tm = ts[1:-1]

    vrange = float(np.ptp(xs)) or 1.0
    ctol = curvature_tol if curvature_tol is not None else 1e-6 * vrange
    mtol = 1e-9 * vrange / (ts[-1] - ts[0])

    t1_times, runs1 = _crossings(tm, d1, mtol)
    t2_times, runs2 = _crossings(tm, d2, ctol)

    cuts = sorted(t1_times + t2_times)
    edges = [float(ts[0]), *cuts, float(ts[-1])]
    segments = []
    for a, b in zip(edges, edges[1:]):
        lo = np.searchsorted(tm, a, side="right")
        hi = np.searchsorted(tm, b, side="left")
        if hi <= lo:
            lo = max(0, min(lo, len(tm) - 1))
            hi = lo + 1
        # sample signs away from the cuts where estimates are cleanest
        mid_lo = lo + (hi - lo) // 4
        mid_hi = hi - (hi - lo) // 4
        seg1 = d1[mid_lo:mid_hi]
        seg2 = d2[mid_lo:mid_hi]
        mon = 1 if np.median(seg1) > 0 else -1
        if np.max(np.abs(seg2)) < ctol:
            curv = 0
        else:
            curv = 1 if np.median(seg2) > 0 else -1
        segments.append((mon, curv))

    # enforce minimality: merge identical neighbours (can appear when a
    # tangential touch was classified as a crossing)
    out_seg: list[tuple[int, int]] = []
    out_cut: list[float] = []
    for i, seg in enumerate(segments):
        if out_seg and out_seg[-1] == seg:
            continue
        if out_seg:
            out_cut.append(edges[i])
        out_seg.append(seg)
    return ExtractedShape(tuple(out_seg), tuple(out_cut))


def extract_semantics(
    ts: np.ndarray, xs: np.ndarray, curvature_tol: float | None = None
) -> tuple[tuple[Motif, ...], tuple[float, ...]]:
    """Bounded-motif prefix and transition points of a sampled window.

    All segments except the last are reported as bounded motifs; the final
    segment's signs belong to whatever continues beyond the window.  A
    segment with no resolvable curvature raises :class:`AmbiguityError`
    (the motif set has no straight lines; approximate them with
    infinitesimal curvature instead).
    """
    shape = extract_shape(ts, xs, curvature_tol)
    flat = [i for i, (_, curv) in enumerate(shape.segments) if curv == 0]
    if flat:
        raise AmbiguityError(f"straight-line region in segment(s) {flat}: curvature sign undefined")
    motifs = tuple(Motif(mon, curv, "b") for mon, curv in shape.segments[:-1])
    return motifs, shape.transitions
