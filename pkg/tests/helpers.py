"""Shared test utilities: randomized valid semantic representations.

The generator draws (composition, properties) pairs that are self-consistent
by construction: end derivatives are read off the fast bounded construction,
and tail properties respect their domain rules with a margin, so
``validate_semantics`` accepts every draw.
"""

from __future__ import annotations

import numpy as np

from semode.semantics import (
    ASYM,
    ASYMPTOTE,
    DIVERGENT,
    EXTREMUM,
    GAMMA,
    T_HALF,
    Composition,
    PropertySet,
    derivative_range,
    validate_semantics,
)
from semode.semantics import _tail_half_time_floor
from semode.traj_c0 import predict_c0


def random_properties(c: Composition, rng: np.random.Generator, interior=(0.02, 0.98)) -> PropertySet:
    """A valid property set for ``c`` with d1_start drawn strictly inside
    its allowed interval (position within ``interior``)."""
    n = c.n_points
    t0 = rng.uniform(-1.0, 1.0)
    dts = rng.uniform(0.3, 1.5, size=n - 1)
    t = t0 + np.concatenate([[0.0], np.cumsum(dts)])

    x0 = rng.uniform(-2.0, 2.0)
    x = [x0]
    for m in c.bounded_motifs:
        x.append(x[-1] + m.mon * rng.uniform(0.3, 2.0))
    x = np.array(x)

    if n >= 2:
        kappa = (x[1] - x[0]) / (t[1] - t[0])
        lo, hi = derivative_range(c.motifs[0], c.transitions()[0], kappa)
        d1_start = lo + rng.uniform(*interior) * (hi - lo)
        bounded = predict_c0(
            c, PropertySet(t, x, d1_start, 0.0, 0.0, {}), check=False
        )
        d1_end, d2_end = bounded.implied_d1_end, bounded.implied_d2_end
    else:
        tail = c.tail_motif
        if tail.kind == DIVERGENT and tail.mon == tail.curv:
            d1_end = tail.mon * rng.uniform(0.2, 2.0)
            d2_end = tail.curv * rng.uniform(0.2, 2.0)
        else:
            d1_end = tail.mon * rng.uniform(0.2, 2.0)
            d2_end = 0.0
        d1_start = d1_end

    span = float(t[-1] - t[0]) if n >= 2 else 1.0
    tail_motif = c.tail_motif
    if tail_motif.kind == DIVERGENT:
        tail_props = {GAMMA: rng.uniform(0.2, 3.0) * span}
    else:
        h = x[-1] + tail_motif.mon * rng.uniform(0.3, 2.0)  # mon -: below, mon +: above
        floor = _tail_half_time_floor(float(x[-1]), h, d1_end)
        t_half = float(t[-1]) + floor * (1.0 + rng.uniform(0.05, 2.0))
        tail_props = {ASYM: h, T_HALF: t_half}

    p = PropertySet(t, x, float(d1_start), float(d1_end), float(d2_end), tail_props)
    report = validate_semantics(c, p)
    assert report.ok, f"generator produced invalid properties for {c}: {report.violations}"
    return p


def extraction_window(c: Composition, p: PropertySet) -> tuple[float, float]:
    """Sampling window for shape extraction: the bounded part plus a tail
    margin over which the finite differences stay well conditioned."""
    span = float(p.t[-1] - p.t[0]) or 1.0
    if c.tail_motif.kind == ASYMPTOTE:
        margin = min(0.75 * span, p.tail[T_HALF] - p.t_end)
    else:
        margin = 0.75 * span
    return float(p.t[0]), float(p.t_end + max(margin, 0.25 * span))


def roundtrip_conforms(c, p, traj, n: int = 4001) -> tuple[bool, object]:
    """Extract the shape of a full trajectory and compare with ``(c, p)``.

    Returns (ok, shape).  The expected transitions are the leading entries
    of ``p.t[1:]``; when a straight bounded piece fuses with a straight tail
    the last transition is invisible and is not expected.
    """
    from semode.extract import extract_shape

    a, b = extraction_window(c, p)
    ts = np.linspace(a, b, n)
    shape = extract_shape(ts, traj(ts))
    if not shape.matches(c):
        return False, shape
    expected = p.t[1 : 1 + len(shape.transitions)]
    if len(shape.transitions) != len(shape.segments) - 1:
        return False, shape
    ok = np.allclose(shape.transitions, expected, atol=2 * (ts[1] - ts[0]))
    return bool(ok), shape
