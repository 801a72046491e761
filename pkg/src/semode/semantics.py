"""Shape vocabulary and semantic representations of 1-D trajectories.

A trajectory is summarised by a *composition* (an ordered sequence of shape
motifs, all bounded except the last) together with a set of quantitative
*properties*: the coordinates of the transition points between motifs, the
boundary derivatives, and a couple of numbers describing the long-term
behaviour of the final, unbounded motif.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import NumericError, StructuralError

BOUNDED = "b"
DIVERGENT = "u"
ASYMPTOTE = "h"

_KINDS = (BOUNDED, DIVERGENT, ASYMPTOTE)

EXTREMUM = "extremum"
INFLECTION = "inflection"


@dataclass(frozen=True, order=False)
class Motif:
    """One shape primitive: monotonicity sign, curvature sign, domain kind.

    ``mon`` and ``curv`` are +1 or -1; ``kind`` is one of ``"b"`` (bounded
    interval), ``"u"`` (unbounded, divergent) or ``"h"`` (unbounded with a
    horizontal asymptote).
    """

    mon: int
    curv: int
    kind: str

    def __post_init__(self):
        if self.mon not in (1, -1) or self.curv not in (1, -1):
            raise StructuralError(f"motif signs must be +/-1, got {self}")
        if self.kind not in _KINDS:
            raise StructuralError(f"unknown motif kind {self.kind!r}")
        if self.kind == ASYMPTOTE and (self.mon, self.curv) not in ((1, -1), (-1, 1)):
            # An asymptote needs the derivative to die out, which forces the
            # curvature to oppose the monotonicity.
            raise StructuralError(f"no horizontal-asymptote motif with signs {self}")

    @property
    def bounded(self) -> bool:
        return self.kind == BOUNDED

    @staticmethod
    def parse(code: str) -> "Motif":
        """Parse ``"++b"``-style codes (mon sign, curv sign, kind letter)."""
        code = code.strip()
        if len(code) != 3 or code[0] not in "+-" or code[1] not in "+-":
            raise StructuralError(f"bad motif code {code!r}")
        return Motif(1 if code[0] == "+" else -1, 1 if code[1] == "+" else -1, code[2])

    def __str__(self) -> str:
        return ("+" if self.mon > 0 else "-") + ("+" if self.curv > 0 else "-") + self.kind

    def __repr__(self) -> str:
        return f"Motif({self})"


def _sign_order(m: Motif) -> tuple:
    # canonical ordering: bounded motifs first in (++, +-, -+, --) order,
    # then divergent, then asymptote motifs, each in the same sign order.
    kind_rank = {BOUNDED: 0, DIVERGENT: 1, ASYMPTOTE: 2}[m.kind]
    return (kind_rank, -m.mon, -m.curv)


#: The ten legal motifs in canonical order.
MOTIFS: tuple[Motif, ...] = tuple(
    sorted(
        [
            Motif(m, c, k)
            for k in _KINDS
            for m in (1, -1)
            for c in (1, -1)
            if not (k == ASYMPTOTE and (m, c) not in ((1, -1), (-1, 1)))
        ],
        key=_sign_order,
    )
)

MOTIF_INDEX = {m: i for i, m in enumerate(MOTIFS)}

BOUNDED_MOTIFS = tuple(m for m in MOTIFS if m.bounded)
UNBOUNDED_MOTIFS = tuple(m for m in MOTIFS if not m.bounded)


def transition_kind(left: Motif, right: Motif) -> str:
    """Classify the transition between two adjacent motifs.

    Exactly one of the two signs may flip.  A monotonicity flip is a local
    extremum; it additionally requires the curvature to be the same on both
    sides and consistent with the extremum type (concave at a maximum,
    convex at a minimum).  A curvature flip is an inflection point and
    requires the monotonicity to be unchanged.
    """
    mon_flip = left.mon != right.mon
    curv_flip = left.curv != right.curv
    if mon_flip and not curv_flip:
        want = -1 if left.mon > 0 else 1  # maximum -> concave, minimum -> convex
        if left.curv != want:
            raise StructuralError(
                f"extremum between {left} and {right} needs curvature {want:+d}"
            )
        return EXTREMUM
    if curv_flip and not mon_flip:
        return INFLECTION
    raise StructuralError(
        f"adjacent motifs {left} and {right} must differ in exactly one sign"
    )


@dataclass(frozen=True)
class Composition:
    """A minimal motif sequence: bounded motifs followed by one unbounded."""

    motifs: tuple[Motif, ...]

    def __post_init__(self):
        ms = tuple(self.motifs)
        object.__setattr__(self, "motifs", ms)
        if not ms:
            raise StructuralError("composition must contain at least one motif")
        if any(m.bounded for m in ms[-1:]):
            raise StructuralError("last motif must be unbounded")
        if any(not m.bounded for m in ms[:-1]):
            raise StructuralError("only the last motif may be unbounded")
        for a, b in zip(ms, ms[1:]):
            transition_kind(a, b)  # raises on an illegal pair

    # -- structure ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self.motifs)

    def __iter__(self):
        return iter(self.motifs)

    @property
    def bounded_motifs(self) -> tuple[Motif, ...]:
        return self.motifs[:-1]

    @property
    def tail_motif(self) -> Motif:
        return self.motifs[-1]

    @property
    def n_points(self) -> int:
        """Number of transition points (bounded motifs + 1)."""
        return len(self.motifs)

    def transitions(self) -> tuple[str, ...]:
        """Kinds of the internal transition points t_1 .. t_end."""
        return tuple(transition_kind(a, b) for a, b in zip(self.motifs, self.motifs[1:]))

    @property
    def end_transition(self) -> str | None:
        """Kind of the transition into the unbounded motif, None if the
        composition is a lone unbounded motif."""
        ts = self.transitions()
        return ts[-1] if ts else None

    def sort_key(self) -> tuple[int, ...]:
        return tuple(MOTIF_INDEX[m] for m in self.motifs)

    # -- serialization -----------------------------------------------------

    @staticmethod
    def parse(text: str) -> "Composition":
        return Composition(tuple(Motif.parse(tok) for tok in text.split(",")))

    def __str__(self) -> str:
        return ",".join(str(m) for m in self.motifs)

    def __repr__(self) -> str:
        return f"Composition({self})"


def successors(motif: Motif) -> tuple[Motif, ...]:
    """All motifs that may legally follow ``motif`` in a composition."""
    out = []
    for cand in MOTIFS:
        try:
            transition_kind(motif, cand)
        except StructuralError:
            continue
        out.append(cand)
    return tuple(out)


def enumerate_compositions(
    max_motifs: int,
    last_motif: Motif | None = None,
    first_motif: Motif | None = None,
    forbidden: Iterable[Motif] = (),
) -> list[Composition]:
    """All compositions with at most ``max_motifs`` motifs, in canonical
    (lexicographic over motif indices) order.

    Filters: ``last_motif`` pins the unbounded motif, ``first_motif`` pins
    the opening motif, and ``forbidden`` removes motifs entirely.  An empty
    result is legal (the caller gets to decide whether that is a problem).
    """
    if max_motifs < 1:
        raise StructuralError("max_motifs must be >= 1")
    banned = set(forbidden)
    results: list[Composition] = []

    def extend(prefix: tuple[Motif, ...]):
        last = prefix[-1]
        if not last.bounded:
            comp = Composition(prefix)
            if last_motif is not None and comp.tail_motif != last_motif:
                return
            results.append(comp)
            return
        if len(prefix) == max_motifs:
            return
        for nxt in successors(last):
            if nxt not in banned:
                extend(prefix + (nxt,))

    starts = [first_motif] if first_motif is not None else list(MOTIFS)
    for start in starts:
        if start in banned:
            continue
        extend((start,))

    results.sort(key=Composition.sort_key)
    return results


# ---------------------------------------------------------------------------
# Properties


GAMMA = "gamma_star"
ASYM = "h"
T_HALF = "t_half"

#: Margin factor of the reachable half-time over the tangent-line bound for
#: asymptote tails; see ``validate_semantics``.
HALF_TIME_FACTOR = math.log(3.0)


@dataclass(frozen=True)
class PropertySet:
    """Quantitative properties attached to one composition.

    ``t``/``x`` are the transition-point coordinates (length =
    ``composition.n_points``), ``d1_start`` the first derivative at the
    first point, ``d1_end``/``d2_end`` the derivatives at the last point,
    and ``tail`` the motif-specific tail properties (``gamma_star`` for
    divergent motifs, ``h`` and ``t_half`` for asymptote motifs).
    """

    t: np.ndarray
    x: np.ndarray
    d1_start: float
    d1_end: float
    d2_end: float
    tail: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    @property
    def x_end(self) -> float:
        return float(self.x[-1])

    def to_dict(self) -> dict:
        d = {
            "t": [float(v) for v in self.t],
            "x": [float(v) for v in self.x],
            "d1_start": float(self.d1_start),
            "d1_end": float(self.d1_end),
            "d2_end": float(self.d2_end),
        }
        d.update({k: float(v) for k, v in self.tail.items()})
        return d

    @staticmethod
    def from_dict(d: dict) -> "PropertySet":
        tail = {k: d[k] for k in (GAMMA, ASYM, T_HALF) if k in d}
        return PropertySet(
            np.asarray(d["t"], dtype=float),
            np.asarray(d["x"], dtype=float),
            float(d["d1_start"]),
            float(d["d1_end"]),
            float(d["d2_end"]),
            tail,
        )


@dataclass(frozen=True)
class SemanticRep:
    """A composition together with a matching property set."""

    composition: Composition
    properties: PropertySet

    def to_dict(self) -> dict:
        return {"composition": str(self.composition), "properties": self.properties.to_dict()}

    @staticmethod
    def from_dict(d: dict) -> "SemanticRep":
        return SemanticRep(Composition.parse(d["composition"]), PropertySet.from_dict(d["properties"]))


@dataclass(frozen=True)
class ValidityReport:
    ok: bool
    violations: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def _tail_half_time_floor(x_end: float, h: float, d1_end: float) -> float:
    """Earliest half-time offset the asymptote-tail construction supports.

    The sigmoid-of-spline tail starts on the tangent with slope ``d1_end``
    and can only decelerate (its warp spline is concave), so the midpoint
    between ``x_end`` and ``h`` cannot be reached before
    ``log(3) * |x_end - h| / (2 |d1_end|)`` after the last transition.
    """
    return HALF_TIME_FACTOR * abs(x_end - h) / (2.0 * abs(d1_end))


def validate_semantics(c: Composition, p: PropertySet) -> ValidityReport:
    """Check that ``p`` is a legal property set for composition ``c``.

    Returns an OK report if every invariant holds, otherwise the list of
    violated rules.  Length mismatches and non-finite numbers are reported
    the same way (callers that prefer exceptions can raise on ``not ok``).
    """
    bad: list[str] = []
    n = c.n_points
    if len(p.t) != n or len(p.x) != n:
        return ValidityReport(False, (f"expected {n} transition points, got t:{len(p.t)} x:{len(p.x)}",))

    values = [*p.t, *p.x, p.d1_start, p.d1_end, p.d2_end, *p.tail.values()]
    if not np.all(np.isfinite(values)):
        return ValidityReport(False, ("non-finite value in property set",))

    if not np.all(np.diff(p.t) > 0):
        bad.append("t coordinates must be strictly increasing")

    for i, m in enumerate(c.bounded_motifs):
        if (p.x[i + 1] - p.x[i]) * m.mon <= 0:
            bad.append(f"x step {i} does not match motif {m} monotonicity")

    tail = c.tail_motif
    end_kind = c.end_transition

    if end_kind == EXTREMUM:
        if p.d1_end != 0.0:
            bad.append("d1_end must be 0 at an extremum transition")
        if p.d2_end * tail.curv <= 0:
            bad.append("d2_end sign must match tail curvature at an extremum transition")
    elif end_kind == INFLECTION:
        if p.d2_end != 0.0:
            bad.append("d2_end must be 0 at an inflection transition")
        if p.d1_end * tail.mon <= 0:
            bad.append("d1_end sign must match tail monotonicity at an inflection transition")
    else:  # lone unbounded motif
        if p.d1_start != p.d1_end:
            bad.append("d1_start must equal d1_end for a lone unbounded motif")
        if tail.kind == DIVERGENT and tail.mon == tail.curv:
            # exponential-like tails accept a vanishing derivative as long as
            # the other one still drives the shape
            if p.d1_end * tail.mon < 0 or p.d2_end * tail.curv < 0:
                bad.append("end derivative signs must match the tail motif")
            if p.d1_end == 0.0 and p.d2_end == 0.0:
                bad.append("tail needs at least one non-zero end derivative")
        else:
            if p.d1_end * tail.mon <= 0:
                bad.append("d1_end sign must match tail monotonicity")
            if p.d2_end != 0.0:
                bad.append("d2_end is structurally 0 for this tail motif")

    if tail.kind == DIVERGENT:
        if tail.mon != tail.curv and p.d2_end != 0.0:
            bad.append("d2_end is structurally 0 for log-like divergent tails")
        g = p.tail.get(GAMMA)
        if g is None:
            bad.append("divergent tail needs a gamma_star property")
        elif g <= 0:
            bad.append("gamma_star must be > 0")
    else:
        h = p.tail.get(ASYM)
        th = p.tail.get(T_HALF)
        if h is None or th is None:
            bad.append("asymptote tail needs h and t_half properties")
        else:
            if (p.x_end - h) * (-tail.mon) <= 0:
                side = "below" if tail.mon < 0 else "above"
                bad.append(f"asymptote must lie {side} the last transition value")
            if th <= p.t_end:
                bad.append("t_half must come after the last transition")
            elif p.d1_end * tail.mon > 0 and (p.x_end - h) * (-tail.mon) > 0:
                floor = _tail_half_time_floor(p.x_end, h, p.d1_end)
                if th - p.t_end < floor:
                    bad.append(
                        "t_half is unreachable: the tail cannot fall to the midpoint "
                        f"before t_end + {floor:.6g} given d1_end"
                    )

    if len(c) >= 2 and not bad:
        try:
            lo, hi = derivative_start_range(c, p)
        except StructuralError as exc:
            bad.append(str(exc))
        else:
            if not (lo < p.d1_start < hi):
                bad.append(f"d1_start must lie strictly inside ({lo:.6g}, {hi:.6g})")

    return ValidityReport(not bad, tuple(bad))


# Allowed start-derivative intervals in units of the first secant slope
# kappa, keyed by (mon, curv, transition kind at t_1).
_D1_RANGE_KAPPA = {
    (1, 1, INFLECTION): (0.0, 1.0),
    (1, -1, EXTREMUM): (1.5, 3.0),
    (1, -1, INFLECTION): (1.0, 3.0),
    (-1, 1, EXTREMUM): (3.0, 1.5),
    (-1, 1, INFLECTION): (3.0, 1.0),
    (-1, -1, INFLECTION): (1.0, 0.0),
}


def derivative_range(first_motif: Motif, t1_kind: str, kappa: float) -> tuple[float, float]:
    """Open interval of start derivatives that keep the first cubic piece on
    shape, given the secant slope ``kappa`` to the next transition point.

    ``t1_kind`` is the nature of the second transition point (extremum or
    inflection).  Raises for pairings the shape grammar cannot produce.
    """
    if not first_motif.bounded:
        raise StructuralError("start-derivative ranges only apply to bounded motifs")
    if not math.isfinite(kappa):
        raise NumericError("kappa must be finite")
    if kappa * first_motif.mon <= 0:
        raise StructuralError("kappa sign must match the first motif monotonicity")
    key = (first_motif.mon, first_motif.curv, t1_kind)
    if key not in _D1_RANGE_KAPPA:
        raise StructuralError(f"illegal pair ({first_motif}, {t1_kind})")
    a, b = _D1_RANGE_KAPPA[key]
    lo, hi = a * kappa, b * kappa
    return (lo, hi) if lo < hi else (hi, lo)


def derivative_start_range(c: Composition, p: PropertySet) -> tuple[float, float]:
    """Start-derivative interval for a composition with >= 1 bounded motif."""
    if len(c) < 2:
        raise StructuralError("composition has no bounded motif")
    kappa = (p.x[1] - p.x[0]) / (p.t[1] - p.t[0])
    return derivative_range(c.motifs[0], c.transitions()[0], kappa)
