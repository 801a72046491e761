"""Smooth trajectory predictor used at inference.

Instead of stitching cubics with continuity constraints, the spline's
second derivative is fitted directly: a continuous piecewise-linear
function over the transition points plus one extra knot per motif, then
integrated twice.  Smoothness is automatic; shape control reduces to sign
bounds on the knot values.  The free knots and values are optimized until
the transition points are hit within a threshold, with a fallback to the
fast per-motif construction when the search fails.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .cubic import CubicSpline, PiecewiseLinear, integrate_twice
from .errors import DomainError
from .semantics import EXTREMUM, INFLECTION, Composition, PropertySet, validate_semantics
from .traj_c0 import BoundedTrajectory, predict_c0

DEFAULT_THRESHOLD = 1e-3
DEFAULT_PENALTY = 1e6
_SIGMA_MARGIN = 1e-3
_SIGN_EPS_FACTOR = 1e-8

EXACT = "exact"
FALLBACK = "fallback_c0"


@dataclass
class C2FitProblem:
    """Parametrization of the second-derivative fit for one ``(c, p)``.

    Knots alternate fixed transition points (even indices) and free
    midpoints (odd indices).  Values are fixed at inflection points and at
    the last transition point, determined just before every transition with
    a specified first derivative, and free elsewhere under a sign bound
    matching the local curvature.
    """

    composition: Composition
    properties: PropertySet
    n_points: int
    curv_interval: np.ndarray        # curvature sign per motif interval
    fixed_values: dict               # value index -> imposed value
    determined: list                 # (value index, specified point index)
    free_values: list                # value indices optimized directly
    value_signs: np.ndarray          # required sign per value index (0 = none)
    d1_targets: dict                 # point index -> specified first derivative

    @property
    def n_knots(self) -> int:
        return 2 * self.n_points - 1

    @property
    def n_parameters(self) -> int:
        # knots + values + two integration constants
        return 2 * self.n_knots + 2

    @property
    def n_trainable(self) -> int:
        return (self.n_points - 1) + len(self.free_values)

    @property
    def n_fixed(self) -> int:
        return self.n_parameters - self.n_trainable


def build_problem(c: Composition, p: PropertySet) -> C2FitProblem:
    n = c.n_points
    if n < 2:
        raise DomainError("the C2 fit needs at least one bounded motif")
    kinds = c.transitions()
    curv = np.array([m.curv for m in c.bounded_motifs])

    # first-derivative targets: t_0, internal extrema, and t_end
    d1_targets = {0: float(p.d1_start), n - 1: float(p.d1_end)}
    for i in range(1, n - 1):
        if kinds[i - 1] == EXTREMUM:
            d1_targets[i] = 0.0

    fixed = {2 * (n - 1): float(p.d2_end)}
    for i in range(1, n - 1):
        if kinds[i - 1] == INFLECTION:
            fixed[2 * i] = 0.0

    determined = [(2 * i - 1, i) for i in sorted(d1_targets) if i > 0]

    signs = np.zeros(2 * n - 1)
    signs[0] = curv[0]
    for i in range(1, n - 1):
        if 2 * i not in fixed:
            signs[2 * i] = curv[i - 1]  # extremum: same curvature both sides
    for i in range(n - 1):
        signs[2 * i + 1] = curv[i]

    det_idx = {d for d, _ in determined}
    free_vals = [k for k in range(2 * n - 1) if k not in fixed and k not in det_idx]

    return C2FitProblem(c, p, n, curv, fixed, determined, free_vals, signs, d1_targets)


def _assemble(problem: C2FitProblem, sigma: np.ndarray, free: np.ndarray):
    """Knot and value arrays from the free parameters; determined values are
    solved so every specified first derivative is hit exactly."""
    p = problem.properties
    n = problem.n_points
    knots = np.empty(2 * n - 1)
    knots[0::2] = p.t
    knots[1::2] = p.t[:-1] + sigma * np.diff(p.t)

    v = np.zeros(2 * n - 1)
    for idx, val in problem.fixed_values.items():
        v[idx] = val
    for idx, val in zip(problem.free_values, free):
        v[idx] = val

    # walk the specified points left to right, solving the odd value just
    # before each one from the exact trapezoid integral of the second
    # derivative between consecutive specified points
    prev_pt = 0
    for v_idx, pt in problem.determined:
        lo, hi = 2 * prev_pt, 2 * pt
        dts = np.diff(knots[lo : hi + 1])
        vv0 = v[lo : hi + 1].copy()
        vv0[v_idx - lo] = 0.0
        coef = 0.5 * (knots[hi] - knots[hi - 2])
        const = float(np.sum(0.5 * (vv0[1:] + vv0[:-1]) * dts))
        target = problem.d1_targets[pt] - problem.d1_targets[prev_pt]
        v[v_idx] = (target - const) / coef
        prev_pt = pt
    return knots, v


def _spline(problem: C2FitProblem, knots: np.ndarray, v: np.ndarray) -> CubicSpline:
    p = problem.properties
    return integrate_twice(PiecewiseLinear(knots, v), float(p.d1_start), float(p.x[0]))


def _evaluate(problem: C2FitProblem, spline: CubicSpline, ref_d1: dict, penalty: float):
    p = problem.properties
    n = problem.n_points
    r_val = spline(p.t[1:]) - p.x[1:]
    hinge = 0.0
    for i, ref in ref_d1.items():
        hinge += max(0.0, -float(spline(p.t[i], order=1)) * ref)
    return float(np.sum(r_val**2) + penalty * hinge), np.abs(r_val), hinge


def _reference_derivatives(problem: C2FitProblem, c0: BoundedTrajectory) -> dict:
    """First derivatives of the fast predictor at internal inflection
    points; they carry the monotonicity sign the smooth fit must keep."""
    kinds = problem.composition.transitions()
    refs = {}
    for i in range(1, problem.n_points - 1):
        if kinds[i - 1] == INFLECTION:
            refs[i] = float(c0(problem.properties.t[i], order=1))
    return refs


def predict_c2(
    c: Composition,
    p: PropertySet,
    threshold: float = DEFAULT_THRESHOLD,
    penalty: float = DEFAULT_PENALTY,
    seed: int = 0,
    max_iter: int = 300,
):
    """Twice continuously differentiable bounded part, or the fast
    construction when the smooth fit cannot hit the transition points.

    Returns ``(bounded_part, status)`` where status is ``"exact"`` (smooth
    spline, transition residuals within ``threshold``) or
    ``"fallback_c0"``.  A lone unbounded motif yields ``(None, "exact")``.
    """
    if threshold <= 0:
        raise DomainError("threshold must be > 0")
    report = validate_semantics(c, p)
    if not report.ok:
        raise DomainError("; ".join(report.violations))
    if c.n_points == 1:
        return None, EXACT

    c0 = predict_c0(c, p, check=False)
    problem = build_problem(c, p)
    refs = _reference_derivatives(problem, c0)

    # scale for the sign-bound margins, from the fast construction's
    # curvature magnitudes
    grid = np.linspace(p.t[0], p.t[-1], 64)
    vscale = max(1.0, float(np.max(np.abs(c0(grid, order=2))))) if len(c0.pieces) else 1.0
    eps = _SIGN_EPS_FACTOR * vscale

    n_sigma = problem.n_points - 1
    bounds = [( _SIGMA_MARGIN, 1.0 - _SIGMA_MARGIN)] * n_sigma
    for idx in problem.free_values:
        s = problem.value_signs[idx]
        bounds.append((eps, None) if s > 0 else (None, -eps))

    def unpack(theta):
        return theta[:n_sigma], theta[n_sigma:]

    def objective(theta):
        knots, v = _assemble(problem, *unpack(theta))
        loss, _, _ = _evaluate(problem, _spline(problem, knots, v), refs, penalty)
        return loss

    def accept(theta):
        knots, v = _assemble(problem, *unpack(theta))
        spline = _spline(problem, knots, v)
        _, r_val, hinge = _evaluate(problem, spline, refs, penalty)
        if np.max(r_val) > threshold or hinge > 0.0:
            return None
        d1_err = max(
            abs(float(spline(p.t[i], order=1)) - t) for i, t in problem.d1_targets.items()
        )
        if d1_err > threshold:
            return None
        # determined values must respect the curvature sign too
        for idx, _ in problem.determined:
            if v[idx] * problem.value_signs[idx] < 1e-12 * vscale:
                return None
        return spline

    def c0_values(knots):
        out = np.empty(len(problem.free_values))
        for j, idx in enumerate(problem.free_values):
            val = float(c0(min(max(knots[idx], p.t[0]), p.t[-1]), order=2))
            s = problem.value_signs[idx]
            if val * s < eps * 10:
                val = s * max(abs(val), 0.1 * vscale)
            out[j] = val
        return out

    rng = np.random.default_rng(seed)
    starts = []
    for base_sigma in (0.5, 1.0 / 3.0):
        sigma = np.full(n_sigma, base_sigma)
        knots, _ = _assemble(problem, sigma, np.zeros(len(problem.free_values)))
        starts.append(np.concatenate([sigma, c0_values(knots)]))
    jitter = starts[0].copy()
    jitter[:n_sigma] = np.clip(jitter[:n_sigma] + rng.uniform(-0.2, 0.2, n_sigma), 0.05, 0.95)
    jitter[n_sigma:] *= np.exp(rng.uniform(-0.5, 0.5, len(problem.free_values)))
    starts.append(jitter)

    for x0 in starts:
        for method in ("L-BFGS-B", "Powell"):
            res = minimize(objective, x0, method=method, bounds=bounds, options={"maxiter": max_iter})
            spline = accept(res.x)
            if spline is not None:
                return spline, EXACT
            x0 = res.x  # hand the partial progress to the next method

    return c0, FALLBACK
