"""Learning the composition map: per-sample composition scores and an
optimal partition of the initial-condition axis into branches.

Every sample is scored against every library composition by fitting that
composition's properties to the sample alone (bounded quasi-Newton in raw
space, which keeps every iterate valid).  A segment dynamic program then
picks at most I branches with distinct neighbouring compositions, minimum
span and minimum occupancy, minimizing the summed scores.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import torch

from .difftraj import T_END_MARGIN, DifferentiableTrajectory, PropertyRanges, RawLayout, initial_raw
from .errors import DomainError
from .semantics import Composition

#: fallback score for property fits that fail numerically
SENTINEL_FACTOR = 1e6

#: minimum branch width as a fraction of the x0 range
MIN_SPAN_FRACTION = 0.10
#: minimum number of samples per branch
MIN_SAMPLES = 2


@dataclass(frozen=True)
class FitConfig:
    """Knobs of the per-sample property search used for scoring."""

    max_iter: int = 400
    seed: int = 0
    #: retry placements (as last-transition-time fractions of the window)
    #: for samples whose transition structure the initializer cannot find
    t_end_restarts: tuple = (0.15,)
    #: when positive, every k-th observation (at each offset below) is held
    #: out of the property fit and scored instead; compositions that tie at
    #: the noise floor are then separated by generalization rather than by
    #: how much noise their parameter count can memorize
    holdout_stride: int = 5
    holdout_offsets: tuple = (1, 3)
    #: rows scoring this many times the batch median get retried from
    #: alternative starting points
    outlier_factor: float = 5.0


@dataclass
class LossTable:
    """Per-sample, per-composition scores (samples sorted by x0).

    ``solutions`` optionally keeps the fitted raw property vectors per
    composition, so later stages can reuse the per-sample search results.
    """

    x0s: np.ndarray
    compositions: list
    losses: np.ndarray  # [D, C]
    solutions: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.losses.shape != (len(self.x0s), len(self.compositions)):
            raise DomainError("loss table shape mismatch")
        if not np.all(np.isfinite(self.losses)) or np.any(self.losses < 0):
            raise DomainError("loss table entries must be finite and non-negative")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id", "x0", *[str(c) for c in self.compositions]])
            for i, x0 in enumerate(self.x0s):
                writer.writerow([i, repr(float(x0)), *[repr(float(v)) for v in self.losses[i]]])


@dataclass(frozen=True)
class CompositionMap:
    """Piecewise-constant map from x0 to a composition.

    ``boundaries`` are the k-1 branch edges; a point exactly on a boundary
    belongs to the branch on its left, and points outside the training range
    clamp to the nearest branch.
    """

    boundaries: np.ndarray
    compositions: tuple
    x_range: tuple

    def __post_init__(self):
        object.__setattr__(self, "boundaries", np.asarray(self.boundaries, dtype=float))
        object.__setattr__(self, "compositions", tuple(self.compositions))
        if len(self.boundaries) != len(self.compositions) - 1:
            raise DomainError("need one boundary less than branches")
        if len(self.boundaries) and not np.all(np.diff(self.boundaries) > 0):
            raise DomainError("boundaries must be strictly increasing")
        for a, b in zip(self.compositions, self.compositions[1:]):
            if a == b:
                raise DomainError("adjacent branches must carry different compositions")

    def predict(self, x0: float) -> Composition:
        idx = int(np.searchsorted(self.boundaries, x0, side="left"))
        return self.compositions[idx]

    def branch_interval(self, i: int) -> tuple:
        lo = self.x_range[0] if i == 0 else float(self.boundaries[i - 1])
        hi = self.x_range[1] if i == len(self.compositions) - 1 else float(self.boundaries[i])
        return lo, hi

    def to_dict(self) -> dict:
        return {
            "branches": [
                {
                    "upper_bound": float(self.boundaries[i]) if i < len(self.boundaries) else None,
                    "composition": str(c),
                }
                for i, c in enumerate(self.compositions)
            ],
            "x_range": [float(self.x_range[0]), float(self.x_range[1])],
        }

    @staticmethod
    def from_dict(d: dict) -> "CompositionMap":
        comps = [Composition.parse(b["composition"]) for b in d["branches"]]
        bounds = [b["upper_bound"] for b in d["branches"] if b["upper_bound"] is not None]
        return CompositionMap(np.asarray(bounds, dtype=float), comps, tuple(d["x_range"]))


def _fit_raw_batch(dt, raw0: np.ndarray, tts, tys, max_iter: int, fit_mask: np.ndarray):
    """Optimize per-sample raw properties on the masked-in observations.

    Returns (fit mse, held-out mse, solution) per sample."""
    raw = torch.tensor(raw0, requires_grad=True)
    fit_idx = torch.tensor(np.flatnonzero(fit_mask))
    out_idx = torch.tensor(np.flatnonzero(~fit_mask))
    opt = torch.optim.LBFGS(
        [raw],
        lr=1.0,
        max_iter=max_iter,
        history_size=30,
        line_search_fn="strong_wolfe",
        tolerance_grad=1e-11,
        tolerance_change=1e-13,
    )

    def closure():
        opt.zero_grad()
        vals, _ = dt.values(raw, tts[:, fit_idx])
        mse = ((vals - tys[:, fit_idx]) ** 2).mean(dim=1)
        # log keeps the per-sample argmins while decoupling the samples:
        # otherwise one badly-fitting sample dominates the shared line
        # search and starves the rest of refinement
        loss = torch.log(mse + 1e-14).sum()
        loss.backward()
        return loss

    try:
        opt.step(closure)
    except RuntimeError:
        pass
    with torch.no_grad():
        vals, _ = dt.values(raw, tts)
        sq = (vals - tys) ** 2
        fit_mse = sq[:, fit_idx].mean(dim=1).numpy()
        out_mse = sq[:, out_idx].mean(dim=1).numpy() if len(out_idx) else fit_mse
    return fit_mse, out_mse, raw.detach().numpy()


def score_samples(
    c: Composition,
    ts: np.ndarray,
    ys: np.ndarray,
    ranges: PropertyRanges,
    config: FitConfig = FitConfig(),
    return_solution: bool = False,
):
    """Best-found per-sample score for composition ``c``.

    ``ts``/``ys`` are [D, N]; all samples are fitted jointly (their losses
    are independent, so the batched quasi-Newton search just shares the
    iteration schedule).  Multi-motif compositions get extra starts with
    earlier transition placements, because the best split of the window is
    the one raw coordinate the data-driven start cannot guess.

    The reported score is the mean squared error of the best-found property
    fit on observations held out of that fit (every ``holdout_stride``-th
    point).  Numerical failures score a large sentinel.  With
    ``return_solution`` the fitted raw matrix comes back too.
    """
    ts = np.atleast_2d(ts)
    ys = np.atleast_2d(ys)
    D, N = ys.shape
    if N < 2:
        raise DomainError("samples need at least 2 observations")
    sentinel = SENTINEL_FACTOR * max(float(np.var(ys)), 1e-12)

    dt = DifferentiableTrajectory(c, ranges)
    layout = RawLayout.for_composition(c)
    rows, missing = [], []
    for i in range(D):
        info: dict = {}
        rows.append(initial_raw(c, ranges, ts[i], ys[i], info))
        missing.append(not info.get("transitions_found", True))
    raw0 = np.stack(rows)
    missing = np.asarray(missing)
    tts = torch.tensor(ts)
    tys = torch.tensor(ys)
    full_mask = np.ones(N, dtype=bool)

    # stage 1: converge the in-sample fit, trying alternative placements for
    # samples whose transition structure was invisible and fresh starts for
    # stray line-search failures
    fit, _, solution = _fit_raw_batch(dt, raw0, tts, tys, config.max_iter, full_mask)

    def improve(alt_init, rows_sel, iters):
        nonlocal fit, solution
        alt = solution.copy()
        alt[rows_sel] = alt_init[rows_sel]
        new_fit, _, new_sol = _fit_raw_batch(dt, alt, tts, tys, iters, full_mask)
        better = new_fit < fit
        fit = np.where(better, new_fit, fit)
        solution[better] = new_sol[better]

    if c.n_points >= 2 and missing.any():
        for frac in config.t_end_restarts:
            alt = raw0.copy()
            u = (frac - T_END_MARGIN) / (1.0 - T_END_MARGIN)
            alt[:, layout.slices["t_end"]] = math.log(max(u, 1e-9) / max(1.0 - u, 1e-9))
            improve(alt, missing, config.max_iter)

    med = float(np.median(fit))
    bad = fit > max(config.outlier_factor * med, 1e-12)
    if bad.any():
        rng = np.random.default_rng(config.seed)
        improve(np.broadcast_to(initial_raw(c, ranges), raw0.shape).copy(), bad, config.max_iter)
        jitter = raw0 + rng.normal(scale=0.5, size=raw0.shape)
        improve(jitter, bad, config.max_iter)

    # stage 2: short warm-started refits with observations held out; the
    # held-out error separates compositions that tie at the noise floor
    if config.holdout_stride > 0 and N >= 2 * config.holdout_stride:
        fold_scores = []
        for off in config.holdout_offsets:
            mask = np.ones(N, dtype=bool)
            mask[off :: config.holdout_stride] = False
            _, out_mse, _ = _fit_raw_batch(
                dt, solution, tts, tys, max(config.max_iter // 2, 100), mask
            )
            fold_scores.append(out_mse)
        score = np.mean(fold_scores, axis=0)
    else:
        score = fit

    score = np.where(np.isfinite(score), score, sentinel)
    score = np.minimum(score, sentinel)
    if return_solution:
        return score, solution
    return score


def build_loss_table(
    x0s: np.ndarray,
    ts: np.ndarray,
    ys: np.ndarray,
    library: list,
    ranges: PropertyRanges,
    config: FitConfig = FitConfig(),
) -> LossTable:
    """Score every sample against every library composition (sorted by x0)."""
    order = np.argsort(x0s, kind="stable")
    x0s = np.asarray(x0s, dtype=float)[order]
    ts = np.atleast_2d(ts)[order]
    ys = np.atleast_2d(ys)[order]
    losses, solutions = [], {}
    for c in library:
        score, sol = score_samples(c, ts, ys, ranges, config, return_solution=True)
        losses.append(score)
        solutions[str(c)] = sol
    return LossTable(x0s, list(library), np.stack(losses, axis=1), solutions)


def _branch_edges(x0s: np.ndarray, j: int, i: int) -> tuple:
    """Midpoint edges of the branch covering sorted samples [j, i)."""
    lo = float(x0s[0]) if j == 0 else 0.5 * (x0s[j - 1] + x0s[j])
    hi = float(x0s[-1]) if i == len(x0s) else 0.5 * (x0s[i - 1] + x0s[i])
    return lo, hi


def solve_partition(table: LossTable, max_branches: int) -> tuple:
    """Optimal constrained partition by dynamic programming.

    Returns (segments, compositions) where segments are (start, stop) index
    pairs over the sorted samples.  Ties break toward fewer branches, then
    the lexicographically smaller composition-index sequence.
    """
    x0s, losses = table.x0s, table.losses
    D, C = losses.shape
    if D < MIN_SAMPLES:
        raise DomainError(f"need at least {MIN_SAMPLES} samples")
    if max_branches < 1:
        raise DomainError("need at least one branch")
    if max_branches * MIN_SAMPLES > D:
        warnings.warn(
            f"{max_branches} branches cannot all hold {MIN_SAMPLES} samples with D={D}; "
            "the effective maximum is lower",
            stacklevel=2,
        )

    x_range = float(x0s[-1] - x0s[0])
    min_span = MIN_SPAN_FRACTION * x_range - 1e-12
    prefix = np.vstack([np.zeros(C), np.cumsum(losses, axis=0)])

    def seg_ok(j, i):
        if i - j < MIN_SAMPLES:
            return False
        lo, hi = _branch_edges(x0s, j, i)
        return (hi - lo) >= min_span

    # dp[b][i][c] = (cost, seq): best cover of sorted samples [0, i) with b
    # branches, the last carrying composition index c; seq is the branch
    # composition sequence, used for deterministic tie-breaking
    dp = [None] * (max_branches + 1)
    dp[0] = {0: {None: (0.0, ())}}
    best_final = None

    for b in range(1, max_branches + 1):
        layer: dict = {}
        for j, by_comp in dp[b - 1].items():
            # the best and runner-up source states let us exclude one
            # composition in O(1) when enforcing distinct neighbours
            ranked = sorted(by_comp.items(), key=lambda kv: kv[1])
            best1 = ranked[0]
            best2 = ranked[1] if len(ranked) > 1 else None
            for i in range(j + MIN_SAMPLES, D + 1):
                if not seg_ok(j, i):
                    continue
                seg_costs = prefix[i] - prefix[j]
                dest = layer.setdefault(i, {})
                for ci in range(C):
                    src = best1 if best1[0] != ci else best2
                    if src is None:
                        continue
                    pcost, pseq = src[1]
                    cand = (pcost + seg_costs[ci], pseq + (ci,))
                    cur = dest.get(ci)
                    if cur is None or cand < cur:
                        dest[ci] = cand
        dp[b] = layer
        if D in layer:
            for ci, (cost, seq) in layer[D].items():
                cand = (cost, len(seq), seq)
                if best_final is None or cand < best_final:
                    best_final = cand

    if best_final is None:
        raise DomainError("no feasible partition under the span/occupancy constraints")

    _, _, seq = best_final
    segs = _recover_segments(table, seq, prefix, seg_ok)
    comps = [table.compositions[ci] for ci in seq]
    return segs, comps


def _recover_segments(table: LossTable, seq: tuple, prefix: np.ndarray, seg_ok) -> list:
    """Find split positions achieving the optimal cost for a fixed branch
    composition sequence (exhaustive over split placements, small depth)."""
    D = len(table.x0s)
    k = len(seq)
    best = (float("inf"), None)

    def rec(seg_idx, start, cuts, cost):
        nonlocal best
        if seg_idx == k - 1:
            if seg_ok(start, D):
                total = cost + (prefix[D] - prefix[start])[seq[seg_idx]]
                if total < best[0]:
                    best = (total, cuts)
            return
        for stop in range(start + 1, D):
            if not seg_ok(start, stop):
                continue
            rec(
                seg_idx + 1,
                stop,
                cuts + (stop,),
                cost + (prefix[stop] - prefix[start])[seq[seg_idx]],
            )

    rec(0, 0, (), 0.0)
    if best[1] is None:
        raise DomainError("internal: could not recover segments")
    cuts = [0, *best[1], D]
    return [(cuts[i], cuts[i + 1]) for i in range(k)]


def fit_composition_map(
    x0s: np.ndarray,
    ts: np.ndarray,
    ys: np.ndarray,
    library: list,
    max_branches: int,
    ranges: PropertyRanges,
    config: FitConfig = FitConfig(),
    table: LossTable | None = None,
) -> tuple:
    """Learn the branch structure; returns (CompositionMap, LossTable).

    Branch boundaries are placed midway between the neighbouring samples of
    different branches.
    """
    if not library:
        raise DomainError("empty composition library")
    if table is None:
        table = build_loss_table(x0s, ts, ys, library, ranges, config)
    segments, comps = solve_partition(table, max_branches)
    boundaries = [0.5 * (table.x0s[stop - 1] + table.x0s[stop]) for _, stop in segments[:-1]]
    cmap = CompositionMap(
        np.asarray(boundaries), comps, (float(table.x0s[0]), float(table.x0s[-1]))
    )
    return cmap, table
