"""Gradient-based fitting of property sub-maps.

The weight matrix of a sub-map is optimized with full-batch L-BFGS through
the differentiable trajectory forward pass, with early stopping on an
internal validation split and (optionally) a log-uniform random search over
the learning rate and the end-derivative penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import torch

from .difftraj import (
    DifferentiableTrajectory,
    PropertyRanges,
    RawLayout,
    initial_raw,
    training_loss,
)
from .errors import ConvergenceError, DomainError
from .propmap import BasisSet, PropertySubMap
from .semantics import Composition

__all__ = [
    "SubmapHyperparams",
    "TuningConfig",
    "fit_property_submap",
    "tune_property_submap",
    "initial_weights",
]


@dataclass(frozen=True)
class SubmapHyperparams:
    learning_rate: float = 0.5
    derivative_penalty: float = 0.01
    end_derivative_penalty: float = 1e-6
    max_iters: int = 200
    patience: int = 8
    val_fraction: float = 0.2
    seed: int = 0


@dataclass(frozen=True)
class TuningConfig:
    trials: int = 20
    lr_range: tuple = (1e-4, 1.0)
    end_penalty_range: tuple = (1e-9, 1e-1)
    seed: int = 0


def _val_split(x0s: np.ndarray, fraction: float, seed: int) -> tuple:
    """Deterministic x0-stratified split: sort by x0 and send every k-th
    sample (with a seeded offset) to validation."""
    D = len(x0s)
    order = np.argsort(x0s, kind="stable")
    k = max(2, int(round(1.0 / max(fraction, 1e-9))))
    offset = seed % k
    val_mask = np.zeros(D, dtype=bool)
    val_mask[order[offset::k]] = True
    if val_mask.all() or not val_mask.any():
        val_mask[:] = False
        val_mask[order[::2]] = True
    return ~val_mask, val_mask


def initial_weights(
    c: Composition,
    basis: BasisSet,
    x0s: np.ndarray,
    ts: np.ndarray,
    ys: np.ndarray,
    ranges: PropertyRanges,
) -> np.ndarray:
    """Zero weights except: the constant row carries the average data-driven
    raw initialization, and the identity row seeds x(t_0) ~= x0."""
    layout = RawLayout.for_composition(c)
    W = np.zeros((basis.size, layout.size))
    raw0 = np.mean([initial_raw(c, ranges, ts[i], ys[i]) for i in range(len(x0s))], axis=0)
    W[0, :] = raw0
    xs = layout.slices["x_start"].start
    W[1, xs] = 1.0
    W[0, xs] = float(np.mean([ys[i][0] for i in range(len(x0s))]) - np.mean(x0s))
    return W


def fit_property_submap(
    x0s: np.ndarray,
    ts: np.ndarray,
    ys: np.ndarray,
    c: Composition,
    ranges: PropertyRanges,
    hyper: SubmapHyperparams = SubmapHyperparams(),
    basis: BasisSet | None = None,
    pins: dict | None = None,
    bounds: dict | None = None,
    w_init: np.ndarray | None = None,
    extra_inits: tuple = (),
) -> tuple:
    """Fit one sub-map on its assigned samples; returns (submap, val_mse).

    The subset is split again into train/validation parts; optimization runs
    in chunks with early stopping on the validation trajectory error, and
    the best-seen weights are kept.  An explicit ``w_init`` replaces the
    default starting points; ``extra_inits`` are tried in addition to them.
    """
    x0s = np.asarray(x0s, dtype=float)
    ts = np.atleast_2d(np.asarray(ts, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    D = len(x0s)
    if D < 2:
        raise DomainError("need at least 2 samples to fit a property sub-map")
    if basis is None:
        basis = BasisSet(float(np.min(x0s)), float(np.max(x0s)))

    train_mask, val_mask = _val_split(x0s, hyper.val_fraction, hyper.seed)
    if train_mask.sum() < 2:
        train_mask[:] = True

    dt = DifferentiableTrajectory(c, ranges, pins, bounds)
    layout = RawLayout.for_composition(c)
    B = torch.tensor(basis.design_matrix(x0s))
    tts = torch.tensor(ts) if ts.shape[0] == D else torch.tensor(np.broadcast_to(ts, (D, ts.shape[1])))
    tys = torch.tensor(ys)
    tr = torch.tensor(np.flatnonzero(train_mask))
    va = torch.tensor(np.flatnonzero(val_mask if val_mask.any() else train_mask))

    if w_init is not None:
        candidates = [np.asarray(w_init, dtype=float)]
    else:
        # the data-driven constant row is usually a strong start, but it can
        # park the optimizer in a poor basin; a plain start competes with it
        plain = np.zeros((basis.size, layout.size))
        plain[1, layout.slices["x_start"].start] = 1.0
        candidates = [
            initial_weights(c, basis, x0s[train_mask], ts[train_mask], ys[train_mask], ranges),
            plain,
        ]
    candidates.extend(np.asarray(w, dtype=float) for w in extra_inits)

    def val_mse(W) -> float:
        with torch.no_grad():
            vals, _ = dt.values(B[va] @ W, tts[va])
            return float(((vals - tys[va]) ** 2).mean(dim=1).mean())

    def fit_one(w0: np.ndarray):
        W = torch.tensor(w0, requires_grad=True)
        chunk = 10

        def closure():
            opt.zero_grad()
            loss, _ = training_loss(
                dt,
                B[tr] @ W,
                tts[tr],
                tys[tr],
                derivative_penalty=hyper.derivative_penalty,
                end_derivative_penalty=hyper.end_derivative_penalty,
            )
            loss.backward()
            return loss

        best = (val_mse(W), W.detach().clone())
        stale = 0
        iters_done = 0
        while iters_done < hyper.max_iters:
            opt = torch.optim.LBFGS(
                [W],
                lr=hyper.learning_rate,
                max_iter=chunk,
                history_size=25,
                line_search_fn="strong_wolfe",
                tolerance_grad=1e-12,
                tolerance_change=1e-14,
            )
            try:
                loss = opt.step(closure)
            except RuntimeError:
                break
            if not math.isfinite(float(loss.detach())):
                raise ConvergenceError("training loss diverged")
            iters_done += chunk
            score = val_mse(W)
            if score < best[0] * (1 - 1e-7):
                best = (score, W.detach().clone())
                stale = 0
            else:
                stale += 1
                if stale >= hyper.patience:
                    break
        return best

    best = min((fit_one(w0) for w0 in candidates), key=lambda b: b[0])
    submap = PropertySubMap(c, basis, best[1].numpy(), ranges, dict(pins or {}), dict(bounds or {}))
    return submap, best[0]


def tune_property_submap(
    x0s,
    ts,
    ys,
    c: Composition,
    ranges: PropertyRanges,
    tuning: TuningConfig = TuningConfig(),
    hyper: SubmapHyperparams = SubmapHyperparams(),
    pins: dict | None = None,
    bounds: dict | None = None,
    w_init: np.ndarray | None = None,
    extra_inits: tuple = (),
) -> tuple:
    """Log-uniform random search over (learning rate, end-derivative
    penalty); returns the sub-map with the best validation error.

    Trials share one starting point (ranking hyperparameters does not need
    basin exploration); the winning configuration is refit with the full
    multi-start procedure.
    """
    rng = np.random.default_rng(tuning.seed)
    x0s = np.asarray(x0s, dtype=float)
    ts2 = np.atleast_2d(np.asarray(ts, dtype=float))
    ys2 = np.atleast_2d(np.asarray(ys, dtype=float))
    if w_init is not None:
        trial_init = np.asarray(w_init, dtype=float)
    elif extra_inits:
        trial_init = np.asarray(extra_inits[0], dtype=float)
    else:
        basis = BasisSet(float(np.min(x0s)), float(np.max(x0s)))
        trial_init = initial_weights(c, basis, x0s, ts2, ys2, ranges)

    best = None
    for trial in range(max(tuning.trials, 1)):
        lr = math.exp(rng.uniform(math.log(tuning.lr_range[0]), math.log(tuning.lr_range[1])))
        pen = math.exp(
            rng.uniform(math.log(tuning.end_penalty_range[0]), math.log(tuning.end_penalty_range[1]))
        )
        h = replace(hyper, learning_rate=lr, end_derivative_penalty=pen)
        submap, score = fit_property_submap(
            x0s, ts, ys, c, ranges, h, pins=pins, bounds=bounds, w_init=trial_init
        )
        if best is None or score < best[1]:
            best = (submap, score, {"learning_rate": lr, "end_derivative_penalty": pen})

    h = replace(
        hyper,
        learning_rate=best[2]["learning_rate"],
        end_derivative_penalty=best[2]["end_derivative_penalty"],
    )
    submap, score = fit_property_submap(
        x0s, ts, ys, c, ranges, h, pins=pins, bounds=bounds,
        w_init=w_init, extra_inits=extra_inits,
    )
    if score < best[1]:
        best = (submap, score, best[2])
    return best
