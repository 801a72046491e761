"""Property transforms and sub-map training."""

import math

import numpy as np
import pytest
import torch

from semode.difftraj import (
    DifferentiableTrajectory,
    PropertyRanges,
    RawLayout,
    training_loss,
)
from semode.propmap import BasisSet, PropertySubMap, raw_to_properties, raw_to_properties_batch
from semode.semantics import Composition, enumerate_compositions, validate_semantics
from semode.training import SubmapHyperparams, fit_property_submap
from semode.trajectory import assemble_c0


RANGES = PropertyRanges(0.0, 5.0)


def test_equal_interval_logits_split_evenly():
    c = Composition.parse("+-b,--b,-+h")  # three transition points
    layout = RawLayout.for_composition(c)
    raw = np.zeros(layout.size)
    # force t_end = 1.0: sigmoid(u) = (1/5 - margin)/(1 - margin)
    u = (1.0 / 5.0 - 0.05) / 0.95
    raw[layout.slices["t_end"]] = math.log(u / (1 - u))
    p = raw_to_properties(raw, c, RANGES)
    assert p.t_end == pytest.approx(1.0)
    assert p.t[1] == pytest.approx(0.5)  # two equal softmax fractions
    assert p.t[2] == pytest.approx(1.0)


def test_softplus_and_sigmoid_anchors():
    c = Composition.parse("++b,+-h")
    layout = RawLayout.for_composition(c)
    raw = np.zeros(layout.size)
    p = raw_to_properties(raw, c, RANGES)
    # zero raw x-step gives softplus(0) = ln 2
    assert p.x[1] - p.x[0] == pytest.approx(math.log(2.0))
    # zero raw start-derivative raw sits mid-range: (0, kappa) -> kappa/2
    kappa = (p.x[1] - p.x[0]) / (p.t[1] - p.t[0])
    assert p.d1_start == pytest.approx(0.5 * kappa)


def test_totality_randomized():
    rng = np.random.default_rng(0)
    for c in enumerate_compositions(3):
        raws = rng.normal(scale=3.0, size=(500, RawLayout.for_composition(c).size))
        for p in raw_to_properties_batch(raws, c, RANGES):
            report = validate_semantics(c, p)
            assert report.ok, f"{c}: {report.violations}"


def test_pinned_property_bypasses_raw_path():
    c = Composition.parse("+-b,--b,-+h")
    layout = RawLayout.for_composition(c)
    rng = np.random.default_rng(3)
    for _ in range(10):
        raw = rng.normal(size=layout.size)
        p = raw_to_properties(raw, c, RANGES, pins={"h": 0.0})
        assert p.tail["h"] == 0.0


def test_bounded_property_clamped():
    c = Composition.parse("+-h")
    layout = RawLayout.for_composition(c)
    rng = np.random.default_rng(4)
    for _ in range(10):
        raw = rng.normal(scale=4.0, size=layout.size)
        p = raw_to_properties(raw, c, RANGES, bounds={"x_start": (0.5, 1.5)})
        assert 0.5 <= p.x[0] <= 1.5


def test_torch_forward_matches_object_path():
    rng = np.random.default_rng(11)
    ts = np.linspace(0, 5, 41)
    for c in enumerate_compositions(3):
        layout = RawLayout.for_composition(c)
        raw = rng.normal(size=(3, layout.size))
        dt = DifferentiableTrajectory(c, RANGES)
        with torch.no_grad():
            vals, _ = dt.values(torch.tensor(raw), torch.tensor(ts[None, :].repeat(3, 0)))
        for i in range(3):
            p = raw_to_properties(raw[i], c, RANGES)
            ref = assemble_c0(c, p)(ts)
            assert np.max(np.abs(vals.numpy()[i] - ref)) < 1e-9


def test_gradient_matches_finite_differences():
    torch.manual_seed(0)
    rng = np.random.default_rng(1)
    for code in ("++b,+-h", "+-b,--b,-+h", "-+h"):
        c = Composition.parse(code)
        layout = RawLayout.for_composition(c)
        dt = DifferentiableTrajectory(c, RANGES)
        basis = BasisSet(0.5, 3.5)
        D = 10
        x0s = np.linspace(0.5, 3.5, D)
        B = torch.tensor(basis.design_matrix(x0s))
        ts = torch.tensor(np.tile(np.linspace(0, 5, 20), (D, 1)))
        ys = torch.tensor(rng.normal(size=(D, 20)))
        W = torch.tensor(rng.normal(scale=0.5, size=(6, layout.size)), requires_grad=True)
        loss, _ = training_loss(dt, B @ W, ts, ys, 0.01, 1e-4)
        loss.backward()
        g = W.grad.numpy()
        Wn = W.detach().numpy()
        for _ in range(20):
            i, j = rng.integers(6), rng.integers(layout.size)
            h = 1e-5 * max(1.0, abs(Wn[i, j]))
            Wp, Wm = Wn.copy(), Wn.copy()
            Wp[i, j] += h
            Wm[i, j] -= h
            lp, _ = training_loss(dt, B @ torch.tensor(Wp), ts, ys, 0.01, 1e-4)
            lm, _ = training_loss(dt, B @ torch.tensor(Wm), ts, ys, 0.01, 1e-4)
            fd = (float(lp) - float(lm)) / (2 * h)
            rel = abs(fd - g[i, j]) / max(abs(fd), abs(g[i, j]), 1e-8)
            assert rel < 1e-4, f"{code} d/dW[{i},{j}]: fd={fd} grad={g[i, j]}"


def _toy_submap_dataset(c, W_true, x0s, obs, basis):
    raws = basis.design_matrix(x0s) @ W_true
    ys = []
    for i, x0 in enumerate(x0s):
        p = raw_to_properties(raws[i], c, RANGES)
        ys.append(assemble_c0(c, p)(obs))
    return np.tile(obs, (len(x0s), 1)), np.stack(ys)


def test_fit_recovers_smooth_property_map():
    # noiseless data generated by a smooth ground-truth property map must
    # train down to tiny error within the default iteration budget
    c = Composition.parse("+-h")
    basis = BasisSet(0.5, 2.5)
    layout = RawLayout.for_composition(c)
    rng = np.random.default_rng(8)
    W_true = np.zeros((basis.size, layout.size))
    W_true[0] = rng.normal(scale=0.4, size=layout.size)
    W_true[1] = [1.0, 0.3, -0.2, 0.1]
    x0s = np.linspace(0.5, 2.5, 40)
    obs = np.linspace(0, 5, 20)
    ts, ys = _toy_submap_dataset(c, W_true, x0s, obs, basis)
    submap, val = fit_property_submap(
        x0s, ts, ys, c, RANGES, SubmapHyperparams(learning_rate=0.8, max_iters=200)
    )
    dtj = submap.pipeline()
    with torch.no_grad():
        vals, _ = dtj.values(torch.tensor(submap.raw(x0s)), torch.tensor(ts))
    mse = float(((vals.numpy() - ys) ** 2).mean())
    assert mse < 1e-4
    assert val < 1e-4


def test_zero_iterations_returns_initialization():
    c = Composition.parse("+-h")
    x0s = np.linspace(0.5, 2.5, 10)
    obs = np.linspace(0, 5, 12)
    ys = np.tile(np.linspace(1.0, 2.0, 12), (10, 1))
    w0 = np.zeros((6, RawLayout.for_composition(c).size))
    submap, _ = fit_property_submap(
        x0s, np.tile(obs, (10, 1)), ys, c, RANGES,
        SubmapHyperparams(max_iters=0), w_init=w0,
    )
    assert np.array_equal(submap.weights, w0)


def test_submap_needs_two_samples():
    c = Composition.parse("+-h")
    with pytest.raises(Exception):
        fit_property_submap(
            np.array([1.0]), np.array([[0.0, 1.0]]), np.array([[1.0, 2.0]]), c, RANGES
        )


def test_properties_are_continuous_in_x0():
    c = Composition.parse("++b,+-h")
    basis = BasisSet(0.0, 2.0)
    rng = np.random.default_rng(2)
    W = rng.normal(scale=0.5, size=(basis.size, RawLayout.for_composition(c).size))
    submap = PropertySubMap(c, basis, W, RANGES)
    grid = np.linspace(0.0, 2.0, 201)
    props = [submap.properties(float(v)) for v in grid]
    for getter in (lambda p: p.t[1], lambda p: p.x[1], lambda p: p.d1_start, lambda p: p.tail["h"]):
        vals = np.array([getter(p) for p in props])
        steps = np.abs(np.diff(vals))
        scale = max(1.0, np.max(np.abs(vals)))
        assert np.max(steps) < 0.05 * scale  # no jumps on a fine grid
