"""Smooth predictor: parametrization bookkeeping, exactness, fallback."""

import numpy as np
import pytest

from semode import Composition, PropertySet
from semode.semantics import GAMMA, enumerate_compositions
from semode.traj_c2 import EXACT, FALLBACK, build_problem, predict_c2
from semode.trajectory import assemble_c2

from helpers import random_properties, roundtrip_conforms


def test_four_motif_parameter_counting():
    # bounded prefix +-b,--b,-+b,++b: 9 knots, 20 parameters, 12 fixed,
    # 8 trainable (v0, t1, v2, t3, v3, t5, v6, t7)
    c = Composition.parse("+-b,--b,-+b,++b,+-h")
    rng = np.random.default_rng(0)
    p = random_properties(c, rng)
    prob = build_problem(c, p)
    assert prob.n_knots == 9
    assert prob.n_parameters == 20
    assert prob.n_fixed == 12
    assert prob.n_trainable == 8
    assert prob.free_values == [0, 2, 3, 6]  # plus the four odd knots
    assert set(prob.fixed_values) == {4, 8}
    assert prob.fixed_values[4] == 0.0  # inflection point
    assert [idx for idx, _ in prob.determined] == [1, 5, 7]
    # sign bounds: curvature is negative over the first three intervals
    assert prob.value_signs[0] == -1 and prob.value_signs[2] == -1 and prob.value_signs[3] == -1
    assert prob.value_signs[6] == 1


def test_single_motif_parameter_counting():
    # one bounded motif ending in a maximum: 3 knots; fixed t0, t2,
    # v2 = d2_end, c, d; v1 determined by the vanishing end derivative;
    # free: t1 and v0
    c = Composition.parse("+-b,--u")
    p = PropertySet([0.0, 1.0], [0.0, 1.0], 2.0, 0.0, -2.0, {GAMMA: 1.0})
    prob = build_problem(c, p)
    assert prob.n_knots == 3
    assert prob.n_parameters == 8
    assert prob.free_values == [0]
    assert [idx for idx, _ in prob.determined] == [1]
    assert prob.fixed_values == {2: -2.0}
    assert prob.n_trainable == 2
    assert prob.n_fixed == 6


def test_exact_fit_properties():
    rng = np.random.default_rng(42)
    lib = [c for c in enumerate_compositions(3) if len(c) >= 2]
    n_exact = 0
    for k in range(12):
        c = lib[rng.integers(len(lib))]
        p = random_properties(c, rng)
        spline, status = predict_c2(c, p, threshold=1e-3, seed=0)
        if status != EXACT:
            continue
        n_exact += 1
        # transition residuals within threshold
        assert np.max(np.abs(spline(p.t[1:]) - p.x[1:])) <= 1e-3
        # twice continuously differentiable across every knot
        for piece_l, piece_r in zip(spline.pieces, spline.pieces[1:]):
            t = piece_l.b
            for order in (0, 1, 2):
                assert piece_l(t, order) == pytest.approx(piece_r(t, order), abs=1e-10)
        # end derivatives anchored to the stored properties
        assert spline(p.t_end, 1) == pytest.approx(p.d1_end, abs=1e-3)
        assert spline(p.t_end, 2) == pytest.approx(p.d2_end, abs=1e-9)
    assert n_exact >= 8  # the smooth fit should succeed most of the time


def test_exact_output_conforms():
    rng = np.random.default_rng(77)
    lib = [c for c in enumerate_compositions(3) if len(c) >= 2]
    checked = 0
    for k in range(10):
        c = lib[rng.integers(len(lib))]
        p = random_properties(c, rng)
        traj = assemble_c2(c, p, seed=0)
        if traj.status != "c2":
            continue
        checked += 1
        ok, shape = roundtrip_conforms(c, p, traj)
        assert ok, f"{c}: got {shape.segments}"
    assert checked >= 6


def test_fallback_contract():
    c = Composition.parse("+-b,--b,-+h")
    rng = np.random.default_rng(5)
    p = random_properties(c, rng)
    out, status = predict_c2(c, p, threshold=1e-15, max_iter=2, seed=0)
    assert status == FALLBACK
    from semode.traj_c0 import predict_c0

    ref = predict_c0(c, p)
    ts = np.linspace(p.t[0], p.t_end, 50)
    assert np.allclose(out(ts), ref(ts), atol=0)


def test_lone_motif_empty():
    c = Composition.parse("-+h")
    p = PropertySet([0.0], [1.0], -1.0, -1.0, 0.0, {"h": 0.0, "t_half": 1.0})
    out, status = predict_c2(c, p)
    assert out is None and status == EXACT


def test_determinism():
    c = Composition.parse("+-b,--b,-+h")
    rng = np.random.default_rng(9)
    p = random_properties(c, rng)
    a, sa = predict_c2(c, p, seed=3)
    b, sb = predict_c2(c, p, seed=3)
    assert sa == sb
    for pa, pb in zip(a.pieces, b.pieces):
        assert (pa.c3, pa.c2, pa.c1, pa.c0) == (pb.c3, pb.c2, pb.c1, pb.c0)


def test_threshold_validation():
    c = Composition.parse("+-b,--u")
    p = PropertySet([0.0, 1.0], [0.0, 1.0], 2.0, 0.0, -2.0, {GAMMA: 1.0})
    with pytest.raises(Exception):
        predict_c2(c, p, threshold=0.0)
