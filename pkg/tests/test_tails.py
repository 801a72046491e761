"""Analytic tails: junction anchoring, shape signs, long-term properties."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from semode import DomainError, Motif, measure_tail_props, predict_tail
from semode.semantics import ASYM, GAMMA, T_HALF
from semode.semantics import _tail_half_time_floor


def random_tail_inputs(motif, rng):
    t_end = rng.uniform(-1.0, 2.0)
    x_end = rng.uniform(-2.0, 2.0)
    if motif.kind == "u" and motif.mon == motif.curv:
        which = rng.integers(3)
        d1 = 0.0 if which == 0 else motif.mon * rng.uniform(0.2, 2.0)
        d2 = 0.0 if which == 1 else motif.curv * rng.uniform(0.2, 2.0)
        props = {GAMMA: rng.uniform(0.3, 4.0)}
    elif motif.kind == "u":
        d1 = motif.mon * rng.uniform(0.2, 2.0)
        d2 = 0.0
        props = {GAMMA: rng.uniform(0.3, 4.0)}
    else:
        d1 = motif.mon * rng.uniform(0.2, 2.0)
        d2 = 0.0
        h = x_end + motif.mon * rng.uniform(0.3, 2.0)
        floor = _tail_half_time_floor(x_end, h, d1)
        props = {ASYM: h, T_HALF: t_end + floor * (1.0 + rng.uniform(0.05, 2.0))}
    return props, t_end, x_end, d1, d2


ALL_UNBOUNDED = ["++u", "--u", "+-u", "-+u", "+-h", "-+h"]


@pytest.mark.parametrize("code", ALL_UNBOUNDED)
def test_junction_matches_to_1e9(code):
    motif = Motif.parse(code)
    rng = np.random.default_rng(abs(hash(code)) % 2**32)
    for _ in range(25):
        props, t_end, x_end, d1, d2 = random_tail_inputs(motif, rng)
        tail = predict_tail(motif, props, t_end, x_end, d1, d2)
        assert tail(t_end, 0) == pytest.approx(x_end, abs=1e-9)
        assert tail(t_end, 1) == pytest.approx(d1, abs=1e-9)
        assert tail(t_end, 2) == pytest.approx(d2, abs=1e-9)


@pytest.mark.parametrize("code", ALL_UNBOUNDED)
def test_shape_signs_on_log_grid(code):
    motif = Motif.parse(code)
    rng = np.random.default_rng(abs(hash("shape" + code)) % 2**32)
    offsets = np.geomspace(1e-6, 1e4, 160)
    for _ in range(15):
        props, t_end, x_end, d1, d2 = random_tail_inputs(motif, rng)
        tail = predict_tail(motif, props, t_end, x_end, d1, d2)
        ts = t_end + offsets
        v1 = tail(ts, 1)
        v2 = tail(ts, 2)
        scale = max(1.0, abs(x_end))
        ok1 = (v1 * motif.mon > 0) | (np.abs(v1) < 1e-12 * scale)
        ok2 = (v2 * motif.curv > 0) | (np.abs(v2) < 1e-12 * scale)
        assert ok1.all(), f"{motif} first-derivative sign broke"
        # degenerate exp tails (one vanishing end derivative) flatten one
        # term; curvature may be exactly 0 but never of the wrong sign
        assert np.all(v2 * motif.curv >= 0) or ok2.all()


def test_asymptote_tail_example():
    motif = Motif.parse("-+h")
    tail = predict_tail(motif, {ASYM: 0.0, T_HALF: 1.0}, 0.0, 1.0, -1.0, 0.0)
    assert tail(0.0) == pytest.approx(1.0)
    assert tail(1.0) == pytest.approx(0.5)  # midpoint hit exactly at t_half
    assert tail.inner.th1 == pytest.approx(2.0)
    assert tail.inner.th2 == pytest.approx(0.0)
    assert float(tail.inner._g(np.array([0.0]), 1)[0]) == pytest.approx(2.0)

    measured = measure_tail_props(tail, span=1.0)
    assert abs(measured[ASYM] - 0.0) < 1e-6
    assert abs(measured[T_HALF] - 1.0) < 1e-6


@pytest.mark.parametrize("code", ["+-h", "-+h"])
def test_midpoint_identity_exact(code):
    motif = Motif.parse(code)
    rng = np.random.default_rng(abs(hash("mid" + code)) % 2**32)
    for _ in range(20):
        props, t_end, x_end, d1, d2 = random_tail_inputs(motif, rng)
        tail = predict_tail(motif, props, t_end, x_end, d1, d2)
        target = 0.5 * (x_end + props[ASYM])
        assert tail(props[T_HALF]) == pytest.approx(target, abs=1e-10)
        # approach to the asymptote is monotone
        ts = props[T_HALF] + np.linspace(0, 50, 200)
        gaps = np.abs(tail(ts) - props[ASYM])
        assert np.all(np.diff(gaps) <= 1e-15)


def test_doubling_time_recovered():
    # data behaving like e^{t ln2 / B} doubles every B
    B = 3.0
    r = math.log(2.0) / B
    tail = predict_tail(Motif.parse("++u"), {GAMMA: B}, 0.0, 1.0, r, r * r)
    measured = measure_tail_props(tail, span=1.0)
    assert abs(measured[GAMMA] - B) <= 0.03 * B

    # direct numeric check of the defining relation at a big horizon
    t = 60.0
    xt = tail(t)
    gamma_t = brentq(lambda g: tail(t + g) - 2 * xt, 0.0, 10 * B)
    assert abs(gamma_t - B) <= 0.01 * B


def test_negative_doubling_time_mirror():
    tail = predict_tail(Motif.parse("--u"), {GAMMA: 2.0}, 0.0, -1.0, -0.3, -0.2)
    measured = measure_tail_props(tail, span=1.0)
    assert abs(measured[GAMMA] - 2.0) <= 0.02 * 2.0


@pytest.mark.parametrize("code,sign", [("+-u", 1.0), ("-+u", -1.0)])
def test_incrementing_factor_limit(code, sign):
    motif = Motif.parse(code)
    rng = np.random.default_rng(4)
    for _ in range(10):
        props, t_end, x_end, d1, d2 = random_tail_inputs(motif, rng)
        tail = predict_tail(motif, props, t_end, x_end, d1, d2)
        t = max(1.0, 2 * abs(t_end) + 1.0) * 1000.0
        gamma_t = sign * (tail(2 * t) - tail(t))
        assert abs(gamma_t - props[GAMMA]) <= 0.01 * props[GAMMA]
        measured = measure_tail_props(tail, span=1.0)
        assert abs(measured[GAMMA] - props[GAMMA]) <= 0.01 * props[GAMMA]


def test_divergence_and_limits():
    up = predict_tail(Motif.parse("+-u"), {GAMMA: 1.0}, 0.0, 0.0, 1.0, 0.0)
    assert up(1e130) > 100.0  # diverges logarithmically
    assert up(1e130) > up(1e60) > up(1e8)
    down = predict_tail(Motif.parse("-+u"), {GAMMA: 1.0}, 0.0, 0.0, -1.0, 0.0)
    assert down(1e130) < -100.0


def test_domain_violations_rejected():
    m = Motif.parse("-+h")
    with pytest.raises(DomainError):
        predict_tail(m, {ASYM: 1.5, T_HALF: 1.0}, 0.0, 1.0, -1.0, 0.0)  # h above x_end
    with pytest.raises(DomainError):
        predict_tail(m, {ASYM: 0.0, T_HALF: -1.0}, 0.0, 1.0, -1.0, 0.0)  # t_half before t_end
    with pytest.raises(DomainError):
        predict_tail(m, {ASYM: 0.0, T_HALF: 1.0}, 0.0, 1.0, 1.0, 0.0)  # wrong slope sign
    with pytest.raises(DomainError):
        predict_tail(Motif.parse("++u"), {GAMMA: -1.0}, 0.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        predict_tail(Motif.parse("++u"), {GAMMA: 1.0}, 0.0, 1.0, 0.0, 0.0)  # both derivatives zero
    with pytest.raises(DomainError):
        predict_tail(Motif.parse("+-u"), {GAMMA: 1.0}, 0.0, 1.0, 1.0, 0.5)  # curvature must be 0


def test_tail_rejects_times_before_anchor():
    tail = predict_tail(Motif.parse("-+h"), {ASYM: 0.0, T_HALF: 1.0}, 0.0, 1.0, -1.0, 0.0)
    with pytest.raises(DomainError):
        tail(-0.5)
