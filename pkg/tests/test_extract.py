"""Finite-difference shape extraction on known functions."""

import numpy as np
import pytest

from semode import AmbiguityError, extract_semantics, extract_shape


def test_sine_composition_and_transitions():
    ts = np.linspace(0, 2 * np.pi, 4001)
    motifs, cuts = extract_semantics(ts, np.sin(ts))
    assert [str(m) for m in motifs] == ["+-b", "--b", "-+b"]
    # final segment (convex increasing) belongs to whatever follows the window
    assert len(cuts) == 3
    assert np.allclose(cuts, [np.pi / 2, np.pi, 3 * np.pi / 2], atol=2 * (ts[1] - ts[0]))


def test_exponential_decay_single_segment():
    ts = np.linspace(0, 1, 3000)
    motifs, cuts = extract_semantics(ts, np.exp(-ts))
    assert motifs == ()
    assert cuts == ()
    shape = extract_shape(ts, np.exp(-ts))
    assert shape.segments == ((-1, 1),)


def test_straight_line_is_ambiguous():
    ts = np.linspace(0, 1, 3000)
    with pytest.raises(AmbiguityError):
        extract_semantics(ts, ts.copy())


def test_flat_region_reported_in_shape():
    ts = np.linspace(0, 2, 4001)
    # (t-1)^3 + t is increasing and concave until t=1, then a straight line
    xs = np.where(ts < 1.0, (ts - 1.0) ** 3, 0.0) + ts
    shape = extract_shape(ts, xs)
    assert shape.segments == ((1, -1), (1, 0))
    assert shape.transitions == pytest.approx((1.0,), abs=2 * (ts[1] - ts[0]))


def test_logistic_shape():
    ts = np.linspace(0, 10, 5001)
    xs = 2.0 / (1.0 + np.exp(-(ts - 4.0)))
    shape = extract_shape(ts, xs)
    assert shape.segments == ((1, 1), (1, -1))
    assert shape.transitions == pytest.approx((4.0,), abs=2 * (ts[1] - ts[0]))


def test_non_uniform_grid_rejected():
    ts = np.concatenate([np.linspace(0, 1, 100), np.linspace(1.01, 3, 50)])
    with pytest.raises(Exception):
        extract_shape(ts, np.sin(ts))
