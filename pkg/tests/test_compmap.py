"""Composition-map learning: DP vs exhaustive enumeration, branch rules."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semode.compmap import (
    MIN_SAMPLES,
    MIN_SPAN_FRACTION,
    CompositionMap,
    LossTable,
    _branch_edges,
    build_loss_table,
    fit_composition_map,
    solve_partition,
)
from semode.difftraj import PropertyRanges
from semode.semantics import Composition, PropertySet
from semode.trajectory import assemble_c0


def brute_force_partition(table: LossTable, max_branches: int):
    """Exhaustive search over split placements and branch compositions with
    the same constraints and tie-breaking as the dynamic program."""
    x0s, losses = table.x0s, table.losses
    D, C = losses.shape
    prefix = np.vstack([np.zeros(C), np.cumsum(losses, axis=0)])
    x_range = float(x0s[-1] - x0s[0])
    min_span = MIN_SPAN_FRACTION * x_range - 1e-12

    def seg_ok(j, i):
        if i - j < MIN_SAMPLES:
            return False
        lo, hi = _branch_edges(x0s, j, i)
        return (hi - lo) >= min_span

    best = None
    for k in range(1, max_branches + 1):
        for cuts in itertools.combinations(range(1, D), k - 1):
            edges = [0, *cuts, D]
            if not all(seg_ok(edges[i], edges[i + 1]) for i in range(k)):
                continue
            for comps in itertools.product(range(C), repeat=k):
                if any(a == b for a, b in zip(comps, comps[1:])):
                    continue
                cost = sum(
                    (prefix[edges[i + 1]] - prefix[edges[i]])[comps[i]] for i in range(k)
                )
                cand = (cost, k, comps, tuple(edges))
                if best is None or cand[:3] < best[:3]:
                    best = cand
    return best


def _table(rng, D, C):
    x0s = np.sort(rng.uniform(0, 10, size=D))
    comps = [Composition.parse(s) for s in ["+-h", "-+h", "++u", "--u"][:C]]
    losses = rng.uniform(0.0, 2.0, size=(D, C))
    return LossTable(x0s, comps, losses)


@pytest.mark.parametrize("seed", range(12))
def test_dp_equals_brute_force(seed):
    rng = np.random.default_rng(seed)
    D = int(rng.integers(4, 13))
    C = int(rng.integers(2, 5))
    I = int(rng.integers(1, 4))
    table = _table(rng, D, C)
    segs, comps = solve_partition(table, I)
    ref = brute_force_partition(table, I)
    got_cost = sum(
        table.losses[a:b, table.compositions.index(c)].sum() for (a, b), c in zip(segs, comps)
    )
    assert got_cost == pytest.approx(ref[0], abs=1e-12)
    assert len(comps) == ref[1]
    assert tuple(table.compositions.index(c) for c in comps) == ref[2]


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_dp_equals_brute_force_hypothesis(seed):
    rng = np.random.default_rng(seed)
    table = _table(rng, int(rng.integers(4, 11)), int(rng.integers(2, 4)))
    I = int(rng.integers(1, 4))
    segs, comps = solve_partition(table, I)
    ref = brute_force_partition(table, I)
    got_cost = sum(
        table.losses[a:b, table.compositions.index(c)].sum() for (a, b), c in zip(segs, comps)
    )
    assert got_cost == pytest.approx(ref[0], abs=1e-12)


def test_two_group_example_splits_in_the_middle():
    # six samples, two compositions: the first three favor A by 1.0 each,
    # the last three favor B; the best 2-branch partition cuts after #3
    comps = [Composition.parse("+-h"), Composition.parse("-+h")]
    losses = np.array([[0.0, 1.0]] * 3 + [[1.0, 0.0]] * 3)
    table = LossTable(np.arange(6, dtype=float), comps, losses)
    segs, chosen = solve_partition(table, 2)
    assert segs == [(0, 3), (3, 6)]
    assert [str(c) for c in chosen] == ["+-h", "-+h"]


def test_single_branch_takes_column_minimum():
    rng = np.random.default_rng(1)
    table = _table(rng, 10, 4)
    segs, chosen = solve_partition(table, 1)
    assert segs == [(0, 10)]
    best_col = int(np.argmin(table.losses.sum(axis=0)))
    assert chosen[0] == table.compositions[best_col]


def test_monotone_improvement_with_more_branches():
    rng = np.random.default_rng(2)
    table = _table(rng, 12, 3)

    def cost(I):
        segs, comps = solve_partition(table, I)
        return sum(
            table.losses[a:b, table.compositions.index(c)].sum()
            for (a, b), c in zip(segs, comps)
        )

    assert cost(2) <= cost(1) + 1e-12
    assert cost(3) <= cost(2) + 1e-12


def test_span_constraint_blocks_thin_branches():
    # two clusters of x0 hugging the ends: a middle branch would be too thin
    comps = [Composition.parse("+-h"), Composition.parse("-+h")]
    x0s = np.array([0.0, 0.01, 0.02, 9.98, 9.99, 10.0])
    losses = np.array([[0.0, 1.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 0.0]])
    table = LossTable(x0s, comps, losses)
    segs, chosen = solve_partition(table, 3)
    # the interior cut at index 2 is span-infeasible (branch of width 0.005),
    # so the partition falls back to the wide split
    for (a, b) in segs:
        lo, hi = _branch_edges(x0s, a, b)
        assert hi - lo >= MIN_SPAN_FRACTION * 10.0 - 1e-9


def test_occupancy_warning():
    rng = np.random.default_rng(3)
    table = _table(rng, 4, 2)
    with pytest.warns(UserWarning):
        solve_partition(table, 3)


def test_branch_prediction_rules():
    cmap = CompositionMap(
        np.array([1.4, 2.8]),
        (Composition.parse("++b,+-h"), Composition.parse("+-h"), Composition.parse("-+h")),
        (0.2, 4.0),
    )
    assert str(cmap.predict(0.5)) == "++b,+-h"
    assert str(cmap.predict(1.4)) == "++b,+-h"  # boundary goes left
    assert str(cmap.predict(1.41)) == "+-h"
    assert str(cmap.predict(-5.0)) == "++b,+-h"  # clamps below
    assert str(cmap.predict(99.0)) == "-+h"  # clamps above


def test_adjacent_branches_must_differ():
    c = Composition.parse("+-h")
    with pytest.raises(Exception):
        CompositionMap(np.array([1.0]), (c, c), (0.0, 2.0))


def test_map_round_trip():
    cmap = CompositionMap(
        np.array([1.4]),
        (Composition.parse("++b,+-h"), Composition.parse("+-h")),
        (0.2, 4.0),
    )
    back = CompositionMap.from_dict(cmap.to_dict())
    assert back.compositions == cmap.compositions
    assert np.array_equal(back.boundaries, cmap.boundaries)


def test_scoring_separates_true_composition():
    ranges = PropertyRanges(0.0, 5.0)
    c = Composition.parse("+-h")
    p = PropertySet([0.0], [1.0], 0.5, 0.5, 0.0, {"h": 2.0, "t_half": 2.5})
    ts = np.linspace(0, 5, 20)
    ys = assemble_c0(c, p)(ts)
    table = build_loss_table(
        np.array([1.0]), ts[None, :], ys[None, :],
        [c, Composition.parse("-+h")], ranges,
    )
    assert table.losses[0, 0] < 1e-6
    assert table.losses[0, 1] > 100 * table.losses[0, 0]


def test_single_observation_rejected():
    ranges = PropertyRanges(0.0, 5.0)
    with pytest.raises(Exception):
        build_loss_table(
            np.array([1.0]), np.array([[0.0]]), np.array([[1.0]]),
            [Composition.parse("+-h")], ranges,
        )


def test_permutation_invariance():
    ranges = PropertyRanges(0.0, 5.0)
    rng = np.random.default_rng(0)
    x0s = np.linspace(0.5, 3.0, 8)
    ts = np.tile(np.linspace(0, 5, 12), (8, 1))
    ys = np.cumsum(rng.uniform(0.01, 0.1, size=(8, 12)), axis=1) + x0s[:, None]
    lib = [Composition.parse("+-h"), Composition.parse("++u")]
    cm1, _ = fit_composition_map(x0s, ts, ys, lib, 2, ranges)
    perm = rng.permutation(8)
    cm2, _ = fit_composition_map(x0s[perm], ts[perm], ys[perm], lib, 2, ranges)
    assert cm1.compositions == cm2.compositions
    assert np.allclose(cm1.boundaries, cm2.boundaries)


def test_loss_table_csv(tmp_path):
    rng = np.random.default_rng(5)
    table = _table(rng, 5, 2)
    path = tmp_path / "scores.csv"
    table.to_csv(path)
    text = path.read_text().splitlines()
    assert text[0].startswith("sample_id,x0,")
    assert len(text) == 6
