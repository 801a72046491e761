"""Motif vocabulary, composition grammar, and property validation."""

import numpy as np
import pytest

from semode import (
    BOUNDED_MOTIFS,
    MOTIFS,
    UNBOUNDED_MOTIFS,
    Composition,
    Motif,
    PropertySet,
    StructuralError,
    enumerate_compositions,
    successors,
    validate_semantics,
)
from semode.semantics import ASYM, GAMMA, T_HALF, derivative_start_range

from helpers import random_properties


def test_exactly_ten_motifs():
    assert len(MOTIFS) == 10
    assert len(BOUNDED_MOTIFS) == 4
    assert len(UNBOUNDED_MOTIFS) == 6
    asym = [m for m in MOTIFS if m.kind == "h"]
    assert {(m.mon, m.curv) for m in asym} == {(1, -1), (-1, 1)}


def test_illegal_motifs_rejected():
    with pytest.raises(StructuralError):
        Motif(1, 1, "h")
    with pytest.raises(StructuralError):
        Motif(0, 1, "b")
    with pytest.raises(StructuralError):
        Motif.parse("+b")


def test_motif_string_round_trip():
    for m in MOTIFS:
        assert Motif.parse(str(m)) == m


def test_composition_rules():
    Composition.parse("+-b,--b,-+h")  # the drug-concentration shape
    with pytest.raises(StructuralError):
        Composition.parse("+-b")  # must end unbounded
    with pytest.raises(StructuralError):
        Composition.parse("-+h,+-b")  # unbounded must be last
    with pytest.raises(StructuralError):
        Composition.parse("++b,++b,+-h")  # no repeats
    with pytest.raises(StructuralError):
        Composition.parse("++b,--b,-+h")  # double sign flip
    with pytest.raises(StructuralError):
        # an extremum with mismatched curvature on the far side: a maximum
        # must be concave on both sides
        Composition.parse("+-b,-+h")


def test_successors_of_increasing_convex():
    got = {str(m) for m in successors(Motif.parse("++b"))}
    assert got == {"+-b", "+-u", "+-h"}


def test_enumeration_counts():
    lib = enumerate_compositions(3)
    by_len = {}
    for c in lib:
        by_len[len(c)] = by_len.get(len(c), 0) + 1
    assert by_len == {1: 6, 2: 8, 3: 12}
    assert len(lib) == 26
    # deterministic canonical order
    assert [str(c) for c in lib] == [str(c) for c in enumerate_compositions(3)]


def test_enumeration_single_motif():
    lib = enumerate_compositions(1)
    assert [str(c) for c in lib] == ["++u", "+-u", "-+u", "--u", "+-h", "-+h"]


def test_enumeration_filters():
    ends = enumerate_compositions(3, last_motif=Motif.parse("-+h"))
    assert all(str(c.tail_motif) == "-+h" for c in ends)
    assert len(ends) > 0
    nothing = enumerate_compositions(2, first_motif=Motif.parse("++u"), last_motif=Motif.parse("-+h"))
    assert nothing == []  # contradictory filters give an empty library


def test_every_enumerated_composition_is_feasible():
    rng = np.random.default_rng(7)
    for c in enumerate_compositions(3):
        p = random_properties(c, rng)
        assert validate_semantics(c, p).ok


def test_validate_ordering_violation():
    c = Composition.parse("+-b,--u")
    p = PropertySet([1.0, 0.5], [0.0, 1.0], 2.0, 0.0, -2.0, {GAMMA: 1.0})
    report = validate_semantics(c, p)
    assert not report.ok
    assert any("increasing" in v for v in report.violations)


def test_validate_tail_domain_violation():
    c = Composition.parse("--b,-+h")
    p = PropertySet([0.0, 1.0], [2.0, 1.0], -0.5, -0.5, 0.0, {ASYM: 1.5, T_HALF: 2.0})
    report = validate_semantics(c, p)
    assert not report.ok
    assert any("asymptote" in v for v in report.violations)


def test_validate_accepts_consistent_maximum_then_decay():
    # increasing concave to a maximum, concave decay, then convex approach
    # to an asymptote below: a fully consistent pharmacology-style shape
    c = Composition.parse("+-b,--b,-+h")
    rng = np.random.default_rng(0)
    p = random_properties(c, rng)
    assert validate_semantics(c, p).ok


def test_validate_d1_start_range():
    c = Composition.parse("+-b,--u")  # maximum at t_1, kappa = 1
    good = PropertySet([0.0, 1.0], [0.0, 1.0], 2.0, 0.0, -2.0, {GAMMA: 1.0})
    assert validate_semantics(c, good).ok
    lo, hi = derivative_start_range(c, good)
    assert (lo, hi) == (1.5, 3.0)
    for bad_d1 in (1.5, 3.0, 0.5, 4.0):
        bad = PropertySet([0.0, 1.0], [0.0, 1.0], bad_d1, 0.0, -2.0, {GAMMA: 1.0})
        assert not validate_semantics(c, bad).ok


def test_validate_structural_end_derivatives():
    c = Composition.parse("+-b,--u")  # extremum at t_end
    p = PropertySet([0.0, 1.0], [0.0, 1.0], 2.0, 0.5, -2.0, {GAMMA: 1.0})
    assert not validate_semantics(c, p).ok  # d1_end must vanish
    c2 = Composition.parse("--b,-+h")  # inflection at t_end
    p2 = PropertySet([0.0, 1.0], [2.0, 1.0], -0.5, -0.5, -1.0, {ASYM: 0.0, T_HALF: 3.0})
    assert not validate_semantics(c2, p2).ok  # d2_end must vanish


def test_validate_non_finite():
    c = Composition.parse("+-b,--u")
    p = PropertySet([0.0, np.nan], [0.0, 1.0], 2.0, 0.0, -2.0, {GAMMA: 1.0})
    report = validate_semantics(c, p)
    assert not report.ok
    assert any("finite" in v for v in report.violations)


def test_validate_length_mismatch():
    c = Composition.parse("+-b,--u")
    p = PropertySet([0.0, 0.5, 1.0], [0.0, 1.0, 2.0], 2.0, 0.0, -2.0, {GAMMA: 1.0})
    report = validate_semantics(c, p)
    assert not report.ok
