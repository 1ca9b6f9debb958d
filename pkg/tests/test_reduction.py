"""Reduction matrices: satisfaction, encoding checks, padding, interchange."""

import random
from fractions import Fraction

import pytest

from linred.lang import Comparison, Const, Var, VarDecl, bind, eval_predicate
from linred.reduction import (
    DimensionMismatch,
    Reduction,
    aux_vectors,
    encodes_at,
    normalize_reduction,
    pad_duplicate_row,
    pad_zero_aux,
    reduction_from_json,
    reduction_to_json,
    scale_rows,
)

from fixtures import big_m_max_reduction, max_decls, max_predicate

F = Fraction


def _halfspace():
    # X = [[1, 0]] over one variable y: encodes y <= 0
    return Reduction(("y",), 0, ((F(1), F(0)),))


def test_satisfied_by_boundary_and_rejection():
    red = _halfspace()
    assert red.satisfied_by((F(0),), ()) is True  # 0 <= 0 boundary
    assert red.satisfied_by((F(1),), ()) is False
    zero = Reduction(("y",), 1, ((F(0), F(0), F(0)),))
    assert zero.satisfied_by((F(9),), (F(1),)) is True


def test_satisfied_by_dimension_mismatch():
    red = _halfspace()
    with pytest.raises(DimensionMismatch):
        red.satisfied_by((F(0), F(0)), ())
    with pytest.raises(DimensionMismatch):
        red.satisfied_by((F(0),), (F(1),))


def test_construction_validation():
    with pytest.raises(DimensionMismatch):
        Reduction(("y",), 0, ())
    with pytest.raises(DimensionMismatch):
        Reduction(("y",), 0, ((F(1),),))  # width must be m+k+1 = 2
    with pytest.raises(DimensionMismatch):
        Reduction(("y",), -1, ((F(1),),))
    with pytest.raises(DimensionMismatch):
        Reduction(("y",), 0, ((1.0, 0.0),))  # floats rejected


def test_encodes_at_spec_examples():
    decls = (VarDecl("y", "real", F(-1), F(1)),)
    phi = Comparison("<=", Var("y"), Const(F(0)))
    red = _halfspace()
    assert encodes_at(red, decls, phi, (F(-1),)) is True
    assert encodes_at(red, decls, phi, (F(1),)) is True  # both sides false
    zero_row = Reduction(("y",), 0, ((F(0), F(0)),))
    assert encodes_at(zero_row, decls, phi, (F(1),)) is False
    with pytest.raises(DimensionMismatch):
        encodes_at(red, (VarDecl("z", "real", F(0), F(1)),), phi, (F(0),))


def test_holds_at_uses_exists_semantics():
    red = big_m_max_reduction(16)
    # (a,b,c) = (3,5,5): true via u=(0,1), also not under all u
    point = (F(3), F(5), F(5))
    assert red.holds_at(point) is True
    assert red.holds_forall(point) is False
    assert red.satisfied_by(point, (F(0), F(1))) is True
    assert red.satisfied_by(point, (F(1), F(0))) is False


def test_big_m_reduction_agrees_on_grid():
    red = big_m_max_reduction(16)
    decls = max_decls(-5, 5)
    phi = max_predicate()
    values = [F(n) for n in (-5, -2, 0, 3, 5)]
    for a in values:
        for b in values:
            for c in values:
                assert encodes_at(red, decls, phi, (a, b, c)), (a, b, c)


def test_aux_vectors_order():
    assert list(aux_vectors(0)) == [()]
    assert list(aux_vectors(2)) == [
        (F(0), F(0)), (F(0), F(1)), (F(1), F(0)), (F(1), F(1))]


def test_scale_rows_preserves_set():
    rng = random.Random(20240701)
    red = big_m_max_reduction(16)
    factors = tuple(F(rng.randint(1, 9), rng.randint(1, 9))
                    for _ in range(red.row_count))
    scaled = scale_rows(red, factors)
    for _ in range(200):
        point = tuple(F(rng.randint(-20, 20), 4) for _ in range(3))
        assert red.holds_at(point) == scaled.holds_at(point)
    with pytest.raises(ValueError):
        scale_rows(red, (F(0),) * red.row_count)
    with pytest.raises(ValueError):
        scale_rows(red, (F(-1),) * red.row_count)
    with pytest.raises(DimensionMismatch):
        scale_rows(red, (F(1),))


def test_normalize_clears_denominators():
    red = Reduction(("y",), 0, ((F(1, 3), F(-1, 2)), (F(2), F(4)), (F(0), F(0))))
    norm = normalize_reduction(red)
    assert norm.rows == ((F(2), F(-3)), (F(1), F(2)), (F(0), F(0)))
    rng = random.Random(20240702)
    for _ in range(200):
        point = (F(rng.randint(-50, 50), rng.randint(1, 7)),)
        assert red.holds_at(point) == norm.holds_at(point)


def test_padding_preserves_membership():
    rng = random.Random(20240703)
    red = big_m_max_reduction(16)
    dup = pad_duplicate_row(red)
    ext = pad_zero_aux(red)
    assert dup.row_count == red.row_count + 1
    assert ext.aux_count == red.aux_count + 1
    for _ in range(200):
        point = tuple(F(rng.randint(-20, 20), 4) for _ in range(3))
        member = red.holds_at(point)
        assert dup.holds_at(point) == member
        assert ext.holds_at(point) == member


def test_json_round_trip():
    red = big_m_max_reduction(16)
    data = reduction_to_json(red)
    assert data["l"] == 5 and data["k"] == 2 and data["m"] == 3
    assert data["variables"] == ["a", "b", "c"]
    assert data["rows"][0] == ["1", "0", "-1", "0", "0", "0"]
    assert reduction_from_json(data) == red
    fractional = Reduction(("y",), 0, ((F(1, 3), F(-7, 2)),))
    again = reduction_from_json(reduction_to_json(fractional))
    assert again == fractional
    assert reduction_to_json(fractional)["rows"] == [["1/3", "-7/2"]]


def test_json_validation():
    data = reduction_to_json(big_m_max_reduction(16))
    bad_l = dict(data, l=4)
    with pytest.raises(DimensionMismatch):
        reduction_from_json(bad_l)
    bad_m = dict(data, m=2)
    with pytest.raises(DimensionMismatch):
        reduction_from_json(bad_m)
    with pytest.raises(DimensionMismatch):
        reduction_from_json({"l": 1, "k": 0})
    bad_rows = dict(data, rows=[["1", "junk", "0", "0", "0", "0"]] )
    with pytest.raises(DimensionMismatch):
        reduction_from_json(bad_rows)


def test_spec_fixture_truth_table_on_binary_corners():
    # exhaustive agreement at integer corners, exercised through bind/eval
    red = big_m_max_reduction(16)
    decls = max_decls(-5, 5)
    phi = max_predicate()
    for point in [(F(-5), F(5), F(5)), (F(5), F(-5), F(5)), (F(0), F(0), F(0))]:
        assert eval_predicate(phi, bind(decls, point))
        assert red.holds_at(point)
    for point in [(F(-5), F(5), F(-5)), (F(0), F(0), F(1))]:
        assert not eval_predicate(phi, bind(decls, point))
        assert not red.holds_at(point)
