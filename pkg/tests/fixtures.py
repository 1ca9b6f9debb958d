"""Shared fixture builders: the big-M max system and friends."""

from fractions import Fraction

from linred.lang import Comparison, Max, Var, VarDecl
from linred.reduction import Reduction

F = Fraction


def max_decls(lo, hi, kind="real"):
    lo, hi = F(lo), F(hi)
    return (VarDecl("a", kind, lo, hi),
            VarDecl("b", kind, lo, hi),
            VarDecl("c", kind, lo, hi))


def max_predicate():
    return Comparison("=", Var("c"), Max((Var("a"), Var("b"))))


def big_m_max_reduction(M) -> Reduction:
    """The (5,2) system for c = max(a,b): valid when M exceeds the box reach.

    Rows over columns (a, b, c, u1, u2, 1):
      a - c <= 0
      b - c <= 0
      c - a - (1-u1)M <= 0
      c - b - (1-u2)M <= 0
      1 - u1 - u2 <= 0
    """
    M = F(M)
    z = F(0)
    rows = (
        (F(1), z, F(-1), z, z, z),
        (z, F(1), F(-1), z, z, z),
        (F(-1), z, F(1), M, z, -M),
        (z, F(-1), F(1), z, M, -M),
        (z, z, z, F(-1), F(-1), F(1)),
    )
    return Reduction(("a", "b", "c"), 2, rows)


def drop_cover_row(reduction: Reduction) -> Reduction:
    """Delete the u1 + u2 >= 1 row (the last one): a completeness hole."""
    return Reduction(reduction.variables, reduction.aux_count,
                     reduction.rows[:-1])
