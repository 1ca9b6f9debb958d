"""Candidate linearizations: rational coefficient matrices over [y, u, 1].

A reduction for a predicate over variables y1..ym is an l x (m+k+1) matrix X
with k binary auxiliaries.  Columns are ordered y1..ym, u1..uk, then the
constant.  The encoded set is

    { y : exists u in {0,1}^k with X [y, u, 1]^T <= 0 }

which is what a MILP solver sees after the u become binary decision columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence

from .lang import (
    BoolExpr,
    Valuation,
    VarDecl,
    bind,
    eval_predicate,
    rat_from_str,
    rat_to_str,
)

__all__ = [
    "DimensionMismatch",
    "Reduction",
    "aux_vectors",
    "encodes_at",
    "normalize_reduction",
    "pad_duplicate_row",
    "pad_zero_aux",
    "reduction_from_json",
    "reduction_to_json",
    "scale_rows",
]

_ZERO = Fraction(0)
_ONE = Fraction(1)


class DimensionMismatch(ValueError):
    """A matrix, point, or variable list has the wrong shape."""


@dataclass(frozen=True)
class Reduction:
    """An l x (m+k+1) exact-rational matrix with named problem variables."""

    variables: tuple[str, ...]
    aux_count: int
    rows: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        if self.aux_count < 0:
            raise DimensionMismatch("negative auxiliary count")
        if not self.rows:
            raise DimensionMismatch("a reduction needs at least one row")
        width = len(self.variables) + self.aux_count + 1
        for index, row in enumerate(self.rows):
            if len(row) != width:
                raise DimensionMismatch(
                    f"row {index} has {len(row)} entries, expected {width}")
            for entry in row:
                if not isinstance(entry, Fraction):
                    raise DimensionMismatch(
                        f"row {index} holds {type(entry).__name__}, "
                        "expected Fraction")

    @property
    def var_count(self) -> int:
        return len(self.variables)

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def row_value(self, row: Sequence[Fraction], point: Sequence[Fraction],
                  aux: Sequence[Fraction]) -> Fraction:
        vector = tuple(point) + tuple(aux) + (_ONE,)
        return sum(c * v for c, v in zip(row, vector))

    def satisfied_by(self, point: Sequence[Fraction],
                     aux: Sequence[Fraction]) -> bool:
        """All rows <= 0 at a concrete assignment of y and u."""
        if len(point) != self.var_count or len(aux) != self.aux_count:
            raise DimensionMismatch(
                f"point/aux shape ({len(point)}, {len(aux)}) does not match "
                f"({self.var_count}, {self.aux_count})")
        return all(self.row_value(row, point, aux) <= 0 for row in self.rows)

    def holds_at(self, point: Sequence[Fraction]) -> bool:
        """Encoded-set membership: exists u in {0,1}^k with all rows <= 0."""
        return any(self.satisfied_by(point, aux)
                   for aux in aux_vectors(self.aux_count))

    def holds_forall(self, point: Sequence[Fraction]) -> bool:
        """Literal universal reading over u; kept for the debug schedule only."""
        return all(self.satisfied_by(point, aux)
                   for aux in aux_vectors(self.aux_count))


def aux_vectors(aux_count: int) -> Iterable[Valuation]:
    """All {0,1}^k vectors in lexicographic order."""
    return product((_ZERO, _ONE), repeat=aux_count)


def encodes_at(reduction: Reduction, decls: Sequence[VarDecl],
               predicate: BoolExpr, point: Valuation,
               forall_aux: bool = False) -> bool:
    """Does the reduction agree with the predicate at one point?"""
    if tuple(d.name for d in decls) != reduction.variables:
        raise DimensionMismatch(
            f"reduction variables {reduction.variables} do not match "
            f"declarations {tuple(d.name for d in decls)}")
    truth = eval_predicate(predicate, bind(decls, point))
    held = (reduction.holds_forall(point) if forall_aux
            else reduction.holds_at(point))
    return held == truth


# ---------------------------------------------------------------------------
# Rescaling and padding
# ---------------------------------------------------------------------------

def scale_rows(reduction: Reduction,
               factors: Sequence[Fraction]) -> Reduction:
    """Scale each row by a positive rational; the encoded set is unchanged."""
    if len(factors) != reduction.row_count:
        raise DimensionMismatch("one factor per row required")
    for factor in factors:
        if factor <= 0:
            raise ValueError(f"row scale factors must be positive, got {factor}")
    rows = tuple(tuple(factor * entry for entry in row)
                 for factor, row in zip(factors, reduction.rows))
    return Reduction(reduction.variables, reduction.aux_count, rows)


def _normalize_row(row: tuple[Fraction, ...]) -> tuple[Fraction, ...]:
    denom_lcm = math.lcm(*(entry.denominator for entry in row))
    ints = [entry * denom_lcm for entry in row]
    gcd = math.gcd(*(abs(entry.numerator) for entry in ints))
    if gcd > 1:
        ints = [entry / gcd for entry in ints]
    return tuple(ints)


def normalize_reduction(reduction: Reduction) -> Reduction:
    """Clear denominators row-wise to coprime integers (positive scaling)."""
    return Reduction(reduction.variables, reduction.aux_count,
                     tuple(_normalize_row(row) for row in reduction.rows))


def pad_duplicate_row(reduction: Reduction) -> Reduction:
    """Append a copy of the last row; encodes the same set with l+1 rows."""
    return Reduction(reduction.variables, reduction.aux_count,
                     reduction.rows + (reduction.rows[-1],))


def pad_zero_aux(reduction: Reduction) -> Reduction:
    """Add an unused auxiliary column; encodes the same set with k+1 aux."""
    rows = tuple(row[:-1] + (_ZERO, row[-1]) for row in reduction.rows)
    return Reduction(reduction.variables, reduction.aux_count + 1, rows)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

def reduction_to_json(reduction: Reduction) -> dict:
    return {
        "l": reduction.row_count,
        "k": reduction.aux_count,
        "m": reduction.var_count,
        "variables": list(reduction.variables),
        "rows": [[rat_to_str(entry) for entry in row]
                 for row in reduction.rows],
    }


def reduction_from_json(data: Mapping) -> Reduction:
    try:
        variables = tuple(str(name) for name in data["variables"])
        aux_count = int(data["k"])
        rows = tuple(tuple(rat_from_str(entry) for entry in row)
                     for row in data["rows"])
        declared_l, declared_m = int(data["l"]), int(data["m"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DimensionMismatch(f"malformed reduction JSON: {exc}") from None
    reduction = Reduction(variables, aux_count, rows)
    if reduction.row_count != declared_l:
        raise DimensionMismatch(
            f"declared l={declared_l} but found {reduction.row_count} rows")
    if reduction.var_count != declared_m:
        raise DimensionMismatch(
            f"declared m={declared_m} but found {reduction.var_count} variables")
    return reduction
