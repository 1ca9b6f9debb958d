"""Reduction validity checking: SMT refutation plus a brute-force oracle.

The SMT path is exact: an unsat refutation certifies validity over the whole
box.  The oracle path enumerates points; on all-integral domains that is
exhaustive (also exact), on real domains it is a grid-plus-random sampler
that can only ever refute, never certify.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .cegis import encode_refutation
from .lang import (
    BoolExpr,
    Valuation,
    VarDecl,
    bind,
    eval_predicate,
    rat_to_str,
)
from .reduction import DimensionMismatch, Reduction
from .smt import SolverConfig, SolverFailure, run_query

__all__ = [
    "BudgetExceeded",
    "Refuted",
    "Unknown",
    "Valid",
    "VerificationResult",
    "brute_force_verify",
    "cross_check",
    "verify_reduction",
]


@dataclass(frozen=True)
class Valid:
    pass


@dataclass(frozen=True)
class Refuted:
    counterexample: Valuation
    phi_value: bool  # predicate truth at the counterexample


@dataclass(frozen=True)
class Unknown:
    diagnostic: str


VerificationResult = Valid | Refuted | Unknown


class BudgetExceeded(Exception):
    """Oracle point enumeration exceeded its configured cap."""


def verify_reduction(phi: BoolExpr, reduction: Reduction,
                     decls: Sequence[VarDecl],
                     solver: SolverConfig) -> VerificationResult:
    """SMT decision: unsat refutation query means the reduction is valid."""
    if tuple(d.name for d in decls) != reduction.variables:
        raise DimensionMismatch(
            f"reduction variables {reduction.variables} do not match "
            f"declarations {tuple(d.name for d in decls)}")
    query = encode_refutation(phi, decls, reduction)
    try:
        result = run_query(solver, query, want_model=True)
    except SolverFailure as exc:
        return Unknown(f"solver failure: {exc}")
    if result.status == "unsat":
        return Valid()
    if result.status == "unknown":
        return Unknown(f"solver returned unknown ({result.reason})")
    point = tuple(result.model[name] for name in reduction.variables)
    phi_value = eval_predicate(phi, bind(decls, point))
    return Refuted(point, phi_value)


def _axis_values(decl: VarDecl, resolution: Fraction) -> list[Fraction]:
    if decl.is_integral:
        return [Fraction(v) for v in decl.integer_values()]
    values = []
    value = decl.lo
    while value <= decl.hi:
        values.append(value)
        value += resolution
    if values[-1] != decl.hi:
        values.append(decl.hi)
    return values


def _random_point(rng: random.Random, decls: Sequence[VarDecl]) -> Valuation:
    point = []
    for decl in decls:
        if decl.is_integral:
            point.append(Fraction(rng.randint(decl.int_lo, decl.int_hi)))
        else:
            # denominators up to 10^6 exercise exactness, not just grids
            numerator = rng.randint(0, 10**6)
            point.append(decl.lo + (decl.hi - decl.lo)
                         * Fraction(numerator, 10**6))
    return tuple(point)


def brute_force_verify(phi: BoolExpr, reduction: Reduction,
                       decls: Sequence[VarDecl],
                       resolution: Fraction = Fraction(1, 4),
                       random_count: int = 1000, seed: int = 0,
                       point_cap: int = 200_000) -> VerificationResult:
    """Pointwise oracle; exhaustive and exact when all domains are integral.

    Real domains walk the rational grid (lexicographic, so the first witness
    is the lowest) and then seeded random points.  A Valid verdict on a real
    domain means only "no counterexample found at this resolution".
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if tuple(d.name for d in decls) != reduction.variables:
        raise DimensionMismatch(
            f"reduction variables {reduction.variables} do not match "
            f"declarations {tuple(d.name for d in decls)}")
    all_integral = all(d.is_integral for d in decls)
    axes = [_axis_values(d, resolution) for d in decls]
    total = 1
    for axis in axes:
        total *= len(axis)
    if total > point_cap:
        raise BudgetExceeded(
            f"grid holds {total} points, exceeding the cap of {point_cap}")

    def check(point: Valuation) -> VerificationResult | None:
        truth = eval_predicate(phi, bind(decls, point))
        if reduction.holds_at(point) != truth:
            return Refuted(point, truth)
        return None

    def walk(prefix: tuple, depth: int) -> VerificationResult | None:
        if depth == len(axes):
            return check(prefix)
        for value in axes[depth]:
            hit = walk(prefix + (value,), depth + 1)
            if hit is not None:
                return hit
        return None

    hit = walk((), 0)
    if hit is not None:
        return hit
    if not all_integral:
        rng = random.Random(seed)
        for _ in range(random_count):
            hit = check(_random_point(rng, decls))
            if hit is not None:
                return hit
    return Valid()


def cross_check(phi: BoolExpr, reduction: Reduction,
                decls: Sequence[VarDecl], solver: SolverConfig,
                resolution: Fraction = Fraction(1, 4),
                random_count: int = 1000, seed: int = 0) -> dict:
    """Run both verifiers and report agreement.

    SMT-Valid with an oracle refutation is flagged as a hard bug; the
    converse (oracle misses a real-domain counterexample the solver finds)
    is expected at coarse resolutions.
    """
    start = time.perf_counter()
    smt_result = verify_reduction(phi, reduction, decls, solver)
    smt_wall = time.perf_counter() - start
    start = time.perf_counter()
    oracle_result = brute_force_verify(phi, reduction, decls,
                                       resolution=resolution,
                                       random_count=random_count, seed=seed)
    oracle_wall = time.perf_counter() - start
    report = {
        "smt": _result_json(smt_result, smt_wall),
        "oracle": _result_json(oracle_result, oracle_wall),
        "agree": type(smt_result) is type(oracle_result),
        "hard_disagreement": isinstance(smt_result, Valid)
                             and isinstance(oracle_result, Refuted),
        "oracle_incomplete": isinstance(smt_result, Refuted)
                             and isinstance(oracle_result, Valid),
    }
    return report


def _result_json(result: VerificationResult, wall_s: float) -> dict:
    if isinstance(result, Valid):
        data = {"verdict": "valid"}
    elif isinstance(result, Refuted):
        data = {"verdict": "refuted",
                "counterexample": [rat_to_str(v) for v in result.counterexample],
                "phi_value": result.phi_value}
    else:
        data = {"verdict": "unknown", "diagnostic": result.diagnostic}
    data["wall_s"] = wall_s
    return data
