"""CEGIS synthesis of linearization reductions.

The target semantics is

    Phi(y)  iff  exists u in {0,1}^k :  X [y, u, 1]^T <= 0

over a bounded box.  The loop alternates two solver queries:

* reduction finding: over the unknown matrix entries, force agreement with
  every collected sample.  Positive samples require some aux vector to
  satisfy all rows; negative samples require every aux vector to violate
  some row.  Samples and aux vectors are concrete, so this is QF_LRA.
* refutation: over the problem variables, look for a point where the
  candidate and the predicate disagree.  Aux vectors are enumerated
  concretely, so the query is linear whenever the predicate is.

A counterexample is added to the sample set and the same (l,k) cell is
retried; an unsatisfiable finding query advances the cell schedule.  Samples
are retained across cells: unsatisfiability on a subset already proves no
(l,k) reduction exists on the full domain.

The quantifier placement here follows the reading under which the big-M max
system is actually valid; the historical literal reading (negative samples
only need one failing aux vector, refutation conjoins over u) is available
behind ``literal_quantifiers`` for study and carries no termination promise.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .lang import (
    BoolExpr,
    Valuation,
    VarDecl,
    bind,
    corner_points,
    domain_contains,
    eval_predicate,
    format_spec,
    rat_from_str,
    rat_to_str,
)
from .parser import parse_spec
from .reduction import (
    Reduction,
    aux_vectors,
    encodes_at,
    normalize_reduction,
    reduction_from_json,
    reduction_to_json,
)
from .smt import (
    SExpr,
    SmtQuery,
    SolverConfig,
    bool_sexpr,
    bounds_assertions,
    decl_sort,
    default_solver_command,
    pick_logic,
    predicate_nonlinear,
    rat_sexpr,
    run_query,
)

__all__ = [
    "CegisConfig",
    "ExhaustedLattice",
    "SampleSet",
    "SynthesisSuccess",
    "SynthesisUnknown",
    "cegis_synthesize",
    "encode_reduction_finding",
    "encode_refutation",
    "first_cell",
    "initial_samples",
    "next_cell",
    "replay_check",
    "schedule_cells",
]

_REAL_GRAIN = 64  # random real samples land on a 1/64 grid of the interval


@dataclass
class CegisConfig:
    max_rows: int = 6          # row-count ceiling (the "l" ceiling)
    max_aux: int = 2           # auxiliary-count ceiling (the "k" ceiling)
    samples: int = 16          # random initial samples on top of corners
    seed: int = 0
    schedule: str = "min-size"  # or "diagonal": step rows and aux together
    iteration_cap: int = 200   # per cell; exceeding it aborts the run
    query_timeout_s: float = 60.0
    coeff_bound: Fraction | None = None  # optional |X entry| bound
    integer_coeffs: bool = False  # search integer matrices only; with a
    # coeff_bound this makes the per-cell hypothesis space finite, which
    # closes the rational ping-pong that equality predicates over real
    # boxes otherwise allow (row scaling means no expressiveness is lost
    # beyond the bound itself)
    literal_quantifiers: bool = False

    def __post_init__(self):
        if self.max_rows < 1:
            raise ValueError("max_rows must be at least 1")
        if self.max_aux < 0:
            raise ValueError("max_aux must be nonnegative")
        if self.schedule not in ("min-size", "diagonal"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.samples < 0:
            raise ValueError("samples must be nonnegative")
        if self.iteration_cap < 1:
            raise ValueError("iteration_cap must be at least 1")


class SampleSet:
    """Ordered, deduplicated (point, predicate value) pairs."""

    def __init__(self):
        self._entries: list[tuple[Valuation, bool]] = []
        self._seen: set[Valuation] = set()

    def add(self, point: Valuation, phi_value: bool) -> bool:
        """Append if the point is new; returns whether it was added."""
        if point in self._seen:
            return False
        self._seen.add(point)
        self._entries.append((point, phi_value))
        return True

    def __contains__(self, point: Valuation) -> bool:
        return point in self._seen

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self) -> tuple[tuple[Valuation, bool], ...]:
        return tuple(self._entries)


def initial_samples(phi: BoolExpr, decls: Sequence[VarDecl],
                    config: CegisConfig) -> SampleSet:
    """Box corners (capped at 64) plus seeded random points, tagged by Phi."""
    samples = SampleSet()

    def tag_and_add(point: Valuation) -> None:
        samples.add(point, eval_predicate(phi, bind(decls, point)))

    for corner in corner_points(decls, cap=64):
        tag_and_add(corner)
    rng = random.Random(config.seed)
    for _ in range(config.samples):
        point = []
        for decl in decls:
            if decl.is_integral:
                point.append(Fraction(rng.randint(decl.int_lo, decl.int_hi)))
            else:
                step = rng.randint(0, _REAL_GRAIN)
                point.append(decl.lo
                             + (decl.hi - decl.lo) * Fraction(step, _REAL_GRAIN))
        tag_and_add(tuple(point))
    return samples


# ---------------------------------------------------------------------------
# Cell schedule
# ---------------------------------------------------------------------------

def schedule_cells(config: CegisConfig) -> list[tuple[int, int]]:
    """All cells within the ceilings in min-size order: by l+k, ties lower k."""
    cells = [(l, k) for l in range(1, config.max_rows + 1)
             for k in range(0, config.max_aux + 1)]
    cells.sort(key=lambda cell: (cell[0] + cell[1], cell[1]))
    return cells


def first_cell(config: CegisConfig) -> tuple[int, int]:
    if config.schedule == "min-size":
        return schedule_cells(config)[0]
    return (1, 0)  # diagonal starts from the smallest cell


def next_cell(rows: int, aux: int, config: CegisConfig) -> tuple[int, int] | None:
    """Successor cell under the configured schedule, or None when exhausted."""
    if not (1 <= rows <= config.max_rows and 0 <= aux <= config.max_aux):
        raise ValueError(f"cell ({rows}, {aux}) outside the configured ceilings")
    if config.schedule == "diagonal":
        candidate = (rows + 1, aux + 1)
        if candidate[0] > config.max_rows or candidate[1] > config.max_aux:
            return None
        return candidate
    cells = schedule_cells(config)
    index = cells.index((rows, aux))
    if index + 1 == len(cells):
        return None
    return cells[index + 1]


# ---------------------------------------------------------------------------
# Formula encodings
# ---------------------------------------------------------------------------

def _and(parts: Sequence[SExpr]) -> SExpr:
    parts = tuple(parts)
    if not parts:
        return "true"
    if len(parts) == 1:
        return parts[0]
    return ("and",) + parts


def _or(parts: Sequence[SExpr]) -> SExpr:
    parts = tuple(parts)
    if not parts:
        return "false"
    if len(parts) == 1:
        return parts[0]
    return ("or",) + parts


def _linear_sum(pairs: Sequence[tuple[Fraction, str]], const: Fraction,
                int_sorted: frozenset[str] = frozenset()) -> SExpr:
    """Sum of coeff*symbol terms plus a constant, with zero terms dropped."""
    terms: list[SExpr] = []
    for coeff, name in pairs:
        if coeff == 0:
            continue
        sym: SExpr = ("to_real", name) if name in int_sorted else name
        if coeff == 1:
            terms.append(sym)
        elif coeff == -1:
            terms.append(("-", sym))
        else:
            terms.append(("*", rat_sexpr(coeff), sym))
    if const != 0 or not terms:
        terms.append(rat_sexpr(const))
    if len(terms) == 1:
        return terms[0]
    return ("+",) + tuple(terms)


def _entry_names(rows: int, aux: int, var_count: int) -> list[list[str]]:
    width = var_count + aux + 1
    return [[f"x_{i + 1}_{j + 1}" for j in range(width)] for i in range(rows)]


def encode_reduction_finding(phi: BoolExpr, decls: Sequence[VarDecl],
                             samples: SampleSet, rows: int, aux: int,
                             coeff_bound: Fraction | None = None,
                             integer_coeffs: bool = False,
                             literal_quantifiers: bool = False) -> SmtQuery:
    """Formula over the unknown matrix entries: agree with every sample."""
    if len(samples) == 0:
        raise ValueError("sample set must be nonempty")
    names = _entry_names(rows, aux, len(decls))
    flat = [name for row in names for name in row]
    int_sorted = frozenset(flat) if integer_coeffs else frozenset()
    assertions: list[SExpr] = []
    if coeff_bound is not None:
        bound = rat_sexpr(coeff_bound)
        for name in flat:
            sym: SExpr = ("to_real", name) if integer_coeffs else name
            assertions.append(("<=", sym, bound))
            assertions.append(("<=", ("-", bound), sym))
    for point, phi_value in samples.entries():
        satisfied, violated = [], []
        for u in aux_vectors(aux):
            vector = tuple(point) + tuple(u) + (Fraction(1),)
            row_terms = [
                _linear_sum(list(zip(vector, names[i])), Fraction(0), int_sorted)
                for i in range(rows)]
            satisfied.append(_and([("<=", t, "0") for t in row_terms]))
            violated.append(_or([(">", t, "0") for t in row_terms]))
        if phi_value:
            assertions.append(_or(satisfied))
        elif literal_quantifiers:
            # historical reading: one failing aux vector suffices
            assertions.append(_or(violated))
        else:
            assertions.append(_and(violated))
    return SmtQuery(
        declarations=tuple((name, "Int" if integer_coeffs else "Real")
                           for name in flat),
        assertions=tuple(assertions),
        logic="QF_LIRA" if integer_coeffs else "QF_LRA",
        value_names=tuple(flat))


def candidate_from_model(model: dict[str, Fraction], variables: tuple[str, ...],
                         rows: int, aux: int) -> Reduction:
    names = _entry_names(rows, aux, len(variables))
    matrix = tuple(tuple(model[name] for name in row) for row in names)
    return Reduction(variables, aux, matrix)


def encode_refutation(phi: BoolExpr, decls: Sequence[VarDecl],
                      candidate: Reduction,
                      literal_quantifiers: bool = False) -> SmtQuery:
    """Formula over the problem variables: candidate and Phi disagree."""
    var_names = tuple(d.name for d in decls)
    if candidate.variables != var_names:
        raise ValueError(f"candidate variables {candidate.variables} do not "
                         f"match declarations {var_names}")
    int_sorted = frozenset(d.name for d in decls if d.is_integral)
    m = len(decls)
    satisfied, violated = [], []
    for u in aux_vectors(candidate.aux_count):
        row_terms = []
        for row in candidate.rows:
            const = row[-1] + sum(
                coeff * uval for coeff, uval in zip(row[m:-1], u))
            pairs = list(zip(row[:m], var_names))
            row_terms.append(_linear_sum(pairs, const, int_sorted))
        satisfied.append(_and([("<=", t, "0") for t in row_terms]))
        violated.append(_or([(">", t, "0") for t in row_terms]))
    phi_smt = bool_sexpr(phi, int_sorted)
    if literal_quantifiers:
        disagree = _and([
            _or([_and([phi_smt, viol]), _and([("not", phi_smt), sat])])
            for sat, viol in zip(satisfied, violated)])
    else:
        disagree = _or([
            _and([phi_smt, _and(violated)]),
            _and([("not", phi_smt), _or(satisfied)])])
    assertions = tuple(bounds_assertions(decls)) + (disagree,)
    has_int = bool(int_sorted)
    logic = pick_logic(has_int, predicate_nonlinear(phi))
    return SmtQuery(
        declarations=tuple((d.name, decl_sort(d)) for d in decls),
        assertions=assertions,
        logic=logic,
        value_names=var_names)


# ---------------------------------------------------------------------------
# Outcomes and the loop
# ---------------------------------------------------------------------------

@dataclass
class SynthesisSuccess:
    reduction: Reduction       # normalized (integer rows)
    iterations: int            # finding-query attempts across all cells
    samples: SampleSet
    report: dict


@dataclass
class ExhaustedLattice:
    max_rows: int
    max_aux: int
    report: dict


@dataclass
class SynthesisUnknown:
    phase: str                 # "reduction-finding" | "refutation" | "iteration-cap"
    diagnostic: str
    report: dict


def _default_solver(config: CegisConfig) -> SolverConfig:
    command, extra_env = default_solver_command()
    return SolverConfig(command=command, timeout_s=config.query_timeout_s,
                        extra_env=extra_env)


def _timed(solver: SolverConfig, query: SmtQuery, want_model: bool):
    start = time.perf_counter()
    result = run_query(solver, query, want_model=want_model)
    return result, time.perf_counter() - start


def _point_json(point: Valuation) -> list[str]:
    return [rat_to_str(v) for v in point]


def cegis_synthesize(phi: BoolExpr, decls: Sequence[VarDecl],
                     config: CegisConfig | None = None,
                     solver: SolverConfig | None = None):
    """Run the synthesis loop; returns one of the three outcome types."""
    config = config or CegisConfig()
    solver = solver or _default_solver(config)
    decls = tuple(decls)
    variables = tuple(d.name for d in decls)
    samples = initial_samples(phi, decls, config)

    events: list[dict] = []
    report = {
        "seed": config.seed,
        "schedule": config.schedule,
        "max_l": config.max_rows,
        "max_k": config.max_aux,
        "initial_sample_count": config.samples,
        "iteration_cap": config.iteration_cap,
        "coeff_bound": (rat_to_str(config.coeff_bound)
                        if config.coeff_bound is not None else None),
        "integer_coeffs": config.integer_coeffs,
        "literal_quantifiers": config.literal_quantifiers,
        "spec": format_spec(decls, phi),
        "variables": list(variables),
        "initial_samples": [
            {"point": _point_json(p), "phi": v} for p, v in samples.entries()],
        "events": events,
        "outcome": None,
        "iterations": 0,
        "reduction": None,
    }

    def finish(outcome):
        report["iterations"] = iterations
        if isinstance(outcome, SynthesisSuccess):
            report["outcome"] = {"kind": "success"}
            report["reduction"] = reduction_to_json(outcome.reduction)
        elif isinstance(outcome, ExhaustedLattice):
            report["outcome"] = {"kind": "exhausted",
                                 "max_l": config.max_rows,
                                 "max_k": config.max_aux}
        else:
            report["outcome"] = {"kind": "unknown", "phase": outcome.phase,
                                 "diagnostic": outcome.diagnostic}
        return outcome

    iterations = 0
    cell = first_cell(config)
    while cell is not None:
        rows, aux = cell
        events.append({"type": "cell_start", "l": rows, "k": aux})
        for _ in range(config.iteration_cap):
            iterations += 1
            if config.integer_coeffs:
                # Rational relaxation first: its unsat proofs are cheap LP
                # facts and rule out the cell for every rational matrix.
                relaxed = encode_reduction_finding(
                    phi, decls, samples, rows, aux,
                    literal_quantifiers=config.literal_quantifiers)
                result, wall = _timed(solver, relaxed, want_model=False)
                if result.status == "unknown":
                    return finish(SynthesisUnknown(
                        "reduction-finding",
                        f"solver unknown ({result.reason}) at cell "
                        f"({rows}, {aux})", report))
                if result.status == "unsat":
                    events.append({"type": "cell_unsat", "wall_s": wall})
                    break
            finding = encode_reduction_finding(
                phi, decls, samples, rows, aux,
                coeff_bound=config.coeff_bound,
                integer_coeffs=config.integer_coeffs,
                literal_quantifiers=config.literal_quantifiers)
            result, wall = _timed(solver, finding, want_model=True)
            if result.status == "unknown" and config.integer_coeffs:
                # The bias could not decide this cell in time; a rational
                # candidate exists, so skip the cell rather than abort.
                events.append({"type": "cell_biased_out",
                               "reason": f"integer search {result.reason}",
                               "wall_s": wall})
                break
            if result.status == "unknown":
                return finish(SynthesisUnknown(
                    "reduction-finding",
                    f"solver unknown ({result.reason}) at cell ({rows}, {aux})",
                    report))
            if result.status == "unsat":
                if config.integer_coeffs:
                    # rational matrices exist here but none within the
                    # integer bound; the schedule moves on
                    events.append({"type": "cell_biased_out",
                                   "reason": "integer-unsat", "wall_s": wall})
                    break
                events.append({"type": "cell_unsat", "wall_s": wall})
                break
            candidate = candidate_from_model(result.model, variables, rows, aux)
            events.append({
                "type": "candidate",
                "rows": [[rat_to_str(e) for e in row] for row in candidate.rows],
                "wall_s": wall,
            })
            refutation = encode_refutation(
                phi, decls, candidate,
                literal_quantifiers=config.literal_quantifiers)
            result, wall = _timed(solver, refutation, want_model=True)
            if result.status == "unknown":
                return finish(SynthesisUnknown(
                    "refutation",
                    f"solver unknown ({result.reason}) at cell ({rows}, {aux})",
                    report))
            if result.status == "unsat":
                events.append({"type": "verified", "wall_s": wall})
                final = normalize_reduction(candidate)
                return finish(SynthesisSuccess(final, iterations, samples, report))
            point = tuple(result.model[name] for name in variables)
            for decl, value in zip(decls, point):
                if not domain_contains(decl, value):
                    return finish(SynthesisUnknown(
                        "refutation",
                        f"counterexample {_point_json(point)} leaves the "
                        f"domain of {decl.name}", report))
            if encodes_at(candidate, decls, phi, point):
                return finish(SynthesisUnknown(
                    "refutation",
                    f"solver returned {_point_json(point)} but the candidate "
                    "agrees with the predicate there", report))
            phi_value = eval_predicate(phi, bind(decls, point))
            if not samples.add(point, phi_value):
                return finish(SynthesisUnknown(
                    "refutation",
                    f"counterexample {_point_json(point)} was already sampled; "
                    "the finding encoding admitted an inconsistent candidate",
                    report))
            events.append({"type": "counterexample",
                           "point": _point_json(point),
                           "phi": phi_value, "wall_s": wall})
        else:
            return finish(SynthesisUnknown(
                "iteration-cap",
                f"cell ({rows}, {aux}) exceeded {config.iteration_cap} "
                "iterations", report))
        cell = next_cell(rows, aux, config)
    return finish(ExhaustedLattice(config.max_rows, config.max_aux, report))


# ---------------------------------------------------------------------------
# Replay checking
# ---------------------------------------------------------------------------

def replay_check(report: dict) -> list[str]:
    """Re-validate a run report's loop invariants by exact evaluation.

    Checks, per event stream: every candidate agrees with all samples
    collected so far; every counterexample falsifies the then-current
    candidate and is new to the sample set.  Returns human-readable
    violation strings (empty list = clean run).
    """
    violations: list[str] = []
    decls, phi = parse_spec(report["spec"])
    variables = tuple(report["variables"])

    samples = SampleSet()
    for entry in report["initial_samples"]:
        point = tuple(rat_from_str(v) for v in entry["point"])
        truth = eval_predicate(phi, bind(decls, point))
        if truth != entry["phi"]:
            violations.append(
                f"initial sample {entry['point']} tagged {entry['phi']} "
                f"but evaluates to {truth}")
        samples.add(point, truth)

    cell = None
    candidate: Reduction | None = None
    for index, event in enumerate(report["events"]):
        kind = event["type"]
        if kind == "cell_start":
            cell = (event["l"], event["k"])
            candidate = None
        elif kind == "candidate":
            rows = tuple(tuple(rat_from_str(e) for e in row)
                         for row in event["rows"])
            candidate = Reduction(variables, cell[1], rows)
            for point, _ in samples.entries():
                if not encodes_at(candidate, decls, phi, point):
                    violations.append(
                        f"event {index}: candidate disagrees with sample "
                        f"{_point_json(point)}")
        elif kind == "counterexample":
            point = tuple(rat_from_str(v) for v in event["point"])
            if candidate is None:
                violations.append(f"event {index}: counterexample without "
                                  "a current candidate")
                continue
            if encodes_at(candidate, decls, phi, point):
                violations.append(
                    f"event {index}: counterexample {event['point']} does "
                    "not falsify the current candidate")
            if point in samples:
                violations.append(
                    f"event {index}: counterexample {event['point']} was "
                    "already in the sample set")
            samples.add(point, eval_predicate(phi, bind(decls, point)))
        elif kind in ("cell_unsat", "cell_biased_out"):
            candidate = None
        elif kind == "verified":
            if candidate is None:
                violations.append(f"event {index}: verified without a "
                                  "candidate")
    outcome = report.get("outcome") or {}
    if outcome.get("kind") == "success" and report.get("reduction"):
        final = reduction_from_json(report["reduction"])
        for point, _ in samples.entries():
            if not encodes_at(final, decls, phi, point):
                violations.append(
                    f"final reduction disagrees with sample {_point_json(point)}")
    return violations
