"""Whole-model linearization: lift objectives, synthesize constraint
reductions, and emit a CPLEX-LP MILP.

Affine constraints pass straight through as rows; every nonlinear constraint
is synthesized independently and gets its own fresh binary auxiliaries.
Repeated constraint shapes over identical boxes synthesize once (cached).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .cegis import CegisConfig, SynthesisSuccess, cegis_synthesize
from .lang import (
    Abs,
    Add,
    Arith,
    BoolExpr,
    Comparison,
    Const,
    Max,
    Min,
    ModelSpec,
    Mul,
    Neg,
    Sub,
    Var,
    VarDecl,
    eval_arith,
    eval_predicate,
    format_predicate,
    free_vars,
    is_affine,
    rat_to_str,
)
from .reduction import Reduction, reduction_to_json
from .smt import SolverConfig

__all__ = [
    "LinearModel",
    "LinearRow",
    "SynthesisFailed",
    "emit_lp",
    "grid_optimum",
    "interval_bounds",
    "lift_objective",
    "linear_grid_optimum",
    "linearize_model",
]


# ---------------------------------------------------------------------------
# Interval arithmetic (bounds for lifted objectives)
# ---------------------------------------------------------------------------

def interval_bounds(expr: Arith,
                    boxes: dict[str, tuple[Fraction, Fraction]]
                    ) -> tuple[Fraction, Fraction]:
    """Exact interval evaluation of an expression over variable boxes."""
    if isinstance(expr, Const):
        return expr.value, expr.value
    if isinstance(expr, Var):
        return boxes[expr.name]
    if isinstance(expr, Add):
        alo, ahi = interval_bounds(expr.lhs, boxes)
        blo, bhi = interval_bounds(expr.rhs, boxes)
        return alo + blo, ahi + bhi
    if isinstance(expr, Sub):
        alo, ahi = interval_bounds(expr.lhs, boxes)
        blo, bhi = interval_bounds(expr.rhs, boxes)
        return alo - bhi, ahi - blo
    if isinstance(expr, Mul):
        alo, ahi = interval_bounds(expr.lhs, boxes)
        blo, bhi = interval_bounds(expr.rhs, boxes)
        products = (alo * blo, alo * bhi, ahi * blo, ahi * bhi)
        return min(products), max(products)
    if isinstance(expr, Neg):
        lo, hi = interval_bounds(expr.arg, boxes)
        return -hi, -lo
    if isinstance(expr, Max):
        pairs = [interval_bounds(a, boxes) for a in expr.args]
        return max(p[0] for p in pairs), max(p[1] for p in pairs)
    if isinstance(expr, Min):
        pairs = [interval_bounds(a, boxes) for a in expr.args]
        return min(p[0] for p in pairs), min(p[1] for p in pairs)
    if isinstance(expr, Abs):
        lo, hi = interval_bounds(expr.arg, boxes)
        if lo <= 0 <= hi:
            return Fraction(0), max(-lo, hi)
        return min(abs(lo), abs(hi)), max(abs(lo), abs(hi))
    raise TypeError(f"not an arithmetic node: {expr!r}")


def _fresh_name(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    counter = 1
    while f"{base}{counter}" in taken:
        counter += 1
    return f"{base}{counter}"


def lift_objective(model: ModelSpec) -> ModelSpec:
    """Replace a non-affine objective by a fresh variable z with z = <expr>."""
    if is_affine(model.objective):
        return model
    taken = {d.name for d in model.decls}
    fresh = _fresh_name("z", taken)
    boxes = {d.name: (d.lo, d.hi) for d in model.decls}
    lo, hi = interval_bounds(model.objective, boxes)
    decl = VarDecl(fresh, "real", lo, hi)
    pin = Comparison("=", Var(fresh), model.objective)
    return ModelSpec(model.sense, Var(fresh),
                     model.constraints + (pin,), model.decls + (decl,))


# ---------------------------------------------------------------------------
# Linear models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearRow:
    """An affine inequality: sum(coeffs[v] * v) + const <= 0."""

    name: str
    coeffs: dict[str, Fraction]
    const: Fraction


@dataclass
class LinearModel:
    sense: str
    objective: dict[str, Fraction]
    objective_const: Fraction
    rows: list[LinearRow]
    decls: tuple[VarDecl, ...]

    def decl_map(self) -> dict[str, VarDecl]:
        return {d.name: d for d in self.decls}


class SynthesisFailed(Exception):
    """A constraint could not be linearized within the configured ceilings."""

    def __init__(self, index: int, text: str, outcome):
        super().__init__(f"constraint {index} ({text}) failed: "
                         f"{type(outcome).__name__}")
        self.index = index
        self.text = text
        self.outcome = outcome


def _affine_parts(expr: Arith) -> tuple[dict[str, Fraction], Fraction]:
    """Coefficients and constant of an affine expression."""
    if isinstance(expr, Const):
        return {}, expr.value
    if isinstance(expr, Var):
        return {expr.name: Fraction(1)}, Fraction(0)
    if isinstance(expr, (Add, Sub)):
        lc, lk = _affine_parts(expr.lhs)
        rc, rk = _affine_parts(expr.rhs)
        sign = 1 if isinstance(expr, Add) else -1
        for name, coeff in rc.items():
            lc[name] = lc.get(name, Fraction(0)) + sign * coeff
        return lc, lk + sign * rk
    if isinstance(expr, Neg):
        coeffs, const = _affine_parts(expr.arg)
        return {n: -c for n, c in coeffs.items()}, -const
    if isinstance(expr, Mul):
        if not free_vars(expr.lhs):
            scalar = eval_arith(expr.lhs, {})
            coeffs, const = _affine_parts(expr.rhs)
        else:
            scalar = eval_arith(expr.rhs, {})
            coeffs, const = _affine_parts(expr.lhs)
        return {n: scalar * c for n, c in coeffs.items()}, scalar * const
    if isinstance(expr, (Max, Min, Abs)) and not free_vars(expr):
        return {}, eval_arith(expr, {})
    raise ValueError(f"not affine: {expr!r}")


def _passthrough_rows(constraint: Comparison) -> list[tuple[dict, Fraction]]:
    """<=, >=, = over affine terms as one or two <=-0 rows."""
    lc, lk = _affine_parts(constraint.lhs)
    rc, rk = _affine_parts(constraint.rhs)
    diff = dict(lc)
    for name, coeff in rc.items():
        diff[name] = diff.get(name, Fraction(0)) - coeff
    diff = {n: c for n, c in diff.items() if c != 0}
    const = lk - rk
    if constraint.op == "<=":
        return [(diff, const)]
    if constraint.op == ">=":
        return [({n: -c for n, c in diff.items()}, -const)]
    if constraint.op == "=":
        return [(diff, const), ({n: -c for n, c in diff.items()}, -const)]
    raise ValueError(f"cannot pass through op {constraint.op!r}")


def _is_passthrough(constraint: BoolExpr) -> bool:
    return (isinstance(constraint, Comparison)
            and constraint.op in ("<=", ">=", "=")
            and is_affine(constraint.lhs) and is_affine(constraint.rhs))


def _cache_key(constraint: BoolExpr, decls: Sequence[VarDecl]) -> tuple:
    """Positional shape of a predicate plus its domain boxes."""
    renames = {d.name: f"v{i}" for i, d in enumerate(decls)}

    def rename(expr):
        if isinstance(expr, Var):
            return Var(renames[expr.name])
        if isinstance(expr, (Const,)):
            return expr
        if isinstance(expr, (Add, Sub, Mul)):
            return type(expr)(rename(expr.lhs), rename(expr.rhs))
        if isinstance(expr, Neg):
            return Neg(rename(expr.arg))
        if isinstance(expr, Max):
            return Max(tuple(rename(a) for a in expr.args))
        if isinstance(expr, Min):
            return Min(tuple(rename(a) for a in expr.args))
        if isinstance(expr, Abs):
            return Abs(rename(expr.arg))
        if isinstance(expr, Comparison):
            return Comparison(expr.op, rename(expr.lhs), rename(expr.rhs))
        from .lang import And, Iff, Implies, Not, Or

        if isinstance(expr, (And, Or)):
            return type(expr)(tuple(rename(a) for a in expr.args))
        if isinstance(expr, Not):
            return Not(rename(expr.arg))
        if isinstance(expr, (Implies, Iff)):
            return type(expr)(rename(expr.lhs), rename(expr.rhs))
        return expr  # BoolLit

    shape = format_predicate(rename(constraint))
    domain = tuple((d.kind, d.lo, d.hi) for d in decls)
    return shape, domain


def linearize_model(model: ModelSpec, config: CegisConfig | None = None,
                    solver: SolverConfig | None = None
                    ) -> tuple[LinearModel, dict]:
    """Rewrite every constraint as rows, synthesizing the nonlinear ones.

    The objective must already be affine (run lift_objective first).
    Returns the linear model and a transform report; raises SynthesisFailed
    when any single constraint cannot be linearized.
    """
    if not is_affine(model.objective):
        raise ValueError("objective is not affine; call lift_objective first")
    config = config or CegisConfig()
    taken = {d.name for d in model.decls}
    rows: list[LinearRow] = []
    extra_decls: list[VarDecl] = []
    entries: list[dict] = []
    cache: dict[tuple, Reduction] = {}
    row_counter = 0
    aux_counter = 0

    def next_row_name() -> str:
        nonlocal row_counter
        row_counter += 1
        return f"r{row_counter}"

    def next_aux_name() -> str:
        nonlocal aux_counter
        while True:
            aux_counter += 1
            candidate = f"u{aux_counter}"
            if candidate not in taken:
                taken.add(candidate)
                return candidate

    for index, constraint in enumerate(model.constraints):
        text = format_predicate(constraint)
        if _is_passthrough(constraint):
            names = []
            for coeffs, const in _passthrough_rows(constraint):
                name = next_row_name()
                names.append(name)
                rows.append(LinearRow(name, coeffs, const))
            entries.append({"constraint": index, "text": text,
                            "kind": "affine", "rows": names})
            continue
        used = free_vars(constraint)
        sub_decls = tuple(d for d in model.decls if d.name in used)
        missing = used - {d.name for d in sub_decls}
        if missing:
            raise ValueError(f"constraint {index} references undeclared "
                             f"variables {sorted(missing)}")
        key = _cache_key(constraint, sub_decls)
        cached = key in cache
        run_report = None
        if cached:
            reduction = cache[key]
        else:
            outcome = cegis_synthesize(constraint, sub_decls, config, solver)
            if not isinstance(outcome, SynthesisSuccess):
                raise SynthesisFailed(index, text, outcome)
            reduction = outcome.reduction
            run_report = outcome.report
            cache[key] = reduction
        aux_names = [next_aux_name() for _ in range(reduction.aux_count)]
        for decl_name in aux_names:
            extra_decls.append(VarDecl(decl_name, "binary",
                                       Fraction(0), Fraction(1)))
        names = []
        var_count = reduction.var_count
        for row in reduction.rows:
            coeffs: dict[str, Fraction] = {}
            for decl, coeff in zip(sub_decls, row[:var_count]):
                if coeff != 0:
                    coeffs[decl.name] = coeff
            for aux_name, coeff in zip(aux_names, row[var_count:-1]):
                if coeff != 0:
                    coeffs[aux_name] = coeff
            name = next_row_name()
            names.append(name)
            rows.append(LinearRow(name, coeffs, row[-1]))
        entry = {"constraint": index, "text": text,
                 "kind": "synthesized", "rows": names,
                 "aux_variables": aux_names,
                 "cached": cached,
                 "reduction": reduction_to_json(reduction)}
        if run_report is not None:
            entry["run_report"] = run_report
        entries.append(entry)

    objective, objective_const = _affine_parts(model.objective)
    linear = LinearModel(model.sense, objective, objective_const, rows,
                         model.decls + tuple(extra_decls))
    report = {
        "sense": model.sense,
        "objective": {n: rat_to_str(c) for n, c in objective.items()},
        "constraints": entries,
        "variables": [d.name for d in linear.decls],
    }
    return linear, report


# ---------------------------------------------------------------------------
# Grid-enumeration oracles
# ---------------------------------------------------------------------------

def _grid_axes(decls: Sequence[VarDecl], resolution: Fraction) -> list[list[Fraction]]:
    axes = []
    for decl in decls:
        if decl.is_integral:
            axes.append([Fraction(v) for v in decl.integer_values()])
        else:
            values = []
            value = decl.lo
            while value <= decl.hi:
                values.append(value)
                value += resolution
            if values[-1] != decl.hi:
                values.append(decl.hi)
            axes.append(values)
    return axes


def _iterate(axes: list[list[Fraction]]):
    if not axes:
        yield ()
        return
    for head in axes[0]:
        for rest in _iterate(axes[1:]):
            yield (head,) + rest


def grid_optimum(model: ModelSpec, resolution: Fraction = Fraction(1, 4)
                 ) -> tuple[Fraction, tuple[Fraction, ...]] | None:
    """Best objective over the feasibility grid, or None when infeasible."""
    names = [d.name for d in model.decls]
    best = None
    for point in _iterate(_grid_axes(model.decls, resolution)):
        env = dict(zip(names, point))
        if all(eval_predicate(c, env) for c in model.constraints):
            value = eval_arith(model.objective, env)
            candidate = (value, point)
            if best is None or _better(model.sense, value, best[0]):
                best = candidate
    return best


def linear_grid_optimum(model: LinearModel,
                        resolution: Fraction = Fraction(1, 4)
                        ) -> tuple[Fraction, tuple[Fraction, ...]] | None:
    """Same enumeration over a LinearModel's rows (aux binaries included)."""
    names = [d.name for d in model.decls]
    best = None
    for point in _iterate(_grid_axes(model.decls, resolution)):
        env = dict(zip(names, point))
        feasible = all(
            sum(c * env[n] for n, c in row.coeffs.items()) + row.const <= 0
            for row in model.rows)
        if feasible:
            value = (sum(c * env[n] for n, c in model.objective.items())
                     + model.objective_const)
            if best is None or _better(model.sense, value, best[0]):
                best = (value, point)
    return best


def _better(sense: str, new: Fraction, old: Fraction) -> bool:
    return new < old if sense == "min" else new > old


# ---------------------------------------------------------------------------
# LP emission
# ---------------------------------------------------------------------------

def _decimal_exact(value: Fraction) -> str | None:
    """Finite decimal rendering, or None when the denominator is not 2^a 5^b."""
    denom = value.denominator
    twos = 0
    while denom % 2 == 0:
        denom //= 2
        twos += 1
    fives = 0
    while denom % 5 == 0:
        denom //= 5
        fives += 1
    if denom != 1:
        return None
    if value.denominator == 1:
        return str(value.numerator)
    digits = max(twos, fives)
    scaled = value.numerator * 10**digits // value.denominator
    sign = "-" if scaled < 0 else ""
    text = str(abs(scaled)).rjust(digits + 1, "0")
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


def _term_text(coeff: Fraction, name: str, leading: bool) -> str:
    rendered = _decimal_exact(coeff)
    assert rendered is not None
    magnitude = rendered.lstrip("-")
    part = name if magnitude in ("1", "1.0") else f"{magnitude} {name}"
    if leading:
        return part if coeff > 0 else f"- {part}"
    return f"+ {part}" if coeff > 0 else f"- {part}"


def _linear_text(coeffs: dict[str, Fraction], order: Sequence[str]) -> str:
    parts = []
    for name in order:
        if name not in coeffs or coeffs[name] == 0:
            continue
        parts.append(_term_text(coeffs[name], name, leading=not parts))
    return " ".join(parts) if parts else "0 " + (order[0] if order else "x")


def _all_decimal(values) -> bool:
    return all(_decimal_exact(v) is not None for v in values)


def _scale_factor(values) -> int:
    return math.lcm(*(v.denominator for v in values)) if values else 1


def emit_lp(model: LinearModel) -> str:
    """CPLEX-LP text; non-decimal rationals are emitted as scaled rows."""
    order = [d.name for d in model.decls]
    lines: list[str] = []
    scale_notes: list[str] = []

    obj_values = list(model.objective.values()) + [model.objective_const]
    obj_coeffs = dict(model.objective)
    obj_const = model.objective_const
    if not _all_decimal(obj_values):
        factor = _scale_factor(obj_values)
        obj_coeffs = {n: c * factor for n, c in obj_coeffs.items()}
        obj_const = obj_const * factor
        scale_notes.append(f"\\ objective scaled by {factor}")
    lines.append("Minimize" if model.sense == "min" else "Maximize")
    obj_text = _linear_text(obj_coeffs, order)
    if obj_const != 0:
        const_text = _decimal_exact(obj_const)
        sign = "+" if obj_const > 0 else "-"
        obj_text += f" {sign} {const_text.lstrip('-')}"
    lines.append(f" obj: {obj_text}")

    body: list[str] = []
    extra_rows: list[str] = []
    for decl in model.decls:
        if decl.kind == "binary":
            continue
        lo_txt, hi_txt = _decimal_exact(decl.lo), _decimal_exact(decl.hi)
        if lo_txt is None or hi_txt is None:
            # exact bounds as scaled rows; the Bounds entry is slightly
            # widened but the rows keep the feasible set unchanged
            for kind, bound in (("lb", decl.lo), ("ub", decl.hi)):
                factor = bound.denominator
                value = bound.numerator
                rhs = f"{'>=' if kind == 'lb' else '<='} {value}"
                extra_rows.append(
                    f" b_{decl.name}_{kind}: {factor} {decl.name} {rhs}")
            scale_notes.append(
                f"\\ bounds of {decl.name} enforced by scaled rows "
                f"b_{decl.name}_lb/b_{decl.name}_ub")

    if model.rows or extra_rows:
        lines.append("Subject To")
    for row in model.rows:
        values = list(row.coeffs.values()) + [row.const]
        coeffs, const = row.coeffs, row.const
        if not _all_decimal(values):
            factor = _scale_factor(values)
            coeffs = {n: c * factor for n, c in coeffs.items()}
            const = const * factor
            scale_notes.append(f"\\ row {row.name} scaled by {factor}")
        rhs = _decimal_exact(-const)
        lines.append(f" {row.name}: {_linear_text(coeffs, order)} <= {rhs}")
    lines.extend(extra_rows)

    lines.append("Bounds")
    for decl in model.decls:
        if decl.kind == "binary":
            continue
        lo_txt, hi_txt = _decimal_exact(decl.lo), _decimal_exact(decl.hi)
        if lo_txt is None:
            lo_txt = _decimal_outward(decl.lo, up=False)
        if hi_txt is None:
            hi_txt = _decimal_outward(decl.hi, up=True)
        lines.append(f" {lo_txt} <= {decl.name} <= {hi_txt}")

    binaries = [d.name for d in model.decls if d.kind == "binary"]
    if binaries:
        lines.append("Binary")
        lines.append(" " + " ".join(binaries))
    generals = [d.name for d in model.decls if d.kind == "int"]
    if generals:
        lines.append("General")
        lines.append(" " + " ".join(generals))
    lines.append("End")
    if scale_notes:
        lines = scale_notes + lines
    return "\n".join(lines) + "\n"


def _decimal_outward(value: Fraction, up: bool) -> str:
    grain = Fraction(1, 10**6)
    scaled = value / grain
    rounded = math.ceil(scaled) if up else math.floor(scaled)
    return _decimal_exact(rounded * grain)
