"""Expression trees, domains, and exact evaluation for the constraint DSL.

Everything numeric is an exact ``fractions.Fraction``; there are no floats
anywhere in the pipeline, so comparisons and equalities are decidable and
solver models round-trip without loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence, Union

__all__ = [
    "Abs",
    "Add",
    "And",
    "Arith",
    "BoolExpr",
    "BoolLit",
    "Comparison",
    "Const",
    "Iff",
    "Implies",
    "Max",
    "Min",
    "ModelSpec",
    "Mul",
    "Neg",
    "Not",
    "Or",
    "Sub",
    "Var",
    "VarDecl",
    "Valuation",
    "bind",
    "corner_points",
    "check_valuation",
    "domain_contains",
    "eval_arith",
    "eval_predicate",
    "format_arith",
    "format_decl",
    "format_model",
    "format_predicate",
    "format_spec",
    "free_vars",
    "is_affine",
    "rat_from_str",
    "rat_to_str",
]

COMPARISON_OPS = ("<=", "<", "=", "!=", ">=", ">")

Rat = Fraction
Valuation = tuple[Fraction, ...]


def rat_to_str(q: Fraction) -> str:
    """Exact decimal-free rendering: "p" for integers, "p/q" otherwise."""
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def rat_from_str(text: str) -> Fraction:
    """Inverse of :func:`rat_to_str`; also accepts decimal strings."""
    return Fraction(text.strip())


# ---------------------------------------------------------------------------
# Variable declarations and domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarDecl:
    """A declared variable with a bounded domain.

    kind is "real", "int", or "binary"; binary fixes the bounds to {0, 1}.
    """

    name: str
    kind: str
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.kind not in ("real", "int", "binary"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "binary" and (self.lo, self.hi) != (0, 1):
            raise ValueError("binary variables have the fixed domain {0, 1}")
        if self.lo > self.hi:
            raise ValueError(f"{self.name}: empty domain [{self.lo}, {self.hi}]")
        if self.kind == "int" and self.int_lo > self.int_hi:
            raise ValueError(
                f"{self.name}: no integers in [{self.lo}, {self.hi}]"
            )

    @property
    def is_integral(self) -> bool:
        return self.kind in ("int", "binary")

    @property
    def int_lo(self) -> int:
        return math.ceil(self.lo)

    @property
    def int_hi(self) -> int:
        return math.floor(self.hi)

    def integer_values(self) -> range:
        """All admissible values of an int/binary variable."""
        if not self.is_integral:
            raise ValueError(f"{self.name} is not integral")
        return range(self.int_lo, self.int_hi + 1)


def domain_contains(decl: VarDecl, value: Fraction) -> bool:
    if not (decl.lo <= value <= decl.hi):
        return False
    if decl.is_integral and value.denominator != 1:
        return False
    return True


def check_valuation(decls: Sequence[VarDecl], point: Sequence[Fraction]) -> None:
    """Raise ValueError unless point is a legal valuation of decls."""
    if len(point) != len(decls):
        raise ValueError(f"expected {len(decls)} components, got {len(point)}")
    for decl, value in zip(decls, point):
        if not domain_contains(decl, value):
            raise ValueError(f"{decl.name} = {value} outside {decl.kind} domain "
                             f"[{rat_to_str(decl.lo)}, {rat_to_str(decl.hi)}]")


def bind(decls: Sequence[VarDecl], point: Sequence[Fraction]) -> dict[str, Fraction]:
    """Map a positional valuation onto declaration names."""
    if len(point) != len(decls):
        raise ValueError(f"expected {len(decls)} components, got {len(point)}")
    return {decl.name: Fraction(value) for decl, value in zip(decls, point)}


def corner_points(decls: Sequence[VarDecl], cap: int = 64) -> list[Valuation]:
    """The box corners {lo, hi}^m in deterministic order, at most cap points.

    Integral variables use the integer endpoints of their interval.
    """
    axes: list[tuple[Fraction, ...]] = []
    for decl in decls:
        if decl.is_integral:
            lo, hi = Fraction(decl.int_lo), Fraction(decl.int_hi)
        else:
            lo, hi = decl.lo, decl.hi
        axes.append((lo,) if lo == hi else (lo, hi))
    corners: list[Valuation] = []
    for point in product(*axes):
        if len(corners) >= cap:
            break
        corners.append(point)
    return corners


# ---------------------------------------------------------------------------
# Expression trees
# ---------------------------------------------------------------------------
# Arithmetic and Boolean nodes are separate categories; the parser enforces
# that arithmetic operators get arithmetic children and connectives get
# Boolean children, so the evaluator can assume well-typed trees.

@dataclass(frozen=True)
class Const:
    value: Fraction


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Add:
    lhs: "Arith"
    rhs: "Arith"


@dataclass(frozen=True)
class Sub:
    lhs: "Arith"
    rhs: "Arith"


@dataclass(frozen=True)
class Mul:
    lhs: "Arith"
    rhs: "Arith"


@dataclass(frozen=True)
class Neg:
    arg: "Arith"


@dataclass(frozen=True)
class Max:
    args: tuple["Arith", ...]


@dataclass(frozen=True)
class Min:
    args: tuple["Arith", ...]


@dataclass(frozen=True)
class Abs:
    arg: "Arith"


Arith = Union[Const, Var, Add, Sub, Mul, Neg, Max, Min, Abs]


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Comparison:
    op: str  # one of COMPARISON_OPS
    lhs: Arith
    rhs: Arith


@dataclass(frozen=True)
class And:
    args: tuple["BoolExpr", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["BoolExpr", ...]


@dataclass(frozen=True)
class Not:
    arg: "BoolExpr"


@dataclass(frozen=True)
class Implies:
    lhs: "BoolExpr"
    rhs: "BoolExpr"


@dataclass(frozen=True)
class Iff:
    lhs: "BoolExpr"
    rhs: "BoolExpr"


BoolExpr = Union[BoolLit, Comparison, And, Or, Not, Implies, Iff]


@dataclass(frozen=True)
class ModelSpec:
    """An optimization model: sense, objective, constraint predicates, decls."""

    sense: str  # "min" | "max"
    objective: Arith
    constraints: tuple[BoolExpr, ...]
    decls: tuple[VarDecl, ...]


def free_vars(expr) -> set[str]:
    """Names of all variables referenced anywhere in an expression tree."""
    out: set[str] = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, (Const, BoolLit)):
            pass
        elif isinstance(node, (Add, Sub, Mul, Implies, Iff)):
            stack.extend((node.lhs, node.rhs))
        elif isinstance(node, Comparison):
            stack.extend((node.lhs, node.rhs))
        elif isinstance(node, (Neg, Abs, Not)):
            stack.append(node.arg)
        elif isinstance(node, (Max, Min, And, Or)):
            stack.extend(node.args)
        else:
            raise TypeError(f"not an expression node: {node!r}")
    return out


# ---------------------------------------------------------------------------
# Exact evaluation
# ---------------------------------------------------------------------------

def eval_arith(expr: Arith, env: Mapping[str, Fraction]) -> Fraction:
    """Evaluate an arithmetic expression exactly at a valuation."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        return env[expr.name]
    if isinstance(expr, Add):
        return eval_arith(expr.lhs, env) + eval_arith(expr.rhs, env)
    if isinstance(expr, Sub):
        return eval_arith(expr.lhs, env) - eval_arith(expr.rhs, env)
    if isinstance(expr, Mul):
        return eval_arith(expr.lhs, env) * eval_arith(expr.rhs, env)
    if isinstance(expr, Neg):
        return -eval_arith(expr.arg, env)
    if isinstance(expr, Max):
        return max(eval_arith(a, env) for a in expr.args)
    if isinstance(expr, Min):
        return min(eval_arith(a, env) for a in expr.args)
    if isinstance(expr, Abs):
        return abs(eval_arith(expr.arg, env))
    raise TypeError(f"not an arithmetic node: {expr!r}")


_CMP = {
    "<=": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


def eval_predicate(expr: BoolExpr, env: Mapping[str, Fraction]) -> bool:
    """Evaluate a predicate exactly at a valuation."""
    if isinstance(expr, BoolLit):
        return expr.value
    if isinstance(expr, Comparison):
        return _CMP[expr.op](eval_arith(expr.lhs, env), eval_arith(expr.rhs, env))
    if isinstance(expr, And):
        return all(eval_predicate(a, env) for a in expr.args)
    if isinstance(expr, Or):
        return any(eval_predicate(a, env) for a in expr.args)
    if isinstance(expr, Not):
        return not eval_predicate(expr.arg, env)
    if isinstance(expr, Implies):
        return (not eval_predicate(expr.lhs, env)) or eval_predicate(expr.rhs, env)
    if isinstance(expr, Iff):
        return eval_predicate(expr.lhs, env) == eval_predicate(expr.rhs, env)
    raise TypeError(f"not a Boolean node: {expr!r}")


def is_affine(expr: Arith) -> bool:
    """True when the expression is affine in the declared variables.

    Products are affine only when one side is variable-free; max/min/abs
    are never affine (except over constants, which we do not chase).
    """
    if isinstance(expr, (Const, Var)):
        return True
    if isinstance(expr, (Add, Sub)):
        return is_affine(expr.lhs) and is_affine(expr.rhs)
    if isinstance(expr, Neg):
        return is_affine(expr.arg)
    if isinstance(expr, Mul):
        if not free_vars(expr.lhs):
            return is_affine(expr.rhs)
        if not free_vars(expr.rhs):
            return is_affine(expr.lhs)
        return False
    if isinstance(expr, (Max, Min, Abs)):
        return not free_vars(expr)
    raise TypeError(f"not an arithmetic node: {expr!r}")


# ---------------------------------------------------------------------------
# Formatting (inverse of the parser)
# ---------------------------------------------------------------------------
# Precedence levels, loosest first:
#   bool:  iff < implies < or < and < not < atom
#   arith: add/sub < mul < unary < atom

def _fmt_arith(expr: Arith, level: int) -> str:
    # level: 0 additive, 1 multiplicative, 2 unary/atom
    if isinstance(expr, Const):
        text = rat_to_str(expr.value) if expr.value >= 0 else f"-{rat_to_str(-expr.value)}"
        need = 2 if expr.value < 0 else 3
    elif isinstance(expr, Var):
        text, need = expr.name, 3
    elif isinstance(expr, Add):
        text = f"{_fmt_arith(expr.lhs, 0)} + {_fmt_arith(expr.rhs, 1)}"
        need = 0
    elif isinstance(expr, Sub):
        text = f"{_fmt_arith(expr.lhs, 0)} - {_fmt_arith(expr.rhs, 1)}"
        need = 0
    elif isinstance(expr, Mul):
        text = f"{_fmt_arith(expr.lhs, 1)} * {_fmt_arith(expr.rhs, 2)}"
        need = 1
    elif isinstance(expr, Neg):
        text = f"-{_fmt_arith(expr.arg, 3)}"
        need = 2
    elif isinstance(expr, (Max, Min)):
        name = "max" if isinstance(expr, Max) else "min"
        text = f"{name}({', '.join(_fmt_arith(a, 0) for a in expr.args)})"
        need = 3
    elif isinstance(expr, Abs):
        text = f"abs({_fmt_arith(expr.arg, 0)})"
        need = 3
    else:
        raise TypeError(f"not an arithmetic node: {expr!r}")
    return f"({text})" if need < level else text


def format_arith(expr: Arith) -> str:
    return _fmt_arith(expr, 0)


def _fmt_bool(expr: BoolExpr, level: int) -> str:
    # level: 0 iff, 1 implies, 2 or, 3 and, 4 not/atom
    if isinstance(expr, BoolLit):
        text, need = ("true" if expr.value else "false"), 5
    elif isinstance(expr, Comparison):
        text = f"{format_arith(expr.lhs)} {expr.op} {format_arith(expr.rhs)}"
        need = 5
    elif isinstance(expr, Iff):
        text = f"{_fmt_bool(expr.lhs, 1)} iff {_fmt_bool(expr.rhs, 1)}"
        need = 0
    elif isinstance(expr, Implies):
        # right-associative
        text = f"{_fmt_bool(expr.lhs, 2)} implies {_fmt_bool(expr.rhs, 1)}"
        need = 1
    elif isinstance(expr, Or):
        text = " or ".join(_fmt_bool(a, 3) for a in expr.args)
        need = 2
    elif isinstance(expr, And):
        text = " and ".join(_fmt_bool(a, 4) for a in expr.args)
        need = 3
    elif isinstance(expr, Not):
        text = f"not {_fmt_bool(expr.arg, 4)}"
        need = 4
    else:
        raise TypeError(f"not a Boolean node: {expr!r}")
    return f"({text})" if need < level else text


def format_predicate(expr: BoolExpr) -> str:
    return _fmt_bool(expr, 0)


def format_decl(decl: VarDecl) -> str:
    if decl.kind == "binary":
        return f"var {decl.name}: binary;"
    return (f"var {decl.name}: {decl.kind} in "
            f"[{rat_to_str(decl.lo)}, {rat_to_str(decl.hi)}];")


def format_spec(decls: Iterable[VarDecl], predicate: BoolExpr) -> str:
    lines = [format_decl(d) for d in decls]
    lines.append(f"assert {format_predicate(predicate)};")
    return "\n".join(lines) + "\n"


def format_model(model: ModelSpec) -> str:
    lines = [format_decl(d) for d in model.decls]
    lines.append(f"{model.sense} {format_arith(model.objective)}")
    if model.constraints:
        lines.append("s.t.")
        for constraint in model.constraints:
            lines.append(f"  {format_predicate(constraint)};")
    return "\n".join(lines) + "\n"
