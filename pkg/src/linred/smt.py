"""SMT-LIB2 backend: script building, solver subprocess, model parsing.

The solver is an external process that reads one complete SMT-LIB2 script on
stdin and writes its verdict to stdout.  One fresh process is spawned per
query, so no state leaks between queries and a timeout can kill the process
without poisoning later ones.

Serialization is deterministic: the same query always produces byte-identical
script text.  Rationals are emitted as ``(/ p q)`` with integer numerals and
negatives as ``(- p)``.
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Sequence, Union

from .lang import (
    Abs,
    Add,
    And,
    Arith,
    BoolExpr,
    BoolLit,
    Comparison,
    Const,
    Iff,
    Implies,
    Max,
    Min,
    Mul,
    Neg,
    Not,
    Or,
    Sub,
    Var,
    VarDecl,
)

__all__ = [
    "SExpr",
    "SmtQuery",
    "SolverConfig",
    "SolverFailure",
    "SolverResult",
    "arith_sexpr",
    "bool_sexpr",
    "bounds_assertions",
    "build_script",
    "decl_sort",
    "default_solver_command",
    "parse_sexprs",
    "pick_logic",
    "predicate_nonlinear",
    "rat_sexpr",
    "run_query",
    "run_script",
    "sexpr_to_str",
    "value_to_rat",
]

# An S-expression is a string atom or a tuple of S-expressions.
SExpr = Union[str, tuple]


def sexpr_to_str(expr: SExpr) -> str:
    if isinstance(expr, str):
        return expr
    return "(" + " ".join(sexpr_to_str(e) for e in expr) + ")"


def rat_sexpr(value: Fraction) -> SExpr:
    """Exact rational literal: bare integer, (/ p q), negatives via (- x)."""
    if value < 0:
        return ("-", rat_sexpr(-value))
    if value.denominator == 1:
        return str(value.numerator)
    return ("/", str(value.numerator), str(value.denominator))


# ---------------------------------------------------------------------------
# Expression translation
# ---------------------------------------------------------------------------
# All our arithmetic contexts are Real sorted (matrix coefficients are
# rationals), so Int-sorted symbols are always wrapped in to_real.

def arith_sexpr(expr: Arith, int_sorted: frozenset[str] = frozenset()) -> SExpr:
    if isinstance(expr, Const):
        return rat_sexpr(expr.value)
    if isinstance(expr, Var):
        if expr.name in int_sorted:
            return ("to_real", expr.name)
        return expr.name
    if isinstance(expr, Add):
        return ("+", arith_sexpr(expr.lhs, int_sorted),
                arith_sexpr(expr.rhs, int_sorted))
    if isinstance(expr, Sub):
        return ("-", arith_sexpr(expr.lhs, int_sorted),
                arith_sexpr(expr.rhs, int_sorted))
    if isinstance(expr, Mul):
        return ("*", arith_sexpr(expr.lhs, int_sorted),
                arith_sexpr(expr.rhs, int_sorted))
    if isinstance(expr, Neg):
        return ("-", arith_sexpr(expr.arg, int_sorted))
    if isinstance(expr, (Max, Min)):
        op = ">=" if isinstance(expr, Max) else "<="
        terms = [arith_sexpr(a, int_sorted) for a in expr.args]
        acc = terms[0]
        for term in terms[1:]:
            acc = ("ite", (op, acc, term), acc, term)
        return acc
    if isinstance(expr, Abs):
        inner = arith_sexpr(expr.arg, int_sorted)
        return ("ite", (">=", inner, "0"), inner, ("-", inner))
    raise TypeError(f"not an arithmetic node: {expr!r}")


def bool_sexpr(expr: BoolExpr, int_sorted: frozenset[str] = frozenset()) -> SExpr:
    if isinstance(expr, BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, Comparison):
        lhs = arith_sexpr(expr.lhs, int_sorted)
        rhs = arith_sexpr(expr.rhs, int_sorted)
        if expr.op == "=":
            return ("=", lhs, rhs)
        if expr.op == "!=":
            return ("not", ("=", lhs, rhs))
        return (expr.op, lhs, rhs)
    if isinstance(expr, And):
        return ("and",) + tuple(bool_sexpr(a, int_sorted) for a in expr.args)
    if isinstance(expr, Or):
        return ("or",) + tuple(bool_sexpr(a, int_sorted) for a in expr.args)
    if isinstance(expr, Not):
        return ("not", bool_sexpr(expr.arg, int_sorted))
    if isinstance(expr, Implies):
        return ("=>", bool_sexpr(expr.lhs, int_sorted),
                bool_sexpr(expr.rhs, int_sorted))
    if isinstance(expr, Iff):
        return ("=", bool_sexpr(expr.lhs, int_sorted),
                bool_sexpr(expr.rhs, int_sorted))
    raise TypeError(f"not a Boolean node: {expr!r}")


def decl_sort(decl: VarDecl) -> str:
    return "Int" if decl.is_integral else "Real"


def bounds_assertions(decls: Sequence[VarDecl]) -> list[SExpr]:
    """Domain bounds as assertions; Int symbols compare against Int numerals."""
    out: list[SExpr] = []
    for decl in decls:
        if decl.is_integral:
            out.append(("<=", str(decl.int_lo), decl.name))
            out.append(("<=", decl.name, str(decl.int_hi)))
        else:
            out.append(("<=", rat_sexpr(decl.lo), decl.name))
            out.append(("<=", decl.name, rat_sexpr(decl.hi)))
    return out


def predicate_nonlinear(expr) -> bool:
    """True when the expression multiplies two variable-bearing subterms."""
    from .lang import free_vars

    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Mul):
            if free_vars(node.lhs) and free_vars(node.rhs):
                return True
            stack.extend((node.lhs, node.rhs))
        elif isinstance(node, (Add, Sub, Implies, Iff)):
            stack.extend((node.lhs, node.rhs))
        elif isinstance(node, Comparison):
            stack.extend((node.lhs, node.rhs))
        elif isinstance(node, (Neg, Abs, Not)):
            stack.append(node.arg)
        elif isinstance(node, (Max, Min, And, Or)):
            stack.extend(node.args)
    return False


def pick_logic(has_int: bool, nonlinear: bool) -> str:
    if nonlinear:
        return "QF_NIRA" if has_int else "QF_NRA"
    return "QF_LIRA" if has_int else "QF_LRA"


# ---------------------------------------------------------------------------
# Queries and scripts
# ---------------------------------------------------------------------------

@dataclass
class SmtQuery:
    """One check-sat problem: sorted constants, assertions, values to read."""

    declarations: tuple[tuple[str, str], ...]  # (name, "Real"|"Int")
    assertions: tuple[SExpr, ...]
    logic: str = "QF_LRA"
    value_names: tuple[str, ...] = ()


def build_script(query: SmtQuery, want_model: bool) -> str:
    lines: list[str] = []
    if want_model:
        lines.append("(set-option :produce-models true)")
    lines.append(f"(set-logic {query.logic})")
    for name, sort in query.declarations:
        lines.append(f"(declare-const {name} {sort})")
    for assertion in query.assertions:
        lines.append(f"(assert {sexpr_to_str(assertion)})")
    lines.append("(check-sat)")
    if want_model and query.value_names:
        lines.append(f"(get-value ({' '.join(query.value_names)}))")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Solver process
# ---------------------------------------------------------------------------

class SolverFailure(Exception):
    """The solver produced no recognizable verdict."""

    def __init__(self, message: str, transcript: str = ""):
        super().__init__(message)
        self.transcript = transcript


@dataclass
class SolverResult:
    status: str  # "sat" | "unsat" | "unknown"
    reason: str | None = None  # for unknown: "timeout" | "solver"
    model: dict[str, Fraction] | None = None


@dataclass
class SolverConfig:
    command: list[str]
    timeout_s: float = 60.0
    logic_override: str | None = None
    extra_env: dict[str, str] = field(default_factory=dict)


_NODE_MODULES: list[str | None] = []  # cached `npm root -g` result


def _npm_global_root() -> str | None:
    if not _NODE_MODULES:
        try:
            proc = subprocess.run(["npm", "root", "-g"], capture_output=True,
                                  text=True, timeout=30)
            _NODE_MODULES.append(proc.stdout.strip() or None)
        except (OSError, subprocess.TimeoutExpired):
            _NODE_MODULES.append(None)
    return _NODE_MODULES[0]


def default_solver_command() -> tuple[list[str], dict[str, str]]:
    """Locate a usable solver: env override, z3, cvc5, bundled z3-wasm wrapper.

    Returns the argv and any extra environment it needs.
    """
    override = os.environ.get("LINRED_SOLVER_CMD")
    if override:
        return shlex.split(override), {}
    if shutil.which("z3"):
        return ["z3", "-in"], {}
    if shutil.which("cvc5"):
        return ["cvc5"], {}
    node = shutil.which("node")
    if node:
        wrapper = resources.files("linred").joinpath("solvers/z3_stdin.js")
        with resources.as_file(wrapper) as path:
            argv = [node, str(path)]
        extra = {}
        root = _npm_global_root()
        if root:
            existing = os.environ.get("NODE_PATH")
            extra["NODE_PATH"] = f"{root}:{existing}" if existing else root
        return argv, extra
    raise SolverFailure(
        "no SMT solver found: set LINRED_SOLVER_CMD, or install z3/cvc5, "
        "or install node with the z3-solver npm package")


def run_script(config: SolverConfig, script: str) -> tuple[str, str]:
    """Run one solver process on a script; returns (stdout, stderr).

    A timeout kills the process and raises subprocess.TimeoutExpired.
    """
    env = None
    if config.extra_env:
        env = dict(os.environ)
        env.update(config.extra_env)
    try:
        proc = subprocess.run(
            config.command, input=script, capture_output=True, text=True,
            timeout=config.timeout_s, env=env)
    except OSError as exc:
        raise SolverFailure(
            f"cannot spawn solver {config.command!r}: {exc}") from exc
    return proc.stdout, proc.stderr


def run_query(config: SolverConfig, query: SmtQuery,
              want_model: bool = True) -> SolverResult:
    if config.logic_override:
        query = SmtQuery(query.declarations, query.assertions,
                         config.logic_override, query.value_names)
    script = build_script(query, want_model)
    try:
        stdout, stderr = run_script(config, script)
    except subprocess.TimeoutExpired:
        return SolverResult("unknown", reason="timeout")
    lines = [line for line in stdout.splitlines() if line.strip()]
    if not lines:
        raise SolverFailure("solver produced no output",
                            transcript=stdout + stderr)
    verdict = lines[0].strip()
    if verdict not in ("sat", "unsat", "unknown"):
        raise SolverFailure(f"unrecognized verdict {verdict!r}",
                            transcript=stdout + stderr)
    if verdict == "unsat":
        return SolverResult("unsat")
    if verdict == "unknown":
        return SolverResult("unknown", reason="solver")
    result = SolverResult("sat")
    if want_model and query.value_names:
        rest = "\n".join(lines[1:])
        result.model = _parse_value_response(rest, query.value_names,
                                             stdout + stderr)
    return result


# ---------------------------------------------------------------------------
# Model value parsing
# ---------------------------------------------------------------------------

def parse_sexprs(text: str) -> list[SExpr]:
    """Parse a stream of S-expressions (solver get-value responses)."""
    tokens: list[str] = []
    current = []
    for ch in text:
        if ch in "()" or ch.isspace():
            if current:
                tokens.append("".join(current))
                current = []
            if ch in "()":
                tokens.append(ch)
        else:
            current.append(ch)
    if current:
        tokens.append("".join(current))
    out: list[SExpr] = []
    stack: list[list] = []
    for token in tokens:
        if token == "(":
            stack.append([])
        elif token == ")":
            if not stack:
                raise SolverFailure("unbalanced parentheses in solver output",
                                    transcript=text)
            done = tuple(stack.pop())
            if stack:
                stack[-1].append(done)
            else:
                out.append(done)
        else:
            if stack:
                stack[-1].append(token)
            else:
                out.append(token)
    if stack:
        raise SolverFailure("unbalanced parentheses in solver output",
                            transcript=text)
    return out


def value_to_rat(expr: SExpr) -> Fraction:
    """Solver numeral to exact rational: 5, 5.25, (/ p q), (- x), nested."""
    if isinstance(expr, str):
        return Fraction(expr)
    if len(expr) == 2 and expr[0] == "-":
        return -value_to_rat(expr[1])
    if len(expr) == 3 and expr[0] == "/":
        return value_to_rat(expr[1]) / value_to_rat(expr[2])
    raise SolverFailure(f"cannot read numeral {sexpr_to_str(expr)!r}")


def _parse_value_response(text: str, names: Sequence[str],
                          transcript: str) -> dict[str, Fraction]:
    try:
        forms = parse_sexprs(text)
    except SolverFailure:
        raise SolverFailure("sat but model response unreadable",
                            transcript=transcript) from None
    values: dict[str, Fraction] = {}
    for form in forms:
        if not isinstance(form, tuple):
            continue
        for pair in form:
            if (isinstance(pair, tuple) and len(pair) == 2
                    and isinstance(pair[0], str)):
                try:
                    values[pair[0]] = value_to_rat(pair[1])
                except SolverFailure:
                    continue
    missing = [name for name in names if name not in values]
    if missing:
        raise SolverFailure(f"sat but no values for {missing}",
                            transcript=transcript)
    return {name: values[name] for name in names}
