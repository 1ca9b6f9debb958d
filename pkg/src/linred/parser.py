"""Parser for the textual constraint DSL (.pred predicate specs, .opt models).

The grammar is line-oriented and keyword based::

    var a: binary;
    var b: real in [0, 5];
    var n: int in [-3, 7];
    assert c = max(a, b);

Model files declare variables the same way, then give an objective and an
optional constraint block::

    min max(a, b)
    s.t.
      a + b >= 4;

Numbers are exact rationals: integers, decimals (5.25), or fractions (7/2).
Comments run from ``#`` to end of line.  Expressions are parsed with one
unified precedence tower and then split into arithmetic/Boolean categories,
so mixed-category mistakes are reported with positions at parse time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

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
    ModelSpec,
    Mul,
    Neg,
    Not,
    Or,
    Sub,
    Var,
    VarDecl,
)

__all__ = ["DslError", "ParseError", "TypeCheckError", "parse_spec", "parse_model"]


class DslError(Exception):
    """Base for parser diagnostics; carries a 1-based line/column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class ParseError(DslError):
    """Malformed syntax."""


class TypeCheckError(DslError):
    """Well-formed syntax with a category, resolution, or domain error."""


_KEYWORDS = {
    "var", "binary", "real", "int", "in", "assert", "min", "max", "abs",
    "and", "or", "not", "implies", "iff", "true", "false",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<st>s\.t\.)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|!=|[-+*/<>=(),;:\[\]])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num" | "ident" | "kw" | "op" | "st" | "eof"
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        lexeme = match.group(0)
        kind = match.lastgroup
        if kind not in ("ws", "comment"):
            if kind == "ident" and lexeme in _KEYWORDS:
                kind = "kw"
            tokens.append(_Token(kind, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = match.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


# Untyped parse tree; split into Arith/BoolExpr after parsing so that
# category errors can point at source positions.
@dataclass(frozen=True)
class _Raw:
    op: str
    args: tuple
    line: int
    col: int


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.index = 0

    # -- token plumbing ----------------------------------------------------

    @property
    def tok(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tok
        self.index += 1
        return token

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def expect(self, kind: str, text: str | None = None) -> _Token:
        if not self.at(kind, text):
            want = text if text is not None else kind
            got = self.tok.text or "end of input"
            raise ParseError(f"expected {want!r}, found {got!r}",
                             self.tok.line, self.tok.col)
        return self.advance()

    def fail(self, message: str):
        raise ParseError(message, self.tok.line, self.tok.col)

    # -- declarations ------------------------------------------------------

    def parse_decls(self) -> list[VarDecl]:
        decls: list[VarDecl] = []
        seen: set[str] = set()
        while self.at("kw", "var"):
            token = self.advance()
            name_tok = self.expect("ident")
            if name_tok.text in seen:
                raise TypeCheckError(f"duplicate variable {name_tok.text!r}",
                                     name_tok.line, name_tok.col)
            seen.add(name_tok.text)
            self.expect("op", ":")
            decl = self._parse_domain(name_tok.text, token)
            self.expect("op", ";")
            decls.append(decl)
        return decls

    def _parse_domain(self, name: str, at_tok: _Token) -> VarDecl:
        if self.at("kw", "binary"):
            self.advance()
            return VarDecl(name, "binary", Fraction(0), Fraction(1))
        if self.at("kw", "real") or self.at("kw", "int"):
            kind_tok = self.advance()
            if not self.at("kw", "in"):
                raise TypeCheckError(
                    f"{kind_tok.text} variable {name!r} needs bounds "
                    "('in [lo, hi]')", kind_tok.line, kind_tok.col)
            self.advance()
            self.expect("op", "[")
            lo = self._parse_signed_number()
            self.expect("op", ",")
            hi = self._parse_signed_number()
            self.expect("op", "]")
            try:
                return VarDecl(name, kind_tok.text, lo, hi)
            except ValueError as exc:
                raise TypeCheckError(str(exc), at_tok.line, at_tok.col) from None
        self.fail("expected a domain: binary, real in [..], or int in [..]")

    def _parse_signed_number(self) -> Fraction:
        negative = False
        if self.at("op", "-") or self.at("op", "+"):
            negative = self.advance().text == "-"
        value = self._parse_number_literal()
        return -value if negative else value

    def _parse_number_literal(self) -> Fraction:
        num = self.expect("num")
        value = Fraction(num.text)
        if self.at("op", "/"):
            self.advance()
            den_tok = self.expect("num")
            den = Fraction(den_tok.text)
            if den == 0:
                raise ParseError("zero denominator", den_tok.line, den_tok.col)
            value = value / den
        return value

    # -- unified expression grammar ---------------------------------------
    # iff < implies < or < and < not < comparison < add/sub < mul < unary

    def parse_expr(self) -> _Raw:
        return self._parse_iff()

    def _parse_iff(self) -> _Raw:
        node = self._parse_implies()
        while self.at("kw", "iff"):
            token = self.advance()
            node = _Raw("iff", (node, self._parse_implies()), token.line, token.col)
        return node

    def _parse_implies(self) -> _Raw:
        node = self._parse_or()
        if self.at("kw", "implies"):
            token = self.advance()
            return _Raw("implies", (node, self._parse_implies()),
                        token.line, token.col)
        return node

    def _parse_or(self) -> _Raw:
        first = self._parse_and()
        args = [first]
        while self.at("kw", "or"):
            token = self.advance()
            args.append(self._parse_and())
        if len(args) == 1:
            return first
        return _Raw("or", tuple(args), first.line, first.col)

    def _parse_and(self) -> _Raw:
        first = self._parse_not()
        args = [first]
        while self.at("kw", "and"):
            self.advance()
            args.append(self._parse_not())
        if len(args) == 1:
            return first
        return _Raw("and", tuple(args), first.line, first.col)

    def _parse_not(self) -> _Raw:
        if self.at("kw", "not"):
            token = self.advance()
            return _Raw("not", (self._parse_not(),), token.line, token.col)
        return self._parse_comparison()

    def _parse_comparison(self) -> _Raw:
        lhs = self._parse_additive()
        if self.tok.kind == "op" and self.tok.text in ("<=", "<", "=", "!=", ">=", ">"):
            op_tok = self.advance()
            rhs = self._parse_additive()
            if self.tok.kind == "op" and self.tok.text in ("<=", "<", "=", "!=", ">=", ">"):
                self.fail("chained comparisons are not allowed; use 'and'")
            return _Raw("cmp:" + op_tok.text, (lhs, rhs), op_tok.line, op_tok.col)
        return lhs

    def _parse_additive(self) -> _Raw:
        node = self._parse_multiplicative()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            token = self.advance()
            rhs = self._parse_multiplicative()
            node = _Raw("add" if token.text == "+" else "sub", (node, rhs),
                        token.line, token.col)
        return node

    def _parse_multiplicative(self) -> _Raw:
        node = self._parse_unary()
        while self.at("op", "*"):
            token = self.advance()
            node = _Raw("mul", (node, self._parse_unary()), token.line, token.col)
        return node

    def _parse_unary(self) -> _Raw:
        if self.at("op", "-"):
            token = self.advance()
            return _Raw("neg", (self._parse_unary(),), token.line, token.col)
        return self._parse_atom()

    def _parse_atom(self) -> _Raw:
        token = self.tok
        if token.kind == "num":
            value = self._parse_number_literal()
            return _Raw("const", (value,), token.line, token.col)
        if token.kind == "ident":
            self.advance()
            return _Raw("var", (token.text,), token.line, token.col)
        if self.at("kw", "true") or self.at("kw", "false"):
            self.advance()
            return _Raw("bool", (token.text == "true",), token.line, token.col)
        if token.kind == "kw" and token.text in ("max", "min", "abs"):
            self.advance()
            self.expect("op", "(")
            args = [self.parse_expr()]
            while self.at("op", ","):
                self.advance()
                args.append(self.parse_expr())
            self.expect("op", ")")
            if token.text == "abs" and len(args) != 1:
                raise ParseError("abs takes exactly one argument",
                                 token.line, token.col)
            return _Raw(token.text, tuple(args), token.line, token.col)
        if self.at("op", "("):
            self.advance()
            inner = self.parse_expr()
            self.expect("op", ")")
            return inner
        self.fail(f"expected an expression, found {token.text or 'end of input'!r}")


# -- category split --------------------------------------------------------

def _to_arith(raw: _Raw, decls: dict[str, VarDecl]) -> Arith:
    if raw.op == "const":
        return Const(raw.args[0])
    if raw.op == "var":
        name = raw.args[0]
        if name not in decls:
            raise TypeCheckError(f"undeclared variable {name!r}", raw.line, raw.col)
        return Var(name)
    if raw.op in ("add", "sub", "mul"):
        cls = {"add": Add, "sub": Sub, "mul": Mul}[raw.op]
        return cls(_to_arith(raw.args[0], decls), _to_arith(raw.args[1], decls))
    if raw.op == "neg":
        return Neg(_to_arith(raw.args[0], decls))
    if raw.op == "max":
        return Max(tuple(_to_arith(a, decls) for a in raw.args))
    if raw.op == "min":
        return Min(tuple(_to_arith(a, decls) for a in raw.args))
    if raw.op == "abs":
        return Abs(_to_arith(raw.args[0], decls))
    raise TypeCheckError("Boolean expression used where a number is expected",
                         raw.line, raw.col)


def _to_bool(raw: _Raw, decls: dict[str, VarDecl]) -> BoolExpr:
    if raw.op == "bool":
        return BoolLit(raw.args[0])
    if raw.op.startswith("cmp:"):
        return Comparison(raw.op[4:], _to_arith(raw.args[0], decls),
                          _to_arith(raw.args[1], decls))
    if raw.op == "and":
        return And(tuple(_to_bool(a, decls) for a in raw.args))
    if raw.op == "or":
        return Or(tuple(_to_bool(a, decls) for a in raw.args))
    if raw.op == "not":
        return Not(_to_bool(raw.args[0], decls))
    if raw.op == "implies":
        return Implies(_to_bool(raw.args[0], decls), _to_bool(raw.args[1], decls))
    if raw.op == "iff":
        return Iff(_to_bool(raw.args[0], decls), _to_bool(raw.args[1], decls))
    raise TypeCheckError("arithmetic expression used where a condition is expected",
                         raw.line, raw.col)


# -- entry points ----------------------------------------------------------

def parse_spec(text: str) -> tuple[tuple[VarDecl, ...], BoolExpr]:
    """Parse a predicate spec: declarations followed by exactly one assert."""
    parser = _Parser(text)
    decls = parser.parse_decls()
    table = {d.name: d for d in decls}
    parser.expect("kw", "assert")
    predicate = _to_bool(parser.parse_expr(), table)
    parser.expect("op", ";")
    if parser.at("kw", "assert"):
        raise ParseError("a predicate spec holds exactly one assert",
                         parser.tok.line, parser.tok.col)
    parser.expect("eof")
    return tuple(decls), predicate


def parse_model(text: str) -> ModelSpec:
    """Parse a model: declarations, 'min'/'max' objective, optional s.t. block."""
    parser = _Parser(text)
    decls = parser.parse_decls()
    table = {d.name: d for d in decls}
    if not (parser.at("kw", "min") or parser.at("kw", "max")):
        parser.fail("expected 'min' or 'max' objective")
    sense = parser.advance().text
    objective = _to_arith(parser.parse_expr(), table)
    if parser.at("op", ";"):
        parser.advance()
    constraints: list[BoolExpr] = []
    if parser.at("st"):
        parser.advance()
        while not parser.at("eof"):
            constraints.append(_to_bool(parser.parse_expr(), table))
            parser.expect("op", ";")
    parser.expect("eof")
    return ModelSpec(sense, objective, tuple(constraints), tuple(decls))
