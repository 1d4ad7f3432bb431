"""Loop-description mini-language: parser, static analyzer and feature vectors.

A ``.loop`` file describes the body of one annotated parallel loop::

    loop N {
        fvar a; fvar b; fvar c; fvar k;
        fassign c[i] = a[i];
        fassign b[i] = k * c[i];
    }

The analyzer walks the tree and produces the static features consumed by
the learning models, counted per single iteration of the outermost loop.
Statements inside ``loop m { ... }`` are weighted by ``m`` (nested loops
multiply).

Identifier typing: an explicit ``ivar``/``fvar`` declaration wins, then the
keyword of an assignment targeting the name (``iassign``/``fassign``).  A name
with neither takes the type of the context it appears in: the right-hand side
of ``fassign`` is float, everything else (``iassign`` right-hand sides,
subscripts, ``if`` conditions) is int.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, fields
from typing import Union

import numpy as np

__all__ = [
    "ScalarType", "VarRef", "IndexedRef", "Literal", "BinOp", "Expr",
    "Assign", "If", "Call", "InnerLoop", "Decl", "Statement", "LoopAst",
    "StaticFeatures", "DynamicFeatures", "LoopSpecError",
    "parse_loop_spec", "analyze_statement", "make_feature_vector",
    "FEATURE_NAMES", "FULL_FEATURE_NAMES", "SYMBOLIC_TRIP",
]

SYMBOLIC_TRIP = "N"

# Order of the model input vector; index 0 is the constant bias term.
FEATURE_NAMES = (
    "bias", "threads", "iterations", "total_ops", "float_ops",
    "comparison_ops", "loop_level",
)

# All twelve collected features; the first six are the ones the models use.
FULL_FEATURE_NAMES = (
    "threads", "iterations", "total_ops", "float_ops", "comparison_ops",
    "loop_level", "num_int_vars", "num_float_vars", "num_if", "num_if_inner",
    "num_calls", "num_calls_inner",
)


class ScalarType(enum.Enum):
    INT = "int"
    FLOAT = "float"
    BOOL = "bool"


ARITHMETIC_OPS = ("+", "-", "*", "/")
COMPARISON_OPS = ("<", "<=", ">", ">=", "==", "!=")


@dataclass(frozen=True)
class VarRef:
    name: str
    scalar_type: ScalarType


@dataclass(frozen=True)
class IndexedRef:
    array: str
    index: "Expr"
    scalar_type: ScalarType


@dataclass(frozen=True)
class Literal:
    scalar_type: ScalarType
    text: str = ""


@dataclass(frozen=True)
class BinOp:
    op: str
    lhs: "Expr"
    rhs: "Expr"
    result_type: ScalarType

    @property
    def is_comparison(self) -> bool:
        return self.op in COMPARISON_OPS

    @property
    def is_float(self) -> bool:
        return ScalarType.FLOAT in (expr_type(self.lhs), expr_type(self.rhs))


Expr = Union[VarRef, IndexedRef, Literal, BinOp]


def expr_type(e: Expr) -> ScalarType:
    if isinstance(e, BinOp):
        return e.result_type
    return e.scalar_type


@dataclass(frozen=True)
class Assign:
    lhs_var: str
    rhs: Expr
    scalar_type: ScalarType
    lhs_index: Expr | None = None


@dataclass(frozen=True)
class If:
    cond: Expr
    then_body: tuple
    else_body: tuple = ()


@dataclass(frozen=True)
class Call:
    name: str


@dataclass(frozen=True)
class InnerLoop:
    trip_count: int
    body: tuple


@dataclass(frozen=True)
class Decl:
    var: str
    scalar_type: ScalarType


Statement = Union[Assign, If, Call, InnerLoop, Decl]


@dataclass(frozen=True)
class LoopAst:
    trip_count: int | str
    body: tuple

    def __post_init__(self):
        if isinstance(self.trip_count, int) and self.trip_count < 1:
            raise ValueError(f"trip count must be >= 1, got {self.trip_count}")
        if isinstance(self.trip_count, str) and self.trip_count != SYMBOLIC_TRIP:
            raise ValueError(f"symbolic trip count must be {SYMBOLIC_TRIP!r}")


@dataclass(frozen=True)
class StaticFeatures:
    total_ops: int = 0
    float_ops: int = 0
    comparison_ops: int = 0
    deepest_loop_level: int = 0
    num_int_vars: int = 0
    num_float_vars: int = 0
    num_if: int = 0
    num_if_inner: int = 0
    num_calls: int = 0
    num_calls_inner: int = 0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class DynamicFeatures:
    num_threads: int
    num_iterations: int

    def __post_init__(self):
        if self.num_threads < 1 or self.num_iterations < 1:
            raise ValueError("threads and iterations must both be >= 1")


# --------------------------------------------------------------------------
# Parsing

class LoopSpecError(ValueError):
    """Syntax or semantic error in a loop spec, carrying a 1-based position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<float>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|==|!=|[-+*/<>=;{}()\[\]])
""", re.VERBOSE)

_KEYWORDS = {"loop", "if", "else", "call", "iassign", "fassign", "ivar", "fvar"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise LoopSpecError(f"unexpected character {text[pos]!r}",
                                line, pos - line_start + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


def _collect_types(tokens: list[_Token]) -> dict[str, ScalarType]:
    declared: dict[str, ScalarType] = {}
    assigned: dict[str, ScalarType] = {}
    for prev, tok in zip(tokens, tokens[1:]):
        if tok.kind != "ident" or prev.text not in ("ivar", "fvar", "iassign", "fassign"):
            continue
        ty = ScalarType.INT if prev.text[0] == "i" else ScalarType.FLOAT
        table = declared if prev.text.endswith("var") else assigned
        if table.get(tok.text, ty) is not ty:
            raise LoopSpecError(f"conflicting types for {tok.text!r}", tok.line, tok.column)
        table[tok.text] = ty
    for name, ty in assigned.items():
        if declared.get(name, ty) is not ty:
            raise LoopSpecError(f"{name!r} declared {declared[name].value} "
                                f"but assigned as {ty.value}", 1, 1)
    return {**assigned, **declared}


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.types = _collect_types(self.tokens)
        self.pos = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def error(self, message: str, tok: _Token | None = None) -> LoopSpecError:
        tok = tok or self.tok
        return LoopSpecError(message, tok.line, tok.column)

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        if self.tok.text != text or self.tok.kind == "eof":
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def expect_ident(self) -> str:
        if self.tok.kind != "ident" or self.tok.text in _KEYWORDS:
            raise self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        return self.advance().text

    def parse(self) -> LoopAst:
        self.expect("loop")
        if self.tok.kind == "int":
            trip: int | str = self._trip_literal()
        elif self.tok.text == SYMBOLIC_TRIP:
            self.advance()
            trip = SYMBOLIC_TRIP
        else:
            raise self.error("expected integer trip count or 'N'")
        body = self.block()
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r} after loop body")
        return LoopAst(trip, body)

    def _trip_literal(self) -> int:
        tok = self.advance()
        value = int(tok.text)
        if value < 1:
            raise self.error("trip count must be >= 1", tok)
        return value

    def block(self) -> tuple:
        self.expect("{")
        body = []
        while self.tok.text != "}":
            if self.tok.kind == "eof":
                raise self.error("unterminated block, expected '}'")
            body.append(self.statement())
        self.expect("}")
        return tuple(body)

    def statement(self) -> Statement:
        tok = self.tok
        if tok.text in ("iassign", "fassign"):
            self.advance()
            ty = ScalarType.INT if tok.text == "iassign" else ScalarType.FLOAT
            name = self.expect_ident()
            index = None
            if self.tok.text == "[":
                self.advance()
                index = self.expr(ScalarType.INT)
                self.expect("]")
            self.expect("=")
            rhs = self.expr(ty)
            self.expect(";")
            return Assign(name, rhs, ty, index)
        if tok.text == "if":
            self.advance()
            self.expect("(")
            cond = self.expr(ScalarType.INT)
            self.expect(")")
            then_body = self.block()
            else_body: tuple = ()
            if self.tok.text == "else":
                self.advance()
                else_body = self.block()
            return If(cond, then_body, else_body)
        if tok.text == "call":
            self.advance()
            name = self.expect_ident()
            self.expect(";")
            return Call(name)
        if tok.text == "loop":
            self.advance()
            if self.tok.kind != "int":
                raise self.error("inner loop trip count must be an integer literal")
            trip = self._trip_literal()
            return InnerLoop(trip, self.block())
        if tok.text in ("ivar", "fvar"):
            self.advance()
            name = self.expect_ident()
            self.expect(";")
            return Decl(name, self.types[name])
        raise self.error(f"expected statement, found {tok.text or 'end of input'!r}")

    # expr := sum (cmp sum)* ; sum := term (('+'|'-') term)* ; term := atom (('*'|'/') atom)*
    def expr(self, ctx: ScalarType) -> Expr:
        node = self._sum(ctx)
        while self.tok.text in COMPARISON_OPS:
            op = self.advance().text
            node = BinOp(op, node, self._sum(ctx), ScalarType.BOOL)
        return node

    def _sum(self, ctx: ScalarType) -> Expr:
        node = self._term(ctx)
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            node = _arith(op, node, self._term(ctx))
        return node

    def _term(self, ctx: ScalarType) -> Expr:
        node = self._atom(ctx)
        while self.tok.text in ("*", "/"):
            op = self.advance().text
            node = _arith(op, node, self._atom(ctx))
        return node

    def _atom(self, ctx: ScalarType) -> Expr:
        tok = self.tok
        if tok.kind == "int":
            self.advance()
            return Literal(ScalarType.INT, tok.text)
        if tok.kind == "float":
            self.advance()
            return Literal(ScalarType.FLOAT, tok.text)
        if tok.text == "(":
            self.advance()
            node = self.expr(ctx)
            self.expect(")")
            return node
        name = self.expect_ident()
        ty = self.types.get(name, ctx)
        if self.tok.text == "[":
            self.advance()
            index = self.expr(ScalarType.INT)
            self.expect("]")
            return IndexedRef(name, index, ty)
        return VarRef(name, ty)


def _arith(op: str, lhs: Expr, rhs: Expr) -> BinOp:
    is_float = ScalarType.FLOAT in (expr_type(lhs), expr_type(rhs))
    return BinOp(op, lhs, rhs, ScalarType.FLOAT if is_float else ScalarType.INT)


def parse_loop_spec(text: str) -> LoopAst:
    """Parse loop-spec source text; raises :class:`LoopSpecError` on bad input."""
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# Analysis

class _Counter:
    def __init__(self):
        self.total = self.float = self.comparison = 0
        self.level = 0
        self.num_if = self.num_if_inner = 0
        self.num_calls = self.num_calls_inner = 0
        self.vars: dict[str, ScalarType] = {}

    def body(self, stmts, weight: int, depth: int):
        for s in stmts:
            self.statement(s, weight, depth)

    def statement(self, s: Statement, weight: int, depth: int):
        if isinstance(s, Assign):
            self.total += weight
            if expr_type(s.rhs) is ScalarType.FLOAT:
                self.float += weight
            self.vars.setdefault(s.lhs_var, s.scalar_type)
            if s.lhs_index is not None:
                self.expr(s.lhs_index, weight)
            self.expr(s.rhs, weight)
        elif isinstance(s, If):
            self.num_if += 1
            self.num_if_inner += depth > 0
            self.expr(s.cond, weight)
            self.body(s.then_body, weight, depth)
            self.body(s.else_body, weight, depth)
        elif isinstance(s, Call):
            self.num_calls += 1
            self.num_calls_inner += depth > 0
        elif isinstance(s, InnerLoop):
            self.level = max(self.level, depth + 1)
            self.body(s.body, weight * s.trip_count, depth + 1)
        elif isinstance(s, Decl):
            self.vars.setdefault(s.var, s.scalar_type)
        else:
            raise TypeError(f"not a statement: {s!r}")

    def expr(self, e: Expr, weight: int):
        if isinstance(e, BinOp):
            self.total += weight
            self.float += weight * e.is_float
            self.comparison += weight * e.is_comparison
            self.expr(e.lhs, weight)
            self.expr(e.rhs, weight)
        elif isinstance(e, IndexedRef):
            self.vars.setdefault(e.array, e.scalar_type)
            self.expr(e.index, weight)
        elif isinstance(e, VarRef):
            self.vars.setdefault(e.name, e.scalar_type)


def analyze_statement(ast: LoopAst) -> StaticFeatures:
    """Count the static features of one outermost-loop iteration."""
    c = _Counter()
    c.body(ast.body, 1, 0)
    types = list(c.vars.values())
    return StaticFeatures(
        total_ops=c.total,
        float_ops=c.float,
        comparison_ops=c.comparison,
        deepest_loop_level=c.level,
        num_int_vars=types.count(ScalarType.INT),
        num_float_vars=types.count(ScalarType.FLOAT),
        num_if=c.num_if,
        num_if_inner=c.num_if_inner,
        num_calls=c.num_calls,
        num_calls_inner=c.num_calls_inner,
    )


def make_feature_vector(s: StaticFeatures, d: DynamicFeatures) -> np.ndarray:
    """Raw-scale model input laid out as :data:`FEATURE_NAMES`."""
    return np.array([
        1.0, d.num_threads, d.num_iterations, s.total_ops, s.float_ops,
        s.comparison_ops, s.deepest_loop_level,
    ], dtype=np.float64)


def full_feature_row(s: StaticFeatures, d: DynamicFeatures) -> np.ndarray:
    """All twelve collected features in :data:`FULL_FEATURE_NAMES` order."""
    return np.array([
        d.num_threads, d.num_iterations, s.total_ops, s.float_ops,
        s.comparison_ops, s.deepest_loop_level, s.num_int_vars,
        s.num_float_vars, s.num_if, s.num_if_inner, s.num_calls,
        s.num_calls_inner,
    ], dtype=np.float64)
