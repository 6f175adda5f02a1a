# Copyright (c) 2023 Graphcore Ltd. All rights reserved.
"""
Rational expressions over field, multiplier and parameter names.

Grammar, loosest binding first:

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" ["-"] INTEGER)?
    atom   := INTEGER | NAME | ("d" | "dbar") "(" expr ")" | "(" expr ")"

Derivatives may only be applied to jets: `dbar(dbar(phi))`, `d(dbar(lam))`.
In operator mode the names `D` and `Dbar` stand for the two derivations, so
rendered operators such as `(g*lam)*D + Dbar^2` parse back.
"""
import re
from typing import List, NamedTuple, Optional, Union

from ..algebra.jetfield import FieldElem, JetCoord, JetKind, JetSpace
from ..algebra.ore import OreOp

__all__ = [
    "ExpressionSyntaxError",
    "Token",
    "tokenize",
    "Num",
    "Name",
    "Deriv",
    "Neg",
    "BinOp",
    "Pow",
    "parse_expression",
    "print_expression",
    "evaluate",
    "parse_field_elem",
    "parse_operator",
]

DERIVATIVES = ("d", "dbar")
OPERATOR_NAMES = ("D", "Dbar")
RESERVED_NAMES = DERIVATIVES + OPERATOR_NAMES

_TOKEN_RE = re.compile(r"\s*(?:(?P<number>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))")


class ExpressionSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class Token(NamedTuple):
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str, line: int = 1) -> List[Token]:
    tokens = []
    position = 0
    text = text.rstrip()
    while position < len(text):
        match = _TOKEN_RE.match(text, position)
        if match is None or match.end() == position:
            stripped = len(text) - len(text[position:].lstrip())
            raise ExpressionSyntaxError(f"Unexpected character {text[stripped]!r}", line, stripped + 1)
        kind = match.lastgroup
        tokens.append(Token(kind, match.group(kind), line, match.start(kind) + 1))
        position = match.end()
    tokens.append(Token("end", "", line, len(text) + 1))
    return tokens


class Num(NamedTuple):
    value: int


class Name(NamedTuple):
    id: str


class Deriv(NamedTuple):
    op: str
    arg: "Node"


class Neg(NamedTuple):
    arg: "Node"


class BinOp(NamedTuple):
    op: str
    left: "Node"
    right: "Node"


class Pow(NamedTuple):
    base: "Node"
    exponent: int


Node = Union[Num, Name, Deriv, Neg, BinOp, Pow]


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.position = 0

    @property
    def token(self) -> Token:
        return self.tokens[self.position]

    def advance(self) -> Token:
        token = self.token
        self.position += 1
        return token

    def expect(self, text: str) -> Token:
        if self.token.text != text or self.token.kind not in ("op",):
            self.fail(f"Expected {text!r}")
        return self.advance()

    def fail(self, message: str):
        token = self.token
        found = token.text if token.kind != "end" else "end of input"
        raise ExpressionSyntaxError(f"{message}, found {found!r}", token.line, token.column)

    def parse(self) -> Node:
        node = self.expr()
        if self.token.kind != "end":
            self.fail("Unexpected token")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.token.kind == "op" and self.token.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.token.kind == "op" and self.token.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.token.kind == "op" and self.token.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.token.kind == "op" and self.token.text == "^":
            self.advance()
            sign = 1
            if self.token.kind == "op" and self.token.text == "-":
                self.advance()
                sign = -1
            if self.token.kind != "number":
                self.fail("Exponents must be integer literals")
            return Pow(base, sign * int(self.advance().text))
        return base

    def atom(self) -> Node:
        token = self.token
        if token.kind == "number":
            self.advance()
            return Num(int(token.text))
        if token.kind == "name":
            self.advance()
            if token.text in DERIVATIVES:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Deriv(token.text, arg)
            return Name(token.text)
        if token.kind == "op" and token.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail("Expected a number, a name or '('")


def parse_expression(text: str, line: int = 1) -> Node:
    return _Parser(tokenize(text, line)).parse()


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}
_UNARY = 3
_POWER = 4
_ATOM = 5


def _precedence(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PRECEDENCE[node.op]
    if isinstance(node, Neg):
        return _UNARY
    if isinstance(node, Pow):
        return _POWER
    return _ATOM


def print_expression(node: Node) -> str:
    """Text that parses back to the same tree."""
    if isinstance(node, Num):
        return str(node.value)
    if isinstance(node, Name):
        return node.id
    if isinstance(node, Deriv):
        return f"{node.op}({print_expression(node.arg)})"
    if isinstance(node, Neg):
        text = print_expression(node.arg)
        return f"-{text}" if _precedence(node.arg) >= _UNARY else f"-({text})"
    if isinstance(node, Pow):
        text = print_expression(node.base)
        if _precedence(node.base) < _ATOM:
            text = f"({text})"
        return f"{text}^{node.exponent}"
    precedence = _PRECEDENCE[node.op]
    left = print_expression(node.left)
    if _precedence(node.left) < precedence:
        left = f"({left})"
    right = print_expression(node.right)
    if _precedence(node.right) <= precedence:
        right = f"({right})"
    return f"{left} {node.op} {right}"


Value = Union[FieldElem, OreOp]


def _jet_of(node: Node, space: JetSpace) -> Optional[JetCoord]:
    if isinstance(node, Name):
        return space.base_coord(node.id)
    if isinstance(node, Deriv):
        inner = _jet_of(node.arg, space)
        if inner is None:
            return None
        return inner.prolong(dp=1) if node.op == "d" else inner.prolong(dq=1)
    return None


def evaluate(node: Node, space: JetSpace, sys=None, line: int = 1) -> Value:
    """Evaluate a tree to a field element, or to an operator when `sys` is given."""

    def fail(message: str):
        raise ExpressionSyntaxError(message, line, 1)

    def visit(node: Node) -> Value:
        if isinstance(node, Num):
            return FieldElem(node.value)
        if isinstance(node, Name):
            if sys is not None and node.id in OPERATOR_NAMES:
                return OreOp.D(sys) if node.id == "D" else OreOp.Dbar(sys)
            if node.id in space.params:
                return FieldElem(space.param(node.id))
            coord = space.base_coord(node.id)
            if coord is None:
                fail(f"Unknown name {node.id!r}")
            return space.jet(coord)
        if isinstance(node, Deriv):
            coord = _jet_of(node, space)
            if coord is None:
                fail(f"{node.op}() applies to field and multiplier jets only, got {print_expression(node.arg)!r}")
            if node.op == "d" and coord.kind != JetKind.LAMBDA:
                fail(f"d() applies to multipliers only, got {print_expression(node)!r}")
            try:
                return space.jet(coord)
            except ValueError as error:
                fail(str(error))
        if isinstance(node, Neg):
            return -visit(node.arg)
        if isinstance(node, Pow):
            base = visit(node.base)
            if isinstance(base, OreOp) and node.exponent < 0:
                fail("Operators only take non-negative powers")
            if isinstance(base, FieldElem) and base.is_zero and node.exponent < 0:
                fail("Division by zero")
            return base**node.exponent
        left, right = visit(node.left), visit(node.right)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if isinstance(right, OreOp):
            fail("Division by an operator")
        if right.is_zero:
            fail("Division by zero")
        if isinstance(left, OreOp):
            return left * OreOp.const(1 / right, sys)
        return left / right

    return visit(node)


def parse_field_elem(text: str, space: JetSpace, line: int = 1) -> FieldElem:
    value = evaluate(parse_expression(text, line), space, line=line)
    return value


def parse_operator(text: str, sys, line: int = 1) -> OreOp:
    value = evaluate(parse_expression(text, line), sys.space, sys, line=line)
    if isinstance(value, FieldElem):
        return OreOp.const(value, sys)
    return value
