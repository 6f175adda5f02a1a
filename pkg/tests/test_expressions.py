# Copyright (c) 2023 Graphcore Ltd. All rights reserved.
import random
from fractions import Fraction

import pytest

from gauge2d.algebra.jetfield import FieldElem, JetCoord, JetKind, JetSpace
from gauge2d.algebra.ore import OreOp
from gauge2d.frontend.expressions import (
    BinOp,
    Deriv,
    ExpressionSyntaxError,
    Name,
    Neg,
    Num,
    Pow,
    evaluate,
    parse_expression,
    parse_field_elem,
    parse_operator,
    print_expression,
    tokenize,
)

from . import test_cartan

chiral_system = test_cartan.chiral_system


@pytest.fixture
def space():
    return JetSpace(["u", "x"], constrained=["u"], lambdas=["lam"], params=["g"])


def random_tree(rng: random.Random, depth: int = 3):
    if depth == 0 or rng.random() < 0.2:
        return rng.choice([Num(rng.randint(0, 9)), Name("x"), Name("lam"), Deriv("dbar", Name("x"))])
    kind = rng.choice(["binop", "binop", "neg", "pow"])
    if kind == "neg":
        return Neg(random_tree(rng, depth - 1))
    if kind == "pow":
        return Pow(random_tree(rng, depth - 1), rng.randint(-2, 3))
    return BinOp(rng.choice("+-*/"), random_tree(rng, depth - 1), random_tree(rng, depth - 1))


def test_tokenize():
    tokens = tokenize("g/2 * dbar(lam)^2")
    assert [t.kind for t in tokens] == ["name", "op", "number", "op", "name", "op", "name", "op", "op", "number", "end"]
    assert tokens[4].text == "dbar"
    assert tokens[4].column == 7


def test_unexpected_character():
    with pytest.raises(ExpressionSyntaxError) as error:
        tokenize("lam + 2.5", line=4)
    assert (error.value.line, error.value.column) == (4, 8)
    assert "line 4, column 8" in str(error.value)


@pytest.mark.parametrize(
    "text, column",
    [
        ("lam * (x + ", 11),
        ("lam x", 5),
        ("(lam", 5),
        ("x^y", 3),
        ("", 1),
    ],
)
def test_syntax_errors(text, column):
    with pytest.raises(ExpressionSyntaxError) as error:
        parse_expression(text, line=3)
    assert error.value.line == 3
    assert error.value.column == column


def test_precedence():
    assert parse_expression("a + b * c") == BinOp("+", Name("a"), BinOp("*", Name("b"), Name("c")))
    assert parse_expression("a - b - c") == BinOp("-", BinOp("-", Name("a"), Name("b")), Name("c"))
    assert parse_expression("-a^2") == Neg(Pow(Name("a"), 2))
    assert parse_expression("a^-1") == Pow(Name("a"), -1)
    assert parse_expression("d(dbar(lam))") == Deriv("d", Deriv("dbar", Name("lam")))


@pytest.mark.parametrize("seed", range(25))
def test_print_parses_back(seed):
    tree = random_tree(random.Random(seed))
    assert parse_expression(print_expression(tree)) == tree


def test_print_keeps_grouping():
    tree = BinOp("-", Name("a"), BinOp("-", Name("b"), Name("c")))
    assert print_expression(tree) == "a - (b - c)"
    assert print_expression(Pow(Neg(Name("a")), 2)) == "(-a)^2"


def test_evaluate(space):
    x, lam = space.field(1), space.lam(0)
    g = FieldElem(space.param("g"))
    dbar_lam = space.jet(JetCoord(JetKind.LAMBDA, 0, 0, 1))
    assert parse_field_elem("g/2*x^2 - dbar(lam)", space) == g / 2 * x**2 - dbar_lam
    assert parse_field_elem("(x + 1)^-1 * (x + 1)", space) == 1
    assert parse_field_elem("d(dbar(lam))", space) == space.jet(JetCoord(JetKind.LAMBDA, 0, 1, 1))
    assert parse_field_elem("3/4", space) == Fraction(3, 4)
    assert parse_field_elem("lam*lam", space) == lam**2


@pytest.mark.parametrize(
    "text, message",
    [
        ("y + 1", "Unknown name 'y'"),
        ("d(x)", "d() applies to multipliers only"),
        ("dbar(g)", "applies to field and multiplier jets only"),
        ("dbar(u)", "Derivatives of constrained fields are reducible"),
        ("x / (lam - lam)", "Division by zero"),
        ("(x - x)^-2", "Division by zero"),
    ],
)
def test_evaluation_errors(space, text, message):
    with pytest.raises(ExpressionSyntaxError) as error:
        parse_field_elem(text, space, line=6)
    assert message in str(error.value)
    assert error.value.line == 6


def test_operator_names_only_in_operator_mode(space):
    with pytest.raises(ExpressionSyntaxError):
        evaluate(parse_expression("D + 1"), space)


def test_parse_operator(chiral_system):
    sys = chiral_system
    lam = sys.space.lam(0)
    g = FieldElem(sys.space.param("g"))
    D, Dbar = OreOp.D(sys), OreOp.Dbar(sys)
    assert parse_operator("(g*lam)*D + Dbar^2", sys) == g * lam * D + Dbar * Dbar
    assert parse_operator("D/2", sys) == OreOp.const(Fraction(1, 2), sys) * D
    assert parse_operator("lam", sys) == OreOp.const(lam, sys)
    with pytest.raises(ExpressionSyntaxError):
        parse_operator("1/D", sys)
    with pytest.raises(ExpressionSyntaxError):
        parse_operator("D^-1", sys)
