import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stlforge.errors import IntervalError, ParseError
from stlforge.expr import eval_expr
from stlforge.stl import (Always, And, Eventually, Or, Pred, Until, depth, describe_nodes, disjunctive_nodes,
                          parse_stl, strip_ids, to_text_stl, weight_count)

from oracles import random_formula, to_ast

XY = ["x", "y"]
EQ12 = "(F[1,10](e1 >= 0) || F[1,10](e2 >= 0)) && G[1,20](e3 >= 0)"


def eq12(horizon=20):
    from stlforge.expr import parse_expr

    vars_ = ["x", "y", "alpha"]
    defs = {
        "e1": parse_expr("1 - 2/3*((x-2)^2 + (y-8)^2)", vars_),
        "e2": parse_expr("1 - 2/3*((x-8)^2 + (y-2)^2)", vars_),
        "e3": parse_expr("1 - exp(1 - 2/3*((x-5)^2 + (y-5)^2))", vars_),
    }
    return parse_stl(EQ12, vars_, horizon, defs)


def test_eq12_structure():
    phi = eq12()
    assert isinstance(phi, And)
    assert isinstance(phi.left, Or) and isinstance(phi.right, Always)
    ids = [n.node_id for n in disjunctive_nodes(phi)]
    assert ids == [0, 1, 2]
    assert sum(weight_count(n) for n in disjunctive_nodes(phi)) == 22
    assert depth(phi) == 20


def test_describe_nodes_slots():
    rows = describe_nodes(eq12())
    assert [(r["node_id"], r["kind"], r["weights"]) for r in rows] == [
        (0, "Or", 2), (1, "Eventually", 10), (2, "Eventually", 10)]
    assert rows[-1]["slots"] == (13, 22)


def test_predicate_normalisation():
    phi = parse_stl("x <= 3", ["x"], 1)
    assert isinstance(phi, Pred)
    assert eval_expr(phi.h, {"x": 1.0}) == 2.0
    phi = parse_stl("x - 1 <= 0", ["x"], 1)
    assert eval_expr(phi.h, {"x": 4.0}) == -3.0
    phi = parse_stl("x >= y", XY, 1)
    assert eval_expr(phi.h, {"x": 5.0, "y": 2.0}) == 3.0


def test_precedence_and_until():
    phi = parse_stl("x >= 0 || y >= 0 && x >= 1", XY, 5)
    assert isinstance(phi, Or) and isinstance(phi.right, And)
    phi = parse_stl("x >= 0 U[0,2] y >= 0", XY, 5)
    assert isinstance(phi, Until) and (phi.a, phi.b) == (0, 2)
    phi = parse_stl("G[0,2] F[1,3] x >= 0", XY, 5)
    assert isinstance(phi, Always) and isinstance(phi.child, Eventually)


def test_parenthesised_expression_inside_predicate():
    phi = parse_stl("(x + y) * 2 >= 1", XY, 1)
    assert eval_expr(phi.h, {"x": 1.0, "y": 1.0}) == 3.0


def test_variable_named_like_operator_key():
    phi = parse_stl("G >= 1", ["G"], 1)
    assert isinstance(phi, Pred)


@pytest.mark.parametrize("text", ["F[3,1](x >= 0)", "G[0,30](x >= 0)", "F[-1,2](x >= 0)"])
def test_bad_intervals(text):
    with pytest.raises((IntervalError, ParseError)):
        parse_stl(text, ["x"], 20)


@pytest.mark.parametrize("text", ["", "x >= ", "F[1,2]", "x >= 0 &&", "(x >= 0", "x"])
def test_syntax_errors(text):
    with pytest.raises(ParseError):
        parse_stl(text, ["x"], 20)


def test_horizon_must_be_positive():
    with pytest.raises(ValueError):
        parse_stl("x >= 0", ["x"], 0)


def test_round_trip_eq12():
    phi = eq12()
    again = parse_stl(to_text_stl(phi), ["x", "y", "alpha"], 20)
    assert strip_ids(again) == strip_ids(phi)
    assert again == phi


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_random(seed):
    from stlforge.semantics import hard_robustness
    from oracles import random_trace

    rng = np.random.default_rng(seed)
    phi = to_ast(random_formula(rng, 3, 10))
    text = to_text_stl(phi)
    again = parse_stl(text, XY, 10)
    assert to_text_stl(again) == text
    _, _, sig = random_trace(rng, 10)
    assert hard_robustness(again, sig) == pytest.approx(hard_robustness(phi, sig), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ids_are_preorder_and_dense(seed):
    phi = to_ast(random_formula(np.random.default_rng(seed), 3, 10))
    ids = [n.node_id for n in disjunctive_nodes(phi)]
    assert ids == list(range(len(ids)))
