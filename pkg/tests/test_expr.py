import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shootdeg.errors import DomainError, ExprSyntaxError, UnknownIdentifier
from shootdeg.expr import BinOp, Neg, Num, Param, Var, evaluate, parse, to_string, variables
from shootdeg.system import builtin, eval_f
from reference_eval import reference_eval


def test_parse_and_eval_power_difference():
    e = parse("u2^p - u1^p", L=2, param_names={"p"})
    assert evaluate(e, [1.0, 2.0], {"p": 2}) == 3.0


def test_precedence():
    assert evaluate(parse("2+3*4"), []) == 14.0
    assert evaluate(parse("2^3^2"), []) == 512.0
    assert evaluate(parse("-2^2"), []) == -4.0
    assert evaluate(parse("(1+2)*(3-4)/2"), []) == -1.5
    assert evaluate(parse("2^-1"), []) == 0.5


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier) as exc:
        parse("u3", L=2)
    assert exc.value.name == "u3"
    with pytest.raises(UnknownIdentifier):
        parse("q*u1", L=1, param_names={"p"})


@pytest.mark.parametrize("text,pos", [("1 +", 3), ("(u1", 3), ("u1 $ 2", 3), ("2 3", 2), ("", 0)])
def test_syntax_errors_carry_position(text, pos):
    with pytest.raises(ExprSyntaxError) as exc:
        parse(text, L=1)
    assert exc.value.position == pos


def test_fractional_power():
    assert evaluate(parse("u1^0.5"), [4.0]) == 2.0


def test_clamped_input_through_system():
    spec = builtin("custom", {"n": 3}, exprs=["u1^0.5"])
    # round-off undershoot within the clamp tolerance is treated as zero
    assert eval_f(spec, [-1e-13])[0] == 0.0
    with pytest.raises(DomainError):
        eval_f(spec, [-1e-6])


def test_domain_errors():
    with pytest.raises(DomainError):
        evaluate(parse("1/u1"), [0.0])
    with pytest.raises(DomainError):
        evaluate(parse("u1^0.5"), [-1.0])
    with pytest.raises(DomainError):
        evaluate(parse("0^-1"), [])
    with pytest.raises(DomainError):
        evaluate(parse("10^400"), [])


def test_negative_base_integer_exponent_allowed():
    # (u - v)^2 with u < v, as in the potential examples
    e = parse("(u1-u2)^2", L=2)
    assert evaluate(e, [0.25, 1.0]) == pytest.approx(0.5625)
    assert evaluate(parse("u1^3"), [-2.0]) == -8.0


def test_variables_and_printing():
    e = parse("u2^p - u1^p*(3+u1)", L=2, param_names={"p"})
    assert variables(e) == {1, 2}
    assert parse(to_string(e), L=2, param_names={"p"}) == e
    assert to_string(parse("-(u1+1)^2", L=1)) == "-(u1 + 1)^2"
    assert to_string(parse("(2^3)^2")) == "(2^3)^2"
    assert to_string(parse("1-(2-3)")) == "1 - (2 - 3)"


def random_ast(rng, depth, L=3, params=("p", "q")):
    if depth == 0 or rng.random() < 0.25:
        kind = rng.randrange(3)
        if kind == 0:
            return Num(rng.choice([0.0, 1.0, 2.0, 0.5, 3.0, 1.25, 7.0, 0.1]))
        if kind == 1:
            return Var(rng.randint(1, L))
        return Param(rng.choice(params))
    if rng.random() < 0.15:
        return Neg(random_ast(rng, depth - 1, L, params))
    op = rng.choice("+-*/^")
    return BinOp(op, random_ast(rng, depth - 1, L, params), random_ast(rng, depth - 1, L, params))


def compare_with_reference(e, u, params):
    text = to_string(e)
    expected = reference_eval(text, u, params)
    try:
        got = evaluate(e, u, params)
    except DomainError:
        got = None
    if expected is None:
        return got is None
    return got is not None and abs(got - expected) <= 1e-12 * max(1.0, abs(expected))


def test_round_trip_random_corpus():
    rng = random.Random(7)
    for _ in range(1000):
        e = random_ast(rng, 6)
        assert parse(to_string(e), L=3, param_names={"p", "q"}) == e


def test_eval_matches_reference_on_random_corpus():
    rng = random.Random(11)
    for _ in range(1000):
        e = random_ast(rng, 6)
        u = [rng.uniform(0, 3) for _ in range(3)]
        params = {"p": rng.choice([2.0, 3.0, 0.5]), "q": rng.uniform(-2, 2)}
        assert compare_with_reference(e, u, params), to_string(e)


@st.composite
def asts(draw, depth=4):
    if depth == 0 or draw(st.booleans()):
        return draw(st.one_of(
            st.builds(Num, st.floats(0, 100, allow_nan=False)),
            st.builds(Var, st.integers(1, 2)),
            st.just(Param("p")),
        ))
    if draw(st.integers(0, 6)) == 0:
        return Neg(draw(asts(depth=depth - 1)))
    return BinOp(draw(st.sampled_from("+-*/^")), draw(asts(depth=depth - 1)), draw(asts(depth=depth - 1)))


@settings(max_examples=300, deadline=None)
@given(asts())
def test_round_trip_property(e):
    assert parse(to_string(e), L=2, param_names={"p"}) == e


@settings(max_examples=300, deadline=None)
@given(asts(), st.floats(0, 5), st.floats(0, 5))
def test_eval_property(e, x, y):
    assert compare_with_reference(e, [x, y], {"p": 1.5})
