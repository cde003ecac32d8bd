import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exactquad.errors import EvalDomainError, SyntaxParseError, UnknownIdentifierError
from exactquad.expr import Expression, continuity_probe, evaluate, parse


class TestParseExamples:
    def test_identity(self):
        assert evaluate(parse("t"), 0.5) == 0.5

    def test_sin_plus_square_at_zero(self):
        assert evaluate(parse("sin(t)+t^2"), 0.0) == 0.0

    def test_incomplete_input_offset(self):
        with pytest.raises(SyntaxParseError) as exc:
            parse("t +")
        assert exc.value.offset == 3

    def test_power_right_associative(self):
        assert evaluate(parse("2^3^2"), 0.0) == 512.0

    def test_log_domain_error(self):
        with pytest.raises(EvalDomainError):
            evaluate(parse("log(t)"), 0.0)

    def test_exp_matches_platform(self):
        # oracle: the host platform exponential
        assert evaluate(parse("exp(-t)"), 1.0) == math.exp(-1.0)
        assert evaluate(parse("exp(-t)"), 1.0) == 0.36787944117144233

    def test_no_implicit_multiplication(self):
        with pytest.raises(SyntaxParseError):
            parse("2t")

    def test_unknown_identifier(self):
        with pytest.raises(UnknownIdentifierError) as exc:
            parse("2*foo(t)")
        assert exc.value.offset == 2

    def test_empty_input(self):
        with pytest.raises(SyntaxParseError):
            parse("   ")

    def test_non_ascii_rejected(self):
        with pytest.raises(SyntaxParseError):
            parse("t+α")

    def test_min_needs_two_arguments(self):
        with pytest.raises(SyntaxParseError):
            parse("min(t)")
        assert evaluate(parse("min(t,0.25)"), 0.5) == 0.25
        assert evaluate(parse("max(t,0.25,2)"), 0.5) == 2.0

    def test_constants(self):
        assert evaluate(parse("pi"), 0.0) == math.pi
        assert evaluate(parse("e"), 0.0) == math.e


class TestDomainErrors:
    def test_division_by_zero(self):
        with pytest.raises(EvalDomainError):
            evaluate(parse("1/t"), 0.0)

    def test_sqrt_negative(self):
        with pytest.raises(EvalDomainError):
            evaluate(parse("sqrt(t)"), -1.0)

    def test_negative_base_fractional_power(self):
        with pytest.raises(EvalDomainError):
            evaluate(parse("t^0.5"), -2.0)
        # integer exponents on negative bases stay real
        assert evaluate(parse("t^3"), -2.0) == -8.0

    def test_zero_to_negative_power(self):
        with pytest.raises(EvalDomainError):
            evaluate(parse("t^(-1)"), 0.0)

    def test_overflow_is_domain_error(self):
        with pytest.raises(EvalDomainError):
            evaluate(parse("exp(t)"), 1e6)

    def test_error_names_subexpression(self):
        with pytest.raises(EvalDomainError) as exc:
            evaluate(parse("1+log(t-2)"), 1.0)
        assert "log(t-2.0)" in str(exc.value)


# --- round-trip property ------------------------------------------------

def _tree(draw_depth):
    leaf = st.one_of(
        st.floats(min_value=0.0, max_value=3.0, allow_nan=False).map(
            lambda v: ("num", v)
        ),
        st.just(("t",)),
        st.sampled_from([("const", "pi"), ("const", "e")]),
    )

    def extend(children):
        un = st.sampled_from(["sin", "cos", "abs"]).flatmap(
            lambda name: children.map(lambda a: ("fn", name, (a,)))
        )
        neg = children.map(lambda a: ("neg", a))
        binop = st.tuples(
            st.sampled_from(["+", "-", "*"]), children, children
        ).map(lambda t: ("bin", t[0], t[1], t[2]))
        mm = st.tuples(
            st.sampled_from(["min", "max"]), children, children
        ).map(lambda t: ("fn", t[0], (t[1], t[2])))
        return st.one_of(un, neg, binop, mm)

    return st.recursive(leaf, extend, max_leaves=draw_depth)


_T_GRID = np.linspace(-2.0, 2.0, 1000)


@given(_tree(12))
@settings(max_examples=200, deadline=None)
def test_pretty_parse_roundtrip_zero_ulp(ast):
    e = Expression(ast)
    reparsed = parse(e.text)
    direct = e(_T_GRID)
    again = reparsed(_T_GRID)
    assert np.array_equal(direct, again)


@pytest.mark.parametrize("text", [
    "2^3^2", "(2^3)^2", "-t^2", "(-t)^2", "2^-3", "1-2-3", "1-(2-3)",
    "t/(1+t^2)", "t*-t", "--t", "min(t,max(t,0.5),2)", "1/(2+sin(t))",
    "sqrt(abs(t))+log(2+t)", "pi*e^2",
])
def test_roundtrip_hand_cases(text):
    e = parse(text)
    again = parse(e.text)
    ts = np.linspace(-1.5, 1.5, 257)
    assert np.array_equal(e(ts), again(ts))


def test_operator_combinators_roundtrip():
    f, g = parse("t"), parse("t^2")
    h = (f - 0.5) * (g - 1.0 / 3.0) + 2.0 / f
    again = parse(h.text)
    ts = np.linspace(0.1, 2.0, 101)
    assert np.array_equal(h(ts), again(ts))
    assert h(1.0) == (1.0 - 0.5) * (1.0 - 1.0 / 3.0) + 2.0


def test_continuity_probe_accepts_and_rejects():
    vals = continuity_probe(parse("1/(1+t)"), 0.0, 1.0)
    assert len(vals) == 1024 and np.all(np.isfinite(vals))
    with pytest.raises(EvalDomainError):
        continuity_probe(parse("log(t)"), 0.0, 1.0)
    continuity_probe(parse("log(t)"), 0.1, 1.0)


def test_array_and_scalar_evaluation_agree():
    e = parse("sin(2*t)+t^3-0.25")
    ts = np.linspace(-1, 1, 33)
    arr = e(ts)
    assert arr.shape == ts.shape
    for i, t in enumerate(ts):
        assert arr[i] == e(float(t))
