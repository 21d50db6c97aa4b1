from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from conftest import trees, trees0
from decotrees import (
    KindMismatch,
    LinComb,
    TensorElem,
    d_xi,
    derive,
    lift_linear,
    mult_plus,
    parse,
    plus_factor,
    tilde_basis,
)
from decotrees.algebra import plus_poly, plus_unit

coefs = st.fractions(min_value=-5, max_value=5, max_denominator=7)


def test_lincomb_normalises():
    t = parse("I[Xi0]")
    assert (LinComb.of(t) - LinComb.of(t)) == LinComb.zero()
    assert len(LinComb.of(t, 0).items()) == 0
    assert LinComb.of(t, Fraction(1, 3)).render() == "1/3*I[Xi0]"


def test_tensor_render():
    x = TensorElem.of(parse("I[Xi0]"), plus_unit(1)) + TensorElem.of(parse("1"), plus_poly((0, 1)), -2)
    assert x.render() == "I[Xi0] (x) 1 - 2*1 (x) X^(0,1)"


def test_lift_examples():
    ident = lift_linear(LinComb.of)
    x = LinComb.of(parse("Xi0"), 2) + LinComb.of(parse("I[Xi0]"))
    assert ident(x) == x
    assert lift_linear(d_xi)(LinComb.of(parse("Xi0"), 2)) == LinComb.of(parse("Xi1"), 2)
    y = LinComb.of(parse("X^(0,2)"), 3) + LinComb.of(parse("I[Xi0]"), -1) + LinComb.of(parse("X^(0,1)*I[Xi0]"))
    by_hand = (LinComb.of(parse("X^(0,1)"), 6) - LinComb.of(parse("I_(0,1)[Xi0]"))
               + LinComb.of(parse("I[Xi0]")) + LinComb.of(parse("X^(0,1)*I_(0,1)[Xi0]")))
    assert lift_linear(lambda t: derive((0, 1), t))(y) == by_hand


def test_mult_plus_examples(params):
    assert mult_plus(plus_poly((1, 0)), plus_poly((0, 2))) == plus_poly((1, 2))
    m = plus_factor(0, (0, 0), parse("Xi0"), params)
    assert str(mult_plus(m, plus_poly((0, 1)))) == "X^(0,1)*I+_(0,0)[Xi0]"
    assert plus_factor(0, (0, 2), parse("Xi0"), params) is None
    assert mult_plus(m, None) is None
    m1 = plus_factor(1, (0, 0), parse("I[Xi0]"), params)
    with pytest.raises(KindMismatch):
        mult_plus(m, m1)


def test_tilde_basis_examples(params_half):
    p = params_half
    assert tilde_basis((0, 0), parse("Xi0"), p).render() == "I+_(0,0)[Xi0]"
    assert tilde_basis((0, 0), parse("Xi1"), p).render() == "I+_(0,0)[Xi1] + X^(0,1)*I+_(0,1)[Xi1]"
    assert tilde_basis((0, 2), parse("Xi0"), p) == LinComb.zero()


def test_tilde_basis_weights(params):
    # X^(0,2)/2 I+_(0,2) appears with the exact 1/l! weight
    out = tilde_basis((0, 0), parse("I[Xi1]"), params)
    assert out.coefficient(mult_plus(plus_poly((0, 2)), plus_factor(0, (0, 2), parse("I[Xi1]"), params))) == Fraction(1, 2)


@given(trees, trees, trees, coefs, coefs)
def test_distributive(a, b, c, x, y):
    la = LinComb.of(a, x) + LinComb.of(b, y)
    lc = LinComb.of(c)
    try:
        lhs = la * lc
        rhs = LinComb.of(a, x) * lc + LinComb.of(b, y) * lc
    except Exception as exc:  # products of two noisy roots are refused on both sides
        assert type(exc).__name__ == "NoiseProduct"
        return
    assert lhs == rhs
    assert la * lc == lc * la


@given(trees0, coefs)
def test_scalar_linearity_of_lift(t, c):
    f = lift_linear(d_xi)
    assert f(LinComb.of(t, c)) == d_xi(t).scale(c)


@given(st.lists(st.tuples(trees, coefs), max_size=5))
def test_no_zero_coefficients_stored(terms):
    x = LinComb.zero()
    for t, c in terms:
        x = x + LinComb.of(t, c)
    assert all(c != 0 for _, c in x.items())
    assert (x - x) == LinComb.zero()
