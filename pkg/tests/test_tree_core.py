from fractions import Fraction
from itertools import permutations

import pytest
from hypothesis import assume, given

from conftest import trees
from decotrees import (
    DegreeParams,
    LinComb,
    MultiIndex,
    NoiseProduct,
    ParseError,
    degree,
    derive,
    noise,
    noise_count,
    parse,
    plant,
    poly,
    serialize,
    symmetry_factor,
    tree_product,
    unit,
)
from decotrees.rules import enumerate_T0, lift_T1, make_rules
from decotrees.trees import NONE, XI0, XI1


def brute_automorphisms(t) -> int:
    """Count child permutations that map every child onto an isomorphic one, recursively."""
    kids = list(t.children)
    total = 0
    for perm in permutations(range(len(kids))):
        ok = all(kids[i][0] == kids[j][0] and serialize(kids[i][1]) == serialize(kids[j][1])
                 for i, j in enumerate(perm))
        if ok:
            total += 1
    for _, c in kids:
        total *= brute_automorphisms(c)
    return total


def test_multi_index_arithmetic():
    a = MultiIndex((1, 2))
    assert a + (0, 1) == (1, 3)
    assert a - (1, 0) == (0, 2)
    with pytest.raises(ValueError):
        a - (2, 0)
    assert a.factorial() == 2
    assert a.binomial((1, 1)) == 2
    assert a.size((2, 1)) == 4


def test_product_examples():
    assert tree_product(poly((1, 0)), poly((0, 2))) == poly((1, 2))
    t = tree_product(plant((0, 0), noise(XI0)), noise(XI0))
    assert t.noise == XI0 and len(t.children) == 1
    a = tree_product(plant((0, 0), noise(XI0)), plant((0, 0), noise(XI0)))
    assert a == parse("I[Xi0]*I[Xi0]")
    with pytest.raises(NoiseProduct):
        tree_product(noise(XI0), noise(XI1))


def test_plant_examples():
    assert plant((0, 0), noise(XI0)) == parse("I[Xi0]")
    assert serialize(plant((0, 2), noise(XI0))) == "I_(0,2)[Xi0]"
    assert plant((0, 1), plant((0, 1), unit())) != plant((0, 2), unit())
    t = plant((0, 1), noise(XI0))
    assert t.noise == NONE and t.poly.is_zero()


def test_degree_examples(params_half):
    p = params_half
    assert degree(noise(XI0), 0, p) == Fraction(-3, 2)
    assert degree(poly((1, 2)), 0, p) == 4 == degree(poly((1, 2)), 1, p)
    assert degree(parse("I_(0,2)[Xi0]"), 0, p) == Fraction(-3, 2)
    assert degree(noise(XI1), 0, p) == 0
    assert degree(noise(XI1), 1, p) == Fraction(-3, 2)


def test_noise_count_examples():
    assert noise_count(poly((0, 3))) == 0
    assert noise_count(parse("Xi0*I[Xi0]")) == 2
    assert noise_count(parse("Xi1*I[Xi0]")) == 2


def test_derive_examples():
    assert derive((0, 1), poly((0, 2))) == LinComb.of(poly((0, 1)), 2)
    assert derive((0, 2), parse("I[Xi0]")) == LinComb.of(parse("I_(0,2)[Xi0]"))
    expect = LinComb.of(parse("I[Xi0]")) + LinComb.of(parse("X^(0,1)*I_(0,1)[Xi0]"))
    assert derive((0, 1), parse("X^(0,1)*I[Xi0]")) == expect
    assert derive((0, 1), noise(XI0)) == LinComb.zero()


def test_symmetry_examples():
    assert symmetry_factor(parse("I[Xi0]")) == 1
    assert symmetry_factor(parse("I[Xi0]*I[Xi0]")) == 2
    assert symmetry_factor(parse("I[Xi0]*I_(0,2)[Xi0]")) == 1
    assert symmetry_factor(parse("I[I[Xi0]*I[Xi0]]*I[I[Xi0]*I[Xi0]]")) == 8


def test_symmetry_matches_brute_force_on_enumeration(params):
    for t in enumerate_T0(make_rules("phi43", 3, 7), params):
        assert symmetry_factor(t) == brute_automorphisms(t), t.text


@given(trees)
def test_symmetry_matches_brute_force(t):
    assert symmetry_factor(t) == brute_automorphisms(t)


def test_parse_examples():
    assert serialize(noise(XI0)) == "Xi0"
    assert parse("I_(0,2)[Xi0]") == plant((0, 2), noise(XI0))
    assert serialize(parse("I[Xi0]*X^(1,0)*X^(0,1)*1")) == "X^(1,1)*I[Xi0]"
    assert serialize(parse("I_(0,0)[Xi0]")) == "I[Xi0]"
    assert serialize(parse("X^(0,0)")) == "1"


@pytest.mark.parametrize("bad,pos", [("I[Xi0", 5), ("Xi2", 0), ("I_(0,1[Xi0]", 6), ("", 0), ("Xi0*", 4)])
def test_parse_errors_carry_position(bad, pos):
    with pytest.raises(ParseError) as exc:
        parse(bad)
    assert exc.value.position == pos


def test_parse_rejects_noise_product():
    with pytest.raises((NoiseProduct, ParseError)):
        parse("Xi0*Xi1")


@given(trees)
def test_round_trip(t):
    assert parse(serialize(t)) == t
    assert serialize(parse(serialize(t))) == serialize(t)


def test_round_trip_on_enumeration(params):
    for name in ("gkpz", "qua_c", "phi43"):
        for t in lift_T1(enumerate_T0(make_rules(name, 3, 6), params)):
            assert parse(t.text) == t


@given(trees, trees)
def test_product_commutative(a, b):
    assume(a.noise == NONE or b.noise == NONE)
    assert tree_product(a, b) == tree_product(b, a)


@given(trees, trees, trees)
def test_product_associative(a, b, c):
    assume(sum(t.noise != NONE for t in (a, b, c)) <= 1)
    assert tree_product(tree_product(a, b), c) == tree_product(a, tree_product(b, c))


@given(trees, trees)
def test_degree_additive(a, b):
    assume(a.noise == NONE or b.noise == NONE)
    p = DegreeParams()
    for j in (0, 1):
        assert degree(tree_product(a, b), j, p) == degree(a, j, p) + degree(b, j, p)


@given(trees)
def test_degree_gap_counts_xi1(t):
    p = DegreeParams()
    n1 = sum(n.noise == XI1 for n in t.nodes())
    assert degree(t, 0, p) - degree(t, 1, p) == n1 * p.xi1_gain
    assert degree(t, 0, p) >= degree(t, 1, p)


@given(trees, trees)
def test_derive_is_leibniz(a, b):
    assume(a.noise == NONE or b.noise == NONE)
    for p in ((0, 1), (1, 0)):
        lhs = derive(p, tree_product(a, b))
        rhs = derive(p, a) * LinComb.of(b) + LinComb.of(a) * derive(p, b)
        assert lhs == rhs


@given(trees)
def test_canonical_form_is_idempotent(t):
    rebuilt = parse(t.text)
    assert rebuilt is t or rebuilt == t
    assert hash(rebuilt) == hash(t)
