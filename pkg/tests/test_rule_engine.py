from collections import Counter
from itertools import combinations_with_replacement

import pytest

from decotrees import BoundsTooLarge, ConfigError, noise, parse, plant, unit
from decotrees.trees import product_of
from decotrees.prep import load_prep
from decotrees.rules import check_assumption1, check_closure, edge_count, enumerate_T0, lift_T1, make_rules
from decotrees.trees import NONE, XI0, XI1

Z = (0, 0)
E1 = (0, 1)
E2 = (0, 2)


def _all_trees(max_edges: int, indices) -> set:
    """Every tree with zero node polynomials and noisy planted subtrees, edge count <= max_edges."""
    levels: dict[int, set] = {}
    for budget in range(max_edges + 1):
        pool = [t for b in range(budget) for t in levels.get(b, ())]
        children = [(a, t) for a in indices for t in pool]
        out = set()
        for flag in (NONE, XI0):
            room = budget - (flag != NONE)
            if room < 0:
                continue
            for k in range(0, room + 1):
                for combo in combinations_with_replacement(range(len(children)), k):
                    if sum(1 + edge_count(children[i][1]) for i in combo) != room:
                        continue
                    factors = [plant(*children[i]) for i in combo]
                    if flag != NONE:
                        factors.append(noise(flag))
                    t = product_of(factors) if factors else unit()
                    out.add(t)
        levels[budget] = {t for t in out if t.noise_total > 0}
        levels.setdefault(-1, set()).update(out)
    return levels[-1]


def _nodes_ok(t, node_ok) -> bool:
    return all(node_ok(n) for n in t.nodes())


def _phi43_node(n) -> bool:
    idx = Counter(a for a, _ in n.children)
    if n.noise != NONE:
        return not n.children
    return set(idx) <= {Z} and 1 <= len(n.children) <= 3


def _gkpz_node(n) -> bool:
    idx = Counter(a for a, _ in n.children)
    if not set(idx) <= {Z, E1}:
        return False
    return idx[E1] == 0 if n.noise != NONE else idx[E1] <= 2


def _brute(name, max_noises, max_edges, indices, node_ok, allow_unit):
    out = {t for t in _all_trees(max_edges, indices)
           if t.noise_total <= max_noises and (t.noise_total > 0 or (allow_unit and t == unit()))
           and _nodes_ok(t, node_ok)}
    return sorted(out)


@pytest.mark.parametrize("n,e", [(2, 5), (3, 6)])
def test_phi43_matches_generate_and_filter(params, n, e):
    got = enumerate_T0(make_rules("phi43", n, e), params)
    assert got == _brute("phi43", n, e, (Z,), _phi43_node, False)


def test_phi43_count_fixed(params):
    assert len(enumerate_T0(make_rules("phi43", 2, 5), params)) == 8  # fixed by the generate-and-filter oracle above


@pytest.mark.parametrize("n,e", [(2, 5), (3, 5)])
def test_gkpz_matches_generate_and_filter(params, n, e):
    got = enumerate_T0(make_rules("gkpz", n, e), params)
    assert got == _brute("gkpz", n, e, (Z, E1), _gkpz_node, True)


def test_enumeration_counts(params):
    assert len(enumerate_T0(make_rules("gkpz", 3, 8), params)) == 2022
    assert len(enumerate_T0(make_rules("qua_c", 3, 8), params)) == 921


def test_enumeration_examples(params):
    gk = enumerate_T0(make_rules("gkpz", 2, 4), params)
    assert parse("Xi0") in gk
    qua = enumerate_T0(make_rules("qua", 2, 4), params)
    assert parse("I[Xi0]*I_(0,2)[Xi0]") in qua
    for name in ("qua", "qua_c", "gkpz", "phi43"):
        ts = enumerate_T0(make_rules(name, 3, 6), params)
        assert all(sum(n.noise != NONE for n in t.nodes()) <= 3 for t in ts)
        assert ts == sorted(set(ts))
        assert ts == enumerate_T0(make_rules(name, 3, 6), params)


def test_bounds_and_names():
    with pytest.raises(ConfigError):
        make_rules("kpz")
    with pytest.raises(BoundsTooLarge):
        enumerate_T0(make_rules("gkpz", 3, 8, cap=100))


def test_lift_examples(params):
    assert lift_T1([parse("Xi0")]) == sorted([parse("Xi0"), parse("Xi1")])
    lifted = lift_T1([parse("I[Xi0]*Xi0")])
    assert parse("I[Xi1]*Xi0") in lifted and parse("I[Xi0]*Xi1") in lifted
    t0 = enumerate_T0(make_rules("gkpz", 3, 6), params)
    t1 = lift_T1(t0)
    assert all(sum(n.noise == XI1 for n in t.nodes()) <= 1 for t in t1)
    assert len(t1) <= sum(1 + t.noise_total for t in t0)


def test_assumption1(params):
    assert check_assumption1(enumerate_T0(make_rules("gkpz", 3, 8), params), params) == []
    assert check_assumption1(enumerate_T0(make_rules("phi43", 3, 8), params), params) == []
    bad = check_assumption1(enumerate_T0(make_rules("qua_c", 2, 4), params), params)
    assert bad
    assert any(v.render().startswith("I_(0,2)[Xi0]\tI_(0,2)[Xi1]\t-1/100") for v in bad)


def test_closure(params):
    gk = make_rules("gkpz", 2, 5)
    assert check_closure(gk, enumerate_T0(gk, params), load_prep("trivial"), params).closed
    qua = make_rules("qua", 3, 6)
    assert not check_closure(qua, enumerate_T0(qua, params), load_prep("qua_c"), params).closed
    quac = make_rules("qua_c", 3, 6)
    assert check_closure(quac, enumerate_T0(quac, params), load_prep("qua_c"), params).closed
