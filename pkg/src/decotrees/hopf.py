"""Structure maps on trees and plus monomials.

Coactions ``Delta_i``, the coproducts ``Delta^+_i`` with their antipode, the
curtailed coaction ``Delta-hat_0`` and its factor map ``Gamma-hat_0``, the
tree-level Malliavin derivative ``D_Xi`` and the projections ``Q_0``, ``P_I``.

All maps are memoised on ``(tree or monomial, params)``. The tables are plain
dicts filled with ``setdefault`` so concurrent readers see either nothing or
a finished value, and recomputation of the same key is harmless.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product

from .algebra import (
    Q,
    LinComb,
    PlusMonomial,
    TensorElem,
    mult_plus,
    plus_factor,
    plus_poly,
    plus_unit,
)
from .errors import BasisError
from .trees import (
    NONE,
    XI0,
    XI1,
    DecoratedTree,
    DegreeParams,
    MultiIndex,
    degree,
    multi_indices_below,
    noise,
    plant,
    poly,
    unit,
    with_root,
)

__all__ = [
    "coaction",
    "coproduct_plus",
    "antipode",
    "d_xi",
    "delta_hat0",
    "gamma_hat0",
    "project_Q0",
    "project_PI",
    "poly_split",
    "clear_caches",
]

_COACTION: dict = {}
_PLANTED: dict = {}
_COPROD: dict = {}
_ANTIPODE: dict = {}
_DHAT: dict = {}
_GHAT: dict = {}
_DXI: dict = {}


def clear_caches() -> None:
    for table in (_COACTION, _PLANTED, _COPROD, _ANTIPODE, _DHAT, _GHAT, _DXI):
        table.clear()


@lru_cache(maxsize=4096)
def _sub_indices(k: MultiIndex) -> tuple[MultiIndex, ...]:
    return tuple(MultiIndex(e) for e in product(*(range(v + 1) for v in k)))


def poly_split(k: MultiIndex, left, right) -> TensorElem:
    """``sum_j binom(k, j) left(X^j) (x) right(X^{k-j})``: the group-like expansion of ``X^k``."""
    out = TensorElem()
    for j in _sub_indices(k):
        out.add_term(left(j), right(k - j), Q(k.binomial(j)))
    return out


def _root_parts(t: DecoratedTree):
    """Split ``t`` into its polynomial, noise and planted factors."""
    d = t.d
    parts = []
    if not t.poly.is_zero():
        parts.append(("X", t.poly))
    if t.noise != NONE:
        parts.append(("Xi", t.noise))
    for a, c in t.children:
        parts.append(("I", (a, c)))
    return d, parts


# ---------------------------------------------------------------------------
# Delta_i


def coaction(i: int, t: DecoratedTree, params: DegreeParams) -> TensorElem:
    """``Delta_i t`` with left factors in trees and right factors in ``T^{+,i}``."""
    key = (i, t, params)
    hit = _COACTION.get(key)
    if hit is not None:
        return hit
    d, parts = _root_parts(t)
    out = TensorElem.of(unit(d), plus_unit(d))
    for kind, payload in parts:
        if kind == "X":
            piece = poly_split(payload, poly, plus_poly)
        elif kind == "Xi":
            piece = TensorElem.of(noise(payload, d), plus_unit(d))
        else:
            piece = _coaction_planted(i, payload[0], payload[1], params)
        out = out * piece
    return _COACTION.setdefault(key, out)


def _coaction_planted(i: int, a: MultiIndex, t: DecoratedTree, params: DegreeParams) -> TensorElem:
    key = (i, a, t, params)
    hit = _PLANTED.get(key)
    if hit is not None:
        return hit
    out = TensorElem()
    for (l, r), c in coaction(i, t, params).items():
        out.add_term(plant(a, l), r, c)
    top = degree(t, i, params) + 2 - params.size(a)
    for n in multi_indices_below(top, params):
        f = plus_factor(i, a + n, t, params)
        if f is None:
            continue
        for ell in _sub_indices(n):
            m = n - ell
            coef = Q(1, ell.factorial() * m.factorial())
            out.add_term(poly(ell), mult_plus(plus_poly(m), f), coef)
    return _PLANTED.setdefault(key, out)


# ---------------------------------------------------------------------------
# Delta^+_i and the antipode


def _factor_monomial(kind: int, a: MultiIndex, body: DecoratedTree) -> PlusMonomial:
    from .algebra import _make_plus

    return _make_plus(MultiIndex.zero(body.d), ((kind, a, body),), kind)


def coproduct_plus(i: int, m: PlusMonomial, params: DegreeParams) -> TensorElem:
    """``Delta^+_i m``; multiplicative, with ``X`` group-like."""
    key = (i, m, params)
    hit = _COPROD.get(key)
    if hit is not None:
        return hit
    d = len(m.poly) - 1
    out = TensorElem.of(plus_unit(d), plus_unit(d))
    if not m.poly.is_zero():
        out = out * poly_split(m.poly, plus_poly, plus_poly)
    for kind, a, body in m.factors:
        if kind != i:
            raise BasisError(f"factor of kind {kind} in Delta^+_{i}")
        out = out * _coproduct_factor(i, a, body, params)
    return _COPROD.setdefault(key, out)


def _coproduct_factor(i: int, a: MultiIndex, body: DecoratedTree, params: DegreeParams) -> TensorElem:
    d = body.d
    out = TensorElem.of(plus_unit(d), _factor_monomial(i, a, body))
    top = degree(body, i, params) + 2 - params.size(a)
    delta = coaction(i, body, params)
    for ell in multi_indices_below(top, params):
        sign = -1 if sum(ell) % 2 else 1
        xl = plus_poly(ell)
        w = Q(sign, ell.factorial())
        for (l, r), c in delta.items():
            out.add_term(plus_factor(i, a + ell, l, params), mult_plus(xl, r), c * w)
    return out


def antipode(m: PlusMonomial, params: DegreeParams, i: int = 0) -> LinComb:
    """Antipode of ``Delta^+_i``: multiplicative, ``A X^k = (-1)^{|k|} X^k``.

    A single factor uses ``A I+_a(t) = -sum_l sum_{Delta_i t} I+_{a+l}(t1) X^l/l! A(t2)``.
    """
    key = (i, m, params)
    hit = _ANTIPODE.get(key)
    if hit is not None:
        return hit
    d = len(m.poly) - 1
    sign = -1 if sum(m.poly) % 2 else 1
    out = LinComb.of(plus_poly(m.poly), sign)
    for kind, a, body in m.factors:
        if kind != i:
            raise BasisError(f"factor of kind {kind} in antipode {i}")
        out = out * _antipode_factor(i, a, body, params)
    if not m.factors and m.poly.is_zero():
        out = LinComb.of(plus_unit(d))
    return _ANTIPODE.setdefault(key, out)


def _antipode_factor(i: int, a: MultiIndex, body: DecoratedTree, params: DegreeParams) -> LinComb:
    top = degree(body, i, params) + 2 - params.size(a)
    out: LinComb = LinComb()
    for (l, r), c in coaction(i, body, params).items():
        inner = antipode(r, params, i)
        for ell in multi_indices_below(top, params):
            f = plus_factor(i, a + ell, l, params)
            if f is None:
                continue
            head = mult_plus(f, plus_poly(ell))
            w = -c * Q(1, ell.factorial())
            for r2, c2 in inner.items():
                out.add_term(mult_plus(head, r2), w * c2)
    return out


# ---------------------------------------------------------------------------
# D_Xi


def d_xi(t: DecoratedTree) -> LinComb:
    """Derivation replacing one ``Xi0`` by ``Xi1``, summed over all choices."""
    hit = _DXI.get(t)
    if hit is not None:
        return hit
    out: LinComb = LinComb()
    if t.noise == XI0:
        out.add_term(with_root(t, noise_flag=XI1), Q(1))
    kids = list(t.children)
    for pos, (a, c) in enumerate(kids):
        if c.n_xi0 == 0:
            continue
        rest = kids[:pos] + kids[pos + 1:]
        for c2, coef in d_xi(c).items():
            out.add_term(with_root(t, children=rest + [(a, c2)]), coef)
    return _DXI.setdefault(t, out)


# ---------------------------------------------------------------------------
# Delta-hat_0 and Gamma-hat_0


def delta_hat0(t: DecoratedTree, params: DegreeParams) -> TensorElem:
    """Curtailed coaction: ``deg_0``-length expansions cut down to ``deg_1`` length."""
    key = (t, params)
    hit = _DHAT.get(key)
    if hit is not None:
        return hit
    d, parts = _root_parts(t)
    one = plus_unit(d)
    out = TensorElem.of(unit(d), one)
    for kind, payload in parts:
        if kind == "X":
            piece = TensorElem.of(poly(payload), one)
        elif kind == "Xi":
            piece = TensorElem.of(noise(payload, d), one)
        else:
            piece = _delta_hat_planted(payload[0], payload[1], params)
        out = out * piece
    return _DHAT.setdefault(key, out)


def _delta_hat_planted(a: MultiIndex, t: DecoratedTree, params: DegreeParams) -> TensorElem:
    inner = delta_hat0(t, params)
    out = TensorElem()
    for (l, r), c in inner.items():
        out.add_term(plant(a, l), r, c)
    low = degree(t, 1, params) + 2 - params.size(a)
    for (l, r), c in inner.items():
        top = degree(l, 0, params) + 2 - params.size(a)
        for ell in multi_indices_below(top, params, lower=low):
            f = plus_factor(0, a + ell, l, params)
            if f is None:
                continue
            out.add_term(poly(ell), mult_plus(f, r), -c * Q(1, ell.factorial()))
    return out


def gamma_hat0(m: PlusMonomial, params: DegreeParams) -> LinComb:
    """Multiplicative map with ``Gamma-hat_0 X_j = 0``.

    On one factor it reads the tilde-basis formula backwards: since ``X`` is
    killed, ``Gamma-hat_0 I+_a(t)`` equals the value on the tilde element
    ``sum_l X^l/l! I+_{a+l}(t)``.
    """
    key = (m, params)
    hit = _GHAT.get(key)
    if hit is not None:
        return hit
    d = len(m.poly) - 1
    if not m.poly.is_zero():
        return _GHAT.setdefault(key, LinComb())
    out = LinComb.of(plus_unit(d))
    for kind, a, body in m.factors:
        if kind != 0:
            raise BasisError(f"{m.text} is not in the tilde basis of T^(+,0)")
        out = out * _gamma_hat_factor(a, body, params)
        if not out:
            break
    return _GHAT.setdefault(key, out)


def _gamma_hat_factor(a: MultiIndex, body: DecoratedTree, params: DegreeParams) -> LinComb:
    if degree(body, 1, params) + 2 - params.size(a) > 0:
        return LinComb()
    out: LinComb = LinComb()
    for (l, r), c in delta_hat0(body, params).items():
        f = plus_factor(0, a, l, params)
        if f is None:
            continue
        out.add_term(mult_plus(f, r), -c)
    return out


# ---------------------------------------------------------------------------
# Projections


def project_Q0(x: LinComb) -> LinComb:
    """Drop every tree carrying a ``Xi1`` anywhere."""
    return x.filter(lambda t: t.n_xi1 == 0)


def _is_plain_planted(t: DecoratedTree) -> bool:
    return t.is_planted() and t.children[0][0].is_zero()


def project_PI(x: LinComb) -> LinComb:
    """Keep only trees of the form ``I(t)`` with zero edge index."""
    return x.filter(_is_plain_planted)
