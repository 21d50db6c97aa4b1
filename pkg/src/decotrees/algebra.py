"""Linear combinations of trees, plus monomials, and tensor elements.

Coefficients are exact rationals (``gmpy2.mpq``) in the symbolic layer. The same
containers also carry float coefficients when numeric characters are applied
(for example the output of ``Gamma_{yx}``); zero coefficients are dropped
either way.
"""

from __future__ import annotations

import math
import threading
from fractions import Fraction
from typing import Callable, Generic, Hashable, Iterable, Iterator, Mapping, TypeVar

from gmpy2 import mpq as Q

from .errors import KindMismatch
from .trees import (
    DecoratedTree,
    DegreeParams,
    MultiIndex,
    degree,
    multi_indices_below,
    tree_product,
)

__all__ = [
    "LinComb",
    "TensorElem",
    "PlusMonomial",
    "plus_unit",
    "plus_poly",
    "plus_factor",
    "mult_plus",
    "lift_linear",
    "lift_tensor_left",
    "tilde_basis",
    "render_coef",
    "Q",
]

K = TypeVar("K", bound=Hashable)
_MPQ = type(Q(0))


def render_coef(c) -> str:
    if isinstance(c, (Fraction, _MPQ)):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    if isinstance(c, int):
        return str(c)
    return repr(float(c))


def _key_text(k) -> str:
    return k.text


_PRODUCTS: dict = {}


def _mul_keys(a, b):
    key = (a, b)
    hit = _PRODUCTS.get(key)
    if hit is not None:
        return hit
    if isinstance(a, DecoratedTree):
        out = tree_product(a, b)
    else:
        out = mult_plus(a, b)
        if out is None:
            return None
    return _PRODUCTS.setdefault(key, out)


class LinComb(Generic[K]):
    """Finite formal sum of canonical keys (trees or plus monomials)."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[K, object] | None = None) -> None:
        self.terms: dict[K, object] = {}
        if terms:
            for k, c in terms.items():
                if k is not None and c != 0:
                    self.terms[k] = c

    @classmethod
    def of(cls, key: K, coef=1) -> "LinComb[K]":
        return cls({key: Q(coef) if isinstance(coef, int) else coef})

    @classmethod
    def zero(cls) -> "LinComb":
        return cls()

    def __iter__(self) -> Iterator[tuple[K, object]]:
        return iter(self.terms.items())

    def __len__(self) -> int:
        return len(self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def items(self):
        return self.terms.items()

    def keys(self):
        return self.terms.keys()

    def coefficient(self, key: K):
        return self.terms.get(key, 0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinComb):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self) -> int:  # pragma: no cover - mutable-ish container
        raise TypeError("LinComb is unhashable")

    def add_term(self, key: K, coef) -> None:
        """In-place accumulation; used by builders."""
        if key is None or coef == 0:
            return
        v = self.terms.get(key, 0) + coef
        if v == 0:
            self.terms.pop(key, None)
        else:
            self.terms[key] = v

    def __add__(self, other: "LinComb[K]") -> "LinComb[K]":
        out = LinComb(self.terms)
        for k, c in other.terms.items():
            out.add_term(k, c)
        return out

    def __neg__(self) -> "LinComb[K]":
        return LinComb({k: -c for k, c in self.terms.items()})

    def __sub__(self, other: "LinComb[K]") -> "LinComb[K]":
        return self + (-other)

    def scale(self, s) -> "LinComb[K]":
        if s == 0:
            return LinComb()
        return LinComb({k: c * s for k, c in self.terms.items()})

    def __rmul__(self, s) -> "LinComb[K]":
        return self.scale(s)

    def __mul__(self, other):
        if not isinstance(other, LinComb):
            return self.scale(other)
        out: LinComb = LinComb()
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                out.add_term(_mul_keys(k1, k2), c1 * c2)
        return out

    def map(self, f: Callable[[K], "LinComb"]) -> "LinComb":
        """Linear extension of a key-level map ``f``."""
        out: LinComb = LinComb()
        for k, c in self.terms.items():
            for k2, c2 in f(k).terms.items():
                out.add_term(k2, c * c2)
        return out

    def filter(self, keep: Callable[[K], bool]) -> "LinComb[K]":
        return LinComb({k: c for k, c in self.terms.items() if keep(k)})

    def sorted_items(self) -> list[tuple[K, object]]:
        return sorted(self.terms.items(), key=lambda kv: _key_text(kv[0]))

    def render(self) -> str:
        if not self.terms:
            return "0"
        return _join_terms((_key_text(k), c) for k, c in self.sorted_items())

    def __repr__(self) -> str:
        return f"LinComb({self.render()})"

    __str__ = render


def _join_terms(pairs: Iterable[tuple[str, object]]) -> str:
    out = []
    for i, (txt, c) in enumerate(pairs):
        neg = c < 0
        mag = -c if neg else c
        body = txt if mag == 1 else f"{render_coef(mag)}*{txt}"
        if i == 0:
            out.append(("-" if neg else "") + body)
        else:
            out.append((" - " if neg else " + ") + body)
    return "".join(out)


class TensorElem:
    """Finite formal sum of ``left (x) right`` pairs."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[tuple, object] | None = None) -> None:
        self.terms: dict[tuple, object] = {}
        if terms:
            for k, c in terms.items():
                if k[0] is not None and k[1] is not None and c != 0:
                    self.terms[k] = c

    @classmethod
    def of(cls, left, right, coef=1) -> "TensorElem":
        return cls({(left, right): Q(coef) if isinstance(coef, int) else coef})

    def __iter__(self):
        return iter(self.terms.items())

    def __len__(self) -> int:
        return len(self.terms)

    def items(self):
        return self.terms.items()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TensorElem):
            return NotImplemented
        return self.terms == other.terms

    def add_term(self, left, right, coef) -> None:
        if left is None or right is None or coef == 0:
            return
        key = (left, right)
        v = self.terms.get(key, 0) + coef
        if v == 0:
            self.terms.pop(key, None)
        else:
            self.terms[key] = v

    def __add__(self, other: "TensorElem") -> "TensorElem":
        out = TensorElem(self.terms)
        for (l, r), c in other.terms.items():
            out.add_term(l, r, c)
        return out

    def __neg__(self) -> "TensorElem":
        return TensorElem({k: -c for k, c in self.terms.items()})

    def __sub__(self, other: "TensorElem") -> "TensorElem":
        return self + (-other)

    def scale(self, s) -> "TensorElem":
        if s == 0:
            return TensorElem()
        return TensorElem({k: c * s for k, c in self.terms.items()})

    def __mul__(self, other: "TensorElem") -> "TensorElem":
        out = TensorElem()
        for (l1, r1), c1 in self.terms.items():
            for (l2, r2), c2 in other.terms.items():
                out.add_term(_mul_keys(l1, l2), _mul_keys(r1, r2), c1 * c2)
        return out

    def map_left(self, f: Callable[[object], LinComb]) -> "TensorElem":
        out = TensorElem()
        for (l, r), c in self.terms.items():
            for l2, c2 in f(l).terms.items():
                out.add_term(l2, r, c * c2)
        return out

    def map_right(self, f: Callable[[object], LinComb]) -> "TensorElem":
        out = TensorElem()
        for (l, r), c in self.terms.items():
            for r2, c2 in f(r).terms.items():
                out.add_term(l, r2, c * c2)
        return out

    def contract_right(self, g: Callable[[object], object]) -> LinComb:
        """``(Id (x) g)`` for a scalar-valued ``g``; returns a LinComb of left keys."""
        out: LinComb = LinComb()
        for (l, r), c in self.terms.items():
            out.add_term(l, c * g(r))
        return out

    def pair(self, f: Callable[[object], object], g: Callable[[object], object]):
        """``(f (x) g)`` summed with the usual product of values."""
        total = 0
        for (l, r), c in self.terms.items():
            total = total + c * f(l) * g(r)
        return total

    def sorted_items(self):
        def key(kv):
            (l, r), _ = kv
            return (r.text != "1", l.text, r.text)

        return sorted(self.terms.items(), key=key)

    def render(self) -> str:
        if not self.terms:
            return "0"
        return _join_terms((f"{l.text} (x) {r.text}", c) for (l, r), c in self.sorted_items())

    def __repr__(self) -> str:
        return f"TensorElem({self.render()})"

    __str__ = render


def lift_linear(f: Callable[[object], LinComb]) -> Callable[[LinComb], LinComb]:
    """Extend a key-level map linearly to ``LinComb``."""

    def lifted(x):
        if isinstance(x, LinComb):
            return x.map(f)
        return f(x)

    lifted.__name__ = getattr(f, "__name__", "lifted")
    return lifted


def lift_tensor_left(f: Callable[[object], LinComb]) -> Callable[[TensorElem], TensorElem]:
    """``f (x) Id`` on tensor elements."""

    def lifted(x: TensorElem) -> TensorElem:
        return x.map_left(f)

    return lifted


# ---------------------------------------------------------------------------
# Plus monomials


_PLUS_PREFIX = {0: "I+", 1: "I+1"}


def _plus_text(kind: int, a: MultiIndex, body: DecoratedTree) -> str:
    return f"{_PLUS_PREFIX[kind]}_{a.text()}[{body.text}]"


class PlusMonomial:
    """``X^k * prod_j I^{+,kind}_{a_j}(body_j)``, interned like trees.

    ``kind`` is ``None`` for pure polynomials, which are shared by both
    degree maps.
    """

    __slots__ = ("poly", "factors", "kind", "text", "_hash", "__weakref__")

    def __init__(self) -> None:  # pragma: no cover - guarded
        raise TypeError("use plus_unit / plus_poly / plus_factor")

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, PlusMonomial):
            return NotImplemented
        return len(self.poly) == len(other.poly) and self.text == other.text

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"<plus {self.text}>"

    def __str__(self) -> str:
        return self.text

    def __reduce__(self):
        return (_rebuild_plus, (self.poly, self.factors, self.kind))

    def __mul__(self, other: "PlusMonomial") -> "PlusMonomial":
        return mult_plus(self, other)

    def is_unit(self) -> bool:
        return not self.factors and self.poly.is_zero()


_PLUS_INTERN: dict[tuple[int, str], PlusMonomial] = {}
_PLUS_LOCK = threading.Lock()


def _make_plus(poly_: MultiIndex, factors: Iterable[tuple[int, MultiIndex, DecoratedTree]], kind) -> PlusMonomial:
    items = sorted(((_plus_text(k, a, b), (k, a, b)) for k, a, b in factors), key=lambda p: p[0])
    parts = []
    if not poly_.is_zero():
        parts.append("X^" + poly_.text())
    parts.extend(p[0] for p in items)
    text = "*".join(parts) if parts else "1"
    key = (len(poly_), text)
    hit = _PLUS_INTERN.get(key)
    if hit is not None:
        return hit
    m = object.__new__(PlusMonomial)
    m.poly = poly_
    m.factors = tuple(p[1] for p in items)
    m.kind = kind if items else None
    m.text = text
    m._hash = hash(("+",) + key)
    with _PLUS_LOCK:
        return _PLUS_INTERN.setdefault(key, m)


def _rebuild_plus(poly_, factors, kind):
    return _make_plus(MultiIndex(poly_), [(k, MultiIndex(a), b) for k, a, b in factors], kind)


def plus_unit(d: int = 1) -> PlusMonomial:
    return _make_plus(MultiIndex.zero(d), (), None)


_PLUS_POLYS: dict = {}


def plus_poly(k: Iterable[int]) -> PlusMonomial:
    hit = _PLUS_POLYS.get(k)
    if hit is None:
        k = k if type(k) is MultiIndex else MultiIndex(k)
        hit = _PLUS_POLYS.setdefault(k, _make_plus(k, (), None))
    return hit


_FACTORS: dict = {}
_MISSING = object()


def plus_factor(kind: int, a: Iterable[int], body: DecoratedTree, params: DegreeParams) -> PlusMonomial | None:
    """``I^{+,kind}_a(body)``, or ``None`` (the zero monomial) when its degree is not positive."""
    key = (kind, a, body, params)
    hit = _FACTORS.get(key, _MISSING)
    if hit is not _MISSING:
        return hit
    if type(a) is not MultiIndex:
        a = MultiIndex(a)
    if degree(body, kind, params) + 2 - params.size(a) <= 0:
        out = None
    else:
        out = _make_plus(MultiIndex.zero(body.d), ((kind, a, body),), kind)
    return _FACTORS.setdefault(key, out)


def mult_plus(m1: PlusMonomial | None, m2: PlusMonomial | None) -> PlusMonomial | None:
    """Product in the positive-degree algebra; ``None`` is the zero monomial."""
    if m1 is None or m2 is None:
        return None
    if m1.kind is not None and m2.kind is not None and m1.kind != m2.kind:
        raise KindMismatch(f"{m1.text} and {m2.text}")
    if m2.is_unit():
        return m1
    if m1.is_unit():
        return m2
    return _make_plus(m1.poly + m2.poly, m1.factors + m2.factors, m1.kind if m1.kind is not None else m2.kind)


def tilde_basis(a: Iterable[int], t: DecoratedTree, params: DegreeParams, kind: int = 0) -> LinComb:
    """``sum_l X^l / l! I^{+,kind}_{a+l}(t)``; only finitely many terms are non-zero."""
    a = MultiIndex(a)
    top = degree(t, kind, params) + 2 - params.size(a)
    out: LinComb = LinComb()
    for ell in multi_indices_below(top, params):
        f = plus_factor(kind, a + ell, t, params)
        if f is None:
            continue
        out.add_term(mult_plus(plus_poly(ell), f), Q(1, ell.factorial()))
    return out
