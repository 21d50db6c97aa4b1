"""Decorated rooted trees in canonical form.

A tree is stored in the normal form ``X^k * Xi * I_{a_1}(t_1) * ... * I_{a_n}(t_n)``:
a polynomial decoration at the root, at most one noise flag, and a sorted
multiset of planted children. Instances are interned, so structurally equal
trees are the same object and equality/hashing are cheap.

Text grammar::

    tree   := factor | factor "*" tree
    factor := "1" | "Xi0" | "Xi1" | "X^(" int ("," int)* ")"
            | "I_(" int ("," int)* ")[" tree "]" | "I[" tree "]"
"""

from __future__ import annotations

import math
import threading
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product as iproduct
from typing import Iterable, Iterator

from gmpy2 import mpq

from .errors import NoiseProduct, ParseError

__all__ = [
    "MultiIndex",
    "DegreeParams",
    "DecoratedTree",
    "NONE",
    "XI0",
    "XI1",
    "unit",
    "noise",
    "poly",
    "plant",
    "tree_product",
    "product_of",
    "degree",
    "noise_count",
    "derive",
    "symmetry_factor",
    "serialize",
    "parse",
    "multi_indices_below",
]

NONE, XI0, XI1 = 0, 1, 2
_ZEROS: dict = {}
_NOISE_TEXT = {XI0: "Xi0", XI1: "Xi1"}


class MultiIndex(tuple):
    """Fixed-length vector of non-negative integers; entry 0 is time.

    ``+`` and ``-`` act componentwise (unlike plain tuples). Subtraction below
    zero raises ``ValueError``.
    """

    __slots__ = ()

    def __new__(cls, entries: Iterable[int]) -> "MultiIndex":
        vals = tuple(int(v) for v in entries)
        if any(v < 0 for v in vals):
            raise ValueError(f"negative multi-index entry in {vals}")
        return super().__new__(cls, vals)

    @classmethod
    def zero(cls, d: int) -> "MultiIndex":
        hit = _ZEROS.get(d)
        if hit is None:
            hit = _ZEROS.setdefault(d, tuple.__new__(cls, (0,) * (d + 1)))
        return hit

    @classmethod
    def unit(cls, d: int, j: int) -> "MultiIndex":
        return cls(1 if i == j else 0 for i in range(d + 1))

    def __add__(self, other: tuple) -> "MultiIndex":  # type: ignore[override]
        if len(other) != len(self):
            raise ValueError("multi-index length mismatch")
        return _fast_mi(tuple(map(int.__add__, self, other)))

    def __sub__(self, other: tuple) -> "MultiIndex":
        if len(other) != len(self):
            raise ValueError("multi-index length mismatch")
        vals = tuple(map(int.__sub__, self, other))
        if min(vals) < 0:
            raise ValueError(f"negative multi-index entry in {vals}")
        return _fast_mi(vals)

    def __repr__(self) -> str:
        return "MultiIndex(" + ",".join(map(str, self)) + ")"

    def leq(self, other: tuple) -> bool:
        return all(a <= b for a, b in zip(self, other))

    def is_zero(self) -> bool:
        return not any(self)

    def factorial(self) -> int:
        out = 1
        for v in self:
            out *= math.factorial(v)
        return out

    def binomial(self, sub: tuple) -> int:
        """Product of componentwise binomial coefficients ``(self choose sub)``."""
        out = 1
        for n, k in zip(self, sub):
            out *= math.comb(n, k)
        return out

    def size(self, scaling: tuple[int, ...]) -> int:
        """Scaled length ``|n|_s = sum s_i n_i``."""
        return sum(s * v for s, v in zip(scaling, self))

    def text(self) -> str:
        return "(" + ",".join(map(str, self)) + ")"


def _fast_mi(vals: tuple) -> MultiIndex:
    """Skip validation for entries already known to be non-negative ints."""
    return tuple.__new__(MultiIndex, vals)


@dataclass(frozen=True)
class DegreeParams:
    """Noise regularity, dimension and scaling.

    ``alpha`` defaults to ``-3/2 - 1/100``; the small shift keeps strict
    inequalities on degrees away from ties.
    """

    alpha: Fraction = Fraction(-3, 2) - Fraction(1, 100)
    d: int = 1
    scaling: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        if not self.scaling:
            object.__setattr__(self, "scaling", (2,) + (1,) * self.d)
        object.__setattr__(self, "scaling", tuple(int(s) for s in self.scaling))
        if self.alpha >= 0:
            raise ValueError("alpha must be negative")
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if len(self.scaling) != self.d + 1 or min(self.scaling) < 1:
            raise ValueError("scaling must have d+1 entries, each at least 1")
        # Used as a memo key everywhere; hash once.
        object.__setattr__(self, "_hash", hash((self.alpha, self.d, self.scaling)))

    def __hash__(self) -> int:
        return self._hash

    @property
    def xi1_gain(self) -> Fraction:
        return Fraction(self.d + 2, 2)

    def size(self, n: tuple[int, ...]) -> int:
        return sum(s * v for s, v in zip(self.scaling, n))


@lru_cache(maxsize=4096)
def multi_indices_below(bound: Fraction, params: DegreeParams, lower: Fraction | None = None) -> tuple[MultiIndex, ...]:
    """All multi-indices ``n`` with ``lower <= |n|_s < bound``, in lexicographic order."""
    if bound <= 0:
        return ()
    ranges = [range(0, int(math.floor(bound / s)) + 1) for s in params.scaling]
    out = []
    for entries in iproduct(*ranges):
        size = params.size(entries)
        if size < bound and (lower is None or size >= lower):
            out.append(_fast_mi(entries))
    return tuple(out)


def _child_text(a: MultiIndex, t: "DecoratedTree") -> str:
    if a.is_zero():
        return "I[" + t.text + "]"
    return "I_" + a.text() + "[" + t.text + "]"


class DecoratedTree:
    """Immutable, interned decorated tree. Build with the module functions."""

    __slots__ = (
        "poly",
        "noise",
        "children",
        "child_texts",
        "text",
        "d",
        "n_xi0",
        "n_xi1",
        "n_edges",
        "edge_sum",
        "poly_sum",
        "_hash",
        "__weakref__",
    )

    poly: MultiIndex
    noise: int
    children: tuple[tuple[MultiIndex, "DecoratedTree"], ...]
    text: str

    def __init__(self) -> None:  # pragma: no cover - guarded
        raise TypeError("use the tree constructors in decotrees.trees")

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, DecoratedTree):
            return NotImplemented
        return self.d == other.d and self.text == other.text

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "DecoratedTree") -> bool:
        return self.text < other.text

    def __repr__(self) -> str:
        return f"<tree {self.text}>"

    def __str__(self) -> str:
        return self.text

    def __reduce__(self):
        return (_rebuild, (self.poly, self.noise, self.children))

    def __mul__(self, other: "DecoratedTree") -> "DecoratedTree":
        return tree_product(self, other)

    @property
    def noise_total(self) -> int:
        return self.n_xi0 + self.n_xi1

    def is_unit(self) -> bool:
        return self.noise == NONE and not self.children and self.poly.is_zero()

    def is_polynomial(self) -> bool:
        return self.noise == NONE and not self.children

    def is_planted(self) -> bool:
        return self.noise == NONE and self.poly.is_zero() and len(self.children) == 1

    def nodes(self) -> Iterator["DecoratedTree"]:
        """Pre-order iteration over the subtrees rooted at every node."""
        yield self
        for _, c in self.children:
            yield from c.nodes()


_INTERN: dict[tuple[int, str], DecoratedTree] = {}
_INTERN_LOCK = threading.Lock()


def _make(poly: MultiIndex, noise_flag: int, children: Iterable[tuple[MultiIndex, DecoratedTree]]) -> DecoratedTree:
    d = len(poly) - 1
    pairs = [(_child_text(a, t), a, t) for a, t in children]
    pairs.sort(key=lambda p: p[0])
    parts = []
    if not poly.is_zero():
        parts.append("X^" + poly.text())
    parts.extend(p[0] for p in pairs)
    if noise_flag != NONE:
        parts.append(_NOISE_TEXT[noise_flag])
    text = "*".join(parts) if parts else "1"
    key = (d, text)
    hit = _INTERN.get(key)
    if hit is not None:
        return hit
    t = object.__new__(DecoratedTree)
    t.poly = poly
    t.noise = noise_flag
    t.children = tuple((a, c) for _, a, c in pairs)
    t.child_texts = tuple(p[0] for p in pairs)
    t.text = text
    t.d = d
    n0 = 1 if noise_flag == XI0 else 0
    n1 = 1 if noise_flag == XI1 else 0
    edges = len(pairs)
    esum = [0] * (d + 1)
    psum = list(poly)
    for _, a, c in pairs:
        if c.d != d:
            raise ValueError("dimension mismatch between trees")
        n0 += c.n_xi0
        n1 += c.n_xi1
        edges += c.n_edges
        for i in range(d + 1):
            esum[i] += a[i] + c.edge_sum[i]
            psum[i] += c.poly_sum[i]
    t.n_xi0, t.n_xi1, t.n_edges = n0, n1, edges
    t.edge_sum = tuple(esum)
    t.poly_sum = tuple(psum)
    t._hash = hash(key)
    with _INTERN_LOCK:
        return _INTERN.setdefault(key, t)


def _rebuild(poly, noise_flag, children):
    return _make(MultiIndex(poly), noise_flag, [(MultiIndex(a), c) for a, c in children])


def unit(d: int = 1) -> DecoratedTree:
    """The empty tree ``1``."""
    return _make(MultiIndex.zero(d), NONE, ())


def noise(kind: int, d: int = 1) -> DecoratedTree:
    """``Xi0`` (kind 1) or ``Xi1`` (kind 2) as a single node."""
    if kind not in (XI0, XI1):
        raise ValueError("noise kind must be XI0 or XI1")
    return _make(MultiIndex.zero(d), kind, ())


_POLYS: dict = {}
_PLANTS: dict = {}


def poly(k: Iterable[int]) -> DecoratedTree:
    """The monomial ``X^k``."""
    hit = _POLYS.get(k)
    if hit is None:
        k = k if type(k) is MultiIndex else MultiIndex(k)
        hit = _POLYS.setdefault(k, _make(k, NONE, ()))
    return hit


def plant(a: Iterable[int], t: DecoratedTree) -> DecoratedTree:
    """Graft ``t`` onto a new undecorated root through an edge ``I_a``."""
    key = (a, t)
    hit = _PLANTS.get(key)
    if hit is not None:
        return hit
    a = a if type(a) is MultiIndex else MultiIndex(a)
    if len(a) != t.d + 1:
        raise ValueError("edge index has the wrong length")
    return _PLANTS.setdefault((a, t), _make(MultiIndex.zero(t.d), NONE, ((a, t),)))


def tree_product(t1: DecoratedTree, t2: DecoratedTree) -> DecoratedTree:
    """Merge the roots of ``t1`` and ``t2``."""
    if t1.noise != NONE and t2.noise != NONE:
        raise NoiseProduct(f"cannot multiply {t1.text} and {t2.text}")
    if t1.d != t2.d:
        raise ValueError("dimension mismatch between trees")
    if t2.is_unit():
        return t1
    if t1.is_unit():
        return t2
    return _make(t1.poly + t2.poly, t1.noise or t2.noise, t1.children + t2.children)


def product_of(trees: Iterable[DecoratedTree], d: int = 1) -> DecoratedTree:
    out = unit(d)
    for t in trees:
        out = tree_product(out, t)
    return out


def with_root(t: DecoratedTree, poly_: MultiIndex | None = None, noise_flag: int | None = None,
              children: Iterable[tuple[MultiIndex, DecoratedTree]] | None = None) -> DecoratedTree:
    """Copy of ``t`` with some root fields replaced."""
    return _make(
        t.poly if poly_ is None else MultiIndex(poly_),
        t.noise if noise_flag is None else noise_flag,
        t.children if children is None else tuple(children),
    )


_DEGREES: dict = {}


def degree(t: DecoratedTree, which: int, params: DegreeParams) -> Fraction:
    """``deg_which(t)``; ``Xi1`` gains ``(d+2)/2`` under ``deg_0`` only."""
    key = (t, which, params)
    hit = _DEGREES.get(key)
    if hit is not None:
        return hit
    if which not in (0, 1):
        raise ValueError("which must be 0 or 1")
    out = params.alpha * (t.n_xi0 + t.n_xi1)
    if which == 0:
        out += params.xi1_gain * t.n_xi1
    out += 2 * t.n_edges - params.size(t.edge_sum) + params.size(t.poly_sum)
    return _DEGREES.setdefault(key, out)


def noise_count(t: DecoratedTree) -> int:
    return t.n_xi0 + t.n_xi1


def _compositions(p: MultiIndex, slots: int) -> Iterator[tuple[MultiIndex, ...]]:
    """Ways of writing ``p`` as an ordered sum of ``slots`` multi-indices."""
    per_comp = []
    for v in p:
        per_comp.append(list(_int_compositions(v, slots)))
    for choice in iproduct(*per_comp):
        yield tuple(_fast_mi(tuple(choice[c][s] for c in range(len(p)))) for s in range(slots))


def _int_compositions(n: int, slots: int) -> Iterator[tuple[int, ...]]:
    if slots == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _int_compositions(n - first, slots - 1):
            yield (first,) + rest


_DERIVE: dict = {}


def derive(p: Iterable[int], t: DecoratedTree):
    """Abstract derivative ``D_p`` extended to products by the Leibniz rule.

    The polynomial factor and each planted edge receive a share of ``p``; the
    noise flag has no derivative term of its own. Results are memoised and
    shared, so callers must not mutate them.
    """
    p = MultiIndex(p)
    key = (p, t)
    hit = _DERIVE.get(key)
    if hit is None:
        hit = _DERIVE.setdefault(key, _derive(p, t))
    return hit


def _derive(p: MultiIndex, t: DecoratedTree):
    from .algebra import LinComb

    if p.is_zero():
        return LinComb.of(t)
    kids = list(t.children)
    slots = 1 + len(kids)
    out: dict = {}
    pfact = p.factorial()
    for comp in _compositions(p, slots):
        q0 = comp[0]
        if not q0.leq(t.poly):
            continue
        coef = mpq(pfact)
        for q in comp:
            coef /= q.factorial()
        k = t.poly
        coef *= mpq(k.factorial(), (k - q0).factorial())
        new_kids = [(a + q, c) for (a, c), q in zip(kids, comp[1:])]
        tree = _make(k - q0, t.noise, new_kids)
        out[tree] = out.get(tree, 0) + coef
    return LinComb(out)


@lru_cache(maxsize=None)
def symmetry_factor(t: DecoratedTree) -> int:
    """Number of decoration-preserving automorphisms."""
    out = 1
    for (a, c), m in Counter(t.children).items():
        out *= math.factorial(m) * symmetry_factor(c) ** m
    return out


def serialize(t: DecoratedTree) -> str:
    return t.text


class _Parser:
    def __init__(self, text: str, d: int | None) -> None:
        self.s = text
        self.i = 0
        self.d = d

    def error(self, msg: str) -> ParseError:
        return ParseError(msg, self.i, self.s)

    def skip(self) -> None:
        while self.i < len(self.s) and self.s[self.i].isspace():
            self.i += 1

    def peek(self, tok: str) -> bool:
        self.skip()
        return self.s.startswith(tok, self.i)

    def expect(self, tok: str) -> None:
        self.skip()
        if not self.s.startswith(tok, self.i):
            raise self.error(f"expected {tok!r}")
        self.i += len(tok)

    def integer(self) -> int:
        self.skip()
        j = self.i
        while j < len(self.s) and self.s[j].isdigit():
            j += 1
        if j == self.i:
            raise self.error("expected a non-negative integer")
        val = int(self.s[self.i:j])
        self.i = j
        return val

    def index(self) -> MultiIndex:
        start = self.i
        self.expect("(")
        vals = [self.integer()]
        while self.peek(","):
            self.expect(",")
            vals.append(self.integer())
        self.expect(")")
        if self.d is None:
            self.d = len(vals) - 1
        elif len(vals) != self.d + 1:
            self.i = start
            raise self.error(f"multi-index must have {self.d + 1} entries")
        return MultiIndex(vals)

    def tree(self) -> DecoratedTree:
        factors = [self.factor()]
        while self.peek("*"):
            self.expect("*")
            factors.append(self.factor())
        d = self.d if self.d is not None else 1
        polys, noise_flag, kids = [], NONE, []
        for pos, kind, payload in factors:
            if kind == "X":
                polys.append(payload)
            elif kind == "noise":
                if noise_flag != NONE:
                    raise ParseError("product of two noises", pos, self.s)
                noise_flag = payload
            elif kind == "I":
                kids.append(payload)
        k = MultiIndex.zero(d)
        for pk in polys:
            if len(pk) != d + 1:
                raise self.error("multi-index length mismatch")
            k = k + pk
        for a, c in kids:
            if len(a) != d + 1 or c.d != d:
                raise self.error("multi-index length mismatch")
        return _make(k, noise_flag, kids)

    def factor(self):
        self.skip()
        pos = self.i
        if self.peek("Xi0"):
            self.i += 3
            return pos, "noise", XI0
        if self.peek("Xi1"):
            self.i += 3
            return pos, "noise", XI1
        if self.peek("X^"):
            self.i += 2
            return pos, "X", self.index()
        if self.peek("I_"):
            self.i += 2
            a = self.index()
            self.expect("[")
            sub = self.tree()
            self.expect("]")
            return pos, "I", (a, sub)
        if self.peek("I["):
            self.i += 2
            sub = self.tree()
            self.expect("]")
            if self.d is None:
                self.d = sub.d
            return pos, "I", (MultiIndex.zero(sub.d), sub)
        if self.peek("1"):
            self.i += 1
            return pos, "one", None
        raise self.error("expected a factor")


def parse(text: str, d: int | None = None) -> DecoratedTree:
    """Parse the tree grammar; ``d`` is inferred from the first multi-index when omitted."""
    p = _Parser(text, d)
    p.skip()
    if p.i >= len(text):
        raise ParseError("empty input", 0, text)
    # A leading "1" or noise-only tree carries no dimension information; fix it up front.
    if d is None:
        import re

        m = re.search(r"\(([0-9,\s]*)\)", text)
        if m:
            p.d = len(m.group(1).split(",")) - 1
    t = p.tree()
    p.skip()
    if p.i != len(text):
        raise p.error("unexpected trailing input")
    return t
