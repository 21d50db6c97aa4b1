"""Preparation maps given by root-pattern rewrite rules, and their axiom checks.

A rule ``(pattern, coef, replacement)`` acts at the root only. ``pattern`` is
a product of planted factors (optionally with a root ``Xi0``) whose content is
``Xi0``-only. For a tree ``t`` whose root factors contain the pattern's factors
as a sub-multiset,

    R t = t + sum_rules coef * (number of ways) * replacement * rest

where ``rest`` is ``t`` with one occurrence removed. Root polynomials and
``Xi1``-carrying siblings stay in ``rest``; that keeps ``R`` compatible with
the coactions and with ``D_Xi``.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Iterable

from .algebra import LinComb, Q, TensorElem
from .errors import ConfigError, ParseError
from .hopf import coaction, d_xi, delta_hat0, project_Q0
from .trees import (
    NONE,
    XI0,
    DecoratedTree,
    DegreeParams,
    MultiIndex,
    degree,
    noise_count,
    parse,
    tree_product,
    _make,
)

__all__ = [
    "PrepRule",
    "PrepMap",
    "apply_R",
    "verify_axioms",
    "verify_assumption2",
    "AxiomCheck",
    "load_prep",
    "parse_prep",
    "PRESETS",
]

PRESETS = ("trivial", "qua_c", "adversarial")


@dataclass(frozen=True)
class PrepRule:
    pattern: DecoratedTree
    coef: Fraction
    replacement: DecoratedTree

    def render(self) -> str:
        return f"{self.pattern.text} ; {_frac_text(self.coef)} ; {self.replacement.text}"


def _frac_text(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _check_pattern(p: DecoratedTree) -> None:
    if not p.poly.is_zero():
        raise ConfigError(f"pattern {p.text} has a root polynomial")
    if p.n_xi1:
        raise ConfigError(f"pattern {p.text} contains Xi1")
    if p.noise == NONE and len(p.children) < 2:
        raise ConfigError(f"pattern {p.text} must not be 1 or a planted tree")
    if p.noise != NONE and not p.children:
        raise ConfigError(f"pattern {p.text} must not be a bare noise")


class PrepMap:
    """Immutable list of rewrite rules with a per-tree memo table."""

    def __init__(self, rules: Iterable[PrepRule] = (), name: str = "custom") -> None:
        self.rules: tuple[PrepRule, ...] = tuple(rules)
        self.name = name
        for r in self.rules:
            _check_pattern(r.pattern)
        self._cache: dict[DecoratedTree, LinComb] = {}

    def __getstate__(self):
        return {"rules": self.rules, "name": self.name}

    def __setstate__(self, state) -> None:
        self.rules = state["rules"]
        self.name = state["name"]
        self._cache = {}

    def __repr__(self) -> str:
        return f"PrepMap({self.name!r}, {len(self.rules)} rules)"

    @property
    def is_trivial(self) -> bool:
        return not self.rules

    def with_coefficient(self, c) -> "PrepMap":
        c = Fraction(c)
        return PrepMap((PrepRule(r.pattern, c, r.replacement) for r in self.rules), f"{self.name}:{_frac_text(c)}")

    def on_tree(self, t: DecoratedTree) -> LinComb:
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        out = LinComb.of(t)
        for r in self.rules:
            for rest, ways in _occurrences(r.pattern, t):
                out.add_term(tree_product(r.replacement, rest), Q(r.coef) * ways)
        return self._cache.setdefault(t, out)

    def render(self) -> str:
        return "\n".join(r.render() for r in self.rules)


def _occurrences(p: DecoratedTree, t: DecoratedTree):
    """Ways of removing one copy of the root factors of ``p`` from the root of ``t``."""
    if p.noise != NONE and t.noise != XI0:
        return
    need = Counter(p.children)
    have = Counter(t.children)
    ways = 1
    for k, n in need.items():
        h = have.get(k, 0)
        if h < n:
            return
        ways *= math.comb(h, n)
    rest_kids = list((have - need).elements())
    rest = _make(t.poly, NONE if p.noise != NONE else t.noise, rest_kids)
    yield rest, ways


def apply_R(R: PrepMap, x) -> LinComb:
    """Linear extension of ``R``; accepts a tree or a ``LinComb`` of trees."""
    if isinstance(x, DecoratedTree):
        return R.on_tree(x)
    return x.map(R.on_tree)


# ---------------------------------------------------------------------------
# Preset files


def parse_prep(text: str, name: str = "custom", d: int | None = None) -> PrepMap:
    """Lines ``pattern ; rational ; replacement``; ``#`` starts a comment."""
    rules = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [s.strip() for s in line.split(";")]
        if len(parts) != 3:
            raise ConfigError(f"line {lineno}: expected 'pattern ; rational ; replacement'")
        try:
            pat = parse(parts[0], d)
            rep = parse(parts[2], pat.d)
        except ParseError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
        try:
            coef = Fraction(parts[1])
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"line {lineno}: bad rational {parts[1]!r}") from exc
        rules.append(PrepRule(pat, coef, rep))
    return PrepMap(rules, name)


def load_prep(spec: str, coef=None) -> PrepMap:
    """Load a shipped preset or a file. ``NAME:C`` overrides every rule coefficient with ``C``."""
    base, _, override = spec.partition(":")
    if override and not os.path.exists(spec):
        coef = override if coef is None else coef
        spec = base
    if spec in PRESETS:
        text = resources.files("decotrees").joinpath("presets", f"{spec}.prep").read_text()
    elif os.path.exists(spec):
        with open(spec) as fh:
            text = fh.read()
    else:
        raise ConfigError(f"unknown preparation map {spec!r}; presets: {', '.join(PRESETS)}")
    R = parse_prep(text, os.path.splitext(os.path.basename(spec))[0])
    if coef is not None:
        try:
            R = R.with_coefficient(Fraction(str(coef)))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad coefficient {coef!r}") from exc
    return R


# ---------------------------------------------------------------------------
# Axiom checks


@dataclass
class AxiomCheck:
    axiom: str
    tree: DecoratedTree
    ok: bool
    lhs: str = ""
    rhs: str = ""

    def line(self) -> str:
        status = "pass" if self.ok else "FAIL"
        out = f"{self.axiom}\t{self.tree.text}\t{status}"
        if not self.ok:
            out += f"\t{self.lhs}\t{self.rhs}"
        return out


def _r_left(R: PrepMap, x: TensorElem) -> TensorElem:
    return x.map_left(R.on_tree)


def _coaction_of(i: int, x: LinComb, params: DegreeParams) -> TensorElem:
    out = TensorElem()
    for t, c in x.items():
        out = out + coaction(i, t, params).scale(c)
    return out


def _dhat_of(x: LinComb, params: DegreeParams) -> TensorElem:
    out = TensorElem()
    for t, c in x.items():
        out = out + delta_hat0(t, params).scale(c)
    return out


def _check(name: str, t: DecoratedTree, lhs, rhs) -> AxiomCheck:
    ok = lhs == rhs
    if ok:
        return AxiomCheck(name, t, True)
    return AxiomCheck(name, t, False, lhs.render(), rhs.render())


AXIOMS = (
    "triangularity",
    "fixes-elementary",
    "R-Delta0",
    "R-Delta1",
    "R-DXi",
    "R-Q0",
    "R-DeltaHat0",
)


def verify_axioms(R: PrepMap, trees: list[DecoratedTree], params: DegreeParams) -> list[AxiomCheck]:
    """Every preparation-map axiom as an exact equality, tree by tree.

    The coaction and ``Q_0`` checks run over the trees plus their single
    ``Xi0 -> Xi1`` variants, since ``Delta_1``, ``Q_0`` and ``Delta-hat_0``
    act on that larger span.
    """
    from .rules import lift_T1

    out: list[AxiomCheck] = []
    t1 = lift_T1(trees)
    for t in trees:
        extra = R.on_tree(t) - LinComb.of(t)
        bad = [s for s in extra.keys()
               if degree(s, 1, params) < degree(t, 1, params) or noise_count(s) >= noise_count(t)]
        if bad:
            out.append(AxiomCheck("triangularity", t, False, extra.render(), ", ".join(s.text for s in bad)))
        else:
            out.append(AxiomCheck("triangularity", t, True))
        if t.is_polynomial() or t.is_planted() or (t.noise != NONE and not t.children and t.poly.is_zero()):
            out.append(_check("fixes-elementary", t, R.on_tree(t), LinComb.of(t)))
    for t in t1:
        Rt = R.on_tree(t)
        for i in (0, 1):
            out.append(_check(f"R-Delta{i}", t, _r_left(R, coaction(i, t, params)), _coaction_of(i, Rt, params)))
        out.append(_check("R-Q0", t, apply_R(R, project_Q0(LinComb.of(t))), project_Q0(Rt)))
        out.append(_check("R-DeltaHat0", t, _r_left(R, delta_hat0(t, params)), _dhat_of(Rt, params)))
    for t in trees:
        out.append(_check("R-DXi", t, apply_R(R, d_xi(t)), R.on_tree(t).map(d_xi)))
    return out


def _is_quasilinear_product(t: DecoratedTree, i2: MultiIndex) -> bool:
    if t.noise != NONE or not t.poly.is_zero():
        return False
    idx = Counter(a for a, _ in t.children)
    z = MultiIndex.zero(t.d)
    return idx.get(i2, 0) == 1 and sum(idx.values()) == 1 + idx.get(z, 0)


def verify_assumption2(R: PrepMap, trees: list[DecoratedTree]) -> list[AxiomCheck]:
    """``(R - id)`` of each ``(prod I(t_i)) I_2(t)`` must be a combination of pure ``prod I(s_j)`` with ``s_j`` in the span."""
    out: list[AxiomCheck] = []
    if not trees:
        return out
    d = trees[0].d
    i2 = MultiIndex.unit(d, 1) + MultiIndex.unit(d, 1)
    z = MultiIndex.zero(d)
    members = set(trees)
    for t in trees:
        if not _is_quasilinear_product(t, i2):
            continue
        extra = R.on_tree(t) - LinComb.of(t)
        bad = []
        for s in extra.keys():
            pure = s.noise == NONE and s.poly.is_zero() and all(a == z and c in members for a, c in s.children)
            if not pure:
                bad.append(s.text)
        if bad:
            out.append(AxiomCheck("assumption2", t, False, extra.render(), ", ".join(bad)))
        else:
            out.append(AxiomCheck("assumption2", t, True))
    return out
