"""Tree spaces generated by node rules, and structural checks on them."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .errors import BoundsTooLarge, ConfigError
from .hopf import coaction, d_xi
from .trees import (
    NONE,
    XI0,
    DecoratedTree,
    DegreeParams,
    MultiIndex,
    degree,
    plant,
    unit,
    with_root,
    _make,
)

__all__ = [
    "Shape",
    "RuleSet",
    "RULE_NAMES",
    "make_rules",
    "enumerate_T0",
    "lift_T1",
    "check_assumption1",
    "check_closure",
    "node_conforms",
    "edge_count",
    "Violation",
    "ClosureReport",
]

NOISE_SLOT = "Xi"


@dataclass(frozen=True)
class Shape:
    """Allowed product at a node.

    ``free`` allows any number of zero-index planted factors; ``fixed`` lists
    the remaining factors exactly, as edge indices or ``"Xi"`` for the noise.
    """

    free: bool
    fixed: tuple = ()

    def counts(self) -> Counter:
        return Counter(self.fixed)


@dataclass(frozen=True)
class RuleSet:
    name: str
    shapes: tuple[Shape, ...]
    d: int = 1
    max_noises: int = 3
    max_edges: int = 8
    cap: int = 200_000
    # Whether the empty product 1 is itself a member (it is when a shape
    # without noise and without mandatory factors exists).
    allow_unit: bool = False


RULE_NAMES = ("qua", "qua_c", "gkpz", "phi43")
_ALIASES = {"qua_complete": "qua_c", "phi4": "phi43", "phi43": "phi43", "gKPZ": "gkpz"}


def make_rules(name: str, max_noises: int = 3, max_edges: int = 8, d: int = 1, cap: int = 200_000) -> RuleSet:
    """The four built-in rule sets. ``I_1`` and ``I_2`` differentiate in the first space direction."""
    name = _ALIASES.get(name, name)
    if name not in RULE_NAMES:
        raise ConfigError(f"unknown rule set {name!r}; choose from {', '.join(RULE_NAMES)}")
    e1 = MultiIndex.unit(d, 1)
    i1 = e1
    i2 = e1 + e1
    z = MultiIndex.zero(d)
    if name == "qua":
        shapes = (Shape(True, (i2,)), Shape(False, (NOISE_SLOT,)))
        allow_unit = False
    elif name == "qua_c":
        shapes = (Shape(True), Shape(True, (i2,)), Shape(False, (NOISE_SLOT,)))
        allow_unit = True
    elif name == "gkpz":
        shapes = (Shape(True), Shape(True, (i1,)), Shape(True, (i1, i1)), Shape(True, (NOISE_SLOT,)))
        allow_unit = True
    else:
        shapes = (Shape(False, (z,)), Shape(False, (z, z)), Shape(False, (z, z, z)), Shape(False, (NOISE_SLOT,)))
        allow_unit = False
    if max_noises < 0 or max_edges < 0:
        raise ConfigError("bounds must be non-negative")
    return RuleSet(name, shapes, d, max_noises, max_edges, cap, allow_unit)


def _node_items(t: DecoratedTree) -> Counter:
    c = Counter(a for a, _ in t.children)
    if t.noise != NONE:
        c[NOISE_SLOT] += 1
    return c


def node_conforms(t: DecoratedTree, rules: RuleSet, partial: bool = False) -> bool:
    """Does the root of ``t`` match a shape (exactly, or as a sub-product when ``partial``)?"""
    items = _node_items(t)
    z = MultiIndex.zero(rules.d)
    for shape in rules.shapes:
        need = shape.counts()
        rest = Counter(items)
        ok = True
        for k, n in need.items():
            have = rest.pop(k, 0)
            if have > n or (have < n and not partial):
                ok = False
                break
        if not ok:
            continue
        extra_free = rest.pop(z, 0)
        if rest:
            continue
        if extra_free and not shape.free:
            continue
        return True
    return False


def enumerate_T0(rules: RuleSet, params: DegreeParams | None = None) -> list[DecoratedTree]:
    """All rule-conforming trees within the noise and edge bounds, sorted by text.

    Every non-unit tree carries at least one noise, so inner subtrees are never
    ``1``; ``1`` itself is included when the rules allow the empty product.
    Trees are built level by level in their edge count, so each level only
    draws children from the finished lower levels.
    """
    d = rules.d
    known: set[DecoratedTree] = set()
    for e in range(rules.max_edges + 1):
        # Cheapest subtrees first so the multiset search can stop early.
        pool = sorted(known, key=lambda t: (_edge_cost(t), t.noise_total, t.text))
        for shape in rules.shapes:
            for t in _build_nodes(shape, pool, rules, e):
                known.add(t)
            if len(known) > rules.cap:
                raise BoundsTooLarge(f"more than {rules.cap} trees for rule set {rules.name}")
    out = sorted(known)
    if rules.allow_unit:
        out = sorted(out + [unit(d)])
    return out


def edge_count(t: DecoratedTree) -> int:
    """Edges of ``t`` with noises counted as edges, as in the edge-decoration picture."""
    return t.n_edges + t.noise_total


def _edge_cost(c: DecoratedTree) -> int:
    return 1 + edge_count(c)


def _build_nodes(shape: Shape, pool: list[DecoratedTree], rules: RuleSet, edges: int) -> Iterable[DecoratedTree]:
    """Nodes of ``shape`` with exactly ``edges`` edges in total."""
    z = MultiIndex.zero(rules.d)
    fixed_edges = [a for a in shape.fixed if a != NOISE_SLOT]
    has_noise = NOISE_SLOT in shape.fixed
    flag = XI0 if has_noise else NONE
    budget = rules.max_noises - (1 if has_noise else 0)
    # A noise is an edge of its own.
    edges -= 1 if has_noise else 0
    if budget < 0 or edges < 0:
        return
    # All mandatory labels of a built-in shape coincide.
    label = MultiIndex(fixed_edges[0]) if fixed_edges else None
    for fixed in _multisets(pool, budget, edges, len(fixed_edges), exact=False):
        n_noise = sum(c.noise_total for c in fixed)
        n_edge = sum(_edge_cost(c) for c in fixed)
        if shape.free:
            extras = _multisets(pool, budget - n_noise, edges - n_edge, None, exact=True)
        else:
            extras = [[]] if n_edge == edges else []
        for extra in extras:
            kids = [(label, c) for c in fixed] + [(z, c) for c in extra]
            if not kids and not has_noise:
                continue
            yield _make(z, flag, kids)


def _multisets(pool: list[DecoratedTree], noise_budget: int, edge_budget: int, size: int | None, exact: bool):
    """Multisets of subtrees within the budgets.

    ``size`` fixes the number of elements when given; ``exact`` demands that
    the edge budget is used up.
    """
    out: list[list[DecoratedTree]] = []
    if edge_budget < 0:
        return out

    def rec(start: int, cur: list[DecoratedTree], nb: int, eb: int) -> None:
        done = size is not None and len(cur) == size
        if done or size is None:
            if not exact or eb == 0:
                out.append(list(cur))
            if done:
                return
        for j in range(start, len(pool)):
            c = pool[j]
            cost_e = _edge_cost(c)
            if cost_e > eb:
                break
            if c.noise_total <= nb:
                cur.append(c)
                rec(j, cur, nb - c.noise_total, eb - cost_e)
                cur.pop()

    rec(0, [], noise_budget, edge_budget)
    return out


def lift_T1(trees: Iterable[DecoratedTree]) -> list[DecoratedTree]:
    """Add every variant with exactly one ``Xi0`` replaced by ``Xi1``."""
    out: set[DecoratedTree] = set()
    for t in trees:
        out.add(t)
        out.update(d_xi(t).keys())
    return sorted(out)


@dataclass(frozen=True)
class Violation:
    tree: DecoratedTree
    branch: str
    degree: Fraction

    def render(self) -> str:
        return f"{self.tree.text}\t{self.branch}\t{self.degree}"


def check_assumption1(trees: Iterable[DecoratedTree], params: DegreeParams) -> list[Violation]:
    """Planted branches ``I_a(D_Xi t')`` of non-positive ``deg_0``, at every node."""
    out: list[Violation] = []
    for t in trees:
        seen = set()
        for node in t.nodes():
            for a, c in node.children:
                if c.n_xi0 == 0:
                    continue
                deg = degree(plant(a, c), 0, params) + params.xi1_gain
                if deg > 0:
                    continue
                branch = plant(a, min(d_xi(c).keys())).text
                if branch not in seen:
                    seen.add(branch)
                    out.append(Violation(t, branch, deg))
    return out


@dataclass
class ClosureReport:
    r_escapes: list[tuple[DecoratedTree, DecoratedTree]] = field(default_factory=list)
    shape_escapes: list[tuple[DecoratedTree, DecoratedTree]] = field(default_factory=list)

    @property
    def closed(self) -> bool:
        return not self.r_escapes and not self.shape_escapes

    def lines(self) -> list[str]:
        out = [f"R-image\t{t.text}\t{s.text}" for t, s in self.r_escapes]
        out += [f"coaction\t{t.text}\t{s.text}" for t, s in self.shape_escapes]
        return out


def _strip_polys(t: DecoratedTree) -> DecoratedTree:
    kids = [(a, _strip_polys(c)) for a, c in t.children]
    return _make(MultiIndex.zero(t.d), t.noise, kids)


def _conforms_everywhere(t: DecoratedTree, rules: RuleSet) -> bool:
    return all(node_conforms(n, rules, partial=True) for n in t.nodes())


def check_closure(rules: RuleSet, trees: list[DecoratedTree], prep, params: DegreeParams) -> ClosureReport:
    """Stability of the enumerated span under ``R`` and under coaction left factors."""
    from .algebra import LinComb
    from .prep import apply_R

    members = set(trees)
    report = ClosureReport()
    for t in trees:
        for s in apply_R(prep, LinComb.of(t)).keys():
            if s not in members:
                report.r_escapes.append((t, s))
        for i in (0, 1):
            for (l, _r) in coaction(i, t, params).terms:
                stripped = _strip_polys(l)
                if not _conforms_everywhere(stripped, rules):
                    report.shape_escapes.append((t, l))
    return report
