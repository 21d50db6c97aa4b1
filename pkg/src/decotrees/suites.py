"""Identity suites: exact checks in the free algebra and numeric checks on the grid model."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .algebra import LinComb, TensorElem, plus_factor, plus_unit
from .errors import ConfigError
from .hopf import coaction, d_xi, delta_hat0, gamma_hat0
from .prep import PrepMap, verify_assumption2, verify_axioms
from .rules import RuleSet, check_assumption1, check_closure, enumerate_T0, lift_T1
from .trees import (
    NONE,
    XI1,
    DecoratedTree,
    DegreeParams,
    MultiIndex,
    degree,
    derive,
    plant,
    product_of,
    tree_product,
)

__all__ = [
    "CheckResult",
    "SuiteReport",
    "run_symbolic_suite",
    "symbolic_checks_for",
    "DERIVATIVE_DIRECTIONS",
    "parallel_map",
    "NumericConfig",
    "NUMERIC_IDENTITIES",
    "run_numeric_suite",
    "build_model",
    "base_points",
]

DERIVATIVE_DIRECTIONS = ((0, 1), (0, 2), (1, 0))


@dataclass(frozen=True)
class CheckResult:
    identity: str
    tree: str
    base: str
    max_abs: float
    max_rel: float
    ok: bool
    detail: str = ""


@dataclass
class SuiteReport:
    kind: str
    results: list[CheckResult] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if not r.ok]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def by_identity(self) -> dict[str, list[CheckResult]]:
        out: dict[str, list[CheckResult]] = {}
        for r in self.results:
            out.setdefault(r.identity, []).append(r)
        return out


def parallel_map(fn: Callable, items: Sequence, jobs: int = 1, chunk: int = 64) -> list:
    """Order-preserving map; chunks of ``items`` go to worker processes when ``jobs > 1``."""
    chunks = [items[i:i + chunk] for i in range(0, len(items), chunk)]
    if jobs <= 1 or len(chunks) <= 1:
        out = []
        for c in chunks:
            out.extend(fn(c))
        return out
    out = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for part in pool.map(fn, chunks):
            out.extend(part)
    return out


# ---------------------------------------------------------------------------
# exact comparisons


def _exact_diff(identity: str, tree: DecoratedTree, lhs, rhs) -> CheckResult:
    if lhs == rhs:
        return CheckResult(identity, tree.text, "-", 0.0, 0.0, True)
    diff = lhs - rhs
    size = max([abs(c) for _, c in lhs.items()] + [abs(c) for _, c in rhs.items()] + [0])
    err = max(abs(c) for _, c in diff.items())
    rel = float(err / size) if size else math.inf
    return CheckResult(identity, tree.text, "-", float(err), rel, False, f"{lhs.render()} | {rhs.render()}")


def _tensor_of(f: Callable[[DecoratedTree], TensorElem], x: LinComb) -> TensorElem:
    out = TensorElem()
    for t, c in x.items():
        for (l, r), c2 in f(t).items():
            out.add_term(l, r, c * c2)
    return out


def _triangular(identity: str, t: DecoratedTree, delta: TensorElem, which: int, params: DegreeParams,
                upper: bool) -> CheckResult:
    one = plus_unit(t.d)
    lead = delta.terms.get((t, one), 0)
    bad = []
    if lead != 1:
        bad.append(f"leading coefficient {lead}")
    dt = degree(t, which, params)
    for (l, r), _c in delta.items():
        if (l, r) == (t, one):
            continue
        dl = degree(l, which, params)
        if (upper and dl < dt) or (not upper and dl >= dt):
            bad.append(f"{l.text} (x) {r.text}")
    if bad:
        return CheckResult(identity, t.text, "-", float(len(bad)), 1.0, False, "; ".join(bad[:5]))
    return CheckResult(identity, t.text, "-", 0.0, 0.0, True)


def symbolic_checks_for(t: DecoratedTree, params: DegreeParams, in_T0: bool) -> list[CheckResult]:
    """Every exact identity that applies to ``t``."""
    out = []
    d0 = coaction(0, t, params)
    if in_T0:
        for p in DERIVATIVE_DIRECTIONS:
            lhs = d0.map_left(lambda s: derive(p, s))
            rhs = _tensor_of(lambda s: coaction(0, s, params), derive(p, t))
            out.append(_exact_diff(f"derivative-commutes[p={p[0]},{p[1]}]", t, lhs, rhs))
        dh = delta_hat0(t, params)
        out.append(_exact_diff("curtail-fixes-T0", t, dh, TensorElem.of(t, plus_unit(t.d))))
    dh = delta_hat0(t, params)
    out.append(_exact_diff("curtail-factorises", t, d0.map_right(lambda m: gamma_hat0(m, params)), dh))
    out.append(_triangular("coaction-triangular[i=0]", t, d0, 0, params, upper=False))
    out.append(_triangular("coaction-triangular[i=1]", t, coaction(1, t, params), 1, params, upper=False))
    out.append(_triangular("curtail-triangular", t, dh, 1, params, upper=True))
    return out


class _SymbolicJob:
    def __init__(self, params: DegreeParams, t0: frozenset) -> None:
        self.params = params
        self.t0 = t0

    def __call__(self, trees: Sequence[DecoratedTree]) -> list[CheckResult]:
        out = []
        for t in trees:
            out.extend(symbolic_checks_for(t, self.params, t in self.t0))
        return out


class _AxiomJob:
    def __init__(self, prep: PrepMap, params: DegreeParams) -> None:
        self.prep = prep
        self.params = params

    def __call__(self, trees: Sequence[DecoratedTree]) -> list[CheckResult]:
        out = []
        for a in verify_axioms(self.prep, list(trees), self.params):
            out.append(CheckResult(f"axiom:{a.axiom}", a.tree.text, "-", 0.0 if a.ok else 1.0,
                                   0.0 if a.ok else 1.0, a.ok, "" if a.ok else f"{a.lhs} | {a.rhs}"))
        return out


def run_symbolic_suite(rules: RuleSet, prep: PrepMap, params: DegreeParams, jobs: int = 1,
                       trees: list[DecoratedTree] | None = None) -> SuiteReport:
    """Exact identities over the enumerated space and its single-``Xi1`` lift.

    Always: derivative commutation, the curtailment factorisation, the
    curtailment fixing Xi1-free trees, and the triangularity statements. When
    ``R`` is non-trivial the preparation-map axioms, the quasilinear shape
    condition and closure are added. Branches with non-positive ``deg_0`` after
    ``D_Xi`` are counted in the metadata; they belong to the rules, not to a
    failed identity.
    """
    t0 = trees if trees is not None else enumerate_T0(rules, params)
    t1 = lift_T1(t0)
    report = SuiteReport("symbolic")
    report.meta.update(rule=rules.name, prep=prep.name, alpha=str(params.alpha), d=params.d,
                       max_noises=rules.max_noises, max_edges=rules.max_edges,
                       n_T0=len(t0), n_T1=len(t1))
    report.results.extend(parallel_map(_SymbolicJob(params, frozenset(t0)), t1, jobs))
    if not prep.is_trivial:
        report.results.extend(parallel_map(_AxiomJob(prep, params), t0, jobs))
        for a in verify_assumption2(prep, t0):
            report.results.append(CheckResult("quasilinear-shape", a.tree.text, "-", 0.0 if a.ok else 1.0,
                                              0.0 if a.ok else 1.0, a.ok, "" if a.ok else a.rhs))
        closure = check_closure(rules, t0, prep, params)
        report.results.append(CheckResult("closure", "*", "-", float(len(closure.lines())), 0.0,
                                          closure.closed, "; ".join(closure.lines()[:5])))
    violations = check_assumption1(t0, params)
    report.meta["assumption1_violations"] = len(violations)
    return report


# ---------------------------------------------------------------------------
# numeric suite


@dataclass(frozen=True)
class NumericConfig:
    """Everything that fixes a grid model, apart from the rules and ``R``."""

    grid: tuple[int, ...] = (48, 32)
    cutoff: float = 0.4
    stencil_order: int = 8
    noise: str = "trig"
    seed: int = 0
    tol: float = 1e-8
    base_points: int = 8

    @property
    def atol(self) -> float:
        return 1e-12 if self.tol > 0 else 0.0


NUMERIC_IDENTITIES = (
    "premodel-factorisation",
    "premodel-inverse",
    "curtailed-model",
    "malliavin",
    "gamma-is-model",
    "diagonal-identity",
    "planted-projection",
    "continuity",
    "model-axiom",
    "derivative-count",
    "dgamma-leibniz",
    "quasilinear-diagonal",
    "second-derivative",
)


_MODELS: dict = {}


def build_model(config: NumericConfig, params: DegreeParams, prep: PrepMap):
    """Grid model for a configuration; one per process and key."""
    from .model import Grid, GridModel, KernelFamily, NoisePair

    key = (config, params, prep.name, prep.render())
    hit = _MODELS.get(key)
    if hit is not None:
        return hit
    if len(config.grid) != params.d + 1:
        raise ConfigError(f"grid {config.grid} needs {params.d + 1} axes for d={params.d}")
    grid = Grid(config.grid)
    kernels = KernelFamily.heat(grid, config.cutoff, config.stencil_order)
    if config.noise == "trig":
        noise = NoisePair.trigonometric(grid)
    elif config.noise == "mollified":
        noise = NoisePair.mollified(grid, config.seed)
    else:
        raise ConfigError(f"unknown noise {config.noise!r}; use trig or mollified")
    model = GridModel(grid, kernels, noise, params, prep)
    _MODELS.clear()
    return _MODELS.setdefault(key, model)


def base_points(config: NumericConfig, reach: int) -> list[tuple[int, ...]]:
    """Corners of a coarse sublattice, kept ``2 * reach`` cells away from the box seam in space."""
    shape = config.grid
    n = config.base_points
    if n < 2 or n % 2:
        raise ConfigError("base-point count must be an even number >= 2")
    margin = 2 * reach
    nx = shape[1]
    if nx - 1 - 2 * margin < n // 2 - 1:
        raise ConfigError(f"grid {shape} too small for {n} base points with stencil reach {reach}")
    ts = [shape[0] // 4, (3 * shape[0]) // 4]
    xs = [int(round(v)) for v in np.linspace(margin, nx - 1 - margin, n // 2)]
    rest = tuple(s // 2 for s in shape[2:])
    return [(t, x) + rest for t in ts for x in xs]


def _err(identity: str, tree: str, base: str, lhs, rhs, config: NumericConfig, detail: str = "",
         terms: float = 0.0) -> CheckResult:
    """Compare two fields or scalars.

    The scale is the larger side, or ``terms`` (the size of the summands
    that were added up) when both sides are the result of a cancellation.
    """
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    err = float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0
    scale = float(max(np.max(np.abs(lhs), initial=0.0), np.max(np.abs(rhs), initial=0.0), terms))
    rel = err / scale if scale > 0 else (0.0 if err == 0 else math.inf)
    ok = err <= max(config.tol * scale, config.atol)
    return CheckResult(identity, tree, base, err, rel, ok, detail)


def _comb_err(identity: str, tree: str, base: str, lhs: dict, rhs: dict, config: NumericConfig) -> CheckResult:
    keys = sorted(set(lhs) | set(rhs))
    a = [lhs.get(k, 0.0) for k in keys]
    b = [rhs.get(k, 0.0) for k in keys]
    return _err(identity, tree, base, a, b, config)


def _pt(p: tuple[int, ...]) -> str:
    return "(" + ",".join(map(str, p)) + ")"


def _comb_sub(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0.0) - v
    return out


def _magnitude(m, i: int, y, x, t: DecoratedTree, hat: bool = False) -> float:
    """Running error scale of ``(Pi_y dGamma_{yx} t)(y)``: absolute values throughout."""
    ev = m.eval_pi_hat if hat else m.eval_pi
    comb = m.eval_dGamma(y, x, t, bound=True)
    return float(sum(abs(c) * abs(ev(i, y, s)[y]) for s, c in comb.items()))


def _root_xi1(x: LinComb) -> dict:
    """Terms of ``D_Xi t`` whose root carries the ``Xi1``."""
    return {s: c for s, c in x.items() if s.noise == XI1}


class _NumericJob:
    def __init__(self, config: NumericConfig, params: DegreeParams, prep: PrepMap, t0: frozenset,
                 clean: frozenset, quasi: bool, identities: tuple[str, ...]) -> None:
        self.config = config
        self.params = params
        self.prep = prep
        self.t0 = t0
        self.clean = clean
        self.quasi = quasi
        self.identities = identities

    def __call__(self, trees: Sequence[DecoratedTree]) -> list[CheckResult]:
        model = build_model(self.config, self.params, self.prep)
        bases = base_points(self.config, model.kernels.reach)
        n = len(bases)
        pairs = [(bases[(k + 1) % n], bases[k]) for k in range(n)] + [(b, b) for b in bases]
        triples = [(bases[(k + 1) % n], bases[(k + 3) % n], bases[k]) for k in range(n)]
        out: list[CheckResult] = []
        for t in trees:
            for name in self.identities:
                out.extend(getattr(self, "_" + name.replace("-", "_"))(model, t, bases, pairs, triples))
        return out

    # Each method returns the checks that apply to ``t`` (possibly none).

    def _premodel_factorisation(self, m, t, bases, pairs, triples):
        out = []
        for i in (0, 1):
            pre = {}
            for x in bases:
                rhs = np.zeros(m.grid.shape)
                for (l, r), c in coaction(i, t, self.params).items():
                    f = m.eval_f(x, r)
                    if f:
                        if l not in pre:
                            pre[l] = m.eval_pre_model(l)
                        rhs += float(c) * f * pre[l]
                out.append(_err(f"premodel-factorisation[i={i}]", t.text, _pt(x), m.eval_pi(i, x, t), rhs,
                                self.config))
        return out

    def _premodel_inverse(self, m, t, bases, pairs, triples):
        out = []
        for x in bases:
            rhs = np.zeros(m.grid.shape)
            size = np.zeros(m.grid.shape)
            for (l, r), c in coaction(0, t, self.params).items():
                pi = m.eval_pi(0, x, l)
                rhs += float(c) * m.eval_f_antipode(x, r) * pi
                size += abs(float(c)) * m.eval_f_antipode(x, r, True) * np.abs(pi)
            out.append(_err("premodel-inverse", t.text, _pt(x), m.eval_pre_model(t), rhs, self.config,
                            terms=float(size.max())))
        return out

    def _curtailed_model(self, m, t, bases, pairs, triples):
        out = []
        for hat in (False, True):
            ev = m.eval_pi_hat if hat else m.eval_pi
            name = "curtailed-model-hat" if hat else "curtailed-model"
            for x in bases:
                rhs = np.zeros(m.grid.shape)
                for (l, r), c in delta_hat0(t, self.params).items():
                    f = m.eval_f(x, r)
                    if f:
                        rhs += float(c) * f * ev(0, x, l)
                out.append(_err(name, t.text, _pt(x), ev(1, x, t), rhs, self.config))
        return out

    def _malliavin(self, m, t, bases, pairs, triples):
        if t not in self.t0:
            return []
        return [_err("malliavin", t.text, _pt(x), m.malliavin_delta(1, x, t),
                     m.malliavin_delta(1, x, t, mode="algebraic"), self.config) for x in bases]

    def _gamma_is_model(self, m, t, bases, pairs, triples):
        if t not in self.t0 or t.is_unit() or plus_factor(0, MultiIndex.zero(t.d), t, self.params) is None:
            return []
        planted = plant(MultiIndex.zero(t.d), t)
        return [_err("gamma-is-model", t.text, f"{_pt(y)}<-{_pt(x)}", m.tilde_gamma(x, y, t),
                     m.eval_pi(0, y, planted)[x], self.config, terms=m.tilde_gamma(x, y, t, True))
                for y, x in pairs]

    def _diagonal_identity(self, m, t, bases, pairs, triples):
        if t not in self.t0 or t not in self.clean:
            return []
        # Q_0 removes the terms of D_Xi t with Xi1 at the root, so the stated
        # identity misses (Pi-hat_x of those terms)(y). The corrected variants
        # add them back.
        lost_hat = _root_xi1(d_xi(t))
        lost = {}
        for s, c in self.prep.on_tree(t).items():
            for u, v in _root_xi1(d_xi(s)).items():
                lost[u] = lost.get(u, 0) + c * v
        out = []
        for y, x in pairs:
            base = f"{_pt(y)}<-{_pt(x)}"
            dg = m.eval_dGamma(y, x, t)
            for hat, lost_terms in ((False, lost), (True, lost_hat)):
                suffix = "-hat" if hat else ""
                lhs = m.eval_comb(1, y, dg, hat=hat)[y]
                rhs = m.malliavin_delta(1, x, t, hat=hat)[y]
                size = _magnitude(m, 1, y, x, t, hat)
                out.append(_err("diagonal-identity" + suffix, t.text, base, lhs, rhs, self.config, terms=size))
                extra = m.eval_comb(1, x, lost_terms, hat=True)[y]
                out.append(_err("diagonal-identity-corrected" + suffix, t.text, base, lhs + extra, rhs,
                                self.config, terms=size + abs(extra)))
        return out

    def _planted_projection(self, m, t, bases, pairs, triples):
        if t not in self.t0 or t.is_unit() or plus_factor(0, MultiIndex.zero(t.d), t, self.params) is None:
            return []
        planted = plant(MultiIndex.zero(t.d), t)
        out = []
        for y, x in pairs:
            dg = m.eval_dGamma(y, x, planted)
            dpi = m.malliavin_delta(1, x, planted)
            lhs = dpi[y] - m.eval_comb(1, y, dg)[y]
            proj = {s: c for s, c in dg.items() if s.is_planted() and s.children[0][0].is_zero()}
            rhs = dpi[y] - dpi[y] - m.eval_comb(1, y, proj)[y]
            size = abs(dpi[y]) + _magnitude(m, 1, y, x, planted)
            out.append(_err("planted-projection", t.text, f"{_pt(y)}<-{_pt(x)}", lhs, rhs, self.config, terms=size))
        return out

    def _continuity(self, m, t, bases, pairs, triples):
        if t not in self.t0:
            return []
        out = []
        d0 = TensorElem()
        for s, c in d_xi(t).items():
            d0 = d0 + coaction(0, s, self.params).scale(c)
        for y, z, x in triples:
            lhs = _comb_sub(m.eval_dGamma(y, x, t), m.eval_Gamma_comb(1, y, z, m.eval_dGamma(z, x, t)))
            first: dict = {}
            second: dict = {}
            for (l, r), c in d0.items():
                if l.n_xi1:
                    continue
                g = float(c) * m.eval_gamma(y, x, r)
                first[l] = first.get(l, 0.0) + g
                g2 = float(c) * m.eval_gamma(z, x, r)
                for u, v in m.eval_Gamma(0, y, z, l).items():
                    second[u] = second.get(u, 0.0) + g2 * v
            rhs = _comb_sub(first, second)
            out.append(_comb_err("continuity", t.text, f"{_pt(y)},{_pt(z)}<-{_pt(x)}", lhs, rhs, self.config))
        return out

    def _model_axiom(self, m, t, bases, pairs, triples):
        out = []
        for i in (0, 1):
            for y, x in pairs:
                if y == x:
                    continue
                g = m.eval_Gamma(i, y, x, t)
                out.append(_err(f"model-axiom[i={i}]", t.text, f"{_pt(y)}<-{_pt(x)}",
                                m.eval_comb(i, y, g), m.eval_pi(i, x, t), self.config))
                out.append(_err(f"model-axiom-hat[i={i}]", t.text, f"{_pt(y)}<-{_pt(x)}",
                                m.eval_comb(i, y, g, hat=True), m.eval_pi_hat(i, x, t), self.config))
        return out

    def _derivative_count(self, m, t, bases, pairs, triples):
        if not t.is_planted() or t.children[0][0].is_zero():
            return []
        a, c = t.children[0]
        base = plant(MultiIndex.zero(t.d), c)
        mask = m.interior_mask(dict(enumerate(a)))
        out = []
        for i in (0, 1):
            for x in bases:
                lhs = m.eval_pi(i, x, t)[mask]
                rhs = m.kernels.apply(a, m.eval_pi(i, x, base))[mask]
                out.append(_err(f"derivative-count[i={i}]", t.text, _pt(x), lhs, rhs, self.config))
        return out

    def _dgamma_leibniz(self, m, t, bases, pairs, triples):
        if t not in self.t0 or len(t.children) < 2 or t.noise != NONE or not t.poly.is_zero():
            return []
        a, c = t.children[0]
        t1 = plant(a, c)
        t2 = product_of([plant(b, e) for b, e in t.children[1:]], t.d)
        out = []
        for y, x in pairs:
            rhs: dict = {}
            for p, q in ((m.eval_dGamma(y, x, t1), m.eval_dGamma_bar(y, x, t2)),
                         (m.eval_dGamma(y, x, t2), m.eval_dGamma_bar(y, x, t1))):
                for u, cu in p.items():
                    for v, cv in q.items():
                        k = tree_product(u, v)
                        rhs[k] = rhs.get(k, 0.0) + cu * cv
            rhs = {k: v for k, v in rhs.items() if k.n_xi1 == 0}
            out.append(_comb_err("dgamma-leibniz", t.text, f"{_pt(y)}<-{_pt(x)}", m.eval_dGamma(y, x, t), rhs,
                                 self.config))
        return out

    def _quasilinear_diagonal(self, m, t, bases, pairs, triples):
        if not self.quasi or t not in self.t0 or not _quasilinear_root(t):
            return []
        d = t.d
        i2 = MultiIndex.unit(d, 1) + MultiIndex.unit(d, 1)
        plain = [plant(a, c) for a, c in t.children if a != i2]
        second = next(plant(a, c) for a, c in t.children if a == i2)
        out = []
        for y, x in pairs:
            dg = m.eval_dGamma(y, x, t)
            dpi = m.malliavin_delta(1, x, t)[y]
            lhs = dpi - m.eval_comb(1, y, dg)[y]
            dg2 = m.eval_dGamma(y, x, second)
            dpi2 = m.malliavin_delta(1, x, second, hat=True)[y]
            fhat = dpi2 - m.eval_comb(1, y, dg2, hat=True)[y]
            prod = 1.0
            for p in plain:
                prod *= m.eval_pi_hat(1, x, p)[y]
            size = max(abs(dpi) + _magnitude(m, 1, y, x, t),
                       abs(prod) * (abs(dpi2) + _magnitude(m, 1, y, x, second, True)))
            out.append(_err("quasilinear-diagonal", t.text, f"{_pt(y)}<-{_pt(x)}", lhs, prod * fhat, self.config,
                            terms=size))
        return out

    def _second_derivative(self, m, t, bases, pairs, triples):
        if t not in self.t0 or t.is_unit():
            return []
        d = t.d
        e1 = MultiIndex.unit(d, 1)
        first = plant(MultiIndex.zero(d), t)
        second = plant(e1 + e1, t)
        out = []
        for y, x in pairs:
            dg2 = m.eval_dGamma(y, x, second)
            dpi2 = m.malliavin_delta(1, x, second, hat=True)[y]
            lhs = dpi2 - m.eval_comb(1, y, dg2, hat=True)[y]
            dg = m.eval_dGamma(y, x, first)
            dpi = m.malliavin_delta(1, x, first, hat=True)
            rhs = m.kernels.apply(e1 + e1, dpi - m.eval_comb(1, y, dg, hat=True))[y]
            size = abs(dpi2) + _magnitude(m, 1, y, x, second, True)
            out.append(_err("second-derivative", t.text, f"{_pt(y)}<-{_pt(x)}", lhs, rhs, self.config, terms=size))
        return out


def _quasilinear_root(t: DecoratedTree) -> bool:
    from collections import Counter

    if t.noise != NONE or not t.poly.is_zero():
        return False
    d = t.d
    i2 = MultiIndex.unit(d, 1) + MultiIndex.unit(d, 1)
    z = MultiIndex.zero(d)
    idx = Counter(a for a, _ in t.children)
    return idx.get(i2, 0) == 1 and sum(idx.values()) == 1 + idx.get(z, 0)


def _assumption1_clean(t0: list[DecoratedTree], prep: PrepMap, params: DegreeParams) -> frozenset:
    """Trees that, together with every tree in ``R t``, have no offending branch."""
    bad = {v.tree for v in check_assumption1(t0, params)}
    out = set()
    for t in t0:
        if t in bad:
            continue
        image = list(prep.on_tree(t).keys())
        if all(not check_assumption1([s], params) for s in image):
            out.add(t)
    return frozenset(out)


def run_numeric_suite(rules: RuleSet, prep: PrepMap, params: DegreeParams, config: NumericConfig = NumericConfig(),
                      jobs: int = 1, trees: list[DecoratedTree] | None = None,
                      identities: Iterable[str] | None = None) -> SuiteReport:
    """Numeric identities on the grid model, per tree and base point.

    Field identities are compared on the whole grid; identities that only hold
    on the diagonal are compared at ``y``. The diagonal identity is restricted
    to trees without offending ``D_Xi`` branches, the quasilinear one to rule
    sets whose ``R`` passes the shape condition.
    """
    ids = tuple(identities) if identities is not None else NUMERIC_IDENTITIES
    unknown = [i for i in ids if i not in NUMERIC_IDENTITIES]
    if unknown:
        raise ConfigError(f"unknown numeric identities: {', '.join(unknown)}")
    t0 = trees if trees is not None else enumerate_T0(rules, params)
    t1 = lift_T1(t0)
    clean = _assumption1_clean(t0, prep, params)
    quasi = rules.name in ("qua", "qua_c") and all(a.ok for a in verify_assumption2(prep, t0))
    # Planted trees I_a(c) met anywhere in the space, for the derivative-count check.
    planted = set()
    for t in t1:
        for node in t.nodes():
            for a, c in node.children:
                if not a.is_zero():
                    planted.add(plant(a, c))
    work = sorted(set(t1) | planted)
    build_model(config, params, prep)  # validate the configuration before forking
    report = SuiteReport("numeric")
    report.meta.update(rule=rules.name, prep=prep.name, alpha=str(params.alpha), d=params.d,
                       max_noises=rules.max_noises, max_edges=rules.max_edges,
                       grid="x".join(map(str, config.grid)), noise=config.noise, tol=config.tol,
                       stencil_order=config.stencil_order, cutoff=config.cutoff,
                       n_T0=len(t0), n_T1=len(t1), assumption1_clean=len(clean), quasilinear=quasi)
    job = _NumericJob(config, params, prep, frozenset(t0), clean, quasi, ids)
    # Several trees per chunk share subtree fields through the per-process cache.
    report.results.extend(parallel_map(job, work, jobs, chunk=max(1, len(work) // max(1, jobs * 4))))
    return report
