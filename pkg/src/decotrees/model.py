"""Grid realisation of the recentred model, the pre-model and the characters.

Space-time is the periodic box ``[0,1)^(1+d)`` sampled on a regular grid.
Convolutions are periodic (FFT); derivative kernels come from applying one
central finite-difference stencil to the base kernel, so ``D^a (K * f) =
(D^a K) * f`` holds exactly.

Polynomials ``(w - x)^k`` use plain coordinate differences, not the minimal
periodic image: the binomial identities behind recentring need
``(w - x) = (w - z) + (z - x)`` on the nose. The price is a seam at the edge
of the box, which matters only where a stencil is applied to a field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .algebra import PlusMonomial, tilde_basis
from .errors import ConfigError
from .hopf import antipode, coaction, coproduct_plus, d_xi, delta_hat0
from .prep import PrepMap
from .trees import (
    NONE,
    XI1,
    DecoratedTree,
    DegreeParams,
    MultiIndex,
    degree,
    multi_indices_below,
)

__all__ = [
    "Grid",
    "KernelFamily",
    "NoisePair",
    "GridModel",
    "central_stencil",
    "lagrange_derivative_weights",
    "dump_field",
    "slope_table",
]

Point = tuple[int, ...]
NumComb = dict  # DecoratedTree -> float


def central_stencil(order: int) -> dict[int, float]:
    """Central first-derivative weights (unit spacing), exact on polynomials of degree <= ``order``."""
    if order < 2 or order % 2:
        raise ConfigError("stencil order must be an even number >= 2")
    m = order // 2
    offsets = list(range(-m, m + 1))
    # Solve sum_j w_j j^p = [p == 1] for p = 0..2m in exact arithmetic.
    n = len(offsets)
    rows = [[Fraction(j) ** p for j in offsets] + [Fraction(1 if p == 1 else 0)] for p in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if rows[r][col] != 0)
        rows[col], rows[piv] = rows[piv], rows[col]
        inv = 1 / rows[col][col]
        rows[col] = [v * inv for v in rows[col]]
        for r in range(n):
            if r != col and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[col])]
    return {j: float(rows[k][-1]) for k, j in enumerate(offsets) if rows[k][-1] != 0}


def lagrange_derivative_weights(nodes: Iterable[Fraction]) -> list[Fraction]:
    """Weights ``w_j`` with ``p'(0) = sum_j w_j p(s_j)`` for every polynomial of degree < len(nodes)."""
    s = [Fraction(v) for v in nodes]
    out = []
    for j, sj in enumerate(s):
        total = Fraction(0)
        for m, sm in enumerate(s):
            if m == j:
                continue
            term = 1 / (sj - sm)
            for l, sl in enumerate(s):
                if l not in (j, m):
                    term *= (0 - sl) / (sj - sl)
            total += term
        out.append(total)
    return out


class Grid:
    """Periodic grid over ``[0,1)^(1+d)``; axis 0 is time."""

    def __init__(self, shape: Iterable[int]) -> None:
        self.shape = tuple(int(n) for n in shape)
        if len(self.shape) < 2 or min(self.shape) < 4:
            raise ConfigError(f"grid {self.shape} must have at least two axes of size >= 4")
        self.d = len(self.shape) - 1
        self.spacing = tuple(1.0 / n for n in self.shape)
        self.weight = math.prod(self.spacing)
        self.coords = [
            (np.arange(n) * h).reshape([-1 if k == j else 1 for k in range(len(self.shape))])
            for j, (n, h) in enumerate(zip(self.shape, self.spacing))
        ]

    def point(self, idx: Point) -> tuple[float, ...]:
        return tuple(i * h for i, h in zip(idx, self.spacing))

    def displacement(self) -> list[np.ndarray]:
        """Minimal periodic image of the offset from the origin, used for sampling kernels."""
        out = []
        for j, (n, h) in enumerate(zip(self.shape, self.spacing)):
            r = np.arange(n)
            r = np.where(r <= n // 2, r, r - n) * h
            out.append(r.reshape([-1 if k == j else 1 for k in range(len(self.shape))]))
        return out

    def header(self) -> str:
        return ("shape=" + "x".join(map(str, self.shape))
                + " spacing=" + ",".join(f"{h:.17g}" for h in self.spacing))


class KernelFamily:
    """Base kernel ``K_0`` and the stencil-generated derivatives ``K_a``."""

    def __init__(self, grid: Grid, base: np.ndarray, stencil_order: int = 8) -> None:
        if base.shape != grid.shape:
            raise ConfigError(f"kernel shape {base.shape} does not match grid {grid.shape}")
        self.grid = grid
        self.base = base
        self.stencil_order = stencil_order
        self.stencil = central_stencil(stencil_order)
        self.reach = max(self.stencil)
        self._arrays: dict[MultiIndex, np.ndarray] = {}
        self._hats: dict[MultiIndex, np.ndarray] = {}

    @classmethod
    def heat(cls, grid: Grid, cutoff: float = 0.4, stencil_order: int = 8) -> "KernelFamily":
        """Heat kernel times a smooth bump of radius ``cutoff`` in every direction."""
        if not 0 < cutoff < 0.5:
            raise ConfigError("cutoff radius must lie in (0, 1/2) so the support fits the box")
        disp = grid.displacement()
        t = disp[0]
        tt = np.where(t > 0, t, 1.0)
        space2 = sum(x ** 2 for x in disp[1:])
        heat = np.where(t > 0, (4 * math.pi * tt) ** (-grid.d / 2) * np.exp(-space2 / (4 * tt)), 0.0)
        cut = np.ones(grid.shape)
        for x in disp:
            r = np.abs(x) / cutoff
            inside = r < 1
            cut = cut * np.where(inside, np.exp(1 - 1 / np.where(inside, 1 - r ** 2, 1.0)), 0.0)
        return cls(grid, heat * cut, stencil_order)

    def derivative(self, f: np.ndarray, axis: int, times: int = 1) -> np.ndarray:
        h = self.grid.spacing[axis]
        for _ in range(times):
            g = np.zeros_like(f)
            for off, w in self.stencil.items():
                g += w * np.roll(f, -off, axis=axis)
            f = g / h
        return f

    def apply(self, a: Iterable[int], f: np.ndarray) -> np.ndarray:
        """Discrete ``D^a`` on a field, with the kernel family's stencil."""
        for axis, n in enumerate(a):
            if n:
                f = self.derivative(f, axis, n)
        return f

    def array(self, a: MultiIndex) -> np.ndarray:
        hit = self._arrays.get(a)
        if hit is None:
            hit = self._arrays.setdefault(a, self.apply(a, self.base))
        return hit

    def hat(self, a: MultiIndex) -> np.ndarray:
        hit = self._hats.get(a)
        if hit is None:
            hit = self._hats.setdefault(a, np.fft.rfftn(self.array(a)) * self.grid.weight)
        return hit


@dataclass(frozen=True)
class NoisePair:
    xi: np.ndarray
    dxi: np.ndarray
    label: str = "trig"

    @classmethod
    def trigonometric(cls, grid: Grid) -> "NoisePair":
        """Fixed trigonometric polynomials; the same for every run."""
        t = grid.coords[0]
        xs = grid.coords[1:]
        sx = sum(xs)
        two_pi = 2 * math.pi
        xi = (0.3 + np.cos(two_pi * sx) + 0.5 * np.sin(two_pi * (t + 2 * sx))
              + 0.25 * np.cos(two_pi * (2 * t - 3 * sx)))
        dxi = 0.2 + np.sin(two_pi * sx) + 0.4 * np.cos(two_pi * (t - sx))
        return cls(np.broadcast_to(xi, grid.shape).copy(), np.broadcast_to(dxi, grid.shape).copy(), "trig")

    @classmethod
    def mollified(cls, grid: Grid, seed: int, width: float = 0.08) -> "NoisePair":
        """Grid white noise smoothed by a Gaussian of the given width, from a seeded generator."""
        rng = np.random.default_rng(seed)
        disp = grid.displacement()
        bump = np.exp(-sum(x ** 2 for x in disp) / (2 * width ** 2))
        bump /= bump.sum() * grid.weight
        bhat = np.fft.rfftn(bump) * grid.weight

        def smooth(w: np.ndarray) -> np.ndarray:
            return np.fft.irfftn(np.fft.rfftn(w) * bhat, s=grid.shape, axes=tuple(range(len(grid.shape))))

        scale = 1 / math.sqrt(grid.weight)
        xi = smooth(rng.standard_normal(grid.shape) * scale)
        dxi = smooth(rng.standard_normal(grid.shape) * scale)
        return cls(xi, dxi, f"mollified:{seed}")

    def shifted(self, s: float) -> "NoisePair":
        return NoisePair(self.xi + s * self.dxi, self.dxi, f"{self.label}+{s:g}dxi")


def _add(out: NumComb, key, c: float) -> None:
    v = out.get(key, 0.0) + c
    if v == 0.0:
        out.pop(key, None)
    else:
        out[key] = v


class GridModel:
    """Models ``Pi^{R,i}_x``, their hatted versions, the pre-model and the characters.

    Every cache maps a key to a value that is a pure function of the key, so
    tables can be shared between threads and filled twice without harm.
    """

    def __init__(self, grid: Grid, kernels: KernelFamily, noise: NoisePair, params: DegreeParams,
                 prep: PrepMap | None = None) -> None:
        if kernels.grid is not grid and kernels.grid.shape != grid.shape:
            raise ConfigError("kernel family and grid disagree")
        if noise.xi.shape != grid.shape or noise.dxi.shape != grid.shape:
            raise ConfigError("noise fields do not match the grid")
        if params.d != grid.d:
            raise ConfigError(f"degree parameters have d={params.d} but the grid has d={grid.d}")
        self.grid = grid
        self.kernels = kernels
        self.noise = noise
        self.params = params
        self.prep = prep if prep is not None else PrepMap((), "trivial")
        self._hat: dict = {}
        self._pi: dict = {}
        self._spec: dict = {}
        self._conv: dict = {}
        self._poly: dict = {}
        self._f: dict = {}
        self._fa: dict = {}
        self._gamma: dict = {}
        self._shifted: dict = {}

    # -- plumbing -----------------------------------------------------------

    def shifted(self, s) -> "GridModel":
        """Same model driven by ``xi + s * dxi``."""
        s = Fraction(s)
        if s == 0:
            return self
        hit = self._shifted.get(s)
        if hit is None:
            hit = self._shifted.setdefault(
                s, GridModel(self.grid, self.kernels, self.noise.shifted(float(s)), self.params, self.prep))
        return hit

    def coords(self, x: Point) -> tuple[float, ...]:
        return self.grid.point(x)

    def poly_field(self, x: Point | None, k: MultiIndex) -> np.ndarray:
        """``(w - x)^k`` over the grid, or ``w^k`` when ``x`` is None."""
        key = (x, k)
        hit = self._poly.get(key)
        if hit is not None:
            return hit
        out = np.ones(self.grid.shape)
        origin = self.coords(x) if x is not None else (0.0,) * len(k)
        for j, n in enumerate(k):
            if n:
                out = out * (self.grid.coords[j] - origin[j]) ** n
        return self._poly.setdefault(key, out)

    def _seed(self, flag: int) -> np.ndarray:
        return self.noise.dxi if flag == XI1 else self.noise.xi

    def _spectrum(self, key, field: np.ndarray) -> np.ndarray:
        hit = self._spec.get(key)
        if hit is None:
            hit = self._spec.setdefault(key, np.fft.rfftn(field))
        return hit

    def _convolve(self, key, a: MultiIndex, field_fn) -> np.ndarray:
        """``(D^a K) * F`` where ``F = field_fn()`` is identified by ``key``."""
        ck = (key, a)
        hit = self._conv.get(ck)
        if hit is None:
            spec = self._spectrum(key, field_fn()) if key not in self._spec else self._spec[key]
            shape = self.grid.shape
            field = np.fft.irfftn(self.kernels.hat(a) * spec, s=shape, axes=tuple(range(len(shape))))
            hit = self._conv.setdefault(ck, field)
        return hit

    # -- recentred model ----------------------------------------------------

    def eval_pi_hat(self, i: int, x: Point, t: DecoratedTree) -> np.ndarray:
        key = (i, x, t)
        hit = self._hat.get(key)
        if hit is not None:
            return hit
        out = self.poly_field(x, t.poly).copy()
        if t.noise != NONE:
            out *= self._seed(t.noise)
        for a, c in t.children:
            out *= self._planted(i, x, a, c)
        return self._hat.setdefault(key, out)

    def _planted(self, i: int, x: Point, a: MultiIndex, c: DecoratedTree) -> np.ndarray:
        key = ("planted", i, x, a, c)
        hit = self._hat.get(key)
        if hit is not None:
            return hit
        src = ("pi", i, x, c)

        def field():
            return self.eval_pi(i, x, c)

        out = self._convolve(src, a, field).copy()
        top = degree(c, i, self.params) + 2 - self.params.size(a)
        for k in multi_indices_below(top, self.params):
            val = self._convolve(src, a + k, field)[x]
            out -= self.poly_field(x, k) * (val / k.factorial())
        return self._hat.setdefault(key, out)

    def eval_pi(self, i: int, x: Point, t: DecoratedTree) -> np.ndarray:
        """``Pi^{R,i}_x t = hat-Pi^{R,i}_x (R t)``."""
        key = (i, x, t)
        hit = self._pi.get(key)
        if hit is not None:
            return hit
        out = np.zeros(self.grid.shape)
        for s, c in self.prep.on_tree(t).items():
            out += float(c) * self.eval_pi_hat(i, x, s)
        return self._pi.setdefault(key, out)

    def eval_comb(self, i: int, x: Point, comb: Mapping, hat: bool = False) -> np.ndarray:
        """Linear extension of the model to a real combination of trees."""
        ev = self.eval_pi_hat if hat else self.eval_pi
        out = np.zeros(self.grid.shape)
        for s, c in comb.items():
            out += float(c) * ev(i, x, s)
        return out

    # -- pre-model ----------------------------------------------------------

    def eval_pre_hat(self, t: DecoratedTree) -> np.ndarray:
        key = ("pre", t)
        hit = self._hat.get(key)
        if hit is not None:
            return hit
        out = self.poly_field(None, t.poly).copy()
        if t.noise != NONE:
            out *= self._seed(t.noise)
        for a, c in t.children:
            out *= self._convolve(("pre", c), a, lambda c=c: self.eval_pre_model(c))
        return self._hat.setdefault(key, out)

    def eval_pre_model(self, t: DecoratedTree) -> np.ndarray:
        key = ("pre", t)
        hit = self._pi.get(key)
        if hit is not None:
            return hit
        out = np.zeros(self.grid.shape)
        for s, c in self.prep.on_tree(t).items():
            out += float(c) * self.eval_pre_hat(s)
        return self._pi.setdefault(key, out)

    # -- characters ---------------------------------------------------------

    def eval_f(self, x: Point, m: PlusMonomial) -> float:
        """``f^{R,i}_x`` with ``i`` the kind of ``m``'s factors."""
        key = (x, m)
        hit = self._f.get(key)
        if hit is not None:
            return hit
        xs = self.coords(x)
        out = 1.0
        for j, n in enumerate(m.poly):
            if n:
                out *= (-xs[j]) ** n
        for kind, a, body in m.factors:
            src = ("pi", kind, x, body)
            val = self._convolve(src, a, lambda: self.eval_pi(kind, x, body))[x]
            out *= -val
        return self._f.setdefault(key, out)

    def eval_f_antipode(self, x: Point, m: PlusMonomial, bound: bool = False) -> float:
        """``f_x A m``; with ``bound`` the same sum taken over absolute values."""
        key = (x, m, bound)
        hit = self._fa.get(key)
        if hit is not None:
            return hit
        out = 0.0
        for m2, c in antipode(m, self.params, m.kind or 0).items():
            v = float(c) * self.eval_f(x, m2)
            out += abs(v) if bound else v
        return self._fa.setdefault(key, out)

    def eval_gamma(self, y: Point, x: Point, m: PlusMonomial, bound: bool = False) -> float:
        """``gamma_{yx}(m) = (f_y A (x) f_x) Delta^+ m``.

        ``bound`` gives the running error scale: every product and sum done
        with absolute values, so it bounds the size of what cancelled.
        """
        key = (y, x, m, bound)
        hit = self._gamma.get(key)
        if hit is not None:
            return hit
        out = 0.0
        for (l, r), c in coproduct_plus(m.kind or 0, m, self.params).items():
            v = float(c) * self.eval_f_antipode(y, l, bound) * self.eval_f(x, r)
            out += abs(v) if bound else v
        return self._gamma.setdefault(key, out)

    def eval_gamma_comb(self, y: Point, x: Point, comb, bound: bool = False) -> float:
        if bound:
            return sum(abs(float(c)) * self.eval_gamma(y, x, m, True) for m, c in comb.items())
        return sum(float(c) * self.eval_gamma(y, x, m) for m, c in comb.items())

    # -- re-expansion maps --------------------------------------------------

    def eval_Gamma(self, i: int, y: Point, x: Point, t: DecoratedTree, bound: bool = False) -> NumComb:
        """``Gamma^{R,i}_{yx} t = (Id (x) gamma_{yx}) Delta_i t``, so that ``Pi_y Gamma_{yx} = Pi_x``."""
        out: NumComb = {}
        for (l, r), c in coaction(i, t, self.params).items():
            g = self.eval_gamma(y, x, r, bound)
            if g:
                _add(out, l, (abs(float(c)) if bound else float(c)) * g)
        return out

    def eval_Gamma_comb(self, i: int, y: Point, x: Point, comb: Mapping) -> NumComb:
        out: NumComb = {}
        for t, c in comb.items():
            for s, v in self.eval_Gamma(i, y, x, t).items():
                _add(out, s, float(c) * v)
        return out

    def eval_dGamma_bar(self, y: Point, x: Point, t: DecoratedTree, bound: bool = False) -> NumComb:
        """``(Gamma^{R,0}_{yx} (x) f^{R,0}_x) Delta-hat_0 t``."""
        out: NumComb = {}
        for (l, r), c in delta_hat0(t, self.params).items():
            fr = self.eval_f(x, r)
            if not fr:
                continue
            w = abs(float(c) * fr) if bound else float(c) * fr
            for s, v in self.eval_Gamma(0, y, x, l, bound).items():
                _add(out, s, w * v)
        return out

    def eval_dGamma(self, y: Point, x: Point, t: DecoratedTree, bound: bool = False) -> NumComb:
        """``Q_0 (Gamma^{R,0}_{yx} (x) f^{R,0}_x) Delta-hat_0 D_Xi t``."""
        out: NumComb = {}
        for s, c in d_xi(t).items():
            for u, v in self.eval_dGamma_bar(y, x, s, bound).items():
                if u.n_xi1 == 0:
                    _add(out, u, (abs(float(c)) if bound else float(c)) * v)
        return out

    # -- Malliavin derivative -----------------------------------------------

    def malliavin_delta(self, i: int, x: Point, t: DecoratedTree, hat: bool = False,
                        mode: str = "analytic", step=1) -> np.ndarray:
        """``delta Pi^{R,i}_x t`` in the direction ``dxi``.

        ``analytic`` differentiates the model in the noise: ``Pi`` is a
        polynomial of degree ``n`` in ``xi`` (``n`` = number of ``Xi0``), so
        Lagrange interpolation on ``n + 1`` nodes ``j * step`` recovers the
        derivative at 0 exactly. ``algebraic`` evaluates ``Pi D_Xi t``.
        """
        if mode == "algebraic":
            return self.eval_comb(i, x, dict(d_xi(t).items()), hat)
        if mode != "analytic":
            raise ConfigError(f"unknown Malliavin mode {mode!r}")
        n = t.n_xi0
        out = np.zeros(self.grid.shape)
        if n == 0:
            return out
        nodes = [Fraction(step) * j for j in range(n + 1)]
        for s, w in zip(nodes, lagrange_derivative_weights(nodes)):
            m = self.shifted(s)
            field = m.eval_pi_hat(i, x, t) if hat else m.eval_pi(i, x, t)
            out += float(w) * field
        return out

    # -- helpers used by the suites -----------------------------------------

    def tilde_gamma(self, y: Point, x: Point, t: DecoratedTree, bound: bool = False) -> float:
        """``gamma_{yx}`` on ``sum_l X^l/l! I^+_l(t)``."""
        return self.eval_gamma_comb(y, x, tilde_basis(MultiIndex.zero(t.d), t, self.params, 0), bound)

    def interior_mask(self, axes_orders: Mapping[int, int]) -> np.ndarray:
        """Points where ``D^a`` (given as axis -> order) does not read across the box seam."""
        mask = np.ones(self.grid.shape, dtype=bool)
        for axis, n in axes_orders.items():
            if not n:
                continue
            r = self.kernels.reach * n
            idx = np.arange(self.grid.shape[axis])
            ok = (idx >= r) & (idx < self.grid.shape[axis] - r)
            mask &= ok.reshape([-1 if k == axis else 1 for k in range(len(self.grid.shape))])
        return mask

    def clear(self) -> None:
        for table in (self._hat, self._pi, self._spec, self._conv, self._f, self._fa, self._gamma):
            table.clear()
        for m in self._shifted.values():
            m.clear()


def dump_field(path: str, grid: Grid, field: np.ndarray) -> None:
    """Flat row-major dump with a one-line header."""
    with open(path, "w") as fh:
        fh.write("# " + grid.header() + "\n")
        for v in np.asarray(field, dtype=float).ravel(order="C"):
            fh.write(f"{v:.17g}\n")


def slope_table(model: GridModel, trees: Iterable[DecoratedTree], x: Point, i: int = 0,
                shells: int = 6) -> list[tuple[str, float, float]]:
    """Log-log slope of ``max |Pi_x t(y)|`` against the parabolic distance ``|y - x|_s``.

    Diagnostic only: the fitted slope is compared with ``deg_i t`` by eye.
    """
    g = model.grid
    xs = g.point(x)
    s = model.params.scaling
    dist2 = sum(((g.coords[j] - xs[j]) ** 2) ** (1.0 / s[j]) for j in range(len(s)))
    dist = np.broadcast_to(np.sqrt(dist2), g.shape)
    edges = np.geomspace(max(g.spacing) * 1.5, 0.4, shells + 1)
    out = []
    for t in trees:
        field = np.abs(model.eval_pi(i, x, t))
        pts = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            sel = (dist >= lo) & (dist < hi)
            if sel.any():
                m = field[sel].max()
                if m > 0:
                    pts.append((math.log(math.sqrt(lo * hi)), math.log(m)))
        if len(pts) >= 2:
            xs_, ys_ = zip(*pts)
            slope = float(np.polyfit(xs_, ys_, 1)[0])
        else:
            slope = float("nan")
        out.append((t.text, float(degree(t, i, model.params)), slope))
    return out
