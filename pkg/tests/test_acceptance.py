"""Acceptance criteria, one printed PASS/FAIL line each.

The lines are collected in ``LINES`` and repeated in the terminal summary by
``conftest.pytest_terminal_summary``. Criterion 3 is checked as stated and
fails on trees with Xi0 at the root; ``test_criterion_3_other_checks`` covers
everything else from the same run.
"""

from __future__ import annotations

import time
from fractions import Fraction

import numpy as np
import pytest

from decotrees import parse
from decotrees.hopf import clear_caches
from decotrees.prep import load_prep
from decotrees.report import write_report
from decotrees.rules import check_assumption1, enumerate_T0, lift_T1, make_rules
from decotrees.suites import NumericConfig, base_points, build_model, run_numeric_suite, run_symbolic_suite

LINES: list[str] = []

CONFIG = NumericConfig()  # 48x32, trigonometric noise, 8 base points, tol 1e-8, floor 1e-12
C_VALUES = (0, 1, 1000)


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append(line)
    print(line)


def timed(fn, *args, **kw):
    start = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - start


def scale_of(r) -> float:
    """Scale a numeric check was judged against, recovered from its errors."""
    return r.max_abs / r.max_rel if r.max_rel > 0 and r.max_abs > 0 else 0.0


def families(report) -> set[str]:
    return {r.identity.split("[")[0] for r in report.results}


def test_criterion_1_symbolic_gkpz(params):
    clear_caches()
    rep, secs = timed(run_symbolic_suite, make_rules("gkpz", 3, 8), load_prep("trivial"), params)
    need = {"derivative-commutes", "curtail-factorises", "curtail-fixes-T0", "coaction-triangular",
            "curtail-triangular"}
    missing = need - families(rep)
    ok = rep.ok and not missing and secs < 60
    record(1, ok, f"gkpz(3,8) trivial R: {len(rep.results)} exact checks, {len(rep.failures)} failed, "
                  f"missing={sorted(missing)}, {secs:.1f}s (limit 60s)")
    assert ok


def test_criterion_2_symbolic_qua_c(params):
    clear_caches()
    rep, secs = timed(run_symbolic_suite, make_rules("qua_c", 3, 8), load_prep("qua_c"), params)
    need = {"axiom:triangularity", "axiom:R-Delta0", "axiom:R-Delta1", "axiom:R-DXi", "axiom:R-Q0",
            "axiom:R-DeltaHat0", "quasilinear-shape"}
    missing = need - families(rep)
    ok = rep.ok and not missing and secs < 60
    record(2, ok, f"qua_c(3,8) with R_c: {len(rep.results)} exact checks, {len(rep.failures)} failed, "
                  f"missing={sorted(missing)}, {secs:.1f}s (limit 60s)")
    assert ok


# Identities named by criterion 3, with their report ids.
STATED = ("premodel-factorisation", "curtailed-model", "malliavin", "gamma-is-model", "diagonal-identity",
          "diagonal-identity-hat", "planted-projection", "continuity", "model-axiom")


@pytest.fixture(scope="module")
def gkpz_numeric(params):
    clear_caches()
    return timed(run_numeric_suite, make_rules("gkpz", 3, 5), load_prep("trivial"), params, CONFIG)


def test_criterion_3_numeric_gkpz(gkpz_numeric):
    rep, secs = gkpz_numeric
    by = rep.by_identity()
    missing = [name for name in STATED if name not in by]
    failed = {name: sorted({r.tree for r in by.get(name, []) if not r.ok}) for name in STATED}
    failed = {k: v for k, v in failed.items() if v}
    corrected = by.get("diagonal-identity-corrected", []) + by.get("diagonal-identity-corrected-hat", [])
    worst = max((r.max_rel for name in STATED for r in by.get(name, []) if r.ok), default=0.0)
    ok = not failed and not missing and secs < 300
    detail = (f"gkpz(3,5) 48x32 trig: {len(rep.results)} checks, {secs:.0f}s (limit 300s), "
              f"worst passing rel={worst:.1e}")
    for name, bad in failed.items():
        detail += f"; {name} fails on {len(bad)} trees, e.g. {', '.join(bad[:3])}"
    if corrected:
        n_bad = sum(not r.ok for r in corrected)
        detail += f"; with the Xi1-at-root terms restored: {len(corrected) - n_bad}/{len(corrected)} pass"
    record(3, ok, detail)
    assert ok


def test_criterion_3_other_checks(gkpz_numeric):
    """Every check except the uncorrected diagonal identity passes."""
    rep, _ = gkpz_numeric
    bad = [r for r in rep.failures if r.identity not in ("diagonal-identity", "diagonal-identity-hat")]
    assert not bad, bad[:5]
    # the stated identity only fails where Xi0 sits at the root
    for r in rep.failures:
        assert parse(r.tree).noise != 0, r.tree


def test_criterion_4_c_free_diagonal(params):
    ids = ["quasilinear-diagonal", "second-derivative"]
    rules = make_rules("qua_c", 3, 5)
    runs = {}
    secs = 0.0
    for c in C_VALUES:
        clear_caches()
        runs[c], s = timed(run_numeric_suite, rules, load_prep("qua_c", c), params, CONFIG, identities=ids)
        secs += s
    all_ok = all(rep.ok for rep in runs.values())
    count = {c: len(rep.results) for c, rep in runs.items()}
    keyed = {c: {(r.identity, r.tree, r.base): r for r in rep.results} for c, rep in runs.items()}
    same_keys = all(keyed[c].keys() == keyed[0].keys() for c in C_VALUES)
    # residuals must agree across c within the check tolerance at the larger scale
    drift = 0.0
    for c in C_VALUES:
        for k, r0 in keyed[0].items():
            rc = keyed[c][k]
            scale = max(scale_of(r0), scale_of(rc))
            drift = max(drift, abs(rc.max_abs - r0.max_abs) / max(CONFIG.tol * scale, CONFIG.atol))
    invariant = same_keys and drift <= 1.0
    # the model itself does depend on c, so the invariance is a cancellation
    t0 = [t for t in enumerate_T0(rules, params) if not t.is_unit()]
    m0 = build_model(CONFIG, params, load_prep("qua_c", 0))
    x = base_points(CONFIG, m0.kernels.reach)[0]
    pi0 = {t: m0.eval_pi(1, x, t) for t in t0}
    m1 = build_model(CONFIG, params, load_prep("qua_c", 1000))
    shift = max(float(np.abs(m1.eval_pi(1, x, t) - pi0[t]).max()) for t in t0)
    ok = all_ok and invariant and shift > 1.0
    record(4, ok, f"qua_c(3,5) R_c, c in {list(C_VALUES)}: checks per c {count[0]}, "
                  f"failures {[len(runs[c].failures) for c in C_VALUES]}, residual drift across c "
                  f"{drift:.1e} of tolerance (limit 1), max model shift c=0->1000 {shift:.1e}, {secs:.0f}s")
    assert ok


def test_criterion_5_assumption1(params):
    gk = check_assumption1(enumerate_T0(make_rules("gkpz", 3, 8), params), params)
    phi = check_assumption1(enumerate_T0(make_rules("phi43", 3, 8), params), params)
    qc = check_assumption1(enumerate_T0(make_rules("qua_c", 3, 8), params), params)
    kappa = -(params.alpha + Fraction(3, 2))
    degrees = sorted({v.degree for v in qc})
    ok = not gk and not phi and bool(qc) and -kappa in degrees
    record(5, ok, f"violations gkpz={len(gk)} phi43={len(phi)} qua_c={len(qc)} "
                  f"(degrees {[str(d) for d in degrees]}), e.g. {qc[0].tree.text if qc else '-'}")
    assert ok


def _report_bytes(report, tmp, stem) -> list[bytes]:
    out = []
    for path in write_report(report, str(tmp / f"{stem}.tsv")):
        with open(path, "rb") as fh:
            out.append(fh.read())
    return out


def test_criterion_6_round_trip_and_determinism(params, tmp_path):
    total = bad = 0
    for name in ("gkpz", "qua_c", "phi43", "qua"):
        t0 = enumerate_T0(make_rules(name, 3, 8), params)
        for t in list(t0) + list(lift_T1(t0)):
            total += 1
            bad += parse(t.text) != t or parse(t.text).text != t.text
    runs = []
    for k in range(2):
        clear_caches()
        sym = run_symbolic_suite(make_rules("qua_c", 2, 6), load_prep("qua_c"), params)
        num = run_numeric_suite(make_rules("gkpz", 2, 4), load_prep("trivial"), params, CONFIG, jobs=1 + k)
        runs.append(_report_bytes(sym, tmp_path, f"sym{k}") + _report_bytes(num, tmp_path, f"num{k}"))
    identical = runs[0] == runs[1]
    ok = bad == 0 and total > 0 and identical
    record(6, ok, f"parse(serialize) on {total - bad}/{total} enumerated trees; two runs (serial, then 2 jobs) "
                  f"byte-identical TSV/summary/PNG: {identical}")
    assert ok
