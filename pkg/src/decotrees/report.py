"""Deterministic text reports and the accompanying figures."""

from __future__ import annotations

import math
import os
from typing import Iterable, TextIO

from .suites import CheckResult, SuiteReport

__all__ = ["fmt", "write_tsv", "summary_lines", "write_report", "plot_report", "write_slopes"]


def fmt(v: float) -> str:
    if v != v:
        return "nan"
    if math.isinf(v):
        return "inf"
    return f"{v:.3e}"


def _clean(s: str) -> str:
    return s.replace("\t", " ").replace("\n", " ")


def write_tsv(report: SuiteReport, fh: TextIO, failures_only: bool = False) -> None:
    """One row per check, preceded by ``# key=value`` metadata lines in sorted order."""
    fh.write(f"# kind={report.kind}\n")
    for k in sorted(report.meta):
        fh.write(f"# {k}={report.meta[k]}\n")
    fh.write("identity\ttree\tbase\tmax_abs\tmax_rel\tstatus\tdetail\n")
    for r in report.results:
        if failures_only and r.ok:
            continue
        fh.write("\t".join([r.identity, r.tree, r.base, fmt(r.max_abs), fmt(r.max_rel),
                            "pass" if r.ok else "FAIL", _clean(r.detail)]) + "\n")


def _group(results: Iterable[CheckResult]) -> dict[str, list[CheckResult]]:
    out: dict[str, list[CheckResult]] = {}
    for r in results:
        out.setdefault(r.identity, []).append(r)
    return dict(sorted(out.items()))


def summary_lines(report: SuiteReport) -> list[str]:
    """Per-identity count, failures and worst errors, then an overall verdict."""
    lines = [f"{report.kind} suite: " + " ".join(f"{k}={report.meta[k]}" for k in sorted(report.meta))]
    width = max((len(k) for k in _group(report.results)), default=8)
    for name, rs in _group(report.results).items():
        fails = sum(not r.ok for r in rs)
        lines.append(f"  {name:<{width}}  checks={len(rs):<6d} fails={fails:<5d} "
                     f"max_abs={fmt(max(r.max_abs for r in rs))} max_rel={fmt(max(r.max_rel for r in rs))} "
                     + ("pass" if not fails else "FAIL"))
    n_fail = len(report.failures)
    lines.append(f"overall: {'PASS' if not n_fail else 'FAIL'} ({len(report.results)} checks, {n_fail} failed)")
    return lines


def plot_report(report: SuiteReport, path: str, tol: float | None = None) -> None:
    """Bar chart per identity: worst relative error (numeric) or failure count (symbolic)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    groups = _group(report.results)
    names = list(groups)
    fig, ax = plt.subplots(figsize=(8, 0.3 * len(names) + 1.5))
    ys = range(len(names))
    if report.kind == "numeric":
        floor = 1e-18
        vals = [max(max((r.max_rel for r in rs if math.isfinite(r.max_rel)), default=1.0), floor)
                for rs in groups.values()]
        colors = ["tab:red" if any(not r.ok for r in rs) else "tab:blue" for rs in groups.values()]
        ax.barh(list(ys), vals, color=colors)
        ax.set_xscale("log")
        ax.set_xlabel("max relative error")
        if tol:
            ax.axvline(tol, color="k", lw=0.8, ls="--")
    else:
        passed = [sum(r.ok for r in rs) for rs in groups.values()]
        failed = [sum(not r.ok for r in rs) for rs in groups.values()]
        ax.barh(list(ys), passed, color="tab:blue", label="pass")
        ax.barh(list(ys), failed, left=passed, color="tab:red", label="fail")
        ax.set_xlabel("checks")
        ax.legend(loc="lower right")
    ax.set_yticks(list(ys))
    ax.set_yticklabels(names, fontsize=7)
    ax.invert_yaxis()
    ax.set_title(f"{report.kind}: {report.meta.get('rule', '')} / {report.meta.get('prep', '')}")
    fig.tight_layout()
    # No software tag or timestamp, so reruns give identical bytes.
    fig.savefig(path, dpi=80, metadata={"Software": None})
    plt.close(fig)


def write_report(report: SuiteReport, path: str, plot: bool = True) -> list[str]:
    """Write ``path`` (TSV), ``path``-stem ``.summary.txt`` and ``.png``; return the files written."""
    stem, _ = os.path.splitext(path)
    with open(path, "w") as fh:
        write_tsv(report, fh)
    with open(stem + ".summary.txt", "w") as fh:
        fh.write("\n".join(summary_lines(report)) + "\n")
    out = [path, stem + ".summary.txt"]
    if plot:
        plot_report(report, stem + ".png", report.meta.get("tol"))
        out.append(stem + ".png")
    return out


def write_slopes(rows: list[tuple[str, float, float]], fh: TextIO) -> None:
    fh.write("tree\tdegree\tfitted_slope\n")
    for tree, deg, slope in rows:
        fh.write(f"{tree}\t{deg:.4f}\t{fmt(slope)}\n")
