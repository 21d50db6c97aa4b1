"""Command-line front end.

Exit codes: 0 when everything passes, 1 when an identity fails, 2 for
configuration or parse errors.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from typing import Sequence

from .errors import DecoTreeError
from .hopf import coaction, d_xi, delta_hat0
from .prep import apply_R, load_prep
from .rules import check_assumption1, check_closure, enumerate_T0, lift_T1, make_rules
from .suites import NUMERIC_IDENTITIES, NumericConfig, build_model, run_numeric_suite, run_symbolic_suite
from .trees import DegreeParams, parse

__all__ = ["main", "build_parser", "read_config"]

# Config-file keys and the command-line destinations they feed.
CONFIG_KEYS = {
    "rule": "rule", "prep": "prep", "prep_coef": "prep_coef", "alpha": "alpha", "d": "dim",
    "scaling": "scaling", "max_noises": "max_noises", "max_edges": "max_edges", "grid": "grid",
    "cutoff": "cutoff", "stencil_order": "stencil_order", "noise": "noise", "seed": "seed",
    "tol": "tol", "base_points": "base_points", "jobs": "jobs",
}


class _UsageError(DecoTreeError):
    pass


def read_config(path: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise _UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in CONFIG_KEYS:
            raise _UsageError(f"{path}:{n}: expected one of {', '.join(sorted(CONFIG_KEYS))} = value")
        out[CONFIG_KEYS[key]] = value.strip()
    return out


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise _UsageError(f"not a rational number: {text!r}") from exc


def _ints(text: str, sep: str, what: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.lower().replace(sep, " ").split())
    except ValueError as exc:
        raise _UsageError(f"bad {what}: {text!r}") from exc


def _common(p: argparse.ArgumentParser, enum: bool = True) -> None:
    p.add_argument("--config", help="key = value file; command-line flags override it")
    p.add_argument("--alpha", help="noise regularity as P/Q, e.g. --alpha=-3/2 (default -151/100)")
    p.add_argument("--dim", "-d", dest="dim", help="space dimension (default 1)")
    p.add_argument("--scaling", help="comma-separated scaling, time first (default 2,1,...)")
    if enum:
        p.add_argument("--rule", help="qua, qua_c, gkpz or phi43 (default gkpz)")
        p.add_argument("--max-noises", dest="max_noises")
        p.add_argument("--max-edges", dest="max_edges")


def _suite(p: argparse.ArgumentParser) -> None:
    p.add_argument("--prep", help="preset name or file; NAME:C overrides the coefficient")
    p.add_argument("--prep-coef", dest="prep_coef", help="override every coefficient of R")
    p.add_argument("--report", help="write TSV, summary and PNG figure to this path")
    p.add_argument("--jobs", help="worker processes (default 1)")
    p.add_argument("--quiet", action="store_true", help="only print the summary")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="decotrees", description="Decorated-tree algebra and identity checks.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("enumerate", help="list the trees generated by a rule set")
    _common(e)
    e.add_argument("--lift", action="store_true", help="list the single-Xi1 lift instead")
    e.add_argument("--assumption1", action="store_true", help="report offending D_Xi branches instead")
    e.add_argument("--closure", action="store_true", help="check closure under R (needs --prep)")
    e.add_argument("--prep")
    e.add_argument("--prep-coef", dest="prep_coef")

    c = sub.add_parser("coact", help="print the coaction Delta_i of a tree")
    _common(c, enum=False)
    c.add_argument("--which", type=int, choices=(0, 1), default=0)
    c.add_argument("--tree", required=True)

    for name, text in (("delta-hat", "print the curtailment coaction"), ("dxi", "print D_Xi of a tree")):
        q = sub.add_parser(name, help=text)
        _common(q, enum=False)
        q.add_argument("--tree", required=True)

    r = sub.add_parser("apply-r", help="apply a preparation map to a tree")
    _common(r, enum=False)
    r.add_argument("--tree", required=True)
    r.add_argument("--prep")
    r.add_argument("--prep-coef", dest="prep_coef")

    s = sub.add_parser("symbolic", help="exact identity suite")
    _common(s)
    _suite(s)

    n = sub.add_parser("numeric", help="grid-model identity suite")
    _common(n)
    _suite(n)
    n.add_argument("--grid", help="grid sizes TxX (default 48x32)")
    n.add_argument("--tol", help="relative tolerance (default 1e-8; 0 disables the absolute floor)")
    n.add_argument("--seed", help="seed for --noise mollified")
    n.add_argument("--noise", help="trig (default) or mollified")
    n.add_argument("--cutoff", help="kernel cutoff radius (default 0.4)")
    n.add_argument("--stencil-order", dest="stencil_order", help="even derivative stencil order (default 8)")
    n.add_argument("--base-points", dest="base_points", help="number of base points (default 8)")
    n.add_argument("--identity", action="append", choices=NUMERIC_IDENTITIES,
                   help="restrict to these identities (repeatable)")
    n.add_argument("--slopes", help="also write the log-log slope diagnostic to this file")
    return p


def _settings(args: argparse.Namespace) -> dict:
    conf = read_config(args.config) if getattr(args, "config", None) else {}
    for k, v in vars(args).items():
        if v is not None and k in CONFIG_KEYS.values():
            conf[k] = v
    return conf


def _params(conf: dict) -> DegreeParams:
    d = int(conf.get("dim", 1))
    kw = {"d": d}
    if "alpha" in conf:
        kw["alpha"] = _fraction(conf["alpha"])
    if "scaling" in conf:
        kw["scaling"] = _ints(conf["scaling"], ",", "scaling")
    try:
        return DegreeParams(**kw)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


def _rules(conf: dict, params: DegreeParams, noises: int = 3, edges: int = 8):
    return make_rules(conf.get("rule", "gkpz"), int(conf.get("max_noises", noises)),
                      int(conf.get("max_edges", edges)), params.d)


def _prep(conf: dict, default: str = "trivial"):
    return load_prep(conf.get("prep", default), conf.get("prep_coef"))


def _numeric_config(conf: dict) -> NumericConfig:
    kw: dict = {}
    if "grid" in conf:
        kw["grid"] = _ints(conf["grid"], "x", "grid")
    for key, cast in (("cutoff", float), ("stencil_order", int), ("seed", int), ("tol", float),
                      ("base_points", int)):
        if key in conf:
            try:
                kw[key] = cast(conf[key])
            except ValueError as exc:
                raise _UsageError(f"bad {key}: {conf[key]!r}") from exc
    if "noise" in conf:
        kw["noise"] = conf["noise"]
    if kw.get("tol", 0.0) < 0:
        raise _UsageError("tolerance must be non-negative")
    return NumericConfig(**kw)


def _emit(report, args, out) -> int:
    from .report import summary_lines, write_report, write_tsv

    if not args.quiet:
        write_tsv(report, out, failures_only=True)
    out.write("\n".join(summary_lines(report)) + "\n")
    if args.report:
        for path in write_report(report, args.report):
            out.write(f"wrote {path}\n")
    return 0 if report.ok else 1


def _run(args: argparse.Namespace, out) -> int:
    conf = _settings(args)
    params = _params(conf)
    cmd = args.command
    if cmd in ("coact", "delta-hat", "dxi", "apply-r"):
        t = parse(args.tree, params.d)
        if cmd == "coact":
            out.write(coaction(args.which, t, params).render() + "\n")
        elif cmd == "delta-hat":
            out.write(delta_hat0(t, params).render() + "\n")
        elif cmd == "dxi":
            out.write(d_xi(t).render() + "\n")
        else:
            out.write(apply_R(_prep(conf), t).render() + "\n")
        return 0
    jobs = int(conf.get("jobs", 1))
    if cmd == "enumerate":
        rules = _rules(conf, params)
        t0 = enumerate_T0(rules, params)
        if args.assumption1:
            bad = check_assumption1(t0, params)
            for v in bad:
                out.write(v.render() + "\n")
            out.write(f"{len(bad)} violation(s) over {len(t0)} trees\n")
            return 0
        if args.closure:
            rep = check_closure(rules, t0, _prep(conf), params)
            for line in rep.lines():
                out.write(line + "\n")
            out.write("closed\n" if rep.closed else "not closed\n")
            return 0 if rep.closed else 1
        for t in (lift_T1(t0) if args.lift else t0):
            out.write(t.text + "\n")
        return 0
    if cmd == "symbolic":
        report = run_symbolic_suite(_rules(conf, params), _prep(conf), params, jobs)
        return _emit(report, args, out)
    # numeric
    config = _numeric_config(conf)
    rules = _rules(conf, params, 3, 5)
    prep = _prep(conf)
    report = run_numeric_suite(rules, prep, params, config, jobs, identities=args.identity)
    code = _emit(report, args, out)
    if args.slopes:
        from .model import slope_table
        from .report import write_slopes
        from .suites import base_points

        model = build_model(config, params, prep)
        t0 = [t for t in enumerate_T0(rules, params) if not t.is_unit()]
        rows = slope_table(model, t0, base_points(config, model.kernels.reach)[0])
        with open(args.slopes, "w") as fh:
            write_slopes(rows, fh)
        out.write(f"wrote {args.slopes}\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args, sys.stdout)
    except (DecoTreeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
