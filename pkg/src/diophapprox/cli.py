"""Command-line surface: reproducible experiment runs emitting JSON/CSV.

Every run is fully determined by (subcommand, flags, seed); outputs carry no
timestamps or machine data, so identical invocations are byte-identical.
Exit codes: 0 success, 2 usage, 3 precondition/saturation/precision,
4 internal invariant failure.  ``--json-errors`` turns failures into a
machine-readable JSON document on stderr.

Figures are deliberately not part of the computational commands; the
``report`` subcommand renders them afterwards from the emitted JSON, keeping
plotting dependencies out of the core.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional

from gmpy2 import mpq

from . import approx_sets as ap
from . import contfrac as cf
from . import gcd_graph as gg
from . import numtheory as nt
from .enclosure import DEFAULT_BITS
from .errors import (
    DiophApproxError,
    InternalInvariantError,
    InvalidArgumentError,
    PrecisionError,
    PreconditionError,
    ResourceLimitError,
    SaturationError,
)

USAGE_EXIT = 2
PRECONDITION_EXIT = 3
INTERNAL_EXIT = 4


def _rat(text: str) -> mpq:
    try:
        return mpq(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidArgumentError(f"not a rational: {text!r}") from exc


def _rat_str(x) -> str:
    x = mpq(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# output plumbing


def _emit(args, doc: dict, rows=None, header=None) -> None:
    """Write the JSON document and optional CSV table.

    With --out BASE the files BASE.json / BASE.csv are written; otherwise the
    JSON goes to stdout (CSV to stdout with --format csv).
    """
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    fmt = args.format
    if args.out:
        base = Path(args.out)
        base.parent.mkdir(parents=True, exist_ok=True)
        if fmt in ("json", "both"):
            base.with_suffix(".json").write_text(text, encoding="utf-8", newline="\n")
        if rows is not None and fmt in ("csv", "both"):
            with open(base.with_suffix(".csv"), "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                writer.writerows(rows)
    else:
        if rows is not None and fmt == "csv":
            writer = csv.writer(sys.stdout, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        else:
            sys.stdout.write(text)


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# value / delta grammars


def parse_value_spec(spec: str, bits: int):
    """cf value grammar: p/q | sqrt:D | surd:P,D,Q | e | pi."""
    if spec in ("e", "pi"):
        return cf.constant_enclosure(spec, bits)
    if spec.startswith("sqrt:"):
        d = int(spec.split(":", 1)[1])
        return cf.Surd(0, d, 1)
    if spec.startswith("surd:"):
        parts = spec.split(":", 1)[1].split(",")
        if len(parts) != 3:
            raise InvalidArgumentError("surd spec is surd:P,D,Q")
        p, d, q = (int(x) for x in parts)
        return cf.Surd(p, d, q)
    return _rat(spec)


def parse_delta_spec(spec: str, qmax: Optional[int], bits: int) -> ap.DeltaSequence:
    """delta grammar: khinchin:c | uniform:LO..HI:N | counterexample:J | file:PATH."""
    if spec.startswith("khinchin:"):
        c = _rat(spec.split(":", 1)[1])
        if qmax is None:
            raise InvalidArgumentError("khinchin needs --qmax")
        return ap.delta_khinchin(c, qmax, bits)
    if spec.startswith("uniform:"):
        body = spec.split(":", 1)[1]
        try:
            rng, n_text = body.rsplit(":", 1)
            lo_text, hi_text = rng.split("..", 1)
            lo, hi = int(lo_text), int(hi_text)
        except ValueError as exc:
            raise InvalidArgumentError("uniform spec is uniform:LO..HI:N") from exc
        return ap.delta_uniform_support(range(lo, hi + 1), _rat(n_text), qmax=qmax or hi)
    if spec.startswith("counterexample:"):
        J = int(spec.split(":", 1)[1])
        table = nt.sieve(max(100, 10 * J))
        return ap.delta_counterexample(J, table, bits).delta
    if spec.startswith("file:"):
        return ap.DeltaSequence.from_json(_load_json(spec.split(":", 1)[1]))
    raise InvalidArgumentError(f"unknown delta spec {spec!r}")


def _load_constants(spec: str) -> gg.ConstantsProfile:
    if spec in ("paper", "toy"):
        return gg.ConstantsProfile.named(spec)
    return gg.ConstantsProfile.from_file(spec)


# ---------------------------------------------------------------------------
# cf


def cmd_cf(args) -> int:
    value = parse_value_spec(args.value, args.precision)
    rows = cf.convergent_table(value, args.terms, args.precision)
    exponents = cf.irrationality_exponents([(r.a, r.q) for r in rows])
    doc = {
        "schema": "cf-table/v1",
        "value": args.value,
        "precision": args.precision,
        "terms": [r.term for r in rows],
        "irrationality_exponents": exponents,
        "rows": [r.to_json() for r in rows],
    }
    csv_rows = [
        [
            r.j,
            r.term,
            r.a,
            r.q,
            "" if r.err is None else str(r.err.lo),
            "" if r.err is None else str(r.err.hi),
            "" if r.lower_ok is None else r.lower_ok,
            "" if r.upper_ok is None else r.upper_ok,
        ]
        for r in rows
    ]
    _emit(args, doc, csv_rows, ["j", "term", "a", "q", "err_lo", "err_hi", "lower_ok", "upper_ok"])
    return 0


# ---------------------------------------------------------------------------
# ds


def cmd_ds_measure(args) -> int:
    delta = parse_delta_spec(args.delta, args.qmax, args.precision)
    rows = []
    json_rows = []
    for q, v, m in delta.csv_rows(reduced=args.reduced):
        rows.append([q, _rat_str(v), _rat_str(m), float(m)])
        json_rows.append(
            {"q": q, "delta": _rat_str(v), "measure": _rat_str(m), "measure_float": float(m)}
        )
    doc = {
        "schema": "delta-measures/v1",
        "delta": args.delta,
        "reduced": args.reduced,
        "qmax": delta.qmax,
        "rows": json_rows,
    }
    _emit(args, doc, rows, ["q", "delta", "measure", "measure_float"])
    return 0


def cmd_ds_pairs(args) -> int:
    delta = parse_delta_spec(args.delta, args.qmax, args.precision)
    pairs = []
    if args.q is not None and args.r is not None:
        pairs = [(args.q, args.r)]
    elif args.below:
        sup = [q for q in delta.support() if q <= args.below]
        pairs = [(q, r) for i, q in enumerate(sup) for r in sup[i + 1 :]]
    else:
        raise InvalidArgumentError("give --q/--r or --below")
    rows = []
    json_rows = []
    for q, r in pairs:
        pd = ap.pair_data(q, r, delta, args.precision)
        rows.append(
            [
                q,
                r,
                _rat_str(pd.M),
                _rat_str(pd.exact_meas),
                str(pd.pv_term.lo),
                str(pd.pv_term.hi),
            ]
        )
        json_rows.append(pd.to_json())
    doc = {"schema": "pair-data/v1", "delta": args.delta, "rows": json_rows}
    _emit(args, doc, rows, ["q", "r", "M", "exact_meas", "pv_lo", "pv_hi"])
    return 0


def cmd_ds_window(args) -> int:
    delta = parse_delta_spec(args.delta, args.qmax, args.precision)
    found = ap.find_window(delta, getattr(args, "from"))
    if found is None:
        doc = {
            "schema": "window-report/v1",
            "found": False,
            "note": "mass below 1 up to qmax (finite truncation)",
        }
        _emit(args, doc)
        return 0
    Q, R = found
    rep = ap.window_report(delta, Q, R, args.precision)
    doc = rep.to_json()
    doc["found"] = True
    _emit(args, doc)
    return 0


def cmd_ds_counterexample(args) -> int:
    table = nt.sieve(max(100, 10 * args.levels))
    res = ap.delta_counterexample(args.levels, table, args.precision)
    partial = mpq(0)
    rows = []
    json_levels = []
    for level in res.levels:
        # the primorial member itself contributes 1/(j log^2 j)
        partial += level.delta_lo * level.primorial
        identical = level.identity_lhs == level.identity_rhs
        rows.append(
            [
                level.j,
                level.prime,
                str(level.primorial),
                len(level.members),
                _rat_str(level.identity_lhs),
                _rat_str(level.identity_rhs),
                identical,
                float(partial),
            ]
        )
        entry = level.to_json()
        entry["identity_holds"] = identical
        entry["partial_sum_float"] = float(partial)
        json_levels.append(entry)
    doc = {
        "schema": "counterexample/v1",
        "levels": json_levels,
        "delta": res.delta.to_json(),
    }
    _emit(
        args,
        doc,
        rows,
        ["j", "prime", "primorial", "members", "identity_lhs", "identity_rhs", "identity_holds", "partial_sum"],
    )
    return 0


def cmd_ds_montecarlo(args) -> int:
    delta = parse_delta_spec(args.delta, args.qmax, args.precision)
    if args.qmin:
        delta = delta.restricted(args.qmin, delta.qmax)
    res = ap.monte_carlo_counts(
        delta, reduced=args.reduced, samples=args.samples, seed=args.seed,
        threads=args.threads,
    )
    doc = res.to_json()
    doc["delta"] = args.delta
    rows = [[k, v] for k, v in sorted(res.histogram.items())]
    _emit(args, doc, rows, ["count", "frequency"])
    return 0


def cmd_ds_catlin(args) -> int:
    delta = parse_delta_spec(args.delta, args.qmax, args.precision)
    out = ap.catlin_transform(delta)
    rows = []
    json_rows = []
    support = sorted(set(delta.support()) | set(out.support()))
    for q in support:
        rows.append([q, _rat_str(delta.get(q)), _rat_str(out.get(q))])
        json_rows.append(
            {"q": q, "delta": _rat_str(delta.get(q)), "transformed": _rat_str(out.get(q))}
        )
    doc = {
        "schema": "catlin/v1",
        "label": out.label,
        "rows": json_rows,
        "transformed": out.to_json(),
    }
    _emit(args, doc, rows, ["q", "delta", "transformed"])
    return 0


# ---------------------------------------------------------------------------
# gcd


def cmd_gcd_validate(args) -> int:
    graph = gg.GcdGraph.from_json(_load_json(args.graph))
    issues = gg.validate(graph)
    doc = {"schema": "validation/v1", "valid": not issues, "violations": issues}
    _emit(args, doc)
    return 0 if not issues else PRECONDITION_EXIT


def cmd_gcd_quality(args) -> int:
    graph = gg.GcdGraph.from_json(_load_json(args.graph))
    gg.require_valid(graph)
    consts = _load_constants(args.constants)
    qv = gg.quality(graph, consts, args.precision)
    doc = {"schema": "quality/v1", "constants": consts.label, "quality": qv.to_json()}
    _emit(args, doc)
    return 0


def cmd_gcd_step(args) -> int:
    graph = gg.GcdGraph.from_json(_load_json(args.graph))
    gg.require_valid(graph)
    consts = _load_constants(args.constants)
    out = gg.quality_increment_step(graph, args.prime, consts, args.precision)
    doc = {
        "schema": "step/v1",
        "constants": consts.label,
        "step": out.to_json(),
        "graph_after": out.graph.to_json(),
    }
    _emit(args, doc)
    return 0


def _trace_csv(trace: gg.CompressionTrace):
    rows = []
    for i, s in enumerate(trace.steps):
        enc = s.quality_after.enclosure()
        rows.append(
            [
                i,
                s.prime,
                str(s.case),
                _rat_str(s.alpha),
                _rat_str(s.beta),
                _rat_str(s.delta_after),
                str(enc.lo),
                str(enc.hi),
            ]
        )
    return rows, ["step", "prime", "case", "alpha", "beta", "delta", "q_lo", "q_hi"]


def cmd_gcd_compress(args) -> int:
    graph = gg.GcdGraph.from_json(_load_json(args.graph))
    gg.require_valid(graph)
    consts = _load_constants(args.constants)
    res = gg.compress(graph, _rat(args.t), consts, args.precision)
    doc = {
        "schema": "compression-trace/v1",
        "constants": consts.label,
        "t": args.t,
        "trace": res.trace.to_json(),
        "terminal": res.terminal.to_json(),
    }
    rows, header = _trace_csv(res.trace)
    _emit(args, doc, rows, header)
    toy_failures = [
        i for i, s in enumerate(res.trace.steps) if not all(s.quality_ok)
    ]
    if toy_failures and consts.label == "paper":
        raise InternalInvariantError(
            f"quality failure under paper constants at steps {toy_failures}"
        )
    return 0


def cmd_gcd_special_case(args) -> int:
    consts = _load_constants(args.constants)
    table = nt.sieve(max(2 * args.Q + 1, 1024))
    if args.support:
        values = [int(x) for x in _load_json(args.support)["support"]]
        S = [nt.factor(v, table) for v in values]
    else:
        S = gg.trim_to_weight(nt.squarefree_in(args.Q, 2 * args.Q, table), _rat(args.N))
    rep = gg.special_case_harness(
        args.Q,
        _rat(args.N),
        S,
        _rat(args.t),
        consts,
        delta_link=args.delta_link,
        ladder_steps=args.ladder_steps,
        bits=args.precision,
    )
    doc = rep.to_json()
    doc["constants"] = consts.label
    rows = [
        [_rat_str(e.t), e.pair_count, _rat_str(e.mu_Bt), _rat_str(e.ratio), float(e.ratio)]
        for e in rep.ladder
    ]
    _emit(args, doc, rows, ["t", "pairs", "mu_Bt", "ratio", "ratio_float"])
    return 0


def cmd_report(args) -> int:
    from . import report

    produced = report.render(args.input, args.out_dir)
    doc = {"schema": "report/v1", "figures": [str(p) for p in produced]}
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output base path (writes BASE.json / BASE.csv)")
    p.add_argument(
        "--format", choices=("json", "csv", "both"), default=None,
        help="which artifacts to write (default: both with --out, json to stdout)",
    )
    p.add_argument(
        "--precision", type=int, default=DEFAULT_BITS,
        help="working precision in bits for certified enclosures",
    )
    p.add_argument("--threads", type=int, default=1, help="parallelism cap (results identical)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diophapprox",
        description="Exact desk-scale experiments in metric Diophantine approximation",
    )
    parser.add_argument(
        "--json-errors", action="store_true",
        help="report failures as machine-readable JSON on stderr",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_cf = sub.add_parser("cf", help="continued fraction convergent table")
    p_cf.add_argument("--value", required=True, help="p/q | sqrt:D | surd:P,D,Q | e | pi")
    p_cf.add_argument("--terms", type=int, required=True)
    _add_common(p_cf)
    p_cf.set_defaults(func=cmd_cf)

    p_ds = sub.add_parser("ds", help="approximation-set experiments")
    ds_sub = p_ds.add_subparsers(dest="ds_command", required=True)

    def ds_parser(name, fn, **kw):
        q = ds_sub.add_parser(name, **kw)
        q.add_argument("--delta", help="khinchin:c | uniform:LO..HI:N | counterexample:J | file:PATH")
        q.add_argument("--qmax", type=int)
        _add_common(q)
        q.set_defaults(func=fn)
        return q

    q = ds_parser("measure", cmd_ds_measure, help="(q, Delta_q, measure) table")
    q.add_argument("--reduced", action="store_true")

    q = ds_parser("pairs", cmd_ds_pairs, help="pairwise intersection data")
    q.add_argument("--q", type=int)
    q.add_argument("--r", type=int)
    q.add_argument("--below", type=int, help="all support pairs up to this bound")

    q = ds_parser("window", cmd_ds_window, help="find and report a unit-mass window")
    q.add_argument("--from", type=int, required=True, dest="from")

    q = ds_sub.add_parser("counterexample", help="divisor-supported radius family")
    q.add_argument("--levels", type=int, required=True)
    _add_common(q)
    q.set_defaults(func=cmd_ds_counterexample)

    q = ds_parser("montecarlo", cmd_ds_montecarlo, help="deterministic counting experiment")
    q.add_argument("--samples", type=int, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--reduced", action="store_true")
    q.add_argument("--qmin", type=int, help="restrict the support from below")

    ds_parser("catlin", cmd_ds_catlin, help="sup-over-multiples transform")

    p_gcd = sub.add_parser("gcd", help="square-free GCD graph pipeline")
    gcd_sub = p_gcd.add_subparsers(dest="gcd_command", required=True)

    def gcd_parser(name, fn, needs_graph=True, needs_constants=True, **kw):
        q = gcd_sub.add_parser(name, **kw)
        if needs_graph:
            q.add_argument("--graph", required=True, help="graph JSON path")
        if needs_constants:
            q.add_argument("--constants", default="paper", help="paper | toy | profile path")
        _add_common(q)
        q.set_defaults(func=fn)
        return q

    gcd_parser("validate", cmd_gcd_validate, needs_constants=False, help="check the five defining properties")
    gcd_parser("quality", cmd_gcd_quality, help="certified quality enclosure")
    q = gcd_parser("step", cmd_gcd_step, help="one quality-increment step")
    q.add_argument("--prime", type=int, required=True)
    q = gcd_parser("compress", cmd_gcd_compress, help="full compression trace")
    q.add_argument("--t", required=True, help="ladder base (rational > 1)")
    q = gcd_parser("special-case", cmd_gcd_special_case, needs_graph=False, help="bilinear-form report")
    q.add_argument("--Q", type=int, required=True)
    q.add_argument("--N", required=True, help="target weight (rational)")
    q.add_argument("--t", required=True, help="ladder base (rational > 1)")
    q.add_argument("--ladder-steps", type=int, default=4)
    q.add_argument("--delta-link", action="store_true")
    q.add_argument("--support", help="JSON file with a fixed support list")

    p_rep = sub.add_parser("report", help="render figures from emitted JSON artifacts")
    p_rep.add_argument("--input", required=True, help="JSON artifact or directory")
    p_rep.add_argument("--out-dir", help="directory for figures (default: alongside input)")
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "format", None) is None and hasattr(args, "format"):
        args.format = "both" if getattr(args, "out", None) else "json"
    try:
        return args.func(args)
    except InternalInvariantError as exc:
        _report_error(args, exc, INTERNAL_EXIT)
        return INTERNAL_EXIT
    except (
        InvalidArgumentError,
        SaturationError,
        PreconditionError,
        PrecisionError,
        ResourceLimitError,
    ) as exc:
        _report_error(args, exc, PRECONDITION_EXIT)
        return PRECONDITION_EXIT
    except DiophApproxError as exc:
        _report_error(args, exc, PRECONDITION_EXIT)
        return PRECONDITION_EXIT


def _report_error(args, exc: Exception, code: int) -> None:
    if getattr(args, "json_errors", False):
        doc = {
            "schema": "error/v1",
            "error": {"type": type(exc).__name__, "message": str(exc), "exit": code},
        }
        sys.stderr.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        sys.stderr.write(f"error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
