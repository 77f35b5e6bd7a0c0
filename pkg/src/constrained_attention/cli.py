"""
Command-line entry point.

    constrained-attention project   --transform T --scores S [--bounds U]
    constrained-attention session   --scores FILE --fertility constant:F|table:FILE ...
    constrained-attention fertility guided --src FILE --align FILE --add N -o FILE
    constrained-attention metrics   rep|drop|covpen ...
    constrained-attention gradcheck --transform T --trials N --seed S [--jmax 8]

Exit codes: 0 ok, 1 check failure, 2 usage, 3 infeasible bounds, 4 data mismatch.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import oracles
from .corpus import read_alignments, read_attention_matrix, read_corpus, open_input
from .errors import InfeasibleError, LengthMismatch
from .fertility import (
    DEFAULT_EXHAUSTION,
    assign_fertilities,
    build_guided_table,
    read_fertility_table,
    run_session,
    write_fertility_table,
)
from .metrics import coverage_penalty, drop_score, rep_score
from .transforms import TRANSFORMS, get_transform

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_MISMATCH = 4


class UsageError(Exception):
    pass


def _read_text(arg):
    """An argument naming a file, ``-`` for stdin, or the inline value itself."""
    if arg == "-" or os.path.isfile(arg):
        f = open_input(arg)
        try:
            return f.read()
        finally:
            if f is not sys.stdin:
                f.close()
    return arg


def parse_vector(arg):
    text = _read_text(arg).strip()
    try:
        if text.startswith("["):
            values = json.loads(text)
        else:
            values = [float(tok) for tok in text.replace(",", " ").split()]
        vec = np.asarray(values, dtype=float)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"cannot parse vector {arg!r}: {exc}") from None
    if vec.ndim != 1 or vec.shape[0] == 0:
        raise UsageError(f"expected a non-empty vector, got {arg!r}")
    return vec


def parse_score_lines(arg):
    rows = []
    for n, line in enumerate(_read_text(arg).splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except ValueError as exc:
            raise UsageError(f"scores line {n}: {exc}") from None
        if not isinstance(row, list) or not row:
            raise UsageError(f"scores line {n}: expected a JSON array")
        rows.append([float(v) for v in row])
    if len({len(r) for r in rows}) > 1:
        raise LengthMismatch("score vectors differ in length across steps")
    return rows


def _dump(obj):
    return json.dumps(obj, separators=(", ", ": "))


def _emit(line, out):
    out.write(line + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_project(args, out):
    tr = get_transform(args.transform)
    z = parse_vector(args.scores)
    u = None
    if tr.constrained:
        if args.bounds is None:
            raise UsageError(f"--bounds is required for {tr.name}")
        u = parse_vector(args.bounds)
        if u.shape != z.shape:
            raise LengthMismatch(f"{u.shape[0]} bounds for {z.shape[0]} scores")
    elif args.bounds is not None:
        print(f"warning: {tr.name} ignores --bounds", file=sys.stderr)
    try:
        alpha, cert = tr.forward(z, u)
    except ValueError as exc:
        if isinstance(exc, InfeasibleError):
            raise
        raise UsageError(str(exc)) from None
    result = {"transform": tr.name, "alpha": alpha.tolist()}
    if cert is not None:
        result["certificate"] = cert.to_dict()
    _emit(_dump(result), out)
    return EXIT_OK


def _session_fertility(args, J):
    spec = args.fertility
    kind, sep, value = spec.partition(":")
    if not sep:
        raise UsageError(f"--fertility expects constant:F or table:FILE, got {spec!r}")
    if kind == "constant":
        try:
            f = float(value)
        except ValueError:
            raise UsageError(f"bad constant fertility {value!r}") from None
        if not f >= 0:
            raise UsageError("constant fertility must be >= 0")
        return assign_fertilities("constant", [None] * J, f=f)
    if kind == "table":
        if args.source is None:
            raise UsageError("--fertility table:FILE needs --source with the source tokens")
        tokens = _read_text(args.source).split()
        if len(tokens) != J:
            raise LengthMismatch(f"{len(tokens)} source tokens for {J} non-sink scores")
        table = read_fertility_table(value, add=args.add)
        return assign_fertilities("guided", tokens, table=table)
    raise UsageError(f"unknown fertility kind {kind!r}")


def cmd_session(args, out):
    tr = get_transform(args.transform)
    rows = parse_score_lines(args.scores)
    exhaustion = 0.0 if args.exhaustion is None else args.exhaustion
    if exhaustion < 0:
        raise UsageError("--exhaustion must be >= 0")
    if tr.constrained and args.fertility is None:
        raise UsageError(f"--fertility is required for {tr.name}")
    if not tr.constrained and (args.fertility is not None or args.exhaustion is not None):
        print(f"warning: {tr.name} ignores fertility and exhaustion flags", file=sys.stderr)
    if not rows:
        _emit(_dump({"beta": []}), out)
        return EXIT_OK

    J = len(rows[0]) - 1
    if tr.constrained:
        f = _session_fertility(args, J)
    else:
        f = np.append(np.zeros(J), np.inf)
    att, beta = run_session(f, rows, tr.name, exhaustion)
    for row in att:
        _emit(_dump(row.tolist()), out)
    _emit(_dump({"beta": beta.tolist()}), out)
    return EXIT_OK


def read_session_output(text):
    """Parse ``session`` output back into ``(attention rows, beta)``."""
    rows, beta = [], None
    for line in text.splitlines():
        obj = json.loads(line)
        if isinstance(obj, dict):
            beta = obj["beta"]
        else:
            rows.append(obj)
    return rows, beta


def cmd_fertility(args, out):
    src = read_corpus(args.src)
    align = read_alignments(args.align)
    table = build_guided_table(src, align, add=args.add)
    if args.output in (None, "-"):
        for token, value in table.values.items():
            _emit(f"{token}\t{value!r}", out)
    else:
        write_fertility_table(table, args.output)
    return EXIT_OK


def _fmt(score):
    return f"{score + 0.0:.2f}"


def cmd_metrics(args, out):
    if args.metric == "rep":
        score = rep_score(read_corpus(args.hyp), read_corpus(args.ref), n=args.n, l1=args.l1, l2=args.l2)
    elif args.metric == "drop":
        score = drop_score(read_corpus(args.src), read_alignments(args.ref_align), read_alignments(args.hyp_align))
    else:
        att = read_attention_matrix(args.att)
        if not att:
            score = 0.0
        else:
            score = coverage_penalty(att, args.beta, args.eps)
    _emit(_fmt(score), out)
    return EXIT_OK


def _report_lines(label, report):
    status = "PASS" if report.ok else "FAIL"
    lines = [
        f"{label}: instances={report.n_instances} max_abs_error={report.max_abs_error:.3e} "
        f"tol={report.tolerance:.0e} {status}"
    ]
    for instance, expected, got in report.failures[:5]:
        lines.append("  failing instance: " + _dump({"instance": instance, "expected": expected, "got": got}))
    return lines


def cmd_gradcheck(args, out):
    if args.trials < 0 or args.jmax < 1:
        raise UsageError("--trials must be >= 0 and --jmax >= 1")
    if args.jmax > oracles.MAX_ORACLE_SIZE:
        raise UsageError(f"--jmax is limited to {oracles.MAX_ORACLE_SIZE}")
    tr = get_transform(args.transform)
    fw = oracles.forward_suite(tr, args.trials, args.seed, jmax=args.jmax, tol=args.forward_tol)
    gr = oracles.gradient_suite(tr, args.trials, args.seed + 1, jmax=args.jmax, tol=args.grad_tol)
    lines = [f"transform: {tr.name}", f"seed: {args.seed}", f"trials per J: {args.trials}, J = 1..{args.jmax}"]
    lines += _report_lines("forward vs oracle", fw)
    lines += _report_lines("finite differences", gr)
    ok = fw.ok and gr.ok
    lines.append("result: " + ("PASS" if ok else "FAIL"))
    for line in lines:
        _emit(line, out)
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="constrained-attention", description="Sparse and constrained attention transforms.")
    sub = p.add_subparsers(dest="command", required=True)
    names = sorted(TRANSFORMS)

    q = sub.add_parser("project", help="apply one transform to a score vector")
    q.add_argument("--transform", required=True, choices=names)
    q.add_argument("--scores", required=True, help="inline numbers, a file, or - for stdin")
    q.add_argument("--bounds", help="upper bounds (inline, file, or -); 'inf' allowed")
    q.set_defaults(func=cmd_project)

    s = sub.add_parser("session", help="fertility-bounded attention over several steps")
    s.add_argument("--scores", required=True, help="JSON-lines file, one score vector (J+1 with sink) per step")
    s.add_argument("--transform", default="csparsemax", choices=names)
    s.add_argument("--fertility", help="constant:F or table:FILE")
    s.add_argument("--source", help="source tokens (inline or file), needed with table:FILE")
    s.add_argument("--add", type=float, default=0.0, help="constant added to unknown-token fertility")
    s.add_argument(
        "--exhaustion",
        type=float,
        nargs="?",
        const=DEFAULT_EXHAUSTION,
        default=None,
        help=f"score bonus coefficient c (bare flag means {DEFAULT_EXHAUSTION}; omitted means 0)",
    )
    s.set_defaults(func=cmd_session)

    f = sub.add_parser("fertility", help="build a fertility table")
    fsub = f.add_subparsers(dest="strategy", required=True)
    g = fsub.add_parser("guided", help="max aligned count per token type")
    g.add_argument("--src", required=True)
    g.add_argument("--align", required=True)
    g.add_argument("--add", type=float, default=1.0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_fertility)

    m = sub.add_parser("metrics", help="coverage metrics")
    msub = m.add_subparsers(dest="metric", required=True)
    r = msub.add_parser("rep")
    r.add_argument("--hyp", required=True)
    r.add_argument("--ref", required=True)
    r.add_argument("--n", type=int, default=2)
    r.add_argument("--l1", type=float, default=1.0)
    r.add_argument("--l2", type=float, default=2.0)
    d = msub.add_parser("drop")
    d.add_argument("--src", required=True)
    d.add_argument("--ref-align", required=True)
    d.add_argument("--hyp-align", required=True)
    c = msub.add_parser("covpen")
    c.add_argument("--att", required=True)
    c.add_argument("--beta", type=float, default=0.2)
    c.add_argument("--eps", type=float, default=0.1)
    for sp in (r, d, c):
        sp.set_defaults(func=cmd_metrics)

    k = sub.add_parser("gradcheck", help="oracle and finite-difference suites")
    k.add_argument("--transform", required=True, choices=names)
    k.add_argument("--trials", type=int, default=25, help="random instances per J")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--jmax", type=int, default=8)
    k.add_argument("--forward-tol", type=float, default=1e-8)
    k.add_argument("--grad-tol", type=float, default=1e-5)
    k.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except LengthMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run():
    sys.exit(main())
