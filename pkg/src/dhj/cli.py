"""Command-line front end.

Exit codes: 0 success or found, 3 a valid negative answer (not found,
exhausted, undetermined, hypothesis not met), 2 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

from dhj.bounds import (MissingOracleValue, N_of, OracleTable, base_params, fmt_q,
                        mdhj_star_bound, parse_rational, preview)
from dhj.cube import Subspace, count_lines, count_subspaces, enumerate_lines
from dhj.driver import TablePlan, ToyPlan, dhj_driver, dichotomy_step
from dhj.engine import Correlation, correlate, uniformize
from dhj.pointset import PointSet, WordsetError, parse_wordset, parse_wordset_text
from dhj.search import (BudgetExhausted, SearchBudget, dhj_value, find_line,
                        find_restricted_subspace, find_subspace, gr_partition_search,
                        max_linefree)
from dhj.suites import SUITES, tallies
from dhj.tiling import TilingParameters, tile_insensitive
from dhj.trace import HypothesisNotMet, Increment, LineFound, NotMet, jsonable

SCHEMA = "dhj-report v1"
REPORT_FIELDS = ("schema", "command", "params", "outcome", "witnesses", "certificate",
                 "trace", "wall_time")

OK, NEGATIVE, USAGE = 0, 3, 2


class InputError(Exception):
    pass


# ---------------------------------------------------------------- reports

def make_report(command: str, params: dict, outcome: str, witnesses=None, certificate=None,
                trace=None, wall_time: float = 0.0) -> dict:
    return {"schema": SCHEMA, "command": command, "params": jsonable(params), "outcome": outcome,
            "witnesses": jsonable(witnesses or {}), "certificate": jsonable(certificate or {}),
            "trace": trace, "wall_time": round(wall_time, 6)}


def read_report(text: str) -> dict:
    """Parse a JSON report, rejecting unknown or missing fields and other schema versions."""
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("report must be a JSON object")
    unknown = set(data) - set(REPORT_FIELDS)
    if unknown:
        raise ValueError(f"unknown report field(s): {', '.join(sorted(unknown))}")
    missing = set(REPORT_FIELDS) - set(data)
    if missing:
        raise ValueError(f"missing report field(s): {', '.join(sorted(missing))}")
    if data["schema"] != SCHEMA:
        raise ValueError(f"unsupported schema {data['schema']!r}")
    return data


# ---------------------------------------------------------------- argument helpers

def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _load_set(path: str | None) -> PointSet:
    if not path:
        raise InputError("a wordset file is required (-A)")
    if not Path(path).exists():
        raise InputError(f"no such file: {path}")
    try:
        return parse_wordset(Path(path))
    except (WordsetError, ValueError) as e:
        raise InputError(f"{path}: {e}") from None


def _load_table(path: str | None) -> OracleTable:
    if not path:
        return OracleTable()
    try:
        return OracleTable.load(path)
    except (OSError, ValueError) as e:
        raise InputError(f"{path}: {e}") from None


def _load_toy(path: str | None) -> ToyPlan | None:
    if not path:
        return None
    try:
        return ToyPlan.from_dict(json.loads(Path(path).read_text()))
    except (OSError, ValueError, TypeError) as e:
        raise InputError(f"{path}: {e}") from None


def _budget(args) -> SearchBudget:
    return SearchBudget(nodes=args.budget_nodes, jobs=args.jobs)


def _need(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise InputError(f"--{name.replace('_', '-')} is required")


# ---------------------------------------------------------------- commands

def cmd_lines(args):
    _need(args, "k", "n")
    m = args.m or 1
    params = {"k": args.k, "n": args.n, "m": m}
    if m == 1:
        count = count_lines(args.k, args.n)
        listed = [str(L) for L in enumerate_lines(args.k, args.n)] if args.list else []
        cert = {"enumerated": sum(1 for _ in enumerate_lines(args.k, args.n))}
        cert["agrees"] = cert["enumerated"] == count
    else:
        count, listed, cert = count_subspaces(args.k, args.n, m), [], {}
    return OK, params, "counted", {"count": count, "lines": listed}, cert, None


def cmd_density(args):
    A = _load_set(args.A)
    params = {"k": A.k, "n": A.n, "size": len(A)}
    out = {"density": A.density()}
    if args.subspace:
        V = Subspace.parse(args.subspace, A.k)
        if V.n != A.n:
            raise InputError(f"subspace {V} has length {V.n}, set has {A.n}")
        out["subspace"] = str(V)
        out["density_in"] = A.density_in(V)
    return OK, params, "measured", out, {}, None


def cmd_find_line(args):
    A = _load_set(args.A)
    ell = find_line(A, _budget(args))
    params = {"k": A.k, "n": A.n}
    if ell is None:
        return NEGATIVE, params, "not_found", {}, {"lines_checked": count_lines(A.k, A.n)}, None
    return OK, params, "found", {"line": str(ell), "points": [str(w) for w in ell.points()]}, \
        {"contained": A.contains_all(ell.indices())}, None


def cmd_find_subspace(args):
    A = _load_set(args.A)
    m = args.m or 1
    params = {"k": A.k, "n": A.n, "m": m, "restricted": args.restricted}
    V = find_restricted_subspace(A, m, _budget(args)) if args.restricted \
        else find_subspace(A, m, _budget(args))
    if V is None:
        return NEGATIVE, params, "not_found", {}, {}, None
    kp = A.k - 1 if args.restricted else A.k
    return OK, params, "found", {"subspace": str(V)}, \
        {"contained": A.contains_all(V.indices(kp))}, None


def cmd_max_linefree(args):
    _need(args, "k", "n")
    res = max_linefree(args.k, args.n, _budget(args))
    params = {"k": args.k, "n": args.n}
    cert = {"line_free": find_line(res.witness) is None, "optimal": res.optimal, "nodes": res.nodes}
    out = {"size": res.size, "density": res.density, "witness": res.witness.texts()}
    return (OK if res.optimal else NEGATIVE), params, \
        ("optimal" if res.optimal else "lower_bound"), out, cert, None


def cmd_dhj(args):
    _need(args, "k", "delta", "horizon")
    res = dhj_value(args.k, args.delta, args.horizon, _budget(args))
    params = {"k": args.k, "delta": args.delta, "horizon": args.horizon}
    wit = {str(n): S.texts() for n, S in res.witnesses.items()}
    cert = {"refuted": res.refuted, "density_semantics": res.density_semantics,
            "witnesses_line_free": all(find_line(S) is None for S in res.witnesses.values())}
    if res.value is None:
        return NEGATIVE, params, "undetermined", {"counterexamples": wit}, cert, None
    return OK, params, res.label, {"N": res.value, "witnesses": wit}, cert, None


def cmd_gr_search(args):
    _need(args, "m")
    if not args.A:
        raise InputError("a wordset of line generators is required (-A)")
    try:
        k, n, entries = parse_wordset_text(Path(args.A).read_text(), allow_variables=True)
        family = [Subspace.of(k, e) for e in entries]
    except (OSError, ValueError) as e:
        raise InputError(f"{args.A}: {e}") from None
    if any(L.dim != 1 for L in family):
        raise InputError("every entry must be a line generator (one variable)")
    res = gr_partition_search(family, args.m, k, n, _budget(args))
    params = {"k": k, "n": n, "m": args.m, "lines": len(family)}
    if res is None:
        return NEGATIVE, params, "not_found", {}, {}, None
    return OK, params, "found", {"subspace": str(res.subspace),
                                 "colour": "inside" if res.contained else "outside"}, {}, None


def cmd_uniformize(args):
    A = _load_set(args.A)
    _need(args, "m", "eps")
    params = {"k": A.k, "n": A.n, "m": args.m, "eps": args.eps}
    try:
        l, V, tr = uniformize(A, args.m, args.eps)
    except HypothesisNotMet as e:
        return NEGATIVE, params, "exhausted", {}, {"stage": e.stage, "reason": e.reason}, \
            e.trace.to_json() if e.trace else None
    mins = min(A.slice(w).density() for w in V.points())
    return OK, params, "uniform", {"l": l, "subspace": str(V)}, \
        {"min_slice_density": mins, "bound": A.density() - args.eps}, tr.to_json()


def cmd_tile(args):
    D = _load_set(args.A)
    _need(args, "beta", "M1")
    t = TilingParameters(D.k - 1, args.beta, args.m or 1, args.M1)
    params = {**t.as_dict(), "letter": args.letter, "n": D.n}
    try:
        T = tile_insensitive(D, args.letter, t)
    except HypothesisNotMet as e:
        return NEGATIVE, params, "hypothesis_not_met", {}, {"stage": e.stage, "reason": e.reason}, \
            e.trace.to_json() if e.trace else None
    return OK, params, "tiled", {"members": [str(V) for V in T.members]}, \
        {"residual": T.residual, "rounds": T.rounds, "bound": 2 * t.beta}, T.trace.to_json()


def _plan_params(args, A: PointSet):
    plan = _load_toy(args.toy_params)
    table = _load_table(args.oracle_table)
    delta = args.delta if args.delta is not None else A.density()
    k = A.k - 1
    if plan is not None:
        return plan, plan.params(k, delta)
    return TablePlan(table), base_params(k, delta, table)


def _outcome(out, params, extra=None):
    trace = out.trace.to_json() if out.trace else None
    if isinstance(out, LineFound):
        return OK, params, "line_found", {"line": str(out.line)}, extra or {}, trace
    if isinstance(out, Increment):
        return OK, params, "increment", {"subspace": str(out.subspace), "density": out.density}, \
            extra or {}, trace
    return NEGATIVE, params, "hypothesis_not_met", {}, \
        {"stage": out.stage, "reason": out.reason, "measured": out.measured}, trace


def cmd_correlate(args):
    A = _load_set(args.A)
    _need(args, "m")
    plan, p = _plan_params(args, A)
    params = {**p.as_dict(), "n": A.n, "m": args.m}
    try:
        out = correlate(A, args.m, p)
    except HypothesisNotMet as e:
        return _outcome(NotMet.from_exception(e), params)
    if isinstance(out, Correlation):
        D = out.core
        AD = A.pullback(out.subspace) & D
        return OK, params, "correlated", \
            {"subspace": str(out.subspace), "early": out.early,
             "parts": [S.texts() for S in out.parts]}, \
            {"dens_D": D.density(), "dens_A_and_D": AD.density()}, out.trace.to_json()
    return _outcome(out, params)


def cmd_dichotomy(args):
    A = _load_set(args.A)
    _need(args, "d")
    plan, p = _plan_params(args, A)
    k = A.k - 1
    params = {**p.as_dict(), "n": A.n, "d": args.d}
    m_d = plan.working_dim(k, args.d, p)
    gr = p.gr_dim if p.gr_dim is not None else plan.gr_dim(k, m_d)
    out = dichotomy_step(A, args.d, p, plan.schedule(k, args.d, p), m_d, gr)
    return _outcome(out, params)


def cmd_drive(args):
    A = _load_set(args.A)
    _need(args, "d")
    plan = _load_toy(args.toy_params) or TablePlan(_load_table(args.oracle_table))
    delta = args.delta if args.delta is not None else A.density()
    params = {"k": A.k - 1, "n": A.n, "d": args.d, "delta": delta, "round_cap": args.rounds,
              "flag": "toy" if isinstance(plan, ToyPlan) else "derived"}
    res = dhj_driver(A, delta, args.d, plan, args.rounds)
    report = res.to_json()
    cert = {"rounds": res.rounds, "densities": res.densities, "embedding": str(res.embedding)}
    if res.status == "line_found":
        cert["line_inside_set"] = all(w in A for w in res.line.points())
        return OK, params, "line_found", {"line": str(res.line)}, cert, report
    if res.failure is not None:
        cert.update(stage=res.failure.stage, reason=res.failure.reason)
    return NEGATIVE, params, res.status, {}, cert, report


def cmd_bounds(args):
    _need(args, "k", "delta")
    table = _load_table(args.oracle_table)
    params = {"k": args.k, "delta": args.delta, "d": args.d}
    out: dict = {}
    try:
        p = base_params(args.k, args.delta, table)
        out["params"] = p.as_dict()
        out["beta"] = fmt_q(p.beta)
        if args.m:
            out["mdhj_star"] = mdhj_star_bound(args.k, args.m, args.delta, table)
        if args.d:
            chain = N_of(args.k, args.d, args.delta, table)
            out["N"] = preview(chain.value)
            out["chain"] = [(name, preview(v) if isinstance(v, (int, Fraction)) else v)
                            for name, v in chain.chain]
    except MissingOracleValue as e:
        return NEGATIVE, params, "missing_oracle_value", out, {"missing": str(e)}, None
    except OverflowError as e:
        return NEGATIVE, params, "beyond_expansion", out, {"reason": str(e)}, None
    return OK, params, "computed", out, {}, None


def cmd_verify(args):
    if args.suite not in SUITES:
        raise InputError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    t = tallies(SUITES[args.suite](seed=args.seed))
    ok = all(p == n for p, n in t.values())
    if not args.json:
        for name, (p, n) in t.items():
            print(f"{'PASS' if p == n else 'FAIL'}  {name}: {p}/{n}")
    return (OK if ok else 1), {"suite": args.suite, "seed": args.seed}, \
        ("passed" if ok else "failed"), {}, {name: {"passed": p, "total": n}
                                              for name, (p, n) in t.items()}, None


COMMANDS = {
    "lines": cmd_lines, "density": cmd_density, "find-line": cmd_find_line,
    "find-subspace": cmd_find_subspace, "max-linefree": cmd_max_linefree, "dhj": cmd_dhj,
    "gr-search": cmd_gr_search, "uniformize": cmd_uniformize, "tile": cmd_tile,
    "correlate": cmd_correlate, "dichotomy": cmd_dichotomy, "drive": cmd_drive,
    "bounds": cmd_bounds, "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dhj", description="Combinatorial lines, line-free sets "
                                 "and density-increment procedures on [k]^n.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("suite", nargs="?", help="suite name for 'verify'")
    ap.add_argument("-k", type=int)
    ap.add_argument("-n", type=int)
    ap.add_argument("-A", metavar="WORDSET", help="wordset v1 file")
    ap.add_argument("--delta", type=_rational, metavar="P/Q")
    ap.add_argument("--beta", type=_rational, metavar="P/Q")
    ap.add_argument("--eps", type=_rational, metavar="P/Q")
    ap.add_argument("--m", type=int)
    ap.add_argument("--d", type=int)
    ap.add_argument("--M1", type=int, help="tiling block width")
    ap.add_argument("--letter", type=int, default=1, help="letter i of an (i,k+1)-insensitive set")
    ap.add_argument("--subspace", help="variable word, for 'density'")
    ap.add_argument("--restricted", action="store_true", help="search V with V|k inside A")
    ap.add_argument("--list", action="store_true", help="list the lines for 'lines'")
    ap.add_argument("--horizon", type=int)
    ap.add_argument("--rounds", type=int, default=8, help="round cap for 'drive'")
    ap.add_argument("--budget-nodes", type=int)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--toy-params", metavar="JSON")
    ap.add_argument("--oracle-table", metavar="FILE")
    ap.add_argument("--json", action="store_true", help="print the JSON report")
    return ap


def _print_text(report: dict) -> None:
    print(f"{report['command']}: {report['outcome']}")
    for key, value in report["witnesses"].items():
        if isinstance(value, list) and len(value) > 12:
            value = value[:12] + [f"... ({len(value)} total)"]
        print(f"  {key}: {value}")
    for key, value in report["certificate"].items():
        print(f"  [{key}] {value}")


def run(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.command == "verify" and not args.suite:
            ap.error("verify needs a suite name")
        if args.command != "verify" and args.suite:
            ap.error(f"unexpected argument {args.suite!r}")
    except SystemExit as e:  # argparse reports usage errors (and --help) this way
        return USAGE if e.code else OK
    start = time.perf_counter()
    try:
        code, params, outcome, wit, cert, trace = COMMANDS[args.command](args)
    except (InputError, WordsetError, MissingOracleValue, ValueError) as e:
        print(f"dhj {args.command}: error: {e}", file=sys.stderr)
        return USAGE
    except BudgetExhausted as e:
        code, params, outcome, wit, cert, trace = NEGATIVE, {}, "budget_exhausted", {}, \
            {"reason": str(e), "nodes": e.nodes}, None
    report = make_report(args.command, params, outcome, wit, cert, trace,
                         time.perf_counter() - start)
    if args.json:
        print(json.dumps(report, indent=2))
    elif args.command != "verify":
        _print_text(report)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
