"""Command-line front end.

    hoint typecheck FILE                     print the inferred type
    hoint eval FILE [--fuel N] [--trace OUT] evaluate a closed term
    hoint check FILE --candidates C.json     pre-fixpoint checks only
    hoint certify FILE [--candidates C.json] [--poly EXPR]
                                             checks plus a level bound
    hoint btlp-run FILE --args JSON          run a procedure file
    hoint flatten FILE [--emit STAGE]        STAGE: annotated|flat|local
    hoint compile FILE [-o OUT]              emit the compiled term
    hoint pipeline FILE [--exhaustive A..B]  differential over all stages
    hoint corpus [DIR]                       run the example manifest

Exit codes: 0 success, 1 semantic failure (type error, failed check,
mismatch, non-value evaluation), 2 usage error.  Reports are JSON with
sorted keys and no wall-clock content, so reruns are byte-identical.
The --args JSON list holds numbers, plus "@F1" / "@F2" / "@F3" for
functional parameters (see `sample_functionals`).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .btlp import BtlpError, HostFun, Proc, parse_btlp, run_proc
from .compile import (CompileError, compile_proc, compiled_run,
                      sample_functionals)
from .domain import Grid, TOP, InterpError
from .eval import DEFAULT_FUEL, evaluate
from .parser import ParseError, parse_term
from .poly import PolyError, certify, load_candidate_file, parse_poly
from .terms import (Arrow, ResourceLimit, default_signature, pretty,
                    set_bit_limit)
from .transform import (TransformError, annotate, flatten, localize,
                        iproc_pretty, run_iproc)
from .typecheck import TypecheckError, infer


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as e:
        raise UsageError(str(e))


def _emit(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _grid(path: str | None) -> Grid:
    if not path:
        return Grid()
    spec = json.loads(_read(path))
    base = tuple(TOP if v == "top" else int(v) for v in spec.get("base", []))
    return Grid(base=base) if base else Grid()


def _parse_range(spec: str) -> range:
    lo, _, hi = spec.partition("..")
    try:
        return range(int(lo), int(hi) + 1)
    except ValueError:
        raise UsageError(f"bad range {spec!r}, expected like 0..7")


def _positions(n: int, r: range) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = [()]
    for _ in range(n):
        out = [t + (v,) for t in out for v in r]
    return out


# ---------------------------------------------------------------------------
# subcommands


def _cmd_typecheck(ns) -> int:
    sig = default_signature()
    t = parse_term(_read(ns.file), sig)
    ty = infer(t, sig)
    from .terms import type_order
    _emit({
        "command": "typecheck",
        "inputs": {"file": ns.file},
        "verdicts": {"type": str(ty), "order": type_order(ty)},
        "counters": {},
        "witnesses": [],
        "timing": {},
    }, getattr(ns, "report", None))
    return 0


def _cmd_eval(ns) -> int:
    sig = default_signature()
    t = parse_term(_read(ns.file), sig)
    res = evaluate(t, sig, fuel=ns.fuel, trace=bool(ns.trace))
    report = {
        "command": "eval",
        "inputs": {"file": ns.file, "fuel": ns.fuel},
        "verdicts": {"status": res.status},
        "counters": {"non_op": res.non_op, "op_steps": res.op_steps},
        "timing": {"steps": res.steps},
        "result": pretty(res.term),
    }
    _emit(report, ns.report)
    if ns.trace:
        entries = [{"rule": e.rule, "position": e.position,
                    "term": pretty(e.term)} for e in (res.trace or [])]
        with open(ns.trace, "w") as fh:
            json.dump(entries, fh, indent=2)
            fh.write("\n")
    return 0 if res.status == "value" else 1


def _check_report(cmd: str, ns, rep) -> dict:
    failures = []
    for r in rep.letrecs:
        if r.witness is not None:
            failures.append({
                "path": r.path,
                "point": str(r.witness.args),
                "lhs": str(r.witness.lhs),
                "rhs": str(r.witness.rhs),
            })
    if rep.bound_witness is not None:
        failures.append({
            "path": "<bound>",
            "point": str(rep.bound_witness.args),
            "lhs": str(rep.bound_witness.lhs),
            "rhs": str(rep.bound_witness.rhs),
        })
    return {
        "command": cmd,
        "inputs": {"file": ns.file, "candidates": ns.candidates,
                   "poly": getattr(ns, "poly", None)},
        "verdicts": {"verdict": rep.verdict,
                     "grid_relative": True,
                     "extended": rep.extended},
        "counters": {"letrec_checks": len(rep.letrecs)},
        "witnesses": failures,
        "timing": {},
        "detail": rep.to_json(),
    }


def _cmd_check(ns) -> int:
    sig = default_signature()
    t = parse_term(_read(ns.file), sig)
    grid = _grid(ns.grid)
    cands = load_candidate_file(t, ns.candidates, sig, grid)
    rep = certify(t, sig, cands, None, grid=grid, lfp_fuel=ns.lfp_fuel)
    _emit(_check_report("check", ns, rep), ns.report)
    return 0 if rep.verdict == "holds-on-grid" else 1


def _cmd_certify(ns) -> int:
    sig = default_signature()
    t = parse_term(_read(ns.file), sig)
    grid = _grid(ns.grid)
    cands = (load_candidate_file(t, ns.candidates, sig, grid)
             if ns.candidates else [])
    poly = parse_poly(ns.poly) if ns.poly else None
    rep = certify(t, sig, cands, poly, grid=grid, lfp_fuel=ns.lfp_fuel)
    _emit(_check_report("certify", ns, rep), ns.report)
    return 0 if rep.verdict == "holds-on-grid" else 1


def _parse_args_json(spec: str, want_terms: bool):
    """JSON argument vector: numbers stay numbers, "@NAME" pulls a sample
    functional (host callable, or its term form when want_terms)."""
    try:
        vals = json.loads(spec)
    except json.JSONDecodeError as e:
        raise UsageError(f"--args is not JSON: {e}")
    if not isinstance(vals, list):
        raise UsageError("--args must be a JSON list")
    reg = sample_functionals()
    out = []
    for v in vals:
        if isinstance(v, bool) or not isinstance(v, (int, str)):
            raise UsageError(f"bad argument {v!r}")
        if isinstance(v, str):
            if not v.startswith("@") or v[1:] not in reg:
                raise UsageError(f"unknown functional {v!r}; "
                                 f"have {sorted('@' + k for k in reg)}")
            host, term = reg[v[1:]]
            out.append(term if want_terms else host)
        else:
            out.append(v)
    return out


def _cmd_btlp_run(ns) -> int:
    procs = parse_btlp(_read(ns.file))
    args = _parse_args_json(ns.args, want_terms=False)
    res = run_proc(procs, args)
    report = {
        "command": "btlp-run",
        "inputs": {"file": ns.file, "args": json.loads(ns.args)},
        "verdicts": {},
        "counters": {"assigns": res.assigns},
        "timing": {"assigns": res.assigns},
        "result": res.value,
    }
    _emit(report, ns.report)
    return 0


def _cmd_flatten(ns) -> int:
    procs = parse_btlp(_read(ns.file))
    if ns.emit == "annotated":
        out = "\n\n".join(iproc_pretty(annotate(p)) for p in procs)
    else:
        flat = flatten(procs)
        out = iproc_pretty(flat if ns.emit == "flat" else localize(flat))
    print(out)
    return 0


def _cmd_compile(ns) -> int:
    procs = parse_btlp(_read(ns.file))
    cp = compile_proc(localize(flatten(procs)))
    text = pretty(cp.term) + "\n"
    if ns.output:
        with open(ns.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if ns.report:
        _emit({
            "command": "compile",
            "inputs": {"file": ns.file},
            "verdicts": {},
            "counters": {"slots": len(cp.slots)},
            "timing": {},
            "proc": {
                "name": cp.name,
                "tuple_cons": cp.tuple_cons,
                "slots": list(cp.slots),
                "ret_index": cp.ret_index,
                "fun_params": [p.name for p in cp.fun_params],
                "num_params": list(cp.num_params),
            },
        }, ns.report)
    return 0


def _pipeline_inputs(entry: Proc, r: range):
    """Input vectors for the differential: numeric params range over r,
    arrow params over the sample-functional registry."""
    reg = sample_functionals()
    vecs: list[list] = [[]]
    for p in entry.params:
        if isinstance(p.ty, Arrow):
            vecs = [v + [name] for v in vecs for name in sorted(reg)]
        else:
            vecs = [v + [n] for v in vecs for n in r]
    return vecs


def _cmd_pipeline(ns) -> int:
    procs = parse_btlp(_read(ns.file))
    entry = procs[-1]
    ann = [annotate(p) for p in procs]
    flat = flatten(procs)
    loc = localize(flat)
    cp = compile_proc(loc)
    reg = sample_functionals()

    r = _parse_range(ns.exhaustive)
    vecs = _pipeline_inputs(entry, r)
    mismatches = []
    comparisons = 0
    assigns_total = 0
    non_op_total = 0
    for vec in vecs:
        host_args = [reg[v][0] if isinstance(v, str) else v for v in vec]
        fun_args = [reg[v][1] for v in vec if isinstance(v, str)]
        num_args = [v for v in vec if not isinstance(v, str)]
        ref = run_proc(procs, host_args)
        stage_vals = {"btlp": ref.value}
        stage_vals["annotated"] = run_iproc(ann, host_args).value
        stage_vals["flat"] = run_iproc(flat, host_args).value
        stage_vals["local"] = run_iproc(loc, host_args).value
        cval, cres = compiled_run(cp, num_args, fun_args=fun_args,
                                  fuel=ns.fuel)
        stage_vals["compiled"] = cval
        comparisons += len(stage_vals)
        assigns_total += ref.assigns
        non_op_total += cres.non_op
        if len(set(stage_vals.values())) != 1:
            mismatches.append({"input": vec, "values": stage_vals})
    report = {
        "command": "pipeline",
        "inputs": {"file": ns.file, "exhaustive": ns.exhaustive,
                   "samples": len(vecs)},
        "verdicts": {"verdict": "pass" if not mismatches else "fail",
                     "agreed": len(vecs) - len(mismatches)},
        "counters": {"comparisons": comparisons,
                     "reference_assigns": assigns_total,
                     "compiled_non_op": non_op_total},
        "witnesses": mismatches,
        "timing": {"compiled_steps": non_op_total},
    }
    _emit(report, ns.report)
    return 0 if not mismatches else 1


def _cmd_corpus(ns) -> int:
    root = ns.dir
    manifest = json.loads(_read(os.path.join(root, "manifest.json")))
    sig = default_signature()
    results = []
    ok = True
    for entry in manifest:
        name = entry["file"]
        path = os.path.join(root, name)
        kind = entry["kind"]
        try:
            if kind == "eval":
                t = parse_term(_read(path), sig)
                res = evaluate(t, sig, fuel=entry.get("fuel", ns.fuel))
                got = res.status
            elif kind == "certify":
                t = parse_term(_read(path), sig)
                cands = load_candidate_file(
                    t, os.path.join(root, entry["candidates"]), sig)
                got = certify(t, sig, cands, None).verdict
            elif kind == "pipeline":
                sub = argparse.Namespace(
                    file=path, exhaustive=entry.get("exhaustive", "0..3"),
                    fuel=ns.fuel, report=os.devnull)
                got = "pass" if _cmd_pipeline(sub) == 0 else "fail"
            else:
                raise UsageError(f"unknown corpus kind {kind!r}")
        except (ParseError, TypecheckError, BtlpError, TransformError,
                CompileError, PolyError, InterpError, ResourceLimit) as e:
            got = f"error: {e}"
        want = entry["expect"]
        good = got == want
        ok = ok and good
        results.append({"file": name, "kind": kind,
                        "expect": want, "got": got,
                        "verdict": "pass" if good else "fail"})
        print(f"{'PASS' if good else 'FAIL'} {name} [{kind}] "
              f"expected {want!r}, got {got!r}")
    if ns.report:
        _emit({
            "command": "corpus",
            "inputs": {"dir": root},
            "verdicts": {"verdict": "pass" if ok else "fail"},
            "counters": {"entries": len(results)},
            "witnesses": [r for r in results if r["verdict"] != "pass"],
            "timing": {},
            "results": results,
        }, ns.report)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hoint", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, fuel=True):
        if fuel:
            p.add_argument("--fuel", type=int, default=DEFAULT_FUEL,
                           help="step budget (default env HOINT_FUEL "
                                "or 1000000)")
        p.add_argument("--limit-bits", type=int, default=None,
                       help="bit budget for # and (x) results")
        p.add_argument("--report", default=None,
                       help="write the JSON report here instead of stdout")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomized helpers (reports never "
                            "depend on it)")

    p = sub.add_parser("typecheck", help="infer the type of a term file")
    p.add_argument("file")
    common(p, fuel=False)
    p.set_defaults(fn=_cmd_typecheck)

    p = sub.add_parser("eval", help="evaluate a closed term file")
    p.add_argument("file")
    p.add_argument("--trace", default=None,
                   help="write a step trace JSON here")
    common(p)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("check", help="pre-fixpoint checks for candidates")
    p.add_argument("file")
    p.add_argument("--candidates", required=True)
    p.add_argument("--grid", default=None)
    p.add_argument("--lfp-fuel", type=int, default=64)
    common(p, fuel=False)
    p.set_defaults(fn=_cmd_check)

    p = sub.add_parser("certify",
                       help="candidate checks plus a level bound")
    p.add_argument("file")
    p.add_argument("--candidates", default=None)
    p.add_argument("--poly", default=None,
                   help="bound expression, e.g. '\\X:N. 6*X^2 + 5'")
    p.add_argument("--grid", default=None)
    p.add_argument("--lfp-fuel", type=int, default=64)
    common(p, fuel=False)
    p.set_defaults(fn=_cmd_certify)

    p = sub.add_parser("btlp-run", help="run a procedure file")
    p.add_argument("file")
    p.add_argument("--args", required=True,
                   help='JSON list, e.g. \'[3, 2]\' or \'["@F1", 5]\'')
    common(p, fuel=False)
    p.set_defaults(fn=_cmd_btlp_run)

    p = sub.add_parser("flatten", help="emit a rewrite stage")
    p.add_argument("file")
    p.add_argument("--emit", choices=("annotated", "flat", "local"),
                   default="local")
    common(p, fuel=False)
    p.set_defaults(fn=_cmd_flatten)

    p = sub.add_parser("compile", help="compile a procedure to a term")
    p.add_argument("file")
    p.add_argument("-o", "--output", default=None)
    common(p, fuel=False)
    p.set_defaults(fn=_cmd_compile)

    p = sub.add_parser("pipeline",
                       help="differential across all stages")
    p.add_argument("file")
    p.add_argument("--exhaustive", default="0..3",
                   help="numeric-parameter range, like 0..7")
    common(p)
    p.set_defaults(fn=_cmd_pipeline)

    p = sub.add_parser("corpus", help="run the example-file manifest")
    p.add_argument("dir", nargs="?", default="corpus")
    common(p)
    p.set_defaults(fn=_cmd_corpus)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = _build_parser()
    ns = ap.parse_args(argv)
    if getattr(ns, "limit_bits", None):
        set_bit_limit(ns.limit_bits)
    try:
        return ns.fn(ns)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except (ParseError, TypecheckError, BtlpError, TransformError,
            CompileError, PolyError, InterpError, ResourceLimit) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
