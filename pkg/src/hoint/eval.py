"""Leftmost-outermost evaluation with step counting.

Redexes, in priority order at each node:
  * letRec f = M  unfolds at the root;
  * case: fires when the scrutinee is a constructor spine matching a branch,
    binding the raw argument terms; otherwise the scrutinee is reduced;
  * application: beta at the root; operator spines at exact arity rewrite in
    one step to the numeral the operator computes (operands are read back,
    never pre-evaluated; unreadable operands make the operator return 0);
    otherwise reduce the function part, then the argument.
Nothing reduces under a lambda.

Non-operator steps (beta, case, letRec) are the cost that interpretations
bound; operator steps are counted separately and may only keep the
interpretation level, not raise it.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from .terms import (App, Case, Cons, Lam, LetRec, Op, ResourceLimit,
                    Signature, Term, Var, decode_num, encode_num, is_value,
                    spine, subst)

# substitution and stepping recurse over term depth; numerals are one node
# per binary digit, so give deep-but-narrow terms room
sys.setrecursionlimit(max(sys.getrecursionlimit(), 100_000))

DEFAULT_FUEL = int(os.environ.get("HOINT_FUEL", "1000000"))


def numeric_readback(t: Term, sig: Signature) -> Optional[int]:
    """Read a raw term as a number: numerals directly, operator spines by
    computing; anything else is undefined."""
    head, args = spine(t)
    if isinstance(head, Cons):
        try:
            return decode_num(t)
        except ValueError:
            return None
    if (isinstance(head, Op) and sig.is_op(head.name)
            and len(args) == sig.op_arity(head.name)):
        vals = [numeric_readback(a, sig) for a in args]
        if any(v is None for v in vals):
            return None
        return sig.ops[head.name].fn(*vals)
    return None


def _join(idx: int, sub: str) -> str:
    return str(idx) if sub == "" else f"{idx}.{sub}"


def step(t: Term, sig: Signature) -> Optional[tuple[Term, str, str]]:
    """One reduction step: (new term, rule, position) or None if normal."""
    match t:
        case Var(_) | Cons(_) | Op(_) | Lam(_, _, _):
            return None
        case LetRec(f, body, _, _):
            return subst(body, f, t), "letrec", ""
        case Case(scrut, branches):
            head, args = spine(scrut)
            if isinstance(head, Cons):
                for br in branches:
                    if br.cons == head.name and len(br.vars) == len(args):
                        out = br.body
                        for v, a in zip(br.vars, args):
                            out = subst(out, v, a)
                        return out, "case", ""
            r = step(scrut, sig)
            if r is not None:
                return Case(r[0], branches), r[1], _join(0, r[2])
            return None
        case App(fun, arg):
            if isinstance(fun, Lam):
                return subst(fun.body, fun.var, arg), "beta", ""
            head, args = spine(t)
            op_redex = (isinstance(head, Op) and sig.is_op(head.name)
                        and len(args) == sig.op_arity(head.name))
            if op_redex:
                vals = [numeric_readback(a, sig) for a in args]
                if not any(v is None for v in vals):
                    return encode_num(sig.ops[head.name].fn(*vals)), "op", ""
            r = step(fun, sig)
            if r is not None:
                return App(r[0], arg), r[1], _join(0, r[2])
            r = step(arg, sig)
            if r is not None:
                return App(fun, r[0]), r[1], _join(1, r[2])
            if op_redex:
                # operands are normal but not numbers: totalized as 0
                return encode_num(0), "op", ""
            return None
    raise TypeError(f"not a term: {t!r}")


@dataclass
class TraceEntry:
    rule: str
    position: str
    term: Term


@dataclass
class EvalResult:
    term: Term
    status: str                 # value | normal | fuel-exhausted | resource-limit
    non_op: int = 0
    op_steps: int = 0
    trace: Optional[list[TraceEntry]] = field(default=None)

    @property
    def steps(self) -> int:
        return self.non_op + self.op_steps


def evaluate(t: Term, sig: Signature, fuel: int = DEFAULT_FUEL,
             trace: bool = False) -> EvalResult:
    non_op = 0
    op_steps = 0
    tr: Optional[list[TraceEntry]] = [] if trace else None
    for _ in range(fuel):
        try:
            r = step(t, sig)
        except ResourceLimit:
            return EvalResult(t, "resource-limit", non_op, op_steps, tr)
        if r is None:
            status = "value" if is_value(t, sig) else "normal"
            return EvalResult(t, status, non_op, op_steps, tr)
        t, rule, pos = r
        if rule == "op":
            op_steps += 1
        else:
            non_op += 1
        if tr is not None:
            tr.append(TraceEntry(rule, pos, t))
    return EvalResult(t, "fuel-exhausted", non_op, op_steps, tr)
