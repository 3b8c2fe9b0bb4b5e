"""Simple types for terms.

Constructors and operators have first-order signatures (base arguments,
base result) and are used curried.  Inference needs every fun/letRec
binder annotated; the error message says which binder is missing one.
"""

from __future__ import annotations

from .terms import (App, Arrow, Base, Case, Cons, Lam, LetRec, Op, Signature,
                    Term, Type, Var, pretty)


class TypecheckError(Exception):
    pass


def _symbol_type(args: tuple[str, ...], result: str) -> Type:
    ty: Type = Base(result)
    for a in reversed(args):
        ty = Arrow(Base(a), ty)
    return ty


def infer(t: Term, sig: Signature, env: dict[str, Type] | None = None,
          record: dict[int, Type] | None = None) -> Type:
    """Infer the type of t.  If `record` is given, it is filled with the
    type of every subterm, keyed by node identity."""
    env = env or {}

    def go(t: Term, env: dict[str, Type]) -> Type:
        ty = _go(t, env)
        if record is not None:
            record[id(t)] = ty
        return ty

    def _go(t: Term, env: dict[str, Type]) -> Type:
        match t:
            case Var(x):
                if x not in env:
                    raise TypecheckError(f"unbound variable {x.split('#')[0]}")
                return env[x]
            case Cons(c):
                if not sig.is_cons(c):
                    raise TypecheckError(f"unknown constructor {c}")
                d = sig.cons[c]
                return _symbol_type(d.args, d.result)
            case Op(o):
                if not sig.is_op(o):
                    raise TypecheckError(f"unknown operator {o}")
                d = sig.ops[o]
                return _symbol_type(d.args, d.result)
            case App(f, a):
                tf = go(f, env)
                ta = go(a, env)
                if not isinstance(tf, Arrow):
                    raise TypecheckError(
                        f"cannot apply non-function {pretty(f)} : {tf}")
                if tf.left != ta:
                    raise TypecheckError(
                        f"argument {pretty(a)} has type {ta}, expected {tf.left}")
                return tf.right
            case Lam(x, body, ann):
                if ann is None:
                    raise TypecheckError(
                        f"binder {x.split('#')[0]} needs a type annotation")
                return Arrow(ann, go(body, {**env, x: ann}))
            case LetRec(x, body, ann, _):
                if ann is None:
                    raise TypecheckError(
                        f"letRec binder {x.split('#')[0]} needs a type annotation")
                tb = go(body, {**env, x: ann})
                if tb != ann:
                    raise TypecheckError(
                        f"letRec body has type {tb}, annotation says {ann}")
                return ann
            case Case(scrut, branches):
                ts = go(scrut, env)
                if not isinstance(ts, Base):
                    raise TypecheckError(
                        f"case scrutinee has non-base type {ts}")
                result: Type | None = None
                seen: set[str] = set()
                for br in branches:
                    if not sig.is_cons(br.cons):
                        raise TypecheckError(f"unknown constructor {br.cons}")
                    d = sig.cons[br.cons]
                    if d.result != ts.name:
                        raise TypecheckError(
                            f"branch {br.cons} builds {d.result}, scrutinee is {ts}")
                    if br.cons in seen:
                        raise TypecheckError(f"duplicate branch {br.cons}")
                    seen.add(br.cons)
                    if len(br.vars) != len(d.args):
                        raise TypecheckError(
                            f"branch {br.cons} binds {len(br.vars)} variables, "
                            f"constructor takes {len(d.args)}")
                    inner = dict(env)
                    inner.update({v: Base(a) for v, a in zip(br.vars, d.args)})
                    tb = go(br.body, inner)
                    if result is None:
                        result = tb
                    elif tb != result:
                        raise TypecheckError(
                            f"branch {br.cons} has type {tb}, others have {result}")
                if result is None:
                    raise TypecheckError("case with no branches")
                return result
        raise TypecheckError(f"not a term: {t!r}")

    return go(t, env)


def check(t: Term, ty: Type, sig: Signature,
          env: dict[str, Type] | None = None) -> None:
    got = infer(t, sig, env)
    if got != ty:
        raise TypecheckError(f"term has type {got}, expected {ty}")
