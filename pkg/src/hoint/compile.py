"""Compiling localized flat imperative procedures to terms.

A procedure over base variables v1..vn (number parameters first, then
locals, with functional parameters lifted out in front) becomes

    \\F... \\s. case CHAIN(s) of Tup_n(v1, ..., vn) -> v_ret

where each instruction turns into a state transformer of type
Tup_n -> Tup_n and CHAIN applies them in program order:

  * `v_i := E`          rebuilds the tuple with E compiled in slot i;
  * `loop v_i { II* }`  a recursive walk over the digits of a copy of
                        v_i, applying the body transformer once per
                        digit (so |v_i| times);
  * `if E {..} else {..}`  a case on E's digits: 0 selects the else
                        branch, any digit the then branch.

Expressions map homomorphically onto the numeric operators; a chkbd
with several bound variables takes the pointwise minimum of them.
Calls to functional parameters become curried applications.
"""

from __future__ import annotations

from dataclasses import dataclass

from .btlp import (Add, ArgExpr, ArgLam, Call, Const, EVar, Expr, Param,
                   Smash, Sub)
from .eval import EvalResult, evaluate, numeric_readback
from .terms import (App, Arrow, Base, Branch, Case, Cons, Lam, LetRec, Op,
                    Signature, Term, Type, Var, decode_num, default_signature,
                    encode_num, fresh_name, make_app)
from .transform import (Chkbd, Cut, IAssign, IIf, ILoop, IInstr, IProc, Mul,
                        TransformError)

D = Base("D")


class CompileError(Exception):
    pass


@dataclass
class CompiledProc:
    """A compiled procedure: apply `term` to one term per functional
    parameter (in order), then to a `tuple_cons` tuple holding the
    number parameters followed by zeros for the locals."""
    name: str
    term: Term
    sig: Signature
    tuple_cons: str
    slots: tuple[str, ...]               # tuple variable order
    ret_index: int                       # 0-based slot of the result
    fun_params: tuple[Param, ...]        # functional parameters, in order
    num_params: tuple[str, ...]


def _btlp_type(ty: Type) -> Type:
    """Base numbers keep their type; arrows map structurally."""
    if isinstance(ty, Arrow):
        return Arrow(_btlp_type(ty.left), _btlp_type(ty.right))
    return D


def compile_proc(proc: IProc, sig: Signature | None = None) -> CompiledProc:
    """Compile a localized flat procedure (no annotations, barriers,
    or calls except to functional parameters) into a closed term."""
    if proc.subprocs:
        raise CompileError(f"{proc.name}: unfold calls before compiling")
    sig = sig if sig is not None else default_signature()

    fun_params = tuple(p for p in proc.params if isinstance(p.ty, Arrow))
    num_params = tuple(p.name for p in proc.params
                       if not isinstance(p.ty, Arrow))
    slots = num_params + tuple(proc.locals)
    n = len(slots)
    if len(set(slots)) != n:
        raise CompileError(f"{proc.name}: duplicate variable names")
    if proc.ret not in slots:
        raise CompileError(f"{proc.name}: unknown return variable")
    tup = sig.register_tuple(n)
    tup_ty = Base(tup)
    index = {v: i for i, v in enumerate(slots)}
    fun_names = {p.name for p in fun_params}

    def expr(e: Expr) -> Term:
        match e:
            case Const(v):
                return encode_num(v)
            case EVar(v):
                if v in index or v in fun_names:
                    return Var(v)
                raise CompileError(f"{proc.name}: unknown variable {v}")
            case Add(a, b):
                return make_app(Op("+"), [expr(a), expr(b)])
            case Sub(a, b):
                return make_app(Op("-"), [expr(a), expr(b)])
            case Smash(a, b):
                return make_app(Op("#"), [expr(a), expr(b)])
            case Mul(a, b):
                return make_app(Op("*"), [expr(a), expr(b)])
            case Cut(a):
                return App(Op("cut"), expr(a))
            case Chkbd(a, bounds):
                if not bounds:
                    return expr(a)
                return make_app(Op("chkbd"), [expr(a), _min_term(bounds)])
            case Call(f, args):
                if f not in fun_names:
                    raise CompileError(f"{proc.name}: residual call to {f}")
                return make_app(Var(f), [arg_term(a) for a in args])
        raise CompileError(f"{proc.name}: bad expression {e!r}")

    def arg_term(a) -> Term:
        match a:
            case ArgExpr(e):
                return expr(e)
            case ArgLam(params, head, hargs):
                body: Term = Var(head) if not hargs else \
                    make_app(Var(head), [Var(v) for v in hargs])
                for p in reversed(params):
                    body = Lam(p, body, D)
                return body
        raise CompileError(f"{proc.name}: bad argument {a!r}")

    def _min_term(bounds: frozenset[str]) -> Term:
        vs = sorted(bounds)
        terms = [Var(v) for v in vs]
        if len(terms) == 1:
            return terms[0]
        if len(terms) == 3:
            return make_app(Op("min3"), terms)
        out = terms[-1]
        for t in reversed(terms[:-1]):
            out = make_app(Op("min2"), [t, out])
        return out

    def with_state(body_of_vars) -> Term:
        """\\s. case s of Tup(v1..vn) -> body(Tup v1 .. vn).

        The continuation is handed a tuple rebuilt from the bound slot
        variables rather than the binder itself: the binder names the
        still-unevaluated incoming state, and with call-by-name chaining
        every extra mention of it would be re-run from scratch (one
        fresh forcing per conditional per iteration — exponential).
        The rebuilt tuple carries the same slots but re-forces in one
        step."""
        s = fresh_name("s")
        rebuilt = make_app(Cons(tup), [Var(v) for v in slots])
        return Lam(s, Case(Var(s), (Branch(tup, slots,
                                           body_of_vars(rebuilt)),)), tup_ty)

    def chain(instrs: tuple[IInstr, ...], state: Term) -> Term:
        for ins in instrs:
            state = App(icmp(ins), state)
        return state

    def icmp(ins: IInstr) -> Term:
        match ins:
            case IAssign(v, e, _):
                if v not in index:
                    raise CompileError(f"{proc.name}: cannot assign {v}")
                parts = [expr(EVar(w)) if w != v else expr(e) for w in slots]
                return with_state(lambda s: make_app(Cons(tup), parts))
            case ILoop(g, body):
                if g not in index:
                    raise CompileError(f"{proc.name}: unknown guard {g}")
                f = fresh_name("f")
                t = fresh_name("t")
                t2 = fresh_name("t")
                s2 = fresh_name("s")
                step = lambda rest: make_app(
                    Var(f), [Var(rest), chain(body, Var(s2))])
                walker = LetRec(
                    f,
                    Lam(t, Lam(s2, Case(Var(t), (
                        Branch("Eps", (), Var(s2)),
                        Branch("D0", (t2,), step(t2)),
                        Branch("D1", (t2,), step(t2)),
                    )), tup_ty), D),
                    Arrow(D, Arrow(tup_ty, tup_ty)))
                return with_state(
                    lambda s: make_app(walker, [Var(g), s]))
            case IIf(c, then, els):
                return with_state(lambda s: Case(expr(c), (
                    Branch("Eps", (), chain(els, s)),
                    Branch("D0", (fresh_name("t"),), chain(then, s)),
                    Branch("D1", (fresh_name("t"),), chain(then, s)),
                )))
        raise CompileError(f"{proc.name}: bad instruction {ins!r}")

    s0 = fresh_name("s")
    core: Term = Lam(s0, Case(chain(proc.body, Var(s0)),
                              (Branch(tup, slots, Var(proc.ret)),)), tup_ty)
    for p in reversed(fun_params):
        core = Lam(p.name, core, _btlp_type(p.ty))
    return CompiledProc(proc.name, core, sig, tup, slots, index[proc.ret],
                        fun_params, num_params)


def compiled_apply(cp: CompiledProc, args: list[int],
                   fun_args: list[Term] | None = None) -> Term:
    """The application of the compiled term to encoded arguments (and
    terms for the functional parameters, if any)."""
    fun_args = list(fun_args or [])
    if len(fun_args) != len(cp.fun_params):
        raise CompileError(f"{cp.name} wants {len(cp.fun_params)} "
                           f"functional argument(s)")
    if len(args) != len(cp.num_params):
        raise CompileError(f"{cp.name} wants {len(cp.num_params)} "
                           f"number argument(s)")
    locals_n = len(cp.slots) - len(cp.num_params)
    state = make_app(Cons(cp.tuple_cons),
                     [encode_num(a) for a in args]
                     + [encode_num(0) for _ in range(locals_n)])
    return make_app(cp.term, fun_args + [state])


def compiled_run(cp: CompiledProc, args: list[int],
                 fun_args: list[Term] | None = None,
                 fuel: int | None = None) -> tuple[int, EvalResult]:
    """Evaluate the compiled procedure on numbers; returns the decoded
    result and the full evaluation record."""
    t = compiled_apply(cp, args, fun_args)
    kwargs = {} if fuel is None else {"fuel": fuel}
    res = evaluate(t, cp.sig, **kwargs)
    if res.status != "value":
        raise CompileError(f"{cp.name}: evaluation {res.status}")
    out = numeric_readback(res.term, cp.sig)
    if out is None:
        out = decode_num(res.term)
    return out, res


# ---------------------------------------------------------------------------
# sample functionals

def sample_functionals() -> dict[str, tuple[object, Term]]:
    """Named order-2 sample arguments, usable both on the imperative side
    (host callables) and on the term side (closed terms of (D->D)->D):

        F1 g = g(0) + 1
        F2 g = g(g(0))
        F3 g = g(1) + g(0)
    """
    from .btlp import HostFun
    g_ty = Arrow(D, D)

    def lam(body: Term) -> Term:
        return Lam("g", body, g_ty)

    terms = {
        "F1": lam(make_app(Op("+"), [App(Var("g"), encode_num(0)),
                                     encode_num(1)])),
        "F2": lam(App(Var("g"), App(Var("g"), encode_num(0)))),
        "F3": lam(make_app(Op("+"), [App(Var("g"), encode_num(1)),
                                     App(Var("g"), encode_num(0))])),
    }
    hosts = {
        "F1": HostFun(lambda g: g(0) + 1, "F1"),
        "F2": HostFun(lambda g: g(g(0)), "F2"),
        "F3": HostFun(lambda g: g(1) + g(0), "F3"),
    }
    return {k: (hosts[k], terms[k]) for k in terms}
