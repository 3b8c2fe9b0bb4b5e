"""Size-annotated imperative programs and the loop-flattening pipeline.

The annotated language replaces `Loop g with b` by an unbounded `loop g`
placed under an explicit size annotation `[ ... ]_b`: every assignment
executed under an annotation stores 0 instead when the assigned value's
size exceeds the current size of the annotation variable.  Three further
constructs appear only in transformed programs:

  * exempt assignments (`v :=! E`), which skip the annotation checks —
    used for transform-introduced bookkeeping and for inlined call
    argument passing, whose values never went through a checked store in
    the source program;
  * `barrier { ... }`, which hides all enclosing annotations — the body
    of an inlined procedure runs in a fresh store in the source program,
    so no caller-side size bound may reach into it;
  * `chkbd(E, {v...})` expressions, which evaluate E and replace the
    value by 0 when its size exceeds the size of any listed variable.

The pipeline turns any accepted bounded-loop procedure into a single
unnested loop:

  annotate   bounded loops  ->  annotated unbounded loops
  unfold_all procedure calls inlined (alpha-renamed, barrier-wrapped)
  flatten    loop merging (sequential pairs) and loop unnesting
             (inner loop spliced into its parent) until one loop is left
  localize   annotations compiled away into chkbd expressions

Each stage preserves the computed value; the executed-assignment count
grows only by bookkeeping proportional to the original count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .btlp import (Add, Arg, ArgExpr, ArgLam, Assign, BtlpError, Call, Const,
                   EVar, Expr, If, Instr, Loop, Param, Proc, RunResult, Smash,
                   Sub, HostFun)
from .terms import Arrow, Base, Type, nsize, num_chkbd, num_cut, num_monus, \
    num_smash, num_szsmash


class TransformError(Exception):
    pass


# ---------------------------------------------------------------------------
# syntax: extra expressions and the instruction forms


@dataclass(frozen=True)
class Mul(Expr):
    """Size smash: 2^(|left| + |right|)."""
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Cut(Expr):
    """Drop the least significant digit: |cut(e)| = |e| - 1."""
    arg: Expr


@dataclass(frozen=True)
class Chkbd(Expr):
    """Value of `arg`, or 0 when its size exceeds any bound variable's."""
    arg: Expr
    bounds: frozenset[str] = frozenset()


class IInstr:
    pass


@dataclass(frozen=True)
class IAssign(IInstr):
    var: str
    expr: Expr
    exempt: bool = False


@dataclass(frozen=True)
class ILoop(IInstr):
    guard: str
    body: tuple[IInstr, ...]


@dataclass(frozen=True)
class IIf(IInstr):
    cond: Expr                       # nonzero selects the then branch
    then: tuple[IInstr, ...]
    els: tuple[IInstr, ...] = ()


@dataclass(frozen=True)
class IAnnot(IInstr):
    body: tuple[IInstr, ...]
    var: str


@dataclass(frozen=True)
class IBarrier(IInstr):
    body: tuple[IInstr, ...]


@dataclass(frozen=True)
class IProc:
    name: str
    params: tuple[Param, ...]
    subprocs: tuple["IProc", ...]
    locals: tuple[str, ...]
    body: tuple[IInstr, ...]
    ret: str


# ---------------------------------------------------------------------------
# annotation introduction


def annotate(proc: Proc) -> IProc:
    """Introduce explicit size annotations: each `Loop g with b` becomes
    `[loop g {...}]_b`, and each comparison `If E0 < E1` becomes a test
    that E1 - E0 is nonzero.  Value and assignment count are unchanged."""

    def instr(ins: Instr) -> IInstr:
        match ins:
            case Assign(v, e):
                return IAssign(v, e)
            case Loop(g, b, body):
                return IAnnot((ILoop(g, tuple(instr(i) for i in body)),), b)
            case If(l, r, then, els):
                return IIf(Sub(r, l), tuple(instr(i) for i in then),
                           tuple(instr(i) for i in els))
        raise TransformError(f"bad instruction {ins!r}")

    return IProc(proc.name, proc.params,
                 tuple(annotate(sp) for sp in proc.subprocs),
                 proc.locals, tuple(instr(i) for i in proc.body), proc.ret)


# ---------------------------------------------------------------------------
# interpretation


Value = Union[int, Callable]

_BARRIER = object()


@dataclass
class _IState:
    env: dict[str, Value]
    limits: list = field(default_factory=list)   # annotation vars / barriers
    assigns: int = 0


def _active_limits(st: _IState):
    for entry in reversed(st.limits):
        if entry is _BARRIER:
            return
        yield entry


def _eval_iarg(a: Arg, st: _IState, run_call) -> Value:
    match a:
        case ArgExpr(e):
            return _eval_iexpr(e, st, run_call)
        case ArgLam(params, head, args):
            snapshot = dict(st.env)

            def fn(*vals):
                if len(vals) != len(params):
                    raise TransformError("lambda argument arity mismatch")
                local = dict(snapshot)
                local.update(zip(params, vals))
                target = local.get(head)
                if target is None:
                    raise TransformError(f"unbound {head} in lambda argument")
                if callable(target):
                    return target(*(local[v] for v in args))
                if args:
                    raise TransformError(f"number {head} applied to arguments")
                return target

            return fn
    raise TransformError(f"bad argument {a!r}")


def _eval_iexpr(e: Expr, st: _IState, run_call) -> Value:
    match e:
        case Const(v):
            return v
        case EVar(v):
            if v not in st.env:
                raise TransformError(f"unbound variable {v}")
            return st.env[v]
        case Add(a, b):
            return _eval_iexpr(a, st, run_call) + _eval_iexpr(b, st, run_call)
        case Sub(a, b):
            return num_monus(_eval_iexpr(a, st, run_call),
                             _eval_iexpr(b, st, run_call))
        case Smash(a, b):
            return num_smash(_eval_iexpr(a, st, run_call),
                             _eval_iexpr(b, st, run_call))
        case Mul(a, b):
            return num_szsmash(_eval_iexpr(a, st, run_call),
                               _eval_iexpr(b, st, run_call))
        case Cut(a):
            return num_cut(_eval_iexpr(a, st, run_call))
        case Chkbd(a, bounds):
            val = _eval_iexpr(a, st, run_call)
            for v in bounds:
                val = num_chkbd(val, st.env[v])
            return val
        case Call(f, args):
            return run_call(f, [_eval_iarg(a, st, run_call) for a in args], st)
    raise TransformError(f"bad expression {e!r}")


def _istore(st: _IState, var: str, val: int, exempt: bool) -> None:
    if not exempt:
        for v in _active_limits(st):
            if nsize(val) > nsize(st.env[v]):
                val = 0
                break
    st.env[var] = val
    st.assigns += 1


def _iexec(instrs: tuple[IInstr, ...], st: _IState, run_call) -> None:
    for ins in instrs:
        match ins:
            case IAssign(v, e, exempt):
                val = _eval_iexpr(e, st, run_call)
                if not isinstance(val, int):
                    raise TransformError(f"assigning a functional to {v}")
                _istore(st, v, val, exempt)
            case ILoop(g, body):
                val = st.env[g]
                if not isinstance(val, int):
                    raise TransformError(f"loop guard {g} is not a number")
                for _ in range(nsize(val)):       # sampled at entry
                    _iexec(body, st, run_call)
            case IIf(c, then, els):
                cv = _eval_iexpr(c, st, run_call)
                _iexec(then if cv != 0 else els, st, run_call)
            case IAnnot(body, v):
                st.limits.append(v)
                _iexec(body, st, run_call)
                st.limits.pop()
            case IBarrier(body):
                st.limits.append(_BARRIER)
                _iexec(body, st, run_call)
                st.limits.pop()
            case _:
                raise TransformError(f"bad instruction {ins!r}")


def run_iproc(procs: Union[list, IProc], args: list[Value],
              entry: str | None = None) -> RunResult:
    """Run an annotated procedure on argument values (numbers, and host
    callables for functional parameters)."""
    if isinstance(procs, IProc):
        procs = [procs]
    by_name = {p.name: p for p in procs}
    main = by_name[entry] if entry else procs[-1]

    counter = [0]

    def call(proc: IProc, vals: list[Value], visible: dict) -> int:
        if len(vals) != len(proc.params):
            raise TransformError(f"{proc.name} takes {len(proc.params)} "
                                 f"argument(s), got {len(vals)}")
        scope = dict(visible)
        for sp in proc.subprocs:
            scope[sp.name] = sp
        env: dict[str, Value] = {}
        for par, v in zip(proc.params, vals):
            env[par.name] = v
        for v in proc.locals:
            env[v] = 0                  # implicit, not a counted assignment
        st = _IState(env)

        def run_call(f: str, argvals: list[Value], _st: _IState) -> int:
            if f in scope:
                return call(scope[f], argvals, scope)
            target = env.get(f)
            if callable(target):
                return target(*argvals)
            raise TransformError(f"cannot call {f}")

        _iexec(proc.body, st, run_call)
        counter[0] += st.assigns
        out = st.env[proc.ret]
        if not isinstance(out, int):
            raise TransformError(f"{proc.name} returns a functional")
        return out

    visible: dict[str, IProc] = {}
    for p in procs:
        if p.name == main.name:
            break
        visible[p.name] = p
    value = call(main, list(args), visible)
    return RunResult(value, counter[0])


# ---------------------------------------------------------------------------
# helpers shared by the rewrites


class _Namer:
    def __init__(self, used: set[str]):
        self.used = set(used)

    def fresh(self, base: str) -> str:
        if base not in self.used:
            self.used.add(base)
            return base
        n = 2
        while f"{base}_{n}" in self.used:
            n += 1
        name = f"{base}_{n}"
        self.used.add(name)
        return name


def _expr_vars(e: Expr, out: set[str]) -> None:
    match e:
        case Const(_):
            pass
        case EVar(v):
            out.add(v)
        case Add(a, b) | Sub(a, b) | Smash(a, b) | Mul(a, b):
            _expr_vars(a, out)
            _expr_vars(b, out)
        case Cut(a):
            _expr_vars(a, out)
        case Chkbd(a, bounds):
            _expr_vars(a, out)
            out.update(bounds)
        case Call(_, args):
            for a in args:
                match a:
                    case ArgExpr(inner):
                        _expr_vars(inner, out)
                    case ArgLam(params, head, hargs):
                        out.add(head)
                        out.update(hargs)
            out.add(e.name)


def _names_in(p: IProc) -> set[str]:
    out: set[str] = {p.name, p.ret}
    out.update(par.name for par in p.params)
    out.update(p.locals)

    def walk(instrs):
        for ins in instrs:
            match ins:
                case IAssign(v, e, _):
                    out.add(v)
                    _expr_vars(e, out)
                case ILoop(g, body):
                    out.add(g)
                    walk(body)
                case IIf(c, then, els):
                    _expr_vars(c, out)
                    walk(then)
                    walk(els)
                case IAnnot(body, v):
                    out.add(v)
                    walk(body)
                case IBarrier(body):
                    walk(body)

    walk(p.body)
    for sp in p.subprocs:
        out |= _names_in(sp)
    return out


def _normalize(items: tuple[IInstr, ...]) -> tuple[IInstr, ...]:
    """Push annotations and barriers down to one wrapper chain per
    instruction (both distribute over sequences), drop wrappers from
    exempt assignments, and canonicalize each chain to an optional
    barrier around the annotation variables that are still effective."""

    def norm(items, bar: bool, vars: tuple[str, ...]) -> list[IInstr]:
        out: list[IInstr] = []
        for it in items:
            match it:
                case IAnnot(body, v):
                    out.extend(norm(body, bar, vars + (v,)))
                case IBarrier(body):
                    out.extend(norm(body, True, ()))
                case IAssign(_, _, exempt) if exempt:
                    out.append(it)
                case IAssign(_, _, _):
                    out.append(_wrap(it, bar, vars))
                case ILoop(g, body):
                    out.append(_wrap(ILoop(g, tuple(norm(body, False, ()))),
                                     bar, vars))
                case IIf(c, then, els):
                    out.append(_wrap(IIf(c, tuple(norm(then, False, ())),
                                         tuple(norm(els, False, ()))),
                                     bar, vars))
                case _:
                    raise TransformError(f"bad instruction {it!r}")
        return out

    return tuple(norm(items, False, ()))


def _wrap(core: IInstr, bar: bool, vars: tuple[str, ...]) -> IInstr:
    out = core
    for v in reversed(vars):
        out = IAnnot((out,), v)
    if bar:
        out = IBarrier((out,))
    return out


def _peel(item: IInstr) -> tuple[bool, tuple[str, ...], IInstr]:
    """Undo `_wrap`: the effective annotation context of one item."""
    bar = False
    vars: list[str] = []
    while True:
        match item:
            case IAnnot(body, v) if len(body) == 1:
                vars.append(v)
                item = body[0]
            case IBarrier(body) if len(body) == 1:
                bar = True
                vars = []
                item = body[0]
            case _:
                return bar, tuple(vars), item


def _has_loop(items) -> bool:
    for it in items:
        match it:
            case ILoop(_, _):
                return True
            case IAssign(_, _, _):
                pass
            case IIf(_, then, els):
                if _has_loop(then) or _has_loop(els):
                    return True
            case IAnnot(body, _) | IBarrier(body):
                if _has_loop(body):
                    return True
    return False


def _count_loops(items) -> int:
    n = 0
    for it in items:
        match it:
            case ILoop(_, body):
                n += 1 + _count_loops(body)
            case IIf(_, then, els):
                n += _count_loops(then) + _count_loops(els)
            case IAnnot(body, _) | IBarrier(body):
                n += _count_loops(body)
            case _:
                pass
    return n


def _add_chain(exprs: list[Expr]) -> Expr:
    out = exprs[0]
    for e in exprs[1:]:
        out = Add(out, e)
    return out


# ---------------------------------------------------------------------------
# static size majorants for loop guards
#
# The merged-loop budgets below must dominate every value the second (or
# inner) loop's guard can take when its loop is entered.  A guard that is
# never assigned in the surrounding region keeps its entry value; one
# assigned by exempt bookkeeping is bounded by the assigned expressions
# with their variables recursively majorized; one assigned under an
# annotation is bounded by the annotation variable.  Sums dominate each
# alternative because |a+b| >= max(|a|, |b|).


def _region_defs(items, var: str, bar: bool = False,
                 vars: tuple[str, ...] = ()) -> list:
    out = []
    for it in items:
        match it:
            case IAssign(v, e, exempt):
                if v == var:
                    out.append((e, exempt, () if exempt else vars))
            case ILoop(_, body):
                out.extend(_region_defs(body, var, bar, vars))
            case IIf(_, then, els):
                out.extend(_region_defs(then, var, bar, vars))
                out.extend(_region_defs(els, var, bar, vars))
            case IAnnot(body, v):
                out.extend(_region_defs(body, var, bar, vars + (v,)))
            case IBarrier(body):
                out.extend(_region_defs(body, var, True, ()))
    return out


def _majorant(var: str, region, visiting: frozenset[str]) -> Expr:
    if var in visiting:
        raise TransformError(f"cannot bound loop guard: {var} feeds itself")
    defs = _region_defs(region, var)
    terms: list[Expr] = [EVar(var)]
    for e, exempt, ann in defs:
        # a store never exceeds the assigned expression's value (zeroing
        # only shrinks it), so majorizing the expression is always sound;
        # when that loops back on itself, fall back to the annotation
        # variable the store was checked against
        try:
            terms.append(_majorant_expr(e, region, visiting | {var}))
        except TransformError:
            if ann and not _region_defs(region, ann[-1]):
                terms.append(EVar(ann[-1]))
            else:
                raise
    return _add_chain(terms)


def _majorant_expr(e: Expr, region, visiting: frozenset[str]) -> Expr:
    match e:
        case Const(_):
            return e
        case EVar(v):
            if not _region_defs(region, v):
                return e
            return _majorant(v, region, visiting)
        case Add(a, b):
            return Add(_majorant_expr(a, region, visiting),
                       _majorant_expr(b, region, visiting))
        case Sub(a, _):                  # a - b <= a
            return _majorant_expr(a, region, visiting)
        case Smash(a, b):
            return Smash(_majorant_expr(a, region, visiting),
                         _majorant_expr(b, region, visiting))
        case Mul(a, b):
            return Mul(_majorant_expr(a, region, visiting),
                       _majorant_expr(b, region, visiting))
        case Cut(a):
            return Cut(_majorant_expr(a, region, visiting))
        case Chkbd(a, _):                # result <= the unchecked value
            return _majorant_expr(a, region, visiting)
    raise TransformError(f"cannot bound loop guard through {e!r}")


# ---------------------------------------------------------------------------
# loop merging: two sequential loops become one
#
#   (loop x1 {II1*})_w1  II2*  (loop x3 {II3*})_w3
#
# becomes a single loop that spends |x1| iterations on II1*, one on II2*
# (re-sampling the second guard right after it), and the rest on II3*:
#
#   gx := x1; dy := 1; g3 := 0; lb := x1 (x) M(x3);
#   loop lb {
#     if gx { gx := cut(gx); (II1*)_w1 }
#     else { if dy { dy := 0; II2* g3 := x3; }
#            else { if g3 { g3 := cut(g3); (II3*)_w3 } } }
#   }
#
# where (x) is the size smash, so |lb| = |x1| + |M(x3)| + 1, and M(x3)
# majorizes every value x3 can take before its loop is reached.
# Bookkeeping assignments are exempt; the captured annotation chains
# (and barrier flags) of both loops are restored around their bodies.


def _unseq_rewrite(seq: tuple[IInstr, ...], i: int, j: int,
                   namer: _Namer) -> tuple[IInstr, ...]:
    bar1, w1, loop1 = _peel(seq[i])
    bar3, w3, loop3 = _peel(seq[j])
    mid = seq[i + 1:j]
    x1, x3 = loop1.guard, loop3.guard

    region = seq[i:j]                    # where x3 may change before entry
    budget = Mul(EVar(x1), _majorant(x3, region, frozenset()))

    gx = namer.fresh("gx")
    dy = namer.fresh("dy")
    g3 = namer.fresh("g3")
    lb = namer.fresh("lb")

    def book(v: str, e: Expr) -> IAssign:
        return IAssign(v, e, exempt=True)

    body1 = tuple(_wrap(it, bar1, w1) for it in loop1.body)
    body3 = tuple(_wrap(it, bar3, w3) for it in loop3.body)
    merged = ILoop(lb, (
        IIf(EVar(gx),
            (book(gx, Cut(EVar(gx))),) + body1,
            (IIf(EVar(dy),
                 (book(dy, Const(0)),) + mid + (book(g3, EVar(x3)),),
                 (IIf(EVar(g3),
                      (book(g3, Cut(EVar(g3))),) + body3),)),)),))
    return seq[:i] + (
        book(gx, EVar(x1)), book(dy, Const(1)), book(g3, Const(0)),
        book(lb, budget), merged) + seq[j + 1:]


def _find_unseq(seq: tuple[IInstr, ...], namer: _Namer):
    loops = [k for k, it in enumerate(seq)
             if isinstance(_peel(it)[2], ILoop)]
    for i, j in zip(loops, loops[1:]):
        if _has_loop(_peel(seq[i])[2].body):
            continue
        if _has_loop(_peel(seq[j])[2].body):
            continue
        if _has_loop(seq[i + 1:j]):
            continue
        return _unseq_rewrite(seq, i, j, namer)
    return None


# ---------------------------------------------------------------------------
# loop unnesting: an inner loop is spliced into its parent
#
#   (loop x { II1*  (loop y {II2*})_z  II3* })_w
#
# becomes a single loop over windows of |total|+1 iterations each — the
# first runs II1* and re-samples the inner guard, the next |y| run II2*,
# one runs II3*, and the rest idle until the window closes:
#
#   total := 1 (x) M(y); dx := 1; dz := 1; gt := total; gy := 0;
#   lb := cut(cut((x # total) (x) x));
#   loop lb {
#     if dx { dx := 0; (II1*)_w  gy := y; }
#     if gy { ((II2*)_z)_w  gy := cut(gy); }
#     else { if dz { dz := 0; (II3*)_w } }
#     if gt { gt := cut(gt); }
#     else { gt := total; dx := 1; dz := 1; }
#   }
#
# |total| = |M(y)| + 2 strictly exceeds every size the inner guard can
# reach (M is the majorant above), so a window of |total| + 1 iterations
# always fits one inner run, and |lb| = |x| * (|total| + 1) is exactly
# |x| windows.


def _unnest_rewrite(item: IInstr, namer: _Namer) -> tuple[IInstr, ...]:
    bar_o, w_o, outer = _peel(item)
    body = outer.body
    k = next(idx for idx, it in enumerate(body)
             if isinstance(_peel(it)[2], ILoop))
    bar_i, z_i, inner = _peel(body[k])
    pre, post = body[:k], body[k + 1:]
    x, y = outer.guard, inner.guard
    # for the guard analysis every body item also sits under the outer
    # loop's own annotation context
    region = tuple(_wrap(it, bar_o, w_o) for it in body)

    total = namer.fresh("total")
    dx = namer.fresh("dx")
    dz = namer.fresh("dz")
    gt = namer.fresh("gt")
    gy = namer.fresh("gy")
    lb = namer.fresh("lb")

    def book(v: str, e: Expr) -> IAssign:
        return IAssign(v, e, exempt=True)

    def wrap_o(it: IInstr) -> IInstr:
        return _wrap(it, bar_o, w_o)

    def wrap_oi(it: IInstr) -> IInstr:
        return _wrap(_wrap(it, bar_i, z_i), bar_o, w_o)

    merged = ILoop(lb, (
        IIf(EVar(dx),
            (book(dx, Const(0)),) + tuple(wrap_o(it) for it in pre)
            + (book(gy, EVar(y)),)),
        IIf(EVar(gy),
            tuple(wrap_oi(it) for it in inner.body)
            + (book(gy, Cut(EVar(gy))),),
            (IIf(EVar(dz),
                 (book(dz, Const(0)),) + tuple(wrap_o(it) for it in post)),)),
        IIf(EVar(gt),
            (book(gt, Cut(EVar(gt))),),
            (book(gt, EVar(total)), book(dx, Const(1)),
             book(dz, Const(1)))),))
    return (
        book(total, Mul(Const(1), _majorant(y, region, frozenset()))),
        book(dx, Const(1)), book(dz, Const(1)),
        book(gt, EVar(total)), book(gy, Const(0)),
        book(lb, Cut(Cut(Mul(Smash(EVar(x), EVar(total)), EVar(x))))),
        merged)


def _find_unnest(item: IInstr, namer: _Namer):
    bar, vars, core = _peel(item)
    if not isinstance(core, ILoop):
        return None
    body = core.body
    loop_at = [idx for idx, it in enumerate(body)
               if isinstance(_peel(it)[2], ILoop)]
    if len(loop_at) == 1:
        k = loop_at[0]
        inner = _peel(body[k])[2]
        if not _has_loop(inner.body) and not _has_loop(body[:k]) \
                and not _has_loop(body[k + 1:]):
            return _unnest_rewrite(item, namer)
    return None


# ---------------------------------------------------------------------------
# one rewrite step anywhere in a procedure, outermost first


def _rewrite_seqs(items: tuple[IInstr, ...], step) \
        -> Optional[tuple[IInstr, ...]]:
    """Apply `step` to the first rewritable sequence, searching this
    sequence first and then each item's sub-sequences in order."""
    new = step(items)
    if new is not None:
        return tuple(new)
    for idx, it in enumerate(items):
        bar, vars, core = _peel(it)
        match core:
            case ILoop(g, body):
                sub = _rewrite_seqs(body, step)
                if sub is not None:
                    return items[:idx] + (_wrap(ILoop(g, sub), bar, vars),) \
                        + items[idx + 1:]
            case IIf(c, then, els):
                sub = _rewrite_seqs(then, step)
                if sub is not None:
                    return items[:idx] + (_wrap(IIf(c, sub, els), bar, vars),)\
                        + items[idx + 1:]
                sub = _rewrite_seqs(els, step)
                if sub is not None:
                    return items[:idx] + (_wrap(IIf(c, then, sub), bar,
                                                vars),) + items[idx + 1:]
            case _:
                pass
    return None


def _rewrite_items(items: tuple[IInstr, ...], step) \
        -> Optional[tuple[IInstr, ...]]:
    """Apply `step` to the first rewritable item, outermost first; a
    match replaces the item by a block of instructions."""
    for idx, it in enumerate(items):
        new = step(it)
        if new is not None:
            return items[:idx] + tuple(new) + items[idx + 1:]
        bar, vars, core = _peel(it)
        match core:
            case ILoop(g, body):
                sub = _rewrite_items(body, step)
                if sub is not None:
                    return items[:idx] + (_wrap(ILoop(g, sub), bar, vars),) \
                        + items[idx + 1:]
            case IIf(c, then, els):
                sub = _rewrite_items(then, step)
                if sub is not None:
                    return items[:idx] + (_wrap(IIf(c, sub, els), bar, vars),)\
                        + items[idx + 1:]
                sub = _rewrite_items(els, step)
                if sub is not None:
                    return items[:idx] + (_wrap(IIf(c, then, sub), bar,
                                                vars),) + items[idx + 1:]
            case _:
                pass
    return None


# ---------------------------------------------------------------------------
# procedure unfolding


def _rename_expr(e: Expr, ren: dict[str, str]) -> Expr:
    match e:
        case Const(_):
            return e
        case EVar(v):
            return EVar(ren.get(v, v))
        case Add(a, b):
            return Add(_rename_expr(a, ren), _rename_expr(b, ren))
        case Sub(a, b):
            return Sub(_rename_expr(a, ren), _rename_expr(b, ren))
        case Smash(a, b):
            return Smash(_rename_expr(a, ren), _rename_expr(b, ren))
        case Mul(a, b):
            return Mul(_rename_expr(a, ren), _rename_expr(b, ren))
        case Cut(a):
            return Cut(_rename_expr(a, ren))
        case Chkbd(a, bounds):
            return Chkbd(_rename_expr(a, ren),
                         frozenset(ren.get(v, v) for v in bounds))
        case Call(f, args):
            return Call(ren.get(f, f),
                        tuple(_rename_arg(a, ren) for a in args))
    raise TransformError(f"bad expression {e!r}")


def _rename_arg(a: Arg, ren: dict[str, str]) -> Arg:
    match a:
        case ArgExpr(e):
            return ArgExpr(_rename_expr(e, ren))
        case ArgLam(params, head, args):
            inner = {k: v for k, v in ren.items() if k not in params}
            return ArgLam(params, inner.get(head, head),
                          tuple(inner.get(v, v) for v in args))
    raise TransformError(f"bad argument {a!r}")


def _rename_instrs(items, ren: dict[str, str]) -> tuple[IInstr, ...]:
    out = []
    for it in items:
        match it:
            case IAssign(v, e, exempt):
                out.append(IAssign(ren.get(v, v), _rename_expr(e, ren),
                                   exempt))
            case ILoop(g, body):
                out.append(ILoop(ren.get(g, g), _rename_instrs(body, ren)))
            case IIf(c, then, els):
                out.append(IIf(_rename_expr(c, ren),
                               _rename_instrs(then, ren),
                               _rename_instrs(els, ren)))
            case IAnnot(body, v):
                out.append(IAnnot(_rename_instrs(body, ren), ren.get(v, v)))
            case IBarrier(body):
                out.append(IBarrier(_rename_instrs(body, ren)))
    return tuple(out)


def _subst_functionals(items, fsub: dict[str, Arg]) -> tuple[IInstr, ...]:
    """Replace calls to functional parameters by the lambda arguments
    bound to them at the inlined call site."""

    def expr(e: Expr) -> Expr:
        match e:
            case Call(f, args) if f in fsub:
                args = tuple(arg(a) for a in args)
                target = fsub[f]
                match target:
                    case ArgExpr(EVar(g)):
                        return Call(g, args)
                    case ArgLam(params, head, hargs):
                        amap = dict(zip(params, args))
                        if not hargs:
                            if head in amap:
                                picked = amap[head]
                                if isinstance(picked, ArgExpr):
                                    return picked.expr
                                raise TransformError(
                                    "functional used as a number")
                            return EVar(head)
                        return Call(head, tuple(
                            amap.get(v, ArgExpr(EVar(v))) for v in hargs))
                raise TransformError(f"bad functional binding for {f}")
            case Call(f, args):
                return Call(f, tuple(arg(a) for a in args))
            case Add(a, b):
                return Add(expr(a), expr(b))
            case Sub(a, b):
                return Sub(expr(a), expr(b))
            case Smash(a, b):
                return Smash(expr(a), expr(b))
            case Mul(a, b):
                return Mul(expr(a), expr(b))
            case Cut(a):
                return Cut(expr(a))
            case Chkbd(a, bounds):
                return Chkbd(expr(a), bounds)
            case _:
                return e

    def arg(a: Arg) -> Arg:
        match a:
            case ArgExpr(EVar(g)) if g in fsub:
                return fsub[g]
            case ArgExpr(e):
                return ArgExpr(expr(e))
            case _:
                return a

    def walk(items) -> tuple[IInstr, ...]:
        out = []
        for it in items:
            match it:
                case IAssign(v, e, exempt):
                    out.append(IAssign(v, expr(e), exempt))
                case ILoop(g, body):
                    out.append(ILoop(g, walk(body)))
                case IIf(c, then, els):
                    out.append(IIf(expr(c), walk(then), walk(els)))
                case IAnnot(body, v):
                    out.append(IAnnot(walk(body), v))
                case IBarrier(body):
                    out.append(IBarrier(walk(body)))
        return tuple(out)

    return walk(items)


def _calls_in_expr(e: Expr, procs: set[str]) -> list[Call]:
    out: list[Call] = []
    match e:
        case Add(a, b) | Sub(a, b) | Smash(a, b) | Mul(a, b):
            out += _calls_in_expr(a, procs) + _calls_in_expr(b, procs)
        case Cut(a) | Chkbd(a, _):
            out += _calls_in_expr(a, procs)
        case Call(f, args):
            for a in args:
                if isinstance(a, ArgExpr):
                    out += _calls_in_expr(a.expr, procs)
            if f in procs:
                out.append(e)
        case _:
            pass
    return out


def _inline_call(call: Call, callee: IProc, target: str,
                 namer: _Namer) -> tuple[list[IInstr], list[str]]:
    """Instructions replacing `target := call(...)`, and the new locals.
    The callee runs inside a barrier (its store was fresh, so no caller
    annotation may zero its values); parameter passing and local
    zeroing are exempt for the same reason.  The final copy out of the
    callee's return variable is an ordinary checked assignment, exactly
    like the assignment it replaces."""
    ren: dict[str, str] = {}
    fsub: dict[str, Arg] = {}
    setup: list[IInstr] = []
    for par, a in zip(callee.params, call.args):
        if isinstance(par.ty, Arrow):
            fsub[par.name] = a
        else:
            ren[par.name] = namer.fresh(par.name)
            if not isinstance(a, ArgExpr):
                raise TransformError(f"lambda argument for number "
                                     f"parameter {par.name}")
            setup.append(IAssign(ren[par.name], a.expr, exempt=True))
    for v in callee.locals:
        ren[v] = namer.fresh(v)
        setup.append(IAssign(ren[v], Const(0), exempt=True))
    body = _subst_functionals(callee.body, fsub)
    body = _rename_instrs(body, ren)
    block = IBarrier(tuple(setup) + body)
    copy_out = IAssign(target, EVar(ren.get(callee.ret, callee.ret)))
    new_locals = [ren[p.name] for p in callee.params
                  if not isinstance(p.ty, Arrow)]
    new_locals += [ren[v] for v in callee.locals]
    return [block, copy_out], new_locals


def unfold_all(proc: IProc, outer: dict[str, IProc] | None = None) -> IProc:
    """Inline every procedure call, innermost callees first; calls to
    functional parameters remain.  Calls buried inside larger
    expressions are first hoisted to fresh exempt temporaries."""
    scope: dict[str, IProc] = dict(outer or {})
    for sp in proc.subprocs:
        scope[sp.name] = unfold_all(sp, scope)
    pnames = set(scope)

    namer = _Namer(_names_in(proc))
    new_locals: list[str] = list(proc.locals)
    body = proc.body

    def hoist_from(e: Expr):
        """A prefix of instructions computing every procedure call in e
        into fresh temporaries, and e with the calls replaced."""
        calls = _calls_in_expr(e, pnames)
        if not calls:
            return [], e
        prefix: list[IInstr] = []

        def repl(e2: Expr) -> Expr:
            match e2:
                case Call(f, args) if f in pnames:
                    args = tuple(
                        ArgExpr(repl(a.expr)) if isinstance(a, ArgExpr)
                        else a for a in args)
                    tmp = namer.fresh("t")
                    new_locals.append(tmp)
                    inl, locs = _inline_call(Call(f, args), scope[f], tmp,
                                             namer)
                    new_locals.extend(locs)
                    # the temporary holds a call value, never a checked
                    # store in the source program: keep it exempt
                    prefix.extend(inl[:-1])
                    prefix.append(IAssign(tmp, inl[-1].expr, exempt=True))
                    return EVar(tmp)
                case Call(f, args):
                    return Call(f, tuple(
                        ArgExpr(repl(a.expr)) if isinstance(a, ArgExpr)
                        else a for a in args))
                case Add(a, b):
                    return Add(repl(a), repl(b))
                case Sub(a, b):
                    return Sub(repl(a), repl(b))
                case Smash(a, b):
                    return Smash(repl(a), repl(b))
                case Mul(a, b):
                    return Mul(repl(a), repl(b))
                case Cut(a):
                    return Cut(repl(a))
                case Chkbd(a, bounds):
                    return Chkbd(repl(a), bounds)
                case _:
                    return e2

        return prefix, repl(e)

    def walk(items) -> tuple[IInstr, ...]:
        out: list[IInstr] = []
        for it in items:
            match it:
                case IAssign(v, Call(f, args), exempt) if f in pnames \
                        and not _calls_in_expr(
                            Call(f, args), pnames)[:-1]:
                    args2 = []
                    prefixes: list[IInstr] = []
                    for a in args:
                        if isinstance(a, ArgExpr):
                            pre, e2 = hoist_from(a.expr)
                            prefixes += pre
                            args2.append(ArgExpr(e2))
                        else:
                            args2.append(a)
                    inl, locs = _inline_call(Call(f, tuple(args2)), scope[f],
                                             v, namer)
                    new_locals.extend(locs)
                    if exempt:
                        inl[-1] = IAssign(v, inl[-1].expr, exempt=True)
                    out.extend(prefixes)
                    out.extend(inl)
                case IAssign(v, e, exempt):
                    pre, e2 = hoist_from(e)
                    out.extend(pre)
                    out.append(IAssign(v, e2, exempt))
                case ILoop(g, b):
                    out.append(ILoop(g, walk(b)))
                case IIf(c, then, els):
                    pre, c2 = hoist_from(c)
                    out.extend(pre)
                    out.append(IIf(c2, walk(then), walk(els)))
                case IAnnot(b, v):
                    out.append(IAnnot(walk(b), v))
                case IBarrier(b):
                    out.append(IBarrier(walk(b)))
        return tuple(out)

    body = walk(body)
    return IProc(proc.name, proc.params, (), tuple(new_locals), body,
                 proc.ret)


# ---------------------------------------------------------------------------
# the full flattening pipeline


def count_loops(proc: IProc) -> int:
    return _count_loops(proc.body)


def has_nested_loops(proc: IProc) -> bool:
    def nested(items, inside: bool) -> bool:
        for it in items:
            match it:
                case ILoop(_, body):
                    if inside or nested(body, True):
                        return True
                case IIf(_, then, els):
                    if nested(then, inside) or nested(els, inside):
                        return True
                case IAnnot(body, _) | IBarrier(body):
                    if nested(body, inside):
                        return True
                case _:
                    pass
        return False

    return nested(proc.body, False)


def proc_call_count(proc: IProc) -> int:
    """Calls to anything except the functional parameters — zero on a
    fully unfolded procedure."""
    allowed = {p.name for p in proc.params if isinstance(p.ty, Arrow)}
    n = 0

    def expr(e: Expr):
        nonlocal n
        match e:
            case Add(a, b) | Sub(a, b) | Smash(a, b) | Mul(a, b):
                expr(a)
                expr(b)
            case Cut(a) | Chkbd(a, _):
                expr(a)
            case Call(f, args):
                for a in args:
                    if isinstance(a, ArgExpr):
                        expr(a.expr)
                if f not in allowed:
                    n += 1
            case _:
                pass

    def walk(items):
        for it in items:
            match it:
                case IAssign(_, e, _):
                    expr(e)
                case ILoop(_, body):
                    walk(body)
                case IIf(c, then, els):
                    expr(c)
                    walk(then)
                    walk(els)
                case IAnnot(body, _) | IBarrier(body):
                    walk(body)

    walk(proc.body)
    return n


def flatten(procs: Union[list, Proc, IProc], entry: str | None = None) \
        -> IProc:
    """Annotate (if needed), inline all calls, then merge and unnest
    loops until at most one remains.  A list supplies sibling
    procedures the entry (by default the last) may call."""
    if isinstance(procs, (Proc, IProc)):
        procs = [procs]
    ips = [annotate(p) if isinstance(p, Proc) else p for p in procs]
    by_name = {p.name: p for p in ips}
    main = by_name[entry] if entry else ips[-1]
    outer: dict[str, IProc] = {}
    for p in ips:
        if p.name == main.name:
            break
        outer[p.name] = unfold_all(p, outer)
    ip = unfold_all(main, outer)
    namer = _Namer(_names_in(ip))
    body = _normalize(ip.body)

    def unseq_step(items):
        return _rewrite_seqs(items, lambda seq: _find_unseq(seq, namer))

    def unnest_step(items):
        return _rewrite_items(items, lambda it: _find_unnest(it, namer))

    changed = True
    while changed:
        changed = False
        while (nb := unseq_step(body)) is not None:
            body = _normalize(nb)
            changed = True
        while (nb := unnest_step(body)) is not None:
            body = _normalize(nb)
            changed = True

    new_locals = tuple(v for v in namer.used
                       if v not in _names_in(ip) or v in ip.locals)
    out = IProc(ip.name, ip.params, (),
                ip.locals + tuple(sorted(set(new_locals) - set(ip.locals))),
                body, ip.ret)
    if count_loops(out) > 1 or has_nested_loops(out):
        raise TransformError(f"{ip.name}: flattening left "
                             f"{count_loops(out)} loops")
    return out


def localize(proc: IProc) -> IProc:
    """Compile annotations away: each checked assignment becomes an
    explicit chkbd against the annotation variables in scope, barriers
    reset that scope, and the wrappers disappear."""

    def walk(items, bounds: tuple[str, ...]) -> tuple[IInstr, ...]:
        out: list[IInstr] = []
        for it in items:
            match it:
                case IAssign(v, e, exempt):
                    use = () if exempt else bounds
                    out.append(IAssign(
                        v, Chkbd(e, frozenset(use)) if use else e))
                case ILoop(g, body):
                    out.append(ILoop(g, walk(body, bounds)))
                case IIf(c, then, els):
                    out.append(IIf(c, walk(then, bounds), walk(els, bounds)))
                case IAnnot(body, v):
                    out.extend(walk(body, bounds + (v,)))
                case IBarrier(body):
                    out.extend(walk(body, ()))
        return tuple(out)

    return IProc(proc.name, proc.params,
                 tuple(localize(sp) for sp in proc.subprocs),
                 proc.locals, walk(proc.body, ()), proc.ret)


# ---------------------------------------------------------------------------
# printing


def expr_pretty(e: Expr) -> str:
    def atom(x: Expr) -> str:
        s = expr_pretty(x)
        if isinstance(x, (Const, EVar, Call, Cut, Chkbd)):
            return s
        return f"({s})"

    match e:
        case Const(v):
            return str(v)
        case EVar(v):
            return v
        case Add(a, b):
            return f"{atom(a)} + {atom(b)}"
        case Sub(a, b):
            return f"{atom(a)} - {atom(b)}"
        case Smash(a, b):
            return f"{atom(a)} # {atom(b)}"
        case Mul(a, b):
            return f"{atom(a)} (x) {atom(b)}"
        case Cut(a):
            return f"cut({expr_pretty(a)})"
        case Chkbd(a, bounds):
            vs = ", ".join(sorted(bounds))
            return f"chkbd({expr_pretty(a)}, {{{vs}}})"
        case Call(f, args):
            parts = []
            for a in args:
                match a:
                    case ArgExpr(inner):
                        parts.append(expr_pretty(inner))
                    case ArgLam(params, head, hargs):
                        lam = "\\" + " ".join(params) + ". " + head
                        if hargs:
                            lam += "(" + ", ".join(hargs) + ")"
                        parts.append(lam)
            return f"{f}({', '.join(parts)})"
    raise TransformError(f"bad expression {e!r}")


def iproc_pretty(proc: IProc) -> str:
    lines: list[str] = []

    def emit(items, depth: int):
        pad = "  " * depth
        for it in items:
            match it:
                case IAssign(v, e, exempt):
                    op = ":=!" if exempt else ":="
                    lines.append(f"{pad}{v} {op} {expr_pretty(e)};")
                case ILoop(g, body):
                    lines.append(f"{pad}loop {g} {{")
                    emit(body, depth + 1)
                    lines.append(f"{pad}}}")
                case IIf(c, then, els):
                    lines.append(f"{pad}if {expr_pretty(c)} {{")
                    emit(then, depth + 1)
                    if els:
                        lines.append(f"{pad}}} else {{")
                        emit(els, depth + 1)
                    lines.append(f"{pad}}}")
                case IAnnot(body, v):
                    lines.append(f"{pad}[")
                    emit(body, depth + 1)
                    lines.append(f"{pad}]_{v}")
                case IBarrier(body):
                    lines.append(f"{pad}barrier {{")
                    emit(body, depth + 1)
                    lines.append(f"{pad}}}")

    def emit_proc(p: IProc, depth: int):
        pad = "  " * depth
        params = []
        for par in p.params:
            if par.ty == Base("D"):
                params.append(par.name)
            else:
                params.append(f"{par.name}^({par.ty})")
        lines.append(f"{pad}proc {p.name}({', '.join(params)}) {{")
        for sp in p.subprocs:
            emit_proc(sp, depth + 1)
        if p.locals:
            lines.append(f"{pad}  var {', '.join(p.locals)};")
        emit(p.body, depth + 1)
        lines.append(f"{pad}  ret {p.ret}")
        lines.append(f"{pad}}}")

    emit_proc(proc, 0)
    return "\n".join(lines)
