"""A bounded-loop imperative language over binary numbers.

    Procedure P(x1^T1, ..., xk^Tk)
      [nested Procedure definitions]
      Var v1, ..., vn;
      instructions
      Return v

    instr ::= v := E ;
            | Loop v0 with v1 do { instr* }
            | If E0 < E1 { instr* } [else { instr* }]
    E     ::= 0 | 1 | v | E + E | E - E | E # E | f(A, ..., A)
    A     ::= E | \v1 ... vm . v(v1', ..., vm')      (m may be 0)

Numbers are sized by their binary digit count (|0| = 0).  `#` is the
smash 2^(|x||y|) (0 when either operand is 0), `-` truncates at 0.
`Loop v0 with v1` runs |v0| iterations; any assignment executed inside
stores 0 instead when the assigned value's size exceeds the size the
loop's bound variable had on entry (every enclosing loop checks its own
bound).  `If E0 < E1` is proper-subtraction sugar (E1 - E0 nonzero) and
counts no assignment.  The cost of a run is the number of assignment
instructions executed, including inside called procedures.

Procedures may take functional parameters (orders above the base type);
call arguments for those are the lambda shapes above, or — at the
outermost call boundary — host callables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .parser import ParseError
from .terms import (Arrow, Base, Type, nsize, num_monus, num_smash)


class BtlpError(Exception):
    pass


D = Base("D")


# ---------------------------------------------------------------------------
# syntax


class Expr:
    pass


@dataclass(frozen=True)
class Const(Expr):
    value: int


@dataclass(frozen=True)
class EVar(Expr):
    name: str


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Smash(Expr):
    left: Expr
    right: Expr


class Arg:
    pass


@dataclass(frozen=True)
class ArgExpr(Arg):
    expr: Expr


@dataclass(frozen=True)
class ArgLam(Arg):
    params: tuple[str, ...]
    head: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple[Arg, ...]


class Instr:
    pass


@dataclass(frozen=True)
class Assign(Instr):
    var: str
    expr: Expr


@dataclass(frozen=True)
class Loop(Instr):
    guard: str
    bound: str
    body: tuple[Instr, ...]


@dataclass(frozen=True)
class If(Instr):
    left: Expr
    right: Expr
    then: tuple[Instr, ...]
    els: tuple[Instr, ...] = ()


@dataclass(frozen=True)
class Param:
    name: str
    ty: Type


@dataclass(frozen=True)
class Proc:
    name: str
    params: tuple[Param, ...]
    subprocs: tuple["Proc", ...]
    locals: tuple[str, ...]
    body: tuple[Instr, ...]
    ret: str


def proc_order(p: Proc) -> int:
    from .terms import type_order
    return max((type_order(par.ty) for par in p.params), default=0)


# ---------------------------------------------------------------------------
# parsing


_KEYWORDS = {"Procedure", "Var", "Loop", "If", "Return", "with", "do", "else"}


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    toks: list[tuple[str, str, int]] = []
    i, line = 0, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            line += 1
            i += 1
            continue
        if c.isspace():
            i += 1
            continue
        if src.startswith("//", i) or src.startswith("--", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(("num", src[i:j], line))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(("ident", src[i:j], line))
            i = j
            continue
        if src.startswith(":=", i):
            toks.append(("sym", ":=", line))
            i += 2
            continue
        if src.startswith("->", i):
            toks.append(("sym", "->", line))
            i += 2
            continue
        if c == "→":
            toks.append(("sym", "->", line))
            i += 1
            continue
        if c in "λ\\":
            toks.append(("sym", "lam", line))
            i += 1
            continue
        if c in "(){},;<^#+-.·":
            toks.append(("sym", c, line))
            i += 1
            continue
        raise BtlpError(f"line {line}: unexpected character {c!r}")
    toks.append(("eof", "", line))
    return toks


class _BParser:
    def __init__(self, toks: list[tuple[str, str, int]]):
        self.toks = toks
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.i]

    def next(self) -> tuple[str, str, int]:
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg: str) -> BtlpError:
        return BtlpError(f"line {self.peek()[2]}: {msg}")

    def expect(self, text: str) -> None:
        kind, tok, line = self.next()
        if tok != text:
            raise BtlpError(f"line {line}: expected {text!r}, found {tok!r}")

    def at(self, text: str) -> bool:
        return self.peek()[1] == text and self.peek()[0] != "eof"

    def ident(self, what: str = "a name") -> str:
        kind, tok, line = self.next()
        if kind != "ident" or tok in _KEYWORDS:
            raise BtlpError(f"line {line}: expected {what}, found {tok!r}")
        return tok

    # types: D | type -> type | (type)
    def parse_type(self) -> Type:
        left = self.parse_type_atom()
        if self.at("->"):
            self.next()
            return Arrow(left, self.parse_type())
        return left

    def parse_type_atom(self) -> Type:
        if self.at("("):
            self.next()
            ty = self.parse_type()
            self.expect(")")
            return ty
        name = self.ident("a type")
        return Base(name)

    def parse_proc(self) -> Proc:
        self.expect("Procedure")
        name = self.ident("a procedure name")
        self.expect("(")
        params: list[Param] = []
        if not self.at(")"):
            while True:
                pname = self.ident("a parameter name")
                ty: Type = D
                if self.at("^"):
                    self.next()
                    ty = self.parse_type()
                params.append(Param(pname, ty))
                if self.at(","):
                    self.next()
                    continue
                break
        self.expect(")")
        subprocs: list[Proc] = []
        while self.at("Procedure"):
            subprocs.append(self.parse_proc())
        locals_: list[str] = []
        if self.at("Var"):
            self.next()
            while True:
                locals_.append(self.ident("a variable name"))
                if self.at(","):
                    self.next()
                    continue
                break
            self.expect(";")
        body = self.parse_instrs(stop={"Return"})
        self.expect("Return")
        ret = self.ident("the returned variable")
        return Proc(name, tuple(params), tuple(subprocs), tuple(locals_),
                    tuple(body), ret)

    def parse_instrs(self, stop: set[str]) -> list[Instr]:
        out: list[Instr] = []
        while True:
            kind, tok, _ = self.peek()
            if kind == "eof" or tok in stop or tok == "}":
                return out
            out.append(self.parse_instr())

    def parse_instr(self) -> Instr:
        if self.at("Loop"):
            self.next()
            guard = self.ident("the loop guard variable")
            self.expect("with")
            bound = self.ident("the loop bound variable")
            if self.at("do"):
                self.next()
            self.expect("{")
            body = self.parse_instrs(set())
            self.expect("}")
            return Loop(guard, bound, tuple(body))
        if self.at("If"):
            self.next()
            left = self.parse_expr()
            self.expect("<")
            right = self.parse_expr()
            self.expect("{")
            then = self.parse_instrs(set())
            self.expect("}")
            els: tuple[Instr, ...] = ()
            if self.at("else"):
                self.next()
                self.expect("{")
                els = tuple(self.parse_instrs(set()))
                self.expect("}")
            return If(left, right, tuple(then), els)
        var = self.ident("a variable to assign")
        self.expect(":=")
        e = self.parse_expr()
        self.expect(";")
        return Assign(var, e)

    # expressions: + and - and # at one precedence level, left associative,
    # which matches how the examples are written (no mixed chains appear)
    def parse_expr(self) -> Expr:
        left = self.parse_expr_atom()
        while True:
            if self.at("+"):
                self.next()
                left = Add(left, self.parse_expr_atom())
            elif self.at("-"):
                self.next()
                left = Sub(left, self.parse_expr_atom())
            elif self.at("#"):
                self.next()
                left = Smash(left, self.parse_expr_atom())
            else:
                return left

    def parse_expr_atom(self) -> Expr:
        kind, tok, line = self.peek()
        if tok == "(":
            self.next()
            e = self.parse_expr()
            self.expect(")")
            return e
        if kind == "num":
            self.next()
            if tok not in ("0", "1"):
                raise BtlpError(f"line {line}: only the constants 0 and 1 "
                                f"exist, found {tok}")
            return Const(int(tok))
        name = self.ident("an expression")
        if self.at("("):
            self.next()
            args: list[Arg] = []
            if not self.at(")"):
                while True:
                    args.append(self.parse_arg())
                    if self.at(","):
                        self.next()
                        continue
                    break
            self.expect(")")
            return Call(name, tuple(args))
        return EVar(name)

    def parse_arg(self) -> Arg:
        if self.at("lam"):
            self.next()
            params = [self.ident("a lambda parameter")]
            while not self.at(".") and self.peek()[0] == "ident":
                params.append(self.ident("a lambda parameter"))
            self.expect(".")
            head = self.ident("the lambda body")
            call_args: tuple[str, ...] = ()
            if self.at("("):
                self.next()
                names: list[str] = []
                if not self.at(")"):
                    while True:
                        names.append(self.ident("an argument variable"))
                        if self.at(","):
                            self.next()
                            continue
                        break
                self.expect(")")
                call_args = tuple(names)
            return ArgLam(tuple(params), head, call_args)
        return ArgExpr(self.parse_expr())


def parse_btlp(src: str) -> list[Proc]:
    """Parse a file of procedure definitions; later ones may call earlier
    ones, and the last is the usual entry point."""
    p = _BParser(_tokenize(src))
    procs: list[Proc] = []
    while p.peek()[0] != "eof":
        procs.append(p.parse_proc())
    if not procs:
        raise BtlpError("no procedures found")
    return procs


# ---------------------------------------------------------------------------
# well-formedness


def check_proc(proc: Proc, visible: dict[str, Proc] | None = None) -> None:
    """Static checks: declared variables, base-typed assignment targets
    (locals only), loop guard/bound discipline, call shapes, acyclicity
    (calls may only target own nested or previously defined procedures)."""
    visible = dict(visible or {})
    names = [p.name for p in proc.params] + list(proc.locals)
    if len(set(names)) != len(names):
        raise BtlpError(f"{proc.name}: duplicate variable names")
    env: dict[str, Type] = {p.name: p.ty for p in proc.params}
    for v in proc.locals:
        env[v] = D
    scope = dict(visible)
    for sp in proc.subprocs:
        check_proc(sp, scope)
        scope[sp.name] = sp
    if proc.ret not in env or env[proc.ret] != D:
        raise BtlpError(f"{proc.name}: returned variable {proc.ret} is not "
                        f"a declared number variable")

    assignable = set(proc.locals)

    def check_expr(e: Expr) -> None:
        match e:
            case Const(_):
                pass
            case EVar(v):
                if env.get(v) != D:
                    raise BtlpError(f"{proc.name}: {v} is not a number "
                                    f"variable")
            case Add(a, b) | Sub(a, b) | Smash(a, b):
                check_expr(a)
                check_expr(b)
            case Call(f, args):
                if f in scope:
                    callee = scope[f]
                    if len(args) != len(callee.params):
                        raise BtlpError(f"{proc.name}: {f} takes "
                                        f"{len(callee.params)} argument(s)")
                    for a, par in zip(args, callee.params):
                        check_arg(a, par.ty)
                elif f in env and isinstance(env[f], Arrow):
                    fty = env[f]
                    for a in args:
                        if not isinstance(fty, Arrow):
                            raise BtlpError(f"{proc.name}: too many arguments "
                                            f"to {f}")
                        check_arg(a, fty.left)
                        fty = fty.right
                    if fty != D:
                        raise BtlpError(f"{proc.name}: call to {f} does not "
                                        f"yield a number")
                else:
                    raise BtlpError(f"{proc.name}: unknown procedure or "
                                    f"functional {f}")
            case _:
                raise BtlpError(f"{proc.name}: bad expression {e!r}")

    def check_arg(a: Arg, expected: Type) -> None:
        match a:
            case ArgExpr(e):
                if expected != D:
                    if isinstance(e, EVar) and env.get(e.name) == expected:
                        return
                    raise BtlpError(f"{proc.name}: argument must have shape "
                                    f"\\v...v. v(...) for type {expected}")
                check_expr(e)
            case ArgLam(params, head, args):
                if not isinstance(expected, Arrow):
                    raise BtlpError(f"{proc.name}: lambda argument where a "
                                    f"number is expected")
                want = _arity(expected)
                if len(params) != want:
                    raise BtlpError(f"{proc.name}: lambda takes "
                                    f"{len(params)} parameter(s), type "
                                    f"{expected} wants {want}")
                inner = dict(env)
                for pn in params:
                    inner[pn] = D
                if head not in inner:
                    raise BtlpError(f"{proc.name}: unknown variable {head} "
                                    f"in lambda body")
                for v in args:
                    if inner.get(v) != D:
                        raise BtlpError(f"{proc.name}: lambda call argument "
                                        f"{v} is not a number variable")
                hty = inner[head]
                if isinstance(hty, Arrow):
                    if _arity(hty) != len(args):
                        raise BtlpError(f"{proc.name}: {head} applied to "
                                        f"{len(args)} argument(s)")
                elif args:
                    raise BtlpError(f"{proc.name}: number variable {head} "
                                    f"cannot be applied")

    def check_instrs(instrs: tuple[Instr, ...], frozen: set[str]) -> None:
        for ins in instrs:
            match ins:
                case Assign(v, e):
                    if v not in assignable:
                        raise BtlpError(f"{proc.name}: cannot assign to {v}")
                    if v in frozen:
                        raise BtlpError(f"{proc.name}: {v} guards or bounds "
                                        f"an enclosing loop and cannot be "
                                        f"assigned there")
                    check_expr(e)
                case Loop(g, b, body):
                    for v in (g, b):
                        if env.get(v) != D:
                            raise BtlpError(f"{proc.name}: loop variable {v} "
                                            f"is not a number variable")
                    check_instrs(body, frozen | {g, b})
                case If(l, r, then, els):
                    check_expr(l)
                    check_expr(r)
                    check_instrs(then, frozen)
                    check_instrs(els, frozen)

    check_instrs(proc.body, set())


def _arity(ty: Type) -> int:
    n = 0
    while isinstance(ty, Arrow):
        n += 1
        ty = ty.right
    return n


def check_program(procs: list[Proc]) -> None:
    visible: dict[str, Proc] = {}
    for p in procs:
        check_proc(p, visible)
        visible[p.name] = p


# ---------------------------------------------------------------------------
# interpretation


class HostFun:
    """A host-supplied functional argument (outermost call boundary only)."""

    def __init__(self, fn: Callable, label: str = "<host>"):
        self.fn = fn
        self.label = label

    def __call__(self, *args):
        return self.fn(*args)

    def __repr__(self) -> str:
        return self.label


Value = Union[int, Callable]


@dataclass
class RunResult:
    value: int
    assigns: int


@dataclass
class _State:
    env: dict[str, Value]
    bounds: list[int] = field(default_factory=list)    # entry |bound| stack
    assigns: int = 0


def _eval_arg(a: Arg, st: _State, run_call) -> Value:
    match a:
        case ArgExpr(e):
            return _eval_expr(e, st, run_call)
        case ArgLam(params, head, args):
            snapshot = dict(st.env)

            def fn(*vals):
                if len(vals) != len(params):
                    raise BtlpError(f"lambda argument arity mismatch")
                local = dict(snapshot)
                local.update(zip(params, vals))
                target = local.get(head)
                if target is None:
                    raise BtlpError(f"unbound {head} in lambda argument")
                if callable(target):
                    return target(*(local[v] for v in args))
                if args:
                    raise BtlpError(f"number {head} applied to arguments")
                return target

            return fn
    raise BtlpError(f"bad argument {a!r}")


def _eval_expr(e: Expr, st: _State, run_call) -> Value:
    match e:
        case Const(v):
            return v
        case EVar(v):
            if v not in st.env:
                raise BtlpError(f"unbound variable {v}")
            return st.env[v]
        case Add(a, b):
            return _eval_expr(a, st, run_call) + _eval_expr(b, st, run_call)
        case Sub(a, b):
            return num_monus(_eval_expr(a, st, run_call),
                             _eval_expr(b, st, run_call))
        case Smash(a, b):
            return num_smash(_eval_expr(a, st, run_call),
                             _eval_expr(b, st, run_call))
        case Call(f, args):
            return run_call(f, [_eval_arg(a, st, run_call) for a in args], st)
    raise BtlpError(f"bad expression {e!r}")


def _store(st: _State, var: str, val: int) -> None:
    if any(nsize(val) > b for b in st.bounds):
        val = 0
    st.env[var] = val
    st.assigns += 1


def _exec(instrs: tuple[Instr, ...], st: _State, run_call) -> None:
    for ins in instrs:
        match ins:
            case Assign(v, e):
                val = _eval_expr(e, st, run_call)
                if not isinstance(val, int):
                    raise BtlpError(f"assigning a functional to {v}")
                _store(st, v, val)
            case Loop(g, b, body):
                reps = nsize(st.env[g])          # sampled at entry
                st.bounds.append(nsize(st.env[b]))
                for _ in range(reps):
                    _exec(body, st, run_call)
                st.bounds.pop()
            case If(l, r, then, els):
                # E0 < E1 is proper-subtraction sugar: E1 - E0 nonzero
                lv = _eval_expr(l, st, run_call)
                rv = _eval_expr(r, st, run_call)
                _exec(then if num_monus(rv, lv) != 0 else els, st, run_call)


def run_proc(procs: list[Proc] | Proc, args: list[Value],
             entry: str | None = None) -> RunResult:
    """Run a procedure on argument values (numbers, and host callables for
    functional parameters)."""
    if isinstance(procs, Proc):
        procs = [procs]
    by_name: dict[str, Proc] = {}
    for p in procs:
        by_name[p.name] = p
    main = by_name[entry] if entry else procs[-1]

    counter = [0]

    def call(proc: Proc, vals: list[Value],
             visible: dict[str, Proc]) -> int:
        if len(vals) != len(proc.params):
            raise BtlpError(f"{proc.name} takes {len(proc.params)} "
                            f"argument(s), got {len(vals)}")
        scope = dict(visible)
        for sp in proc.subprocs:
            scope[sp.name] = sp
        env: dict[str, Value] = {}
        for par, v in zip(proc.params, vals):
            env[par.name] = v
        for v in proc.locals:
            env[v] = 0                  # implicit, not a counted assignment
        st = _State(env)

        def run_call(f: str, argvals: list[Value], _st: _State) -> int:
            if f in scope:
                return call(scope[f], argvals, visible_for(f, scope))
            target = env.get(f)
            if callable(target):
                return target(*argvals)
            raise BtlpError(f"cannot call {f}")

        _exec(proc.body, st, run_call)
        counter[0] += st.assigns
        out = st.env[proc.ret]
        if not isinstance(out, int):
            raise BtlpError(f"{proc.name} returns a functional")
        return out

    def visible_for(name: str, scope: dict[str, Proc]) -> dict[str, Proc]:
        # a callee sees the procedures defined before it at its own level;
        # reusing the caller's scope is fine for the acyclic programs the
        # checker accepts
        return scope

    visible: dict[str, Proc] = {}
    for p in procs:
        if p.name == main.name:
            break
        visible[p.name] = p
    value = call(main, list(args), visible)
    return RunResult(value, counter[0])
