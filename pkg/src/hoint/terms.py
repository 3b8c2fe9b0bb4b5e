"""Core term language: simple types, terms, signatures, numerals.

Terms are immutable trees shared by reference; never mutate a node after
construction.  Binders carry the bound name as a plain string, and the
parser hands us globally fresh names, so most code here can treat names
as unique.  Substitution still renames defensively.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional


# ---------------------------------------------------------------------------
# simple types

class Type:
    pass


@dataclass(frozen=True)
class Base(Type):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Arrow(Type):
    left: Type
    right: Type

    def __str__(self) -> str:
        l = f"({self.left})" if isinstance(self.left, Arrow) else str(self.left)
        return f"{l} -> {self.right}"


def type_order(t: Type) -> int:
    """Order of a simple type: base types are 0, arrows bump the left side."""
    match t:
        case Base():
            return 0
        case Arrow(l, r):
            return max(type_order(l) + 1, type_order(r))
    raise TypeError(f"not a type: {t!r}")


# ---------------------------------------------------------------------------
# terms

class Term:
    pass


@dataclass(frozen=True, eq=False)
class Var(Term):
    name: str


@dataclass(frozen=True, eq=False)
class Cons(Term):
    """Constructor symbol; applied via App, so `S(x)` is App(Cons('S'), x)."""
    name: str


@dataclass(frozen=True, eq=False)
class Op(Term):
    """Operator symbol; total on raw operand terms via numeric read-back."""
    name: str


@dataclass(frozen=True, eq=False)
class App(Term):
    fun: Term
    arg: Term


@dataclass(frozen=True, eq=False)
class Lam(Term):
    var: str
    body: Term
    ann: Optional[Type] = None


@dataclass(frozen=True, eq=False)
class Branch:
    cons: str
    vars: tuple[str, ...]
    body: Term


@dataclass(frozen=True, eq=False)
class Case(Term):
    scrut: Term
    branches: tuple[Branch, ...]


_letrec_tags = 0


def _next_tag() -> int:
    global _letrec_tags
    _letrec_tags += 1
    return _letrec_tags


@dataclass(frozen=True, eq=False)
class LetRec(Term):
    """letRec f = M.  `tag` survives substitution/unfolding so external
    artifacts (candidate interpretations) can refer to this binding site."""
    var: str
    body: Term
    ann: Optional[Type] = None
    tag: int = field(default_factory=_next_tag)


# ---------------------------------------------------------------------------
# signatures

@dataclass(frozen=True)
class ConsDef:
    name: str
    args: tuple[str, ...]   # base type names only
    result: str


@dataclass(frozen=True)
class OpDef:
    name: str
    args: tuple[str, ...]
    result: str
    fn: Callable[..., int]


class Signature:
    def __init__(self) -> None:
        self.base_types: dict[str, list[str]] = {}
        self.cons: dict[str, ConsDef] = {}
        self.ops: dict[str, OpDef] = {}

    def add_base(self, name: str) -> None:
        self.base_types.setdefault(name, [])

    def add_cons(self, name: str, args: tuple[str, ...], result: str) -> None:
        self.add_base(result)
        for a in args:
            self.add_base(a)
        self.cons[name] = ConsDef(name, args, result)
        self.base_types[result].append(name)

    def add_op(self, name: str, args: tuple[str, ...], result: str,
               fn: Callable[..., int]) -> None:
        self.ops[name] = OpDef(name, args, result, fn)

    def is_cons(self, name: str) -> bool:
        return name in self.cons

    def is_op(self, name: str) -> bool:
        return name in self.ops

    def cons_arity(self, name: str) -> int:
        return len(self.cons[name].args)

    def op_arity(self, name: str) -> int:
        return len(self.ops[name].args)

    def constructors_of(self, base: str) -> list[str]:
        return self.base_types.get(base, [])

    def register_tuple(self, n: int, component: str = "D") -> str:
        """Register an n-ary tuple of numerals as a base type; returns its
        name (which doubles as the constructor name)."""
        name = f"Tup{n}"
        if name not in self.cons:
            self.add_cons(name, tuple(component for _ in range(n)), name)
        return name


class ResourceLimit(Exception):
    """A numeric operation would exceed the configured bit budget."""


_bit_limit = 1 << 20


def set_bit_limit(n: int) -> int:
    global _bit_limit
    old, _bit_limit = _bit_limit, n
    return old


def get_bit_limit() -> int:
    return _bit_limit


# numeric primitives (plain binary; |n| = n.bit_length(), so |0| = 0)

def nsize(n: int) -> int:
    return n.bit_length()


def num_cut(n: int) -> int:
    return n >> 1


def num_monus(a: int, b: int) -> int:
    return a - b if a > b else 0


def num_smash(a: int, b: int) -> int:
    """a # b = 2^(|a||b|), except 0 when either operand is 0."""
    if a == 0 or b == 0:
        return 0
    bits = a.bit_length() * b.bit_length()
    if bits > _bit_limit:
        raise ResourceLimit(f"smash result needs {bits} bits")
    return 1 << bits


def num_szsmash(a: int, b: int) -> int:
    """a * b (size smash) = 2^(|a|+|b|)."""
    bits = a.bit_length() + b.bit_length()
    if bits > _bit_limit:
        raise ResourceLimit(f"size-smash result needs {bits} bits")
    return 1 << bits


def num_chkbd(v: int, b: int) -> int:
    return v if v.bit_length() <= b.bit_length() else 0


def num_min(*ns: int) -> int:
    best = ns[0]
    for n in ns[1:]:
        if n.bit_length() < best.bit_length():
            best = n
    return best


def default_signature() -> Signature:
    sig = Signature()
    sig.add_cons("Z", (), "Nat")
    sig.add_cons("S", ("Nat",), "Nat")
    sig.add_cons("Nil", (), "[Nat]")
    sig.add_cons("C", ("Nat", "[Nat]"), "[Nat]")
    sig.add_cons("Eps", (), "D")
    sig.add_cons("D0", ("D",), "D")
    sig.add_cons("D1", ("D",), "D")
    sig.add_op("+", ("D", "D"), "D", lambda a, b: a + b)
    sig.add_op("-", ("D", "D"), "D", num_monus)
    sig.add_op("#", ("D", "D"), "D", num_smash)
    sig.add_op("*", ("D", "D"), "D", num_szsmash)
    sig.add_op("cut", ("D",), "D", num_cut)
    sig.add_op("chkbd", ("D", "D"), "D", num_chkbd)
    sig.add_op("min2", ("D", "D"), "D", num_min)
    sig.add_op("min3", ("D", "D", "D"), "D", num_min)
    return sig


# ---------------------------------------------------------------------------
# numerals as terms (least significant digit outermost)

def encode_num(n: int) -> Term:
    if n < 0:
        raise ValueError("numerals are non-negative")
    t: Term = Cons("Eps")
    for i in reversed(range(n.bit_length())):
        digit = "D1" if (n >> i) & 1 else "D0"
        t = App(Cons(digit), t)
    return t


def decode_num(t: Term) -> int:
    """Inverse of encode_num; accepts non-canonical digit strings too."""
    n = 0
    shift = 0
    while True:
        match t:
            case Cons("Eps"):
                return n
            case App(Cons("D0"), rest):
                shift += 1
                t = rest
            case App(Cons("D1"), rest):
                n |= 1 << shift
                shift += 1
                t = rest
            case _:
                raise ValueError(f"not a numeral: {pretty(t)}")


def nat_term(n: int) -> Term:
    """Unary numeral S^n(Z)."""
    t: Term = Cons("Z")
    for _ in range(n):
        t = App(Cons("S"), t)
    return t


def term_to_nat(t: Term) -> int:
    n = 0
    while True:
        match t:
            case Cons("Z"):
                return n
            case App(Cons("S"), rest):
                n += 1
                t = rest
            case _:
                raise ValueError(f"not a unary numeral: {pretty(t)}")


def list_nat_term(ns: list[int]) -> Term:
    t: Term = Cons("Nil")
    for n in reversed(ns):
        t = App(App(Cons("C"), nat_term(n)), t)
    return t


def term_to_list_nat(t: Term) -> list[int]:
    out: list[int] = []
    while True:
        match t:
            case Cons("Nil"):
                return out
            case App(App(Cons("C"), h), rest):
                out.append(term_to_nat(h))
                t = rest
            case _:
                raise ValueError(f"not a list value: {pretty(t)}")


# ---------------------------------------------------------------------------
# structural helpers

def spine(t: Term) -> tuple[Term, list[Term]]:
    """Unroll applications: returns (head, [arg1, ..., argk])."""
    args: list[Term] = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fun
    args.reverse()
    return t, args


def make_app(head: Term, args: list[Term]) -> Term:
    for a in args:
        head = App(head, a)
    return head


def is_value(t: Term, sig: Signature) -> bool:
    """Values are fully applied constructor trees."""
    head, args = spine(t)
    return (isinstance(head, Cons) and sig.is_cons(head.name)
            and len(args) == sig.cons_arity(head.name)
            and all(is_value(a, sig) for a in args))


def value_size(t: Term) -> int:
    """|c| = 1, |M N| = |M| + |N|: the number of constructor occurrences."""
    match t:
        case App(f, a):
            return value_size(f) + value_size(a)
        case _:
            return 1


def free_vars(t: Term) -> set[str]:
    match t:
        case Var(x):
            return {x}
        case Cons() | Op():
            return set()
        case App(f, a):
            return free_vars(f) | free_vars(a)
        case Lam(x, b, _):
            return free_vars(b) - {x}
        case LetRec(x, b, _, _):
            return free_vars(b) - {x}
        case Case(s, bs):
            out = free_vars(s)
            for br in bs:
                out |= free_vars(br.body) - set(br.vars)
            return out
    raise TypeError(f"not a term: {t!r}")


_fresh_counter = 0


def fresh_name(base: str) -> str:
    global _fresh_counter
    _fresh_counter += 1
    root = base.split("#", 1)[0]
    return f"{root}#{_fresh_counter}"


def subst(t: Term, x: str, s: Term) -> Term:
    """Capture-avoiding t{s/x}.  Keeps letRec tags intact."""
    fv = free_vars(s)

    def go(t: Term) -> Term:
        match t:
            case Var(y):
                return s if y == x else t
            case Cons() | Op():
                return t
            case App(f, a):
                return App(go(f), go(a))
            case Lam(y, b, ann):
                if y == x:
                    return t
                if y in fv:
                    z = fresh_name(y)
                    b = subst(b, y, Var(z))
                    y = z
                return Lam(y, go(b), ann)
            case LetRec(y, b, ann, tag):
                if y == x:
                    return t
                if y in fv:
                    z = fresh_name(y)
                    b = subst(b, y, Var(z))
                    y = z
                return LetRec(y, go(b), ann, tag)
            case Case(sc, bs):
                new_bs = []
                for br in bs:
                    if x in br.vars:
                        new_bs.append(br)
                        continue
                    vs, body = list(br.vars), br.body
                    for i, v in enumerate(vs):
                        if v in fv:
                            z = fresh_name(v)
                            body = subst(body, v, Var(z))
                            vs[i] = z
                    new_bs.append(Branch(br.cons, tuple(vs), go(body)))
                return Case(go(sc), tuple(new_bs))
        raise TypeError(f"not a term: {t!r}")

    return go(t)


def alpha_eq(a: Term, b: Term) -> bool:
    """Structural equality up to bound names (letRec tags ignored)."""

    def go(a: Term, b: Term, env: dict[str, str]) -> bool:
        match a, b:
            case Var(x), Var(y):
                return env.get(x, x) == y
            case Cons(x), Cons(y):
                return x == y
            case Op(x), Op(y):
                return x == y
            case App(f1, a1), App(f2, a2):
                return go(f1, f2, env) and go(a1, a2, env)
            case Lam(x, b1, _), Lam(y, b2, _):
                return go(b1, b2, {**env, x: y})
            case LetRec(x, b1, _, _), LetRec(y, b2, _, _):
                return go(b1, b2, {**env, x: y})
            case Case(s1, bs1), Case(s2, bs2):
                if len(bs1) != len(bs2) or not go(s1, s2, env):
                    return False
                for br1, br2 in zip(bs1, bs2):
                    if br1.cons != br2.cons or len(br1.vars) != len(br2.vars):
                        return False
                    e = dict(env)
                    e.update(zip(br1.vars, br2.vars))
                    if not go(br1.body, br2.body, e):
                        return False
                return True
        return False

    return go(a, b, {})


# ---------------------------------------------------------------------------
# pretty printing
#
# Precedence levels, in the spirit of the usual lambda-calculus printers:
#   0  lambda / letRec / case bodies (lowest, extend to the right)
#   1  application (left associative)
#   2  atoms
# Display names drop the freshness suffix when that cannot capture.

def _display_names(t: Term) -> dict[str, str]:
    """Choose printable names for every binder, avoiding capture."""
    names: dict[str, str] = {}

    def pick(internal: str, avoid: set[str]) -> str:
        base = internal.split("#", 1)[0] or "_"
        if base not in avoid:
            return base
        k = 1
        while f"{base}_{k}" in avoid:
            k += 1
        return f"{base}_{k}"

    def go(t: Term, env: dict[str, str]) -> None:
        match t:
            case Var(_) | Cons(_) | Op(_):
                return
            case App(f, a):
                go(f, env)
                go(a, env)
            case Lam(x, b, _):
                avoid = {env.get(v, v) for v in free_vars(b) if v != x}
                d = pick(x, avoid)
                names[x] = d
                go(b, {**env, x: d})
            case LetRec(x, b, _, _):
                avoid = {env.get(v, v) for v in free_vars(b) if v != x}
                d = pick(x, avoid)
                names[x] = d
                go(b, {**env, x: d})
            case Case(s, bs):
                go(s, env)
                for br in bs:
                    bound = set(br.vars)
                    avoid = {env.get(v, v) for v in free_vars(br.body)
                             if v not in bound}
                    e = dict(env)
                    for v in br.vars:
                        d = pick(v, avoid)
                        names[v] = d
                        avoid.add(d)
                        e[v] = d
                    go(br.body, e)

    go(t, {})
    return names


def pretty(t: Term) -> str:
    names = _display_names(t)

    def name(x: str) -> str:
        return names.get(x, x)

    def ann(x: str, ty: Optional[Type]) -> str:
        return f"({name(x)} : {ty})" if ty is not None else name(x)

    def go(t: Term, prec: int) -> str:
        match t:
            case Var(x):
                return name(x)
            case Cons(c):
                return c
            case Op(o):
                return o
            case App(f, a):
                s = f"{go(f, 1)} {go(a, 2)}"
                return f"({s})" if prec > 1 else s
            case Lam(x, b, ty):
                s = f"fun {ann(x, ty)} -> {go(b, 0)}"
                return f"({s})" if prec > 0 else s
            case LetRec(x, b, ty, _):
                s = f"letRec {ann(x, ty)} = {go(b, 0)}"
                return f"({s})" if prec > 0 else s
            case Case(sc, bs):
                arms = []
                for br in bs:
                    pat = br.cons
                    if br.vars:
                        pat += "(" + ", ".join(name(v) for v in br.vars) + ")"
                    arms.append(f"{pat} -> {go(br.body, 0)}")
                s = f"case {go(sc, 1)} of " + " | ".join(arms)
                return f"({s})" if prec > 0 else s
        raise TypeError(f"not a term: {t!r}")

    return go(t, 0)
