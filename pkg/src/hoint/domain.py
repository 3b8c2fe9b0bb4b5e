"""Interpretation domain: completed naturals and monotone function spaces.

Every base type is interpreted by the naturals completed with Top; an
arrow type by monotone total functions, ordered pointwise.  Functions are
represented as memoizing callables, so equality/order can only be tested
by sampling on finite grids — results of such checks are explicitly
"holds on this grid", never a proof.

The interpretation of a term assigns:
  variable        its environment value
  constructor     1 plus the sum of the (curried) arguments
  operator        a fixed sound size bound (see SUP_INTERP)
  application     application
  lambda          1 plus the pointwise function
  case            1 plus the sup, over branches and over constructor
                  argument levels consistent with the scrutinee level, of
                  (scrutinee level + branch body level); the constraint is
                  1 + sum(args) <= scrutinee level, and by monotonicity the
                  sup is attained where the argument levels exhaust the
                  budget, so only that face is enumerated
  letRec          a supplied candidate (checked elsewhere to dominate one
                  unfolding), or a least-fixpoint computation when the
                  bound function only takes base-type arguments
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

from .terms import (App, Arrow, Base, Case, Cons, Lam, LetRec, Op, Signature,
                    Term, Type, Var, free_vars, pretty)
from .typecheck import TypecheckError, infer


class InterpError(Exception):
    pass


# ---------------------------------------------------------------------------
# completed naturals


class _Top:
    _instance: Optional["_Top"] = None

    def __new__(cls) -> "_Top":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Top"


TOP = _Top()

# DomVal = int | _Top | Fun


def is_nat(v) -> bool:
    return isinstance(v, int)


def nadd(a, b):
    if a is TOP or b is TOP:
        return TOP
    return a + b


def nmul(a, b):
    if a == 0 or b == 0:
        return 0
    if a is TOP or b is TOP:
        return TOP
    return a * b


def nmax(a, b):
    if a is TOP or b is TOP:
        return TOP
    return a if a >= b else b


def nmin(a, b):
    if a is TOP:
        return b
    if b is TOP:
        return a
    return a if a <= b else b


def nmonus(a, b):
    if a is TOP:
        return TOP
    if b is TOP:
        return 0
    return a - b if a > b else 0


def nle(a, b) -> bool:
    if b is TOP:
        return True
    if a is TOP:
        return False
    return a <= b


class Fun:
    """A monotone function on domain values, memoized per argument.

    Numeric arguments key the memo by value, function arguments by
    identity (two equal-but-distinct function arguments just miss)."""

    __slots__ = ("fn", "label", "_memo")

    def __init__(self, fn: Callable, label: str = "<fun>"):
        self.fn = fn
        self.label = label
        self._memo: dict = {}

    def app(self, x):
        key = x if isinstance(x, int) or x is TOP else id(x)
        if key not in self._memo:
            self._memo[key] = self.fn(x)
        return self._memo[key]

    def __repr__(self) -> str:
        return self.label


def dom_apply(f, *args):
    for a in args:
        if not isinstance(f, Fun):
            raise InterpError(f"cannot apply non-function level {f!r}")
        f = f.app(a)
    return f


def dplus(a, b):
    """Pointwise addition, lifted through function spaces."""
    if isinstance(a, Fun) or isinstance(b, Fun):
        if not (isinstance(a, Fun) and isinstance(b, Fun)):
            raise InterpError("adding levels of different shapes")
        return Fun(lambda x: dplus(a.app(x), b.app(x)), f"({a!r} + {b!r})")
    return nadd(a, b)


def plus_const(c: int, v):
    """c + v with the constant lifted pointwise."""
    if isinstance(v, Fun):
        return Fun(lambda x: plus_const(c, v.app(x)), f"({c} + {v!r})")
    return nadd(c, v)


def djoin(a, b):
    if isinstance(a, Fun) or isinstance(b, Fun):
        if not (isinstance(a, Fun) and isinstance(b, Fun)):
            raise InterpError("joining levels of different shapes")
        return Fun(lambda x: djoin(a.app(x), b.app(x)), f"({a!r} | {b!r})")
    return nmax(a, b)


def bottom_at(ty: Type):
    if isinstance(ty, Base):
        return 0
    return Fun(lambda _x: bottom_at(ty.right), "bottom")


def top_at(ty: Type):
    if isinstance(ty, Base):
        return TOP
    return Fun(lambda _x: top_at(ty.right), "Top")


def const_at(c: int, ty: Type):
    if isinstance(ty, Base):
        return c
    return Fun(lambda _x: const_at(c, ty.right), str(c))


def show_dom(v) -> str:
    return repr(v) if not isinstance(v, int) else str(v)


# ---------------------------------------------------------------------------
# grids and order checks


def _affine(a: int, c: int) -> Fun:
    if a == 0:
        label = str(c)
    else:
        mult = "X" if a == 1 else f"{a}X"
        label = mult if c == 0 else f"{mult}+{c}"
    return Fun(lambda x: nadd(nmul(a, x), c), label)


DEFAULT_BASE_POINTS = (1, 2, 3, 4, 5, 8, 16, TOP)


class Grid:
    """Finite sample sets per type, for order and monotonicity checks."""

    def __init__(self, base=DEFAULT_BASE_POINTS, extra: dict | None = None):
        self.base = tuple(base)
        # extra: maps str(type) -> list of additional sample values
        self.extra = dict(extra or {})

    def add_sample(self, ty: Type, v) -> None:
        self.extra.setdefault(str(ty), []).append(v)

    def samples(self, ty: Type) -> list:
        if isinstance(ty, Base):
            return list(self.base)
        out: list = []
        if isinstance(ty.left, Base) and isinstance(ty.right, Base):
            out.extend(_affine(a, c) for a in (0, 1, 2) for c in (0, 1, 3))
        else:
            out.append(bottom_at(ty))
            out.append(top_at(ty))
        out.extend(self.extra.get(str(ty), []))
        return out


@dataclass
class Witness:
    """A grid point where an order claim failed."""
    args: list
    lhs: object
    rhs: object

    def __str__(self) -> str:
        at = ", ".join(show_dom(a) for a in self.args)
        return (f"at ({at}): left level {show_dom(self.lhs)} exceeds "
                f"right level {show_dom(self.rhs)}")


def dom_le(a, b, ty: Type, grid: Grid) -> Optional[Witness]:
    """Check a <= b by sampling; None means it holds on the grid."""
    if isinstance(ty, Base):
        if not isinstance(a, (int, _Top)) or not isinstance(b, (int, _Top)):
            raise InterpError("function level at base type")
        if nle(a, b):
            return None
        return Witness([], a, b)
    for x in grid.samples(ty.left):
        w = dom_le(dom_apply(a, x), dom_apply(b, x), ty.right, grid)
        if w is not None:
            return Witness([x] + w.args, w.lhs, w.rhs)
    return None


def check_monotone(f, ty: Type, grid: Grid) -> Optional[Witness]:
    """Sample-check that f is monotone in each argument position."""
    if isinstance(ty, Base):
        return None
    pts = grid.samples(ty.left)
    for x, y in itertools.combinations(pts, 2):
        if isinstance(x, Fun) or isinstance(y, Fun):
            continue
        lo, hi = (x, y) if nle(x, y) else (y, x)
        w = dom_le(dom_apply(f, lo), dom_apply(f, hi), ty.right, grid)
        if w is not None:
            return Witness([lo] + w.args, w.lhs, w.rhs)
    for x in pts:
        w = check_monotone(dom_apply(f, x), ty.right, grid)
        if w is not None:
            return Witness([x] + w.args, w.lhs, w.rhs)
    return None


# ---------------------------------------------------------------------------
# operator bounds (sound for the term-size level of the result)


def _curry2(f: Callable, label: str) -> Fun:
    return Fun(lambda x: Fun(lambda y: f(x, y), label), label)


def _curry3(f: Callable, label: str) -> Fun:
    return Fun(lambda x: Fun(lambda y: Fun(lambda z: f(x, y, z), label),
                             label), label)


def sup_interp(op: str) -> Fun:
    builders: dict[str, Callable[[], Fun]] = {
        "+": lambda: _curry2(nadd, "X+Y"),
        "-": lambda: _curry2(lambda x, _y: x, "X"),
        "#": lambda: _curry2(nmul, "X*Y"),
        "*": lambda: _curry2(nadd, "X+Y"),
        "cut": lambda: Fun(lambda x: nmax(nmonus(x, 1), nmin(x, 1)),
                           "max(X-1,min(X,1))"),
        "chkbd": lambda: _curry2(lambda _x, y: y, "Y"),
        "min2": lambda: _curry2(nmin, "min"),
        "min3": lambda: _curry3(lambda x, y, z: nmin(nmin(x, y), z), "min"),
    }
    if op not in builders:
        raise InterpError(f"no size bound registered for operator {op}")
    return builders[op]()


def _cons_interp(arity: int) -> object:
    """1 plus the sum of the arguments, curried."""
    def build(acc, left: int):
        if left == 0:
            return nadd(1, acc)
        return Fun(lambda x: build(nadd(acc, x), left - 1), "cons")

    return build(0, arity)


# ---------------------------------------------------------------------------
# the interpretation


def _compositions(total: int, k: int):
    """All k-tuples of naturals summing to total."""
    if k == 0:
        if total == 0:
            yield ()
        return
    if k == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, k - 1):
            yield (first,) + rest


@dataclass
class InterpSettings:
    grid: Grid = field(default_factory=Grid)
    candidates: dict[int, object] = field(default_factory=dict)
    lfp_fuel: int = 64


def interp(t: Term, sig: Signature, settings: InterpSettings | None = None,
           env: dict[str, object] | None = None,
           tenv: dict[str, Type] | None = None):
    """Interpretation level of a (fully annotated) term."""
    settings = settings or InterpSettings()
    tenv = tenv or {}
    typemap: dict[int, Type] = {}
    infer(t, sig, dict(tenv), record=typemap)

    # A case's level depends on its scrutinee only through the scrutinee's
    # level (the branch sup redistributes it), so per-node memoization on
    # (level, other free bindings) is exact.  Without it, chained
    # tuple-pattern cases enumerate their split points multiplicatively.
    case_env_vars: dict[int, tuple[str, ...]] = {}
    case_memo: dict[tuple, object] = {}
    letrec_env_vars: dict[int, tuple[str, ...]] = {}
    letrec_memo: dict[tuple, object] = {}
    _UNBOUND = object()

    def _case_key(t: Case, s, env: dict[str, object]):
        names = case_env_vars.get(id(t))
        if names is None:
            acc: set[str] = set()
            for br in t.branches:
                acc |= free_vars(br.body) - set(br.vars)
            names = tuple(sorted(acc))
            case_env_vars[id(t)] = names
        return (id(t), s) + tuple(env.get(v, _UNBOUND) for v in names)

    def _letrec_key(t: LetRec, env: dict[str, object]):
        names = letrec_env_vars.get(id(t))
        if names is None:
            names = tuple(sorted(free_vars(t)))
            letrec_env_vars[id(t)] = names
        return (id(t),) + tuple(env.get(v, _UNBOUND) for v in names)

    def go(t: Term, env: dict[str, object]):
        match t:
            case Var(x):
                if x not in env:
                    raise InterpError(f"no level for free variable {x}")
                return env[x]
            case Cons(c):
                return _cons_interp(sig.cons_arity(c))
            case Op(o):
                return sup_interp(o)
            case App(f, a):
                return dom_apply(go(f, env), go(a, env))
            case Lam(x, body, _):
                return plus_const(
                    1, Fun(lambda v: go(body, {**env, x: v}), "lam"))
            case Case(scrut, branches):
                s = go(scrut, env)
                if isinstance(s, Fun):
                    raise InterpError("scrutinee level is a function")
                ty = typemap[id(t)]
                if s is TOP:
                    # the scrutinee summand makes every branch Top
                    return top_at(ty)
                key = _case_key(t, s, env)
                if key in case_memo:
                    return case_memo[key]
                out = bottom_at(ty)
                for br in branches:
                    k = len(br.vars)
                    if s < 1:
                        continue
                    if k == 0:
                        choices = [()]
                    else:
                        choices = _compositions(s - 1, k)
                    for levels in choices:
                        inner = dict(env)
                        inner.update(zip(br.vars, levels))
                        out = djoin(out, plus_const(s, go(br.body, inner)))
                res = plus_const(1, out)
                case_memo[key] = res
                return res
            case LetRec(f, body, ann, tag):
                if tag in settings.candidates:
                    return settings.candidates[tag]
                if ann is None:
                    raise InterpError("letRec without annotation")
                if _base_chain(ann):
                    # one fixpoint computation per (node, free bindings):
                    # revisits reuse both the value and its internal memo,
                    # and downstream case keys see a stable Fun identity
                    lkey = _letrec_key(t, env)
                    if lkey not in letrec_memo:
                        letrec_memo[lkey] = _lfp_base_chain(
                            lambda fv: plus_const(1, go(body, {**env, f: fv})),
                            ann, settings.lfp_fuel)
                    return letrec_memo[lkey]
                raise InterpError(
                    "letRec over function arguments needs a candidate level")
        raise InterpError(f"not a term: {t!r}")

    return go(t, env or {})


def _base_chain(ty: Type) -> bool:
    """b1 -> ... -> bk -> b with every bi a base type (k may be 0)."""
    while isinstance(ty, Arrow):
        if not isinstance(ty.left, Base):
            return False
        ty = ty.right
    return True


def _chain_arity(ty: Type) -> int:
    n = 0
    while isinstance(ty, Arrow):
        n += 1
        ty = ty.right
    return n


def _lfp_base_chain(rhs_of: Callable, ty: Type, fuel: int):
    """Least fixpoint of F -> rhs_of(F) for base-argument chains, computed
    demand-driven: ascend from bottom, per queried point, declaring Top if
    the ascent has not stabilised within `fuel` rounds."""
    k = _chain_arity(ty)
    memo: dict[tuple[int, tuple], object] = {}
    queried: dict[int, set] = {}
    rhs_vals: dict[int, object] = {}

    def level_fun(n: int):
        if k == 0:
            return query((), n)

        def collector(prefix: tuple):
            if len(prefix) == k:
                return query(prefix, n)
            return Fun(lambda x: collector(prefix + (x,)), f"lfp[{n}]")

        return collector(())

    def query(pt: tuple, n: int):
        if n == 0:
            return 0
        key = (n, pt)
        if key in memo:
            return memo[key]
        if n not in rhs_vals:
            rhs_vals[n] = rhs_of(level_fun(n - 1))
        queried.setdefault(n, set()).add(pt)
        v = dom_apply(rhs_vals[n], *pt) if k else rhs_vals[n]
        memo[key] = v
        return v

    def outer(pt: tuple):
        for n in range(1, fuel + 1):
            v = query(pt, n)
            # converged when this level agrees with the previous one on the
            # whole dependency closure of the computation (checking may pull
            # in new dependencies, so iterate until the closure is stable)
            while True:
                deps = set(queried.get(n - 1, set())) | {pt}
                before = len(queried.get(n - 1, set()))
                ok = all(query(q, n) == query(q, n - 1) for q in deps)
                if len(queried.get(n - 1, set())) == before:
                    break
            if ok:
                return v
        return TOP

    if k == 0:
        return outer(())

    def collector(prefix: tuple):
        if len(prefix) == k:
            return outer(prefix)
        return Fun(lambda x: collector(prefix + (x,)), "lfp")

    return collector(())


# ---------------------------------------------------------------------------
# candidate checking


@dataclass
class LetRecReport:
    tag: int
    ty: Type
    verdict: str                    # "holds-on-grid" | "fail"
    witness: Optional[Witness] = None
    path: str = ""                  # candidate path; stable across runs


def check_letrec(node: LetRec, candidate, sig: Signature,
                 settings: InterpSettings,
                 env: dict[str, object] | None = None,
                 tenv: dict[str, Type] | None = None) -> LetRecReport:
    """Is the candidate a pre-fixpoint of the bound function's one-step
    unfolding, on the grid?"""
    if node.ann is None:
        raise InterpError("letRec without annotation")
    inner = dict(tenv or {})
    inner[node.var] = node.ann
    rhs = plus_const(1, interp(node.body, sig, settings,
                               env={**(env or {}), node.var: candidate},
                               tenv=inner))
    w = dom_le(rhs, candidate, node.ann, settings.grid)
    if w is None:
        return LetRecReport(node.tag, node.ann, "holds-on-grid")
    return LetRecReport(node.tag, node.ann, "fail", w)


def letrec_nodes(t: Term) -> list[LetRec]:
    out: list[LetRec] = []

    def go(t: Term) -> None:
        match t:
            case LetRec(_, body, _, _):
                out.append(t)
                go(body)
            case App(f, a):
                go(f)
                go(a)
            case Lam(_, body, _):
                go(body)
            case Case(s, bs):
                go(s)
                for br in bs:
                    go(br.body)
            case _:
                pass

    go(t)
    return out


def resolve_path(t: Term, path: str) -> Term:
    """Child-index path: '' is the root; App children are 0 (function) and
    1 (argument); lambda/letRec bodies are 0; case scrutinee is 0 and the
    i-th branch body is i+1."""
    if path == "":
        return t
    for raw in path.split("."):
        i = int(raw)
        match t:
            case App(f, a):
                t = (f, a)[i]
            case Lam(_, body, _) | LetRec(_, body, _, _):
                if i != 0:
                    raise InterpError(f"no child {i} under a binder")
                t = body
            case Case(s, bs):
                t = s if i == 0 else bs[i - 1].body
            case _:
                raise InterpError(f"path steps into a leaf at {i}")
    return t
