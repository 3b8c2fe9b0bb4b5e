"""Higher-order polynomial expressions over the completed naturals.

Surface syntax:

    poly  ::= '\\' NAME [':' kind] '.' poly
            | sum
    sum   ::= prod  (('+' | '⊕') prod)*
            | prod  '⊔' prod                  (join; flagged as extended)
    prod  ::= app   (('*' | '×') app)*
    app   ::= atom+                           (application, left associative)
    atom  ::= NUMBER | NAME | atom '^' NUMBER | 'max' '(' poly ',' poly ')'
            | '(' poly ')'

`X^2` abbreviates X*X.  `max`/`⊔` go beyond plain polynomials; their use
is recorded so reports can say the certificate used lattice operations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .terms import App, LetRec, Signature, Term
from .domain import (Fun, Grid, InterpSettings, LetRecReport, TOP, Witness,
                     check_letrec, dom_apply, dom_le, interp, InterpError,
                     letrec_nodes, nadd, nmax, nmul, resolve_path, top_at)
from .typecheck import infer


class PolyError(Exception):
    pass


class Poly:
    pass


@dataclass(frozen=True)
class PConst(Poly):
    value: int


@dataclass(frozen=True)
class PVar(Poly):
    name: str


@dataclass(frozen=True)
class PPrim(Poly):
    name: str       # 'add' | 'mul' | 'max'


@dataclass(frozen=True)
class PApp(Poly):
    fun: Poly
    arg: Poly


@dataclass(frozen=True)
class PLam(Poly):
    var: str
    body: Poly
    kind: Optional[str] = None


def _p2(prim: str, a: Poly, b: Poly) -> Poly:
    return PApp(PApp(PPrim(prim), a), b)


# ---------------------------------------------------------------------------
# parsing


def _tokens(src: str) -> list[str]:
    out: list[str] = []
    i = 0
    while i < len(src):
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit():
            j = i
            while j < len(src) and src[j].isdigit():
                j += 1
            out.append(src[i:j])
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < len(src) and (src[j].isalnum() or src[j] == "_"):
                j += 1
            out.append(src[i:j])
            i = j
            continue
        if src.startswith("->", i):
            out.append("->")
            i += 2
            continue
        if c in "\\.():+*^,":
            out.append(c)
            i += 1
            continue
        if c == "Λ":
            out.append("\\")
            i += 1
            continue
        if c == "×":
            out.append("*")
            i += 1
            continue
        if c == "⊕":
            out.append("+")
            i += 1
            continue
        if c == "⊔":
            out.append("⊔")
            i += 1
            continue
        raise PolyError(f"bad character {c!r} in polynomial")
    out.append("<eof>")
    return out


@dataclass
class ParsedPoly:
    poly: Poly
    uses_join: bool = False


class _PP:
    def __init__(self, toks: list[str]):
        self.toks = toks
        self.i = 0
        self.uses_join = False

    def peek(self) -> str:
        return self.toks[self.i]

    def next(self) -> str:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, t: str) -> None:
        got = self.next()
        if got != t:
            raise PolyError(f"expected {t!r}, found {got!r}")

    def poly(self) -> Poly:
        if self.peek() == "\\":
            self.next()
            name = self.next()
            if not (name[0].isalpha() or name[0] == "_"):
                raise PolyError(f"expected a name after lambda, found {name!r}")
            kind = None
            if self.peek() == ":":
                self.next()
                kind = self.kind()
            self.expect(".")
            return PLam(name, self.poly(), kind)
        return self.sum()

    def kind(self) -> str:
        # just recognised and stored for documentation: name, ->, parens
        parts: list[str] = []
        depth = 0
        while True:
            t = self.peek()
            if t == "(":
                depth += 1
            elif t == ")":
                if depth == 0:
                    break
                depth -= 1
            elif t in (".", "<eof>") and depth == 0:
                break
            parts.append(self.next())
        return " ".join(parts)

    def sum(self) -> Poly:
        left = self.prod()
        while self.peek() in ("+", "⊔"):
            op = self.next()
            right = self.prod()
            if op == "⊔":
                self.uses_join = True
                left = _p2("max", left, right)
            else:
                left = _p2("add", left, right)
        return left

    def prod(self) -> Poly:
        left = self.app()
        while self.peek() == "*":
            self.next()
            left = _p2("mul", left, self.app())
        return left

    def app(self) -> Poly:
        t = self.atom()
        if t is None:
            raise PolyError(f"expected a polynomial, found {self.peek()!r}")
        while True:
            nxt = self.atom(optional=True)
            if nxt is None:
                return t
            t = PApp(t, nxt)

    def atom(self, optional: bool = False) -> Poly | None:
        t = self.peek()
        out: Poly | None = None
        if t == "(":
            self.next()
            out = self.poly()
            self.expect(")")
        elif t.isdigit():
            out = PConst(int(self.next()))
        elif t == "max":
            self.next()
            self.expect("(")
            a = self.poly()
            self.expect(",")
            b = self.poly()
            self.expect(")")
            self.uses_join = True
            out = _p2("max", a, b)
        elif t[0].isalpha() or t[0] == "_":
            out = PVar(self.next())
        else:
            if optional:
                return None
            raise PolyError(f"expected a polynomial, found {t!r}")
        while self.peek() == "^":
            self.next()
            p = self.next()
            if not p.isdigit():
                raise PolyError(f"expected an exponent, found {p!r}")
            n = int(p)
            if n == 0:
                out = PConst(1)
            else:
                acc = out
                for _ in range(n - 1):
                    acc = _p2("mul", acc, out)
                out = acc
        return out


def parse_poly(src: str) -> ParsedPoly:
    p = _PP(_tokens(src))
    out = p.poly()
    if p.peek() != "<eof>":
        raise PolyError(f"unexpected trailing input {p.peek()!r}")
    return ParsedPoly(out, p.uses_join)


def poly_pretty(p: Poly) -> str:
    match p:
        case PConst(v):
            return str(v)
        case PVar(x):
            return x
        case PPrim(n):
            return {"add": "+", "mul": "*", "max": "max"}[n]
        case PApp(PApp(PPrim("add"), a), b):
            return f"{poly_pretty(a)} + {poly_pretty(b)}"
        case PApp(PApp(PPrim("mul"), a), b):
            return f"{_paren_mul(a)} * {_paren_mul(b)}"
        case PApp(PApp(PPrim("max"), a), b):
            return f"max({poly_pretty(a)}, {poly_pretty(b)})"
        case PApp(f, a):
            return f"{_paren_app(f)} {_paren_atom(a)}"
        case PLam(x, body, kind):
            ann = f":{kind}" if kind else ""
            return f"\\{x}{ann}. {poly_pretty(body)}"
    raise PolyError(f"not a polynomial: {p!r}")


def _paren_mul(p: Poly) -> str:
    s = poly_pretty(p)
    match p:
        case PApp(PApp(PPrim("add"), _), _) | PLam(_, _, _):
            return f"({s})"
    return s


def _paren_app(p: Poly) -> str:
    s = poly_pretty(p)
    return f"({s})" if isinstance(p, PLam) else s


def _paren_atom(p: Poly) -> str:
    s = poly_pretty(p)
    match p:
        case PConst(_) | PVar(_):
            return s
    return f"({s})"


# ---------------------------------------------------------------------------
# evaluation and composition


def poly_eval(p: Poly, env: dict[str, object] | None = None):
    env = env or {}

    def go(p: Poly, env: dict[str, object]):
        match p:
            case PConst(v):
                return v
            case PVar(x):
                if x not in env:
                    raise PolyError(f"unbound polynomial variable {x}")
                return env[x]
            case PPrim("add"):
                return Fun(lambda a: Fun(lambda b: nadd(a, b), "+"), "+")
            case PPrim("mul"):
                return Fun(lambda a: Fun(lambda b: nmul(a, b), "*"), "*")
            case PPrim("max"):
                return Fun(lambda a: Fun(lambda b: nmax(a, b), "max"), "max")
            case PApp(f, a):
                return dom_apply(go(f, env), go(a, env))
            case PLam(x, body, _):
                return Fun(lambda v: go(body, {**env, x: v}),
                           poly_pretty(p))
        raise PolyError(f"not a polynomial: {p!r}")

    return go(p, env)


_compose_counter = 0


def poly_compose(p: Poly, q: Poly) -> Poly:
    """(p . q) as a unary polynomial: \\X. p (q X)."""
    global _compose_counter
    _compose_counter += 1
    x = f"_c{_compose_counter}"
    return PLam(x, PApp(p, PApp(q, PVar(x))))


# ---------------------------------------------------------------------------
# candidate files

# A candidate file maps letRec occurrences (by child-index path from the
# root) to candidate levels.  Two shapes:
#   {"path": "", "poly": "\\X. 6*X^2 + 5"}
#   {"path": "", "gate": {"var": "G", "le": "\\X. X + 3"},
#    "then": "\\Y. 8*Y^2 + 4", "else": "top"}
# The gated shape tests the candidate's first argument against a bound on
# the sample grid and falls back to the top level when the test fails.


@dataclass
class CandidateInfo:
    path: str
    tag: int
    source: dict
    value: object
    uses_join: bool = False


def load_candidates(term: Term, spec: dict, sig: Signature,
                    grid: Grid | None = None) -> list[CandidateInfo]:
    grid = grid or Grid()
    out: list[CandidateInfo] = []
    for entry in spec.get("candidates", []):
        path = entry.get("path", "")
        node = resolve_path(term, path)
        if not isinstance(node, LetRec):
            raise PolyError(f"candidate path {path!r} is not a letRec")
        if node.ann is None:
            raise PolyError(f"letRec at path {path!r} has no annotation")
        uses_join = False
        if "poly" in entry:
            parsed = parse_poly(entry["poly"])
            uses_join = parsed.uses_join
            value = poly_eval(parsed.poly)
        elif "gate" in entry:
            gate = entry["gate"]
            bound_p = parse_poly(gate["le"])
            then_p = parse_poly(entry["then"])
            uses_join = bound_p.uses_join or then_p.uses_join
            if entry.get("else", "top") != "top":
                raise PolyError("gated candidate: only 'top' fallback is supported")
            arg_ty = node.ann.left
            res_ty = node.ann.right
            bound_v = poly_eval(bound_p.poly)
            var = gate.get("var", "G")

            def make(bound_v=bound_v, then_p=then_p, var=var,
                     arg_ty=arg_ty, res_ty=res_ty):
                def outer(g):
                    if dom_le(g, bound_v, arg_ty, grid) is None:
                        return poly_eval(then_p.poly, {var: g})
                    return top_at(res_ty)
                return Fun(outer, "gated")

            value = make()
        else:
            raise PolyError(f"candidate entry for path {path!r} needs "
                            f"'poly' or 'gate'")
        out.append(CandidateInfo(path, node.tag, entry, value, uses_join))
    return out


def load_candidate_file(term: Term, path: str, sig: Signature,
                        grid: Grid | None = None) -> list[CandidateInfo]:
    with open(path) as fh:
        return load_candidates(term, json.load(fh), sig, grid)


# ---------------------------------------------------------------------------
# certification


@dataclass
class CertReport:
    verdict: str                       # holds-on-grid | fail
    order: int
    letrecs: list[LetRecReport] = field(default_factory=list)
    bound_witness: Optional[Witness] = None
    extended: bool = False

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "order": self.order,
            "extended": self.extended,
            "letrec_checks": [
                {
                    "path": r.path,
                    "type": str(r.ty),
                    "verdict": r.verdict,
                    "witness": str(r.witness) if r.witness else None,
                }
                for r in self.letrecs
            ],
            "bound_witness": (str(self.bound_witness)
                              if self.bound_witness else None),
        }


def certify(term: Term, sig: Signature, candidates: list[CandidateInfo],
            poly: ParsedPoly | None, grid: Grid | None = None,
            lfp_fuel: int = 64) -> CertReport:
    """Check every supplied letRec candidate is a pre-fixpoint on the grid,
    then (optionally) that the whole term's level is below the polynomial."""
    grid = grid or Grid()
    ty = infer(term, sig)
    from .terms import type_order
    settings = InterpSettings(grid=grid,
                              candidates={c.tag: c.value for c in candidates},
                              lfp_fuel=lfp_fuel)
    report = CertReport("holds-on-grid", type_order(ty),
                        extended=(poly.uses_join if poly else False)
                        or any(c.uses_join for c in candidates))

    by_tag = {c.tag: c for c in candidates}
    for node in letrec_nodes(term):
        if node.tag in by_tag:
            info = by_tag[node.tag]
            rep = check_letrec(node, info.value, sig, settings)
            rep.path = info.path
            report.letrecs.append(rep)
            if rep.verdict != "holds-on-grid":
                report.verdict = "fail"
    if report.verdict == "fail":
        return report

    if poly is not None:
        level = interp(term, sig, settings)
        bound = poly_eval(poly.poly)
        w = dom_le(level, bound, ty, grid)
        if w is not None:
            report.verdict = "fail"
            report.bound_witness = w
    return report
