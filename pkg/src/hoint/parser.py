"""Surface syntax for terms and types.

    term   ::= 'fun' binder '->' term
             | 'letRec' binder '=' term
             | 'case' term 'of' arm ('|' arm)*
             | atom+                          (application, left associative)
    atom   ::= name | Cons | Cons '(' term {',' term} ')' | opsym | '(' term ')'
    binder ::= name | '(' name ':' type ')'
    arm    ::= Cons ['(' name {',' name} ')'] '->' term
    type   ::= btype ['->' type]
    btype  ::= name | '[' name ']' | '(' type ')'

Identifiers are resolved against the signature: constructor names become
constructor atoms, operator names (and the symbols + - # *) become operator
atoms, everything else is a variable.  Binders are alpha-freshened globally,
so downstream code can assume distinct bound names; the pretty printer
undoes the suffixes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .terms import (App, Arrow, Base, Branch, Case, Cons, Lam, LetRec, Op,
                    Signature, Term, Type, Var, fresh_name)

KEYWORDS = {"fun", "letRec", "case", "of"}
OP_SYMBOLS = {"+", "-", "#", "*"}


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


@dataclass
class Token:
    kind: str   # 'ident', 'sym', 'eof'
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "-" and i + 1 < n and src[i + 1] == "-":
            while i < n and src[i] != "\n":   # line comment
                i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] in "_'"):
                j += 1
            toks.append(Token("ident", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if src.startswith("->", i):
            toks.append(Token("sym", "->", line, col))
            i += 2
            col += 2
            continue
        if c in "()[],|:=" or c in OP_SYMBOLS:
            toks.append(Token("sym", c, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks: list[Token], sig: Signature):
        self.toks = toks
        self.pos = 0
        self.sig = sig

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, msg: str) -> "ParseError":
        t = self.peek()
        return ParseError(msg, t.line, t.col)

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text or t.kind == "eof":
            raise self.fail(f"expected {text!r}, found {t.text or 'end of input'!r}")
        return self.next()

    def at_sym(self, text: str) -> bool:
        t = self.peek()
        return t.kind == "sym" and t.text == text

    # -- types --------------------------------------------------------------

    def parse_type(self) -> Type:
        left = self.parse_btype()
        if self.at_sym("->"):
            self.next()
            return Arrow(left, self.parse_type())
        return left

    def parse_btype(self) -> Type:
        t = self.peek()
        if t.text == "(":
            self.next()
            ty = self.parse_type()
            self.expect(")")
            return ty
        if t.text == "[":
            self.next()
            inner = self.next()
            if inner.kind != "ident":
                raise self.fail("expected a type name inside [ ]")
            self.expect("]")
            return Base(f"[{inner.text}]")
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.next()
            return Base(t.text)
        raise self.fail(f"expected a type, found {t.text!r}")

    # -- terms --------------------------------------------------------------

    def parse_binder(self) -> tuple[str, Type | None]:
        if self.at_sym("("):
            self.next()
            t = self.next()
            if t.kind != "ident" or t.text in KEYWORDS:
                raise self.fail("expected a name in binder")
            self.expect(":")
            ty = self.parse_type()
            self.expect(")")
            return t.text, ty
        t = self.next()
        if t.kind != "ident" or t.text in KEYWORDS:
            raise ParseError("expected a binder", t.line, t.col)
        return t.text, None

    def parse_term(self, env: dict[str, str]) -> Term:
        t = self.peek()
        if t.text == "fun":
            self.next()
            surface, ty = self.parse_binder()
            self.expect("->")
            internal = fresh_name(surface)
            body = self.parse_term({**env, surface: internal})
            return Lam(internal, body, ty)
        if t.text == "letRec":
            self.next()
            surface, ty = self.parse_binder()
            self.expect("=")
            internal = fresh_name(surface)
            body = self.parse_term({**env, surface: internal})
            return LetRec(internal, body, ty)
        if t.text == "case":
            self.next()
            scrut = self.parse_app(env)
            self.expect("of")
            branches = [self.parse_arm(env)]
            while self.at_sym("|"):
                self.next()
                branches.append(self.parse_arm(env))
            return Case(scrut, tuple(branches))
        return self.parse_app(env)

    def parse_arm(self, env: dict[str, str]) -> Branch:
        t = self.next()
        if t.kind != "ident" or not self.sig.is_cons(t.text):
            raise ParseError(f"expected a constructor pattern, found {t.text!r}",
                             t.line, t.col)
        names: list[str] = []
        if self.at_sym("("):
            self.next()
            while True:
                v = self.next()
                if v.kind != "ident" or v.text in KEYWORDS:
                    raise ParseError("expected a pattern variable", v.line, v.col)
                names.append(v.text)
                if self.at_sym(","):
                    self.next()
                    continue
                break
            self.expect(")")
        arity = self.sig.cons_arity(t.text)
        if len(names) != arity:
            raise ParseError(
                f"constructor {t.text} takes {arity} argument(s), pattern has "
                f"{len(names)}", t.line, t.col)
        internals = [fresh_name(v) for v in names]
        inner = dict(env)
        inner.update(zip(names, internals))
        self.expect("->")
        body = self.parse_term(inner)
        return Branch(t.text, tuple(internals), body)

    def parse_app(self, env: dict[str, str]) -> Term:
        t = self.parse_atom(env)
        if t is None:
            raise self.fail("expected a term")
        while True:
            nxt = self.parse_atom(env, optional=True)
            if nxt is None:
                return t
            t = App(t, nxt)

    def parse_atom(self, env: dict[str, str], optional: bool = False) -> Term | None:
        t = self.peek()
        if t.kind == "sym" and t.text in OP_SYMBOLS:
            self.next()
            return Op(t.text)
        if t.kind == "sym" and t.text == "(":
            self.next()
            inner = self.parse_term(env)
            self.expect(")")
            return inner
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.next()
            name = t.text
            if self.sig.is_cons(name):
                # call-style sugar: C(a, b) means (C a) b, but only when the
                # paren is glued to the name — `f C (x)` keeps C as a bare
                # argument of f.
                if self.at_sym("(") and self._adjacent(t):
                    self.next()
                    args = [self.parse_term(env)]
                    while self.at_sym(","):
                        self.next()
                        args.append(self.parse_term(env))
                    self.expect(")")
                    out: Term = Cons(name)
                    for a in args:
                        out = App(out, a)
                    return out
                return Cons(name)
            if self.sig.is_op(name):
                return Op(name)
            return Var(env.get(name, name))
        if optional:
            return None
        raise self.fail(f"expected a term, found {t.text or 'end of input'!r}")

    def _adjacent(self, ident: Token) -> bool:
        nxt = self.peek()
        return nxt.line == ident.line and nxt.col == ident.col + len(ident.text)


def parse_term(src: str, sig: Signature) -> Term:
    p = _Parser(tokenize(src), sig)
    t = p.parse_term({})
    if p.peek().kind != "eof":
        raise p.fail(f"unexpected trailing input {p.peek().text!r}")
    return t


def parse_type(src: str) -> Type:
    p = _Parser(tokenize(src), Signature())
    ty = p.parse_type()
    if p.peek().kind != "eof":
        raise p.fail(f"unexpected trailing input {p.peek().text!r}")
    return ty
