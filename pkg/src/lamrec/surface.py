"""Parser and printer for the shared ASCII surface syntax.

Types:     Unit | Bool | T -> T | T * T | T + T | mu a. T | a
Terms:     unit | true | false | x | \\x:T. t | t t | (t, t) | t.1 | t.2
           | inl t | inr t | case t of inl x -> t | inr x -> t
           | if t then t else t | t; t | fix[T] t | fold[T] t | unfold[T] t
Contexts:  terms extended with `_` for the hole.

`->` is right-associative; `*` binds tighter than `+`, which binds tighter
than `->`.  Shadowed binders are renamed at parse time so environments never
carry duplicate names.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .syntax import (
    App,
    Arrow,
    Bool,
    Case,
    Fix,
    Fold,
    Hole,
    If,
    Inl,
    Inr,
    Lam,
    Lang,
    Mu,
    Pair,
    Prod,
    Proj1,
    Proj2,
    Seq,
    Sum,
    Term,
    TmFalse,
    TmTrue,
    TmUnit,
    TVar,
    Type,
    Unfold,
    Unit,
    Var,
    fresh_name,
    hole_count,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<arrow>->)
      | (?P<proj>\.[12])
      | (?P<punct>[()\[\],.;:*+\\|_])
      | (?P<ident>[A-Za-z][A-Za-z0-9_']*)
    """,
    re.VERBOSE,
)

_KEYWORDS = {
    "unit", "true", "false", "inl", "inr", "case", "of", "if", "then",
    "else", "fix", "fold", "unfold", "mu", "Unit", "Bool",
}


@dataclass
class _Tok:
    kind: str  # 'arrow', 'proj', 'punct', 'ident', 'eof'
    text: str
    line: int
    col: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    line, col = 1, 1
    i = 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if not m:
            raise ParseError(f"unexpected character {src[i]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        i = m.end()
    toks.append(_Tok("eof", "<eof>", line, col))
    return toks


class _Parser:
    def __init__(self, src: str, lang: Lang, allow_hole: bool):
        self.toks = _tokenize(src)
        self.i = 0
        self.lang = lang
        self.allow_hole = allow_hole
        self.scope: list[tuple[str, str]] = []  # (surface name, resolved name)

    # -- token plumbing

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def eat(self, text: str) -> _Tok:
        t = self.peek()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return self.next()

    def fail(self, msg: str) -> ParseError:
        t = self.peek()
        return ParseError(msg, t.line, t.col)

    def ident(self) -> _Tok:
        t = self.peek()
        if t.kind != "ident" or t.text in _KEYWORDS:
            raise self.fail(f"expected identifier, found {t.text!r}")
        return self.next()

    # -- scope handling: rename shadowed binders so envs stay duplicate-free

    def bind(self, name: str) -> str:
        bound = {r for _, r in self.scope}
        resolved = fresh_name(name, bound) if any(s == name for s, _ in self.scope) else name
        self.scope.append((name, resolved))
        return resolved

    def unbind(self) -> None:
        self.scope.pop()

    def resolve(self, name: str) -> str:
        for s, r in reversed(self.scope):
            if s == name:
                return r
        return name

    # -- types

    def type_(self) -> Type:
        return self.type_arrow()

    def type_arrow(self) -> Type:
        left = self.type_sum()
        if self.peek().kind == "arrow":
            self.next()
            return Arrow(left, self.type_arrow())
        return left

    def type_sum(self) -> Type:
        left = self.type_prod()
        while self.peek().text == "+":
            self.next()
            left = Sum(left, self.type_prod())
        return left

    def type_prod(self) -> Type:
        left = self.type_atom()
        while self.peek().text == "*":
            self.next()
            left = Prod(left, self.type_atom())
        return left

    def type_atom(self) -> Type:
        t = self.peek()
        if t.text == "(":
            self.next()
            ty = self.type_()
            self.eat(")")
            return ty
        if t.text == "mu":
            if self.lang is Lang.FIX:
                raise self.fail("mu types are not allowed in lambda-fix")
            self.next()
            v = self.ident().text
            self.eat(".")
            return Mu(v, self.type_())
        if t.text == "Unit":
            self.next()
            return Unit()
        if t.text == "Bool":
            self.next()
            return Bool()
        if t.kind == "ident" and t.text not in _KEYWORDS:
            self.next()
            return TVar(t.text)
        raise self.fail(f"expected a type, found {t.text!r}")

    # -- terms

    def term(self) -> Term:
        t = self.peek()
        if t.text == "\\":
            pos = (t.line, t.col)
            self.next()
            name = self.ident().text
            self.eat(":")
            ty = self.type_()
            self.eat(".")
            resolved = self.bind(name)
            body = self.term()
            self.unbind()
            return Lam(resolved, ty, body, pos=pos)
        if t.text == "if":
            pos = (t.line, t.col)
            self.next()
            cond = self.seq_operand()
            self.eat("then")
            then = self.seq_operand()
            self.eat("else")
            els = self.term()
            return If(cond, then, els, pos=pos)
        if t.text == "case":
            return self.case_()
        left = self.app_chain()
        if self.peek().text == ";":
            pos = (self.peek().line, self.peek().col)
            self.next()
            return Seq(left, self.term(), pos=pos)
        return left

    def seq_operand(self) -> Term:
        # an `if`/`case` scrutinee or then-branch: stops before then/else/of
        t = self.peek()
        if t.text in ("\\", "if", "case"):
            return self.term()
        left = self.app_chain()
        if self.peek().text == ";":
            self.next()
            return Seq(left, self.seq_operand())
        return left

    def case_(self) -> Term:
        t = self.eat("case")
        pos = (t.line, t.col)
        scrut = self.seq_operand()
        self.eat("of")
        self.eat("inl")
        lname = self.ident().text
        self.eat("->")
        lres = self.bind(lname)
        lbranch = self.branch_term()
        self.unbind()
        self.eat("|")
        self.eat("inr")
        rname = self.ident().text
        self.eat("->")
        rres = self.bind(rname)
        rbranch = self.term()
        self.unbind()
        return Case(scrut, lres, lbranch, rres, rbranch, pos=pos)

    def branch_term(self) -> Term:
        # a left case branch: extends until the `|` separator
        t = self.peek()
        if t.text == "\\":
            pos = (t.line, t.col)
            self.next()
            name = self.ident().text
            self.eat(":")
            ty = self.type_()
            self.eat(".")
            resolved = self.bind(name)
            body = self.branch_term()
            self.unbind()
            return Lam(resolved, ty, body, pos=pos)
        if t.text == "if":
            self.next()
            cond = self.seq_operand()
            self.eat("then")
            then = self.seq_operand()
            self.eat("else")
            els = self.branch_term()
            return If(cond, then, els, pos=(t.line, t.col))
        if t.text == "case":
            raise self.fail("parenthesize a nested case in a left branch")
        left = self.app_chain()
        if self.peek().text == ";":
            self.next()
            return Seq(left, self.branch_term())
        return left

    def app_chain(self) -> Term:
        t = self.prefix()
        while True:
            nxt = self.peek()
            if nxt.text in ("(", "unit", "true", "false", "_") or (
                nxt.kind == "ident" and nxt.text not in _KEYWORDS
            ):
                arg = self.postfix()
                t = App(t, arg, pos=(nxt.line, nxt.col))
            else:
                return t

    def prefix(self) -> Term:
        t = self.peek()
        pos = (t.line, t.col)
        if t.text in ("inl", "inr"):
            self.next()
            sub = self.prefix()
            return Inl(sub, pos=pos) if t.text == "inl" else Inr(sub, pos=pos)
        if t.text in ("fix", "fold", "unfold"):
            self.next()
            self.eat("[")
            ty = self.type_()
            self.eat("]")
            sub = self.prefix()
            if t.text == "fix":
                if self.lang is not Lang.FIX:
                    raise ParseError(f"fix not in lambda-{self.lang}", *pos)
                return Fix(ty, sub, pos=pos)
            if self.lang is not Lang.ISO:
                raise ParseError(f"{t.text} not in lambda-{self.lang}", *pos)
            return Fold(ty, sub, pos=pos) if t.text == "fold" else Unfold(ty, sub, pos=pos)
        return self.postfix()

    def postfix(self) -> Term:
        t = self.atom()
        while self.peek().kind == "proj":
            tok = self.next()
            t = Proj1(t, pos=(tok.line, tok.col)) if tok.text == ".1" else Proj2(t, pos=(tok.line, tok.col))
        return t

    def atom(self) -> Term:
        t = self.peek()
        pos = (t.line, t.col)
        if t.text == "(":
            self.next()
            inner = self.term()
            if self.peek().text == ",":
                self.next()
                snd = self.term()
                self.eat(")")
                return Pair(inner, snd, pos=pos)
            self.eat(")")
            return inner
        if t.text == "unit":
            self.next()
            return TmUnit(pos=pos)
        if t.text == "true":
            self.next()
            return TmTrue(pos=pos)
        if t.text == "false":
            self.next()
            return TmFalse(pos=pos)
        if t.text == "_":
            if not self.allow_hole:
                raise self.fail("hole `_` only allowed in a context")
            self.next()
            return Hole(pos=pos)
        if t.kind == "ident" and t.text not in _KEYWORDS:
            self.next()
            return Var(self.resolve(t.text), pos=pos)
        raise self.fail(f"expected a term, found {t.text!r}")

    def done(self) -> None:
        t = self.peek()
        if t.kind != "eof":
            raise ParseError(f"trailing input starting at {t.text!r}", t.line, t.col)


def parse_type(src: str, lang: Lang = Lang.EQUI) -> Type:
    p = _Parser(src, lang, allow_hole=False)
    ty = p.type_()
    p.done()
    return ty


def parse_term(src: str, lang: Lang) -> Term:
    p = _Parser(src, lang, allow_hole=False)
    t = p.term()
    p.done()
    return t


def parse_context(src: str, lang: Lang) -> Term:
    p = _Parser(src, lang, allow_hole=True)
    t = p.term()
    p.done()
    n = hole_count(t)
    if n != 1:
        tok = p.toks[0]
        raise ParseError(f"a context needs exactly one hole, found {n}", tok.line, tok.col)
    return t


# ---------------------------------------------------------------------------
# Printing.  parse(print(x)) == x for trees without shadowed binders.

_ARROW, _SUM, _PROD, _TATOM = 1, 2, 3, 4


def _pt(ty: Type, prec: int) -> str:
    if type(ty).__name__ == "_UnknownTy":  # internal checker placeholder
        return "?"
    match ty:
        case Unit():
            return "Unit"
        case Bool():
            return "Bool"
        case TVar(name):
            return name
        case Arrow(l, r):
            s = f"{_pt(l, _SUM)} -> {_pt(r, _ARROW)}"
            return f"({s})" if prec > _ARROW else s
        case Sum(l, r):
            s = f"{_pt(l, _SUM)} + {_pt(r, _PROD)}"
            return f"({s})" if prec > _SUM else s
        case Prod(l, r):
            s = f"{_pt(l, _PROD)} * {_pt(r, _TATOM)}"
            return f"({s})" if prec > _PROD else s
        case Mu(v, body):
            s = f"mu {v}. {_pt(body, _ARROW)}"
            return f"({s})" if prec > _ARROW else s
    raise AssertionError(ty)


def print_type(ty: Type) -> str:
    return _pt(ty, _ARROW)


_TERM, _SEQL, _APP, _PREFIX, _ATOM = 0, 1, 2, 3, 4


def _p(t: Term, prec: int) -> str:
    match t:
        case TmUnit():
            return "unit"
        case TmTrue():
            return "true"
        case TmFalse():
            return "false"
        case Var(name):
            return name
        case Hole():
            return "_"
        case Lam(v, ty, body):
            s = f"\\{v}:{print_type(ty)}. {_p(body, _TERM)}"
            return f"({s})" if prec > _TERM else s
        case If(c, a, b):
            s = f"if {_p(c, _SEQL)} then {_p(a, _SEQL)} else {_p(b, _TERM)}"
            return f"({s})" if prec > _TERM else s
        case Case(s0, lv, lb, rv, rb):
            s = (
                f"case {_p(s0, _SEQL)} of inl {lv} -> {_p(lb, _SEQL)}"
                f" | inr {rv} -> {_p(rb, _TERM)}"
            )
            return f"({s})" if prec > _TERM else s
        case Seq(a, b):
            s = f"{_p(a, _APP)}; {_p(b, _TERM)}"
            return f"({s})" if prec > _TERM else s
        case App(f, a):
            s = f"{_p(f, _APP)} {_p(a, _ATOM)}"
            return f"({s})" if prec > _APP else s
        case Inl(sub):
            s = f"inl {_p(sub, _PREFIX)}"
            return f"({s})" if prec > _PREFIX else s
        case Inr(sub):
            s = f"inr {_p(sub, _PREFIX)}"
            return f"({s})" if prec > _PREFIX else s
        case Fix(ann, sub):
            s = f"fix[{print_type(ann)}] {_p(sub, _PREFIX)}"
            return f"({s})" if prec > _PREFIX else s
        case Fold(ann, sub):
            s = f"fold[{print_type(ann)}] {_p(sub, _PREFIX)}"
            return f"({s})" if prec > _PREFIX else s
        case Unfold(ann, sub):
            s = f"unfold[{print_type(ann)}] {_p(sub, _PREFIX)}"
            return f"({s})" if prec > _PREFIX else s
        case Proj1(sub):
            return f"{_p(sub, _ATOM)}.1"
        case Proj2(sub):
            return f"{_p(sub, _ATOM)}.2"
        case Pair(a, b):
            return f"({_p(a, _TERM)}, {_p(b, _TERM)})"
    raise AssertionError(t)


def print_term(t: Term) -> str:
    return _p(t, _TERM)
