"""Object-language ASTs shared by the three calculi, plus the tree algebra:
size, capture-avoiding substitution, contractiveness, leading-mu count.

One term tree serves all three languages; `fix` / `fold` / `unfold` are only
legal under the matching language, which parsers and typecheckers enforce via
an explicit `Lang` argument (the trees themselves stay language-neutral so
the near-identity compilers can share subtrees).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, fields
from enum import Enum
from functools import lru_cache
from typing import Iterator, Optional

Pos = Optional[tuple[int, int]]


class Lang(Enum):
    FIX = "fix"  # term-level fixpoint, no recursive types
    ISO = "iso"  # iso-recursive types with fold/unfold
    EQUI = "equi"  # coinductive equi-recursive types

    def __str__(self) -> str:
        return self.value


class LangViolation(Exception):
    """A construct (or type annotation) not allowed in the given language."""


class _Node:
    """Base for type and term nodes: frozen, structurally hashable.

    The structural hash is computed once at construction (children are
    already hashed), so sets/dicts over types stay cheap even when trees
    are large and heavily shared.
    """

    def __post_init__(self) -> None:
        parts = [type(self).__name__]
        for f in fields(self):
            if not f.compare:
                continue
            parts.append(getattr(self, f.name))
        object.__setattr__(self, "_hash", hash(tuple(parts)))
        self._init_derived()

    def _init_derived(self) -> None:
        pass

    def __hash__(self) -> int:
        return self._hash  # type: ignore[attr-defined]

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:  # type: ignore[attr-defined]
            return False
        return all(
            getattr(self, f.name) == getattr(other, f.name)
            for f in fields(self)
            if f.compare
        )


def _n(cls):
    return dataclass(frozen=True, eq=False, repr=False)(cls)


# ---------------------------------------------------------------------------
# Types


class Type(_Node):
    ftv: frozenset[str]

    def __repr__(self) -> str:
        from .surface import print_type

        return print_type(self)


@_n
class Unit(Type):
    def _init_derived(self) -> None:
        object.__setattr__(self, "ftv", frozenset())


@_n
class Bool(Type):
    def _init_derived(self) -> None:
        object.__setattr__(self, "ftv", frozenset())


@_n
class TVar(Type):
    name: str

    def _init_derived(self) -> None:
        object.__setattr__(self, "ftv", frozenset((self.name,)))


class _Bin(Type):
    left: Type
    right: Type

    def _init_derived(self) -> None:
        object.__setattr__(self, "ftv", self.left.ftv | self.right.ftv)


@_n
class Arrow(_Bin):
    left: Type
    right: Type


@_n
class Prod(_Bin):
    left: Type
    right: Type


@_n
class Sum(_Bin):
    left: Type
    right: Type


@_n
class Mu(Type):
    var: str
    body: Type

    def _init_derived(self) -> None:
        object.__setattr__(self, "ftv", self.body.ftv - {self.var})


def subst_type(ty: Type, var: str, repl: Type) -> Type:
    """Capture-avoiding substitution of `repl` for the free variable `var`."""
    if var not in ty.ftv:
        return ty
    match ty:
        case TVar(name):
            return repl if name == var else ty
        case Arrow(l, r):
            return Arrow(subst_type(l, var, repl), subst_type(r, var, repl))
        case Prod(l, r):
            return Prod(subst_type(l, var, repl), subst_type(r, var, repl))
        case Sum(l, r):
            return Sum(subst_type(l, var, repl), subst_type(r, var, repl))
        case Mu(v, body):
            if v == var:
                return ty
            if v in repl.ftv:
                v2 = fresh_name(v, repl.ftv | body.ftv | {var})
                body = subst_type(body, v, TVar(v2))
                v = v2
            return Mu(v, subst_type(body, var, repl))
    raise AssertionError(ty)


@lru_cache(maxsize=None)
def unfold_mu(ty: Mu) -> Type:
    """One unfolding step: mu a. T  |->  T[mu a. T / a]."""
    return subst_type(ty.body, ty.var, ty)


def contractive(ty: Type) -> bool:
    """Every bound recursion variable occurs only beneath ->, *, or +."""

    def ok(t: Type, unguarded: frozenset[str]) -> bool:
        match t:
            case TVar(name):
                return name not in unguarded
            case Mu(v, body):
                return ok(body, unguarded | {v})
            case Arrow(l, r) | Prod(l, r) | Sum(l, r):
                return ok(l, frozenset()) and ok(r, frozenset())
            case _:
                return True

    return ok(ty, frozenset())


def lmc(ty: Type) -> int:
    """Leading-mu count: number of consecutive mu binders at the root."""
    n = 0
    while isinstance(ty, Mu):
        n += 1
        ty = ty.body
    return n


def canon_type(ty: Type) -> Type:
    """Rename bound type variables canonically (a0, a1, ... in binder order),
    so alpha-equivalent types compare structurally equal."""
    counter = itertools.count()

    def go(t: Type, env: dict[str, str]) -> Type:
        match t:
            case TVar(name):
                return TVar(env.get(name, name))
            case Arrow(l, r):
                return Arrow(go(l, env), go(r, env))
            case Prod(l, r):
                return Prod(go(l, env), go(r, env))
            case Sum(l, r):
                return Sum(go(l, env), go(r, env))
            case Mu(v, body):
                v2 = f"a{next(counter)}"
                return Mu(v2, go(body, {**env, v: v2}))
            case _:
                return t

    return go(ty, {})


def type_lang_ok(ty: Type, lang: Lang) -> bool:
    """Fix-language types contain no mu binders and no type variables."""
    if lang is Lang.FIX:
        return not _mentions_mu(ty) and not ty.ftv
    return True


def _mentions_mu(ty: Type) -> bool:
    match ty:
        case Mu():
            return True
        case Arrow(l, r) | Prod(l, r) | Sum(l, r):
            return _mentions_mu(l) or _mentions_mu(r)
        case _:
            return False


mentions_mu = _mentions_mu


# ---------------------------------------------------------------------------
# Terms (and program contexts: a context is a term with exactly one Hole)


class Term(_Node):
    fv: frozenset[str]
    size: int
    is_value: bool
    has_hole: bool
    pos: Pos

    def __post_init__(self) -> None:
        super().__post_init__()
        hh = isinstance(self, Hole) or any(c.has_hole for c in children(self))
        object.__setattr__(self, "has_hole", hh)

    def __repr__(self) -> str:
        from .surface import print_term

        return print_term(self)


def _leaf(self: Term) -> None:
    object.__setattr__(self, "fv", frozenset())
    object.__setattr__(self, "size", 1)
    object.__setattr__(self, "is_value", True)


@_n
class TmUnit(Term):
    pos: Pos = field(default=None, compare=False)
    _init_derived = _leaf


@_n
class TmTrue(Term):
    pos: Pos = field(default=None, compare=False)
    _init_derived = _leaf


@_n
class TmFalse(Term):
    pos: Pos = field(default=None, compare=False)
    _init_derived = _leaf


@_n
class Var(Term):
    name: str
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        object.__setattr__(self, "fv", frozenset((self.name,)))
        object.__setattr__(self, "size", 1)
        object.__setattr__(self, "is_value", False)


@_n
class Hole(Term):
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        object.__setattr__(self, "fv", frozenset())
        object.__setattr__(self, "size", 1)
        object.__setattr__(self, "is_value", False)


@_n
class Lam(Term):
    var: str
    var_ty: Type
    body: Term
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        object.__setattr__(self, "fv", self.body.fv - {self.var})
        object.__setattr__(self, "size", 1)  # lambda bodies do not count
        object.__setattr__(self, "is_value", True)


def _node1(self: Term, sub: Term, value: bool = False) -> None:
    object.__setattr__(self, "fv", sub.fv)
    object.__setattr__(self, "size", sub.size + 1)
    object.__setattr__(self, "is_value", value and sub.is_value)


def _node2(self: Term, a: Term, b: Term, value: bool = False) -> None:
    object.__setattr__(self, "fv", a.fv | b.fv)
    object.__setattr__(self, "size", a.size + b.size + 1)
    object.__setattr__(self, "is_value", value and a.is_value and b.is_value)


@_n
class App(Term):
    fn: Term
    arg: Term
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        _node2(self, self.fn, self.arg)


@_n
class Pair(Term):
    fst: Term
    snd: Term
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        _node2(self, self.fst, self.snd, value=True)


@_n
class Proj1(Term):
    sub: Term
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        _node1(self, self.sub)


@_n
class Proj2(Term):
    sub: Term
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        _node1(self, self.sub)


@_n
class Inl(Term):
    sub: Term
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        _node1(self, self.sub, value=True)


@_n
class Inr(Term):
    sub: Term
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        _node1(self, self.sub, value=True)


@_n
class Case(Term):
    scrut: Term
    lvar: str
    lbranch: Term
    rvar: str
    rbranch: Term
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        fv = self.scrut.fv | (self.lbranch.fv - {self.lvar}) | (self.rbranch.fv - {self.rvar})
        object.__setattr__(self, "fv", fv)
        size = self.scrut.size + self.lbranch.size + self.rbranch.size + 1
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "is_value", False)


@_n
class If(Term):
    cond: Term
    then: Term
    els: Term
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        object.__setattr__(self, "fv", self.cond.fv | self.then.fv | self.els.fv)
        size = self.cond.size + self.then.size + self.els.size + 1
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "is_value", False)


@_n
class Seq(Term):
    first: Term
    second: Term
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        _node2(self, self.first, self.second)


@_n
class Fix(Term):
    ann: Type  # the arrow type of the resulting fixpoint
    sub: Term
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        _node1(self, self.sub)


@_n
class Fold(Term):
    ann: Type  # the mu type being folded into
    sub: Term
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        _node1(self, self.sub, value=True)


@_n
class Unfold(Term):
    ann: Type  # the mu type being unfolded
    sub: Term
    pos: Pos = field(default=None, compare=False)

    def _init_derived(self) -> None:
        _node1(self, self.sub)


def children(t: Term) -> tuple[Term, ...]:
    match t:
        case App(a, b) | Pair(a, b) | Seq(a, b):
            return (a, b)
        case Proj1(s) | Proj2(s) | Inl(s) | Inr(s) | Fix(_, s) | Fold(_, s) | Unfold(_, s):
            return (s,)
        case Lam(_, _, b):
            return (b,)
        case Case(s, _, l, _, r):
            return (s, l, r)
        case If(c, a, b):
            return (c, a, b)
        case _:
            return ()


def subterms(t: Term) -> Iterator[Term]:
    yield t
    for c in children(t):
        yield from subterms(c)


def fresh_name(base: str, avoid: frozenset[str] | set[str]) -> str:
    base = base.rstrip("0123456789").rstrip("_") or "x"
    for i in itertools.count(1):
        cand = f"{base}_{i}"
        if cand not in avoid:
            return cand
    raise AssertionError


def subst_term(t: Term, var: str, repl: Term) -> Term:
    """Capture-avoiding substitution of `repl` for the free term variable."""
    if var not in t.fv:
        return t
    match t:
        case Var(name):
            return repl if name == var else t
        case Lam(v, ty, body):
            if v == var:
                return t
            if v in repl.fv:
                v2 = fresh_name(v, repl.fv | body.fv | {var})
                body = subst_term(body, v, Var(v2))
                v = v2
            return Lam(v, ty, subst_term(body, var, repl))
        case App(f, a):
            return App(subst_term(f, var, repl), subst_term(a, var, repl))
        case Pair(a, b):
            return Pair(subst_term(a, var, repl), subst_term(b, var, repl))
        case Proj1(s):
            return Proj1(subst_term(s, var, repl))
        case Proj2(s):
            return Proj2(subst_term(s, var, repl))
        case Inl(s):
            return Inl(subst_term(s, var, repl))
        case Inr(s):
            return Inr(subst_term(s, var, repl))
        case Case(s, lv, lb, rv, rb):
            s = subst_term(s, var, repl)
            if lv == var:
                pass
            else:
                if lv in repl.fv and var in lb.fv:
                    lv2 = fresh_name(lv, repl.fv | lb.fv | {var})
                    lb = subst_term(lb, lv, Var(lv2))
                    lv = lv2
                lb = subst_term(lb, var, repl)
            if rv != var:
                if rv in repl.fv and var in rb.fv:
                    rv2 = fresh_name(rv, repl.fv | rb.fv | {var})
                    rb = subst_term(rb, rv, Var(rv2))
                    rv = rv2
                rb = subst_term(rb, var, repl)
            return Case(s, lv, lb, rv, rb)
        case If(c, a, b):
            return If(subst_term(c, var, repl), subst_term(a, var, repl), subst_term(b, var, repl))
        case Seq(a, b):
            return Seq(subst_term(a, var, repl), subst_term(b, var, repl))
        case Fix(ann, s):
            return Fix(ann, subst_term(s, var, repl))
        case Fold(ann, s):
            return Fold(ann, subst_term(s, var, repl))
        case Unfold(ann, s):
            return Unfold(ann, subst_term(s, var, repl))
    raise AssertionError(t)


def size(t: Term) -> int:
    """Node count, ignoring the bodies of lambdas."""
    return t.size


def term_lang_ok(t: Term, lang: Lang) -> Optional[Term]:
    """Return the first subterm violating the language restriction, if any."""
    for s in subterms(t):
        match s:
            case Fix() if lang is not Lang.FIX:
                return s
            case Fold() | Unfold() if lang is not Lang.ISO:
                return s
            case Lam(_, ty, _) | Fix(ty, _) if not type_lang_ok(ty, lang):
                return s
    return None


def assert_lang(t: Term, lang: Lang) -> None:
    bad = term_lang_ok(t, lang)
    if bad is not None:
        raise LangViolation(f"{type(bad).__name__} not allowed in lambda-{lang}")


# ---------------------------------------------------------------------------
# Program contexts


def hole_count(t: Term) -> int:
    return sum(1 for s in subterms(t) if isinstance(s, Hole))


def is_context(t: Term) -> bool:
    """A program context is a term tree with exactly one hole."""
    return hole_count(t) == 1


def plug(ctx: Term, t: Term) -> Term:
    """Replace the hole with `t`.  Deliberately capture-permitting: binders of
    the context scope over the plugged term, as in the context typing rules."""

    def go(c: Term) -> Term:
        if isinstance(c, Hole):
            return t
        if not c.has_hole:
            return c
        match c:
            case Lam(v, ty, body):
                return Lam(v, ty, go(body))
            case App(f, a):
                return App(go(f), go(a))
            case Pair(a, b):
                return Pair(go(a), go(b))
            case Proj1(s):
                return Proj1(go(s))
            case Proj2(s):
                return Proj2(go(s))
            case Inl(s):
                return Inl(go(s))
            case Inr(s):
                return Inr(go(s))
            case Case(s, lv, lb, rv, rb):
                return Case(go(s), lv, go(lb), rv, go(rb))
            case If(co, a, b):
                return If(go(co), go(a), go(b))
            case Seq(a, b):
                return Seq(go(a), go(b))
            case Fix(ann, s):
                return Fix(ann, go(s))
            case Fold(ann, s):
                return Fold(ann, go(s))
            case Unfold(ann, s):
                return Unfold(ann, go(s))
        raise AssertionError(c)

    if not is_context(ctx):
        raise ValueError("plug expects a context with exactly one hole")
    return go(ctx)


# ---------------------------------------------------------------------------
# Typing environments


@_n
class TypeEnv(_Node):
    bindings: tuple[tuple[str, Type], ...] = ()

    def _init_derived(self) -> None:
        names = [n for n, _ in self.bindings]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate binding in environment: {names}")

    def extend(self, name: str, ty: Type) -> "TypeEnv":
        kept = tuple((n, t) for n, t in self.bindings if n != name)
        return TypeEnv(kept + ((name, ty),))

    def lookup(self, name: str) -> Optional[Type]:
        for n, t in reversed(self.bindings):
            if n == name:
                return t
        return None

    def names(self) -> frozenset[str]:
        return frozenset(n for n, _ in self.bindings)

    def __iter__(self):
        return iter(self.bindings)

    def __len__(self) -> int:
        return len(self.bindings)


EMPTY_ENV = TypeEnv()
