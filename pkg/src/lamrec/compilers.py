"""The three canonical compilers on terms and program contexts.

Types are compiled by the identity, so only terms are transformed:
fix-to-iso maps the fix primitive to the annotated call-by-value
Z-combinator, iso-to-equi erases fold/unfold annotations, and fix-to-equi
is their composition (the annotation-free Z-combinator).
"""

from __future__ import annotations

from .syntax import (
    App,
    Arrow,
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
    Proj1,
    Proj2,
    Seq,
    Term,
    TVar,
    Type,
    Unfold,
    Var,
    is_context,
)


def z_combinator(ann: Arrow, annotated: bool) -> Term:
    """The CBV fixpoint combinator at result type `ann` = t1 -> t2, of type
    ((t1 -> t2) -> t1 -> t2) -> t1 -> t2.  With `annotated`, the
    self-application goes through fold/unfold at mu a. a -> (t1 -> t2)."""
    mu = Mu("a", Arrow(TVar("a"), ann))

    def self_app() -> Term:
        # \x:mu. f (\y:t1. ((unfold[mu] x) x) y)
        un = Unfold(mu, Var("x")) if annotated else Var("x")
        inner = Lam("y", ann.left, App(App(un, Var("x")), Var("y")))
        return Lam("x", mu, App(Var("f"), inner))

    arg = self_app()
    if annotated:
        arg = Fold(mu, arg)
    return Lam("f", Arrow(ann, ann), App(self_app(), arg))


def compile_fix_iso(t: Term) -> Term:
    """Homomorphic except fix, which becomes the annotated Z-combinator
    applied to the compiled body."""
    return _compile(t, Lang.FIX, Lang.ISO)


def compile_iso_equi(t: Term) -> Term:
    """Erase every fold/unfold annotation."""
    return _compile(t, Lang.ISO, Lang.EQUI)


def compile_fix_equi(t: Term) -> Term:
    """The composition of the two: structurally equal to
    compile_iso_equi(compile_fix_iso(t))."""
    return _compile(t, Lang.FIX, Lang.EQUI)


COMPILERS = {
    ("fix", "iso"): compile_fix_iso,
    ("iso", "equi"): compile_iso_equi,
    ("fix", "equi"): compile_fix_equi,
}


def compile_term(src: Lang, dst: Lang, t: Term) -> Term:
    fn = COMPILERS.get((src.value, dst.value))
    if fn is None:
        raise ValueError(f"no compiler from {src} to {dst}")
    return fn(t)


def compile_ctx(src: Lang, dst: Lang, c: Term) -> Term:
    """Extend the term compiler to single-hole program contexts."""
    if not is_context(c):
        raise ValueError("compile_ctx expects a context with exactly one hole")
    if (src.value, dst.value) not in COMPILERS:
        raise ValueError(f"no compiler from {src} to {dst}")
    return _compile(c, src, dst)


def _compile(t: Term, src: Lang, dst: Lang) -> Term:
    def go(t: Term) -> Term:
        match t:
            case Hole():
                return t
            case Fix(ann, s):
                assert isinstance(ann, Arrow)
                return App(z_combinator(ann, annotated=dst is Lang.ISO), go(s))
            case Fold(_, s) | Unfold(_, s):
                return go(s)
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
            case If(c, a, b):
                return If(go(c), go(a), go(b))
            case Seq(a, b):
                return Seq(go(a), go(b))
            case _:
                return t

    return go(t)
