"""Typecheckers for the three languages, the decision procedure for the
coinductive equality of equi-recursive types, and context typing.

Typechecking is bidirectional: elimination forms synthesize, injections and
other under-determined forms consume an expected type pushed from the
context.  A bare injection synthesizes a partial type with an unknown
summand; unknowns are resolved where branches join or where the term meets
a known type (an application argument, an explicit expectation), and a
term whose type still contains unknowns at the top level is rejected as
ambiguous.

In the equi language, whenever an elimination needs a specific head
constructor the subject's type is weak-head exposed by unfolding leading
mu binders; every unfolding and every equality appeal is recorded as an
explicit conversion node in the derivation, which the backtranslation
later traverses.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

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
    TypeEnv,
    Unfold,
    Unit,
    Var,
    children,
    contractive,
    hole_count,
    type_lang_ok,
    unfold_mu,
)

CONVERSION = "Type-eq"


class TypeCheckError(Exception):
    def __init__(self, message: str, term: Optional[Term] = None):
        pos = getattr(term, "pos", None)
        if pos:
            message = f"{pos[0]}:{pos[1]}: {message}"
        super().__init__(message)
        self.term = term


class AmbiguousType(TypeCheckError):
    """The term needs an expected type (e.g. a bare injection)."""


class NotContractive(TypeCheckError):
    pass


@dataclass(frozen=True, eq=False, repr=False)
class _UnknownTy(Type):
    """Internal placeholder for a summand no rule determines (yet)."""

    def _init_derived(self) -> None:
        object.__setattr__(self, "ftv", frozenset())

    def __repr__(self) -> str:
        return "?"


UNKNOWN = _UnknownTy()


@lru_cache(maxsize=None)
def _partial(ty: Type) -> bool:
    match ty:
        case _UnknownTy():
            return True
        case Arrow(l, r) | Prod(l, r) | Sum(l, r):
            return _partial(l) or _partial(r)
        case Mu(_, body):
            return _partial(body)
        case _:
            return False


@dataclass(frozen=True)
class Derivation:
    """One typing-rule instance; kids match the rule's premises in order.

    Conversion nodes (rule `Type-eq`) have a single kid whose type is
    equal-but-not-identical to `ty`.
    """

    rule: str
    env: TypeEnv
    term: Term
    ty: Type
    kids: tuple["Derivation", ...] = ()

    def conversions(self) -> list[tuple[Type, Type]]:
        out = []
        stack = [self]
        while stack:
            d = stack.pop()
            if d.rule == CONVERSION:
                out.append((d.kids[0].ty, d.ty))
            stack.extend(d.kids)
        return out


@dataclass(frozen=True)
class CtxDerivation:
    """Derivation of `|- C : hole_env,hole_ty -> env,ty`.

    Exactly one kid lies on the hole path (a CtxDerivation); the others are
    ordinary Derivations for the surrounding terms.
    """

    rule: str
    env: TypeEnv
    ctx: Term
    ty: Type
    hole_env: TypeEnv
    hole_ty: Type
    kids: tuple[Union["CtxDerivation", Derivation], ...] = ()


# ---------------------------------------------------------------------------
# Coinductive type equality (the equi-recursive relation)


def _require_contractive(ty: Type) -> None:
    if not contractive(ty):
        raise NotContractive(f"non-contractive type: {ty!r}")


def type_eq(a: Type, b: Type) -> bool:
    """Decide the coinductive equality on closed contractive types.

    Assumption-set coinduction: a revisited pair is taken to hold.  Leading
    mus are stripped left first, then right; equal heads recurse on the
    components with the pair recorded.  Terminates because the types
    reachable by unfolding and component descent from two mu-types form a
    finite set, and contractiveness bounds consecutive unfoldings.
    """
    _require_contractive(a)
    _require_contractive(b)
    seen: set[tuple[Type, Type]] = set()

    def go(x: Type, y: Type) -> bool:
        if x is y or x == y:
            return True
        if (x, y) in seen:
            return True
        seen.add((x, y))
        if isinstance(x, Mu):
            return go(unfold_mu(x), y)
        if isinstance(y, Mu):
            return go(x, unfold_mu(y))
        match x, y:
            case (Unit(), Unit()) | (Bool(), Bool()):
                return True
            case (TVar(n1), TVar(n2)):
                return n1 == n2
            case (Arrow(l1, r1), Arrow(l2, r2)):
                return go(l1, l2) and go(r1, r2)
            case (Prod(l1, r1), Prod(l2, r2)):
                return go(l1, l2) and go(r1, r2)
            case (Sum(l1, r1), Sum(l2, r2)):
                return go(l1, l2) and go(r1, r2)
            case _:
                return False

    return go(a, b)


def types_equal(lang: Lang, a: Type, b: Type) -> bool:
    """The type equality a language's typing rules appeal to."""
    if lang is Lang.EQUI:
        return type_eq(a, b)
    return a == b


# ---------------------------------------------------------------------------
# Partial-type plumbing


def _merge(lang: Lang, a: Type, b: Type) -> Optional[Type]:
    """Join two possibly-partial types; None when they cannot denote one
    type.  Complete sides may unfold in the equi language."""
    if isinstance(a, _UnknownTy):
        return b
    if isinstance(b, _UnknownTy):
        return a
    if a == b:
        return a
    pa, pb = _partial(a), _partial(b)
    if not pa and not pb:
        return a if types_equal(lang, a, b) else None
    if lang is Lang.EQUI:
        if isinstance(a, Mu) and not pa:
            return _merge(lang, unfold_mu(a), b)
        if isinstance(b, Mu) and not pb:
            return _merge(lang, a, unfold_mu(b))
    if type(a) is type(b) and isinstance(a, (Arrow, Prod, Sum)):
        l = _merge(lang, a.left, b.left)
        r = _merge(lang, a.right, b.right)
        if l is None or r is None:
            return None
        return type(a)(l, r)
    return None


def _refine(lang: Lang, partial: Type, want: Type) -> Optional[Type]:
    """Fill the unknowns of `partial` from the complete type `want`,
    keeping `partial`'s shape (so the result is equal to `want`, in the
    equi language possibly only up to conversion)."""
    if isinstance(partial, _UnknownTy):
        return want
    if not _partial(partial):
        return partial if types_equal(lang, partial, want) else None
    if lang is Lang.EQUI:
        while isinstance(want, Mu):
            _require_contractive(want)
            want = unfold_mu(want)
    if type(partial) is type(want) and isinstance(partial, (Arrow, Prod, Sum)):
        l = _refine(lang, partial.left, want.left)
        r = _refine(lang, partial.right, want.right)
        if l is None or r is None:
            return None
        return type(partial)(l, r)
    return None


@lru_cache(maxsize=None)
def _default_ty(ty: Type) -> Type:
    """Instantiate never-consumed unknowns at Unit.  Sound because an
    unknown survives only where the typing rule was parametric in it."""
    if not _partial(ty):
        return ty
    match ty:
        case _UnknownTy():
            return Unit()
        case Arrow(l, r):
            return Arrow(_default_ty(l), _default_ty(r))
        case Prod(l, r):
            return Prod(_default_ty(l), _default_ty(r))
        case Sum(l, r):
            return Sum(_default_ty(l), _default_ty(r))
        case Mu(v, body):
            return Mu(v, _default_ty(body))
    raise AssertionError(ty)


def _finalize(d):
    """Reject a partial root type, then default interior leftovers."""
    if _partial(d.ty):
        at = d.term if isinstance(d, Derivation) else d.ctx
        raise AmbiguousType(
            f"type not fully determined: {d.ty!r} (add an expected type)", at
        )
    return _default_node(d)


def _default_node(d):
    kids = tuple(_default_node(k) for k in d.kids)
    ty = _default_ty(d.ty)
    if ty is d.ty and all(k is k0 for k, k0 in zip(kids, d.kids)):
        return d
    if isinstance(d, Derivation):
        return Derivation(d.rule, d.env, d.term, ty, kids)
    return CtxDerivation(d.rule, d.env, d.ctx, ty, d.hole_env, d.hole_ty, kids)


# ---------------------------------------------------------------------------
# Term typechecking


def _validate_annotation(lang: Lang, ty: Type, at: Term) -> None:
    if not type_lang_ok(ty, lang):
        raise TypeCheckError(f"type {ty!r} not allowed in lambda-{lang}", at)
    if ty.ftv:
        raise TypeCheckError(f"open type annotation {ty!r}", at)
    if not contractive(ty):
        raise NotContractive(f"non-contractive annotation {ty!r}", at)


class _Checker:
    def __init__(self, lang: Lang):
        self.lang = lang

    # -- conversions, refinement, exposure

    def convert(self, d: Derivation, want: Type) -> Derivation:
        if _partial(d.ty):
            refined = _refine(self.lang, d.ty, want)
            if refined is None:
                raise TypeCheckError(f"expected type {want!r}, found {d.ty!r}", d.term)
            d = self.settle(d, refined)
        if d.ty == want:
            return d
        if self.lang is Lang.EQUI and type_eq(d.ty, want):
            return Derivation(CONVERSION, d.env, d.term, want, (d,))
        raise TypeCheckError(f"expected type {want!r}, found {d.ty!r}", d.term)

    def settle(self, d: Derivation, full: Type) -> Derivation:
        """Rewrite the partial types along a derivation's injection spines
        once the full type is known."""
        if d.ty == full:
            return d
        if not _partial(d.ty):
            return self.convert(d, full)
        k = d.kids
        re = lambda kids: Derivation(d.rule, d.env, d.term, full, kids)
        match d.rule:
            case "Type-inl":
                assert isinstance(full, Sum)
                return re((self.settle(k[0], full.left),))
            case "Type-inr":
                assert isinstance(full, Sum)
                return re((self.settle(k[0], full.right),))
            case "Type-pair":
                assert isinstance(full, Prod)
                return re((self.settle(k[0], full.left), self.settle(k[1], full.right)))
            case "Type-lam":
                assert isinstance(full, Arrow)
                return re((self.settle(k[0], full.right),))
            case "Type-case":
                return re((k[0], self.settle(k[1], full), self.settle(k[2], full)))
            case "Type-if":
                return re((k[0], self.settle(k[1], full), self.settle(k[2], full)))
            case "Type-seq":
                return re((k[0], self.settle(k[1], full)))
            case "Type-app":
                fd = self.settle(k[0], Arrow(k[0].ty.left, full))
                return re((fd, k[1]))
            case "Type-p1":
                sd = self.settle(k[0], Prod(full, _default_ty(k[0].ty.right)))
                return re((sd,))
            case "Type-p2":
                sd = self.settle(k[0], Prod(_default_ty(k[0].ty.left), full))
                return re((sd,))
        raise AmbiguousType(f"cannot determine the type of {d.term!r}", d.term)

    def expose(
        self, d: Derivation, head: type, strict: bool = True
    ) -> tuple[Derivation, Type]:
        ty = d.ty
        while self.lang is Lang.EQUI and isinstance(ty, Mu):
            _require_contractive(ty)
            ty = unfold_mu(ty)
            d = Derivation(CONVERSION, d.env, d.term, ty, (d,))
        if isinstance(ty, head):
            if strict and _partial(ty):
                raise AmbiguousType(
                    f"type {ty!r} not fully determined where a complete "
                    f"{head.__name__} type is needed",
                    d.term,
                )
            return d, ty
        raise TypeCheckError(f"expected a {head.__name__} type, found {d.ty!r}", d.term)

    def expose_ty(self, ty: Type, head: type, at: Term) -> Type:
        while self.lang is Lang.EQUI and isinstance(ty, Mu):
            _require_contractive(ty)
            ty = unfold_mu(ty)
        if isinstance(ty, head):
            return ty
        raise TypeCheckError(f"expected a {head.__name__} type, found {ty!r}", at)

    # -- synthesis

    def synth(self, env: TypeEnv, t: Term) -> Derivation:
        match t:
            case TmUnit():
                return Derivation("Type-unit", env, t, Unit())
            case TmTrue():
                return Derivation("Type-true", env, t, Bool())
            case TmFalse():
                return Derivation("Type-false", env, t, Bool())
            case Var(name):
                ty = env.lookup(name)
                if ty is None:
                    raise TypeCheckError(f"unbound variable {name}", t)
                return Derivation("Type-var", env, t, ty)
            case Hole():
                raise TypeCheckError("hole in term position", t)
            case Lam(v, vty, body):
                _validate_annotation(self.lang, vty, t)
                bd = self.synth(env.extend(v, vty), body)
                return Derivation("Type-lam", env, t, Arrow(vty, bd.ty), (bd,))
            case App(f, a):
                fd = self.synth(env, f)
                fd, fty = self.expose(fd, Arrow, strict=False)
                if _partial(fty.left):
                    raise AmbiguousType(
                        f"argument type of {f!r} not determined", t
                    )
                ad = self.check(env, a, fty.left)
                return Derivation("Type-app", env, t, fty.right, (fd, ad))
            case Pair(a, b):
                ad = self.synth(env, a)
                bd = self.synth(env, b)
                return Derivation("Type-pair", env, t, Prod(ad.ty, bd.ty), (ad, bd))
            case Proj1(s):
                sd, sty = self.expose(self.synth(env, s), Prod, strict=False)
                return Derivation("Type-p1", env, t, sty.left, (sd,))
            case Proj2(s):
                sd, sty = self.expose(self.synth(env, s), Prod, strict=False)
                return Derivation("Type-p2", env, t, sty.right, (sd,))
            case Inl(s):
                sd = self.synth(env, s)
                return Derivation("Type-inl", env, t, Sum(sd.ty, UNKNOWN), (sd,))
            case Inr(s):
                sd = self.synth(env, s)
                return Derivation("Type-inr", env, t, Sum(UNKNOWN, sd.ty), (sd,))
            case Case(s, lv, lb, rv, rb):
                sd, sty = self.expose(self.synth(env, s), Sum)
                lenv = env.extend(lv, sty.left)
                renv = env.extend(rv, sty.right)
                ld, rd = self._branches(lenv, lb, renv, rb, None, t)
                return Derivation("Type-case", env, t, ld.ty, (sd, ld, rd))
            case If(c, a, b):
                cd = self.check(env, c, Bool())
                ad, bd = self._branches(env, a, env, b, None, t)
                return Derivation("Type-if", env, t, ad.ty, (cd, ad, bd))
            case Seq(a, b):
                ad = self.check(env, a, Unit())
                bd = self.synth(env, b)
                return Derivation("Type-seq", env, t, bd.ty, (ad, bd))
            case Fix(ann, s):
                if self.lang is not Lang.FIX:
                    raise TypeCheckError(f"fix not in lambda-{self.lang}", t)
                _validate_annotation(self.lang, ann, t)
                if not isinstance(ann, Arrow):
                    raise TypeCheckError(
                        f"fix annotation must be an arrow type, got {ann!r}", t
                    )
                sd = self.check(env, s, Arrow(ann, ann))
                return Derivation("Type-fix", env, t, ann, (sd,))
            case Fold(ann, s):
                if self.lang is not Lang.ISO:
                    raise TypeCheckError(f"fold not in lambda-{self.lang}", t)
                _validate_annotation(self.lang, ann, t)
                if not isinstance(ann, Mu):
                    raise TypeCheckError("fold annotation must be a mu type", t)
                sd = self.check(env, s, unfold_mu(ann))
                return Derivation("Type-fold", env, t, ann, (sd,))
            case Unfold(ann, s):
                if self.lang is not Lang.ISO:
                    raise TypeCheckError(f"unfold not in lambda-{self.lang}", t)
                _validate_annotation(self.lang, ann, t)
                if not isinstance(ann, Mu):
                    raise TypeCheckError("unfold annotation must be a mu type", t)
                sd = self.check(env, s, ann)
                return Derivation("Type-unfold", env, t, unfold_mu(ann), (sd,))
        raise AssertionError(t)

    def _branches(
        self,
        lenv: TypeEnv,
        lb: Term,
        renv: TypeEnv,
        rb: Term,
        expected: Optional[Type],
        at: Term,
    ) -> tuple[Derivation, Derivation]:
        if expected is not None:
            return self.check(lenv, lb, expected), self.check(renv, rb, expected)
        ld = self.synth(lenv, lb)
        rd = self.synth(renv, rb)
        merged = _merge(self.lang, ld.ty, rd.ty)
        if merged is None:
            raise TypeCheckError(
                f"branch types disagree: {ld.ty!r} vs {rd.ty!r}", at
            )
        if _partial(merged):
            return ld, rd  # flows upward; resolved or rejected there
        return self.convert(ld, merged), self.convert(rd, merged)

    # -- checking against an expected type

    def check(self, env: TypeEnv, t: Term, expected: Type) -> Derivation:
        match t:
            case Inl(s):
                sty = self.expose_ty(expected, Sum, t)
                sd = self.check(env, s, sty.left)
                d = Derivation("Type-inl", env, t, sty, (sd,))
                return self.convert(d, expected)
            case Inr(s):
                sty = self.expose_ty(expected, Sum, t)
                sd = self.check(env, s, sty.right)
                d = Derivation("Type-inr", env, t, sty, (sd,))
                return self.convert(d, expected)
            case Lam(v, vty, body):
                aty = self.expose_ty(expected, Arrow, t)
                if not types_equal(self.lang, vty, aty.left):
                    raise TypeCheckError(
                        f"lambda binder has type {vty!r}, expected {aty.left!r}", t
                    )
                _validate_annotation(self.lang, vty, t)
                bd = self.check(env.extend(v, vty), body, aty.right)
                d = Derivation("Type-lam", env, t, Arrow(vty, bd.ty), (bd,))
                return self.convert(d, expected)
            case Pair(a, b):
                pty = self.expose_ty(expected, Prod, t)
                ad = self.check(env, a, pty.left)
                bd = self.check(env, b, pty.right)
                d = Derivation("Type-pair", env, t, pty, (ad, bd))
                return self.convert(d, expected)
            case Case(s, lv, lb, rv, rb):
                sd, sty = self.expose(self.synth(env, s), Sum)
                ld = self.check(env.extend(lv, sty.left), lb, expected)
                rd = self.check(env.extend(rv, sty.right), rb, expected)
                return Derivation("Type-case", env, t, expected, (sd, ld, rd))
            case If(c, a, b):
                cd = self.check(env, c, Bool())
                ad = self.check(env, a, expected)
                bd = self.check(env, b, expected)
                return Derivation("Type-if", env, t, expected, (cd, ad, bd))
            case Seq(a, b):
                ad = self.check(env, a, Unit())
                bd = self.check(env, b, expected)
                return Derivation("Type-seq", env, t, expected, (ad, bd))
            case _:
                return self.convert(self.synth(env, t), expected)

    # -- contexts

    def convert_ctx(self, d: CtxDerivation, want: Type) -> CtxDerivation:
        if _partial(d.ty):
            refined = _refine(self.lang, d.ty, want)
            if refined is None:
                raise TypeCheckError(f"expected type {want!r}, found {d.ty!r}", d.ctx)
            d = self.settle_ctx(d, refined)
        if d.ty == want:
            return d
        if self.lang is Lang.EQUI and type_eq(d.ty, want):
            return CtxDerivation(CONVERSION, d.env, d.ctx, want, d.hole_env, d.hole_ty, (d,))
        raise TypeCheckError(f"expected type {want!r}, found {d.ty!r}", d.ctx)

    def settle_ctx(self, d: CtxDerivation, full: Type) -> CtxDerivation:
        if d.ty == full:
            return d
        if not _partial(d.ty):
            return self.convert_ctx(d, full)
        k = d.kids

        def re(kids: tuple) -> CtxDerivation:
            return CtxDerivation(d.rule, d.env, d.ctx, full, d.hole_env, d.hole_ty, kids)

        match d.rule:
            case "Type-Ctx-Inl":
                assert isinstance(full, Sum)
                return re((self.settle_ctx(k[0], full.left),))
            case "Type-Ctx-Inr":
                assert isinstance(full, Sum)
                return re((self.settle_ctx(k[0], full.right),))
            case "Type-Ctx-Lam":
                assert isinstance(full, Arrow)
                return re((self.settle_ctx(k[0], full.right),))
            case "Type-Ctx-App1":
                fd = self.settle_ctx(k[0], Arrow(k[0].ty.left, full))
                return re((fd, k[1]))
            case "Type-Ctx-App2":
                fd = self.settle(k[0], Arrow(k[0].ty.left, full))
                return re((fd, k[1]))
            case "Type-Ctx-Pair1":
                assert isinstance(full, Prod)
                return re((self.settle_ctx(k[0], full.left), self.settle(k[1], full.right)))
            case "Type-Ctx-Pair2":
                assert isinstance(full, Prod)
                return re((self.settle(k[0], full.left), self.settle_ctx(k[1], full.right)))
            case "Type-Ctx-Case1":
                return re((k[0], self.settle(k[1], full), self.settle(k[2], full)))
            case "Type-Ctx-Case2":
                return re((k[0], self.settle_ctx(k[1], full), self.settle(k[2], full)))
            case "Type-Ctx-Case3":
                return re((k[0], self.settle(k[1], full), self.settle_ctx(k[2], full)))
            case "Type-Ctx-If1":
                return re((k[0], self.settle(k[1], full), self.settle(k[2], full)))
            case "Type-Ctx-If2":
                return re((k[0], self.settle_ctx(k[1], full), self.settle(k[2], full)))
            case "Type-Ctx-If3":
                return re((k[0], self.settle(k[1], full), self.settle_ctx(k[2], full)))
            case "Type-Ctx-Seq1":
                return re((k[0], self.settle(k[1], full)))
            case "Type-Ctx-Seq2":
                return re((k[0], self.settle_ctx(k[1], full)))
        raise AmbiguousType(f"cannot determine the type of context {d.ctx!r}", d.ctx)

    def synth_ctx(
        self, env: TypeEnv, c: Term, hole_env: TypeEnv, hole_ty: Type
    ) -> CtxDerivation:
        def ctx(rule: str, ty: Type, kids: tuple) -> CtxDerivation:
            return CtxDerivation(rule, env, c, ty, hole_env, hole_ty, kids)

        def down(sub: Term, env2: Optional[TypeEnv] = None) -> CtxDerivation:
            return self.synth_ctx(env2 if env2 is not None else env, sub, hole_env, hole_ty)

        match c:
            case Hole():
                if dict(env.bindings) != dict(hole_env.bindings):
                    raise TypeCheckError(
                        f"hole used under bindings {sorted(env.names())}, "
                        f"declared {sorted(hole_env.names())}",
                        c,
                    )
                return ctx("Type-Ctx-Hole", hole_ty, ())
            case Lam(v, vty, body) if body.has_hole:
                _validate_annotation(self.lang, vty, c)
                bd = down(body, env.extend(v, vty))
                return ctx("Type-Ctx-Lam", Arrow(vty, bd.ty), (bd,))
            case App(f, a) if f.has_hole:
                fd = down(f)
                fd, fty = self.expose_ctx(fd, Arrow)
                if _partial(fty.left):
                    raise AmbiguousType("argument type not determined", c)
                ad = self.check(env, a, fty.left)
                return ctx("Type-Ctx-App1", fty.right, (fd, ad))
            case App(f, a) if a.has_hole:
                fd = self.synth(env, f)
                fd, fty = self.expose(fd, Arrow, strict=False)
                if _partial(fty.left):
                    raise AmbiguousType("argument type not determined", c)
                ad = self.convert_ctx(down(a), fty.left)
                return ctx("Type-Ctx-App2", fty.right, (fd, ad))
            case Pair(a, b) if a.has_hole:
                ad = down(a)
                bd = self.synth(env, b)
                return ctx("Type-Ctx-Pair1", Prod(ad.ty, bd.ty), (ad, bd))
            case Pair(a, b) if b.has_hole:
                ad = self.synth(env, a)
                bd = down(b)
                return ctx("Type-Ctx-Pair2", Prod(ad.ty, bd.ty), (ad, bd))
            case Proj1(s):
                sd, sty = self.expose_ctx(down(s), Prod)
                return ctx("Type-Ctx-Proj1", sty.left, (sd,))
            case Proj2(s):
                sd, sty = self.expose_ctx(down(s), Prod)
                return ctx("Type-Ctx-Proj2", sty.right, (sd,))
            case Inl(s):
                sd = down(s)
                return ctx("Type-Ctx-Inl", Sum(sd.ty, UNKNOWN), (sd,))
            case Inr(s):
                sd = down(s)
                return ctx("Type-Ctx-Inr", Sum(UNKNOWN, sd.ty), (sd,))
            case Case(s, lv, lb, rv, rb) if s.has_hole:
                sd, sty = self.expose_ctx(down(s), Sum)
                ld, rd = self._branches(
                    env.extend(lv, sty.left), lb, env.extend(rv, sty.right), rb, None, c
                )
                if _partial(ld.ty):
                    raise AmbiguousType("branch types not determined", c)
                return ctx("Type-Ctx-Case1", ld.ty, (sd, ld, rd))
            case Case(s, lv, lb, rv, rb) if lb.has_hole:
                sd, sty = self.expose(self.synth(env, s), Sum)
                ld = down(lb, env.extend(lv, sty.left))
                rd = self.synth(env.extend(rv, sty.right), rb)
                merged = _merge(self.lang, ld.ty, rd.ty)
                if merged is None or _partial(merged):
                    raise TypeCheckError(
                        f"branch types disagree: {ld.ty!r} vs {rd.ty!r}", c
                    )
                return ctx(
                    "Type-Ctx-Case2",
                    merged,
                    (sd, self.convert_ctx(ld, merged), self.convert(rd, merged)),
                )
            case Case(s, lv, lb, rv, rb) if rb.has_hole:
                sd, sty = self.expose(self.synth(env, s), Sum)
                ld = self.synth(env.extend(lv, sty.left), lb)
                rd = down(rb, env.extend(rv, sty.right))
                merged = _merge(self.lang, ld.ty, rd.ty)
                if merged is None or _partial(merged):
                    raise TypeCheckError(
                        f"branch types disagree: {ld.ty!r} vs {rd.ty!r}", c
                    )
                return ctx(
                    "Type-Ctx-Case3",
                    merged,
                    (sd, self.convert(ld, merged), self.convert_ctx(rd, merged)),
                )
            case If(co, a, b) if co.has_hole:
                cd = self.convert_ctx(down(co), Bool())
                ad, bd = self._branches(env, a, env, b, None, c)
                if _partial(ad.ty):
                    raise AmbiguousType("branch types not determined", c)
                return ctx("Type-Ctx-If1", ad.ty, (cd, ad, bd))
            case If(co, a, b) if a.has_hole:
                cd = self.check(env, co, Bool())
                ad = down(a)
                bd = self.synth(env, b)
                merged = _merge(self.lang, ad.ty, bd.ty)
                if merged is None or _partial(merged):
                    raise TypeCheckError(
                        f"branch types disagree: {ad.ty!r} vs {bd.ty!r}", c
                    )
                return ctx(
                    "Type-Ctx-If2",
                    merged,
                    (cd, self.convert_ctx(ad, merged), self.convert(bd, merged)),
                )
            case If(co, a, b) if b.has_hole:
                cd = self.check(env, co, Bool())
                ad = self.synth(env, a)
                bd = down(b)
                merged = _merge(self.lang, ad.ty, bd.ty)
                if merged is None or _partial(merged):
                    raise TypeCheckError(
                        f"branch types disagree: {ad.ty!r} vs {bd.ty!r}", c
                    )
                return ctx(
                    "Type-Ctx-If3",
                    merged,
                    (cd, self.convert(ad, merged), self.convert_ctx(bd, merged)),
                )
            case Seq(a, b) if a.has_hole:
                ad = self.convert_ctx(down(a), Unit())
                bd = self.synth(env, b)
                return ctx("Type-Ctx-Seq1", bd.ty, (ad, bd))
            case Seq(a, b) if b.has_hole:
                ad = self.check(env, a, Unit())
                bd = down(b)
                return ctx("Type-Ctx-Seq2", bd.ty, (ad, bd))
            case Fix(ann, s):
                if self.lang is not Lang.FIX:
                    raise TypeCheckError(f"fix not in lambda-{self.lang}", c)
                _validate_annotation(self.lang, ann, c)
                if not isinstance(ann, Arrow):
                    raise TypeCheckError("fix annotation must be an arrow type", c)
                sd = self.convert_ctx(down(s), Arrow(ann, ann))
                return ctx("Type-Ctx-Fix", ann, (sd,))
            case Fold(ann, s):
                if self.lang is not Lang.ISO:
                    raise TypeCheckError(f"fold not in lambda-{self.lang}", c)
                _validate_annotation(self.lang, ann, c)
                if not isinstance(ann, Mu):
                    raise TypeCheckError("fold annotation must be a mu type", c)
                sd = self.convert_ctx(down(s), unfold_mu(ann))
                return ctx("Type-Ctx-Fold", ann, (sd,))
            case Unfold(ann, s):
                if self.lang is not Lang.ISO:
                    raise TypeCheckError(f"unfold not in lambda-{self.lang}", c)
                _validate_annotation(self.lang, ann, c)
                if not isinstance(ann, Mu):
                    raise TypeCheckError("unfold annotation must be a mu type", c)
                sd = self.convert_ctx(down(s), ann)
                return ctx("Type-Ctx-Unfold", unfold_mu(ann), (sd,))
        raise TypeCheckError("malformed context (no hole on any path)", c)

    def expose_ctx(self, d: CtxDerivation, head: type) -> tuple[CtxDerivation, Type]:
        ty = d.ty
        while self.lang is Lang.EQUI and isinstance(ty, Mu):
            _require_contractive(ty)
            ty = unfold_mu(ty)
            d = CtxDerivation(CONVERSION, d.env, d.ctx, ty, d.hole_env, d.hole_ty, (d,))
        if isinstance(ty, head):
            if _partial(ty):
                raise AmbiguousType(f"context type {ty!r} not fully determined", d.ctx)
            return d, ty
        raise TypeCheckError(f"expected a {head.__name__} type, found {d.ty!r}", d.ctx)


def typecheck(
    lang: Lang, env: TypeEnv, t: Term, expected: Optional[Type] = None
) -> Derivation:
    """Assign a type (a full derivation) to `t`, or raise TypeCheckError.

    With `expected`, the term is checked against that type; equi derivations
    record every conversion used.
    """
    ck = _Checker(lang)
    d = ck.check(env, t, expected) if expected is not None else ck.synth(env, t)
    return _finalize(d)


def typecheck_ctx(
    lang: Lang,
    c: Term,
    hole_env: TypeEnv,
    hole_ty: Type,
    expected: Optional[Type] = None,
) -> CtxDerivation:
    """Derive `|- c : hole_env,hole_ty -> env,ty` with the outer pair
    synthesized (the outer environment is hole_env minus the binders the
    context itself introduces; top-level contexts are closed).  With
    `expected`, the overall type is additionally checked against it."""
    if hole_count(c) != 1:
        raise TypeCheckError(f"a context needs exactly one hole, found {hole_count(c)}", c)
    outer = TypeEnv(tuple((n, ty) for n, ty in hole_env if n not in _bound_on_hole_path(c)))
    ck = _Checker(lang)
    d = ck.synth_ctx(outer, c, hole_env, hole_ty)
    if expected is not None:
        d = ck.convert_ctx(d, expected)
    return _finalize(d)


def _bound_on_hole_path(c: Term) -> frozenset[str]:
    names: set[str] = set()
    while not isinstance(c, Hole):
        match c:
            case Lam(v, _, body) if body.has_hole:
                names.add(v)
                c = body
            case Case(s, lv, lb, rv, rb):
                if s.has_hole:
                    c = s
                elif lb.has_hole:
                    names.add(lv)
                    c = lb
                else:
                    names.add(rv)
                    c = rb
            case _:
                c = next(k for k in children(c) if k.has_hole)
    return frozenset(names)
