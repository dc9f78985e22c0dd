"""Backtranslation-type families and the approximate backtranslation of
target program contexts into source contexts.

For a direction d and budget n, `uval(d, n, ty)` is the source type of
backtranslated terms of target type `ty`: a structure-preserving unfolding
of `ty` that is n levels deep, with an extra failure summand (`... + Unit`)
at every level.  In the FI direction a mu type spends one level when it
unfolds; in the IC and FE directions it unfolds in place, at the same
budget and with no extra summand, which is what makes equal equi-recursive
types share one backtranslation type.

All helper terms (omega, casetag, upgrade/downgrade, the compacted in-dn
and case-up, inject/extract) are emitted as closed lambdas and applied,
never inlined.  Emission is memoized, so repeated helpers are shared
subtrees of the output.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from .statics import CONVERSION, CtxDerivation, Derivation, typecheck_ctx
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
    TmTrue,
    TmUnit,
    TVar,
    Type,
    TypeEnv,
    Unfold,
    Unit,
    Var,
    contractive,
    is_context,
    mentions_mu,
    plug,
    unfold_mu,
)


class Direction(Enum):
    FI = "FI"  # iso contexts backtranslated into fix
    IC = "IC"  # equi contexts backtranslated into iso
    FE = "FE"  # equi contexts backtranslated into fix

    @property
    def source(self) -> Lang:
        return Lang.ISO if self is Direction.IC else Lang.FIX

    @property
    def target(self) -> Lang:
        return Lang.ISO if self is Direction.FI else Lang.EQUI

    def __str__(self) -> str:
        return self.value


class BacktranslationError(Exception):
    pass


def _validate_target_type(dir: Direction, ty: Type) -> None:
    if ty.ftv:
        raise BacktranslationError(f"open target type {ty!r}")
    if not contractive(ty):
        raise BacktranslationError(f"non-contractive target type {ty!r}")


@dataclass(frozen=True)
class UValIndex:
    dir: Direction
    n: int
    ty: Type

    def __post_init__(self) -> None:
        if self.n < 0:
            raise BacktranslationError("negative approximation budget")
        _validate_target_type(self.dir, self.ty)


# ---------------------------------------------------------------------------
# The type family


@lru_cache(maxsize=None)
def uval(dir: Direction, n: int, ty: Type) -> Type:
    """Backtranslation type; contains no mu binders and no type variables."""
    _validate_target_type(dir, ty)
    if n == 0:
        return Unit()
    match ty:
        case Unit():
            return Sum(Unit(), Unit())
        case Bool():
            return Sum(Bool(), Unit())
        case Arrow(a, b):
            return Sum(Arrow(uval(dir, n - 1, a), uval(dir, n - 1, b)), Unit())
        case Prod(a, b):
            return Sum(Prod(uval(dir, n - 1, a), uval(dir, n - 1, b)), Unit())
        case Sum(a, b):
            return Sum(Sum(uval(dir, n - 1, a), uval(dir, n - 1, b)), Unit())
        case Mu():
            if dir is Direction.FI:
                return Sum(uval(dir, n - 1, unfold_mu(ty)), Unit())
            return uval(dir, n, unfold_mu(ty))
    raise BacktranslationError(f"no backtranslation type at {ty!r}")


@lru_cache(maxsize=None)
def comp_ty(dir: Direction, n: int, ty: Type) -> Type:
    """The payload carried by uval(dir, n+1, ty) under its inl tag."""
    match ty:
        case Unit():
            return Unit()
        case Bool():
            return Bool()
        case Arrow(a, b):
            return Arrow(uval(dir, n, a), uval(dir, n, b))
        case Prod(a, b):
            return Prod(uval(dir, n, a), uval(dir, n, b))
        case Sum(a, b):
            return Sum(uval(dir, n, a), uval(dir, n, b))
        case Mu():
            if dir is Direction.FI:
                return uval(dir, n, unfold_mu(ty))
            raise BacktranslationError(
                "no component at a mu index in the equi directions: "
                "the backtranslation type is already unfolded there"
            )
    raise BacktranslationError(f"no component type at {ty!r}")


# ---------------------------------------------------------------------------
# Helper terms


@lru_cache(maxsize=None)
def omega(lang: Lang, ty: Type) -> Term:
    """A closed term of type `ty` that diverges under evaluation."""
    if lang is Lang.FIX:
        fn_ty = Arrow(Unit(), ty)
        loop = Fix(fn_ty, Lam("f", fn_ty, Lam("u", Unit(), App(Var("f"), Var("u")))))
        return App(loop, TmUnit())
    if lang is Lang.ISO:
        mu = Mu("a", Arrow(TVar("a"), ty))
        w = Lam("x", mu, App(Unfold(mu, Var("x")), Var("x")))
        return App(w, Fold(mu, w))
    raise BacktranslationError(f"omega not emitted for lambda-{lang}")


def unk(dir: Direction, n: int, ty: Type) -> Term:
    """The canonical failure value of type uval(dir, n, ty)."""
    del ty  # the term is the same at every type of the same level
    return TmUnit() if n == 0 else Inr(TmUnit())


def _no_mu_index(dir: Direction, ty: Type, what: str) -> None:
    if dir is not Direction.FI and isinstance(ty, Mu):
        raise BacktranslationError(
            f"{what} at a mu index never arises in direction {dir}"
        )


@lru_cache(maxsize=None)
def casetag(dir: Direction, n: int, ty: Type) -> Term:
    """uval(dir, n, ty) -> comp_ty(dir, n-1, ty): strip the inl tag,
    diverge on the failure summand."""
    if n < 1:
        raise BacktranslationError("casetag needs a budget of at least 1")
    _no_mu_index(dir, ty, "casetag")
    bad = omega(dir.source, comp_ty(dir, n - 1, ty))
    return Lam(
        "x",
        uval(dir, n, ty),
        Case(Var("x"), "x1", Var("x1"), "x2", bad),
    )


@lru_cache(maxsize=None)
def upgrade(dir: Direction, n: int, d: int, ty: Type) -> Term:
    """uval(dir, n, ty) -> uval(dir, n+d, ty): pad with d unknown levels."""
    if d < 1:
        raise BacktranslationError("upgrade needs d >= 1")
    _validate_target_type(dir, ty)
    if n == 0:
        return Lam("x", uval(dir, 0, ty), unk(dir, d, ty))
    if dir is not Direction.FI and isinstance(ty, Mu):
        return upgrade(dir, n, d, unfold_mu(ty))
    inty = uval(dir, n, ty)

    def wrap(body_of_x1: Term) -> Term:
        return Lam(
            "x", inty, Case(Var("x"), "x1", body_of_x1, "x2", Inr(Var("x2")))
        )

    match ty:
        case Unit() | Bool():
            return Lam("x", inty, Var("x"))
        case Prod(a, b):
            return wrap(
                Inl(
                    Pair(
                        App(upgrade(dir, n - 1, d, a), Proj1(Var("x1"))),
                        App(upgrade(dir, n - 1, d, b), Proj2(Var("x1"))),
                    )
                )
            )
        case Sum(a, b):
            return wrap(
                Inl(
                    Case(
                        Var("x1"),
                        "y1",
                        Inl(App(upgrade(dir, n - 1, d, a), Var("y1"))),
                        "y2",
                        Inr(App(upgrade(dir, n - 1, d, b), Var("y2"))),
                    )
                )
            )
        case Arrow(a, b):
            return wrap(
                Inl(
                    Lam(
                        "z",
                        uval(dir, n - 1 + d, a),
                        App(
                            upgrade(dir, n - 1, d, b),
                            App(Var("x1"), App(downgrade(dir, n - 1, d, a), Var("z"))),
                        ),
                    )
                )
            )
        case Mu():
            return wrap(Inl(App(upgrade(dir, n - 1, d, unfold_mu(ty)), Var("x1"))))
    raise BacktranslationError(f"no upgrade at {ty!r}")


@lru_cache(maxsize=None)
def downgrade(dir: Direction, n: int, d: int, ty: Type) -> Term:
    """uval(dir, n+d, ty) -> uval(dir, n, ty): forget d levels of precision."""
    if d < 1:
        raise BacktranslationError("downgrade needs d >= 1")
    _validate_target_type(dir, ty)
    if n == 0:
        return Lam("x", uval(dir, d, ty), TmUnit())
    if dir is not Direction.FI and isinstance(ty, Mu):
        return downgrade(dir, n, d, unfold_mu(ty))
    inty = uval(dir, n + d, ty)

    def wrap(body_of_x1: Term) -> Term:
        return Lam(
            "x", inty, Case(Var("x"), "x1", body_of_x1, "x2", Inr(Var("x2")))
        )

    match ty:
        case Unit() | Bool():
            return Lam("x", inty, Var("x"))
        case Prod(a, b):
            return wrap(
                Inl(
                    Pair(
                        App(downgrade(dir, n - 1, d, a), Proj1(Var("x1"))),
                        App(downgrade(dir, n - 1, d, b), Proj2(Var("x1"))),
                    )
                )
            )
        case Sum(a, b):
            return wrap(
                Inl(
                    Case(
                        Var("x1"),
                        "y1",
                        Inl(App(downgrade(dir, n - 1, d, a), Var("y1"))),
                        "y2",
                        Inr(App(downgrade(dir, n - 1, d, b), Var("y2"))),
                    )
                )
            )
        case Arrow(a, b):
            return wrap(
                Inl(
                    Lam(
                        "z",
                        uval(dir, n - 1, a),
                        App(
                            downgrade(dir, n - 1, d, b),
                            App(Var("x1"), App(upgrade(dir, n - 1, d, a), Var("z"))),
                        ),
                    )
                )
            )
        case Mu():
            return wrap(Inl(App(downgrade(dir, n - 1, d, unfold_mu(ty)), Var("x1"))))
    raise BacktranslationError(f"no downgrade at {ty!r}")


@lru_cache(maxsize=None)
def indn(dir: Direction, n: int, ty: Type) -> Term:
    """comp_ty(dir, n, ty) -> uval(dir, n, ty): tag with inl, then downgrade
    the one level of precision the tag consumed."""
    _no_mu_index(dir, ty, "in-dn")
    return Lam(
        "x", comp_ty(dir, n, ty), App(downgrade(dir, n, 1, ty), Inl(Var("x")))
    )


@lru_cache(maxsize=None)
def caseup(dir: Direction, n: int, ty: Type) -> Term:
    """uval(dir, n, ty) -> comp_ty(dir, n, ty): upgrade one level, then
    strip the tag (diverging on failure)."""
    _no_mu_index(dir, ty, "case-up")
    return Lam(
        "x",
        uval(dir, n, ty),
        App(casetag(dir, n + 1, ty), App(upgrade(dir, n, 1, ty), Var("x"))),
    )


# ---------------------------------------------------------------------------
# inject / extract


def _validate_source_type(dir: Direction, ty: Type) -> None:
    if dir is not Direction.IC and mentions_mu(ty):
        raise BacktranslationError(
            f"direction {dir} has a fix-language source; {ty!r} mentions mu"
        )
    if ty.ftv:
        raise BacktranslationError(f"open source type {ty!r}")
    if not contractive(ty):
        raise BacktranslationError(f"non-contractive source type {ty!r}")


@lru_cache(maxsize=None)
def inject(dir: Direction, n: int, ty: Type) -> Term:
    """ty -> uval(dir, n, ty): wrap a genuine source value as a
    backtranslated value (type compilation is the identity)."""
    _validate_source_type(dir, ty)
    if n == 0:
        return Lam("x", ty, TmUnit())
    match ty:
        case Unit() | Bool():
            return Lam("x", ty, Inl(Var("x")))
        case Arrow(a, b):
            return Lam(
                "x",
                ty,
                Inl(
                    Lam(
                        "y",
                        uval(dir, n - 1, a),
                        App(
                            inject(dir, n - 1, b),
                            App(Var("x"), App(extract(dir, n - 1, a), Var("y"))),
                        ),
                    )
                ),
            )
        case Prod(a, b):
            return Lam(
                "x",
                ty,
                Inl(
                    Pair(
                        App(inject(dir, n - 1, a), Proj1(Var("x"))),
                        App(inject(dir, n - 1, b), Proj2(Var("x"))),
                    )
                ),
            )
        case Sum(a, b):
            return Lam(
                "x",
                ty,
                Inl(
                    Case(
                        Var("x"),
                        "y1",
                        Inl(App(inject(dir, n - 1, a), Var("y1"))),
                        "y2",
                        Inr(App(inject(dir, n - 1, b), Var("y2"))),
                    )
                ),
            )
        case Mu():
            # only in the IC direction: unfold the value, inject in place
            return Lam(
                "x", ty, App(inject(dir, n, unfold_mu(ty)), Unfold(ty, Var("x")))
            )
    raise BacktranslationError(f"no inject at {ty!r}")


@lru_cache(maxsize=None)
def extract(dir: Direction, n: int, ty: Type) -> Term:
    """uval(dir, n, ty) -> ty: recover a genuine source value, diverging
    when the budget runs out or a failure marker is hit."""
    _validate_source_type(dir, ty)
    if n == 0:
        return Lam("x", uval(dir, 0, ty), omega(dir.source, ty))
    if isinstance(ty, Mu):
        # only in the IC direction: extract at the unfolding, then fold
        return Lam(
            "x",
            uval(dir, n, ty),
            Fold(ty, App(extract(dir, n, unfold_mu(ty)), Var("x"))),
        )
    ct = casetag(dir, n, ty)
    match ty:
        case Unit() | Bool():
            return Lam("x", uval(dir, n, ty), App(ct, Var("x")))
        case Arrow(a, b):
            return Lam(
                "x",
                uval(dir, n, ty),
                Lam(
                    "y",
                    a,
                    App(
                        extract(dir, n - 1, b),
                        App(App(ct, Var("x")), App(inject(dir, n - 1, a), Var("y"))),
                    ),
                ),
            )
        case Prod(a, b):
            return Lam(
                "x",
                uval(dir, n, ty),
                Pair(
                    App(extract(dir, n - 1, a), Proj1(App(ct, Var("x")))),
                    App(extract(dir, n - 1, b), Proj2(App(ct, Var("x")))),
                ),
            )
        case Sum(a, b):
            return Lam(
                "x",
                uval(dir, n, ty),
                Case(
                    App(ct, Var("x")),
                    "y1",
                    Inl(App(extract(dir, n - 1, a), Var("y1"))),
                    "y2",
                    Inr(App(extract(dir, n - 1, b), Var("y2"))),
                ),
            )
    raise BacktranslationError(f"no extract at {ty!r}")


# ---------------------------------------------------------------------------
# Emulation of derivations


def toemul(dir: Direction, env: TypeEnv, n: int) -> TypeEnv:
    """Give every target binding its backtranslation type."""
    return TypeEnv(tuple((x, uval(dir, n, ty)) for x, ty in env))


def emulate(dir: Direction, n: int, d: Derivation) -> Term:
    """Backtranslate a target typing derivation: constructor nodes are
    wrapped with in-dn, destructor nodes with case-up, fold/unfold map to
    the mu-indexed helpers, conversions are transparent."""

    def go(d: Derivation) -> Term:
        t = d.term
        match d.rule:
            case "Type-unit":
                return App(indn(dir, n, Unit()), TmUnit())
            case "Type-true" | "Type-false":
                return App(indn(dir, n, Bool()), t)
            case "Type-var":
                return t
            case "Type-lam":
                assert isinstance(t, Lam)
                body = go(d.kids[0])
                lam = Lam(t.var, uval(dir, n, t.var_ty), body)
                return App(indn(dir, n, d.ty), lam)
            case "Type-app":
                fd, ad = d.kids
                return App(App(caseup(dir, n, fd.ty), go(fd)), go(ad))
            case "Type-pair":
                ad, bd = d.kids
                return App(indn(dir, n, d.ty), Pair(go(ad), go(bd)))
            case "Type-p1":
                (sd,) = d.kids
                return Proj1(App(caseup(dir, n, sd.ty), go(sd)))
            case "Type-p2":
                (sd,) = d.kids
                return Proj2(App(caseup(dir, n, sd.ty), go(sd)))
            case "Type-inl":
                (sd,) = d.kids
                return App(indn(dir, n, d.ty), Inl(go(sd)))
            case "Type-inr":
                (sd,) = d.kids
                return App(indn(dir, n, d.ty), Inr(go(sd)))
            case "Type-case":
                assert isinstance(t, Case)
                sd, ld, rd = d.kids
                return Case(
                    App(caseup(dir, n, sd.ty), go(sd)), t.lvar, go(ld), t.rvar, go(rd)
                )
            case "Type-if":
                cd, ad, bd = d.kids
                return If(App(caseup(dir, n, Bool()), go(cd)), go(ad), go(bd))
            case "Type-seq":
                ad, bd = d.kids
                return Seq(App(caseup(dir, n, Unit()), go(ad)), go(bd))
            case "Type-fold":
                if dir is not Direction.FI:
                    raise BacktranslationError("fold derivation outside direction FI")
                (sd,) = d.kids
                return App(indn(dir, n, d.ty), go(sd))
            case "Type-unfold":
                if dir is not Direction.FI:
                    raise BacktranslationError("unfold derivation outside direction FI")
                (sd,) = d.kids
                return App(caseup(dir, n, sd.ty), go(sd))
            case "Type-eq":
                if dir is Direction.FI:
                    raise BacktranslationError("conversion derivation in direction FI")
                return go(d.kids[0])
        raise BacktranslationError(f"cannot emulate rule {d.rule}")

    return go(d)


def emulate_ctx(dir: Direction, n: int, cd: CtxDerivation) -> Term:
    """As `emulate`, on a context derivation; the hole maps to the hole."""

    def go(cd: CtxDerivation) -> Term:
        c = cd.ctx
        match cd.rule:
            case "Type-Ctx-Hole":
                return Hole()
            case "Type-Ctx-Lam":
                assert isinstance(c, Lam)
                (bd,) = cd.kids
                lam = Lam(c.var, uval(dir, n, c.var_ty), go(bd))
                return App(indn(dir, n, cd.ty), lam)
            case "Type-Ctx-App1":
                fd, ad = cd.kids
                return App(App(caseup(dir, n, fd.ty), go(fd)), emulate(dir, n, ad))
            case "Type-Ctx-App2":
                fd, ad = cd.kids
                return App(App(caseup(dir, n, fd.ty), emulate(dir, n, fd)), go(ad))
            case "Type-Ctx-Pair1":
                ad, bd = cd.kids
                return App(indn(dir, n, cd.ty), Pair(go(ad), emulate(dir, n, bd)))
            case "Type-Ctx-Pair2":
                ad, bd = cd.kids
                return App(indn(dir, n, cd.ty), Pair(emulate(dir, n, ad), go(bd)))
            case "Type-Ctx-Inl":
                (sd,) = cd.kids
                return App(indn(dir, n, cd.ty), Inl(go(sd)))
            case "Type-Ctx-Inr":
                (sd,) = cd.kids
                return App(indn(dir, n, cd.ty), Inr(go(sd)))
            case "Type-Ctx-Proj1":
                (sd,) = cd.kids
                return Proj1(App(caseup(dir, n, sd.ty), go(sd)))
            case "Type-Ctx-Proj2":
                (sd,) = cd.kids
                return Proj2(App(caseup(dir, n, sd.ty), go(sd)))
            case "Type-Ctx-Case1":
                assert isinstance(c, Case)
                sd, ld, rd = cd.kids
                return Case(
                    App(caseup(dir, n, sd.ty), go(sd)),
                    c.lvar,
                    emulate(dir, n, ld),
                    c.rvar,
                    emulate(dir, n, rd),
                )
            case "Type-Ctx-Case2":
                assert isinstance(c, Case)
                sd, ld, rd = cd.kids
                return Case(
                    App(caseup(dir, n, sd.ty), emulate(dir, n, sd)),
                    c.lvar,
                    go(ld),
                    c.rvar,
                    emulate(dir, n, rd),
                )
            case "Type-Ctx-Case3":
                assert isinstance(c, Case)
                sd, ld, rd = cd.kids
                return Case(
                    App(caseup(dir, n, sd.ty), emulate(dir, n, sd)),
                    c.lvar,
                    emulate(dir, n, ld),
                    c.rvar,
                    go(rd),
                )
            case "Type-Ctx-If1":
                cd2, ad, bd = cd.kids
                return If(
                    App(caseup(dir, n, Bool()), go(cd2)),
                    emulate(dir, n, ad),
                    emulate(dir, n, bd),
                )
            case "Type-Ctx-If2":
                cd2, ad, bd = cd.kids
                return If(
                    App(caseup(dir, n, Bool()), emulate(dir, n, cd2)),
                    go(ad),
                    emulate(dir, n, bd),
                )
            case "Type-Ctx-If3":
                cd2, ad, bd = cd.kids
                return If(
                    App(caseup(dir, n, Bool()), emulate(dir, n, cd2)),
                    emulate(dir, n, ad),
                    go(bd),
                )
            case "Type-Ctx-Seq1":
                ad, bd = cd.kids
                return Seq(App(caseup(dir, n, Unit()), go(ad)), emulate(dir, n, bd))
            case "Type-Ctx-Seq2":
                ad, bd = cd.kids
                return Seq(
                    App(caseup(dir, n, Unit()), emulate(dir, n, ad)), go(bd)
                )
            case "Type-Ctx-Fold":
                if dir is not Direction.FI:
                    raise BacktranslationError("fold context outside direction FI")
                (sd,) = cd.kids
                return App(indn(dir, n, cd.ty), go(sd))
            case "Type-Ctx-Unfold":
                if dir is not Direction.FI:
                    raise BacktranslationError("unfold context outside direction FI")
                (sd,) = cd.kids
                return App(caseup(dir, n, sd.ty), go(sd))
            case "Type-eq":
                if dir is Direction.FI:
                    raise BacktranslationError("conversion context in direction FI")
                return go(cd.kids[0])
        raise BacktranslationError(f"cannot emulate context rule {cd.rule}")

    return go(cd)


# ---------------------------------------------------------------------------
# The backtranslation proper


def backtranslate_ctx(
    dir: Direction,
    ctx: Term,
    n: int,
    hole_src_ty: Type,
    hole_env: TypeEnv = TypeEnv(),
) -> Term:
    """Approximate backtranslation of a target context whose hole takes the
    compilation of `hole_src_ty`: a source context that accepts source terms
    of that type and returns a value of uval(dir, n, result type)."""
    if not is_context(ctx):
        raise BacktranslationError("backtranslate_ctx expects a single-hole context")
    _validate_source_type(dir, hole_src_ty)
    # type compilation is the identity, so the target hole type is the same tree
    cd = typecheck_ctx(dir.target, ctx, hole_env, hole_src_ty)
    emulated = emulate_ctx(dir, n, cd)
    return plug(emulated, App(inject(dir, n, hole_src_ty), Hole()))


def to_fix_image(t: Term) -> Term:
    """Map an emitted iso-language backtranslation artifact to its fix-language
    counterpart: the trees agree except that divergence is encoded with
    fold/unfold self-application in iso and with the fix primitive in fix."""

    def go(t: Term) -> Term:
        om_ty = _omega_iso_type(t)
        if om_ty is not None:
            return omega(Lang.FIX, om_ty)
        match t:
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
            case Fold() | Unfold() | Fix():
                raise BacktranslationError(
                    "unexpected recursion form outside an omega encoding"
                )
            case _:
                return t

    return go(t)


def _omega_iso_type(t: Term) -> Type | None:
    match t:
        case App(Lam(_, Mu(_, Arrow(TVar(_), ty)), _), Fold()):
            if t == omega(Lang.ISO, ty):
                return ty
    return None
