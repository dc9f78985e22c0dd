"""Typecheckers, coinductive type equality, and context typing."""

import pytest

from lamrec.harness import GenConfig, gen_type
from lamrec.statics import (
    AmbiguousType,
    NotContractive,
    TypeCheckError,
    typecheck,
    typecheck_ctx,
    type_eq,
)
from lamrec.surface import parse_context, parse_term, parse_type
from lamrec.syntax import (
    EMPTY_ENV,
    Arrow,
    Bool,
    Lang,
    Mu,
    Prod,
    Sum,
    TVar,
    TypeEnv,
    Unit,
    subst_type,
    unfold_mu,
)

U, B = Unit(), Bool()


def eq(a: str, b: str) -> bool:
    return type_eq(parse_type(a, Lang.EQUI), parse_type(b, Lang.EQUI))


# -- type_eq: the four examples from the equality suite


def test_type_eq_unfold_left():
    assert eq("mu a. Unit + a", "Unit + (mu a. Unit + a)")


def test_type_eq_coinductive_but_not_inductive():
    assert eq("mu a. a -> Unit", "mu a. (a -> Unit) -> Unit")


def test_type_eq_distinct_prims():
    assert not eq("Unit", "Bool")


def test_type_eq_inner_unfolding():
    assert eq(
        "(mu a. Bool + a) -> Bool",
        "(Bool + (mu a. Bool + a)) -> Bool",
    )


def test_type_eq_more_negative_cases():
    assert not eq("mu a. Unit + a", "mu a. Bool + a")
    assert not eq("Bool -> Bool", "Bool * Bool")
    assert not eq("mu a. a -> Unit", "mu a. a -> Bool")


def test_type_eq_symmetric_on_nested_binders():
    a = parse_type("mu a. mu b. a -> b", Lang.EQUI)
    b = parse_type("mu a. a -> a", Lang.EQUI)
    assert type_eq(a, b) == type_eq(b, a)


def test_type_eq_alpha_insensitive_via_unfolding():
    assert eq("mu a. a -> Unit", "mu b. b -> Unit")


def test_type_eq_rejects_non_contractive():
    with pytest.raises(NotContractive):
        eq("mu a. a", "Unit")


def test_type_eq_vacuous_mu():
    assert eq("mu a. Bool", "Bool")


def _gen_types(count: int, seed: int, depth: int = 6):
    out = []
    k = 0
    while len(out) < count:
        cfg = GenConfig(seed=seed + k, lang=Lang.EQUI)
        k += 1
        try:
            out.append(gen_type(cfg.rng(), cfg, depth))
        except Exception:
            continue
    return out


def test_type_eq_equivalence_laws_on_generated_types():
    import random

    rng = random.Random(7)
    for ty in _gen_types(60, seed=500):
        v1 = _unfold_somewhere(ty, rng)
        v2 = _unfold_somewhere(v1, rng)
        assert type_eq(ty, ty)  # reflexivity
        assert type_eq(ty, v1) and type_eq(v1, ty)  # symmetry
        assert type_eq(v1, v2)
        assert type_eq(ty, v2)  # transitivity along the chain
        assert type_eq(Arrow(ty, v1), Arrow(v1, v2))  # congruence
        assert type_eq(Sum(ty, ty), Sum(v2, v1))
        if isinstance(ty, Mu):
            assert type_eq(ty, unfold_mu(ty))


def _unfold_somewhere(ty, rng):
    """Unfold one randomly-chosen mu binder (or return the type unchanged
    when it has none)."""
    from lamrec.syntax import Arrow as A, Prod as P, Sum as S

    if isinstance(ty, Mu) and rng.random() < 0.6:
        return unfold_mu(ty)
    match ty:
        case A(l, r):
            return A(_unfold_somewhere(l, rng), _unfold_somewhere(r, rng))
        case P(l, r):
            return P(_unfold_somewhere(l, rng), _unfold_somewhere(r, rng))
        case S(l, r):
            return S(_unfold_somewhere(l, rng), _unfold_somewhere(r, rng))
        case Mu(v, _):
            return unfold_mu(ty) if rng.random() < 0.5 else ty
        case _:
            return ty


# -- typecheck


def test_typecheck_lambda():
    d = typecheck(Lang.FIX, EMPTY_ENV, parse_term("\\x:Bool. x", Lang.FIX))
    assert d.ty == Arrow(B, B)
    assert d.rule == "Type-lam"


def test_typecheck_fold():
    t = parse_term("fold[mu a. Unit + a] (inl unit)", Lang.ISO)
    d = typecheck(Lang.ISO, EMPTY_ENV, t)
    assert d.ty == parse_type("mu a. Unit + a", Lang.ISO)


def test_typecheck_equi_conversion():
    mu = parse_type("mu a. Unit + a", Lang.EQUI)
    d = typecheck(Lang.EQUI, EMPTY_ENV, parse_term("inl unit", Lang.EQUI), expected=mu)
    assert d.ty == mu
    assert d.conversions() == [(unfold_mu(mu), mu)]


def test_typecheck_fix():
    t = parse_term(
        "fix[Unit -> Unit] (\\f:Unit -> Unit. \\x:Unit. x)", Lang.FIX
    )
    d = typecheck(Lang.FIX, EMPTY_ENV, t)
    assert d.ty == Arrow(U, U)


def test_typecheck_detects_ill_typed():
    with pytest.raises(TypeCheckError):
        typecheck(Lang.FIX, EMPTY_ENV, parse_term("(\\x:Bool. x) unit", Lang.FIX))
    with pytest.raises(TypeCheckError):
        typecheck(Lang.FIX, EMPTY_ENV, parse_term("unit.1", Lang.FIX))
    with pytest.raises(TypeCheckError):
        typecheck(Lang.FIX, EMPTY_ENV, parse_term("if unit then unit else unit", Lang.FIX))


def test_typecheck_unbound_variable():
    with pytest.raises(TypeCheckError, match="unbound"):
        typecheck(Lang.FIX, EMPTY_ENV, parse_term("zz", Lang.FIX))


def test_typecheck_rejects_bare_injection():
    with pytest.raises(AmbiguousType):
        typecheck(Lang.FIX, EMPTY_ENV, parse_term("inl unit", Lang.FIX))


def test_typecheck_rejects_non_contractive_annotation():
    t = parse_term("\\x:mu a. a. x", Lang.EQUI)
    with pytest.raises(NotContractive):
        typecheck(Lang.EQUI, EMPTY_ENV, t)


def test_typecheck_rejects_open_annotation():
    t = parse_term("\\x:a. x", Lang.EQUI)
    with pytest.raises(TypeCheckError, match="open"):
        typecheck(Lang.EQUI, EMPTY_ENV, t)


def test_typecheck_rejects_fix_outside_fix_lang():
    from lamrec.syntax import Fix, Lam, Var

    t = Fix(Arrow(U, U), Lam("f", Arrow(U, U), Var("f")))
    with pytest.raises(TypeCheckError):
        typecheck(Lang.ISO, EMPTY_ENV, t)


def test_typecheck_equi_elimination_through_mu():
    # a variable of recursive type used at its unfolding
    mu = parse_type("mu a. Bool * a", Lang.EQUI)
    env = TypeEnv((("s", mu),))
    d = typecheck(Lang.EQUI, env, parse_term("s.1", Lang.EQUI))
    assert d.ty == B
    assert d.conversions() == [(mu, unfold_mu(mu))]


def test_lambda_fix_determinism_and_uniqueness():
    for seed in range(40):
        from lamrec.harness import gen_well_typed

        cfg = GenConfig(seed=seed, max_depth=4, lang=Lang.FIX)
        try:
            t = gen_well_typed(cfg, target_type=B)
        except Exception:
            continue
        d1 = typecheck(Lang.FIX, EMPTY_ENV, t)
        d2 = typecheck(Lang.FIX, EMPTY_ENV, t)
        assert d1 == d2  # rerunning yields a structurally identical derivation


# -- context typing


def test_ctx_hole():
    d = typecheck_ctx(Lang.FIX, parse_context("_", Lang.FIX), EMPTY_ENV, B)
    assert d.rule == "Type-Ctx-Hole"
    assert d.ty == B and d.hole_ty == B


def test_ctx_if_scrutinee():
    c = parse_context("if _ then unit else unit", Lang.FIX)
    d = typecheck_ctx(Lang.FIX, c, EMPTY_ENV, B)
    assert d.ty == U
    assert d.rule == "Type-Ctx-If1"


def test_ctx_hole_type_mismatch():
    c = parse_context("_ true", Lang.FIX)
    with pytest.raises(TypeCheckError):
        typecheck_ctx(Lang.FIX, c, EMPTY_ENV, U)


def test_ctx_binder_over_hole():
    c = parse_context("\\x:Bool. _", Lang.FIX)
    d = typecheck_ctx(Lang.FIX, c, TypeEnv((("x", B),)), U)
    assert d.ty == Arrow(B, U)
    with pytest.raises(TypeCheckError, match="hole used under"):
        typecheck_ctx(Lang.FIX, c, EMPTY_ENV, U)


def test_ctx_fold_unfold():
    mu = parse_type("mu a. Unit + a", Lang.ISO)
    c = parse_context("unfold[mu a. Unit + a] _", Lang.ISO)
    d = typecheck_ctx(Lang.ISO, c, EMPTY_ENV, mu)
    assert d.ty == unfold_mu(mu)


def test_ctx_equi_conversion_rule():
    mu = parse_type("mu a. Bool * a", Lang.EQUI)
    c = parse_context("_.1", Lang.EQUI)
    d = typecheck_ctx(Lang.EQUI, c, EMPTY_ENV, mu)
    assert d.ty == B


def test_subject_reduction_at_desk_scale():
    from lamrec.dynamics import step
    from lamrec.harness import gen_well_typed

    checked = 0
    for seed in range(120):
        for lang in (Lang.FIX, Lang.ISO, Lang.EQUI):
            cfg = GenConfig(seed=seed, max_depth=4, lang=lang)
            try:
                t = gen_well_typed(cfg, target_type=B)
            except Exception:
                continue
            ty0 = B
            for _ in range(60):
                nxt = step(t)
                if nxt is None:
                    break
                t = nxt
                d = typecheck(lang, EMPTY_ENV, t, expected=ty0)
                assert d.ty == ty0
                checked += 1
    assert checked > 100
