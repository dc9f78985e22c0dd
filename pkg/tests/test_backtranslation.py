"""The backtranslation-type family, its helper terms, emulation, and the
approximate backtranslation of contexts."""

import pytest

from lamrec.backtranslation import (
    BacktranslationError,
    Direction,
    UValIndex,
    backtranslate_ctx,
    caseup,
    casetag,
    comp_ty,
    downgrade,
    emulate,
    emulate_ctx,
    extract,
    indn,
    inject,
    omega,
    to_fix_image,
    toemul,
    unk,
    upgrade,
    uval,
)
from lamrec.compilers import compile_ctx, compile_term
from lamrec.dynamics import OutOfFuel, Value, eval_term, shrink_holds
from lamrec.statics import typecheck, typecheck_ctx, type_eq
from lamrec.surface import parse_context, parse_term, parse_type, print_type
from lamrec.syntax import (
    EMPTY_ENV,
    App,
    Arrow,
    Bool,
    Hole,
    Inl,
    Inr,
    Lam,
    Lang,
    Mu,
    Pair,
    Prod,
    Sum,
    TmTrue,
    TmUnit,
    TVar,
    TypeEnv,
    Unit,
    mentions_mu,
    plug,
    size,
    unfold_mu,
)

FI, IC, FE = Direction.FI, Direction.IC, Direction.FE
U, B = Unit(), Bool()
LIST_B = parse_type("mu a. Unit + (Bool * a)", Lang.EQUI)
MU_UA = parse_type("mu a. Unit + a", Lang.EQUI)


def ok(lang, t, ty):
    d = typecheck(lang, EMPTY_ENV, t, expected=ty)
    assert d.ty == ty
    return d


# -- the type family


def test_uval_zero_budget():
    assert uval(FI, 0, B) == U
    assert uval(FE, 0, LIST_B) == U


def test_uval_iso_mu_spends_a_level():
    assert uval(FI, 1, MU_UA) == Sum(U, U)
    # level 2: the mu spends one level unfolding, the sum another
    assert uval(FI, 2, MU_UA) == Sum(Sum(Sum(U, U), U), U)


def test_uval_equi_mu_unfolds_in_place():
    # hand-applying the defining equations: the mu case keeps the budget
    # and adds no failure summand, so level 3 expands to
    #   ((Unit+Unit) + (((Bool+Unit) * ((Unit+Unit)+Unit)) + Unit)) + Unit
    expected = Sum(
        Sum(
            Sum(U, U),
            Sum(Prod(Sum(B, U), Sum(Sum(U, U), U)), U),
        ),
        U,
    )
    assert uval(FE, 3, LIST_B) == expected
    assert (
        print_type(uval(FE, 3, LIST_B))
        == "Unit + Unit + ((Bool + Unit) * (Unit + Unit + Unit) + Unit) + Unit"
    )


def test_uval_ic_equals_uval_fe():
    for n in range(6):
        for ty in (LIST_B, MU_UA, Arrow(B, LIST_B), U):
            assert uval(IC, n, ty) == uval(FE, n, ty)


def test_uval_output_mentions_no_mu():
    for dir in (FI, IC, FE):
        for n in range(6):
            ty = uval(dir, n, LIST_B)
            assert not mentions_mu(ty)
            assert not ty.ftv


def test_uval_rejects_non_contractive():
    with pytest.raises(BacktranslationError):
        uval(FI, 2, Mu("a", TVar("a")))
    with pytest.raises(BacktranslationError):
        UValIndex(FI, 2, Mu("a", TVar("a")))


def test_equivalent_types_share_backtranslation_type():
    pairs = [
        (MU_UA, unfold_mu(MU_UA)),
        (LIST_B, unfold_mu(LIST_B)),
        (Arrow(MU_UA, B), Arrow(unfold_mu(MU_UA), B)),
        (parse_type("mu a. a -> Unit", Lang.EQUI), parse_type("mu a. (a -> Unit) -> Unit", Lang.EQUI)),
    ]
    for a, b in pairs:
        assert type_eq(a, b)
        for n in range(6):
            assert uval(FE, n, a) == uval(FE, n, b)


# -- omega


@pytest.mark.parametrize("lang", [Lang.FIX, Lang.ISO])
@pytest.mark.parametrize("ty", [U, B, Arrow(B, B)])
def test_omega_types_and_diverges(lang, ty):
    om = omega(lang, ty)
    assert typecheck(lang, EMPTY_ENV, om).ty == ty
    assert isinstance(eval_term(om, 10000), OutOfFuel)


def test_omega_not_emitted_for_equi():
    with pytest.raises(BacktranslationError):
        omega(Lang.EQUI, U)


# -- unk


def test_unk_levels():
    assert unk(FI, 0, B) == TmUnit()
    assert unk(FI, 2, B) == Inr(TmUnit())
    for n in range(4):
        for ty in (B, U, MU_UA):
            for dir in (FI, FE):
                if dir is not FI or True:
                    ok(Lang.FIX, unk(dir, n, ty), uval(dir, n, ty))


# -- casetag


def test_casetag_strips_success_tag():
    ct = casetag(FI, 1, B)
    ok(Lang.FIX, ct, Arrow(uval(FI, 1, B), comp_ty(FI, 0, B)))
    out = eval_term(App(ct, Inl(TmTrue())), 10)
    assert out == Value(TmTrue(), out.steps)


def test_casetag_diverges_on_failure_marker():
    assert isinstance(eval_term(App(casetag(FI, 1, B), Inr(TmUnit())), 10000), OutOfFuel)


def test_casetag_rejected_at_mu_in_equi_directions():
    with pytest.raises(BacktranslationError):
        casetag(FE, 2, MU_UA)
    with pytest.raises(BacktranslationError):
        casetag(IC, 2, MU_UA)
    casetag(FI, 2, MU_UA)  # fine in the iso direction


def test_casetag_needs_positive_budget():
    with pytest.raises(BacktranslationError):
        casetag(FI, 0, B)


# -- upgrade / downgrade


def test_downgrade_forgets_shape():
    out = eval_term(App(downgrade(FI, 0, 1, B), Inl(TmTrue())), 10)
    assert out.value == TmUnit()


def test_upgrade_pads_with_unknown():
    out = eval_term(App(upgrade(FI, 0, 1, B), TmUnit()), 10)
    assert out.value == Inr(TmUnit())


def test_downgrade_after_upgrade_is_identity():
    t = App(downgrade(FI, 1, 1, B), App(upgrade(FI, 1, 1, B), Inl(TmTrue())))
    assert eval_term(t, 100).value == Inl(TmTrue())


def test_upgrade_after_downgrade_forgets():
    t = App(upgrade(FI, 0, 1, B), App(downgrade(FI, 0, 1, B), Inl(TmTrue())))
    assert eval_term(t, 100).value == Inr(TmUnit())


@pytest.mark.parametrize("dir", [FI, IC, FE])
@pytest.mark.parametrize("n,d", [(0, 1), (1, 1), (2, 1), (1, 2), (3, 2)])
def test_upgrade_downgrade_types(dir, n, d):
    lang = dir.source
    for ty in (B, Prod(B, U), Arrow(B, B), MU_UA, LIST_B):
        ok(lang, upgrade(dir, n, d, ty), Arrow(uval(dir, n, ty), uval(dir, n + d, ty)))
        ok(lang, downgrade(dir, n, d, ty), Arrow(uval(dir, n + d, ty), uval(dir, n, ty)))


def test_upgrade_requires_positive_d():
    with pytest.raises(BacktranslationError):
        upgrade(FI, 1, 0, B)
    with pytest.raises(BacktranslationError):
        downgrade(FI, 1, 0, B)


def test_downgrade_upgrade_identity_on_generated_values():
    from lamrec.harness import GenConfig, gen_well_typed

    checked = 0
    seed = 0
    while checked < 80 and seed < 600:
        seed += 1
        cfg = GenConfig(seed=seed, max_depth=3, lang=Lang.FIX)
        n, d = 1 + seed % 3, 1 + seed % 2
        base = [B, U, Sum(B, U), Prod(U, B)][seed % 4]
        target = uval(FI, n, base)
        try:
            v = gen_well_typed(cfg, target_type=target)
        except Exception:
            continue
        out_v = eval_term(v, 2000)
        if not isinstance(out_v, Value):
            continue
        t = App(downgrade(FI, n, d, base), App(upgrade(FI, n, d, base), out_v.value))
        out = eval_term(t, 50000)
        assert isinstance(out, Value)
        assert out.value == out_v.value
        checked += 1
    assert checked >= 60


# -- in-dn and case-up


def test_indn_tags_and_downgrades():
    out = eval_term(App(indn(FI, 1, U), TmUnit()), 10)
    assert out.value == Inl(TmUnit())


def test_caseup_roundtrips_indn():
    t = App(caseup(FI, 1, B), App(indn(FI, 1, B), TmTrue()))
    assert eval_term(t, 30).value == TmTrue()


def test_compacted_helpers_reject_mu_in_equi_directions():
    with pytest.raises(BacktranslationError):
        caseup(FE, 2, MU_UA)
    with pytest.raises(BacktranslationError):
        indn(IC, 2, MU_UA)


@pytest.mark.parametrize("dir", [FI, IC, FE])
def test_compacted_helper_types(dir):
    for ty in (B, Arrow(U, B), Prod(B, B), Sum(U, B)):
        for n in (0, 1, 3):
            ok(dir.source, indn(dir, n, ty), Arrow(comp_ty(dir, n, ty), uval(dir, n, ty)))
            ok(dir.source, caseup(dir, n, ty), Arrow(uval(dir, n, ty), comp_ty(dir, n, ty)))
    if dir is FI:
        ok(dir.source, indn(dir, 2, MU_UA), Arrow(comp_ty(dir, 2, MU_UA), uval(dir, 2, MU_UA)))


# -- inject / extract


def test_inject_at_zero_budget():
    assert inject(FI, 0, B) == Lam("x", B, TmUnit())


def test_inject_wraps_value():
    out = eval_term(App(inject(FI, 2, B), TmTrue()), 10)
    assert out.value == Inl(TmTrue())


def test_extract_diverges_on_buried_failure():
    # Example: a backtranslated value that bails out below the surface
    tau = Sum(Sum(B, U), U)
    bad = Inl(Inl(Inl(Inl(Inr(TmUnit())))))
    assert isinstance(eval_term(App(extract(FI, 2, tau), bad), 10000), OutOfFuel)


def test_extract_zero_budget_diverges():
    assert isinstance(eval_term(App(extract(FI, 0, B), TmUnit()), 10000), OutOfFuel)


def test_inject_extract_invert_on_base():
    for v_src, ty in (("true", B), ("unit", U), ("(true, unit)", Prod(B, U))):
        v = parse_term(v_src, Lang.FIX)
        t = App(extract(FI, 3, ty), App(inject(FI, 3, ty), v))
        assert eval_term(t, 10000).value == v


def test_inject_extract_function_roundtrip():
    f = parse_term("\\x:Bool. if x then false else true", Lang.FIX)
    t = App(
        App(extract(FI, 4, Arrow(B, B)), App(inject(FI, 4, Arrow(B, B)), f)),
        TmTrue(),
    )
    assert eval_term(t, 10000).value == parse_term("false", Lang.FIX)


def test_inject_rejects_mu_source_outside_ic():
    with pytest.raises(BacktranslationError):
        inject(FI, 2, MU_UA)
    with pytest.raises(BacktranslationError):
        extract(FE, 2, MU_UA)


def test_ic_inject_extract_handle_mu_via_fold_unfold():
    v = parse_term("fold[mu a. Unit + a] (inl unit)", Lang.ISO)
    t = App(extract(IC, 3, MU_UA), App(inject(IC, 3, MU_UA), v))
    out = eval_term(t, 10000)
    assert out.value == v


# -- toemul


def test_toemul():
    assert toemul(FI, EMPTY_ENV, 3) == EMPTY_ENV
    env = TypeEnv((("x", B),))
    assert toemul(FI, env, 2) == TypeEnv((("x", Sum(B, U)),))
    enve = TypeEnv((("x", MU_UA),))
    assert toemul(FE, enve, 1) == TypeEnv((("x", Sum(Sum(U, U), U)),))


# -- emulation of terms


def test_emulate_unit_budget_one():
    d = typecheck(Lang.ISO, EMPTY_ENV, TmUnit())
    out = eval_term(emulate(FI, 1, d), 10)
    assert out.value == Inl(TmUnit())


def test_emulate_unit_budget_zero():
    d = typecheck(Lang.ISO, EMPTY_ENV, TmUnit())
    out = eval_term(emulate(FI, 0, d), 10)
    assert out.value == TmUnit()


def test_emulate_conversion_is_transparent():
    t = parse_term("inl unit", Lang.EQUI)
    d = typecheck(Lang.EQUI, EMPTY_ENV, t, expected=MU_UA)
    assert d.rule == "Type-eq"
    assert emulate(FE, 3, d) == emulate(FE, 3, d.kids[0])


def test_emulate_well_typed_at_toemul_signature():
    cases = [
        (Lang.ISO, FI, "(\\x:Bool. if x then false else true) true", B),
        (Lang.ISO, FI, "unfold[mu a. Unit + a] (fold[mu a. Unit + a] (inl unit))", None),
        (Lang.EQUI, FE, "(\\p:Bool * Bool. p.1) (true, false)", B),
        (Lang.EQUI, IC, "(\\p:Bool * Bool. p.2) (true, false)", B),
    ]
    for lang, dir, src, expect in cases:
        t = parse_term(src, lang)
        d = typecheck(lang, EMPTY_ENV, t, expected=expect) if expect else typecheck(lang, EMPTY_ENV, t)
        for n in (0, 1, 2, 4):
            e = emulate(dir, n, d)
            ok(dir.source, e, uval(dir, n, d.ty))


def test_emulate_computes_the_right_value():
    t = parse_term("(\\x:Bool. if x then false else true) true", Lang.ISO)
    d = typecheck(Lang.ISO, EMPTY_ENV, t)
    out = eval_term(emulate(FI, 4, d), 100000)
    assert out.value == Inl(parse_term("false", Lang.FIX))


def test_emulate_fold_unfold_cancel():
    t = parse_term("unfold[mu a. Bool] (fold[mu a. Bool] true)", Lang.ISO)
    d = typecheck(Lang.ISO, EMPTY_ENV, t)
    out = eval_term(emulate(FI, 3, d), 100000)
    assert out.value == Inl(TmTrue())


# -- emulation of contexts and the backtranslation


def test_emulate_ctx_hole_is_hole():
    cd = typecheck_ctx(Lang.ISO, Hole(), EMPTY_ENV, B)
    assert emulate_ctx(FI, 2, cd) == Hole()


def test_emulate_ctx_if_wraps_scrutinee_and_branches():
    c = parse_context("if _ then unit else unit", Lang.ISO)
    cd = typecheck_ctx(Lang.ISO, c, EMPTY_ENV, B)
    e = emulate_ctx(FI, 2, cd)
    # shape: if (caseup [.]) then (indn unit) else (indn unit)
    from lamrec.syntax import If

    assert isinstance(e, If)
    assert isinstance(e.cond, App)
    assert e.cond.fn == caseup(FI, 2, B)
    assert e.then == App(indn(FI, 2, U), TmUnit())
    d = typecheck_ctx(Lang.FIX, e, EMPTY_ENV, uval(FI, 2, B), expected=uval(FI, 2, U))
    assert d.ty == uval(FI, 2, U)


def test_backtranslate_hole_plugs_inject():
    bt = backtranslate_ctx(FI, Hole(), 2, B)
    assert bt == App(inject(FI, 2, B), Hole())
    assert eval_term(plug(bt, TmTrue()), 100).value == Inl(TmTrue())


def test_backtranslate_ite_terminates():
    c = parse_context("if _ then unit else unit", Lang.ISO)
    bt = backtranslate_ctx(FI, c, 3, B)
    out = eval_term(plug(bt, TmTrue()), 100000)
    assert isinstance(out, Value)


def test_backtranslate_rejects_wrong_hole_type():
    c = parse_context("if _ then unit else unit", Lang.ISO)
    with pytest.raises(Exception):
        backtranslate_ctx(FI, c, 3, U)


def test_backtranslated_context_types_at_signature():
    c = parse_context("(\\z:Bool. if z then false else true) _", Lang.ISO)
    cd = typecheck_ctx(Lang.ISO, c, EMPTY_ENV, B)
    for n in (1, 3):
        bt = backtranslate_ctx(FI, c, n, B)
        d = typecheck_ctx(Lang.FIX, bt, EMPTY_ENV, B, expected=uval(FI, n, cd.ty))
        assert d.hole_ty == B


def test_fe_factors_through_ic_structurally():
    cases = [
        ("if _ then unit else (unit; unit)", B),
        ("(\\z:Bool. if z then false else true) _", B),
        ("case _ of inl x -> x | inr y -> false", Sum(B, U)),
        ("_ true", Arrow(B, B)),
    ]
    for src, hole in cases:
        c = parse_context(src, Lang.EQUI)
        for n in (1, 2, 4):
            bt_fe = backtranslate_ctx(FE, c, n, hole)
            bt_ic = backtranslate_ctx(IC, c, n, hole)
            assert to_fix_image(bt_ic) == bt_fe


def test_fe_equals_fi_on_annotation_free_contexts():
    for src, hole in [("if _ then unit else (unit; unit)", B), ("_ true", Arrow(B, B))]:
        c_iso = parse_context(src, Lang.ISO)
        c_equ = parse_context(src, Lang.EQUI)
        for n in (1, 3):
            assert backtranslate_ctx(FI, c_iso, n, hole) == backtranslate_ctx(FE, c_equ, n, hole)


def test_backtranslation_approximation_grows_with_budget():
    # at tiny budgets the backtranslation may diverge; at large ones it
    # reproduces the target behaviour
    c = parse_context("(\\f:Bool -> Bool. f (f true)) _", Lang.ISO)
    f = parse_term("\\x:Bool. if x then false else true", Lang.FIX)
    target = plug(compile_ctx(Lang.ISO, Lang.ISO, c) if False else c, compile_term(Lang.FIX, Lang.ISO, f))
    assert isinstance(eval_term(target, 1000), Value)
    big = backtranslate_ctx(FI, c, 16, Arrow(B, B))
    assert isinstance(eval_term(plug(big, f), 100000), Value)
