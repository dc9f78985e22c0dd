"""Well-typed term/context generation and the differential-testing
campaigns: compiler semantics preservation and backtranslation
approximation, both run over seeded deterministic cases and reported as
machine-readable records.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable, Optional

from .backtranslation import Direction, backtranslate_ctx, toemul, uval
from .compilers import compile_ctx, compile_term
from .dynamics import Value, eval_term, find_shrink_bound, shrink_holds
from .statics import AmbiguousType, TypeCheckError, typecheck, typecheck_ctx
from .surface import parse_context, parse_term, parse_type, print_term
from .syntax import (
    App,
    Arrow,
    Bool,
    Case,
    Fix,
    Fold,
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
    contractive,
    plug,
    subst_type,
    unfold_mu,
)


class GenerationError(Exception):
    pass


@dataclass(frozen=True)
class GenConfig:
    seed: int
    max_depth: int = 5
    lang: Lang = Lang.FIX
    type_bias: tuple[tuple[str, float], ...] = (
        ("Unit", 1.0),
        ("Bool", 2.0),
        ("Arrow", 1.5),
        ("Prod", 1.5),
        ("Sum", 2.0),
        ("Mu", 1.5),
    )

    def rng(self) -> random.Random:
        return random.Random(self.seed)


def inhabited(ty: Type) -> bool:
    """Conservative value-inhabitation: recursion variables count as empty,
    so an inhabited mu type has a base case reachable without recursion."""
    match ty:
        case Unit() | Bool():
            return True
        case TVar(_):
            return False
        case Arrow(_, b):
            return inhabited(b)
        case Prod(a, b):
            return inhabited(a) and inhabited(b)
        case Sum(a, b):
            return inhabited(a) or inhabited(b)
        case Mu(_, body):
            return inhabited(body)
    return False


def canonical_value(lang: Lang, ty: Type) -> Term:
    """The least-effort closed value of an inhabited type."""
    match ty:
        case Unit():
            return TmUnit()
        case Bool():
            return TmTrue()
        case Arrow(a, b):
            return Lam("c", a, canonical_value(lang, b))
        case Prod(a, b):
            return Pair(canonical_value(lang, a), canonical_value(lang, b))
        case Sum(a, b):
            if inhabited(a):
                return Inl(canonical_value(lang, a))
            return Inr(canonical_value(lang, b))
        case Mu():
            inner = canonical_value(lang, unfold_mu(ty))
            return Fold(ty, inner) if lang is Lang.ISO else inner
    raise GenerationError(f"no canonical value at {ty!r}")


def gen_type(rng: random.Random, cfg: GenConfig, depth: int, lang: Optional[Lang] = None) -> Type:
    """A closed, contractive, inhabited type of the given language."""
    lang = lang or cfg.lang
    for _ in range(50):
        ty = _gen_type(rng, dict(cfg.type_bias), depth, lang, (), False)
        if contractive(ty) and inhabited(ty) and not ty.ftv:
            return ty
    raise GenerationError("could not generate a usable type")


def _gen_type(
    rng: random.Random,
    bias: dict[str, float],
    depth: int,
    lang: Lang,
    mu_vars: tuple[str, ...],
    guarded: bool,
) -> Type:
    leaves = [("Unit", bias["Unit"]), ("Bool", bias["Bool"])]
    if mu_vars and guarded:
        leaves.append(("TVar", 2.0))
    if depth <= 0:
        names = [n for n, _ in leaves]
        weights = [w for _, w in leaves]
        pick = rng.choices(names, weights)[0]
    else:
        options = leaves + [
            ("Arrow", bias["Arrow"]),
            ("Prod", bias["Prod"]),
            ("Sum", bias["Sum"]),
        ]
        if lang is not Lang.FIX and len(mu_vars) < 2:
            options.append(("Mu", bias["Mu"]))
        names = [n for n, _ in options]
        weights = [w for _, w in options]
        pick = rng.choices(names, weights)[0]
    if pick == "Unit":
        return Unit()
    if pick == "Bool":
        return Bool()
    if pick == "TVar":
        return TVar(rng.choice(mu_vars))
    if pick == "Mu":
        var = f"r{len(mu_vars)}"
        body = _gen_type(rng, bias, depth - 1, lang, mu_vars + (var,), False)
        ty = Mu(var, body)
        return ty
    l = _gen_type(rng, bias, depth - 1, lang, mu_vars, True)
    r = _gen_type(rng, bias, depth - 1, lang, mu_vars, True)
    return {"Arrow": Arrow, "Prod": Prod, "Sum": Sum}[pick](l, r)


def gen_well_typed(cfg: GenConfig, target_type: Optional[Type] = None) -> Term:
    """A closed term of the configured language that typechecks, at
    `target_type` when given.  Identical configurations generate
    structurally identical terms."""
    rng = cfg.rng()
    ty = target_type if target_type is not None else gen_type(rng, cfg, 3)
    for attempt in range(20):
        try:
            t = _gen_term(rng, cfg, TypeEnv(), ty, cfg.max_depth)
            typecheck(cfg.lang, TypeEnv(), t, expected=ty)
            return t
        except (TypeCheckError, GenerationError):
            continue
    raise GenerationError(
        f"failed to generate a term at {ty!r} after {attempt + 1} attempts"
    )


def _gen_term(
    rng: random.Random, cfg: GenConfig, env: TypeEnv, ty: Type, depth: int
) -> Term:
    lang = cfg.lang
    matching = [
        x
        for x, vty in env
        if vty == ty or (lang is Lang.EQUI and _cheap_eq(vty, ty))
    ]
    if matching and rng.random() < 0.4:
        return Var(rng.choice(matching))
    if depth <= 0:
        return canonical_value(lang, ty)
    if rng.random() < 0.35:
        return _gen_elim(rng, cfg, env, ty, depth)
    # constructor for the target head
    match ty:
        case Unit():
            return TmUnit()
        case Bool():
            return TmTrue() if rng.random() < 0.5 else TmFalse()
        case Arrow(a, b):
            if lang is Lang.FIX and rng.random() < 0.2:
                body = Lam("w", a, _gen_term(rng, cfg, env, b, depth - 1))
                return Fix(ty, Lam(_fresh(env, "g"), ty, body))
            x = _fresh(env, "v")
            return Lam(x, a, _gen_term(rng, cfg, env.extend(x, a), b, depth - 1))
        case Prod(a, b):
            return Pair(
                _gen_term(rng, cfg, env, a, depth - 1),
                _gen_term(rng, cfg, env, b, depth - 1),
            )
        case Sum(a, b):
            sides = [s for s, c in (("l", a), ("r", b)) if inhabited(c)]
            side = rng.choice(sides)
            if side == "l":
                return Inl(_gen_term(rng, cfg, env, a, depth - 1))
            return Inr(_gen_term(rng, cfg, env, b, depth - 1))
        case Mu():
            inner = _gen_term(rng, cfg, env, unfold_mu(ty), depth - 1)
            return Fold(ty, inner) if lang is Lang.ISO else inner
    raise GenerationError(f"cannot generate at {ty!r}")


def _cheap_eq(a: Type, b: Type) -> bool:
    from .statics import type_eq

    try:
        return type_eq(a, b)
    except Exception:
        return False


def _fresh(env: TypeEnv, base: str) -> str:
    if base not in env.names():
        return base
    i = 1
    while f"{base}{i}" in env.names():
        i += 1
    return f"{base}{i}"


def _gen_elim(
    rng: random.Random, cfg: GenConfig, env: TypeEnv, ty: Type, depth: int
) -> Term:
    lang = cfg.lang
    kind = rng.choice(["app", "if", "case", "seq", "proj", "unfold"])
    small = gen_type(rng, cfg, 1, lang)
    if kind == "app":
        f = _gen_term(rng, cfg, env, Arrow(small, ty), depth - 1)
        a = _gen_term(rng, cfg, env, small, depth - 1)
        return App(f, a)
    if kind == "if":
        c = _gen_term(rng, cfg, env, Bool(), depth - 1)
        return If(
            c,
            _gen_term(rng, cfg, env, ty, depth - 1),
            _gen_term(rng, cfg, env, ty, depth - 1),
        )
    if kind == "case":
        s = _gen_term(rng, cfg, env, Sum(small, Unit()), depth - 1)
        x = _fresh(env, "s")
        return Case(
            s,
            x,
            _gen_term(rng, cfg, env.extend(x, small), ty, depth - 1),
            x + "r",
            _gen_term(rng, cfg, env.extend(x + "r", Unit()), ty, depth - 1),
        )
    if kind == "seq":
        return Seq(
            _gen_term(rng, cfg, env, Unit(), depth - 1),
            _gen_term(rng, cfg, env, ty, depth - 1),
        )
    if kind == "proj":
        p = _gen_term(rng, cfg, env, Prod(ty, small), depth - 1)
        return Proj1(p)
    if kind == "unfold" and lang is Lang.ISO:
        # a vacuous mu wrapper exercises the fold/unfold reduction
        mu = Mu("w0", ty)
        return Unfold(mu, _gen_term(rng, cfg, env, mu, depth - 1))
    return _gen_term(rng, cfg, env, ty, depth - 1)


# ---------------------------------------------------------------------------
# Campaign reports


@dataclass
class CaseRecord:
    case_id: str
    seed: int
    verdict: str  # "pass" | "fail"
    detail: str = ""
    steps_source: Optional[int] = None
    steps_target: Optional[int] = None
    shrink_bound: Optional[int] = None
    counterexample: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "case_id": self.case_id,
                "seed": self.seed,
                "verdict": self.verdict,
                "detail": self.detail,
                "steps_source": self.steps_source,
                "steps_target": self.steps_target,
                "shrink_bound": self.shrink_bound,
                "counterexample": self.counterexample,
            }
        )


@dataclass
class CampaignReport:
    cases: list[CaseRecord] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def cases_run(self) -> int:
        return len(self.cases)

    @property
    def passes(self) -> int:
        return sum(1 for c in self.cases if c.verdict == "pass")

    @property
    def failures(self) -> list[CaseRecord]:
        return [c for c in self.cases if c.verdict == "fail"]

    def records(self) -> Iterable[str]:
        for c in self.cases:
            yield c.to_json()

    def summary(self) -> str:
        return (
            f"{self.cases_run} cases, {self.passes} passed, "
            f"{len(self.failures)} failed in {self.wall_time:.2f}s"
        )


# ---------------------------------------------------------------------------
# Compiler campaigns

COMPILER_PAIRS = {
    "FI": (Lang.FIX, Lang.ISO),
    "IE": (Lang.ISO, Lang.EQUI),
    "FE": (Lang.FIX, Lang.EQUI),
}

Mutation = Optional[str]  # None | "flip-bool" | "keep-fold" | "swap-if"


def _mutate(t: Term, mutation: Mutation) -> Term:
    if mutation is None:
        return t

    def go(t: Term) -> Term:
        match t:
            case TmTrue() if mutation == "flip-bool":
                return TmFalse()
            case TmFalse() if mutation == "flip-bool":
                return TmTrue()
            case If(c, a, b) if mutation == "swap-if":
                return If(go(c), go(b), go(a))
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
            case Fix(ann, s):
                return Fix(ann, go(s))
            case Fold(ann, s):
                return Fold(ann, go(s))
            case Unfold(ann, s):
                return Unfold(ann, go(s))
            case _:
                return t

    return go(t)


def _compile_mutated(src: Lang, dst: Lang, t: Term, mutation: Mutation) -> Term:
    if mutation == "keep-fold":
        # a deliberately broken erasure: unfold annotations are dropped but
        # fold annotations survive, so the output is not a valid target term
        def broken(t: Term) -> Term:
            match t:
                case Fold(ann, s):
                    return Fold(ann, broken(s))
                case Unfold(_, s):
                    return broken(s)
                case Lam(v, ty, body):
                    return Lam(v, ty, broken(body))
                case App(f, a):
                    return App(broken(f), broken(a))
                case Pair(a, b):
                    return Pair(broken(a), broken(b))
                case Proj1(s):
                    return Proj1(broken(s))
                case Proj2(s):
                    return Proj2(broken(s))
                case Inl(s):
                    return Inl(broken(s))
                case Inr(s):
                    return Inr(broken(s))
                case Case(s, lv, lb, rv, rb):
                    return Case(broken(s), lv, broken(lb), rv, broken(rb))
                case If(c, a, b):
                    return If(broken(c), broken(a), broken(b))
                case Seq(a, b):
                    return Seq(broken(a), broken(b))
                case _:
                    return t

        return broken(t)
    return _mutate(compile_term(src, dst, t), mutation)


def _canned_sources(lang: Lang) -> list[tuple[Term, Type]]:
    """Fixed cases prepended to every campaign so each construct (and each
    injected fault) is exercised regardless of the random draw."""
    b, u = Bool(), Unit()
    items = [
        ("if true then false else true", b),
        ("(\\x:Bool. x) true", b),
        ("(unit, true).2", b),
        ("case (\\s:Unit + Unit. s) (inl unit) of inl x -> true | inr y -> false", b),
        ("unit; false", b),
    ]
    if lang is Lang.FIX:
        items.append(("fix[Bool -> Bool] (\\f:Bool -> Bool. \\x:Bool. x) true", b))
    if lang is Lang.ISO:
        items.append(
            ("unfold[mu a. Bool] (fold[mu a. Bool] true)", b)
        )
    out = []
    for src, ty in items:
        out.append((parse_term(src, lang), ty))
    return out


def campaign_compiler(
    which: str,
    count: int,
    fuel: int,
    cfg: GenConfig,
    mutation: Mutation = None,
) -> CampaignReport:
    """Check type preservation, equi-termination within fuel, base-type
    value equality, and (for the erasure) step-count simulation k' <= k,
    over `count` generated base-type terms plus fixed canned cases."""
    src, dst = COMPILER_PAIRS[which]
    report = CampaignReport()
    t0 = time.monotonic()
    cases: list[tuple[str, int, Term, Type]] = []
    for i, (t, ty) in enumerate(_canned_sources(src)):
        cases.append((f"{which:s}-canned-{i}", cfg.seed, t, ty))
    i = 0
    attempts = 0
    while len(cases) < count and attempts < count * 4:
        seed = cfg.seed + attempts
        attempts += 1
        sub = GenConfig(seed=seed, max_depth=cfg.max_depth, lang=src, type_bias=cfg.type_bias)
        base: Type = Bool() if attempts % 2 else Unit()
        try:
            t = gen_well_typed(sub, target_type=base)
            # Erasing fold/unfold can leave an injection with nothing pushing
            # its type; the bidirectional checker then reports ambiguity even
            # though a declarative derivation exists.  Keep campaign inputs
            # inside the algorithmic fragment so a failure means a real bug.
            typecheck(dst, TypeEnv(), compile_term(src, dst, t), expected=base)
        except (GenerationError, AmbiguousType):
            continue
        except TypeCheckError:
            raise  # a non-ambiguity failure here is a compiler bug; surface it
        cases.append((f"{which}-{i}", seed, t, base))
        i += 1

    for case_id, seed, t, ty in cases:
        rec = CaseRecord(case_id=case_id, seed=seed, verdict="pass")
        try:
            compiled = _compile_mutated(src, dst, t, mutation)
            try:
                typecheck(dst, TypeEnv(), compiled, expected=ty)
            except TypeCheckError as e:
                raise _CaseFail(f"type preservation: {e}")
            out_s = eval_term(t, fuel)
            out_t = eval_term(compiled, 10 * fuel + 1000)
            rec.steps_source = out_s.steps
            rec.steps_target = out_t.steps
            if isinstance(out_s, Value) != isinstance(out_t, Value):
                raise _CaseFail(
                    f"equi-termination: source {type(out_s).__name__}, "
                    f"target {type(out_t).__name__}"
                )
            if isinstance(out_s, Value):
                rec.shrink_bound = find_shrink_bound(t, fuel)
                if out_s.value != out_t.value:
                    raise _CaseFail(
                        f"result values differ: {out_s.value!r} vs {out_t.value!r}"
                    )
                if which == "IE" and out_t.steps > out_s.steps:
                    raise _CaseFail(
                        f"erasure took more steps: {out_t.steps} > {out_s.steps}"
                    )
        except _CaseFail as e:
            rec.verdict = "fail"
            rec.detail = str(e)
            rec.counterexample = print_term(t)
        report.cases.append(rec)
    report.wall_time = time.monotonic() - t0
    return report


class _CaseFail(Exception):
    pass


# ---------------------------------------------------------------------------
# The curated context suite


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    ctx: Term  # an iso-language context; equi targets use its erasure
    hole_ty_text: str
    dirs: tuple[str, ...]
    terms: tuple[str, ...]  # curated hole terms (surface syntax)
    hole_env_text: tuple[tuple[str, str], ...] = ()

    def hole_ty(self, dir: Direction) -> Type:
        return parse_type(self.hole_ty_text, dir.source)

    def hole_env(self, dir: Direction) -> TypeEnv:
        return TypeEnv(
            tuple((x, parse_type(src, dir.source)) for x, src in self.hole_env_text)
        )

    def target_ctx(self, dir: Direction) -> Term:
        if dir is Direction.FI:
            return self.ctx
        return compile_ctx(Lang.ISO, Lang.EQUI, self.ctx)


def load_suite() -> list[SuiteEntry]:
    entries = []
    root = resources.files("lamrec") / "suite"
    for res in sorted(root.iterdir(), key=lambda r: r.name):
        if not res.name.endswith(".ctx"):
            continue
        entries.append(_parse_suite_file(res.name, res.read_text()))
    return entries


def _parse_suite_file(fname: str, text: str) -> SuiteEntry:
    name = fname[:-4]
    hole = "Bool"
    dirs: tuple[str, ...] = ("FI", "IC", "FE")
    terms: list[str] = []
    hole_env: list[tuple[str, str]] = []
    ctx_lines: list[str] = []
    in_ctx = False
    for line in text.splitlines():
        if in_ctx:
            ctx_lines.append(line)
            continue
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, val = line.partition(":")
        key, val = key.strip(), val.strip()
        if key == "name":
            name = val
        elif key == "hole":
            hole = val
        elif key == "dirs":
            dirs = tuple(val.split())
        elif key == "term":
            terms.append(val)
        elif key == "holeenv":
            var, _, tysrc = val.partition(" ")
            hole_env.append((var.strip(), tysrc.strip()))
        elif key == "ctx":
            if val:
                ctx_lines.append(val)
            in_ctx = True
        else:
            raise ValueError(f"unknown suite key {key!r} in {fname}")
    ctx = parse_context("\n".join(ctx_lines).strip(), Lang.ISO)
    return SuiteEntry(name, ctx, hole, dirs, tuple(terms), tuple(hole_env))


def suite_terms(entry: SuiteEntry, dir: Direction, count: int, seed: int) -> list[Term]:
    """Curated terms first, then generated ones, all at the hole type."""
    ty = entry.hole_ty(dir)
    lang = dir.source
    out: list[Term] = []
    for src in entry.terms:
        try:
            t = parse_term(src, lang)
            typecheck(lang, TypeEnv(), t, expected=ty)
            out.append(t)
        except Exception:
            continue  # a curated term may be for the other source language
    k = 0
    while len(out) < count and k < count * 6:
        cfg = GenConfig(seed=seed + k, max_depth=3, lang=lang)
        k += 1
        try:
            out.append(gen_well_typed(cfg, target_type=ty))
        except GenerationError:
            continue
    return out[:count]


def campaign_backtr(
    dir: Direction,
    suite: list[SuiteEntry],
    n: int,
    fuel: int,
    terms_per_ctx: int = 10,
    seed: int = 0,
) -> CampaignReport:
    """Both approximation directions of the backtranslation, plus
    well-typedness of every backtranslated context at its signature."""
    report = CampaignReport()
    t0 = time.monotonic()
    for entry in suite:
        if dir.value not in entry.dirs:
            continue
        hole_ty = entry.hole_ty(dir)
        hole_env = entry.hole_env(dir)
        target = entry.target_ctx(dir)
        rec = CaseRecord(case_id=f"{dir}-{entry.name}-wt", seed=seed, verdict="pass")
        try:
            cd = typecheck_ctx(dir.target, target, hole_env, hole_ty)
            bt = backtranslate_ctx(dir, target, n, hole_ty, hole_env=hole_env)
            typecheck_ctx(
                dir.source,
                bt,
                toemul(dir, hole_env, n),
                hole_ty,
                expected=uval(dir, n, cd.ty),
            )
        except Exception as e:
            rec.verdict = "fail"
            rec.detail = f"backtranslated context ill-typed: {e}"
            report.cases.append(rec)
            continue
        report.cases.append(rec)
        for j, t in enumerate(suite_terms(entry, dir, terms_per_ctx, seed)):
            rec = CaseRecord(
                case_id=f"{dir}-{entry.name}-{j}", seed=seed + j, verdict="pass"
            )
            try:
                compiled = compile_term(dir.source, dir.target, t)
                target_prog = plug(target, compiled)
                source_prog = plug(bt, t)
                out_t = eval_term(target_prog, fuel)
                rec.steps_target = out_t.steps
                rec.shrink_bound = find_shrink_bound(target_prog, fuel)
                if shrink_holds(target_prog, n):
                    out_s = eval_term(source_prog, fuel)
                    rec.steps_source = out_s.steps
                    if not isinstance(out_s, Value):
                        raise _CaseFail(
                            "target shrink-terminates within n but the "
                            f"backtranslation does not terminate ({type(out_s).__name__})"
                        )
                if shrink_holds(source_prog, n) and not isinstance(
                    eval_term(target_prog, fuel), Value
                ):
                    raise _CaseFail(
                        "backtranslation shrink-terminates within n but the "
                        "target does not terminate"
                    )
            except _CaseFail as e:
                rec.verdict = "fail"
                rec.detail = str(e)
                rec.counterexample = print_term(t)
            report.cases.append(rec)
    report.wall_time = time.monotonic() - t0
    return report
