"""Batch command-line front end.

Subcommands: check, eval, eq, compile, uval, backtranslate, campaign.
Languages are named fix / iso / equi; backtranslation directions FI / IC / FE.
Exit codes: 0 success, 1 type or semantic error, 2 usage or parse error,
3 fuel exhaustion in eval.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backtranslation import (
    BacktranslationError,
    Direction,
    backtranslate_ctx,
    uval,
)
from .compilers import compile_term
from .dynamics import OutOfFuel, Stuck, Value, eval_term
from .harness import (
    GenConfig,
    campaign_backtr,
    campaign_compiler,
    load_suite,
)
from .statics import NotContractive, TypeCheckError, typecheck
from .surface import (
    ParseError,
    parse_context,
    parse_term,
    parse_type,
    print_term,
    print_type,
)
from .syntax import Lang, LangViolation, TypeEnv

EXIT_OK = 0
EXIT_SEMANTIC = 1
EXIT_USAGE = 2
EXIT_FUEL = 3


def _lang(name: str) -> Lang:
    return Lang(name)


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text()


def _cmd_check(args) -> int:
    lang = _lang(args.lang)
    term = parse_term(_read(args.file), lang)
    expected = parse_type(args.type, lang) if args.type else None
    d = typecheck(lang, TypeEnv(), term, expected=expected)
    print(print_type(d.ty))
    return EXIT_OK


def _cmd_eval(args) -> int:
    lang = _lang(args.lang)
    term = parse_term(_read(args.file), lang)
    typecheck(lang, TypeEnv(), term)
    on_step = None
    if args.trace:
        on_step = lambda i, t: print(f"{i} {print_term(t)}")
    out = eval_term(term, args.fuel, on_step=on_step)
    if isinstance(out, Value):
        if args.json:
            print(json.dumps({"outcome": "value", "value": print_term(out.value), "steps": out.steps}))
        else:
            print(print_term(out.value))
            print(f"steps: {out.steps}")
        return EXIT_OK
    if isinstance(out, OutOfFuel):
        if args.json:
            print(json.dumps({"outcome": "out-of-fuel", "steps": out.steps}))
        else:
            print(f"out of fuel after {out.steps} steps", file=sys.stderr)
        return EXIT_FUEL
    assert isinstance(out, Stuck)
    print(f"stuck after {out.steps} steps: {out.reason}", file=sys.stderr)
    return EXIT_SEMANTIC


def _cmd_eq(args) -> int:
    from .statics import type_eq

    a = parse_type(args.type1, Lang.EQUI)
    b = parse_type(args.type2, Lang.EQUI)
    print("true" if type_eq(a, b) else "false")
    return EXIT_OK


def _cmd_compile(args) -> int:
    src, dst = _lang(getattr(args, "from")), _lang(args.to)
    term = parse_term(_read(args.file), src)
    typecheck(src, TypeEnv(), term)
    print(print_term(compile_term(src, dst, term)))
    return EXIT_OK


def _cmd_uval(args) -> int:
    dir = Direction(args.dir)
    ty = parse_type(args.type, dir.target)
    print(print_type(uval(dir, args.n, ty)))
    return EXIT_OK


def _cmd_backtranslate(args) -> int:
    dir = Direction(args.dir)
    ctx = parse_context(_read(args.file), dir.target)
    hole_ty = parse_type(args.hole_type, dir.source)
    print(print_term(backtranslate_ctx(dir, ctx, args.n, hole_ty)))
    return EXIT_OK


def _cmd_campaign(args) -> int:
    if args.kind == "compiler":
        cfg = GenConfig(seed=args.seed, max_depth=args.depth)
        rep = campaign_compiler(args.which, args.count, args.fuel, cfg, mutation=args.mutation)
    else:
        dir = Direction(args.which)
        rep = campaign_backtr(
            dir, load_suite(), args.n, args.fuel, terms_per_ctx=args.count_terms, seed=args.seed
        )
    if args.json:
        for line in rep.records():
            print(line)
    else:
        for c in rep.failures:
            print(f"FAIL {c.case_id}: {c.detail}", file=sys.stderr)
            if c.counterexample:
                print(f"  term: {c.counterexample}", file=sys.stderr)
    print(rep.summary(), file=sys.stderr)
    return EXIT_OK if not rep.failures else EXIT_SEMANTIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lamrec", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)
    langs = [l.value for l in Lang]
    dirs = [d.value for d in Direction]

    c = sub.add_parser("check", help="typecheck a term file and print its type")
    c.add_argument("file")
    c.add_argument("--lang", choices=langs, required=True)
    c.add_argument("--type", help="expected type (needed for bare injections)")
    c.set_defaults(fn=_cmd_check)

    c = sub.add_parser("eval", help="evaluate a term file")
    c.add_argument("file")
    c.add_argument("--lang", choices=langs, required=True)
    c.add_argument("--fuel", type=int, default=100_000)
    c.add_argument("--trace", action="store_true", help="print each step")
    c.add_argument("--json", action="store_true")
    c.set_defaults(fn=_cmd_eval)

    c = sub.add_parser("eq", help="equi-recursive type equality")
    c.add_argument("type1")
    c.add_argument("type2")
    c.set_defaults(fn=_cmd_eq)

    c = sub.add_parser("compile", help="compile a term file between languages")
    c.add_argument("file")
    c.add_argument("--from", choices=langs, required=True)
    c.add_argument("--to", choices=langs, required=True)
    c.set_defaults(fn=_cmd_compile)

    c = sub.add_parser("uval", help="print a backtranslation type")
    c.add_argument("--dir", choices=dirs, required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--type", required=True)
    c.set_defaults(fn=_cmd_uval)

    c = sub.add_parser("backtranslate", help="backtranslate a context file")
    c.add_argument("file")
    c.add_argument("--dir", choices=dirs, required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--hole-type", required=True)
    c.set_defaults(fn=_cmd_backtranslate)

    c = sub.add_parser("campaign", help="run a differential-testing campaign")
    csub = c.add_subparsers(dest="kind", required=True)
    cc = csub.add_parser("compiler")
    cc.add_argument("which", choices=["FI", "IE", "FE"])
    cc.add_argument("--count", type=int, default=200)
    cc.add_argument("--fuel", type=int, default=10_000)
    cc.add_argument("--seed", type=int, default=0)
    cc.add_argument("--depth", type=int, default=5)
    cc.add_argument("--mutation", choices=["flip-bool", "keep-fold", "swap-if"])
    cc.add_argument("--json", action="store_true")
    cc.set_defaults(fn=_cmd_campaign)
    cb = csub.add_parser("backtr")
    cb.add_argument("which", choices=dirs)
    cb.add_argument("--n", type=int, default=32)
    cb.add_argument("--fuel", type=int, default=100_000)
    cb.add_argument("--count-terms", type=int, default=10)
    cb.add_argument("--seed", type=int, default=0)
    cb.add_argument("--json", action="store_true")
    cb.set_defaults(fn=_cmd_campaign)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (TypeCheckError, NotContractive, LangViolation, BacktranslationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SEMANTIC
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
