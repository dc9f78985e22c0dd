"""lamrec: a workbench for simply-typed lambda calculi with term-level
fixpoint (fix), iso-recursive types (iso), and coinductive equi-recursive
types (equi) -- typecheckers, evaluators, the canonical compilers between
them, and approximate backtranslation of target program contexts.
"""

import sys

# Emitted backtranslation terms nest a few levels per approximation step;
# the default limit is too tight for tree recursion over them.
if sys.getrecursionlimit() < 30_000:
    sys.setrecursionlimit(30_000)

from .syntax import (  # noqa: E402,F401
    Lang,
    Type,
    Term,
    TypeEnv,
    EMPTY_ENV,
    size,
    subst_term,
    subst_type,
    contractive,
    lmc,
    plug,
)
from .surface import (  # noqa: E402,F401
    parse_type,
    parse_term,
    parse_context,
    print_type,
    print_term,
    ParseError,
)
