"""Small-step call-by-value evaluation, fueled termination checking, and the
two bounded-termination judgments (step-counting and shrink).

Evaluation contexts are not materialized: a recursive traversal finds the
unique redex, and the spine is rebuilt with maximal sharing so one step
costs O(depth), not O(term size).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Union

from .syntax import (
    App,
    Case,
    Fix,
    Fold,
    If,
    Inl,
    Inr,
    Lam,
    Pair,
    Proj1,
    Proj2,
    Seq,
    Term,
    TmFalse,
    TmTrue,
    TmUnit,
    Unfold,
    subst_term,
)


class StuckTerm(Exception):
    def __init__(self, at: Term, reason: str):
        super().__init__(reason)
        self.at = at
        self.reason = reason


@dataclass(frozen=True)
class Value:
    value: Term
    steps: int


@dataclass(frozen=True)
class OutOfFuel:
    last: Term
    steps: int


@dataclass(frozen=True)
class Stuck:
    at: Term
    reason: str
    steps: int = 0


EvalOutcome = Union[Value, OutOfFuel, Stuck]


def _step(t: Term) -> Term:
    """One reduction of the leftmost CBV redex; raises StuckTerm if `t` is
    neither a value nor reducible.  Callers guarantee `t` is not a value."""
    match t:
        case App(f, a):
            if not f.is_value:
                return App(_step(f), a)
            if not a.is_value:
                return App(f, _step(a))
            if isinstance(f, Lam):
                return subst_term(f.body, f.var, a)
            raise StuckTerm(t, "application of a non-lambda value")
        case Pair(a, b):
            if not a.is_value:
                return Pair(_step(a), b)
            return Pair(a, _step(b))
        case Proj1(s):
            if not s.is_value:
                return Proj1(_step(s))
            if isinstance(s, Pair):
                return s.fst
            raise StuckTerm(t, "projection from a non-pair value")
        case Proj2(s):
            if not s.is_value:
                return Proj2(_step(s))
            if isinstance(s, Pair):
                return s.snd
            raise StuckTerm(t, "projection from a non-pair value")
        case Inl(s):
            return Inl(_step(s))
        case Inr(s):
            return Inr(_step(s))
        case Case(s, lv, lb, rv, rb):
            if not s.is_value:
                return Case(_step(s), lv, lb, rv, rb)
            if isinstance(s, Inl):
                return subst_term(lb, lv, s.sub)
            if isinstance(s, Inr):
                return subst_term(rb, rv, s.sub)
            raise StuckTerm(t, "case on a non-injection value")
        case If(c, a, b):
            if not c.is_value:
                return If(_step(c), a, b)
            if isinstance(c, TmTrue):
                return a
            if isinstance(c, TmFalse):
                return b
            raise StuckTerm(t, "if on a non-boolean value")
        case Seq(a, b):
            if not a.is_value:
                return Seq(_step(a), b)
            if isinstance(a, TmUnit):
                return b
            raise StuckTerm(t, "sequencing a non-unit value")
        case Fix(ann, s):
            if not s.is_value:
                return Fix(ann, _step(s))
            if isinstance(s, Lam):
                return subst_term(s.body, s.var, t)
            raise StuckTerm(t, "fix of a non-lambda value")
        case Fold(ann, s):
            return Fold(ann, _step(s))
        case Unfold(ann, s):
            if not s.is_value:
                return Unfold(ann, _step(s))
            if isinstance(s, Fold):
                return s.sub
            raise StuckTerm(t, "unfold of a non-fold value")
        case _:
            raise StuckTerm(t, f"no rule for {type(t).__name__}")


def step(t: Term) -> Optional[Term]:
    """The unique successor of `t`, or None when `t` is a value or stuck."""
    if t.is_value:
        return None
    try:
        return _step(t)
    except StuckTerm:
        return None


def steps(t: Term, fuel: int) -> Iterator[Term]:
    """Lazily yield successive reducts of `t`, at most `fuel` of them."""
    for _ in range(fuel):
        if t.is_value:
            return
        t = _step(t)
        yield t


def eval_term(
    t: Term, fuel: int, on_step: Optional[Callable[[int, Term], None]] = None
) -> EvalOutcome:
    """Iterate `step` at most `fuel` times; reports the exact step count."""
    n = 0
    while True:
        if t.is_value:
            return Value(t, n)
        if n >= fuel:
            return OutOfFuel(t, n)
        try:
            t = _step(t)
        except StuckTerm as e:
            return Stuck(e.at, e.reason, n)
        n += 1
        if on_step is not None:
            on_step(n, t)


def shrink_holds(t: Term, n: int, fuel: Optional[int] = None) -> bool:
    """Whether the shrink judgment `t || n v` is derivable: a value needs
    size(v) <= n; a reduction consumes one budget unit and additionally
    requires size(t) to fit the decremented budget.  `n` itself bounds the
    step count, so the default fuel of `n` is exact."""
    if fuel is None:
        fuel = n
    budget = n
    for _ in range(fuel + 1):
        if t.is_value:
            return t.size <= budget
        if budget == 0 or t.size > budget - 1:
            return False
        try:
            t = _step(t)
        except StuckTerm:
            return False
        budget -= 1
    return False


def find_shrink_bound(t: Term, fuel: int) -> Optional[int]:
    """Least n with `t || n v`, or None when `t` does not reach a value
    within `fuel` steps.  Derived from the reduction trace: the bound must
    cover each intermediate size plus the steps already consumed, and the
    final value's size plus the full step count."""
    trace_sizes = []
    k = 0
    while not t.is_value:
        if k >= fuel:
            return None
        trace_sizes.append(t.size)
        try:
            t = _step(t)
        except StuckTerm:
            return None
        k += 1
    bound = t.size + k
    for i, sz in enumerate(trace_sizes):
        bound = max(bound, sz + 1 + i)
    return bound
