"""Backward-chaining resolution with coroutined builtins and refutation of negated goals."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

from .builtins import SUSPEND, Context, Fail, evaluate, is_builtin, stratum
from .parser import parse_goal
from .registry import Registry, World
from .terms import Clause, HornError, Pred, Var, term_vars
from .unify import rename, resolve, resolve_pred, unify_preds

DEFAULT_MAX_DEPTH = 64
DEFAULT_MAX_STEPS = 100_000


@dataclass(frozen=True)
class TraceStep:
    depth: int
    kind: str  # call | ok | fail | suspend | flounder | limit
    goal: str
    via: str = ""
    bound: str = ""
    detail: str = ""

    def line(self) -> str:
        out = f"{'  ' * self.depth}{self.kind} {self.goal}"
        if self.via:
            out += f" via {self.via}"
        if self.bound:
            out += f" {{{self.bound}}}"
        if self.detail:
            out += f" : {self.detail}"
        return out


@dataclass
class ProofTrace:
    goal: str
    outcome: str  # proved | refuted | failed
    reason: str = ""
    bindings: dict = field(default_factory=dict)
    world: Optional[World] = None
    steps: list = field(default_factory=list)
    contradictions: list = field(default_factory=list)

    def to_text(self, steps: bool = True) -> str:
        lines = [f"goal: {self.goal}"]
        if steps:
            lines += [s.line() for s in self.steps]
        lines.append(f"outcome: {self.outcome}")
        if self.reason:
            lines.append(f"reason: {self.reason}")
        for name, value in self.bindings.items():
            lines.append(f"{name} = {value}")
        return "\n".join(lines) + "\n"


class _Limit(Exception):
    pass


def _key(p: Pred, registry) -> tuple:
    return (stratum(p, registry), p.functor, str(p))


def normalize_clause(c: Clause, registry=None) -> Clause:
    """Canonical body order: checks, calls, operators, measurements, readouts."""
    return replace(c, body=tuple(sorted(c.body, key=lambda p: _key(p, registry))))


def _require_level(p: Pred):
    if p.deco is None or p.deco == 0:
        raise HornError(f"compactness needs an operator-level head, got {p}")


def compact(c: Clause) -> Clause:
    """(body ⊸ head) becomes (body ⊗ head† ⊸) with an empty head."""
    if c.head is None:
        raise HornError("clause is already headless")
    _require_level(c.head)
    return Clause(None, c.body + (replace(c.head, dagger=not c.head.dagger),), c.line)


def uncompact(c: Clause) -> Clause:
    if c.head is not None:
        raise HornError("clause already has a head")
    daggered = [i for i, p in enumerate(c.body) if p.dagger]
    if len(daggered) != 1:
        raise HornError("a headless clause needs exactly one daggered predicate to restore")
    i = daggered[0]
    head = replace(c.body[i], dagger=False)
    _require_level(head)
    return Clause(head, c.body[:i] + c.body[i + 1 :], c.line)


def _bound_text(before: dict, after: dict) -> str:
    new = [(str(v), str(resolve(v, after))) for v in after if v not in before]
    return ", ".join(f"{k} := {val}" for k, val in sorted(new))


class _Search:
    def __init__(self, registry: Registry, max_depth: int, max_steps: int):
        if max_depth <= 0 or max_steps <= 0:
            raise ValueError("depth and step limits must be positive")
        self.reg = registry
        self.ctx = Context(registry)
        self.max_depth = max_depth
        self.max_steps = max_steps
        self.steps: list = []
        self.count = 0
        self.scope = 0
        self.contradictions: list = []
        self.soft: list = []  # failures that are not contradictions
        self.closest: Optional[tuple] = None  # (goals left, reason) of the failure nearest a proof
        self._normalized: dict = {}

    def record(self, *args, **kw):
        self.steps.append(TraceStep(*args, **kw))

    def body_of(self, c: Clause) -> tuple:
        key = id(c)
        if key not in self._normalized:
            self._normalized[key] = (c, normalize_clause(c, self.reg).body)
        return self._normalized[key][1]

    def note(self, left: int, why: str):
        if self.closest is None or left < self.closest[0]:
            self.closest = (left, why)

    def soft_fail(self, depth, goal, kind, why, left=0):
        self.record(depth, kind, goal, detail=why)
        self.soft.append(why)
        self.note(left, why)

    def run(self, goals: tuple, s: dict, w: World, stall: int = 0) -> Iterator:
        if not goals:
            yield s, w
            return
        (p, d), rest = goals[0], goals[1:]
        self.count += 1
        if self.count > self.max_steps:
            raise _Limit(f"step limit {self.max_steps} reached")
        shown = str(resolve_pred(p, s))
        if d > self.max_depth:
            self.soft_fail(d, shown, "limit", f"depth limit {self.max_depth} reached", len(rest))
            return
        if p.negated:
            yield from self._negation(p, d, rest, s, w, shown)
        elif is_builtin(p, self.reg):
            yield from self._builtin(p, d, rest, s, w, stall, shown)
        else:
            yield from self._call(p, d, rest, s, w, shown)

    def _builtin(self, p, d, rest, s, w, stall, shown):
        r = evaluate(self.ctx, p, s, w)
        if r is SUSPEND:
            if stall > len(rest):
                self.soft_fail(d, shown, "flounder", "insufficiently instantiated", len(rest))
                return
            self.record(d, "suspend", shown)
            yield from self.run(rest + ((p, d),), s, w, stall + 1)
            return
        if isinstance(r, Fail):
            self.record(d, "fail", shown, detail=r.reason)
            (self.contradictions if r.contradiction else self.soft).append(r.reason)
            self.note(len(rest), r.reason)
            return
        for s2, w2, detail in r:
            self.record(d, "ok", shown, bound=_bound_text(s, s2), detail=detail)
            yield from self.run(rest, s2, w2, 0)

    def _call(self, p, d, rest, s, w, shown):
        matched = False
        for c in self.reg.clauses_for(p.functor, len(p.args)):
            self.scope += 1
            head = rename(c.head, self.scope)
            s2 = unify_preds(head, p, s, self.reg.params)
            if s2 is None:
                continue
            matched = True
            self.record(d, "call", shown, via=f"clause {c.line}", bound=_bound_text(s, s2))
            body = tuple((rename(q, self.scope), d + 1) for q in self.body_of(c))
            yield from self.run(body + rest, s2, w, 0)
        if not matched:
            self.soft_fail(d, shown, "fail", f"no clause matches {shown}", len(rest))

    def _negation(self, p, d, rest, s, w, shown):
        sub = _Search(self.reg, self.max_depth, self.max_steps - self.count)
        outcome, _, _, _ = sub.refute((replace(p, negated=False),), s, w, d + 1)
        self.count += sub.count
        self.steps += sub.steps
        if outcome == "refuted":
            self.record(d, "ok", shown, detail="refuted")
            yield from self.run(rest, s, w, 0)
        else:
            self.soft_fail(d, shown, "fail", "negation not established", len(rest))

    def first(self, goals, s, w):
        items = tuple((g, 0) for g in sorted(goals, key=lambda p: _key(p, self.reg)))
        for s2, w2 in self.run(items, s, w):
            return s2, w2
        return None

    def refute(self, goals, s, w, depth=0):
        """Exhaust the search; refuted iff no proof and every failure is a contradiction."""
        items = tuple((g, depth) for g in sorted(goals, key=lambda p: _key(p, self.reg)))
        for s2, w2 in self.run(items, s, w):
            return "proved", s2, w2, "the goal has a proof"
        if self.contradictions and not self.soft:
            return "refuted", s, w, "every branch ends in a contradiction"
        why = self.soft[0] if self.soft else "no branch"
        return "failed", s, w, why


def _goal_preds(goal, registry: Registry) -> list:
    if isinstance(goal, Pred):
        return [goal]
    if isinstance(goal, str):
        return parse_goal(goal, [str(k) for k in registry.params])
    return list(goal)


def solve(goal, registry: Registry, max_depth: int = DEFAULT_MAX_DEPTH, max_steps: int = DEFAULT_MAX_STEPS) -> ProofTrace:
    preds = _goal_preds(goal, registry)
    text = ", ".join(map(str, preds))
    negated = any(p.negated for p in preds)
    if negated and len(preds) != 1:
        raise HornError("a negated goal must be a single predicate")
    search = _Search(registry, max_depth, max_steps)
    query_vars = []
    for p in preds:
        term_vars(p, query_vars)
    w0 = registry.world
    try:
        if negated:
            outcome, s, w, reason = search.refute([replace(preds[0], negated=False)], {}, w0)
            if outcome == "proved":
                outcome, w = "failed", w0
        else:
            found = search.first(preds, {}, w0)
            if found is None:
                outcome, s, w = "failed", {}, w0
                reason = search.closest[1] if search.closest else "no branch"
            else:
                (s, w), outcome, reason = found, "proved", ""
    except _Limit as exc:
        search.record(0, "limit", text, detail=str(exc))
        outcome, s, w, reason = "failed", {}, w0, str(exc)
    except RecursionError:
        outcome, s, w, reason = "failed", {}, w0, "recursion limit reached"
    bindings = {}
    if outcome == "proved":
        bindings = {str(v): str(resolve(v, s)) for v in query_vars if isinstance(v, Var) and not v.name.startswith("_")}
    return ProofTrace(text, outcome, reason, bindings, w, search.steps, list(search.contradictions))
