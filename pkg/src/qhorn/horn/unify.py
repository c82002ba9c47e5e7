"""First-order unification with occurs check; kets unify up to global phase."""

from __future__ import annotations

from typing import Mapping, Optional

import numpy as np
import sympy

from .terms import KET_TOL, Atom, Compound, HornError, Ket, Num, Pred, Val, Var


def walk(t, s: Mapping):
    while isinstance(t, Var) and t in s:
        t = s[t]
    return t


def resolve(t, s: Mapping):
    """Apply the substitution all the way down."""
    t = walk(t, s)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(resolve(a, s) for a in t.args))
    return t


def resolve_pred(p: Pred, s: Mapping) -> Pred:
    return p.with_args(resolve(a, s) for a in p.args)


def occurs(v: Var, t, s: Mapping) -> bool:
    t = walk(t, s)
    if t == v:
        return True
    if isinstance(t, Compound):
        return any(occurs(v, a, s) for a in t.args)
    return False


def kets_equal(a: Ket, b: Ket, params: Mapping, tol: float = KET_TOL) -> bool:
    """Normalized vectors equal up to a global phase."""
    if a == b:
        return True
    if a.width != b.width:
        return False
    try:
        u = a.vector(params)
        v = b.vector(params)
    except (TypeError, ValueError, HornError):
        return False
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < tol or nv < tol:
        return nu < tol and nv < tol
    return abs(abs(np.vdot(u / nu, v / nv)) - 1.0) < tol


def nums_equal(a: Num, b: Num, params: Mapping) -> bool:
    if sympy.expand(a.value - b.value) == 0:
        return True
    try:
        return abs(a.evaluate(params) - b.evaluate(params)) < 1e-12
    except (TypeError, ValueError):
        return False


def unify(a, b, s: Optional[dict], params: Optional[Mapping] = None) -> Optional[dict]:
    """Most general unifier extending ``s``, or None."""
    if s is None:
        return None
    params = params or {}
    a = walk(a, s)
    b = walk(b, s)
    if isinstance(a, Var) and isinstance(b, Var) and a == b:
        return s
    if isinstance(a, Var):
        if occurs(a, b, s):
            return None
        out = dict(s)
        out[a] = b
        return out
    if isinstance(b, Var):
        return unify(b, a, s, params)
    if isinstance(a, Compound) and isinstance(b, Compound):
        if a.functor != b.functor or len(a.args) != len(b.args):
            return None
        for x, y in zip(a.args, b.args):
            s = unify(x, y, s, params)
            if s is None:
                return None
        return s
    if isinstance(a, Ket) and isinstance(b, Ket):
        return s if kets_equal(a, b, params) else None
    if isinstance(a, Num) and isinstance(b, Num):
        return s if nums_equal(a, b, params) else None
    if isinstance(a, (Atom, Val)) or isinstance(b, (Atom, Val)):
        return s if a == b else None
    return None


def unify_preds(a: Pred, b: Pred, s: dict, params: Optional[Mapping] = None) -> Optional[dict]:
    if a.functor != b.functor or len(a.args) != len(b.args):
        return None
    for x, y in zip(a.args, b.args):
        s = unify(x, y, s, params)
        if s is None:
            return None
    return s


def rename(t, scope: int):
    if isinstance(t, Var):
        return Var(t.name, scope)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(rename(a, scope) for a in t.args))
    if isinstance(t, Pred):
        return t.with_args(rename(a, scope) for a in t.args)
    return t
