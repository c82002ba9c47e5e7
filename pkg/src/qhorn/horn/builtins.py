"""Semantic builtins: each maps (goal, substitution, world) to an outcome.

A builtin returns ``SUSPEND`` when its inputs are not yet bound, a ``Fail``
when it evaluates to false (a contradiction), or a list of
``(substitution, world, detail)`` successes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import sympy

from .. import fockweyl, qwalk
from ..linalg import commutator, dagger, hermitian_eigen, kron
from ..qprob import (
    NotConditionable,
    NullEvent,
    build_probe_unitary,
    conditional_expectation,
    in_commutant,
    is_compatible,
)
from .registry import MeasurementRecord, Registry, World
from .terms import Atom, Compound, HornError, Ket, Num, Pred, Val, Var
from .unify import kets_equal, resolve, unify

SUSPEND = object()
COMMUTE_TOL = 1e-9
PURITY_TOL = 1e-9


@dataclass(frozen=True)
class Fail:
    reason: str
    contradiction: bool = True


@dataclass(frozen=True)
class Builtin:
    name: str
    stratum: int
    fn: Callable


BUILTINS: dict = {}


def builtin(name: str, stratum: int):
    def deco(fn):
        BUILTINS[name] = Builtin(name, stratum, fn)
        return fn

    return deco


def is_ground(t) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, Compound):
        return all(is_ground(a) for a in t.args)
    return True


class Context:
    """What a builtin may see: the registry and the clause's decoration."""

    def __init__(self, registry: Registry):
        self.reg = registry

    @property
    def params(self):
        return self.reg.params


def _round(x: float) -> float:
    r = round(float(x), 12)
    return 0.0 if r == 0 else r


def ket_from_vector(v: np.ndarray, dims) -> Ket:
    v = np.asarray(v, dtype=complex)
    k = int(np.argmax(np.abs(v) > 1e-9))
    v = v * np.exp(-1j * np.angle(v[k]))  # fix the global phase
    pairs = []
    for idx in range(v.size):
        c = v[idx]
        if abs(c) < 1e-12:
            continue
        digits, rem = [], idx
        for d in reversed(dims):
            digits.append(str(rem % d))
            rem //= d
        label = "".join(reversed(digits))
        pairs.append((label, sympy.Float(_round(c.real), 12) + sympy.I * sympy.Float(_round(c.imag), 12)))
    return Ket.build(pairs)


def as_ket(ctx: Context, t):
    if isinstance(t, Ket):
        return t
    if isinstance(t, Atom) and t.name in ctx.reg.states:
        return ctx.reg.state_ket(t.name)
    return None


def system_names(ctx: Context, terms) -> list:
    names = []
    for t in terms:
        if not isinstance(t, Atom) or not ctx.reg.is_system(t):
            raise HornError(f"{t} is not a declared system")
        names.append(t.name)
    return names


def readout(world: World, names) -> tuple:
    """Pure reduced state as a Ket, else the density matrix as a Val."""
    rho = world.reduced(names)
    dims = [world.dims[world.index(n)] for n in names]
    purity = float(np.real(np.trace(rho @ rho)))
    if purity > 1 - PURITY_TOL:
        eig = hermitian_eigen(0.5 * (rho + dagger(rho)))
        return ket_from_vector(eig.eigenvectors[:, -1], dims), rho
    return Val(rho, "density"), rho


def ket_equations(a: Ket, b: Ket) -> list:
    """Coefficient equations coef_a = coef_b that do not hold identically."""
    out = []
    labels = sorted({l for l, _ in a.terms} | {l for l, _ in b.terms})
    for label in labels:
        lhs, rhs = sympy.expand(a.coeff(label)), sympy.expand(b.coeff(label))
        if sympy.expand(lhs - rhs) != 0:
            eq = f"{sympy.sstr(lhs)} = {sympy.sstr(rhs)}"
            if eq not in out:
                out.append(eq)
    return out


# -- checks and pure builtins (stratum 0) ---------------------------------------


@builtin("=", 0)
def _eq(ctx: Context, p: Pred, s: dict, w: World):
    lhs, rhs = resolve(p.args[0], s), resolve(p.args[1], s)
    if isinstance(lhs, Compound) and lhs.functor == "state" and len(lhs.args) >= 1:
        targets = lhs.args
        if len(targets) == 1 and isinstance(targets[0], Var):
            k = as_ket(ctx, rhs)
            if k is None:
                return SUSPEND
            s2 = unify(targets[0], k, s, ctx.params)
            return [(s2, w, "")] if s2 is not None else Fail("binding failed")
        if not is_ground(lhs):
            return SUSPEND
        if len(targets) == 1 and not ctx.reg.is_system(targets[0]):
            current = as_ket(ctx, targets[0])
            if current is None:
                raise HornError(f"state({targets[0]}) names neither a system nor a ket")
        else:
            current, _ = readout(w, system_names(ctx, targets))
        if isinstance(rhs, Var):
            s2 = unify(rhs, current, s, ctx.params)
            return [(s2, w, "")]
        want = as_ket(ctx, rhs)
        if want is None:
            raise HornError(f"right-hand side {rhs} of a state equation is not a ket")
        if isinstance(current, Ket) and kets_equal(current, want, ctx.params):
            return [(s, w, f"{lhs} = {want}")]
        return Fail(f"{lhs} is {current}, not {want}")
    left = as_ket(ctx, lhs) if isinstance(rhs, Ket) else lhs
    right = as_ket(ctx, rhs) if isinstance(lhs, Ket) else rhs
    s2 = unify(left if left is not None else lhs, right if right is not None else rhs, s, ctx.params)
    if s2 is None:
        return Fail(f"{lhs} does not unify with {rhs}")
    return [(s2, w, "")]


@builtin("state_eq", 0)
def _state_eq(ctx, p, s, w):
    a, b = (resolve(t, s) for t in p.args)
    if not (is_ground(a) and is_ground(b)):
        return SUSPEND
    ka, kb = as_ket(ctx, a), as_ket(ctx, b)
    if ka is not None and kb is not None:
        if kets_equal(ka, kb, ctx.params):
            return [(s, w, f"{ka} ≐ {kb}")]
        eqs = ket_equations(ka, kb)
        return Fail("state mismatch; coefficient equations " + "; ".join(eqs) + " have no solution at the given parameters")
    if isinstance(a, Val) and isinstance(b, Val):
        return [(s, w, "")] if a == b else Fail("matrices differ")
    raise HornError(f"state_eq expects kets, got {a} and {b}")


def eval_opexpr(ctx: Context, t, w: World) -> np.ndarray:
    if isinstance(t, Atom):
        return ctx.reg.op(t.name).matrix
    if isinstance(t, Val) and isinstance(t.payload, np.ndarray):
        return t.payload
    if not isinstance(t, Compound):
        raise HornError(f"{t} is not an operator expression")
    f, args = t.functor, t.args
    if f == "kron":
        out = eval_opexpr(ctx, args[0], w)
        for a in args[1:]:
            out = kron(out, eval_opexpr(ctx, a, w))
        return out
    if f == "mul":
        out = eval_opexpr(ctx, args[0], w)
        for a in args[1:]:
            out = out @ eval_opexpr(ctx, a, w)
        return out
    if f == "add":
        return sum(eval_opexpr(ctx, a, w) for a in args)
    if f == "dag":
        return dagger(eval_opexpr(ctx, args[0], w))
    if f == "heis":
        u = eval_opexpr(ctx, args[0], w)
        return dagger(u) @ eval_opexpr(ctx, args[1], w) @ u
    if f == "eye":
        if not isinstance(args[0], Num):
            raise HornError("eye(N) needs a number")
        return np.eye(int(args[0].evaluate(ctx.params).real), dtype=complex)
    if f == "lift":
        return w.lift(eval_opexpr(ctx, args[0], w), system_names(ctx, args[1:]))
    if f == "copier":
        obs, sys_, ptr = args
        probe = build_probe_unitary(ctx.reg.spectral(obs.name), 0)
        return w.lift(probe.unitary, system_names(ctx, [sys_, ptr]))
    if f == "pointer_obs":
        spec = ctx.reg.spectral(args[0].name)
        return np.diag(np.asarray(spec.eigenvalues, dtype=complex))
    raise HornError(f"unknown operator expression {f!r}")


@builtin("commutes", 0)
def _commutes(ctx, p, s, w):
    a, b = (resolve(t, s) for t in p.args)
    if not (is_ground(a) and is_ground(b)):
        return SUSPEND
    x, y = eval_opexpr(ctx, a, w), eval_opexpr(ctx, b, w)
    if x.shape != y.shape:
        raise HornError(f"commutator of shapes {x.shape} and {y.shape}")
    norm = float(np.max(np.abs(commutator(x, y)), initial=0.0))
    if norm < COMMUTE_TOL:
        return [(s, w, f"|[.,.]| = {norm:.1e}")]
    return Fail(f"commutator norm {norm:.3g}")


@builtin("basis", 0)
def _basis(ctx, p, s, w):
    k = as_ket(ctx, resolve(p.args[0], s))
    if k is None:
        return SUSPEND
    if len(k.terms) == 1:
        return [(s, w, "")]
    return Fail(f"{k} is not a basis ket")


@builtin("tensor", 0)
def _tensor(ctx, p, s, w):
    a, b = (as_ket(ctx, resolve(t, s)) for t in p.args[:2])
    if a is None or b is None:
        return SUSPEND
    out = a.tensor(b)
    s2 = unify(p.args[2], out, s, ctx.params)
    return [(s2, w, f"= {out}")] if s2 is not None else Fail(f"tensor product {out} does not match")


@builtin("superpose", 0)
def _superpose(ctx, p, s, w):
    k = as_ket(ctx, resolve(p.args[0], s))
    if k is None:
        return SUSPEND
    if len(k.terms) < 2:
        return Fail(f"{k} is not a superposition")
    (l0, c0), rest = k.terms[0], k.terms[1:]
    if len(rest) == 1:
        b, k2 = rest[0][1], Ket.build([(rest[0][0], 1)])
    else:
        b, k2 = sympy.Integer(1), Ket(rest)
    s2 = s
    for var, val in zip(p.args[1:], (Num(c0), Ket.build([(l0, 1)]), Num(b), k2)):
        s2 = unify(var, val, s2, ctx.params)
    if s2 is None:
        return Fail("superposition split does not match")
    return [(s2, w, f"{k} = {sympy.sstr(c0)}|{l0}⟩ + {sympy.sstr(b)}({k2})")]


@builtin("lincomb", 0)
def _lincomb(ctx, p, s, w):
    a, o1, b, o2 = (resolve(t, s) for t in p.args[:4])
    k1, k2 = as_ket(ctx, o1), as_ket(ctx, o2)
    if not isinstance(a, Num) or not isinstance(b, Num) or k1 is None or k2 is None:
        if all(is_ground(t) for t in (a, o1, b, o2)):
            raise HornError("lincomb expects numbers and kets")
        return SUSPEND
    out = k1.scale(a.value) + k2.scale(b.value)
    s2 = unify(p.args[4], out, s, ctx.params)
    return [(s2, w, f"= {out}")] if s2 is not None else Fail("linear combination does not match")


@builtin("succ", 0)
def _succ(ctx, p, s, w):
    m, n = (resolve(t, s) for t in p.args)
    if isinstance(n, Num):
        k = int(n.evaluate(ctx.params).real)
        if k < 1:
            return Fail(f"{k} has no predecessor")
        s2 = unify(m, Num(sympy.Integer(k - 1)), s, ctx.params)
    elif isinstance(m, Num):
        s2 = unify(n, Num(sympy.Integer(int(m.evaluate(ctx.params).real) + 1)), s, ctx.params)
    else:
        return SUSPEND
    return [(s2, w, "")] if s2 is not None else Fail("successor mismatch")


def _op_and_state(ctx, p, s, w):
    d, a, *systems = (resolve(t, s) for t in p.args[:-1])
    if not all(is_ground(t) for t in [d, a, *systems]):
        return None
    rho = w.reduced(system_names(ctx, systems))
    return eval_opexpr(ctx, d, w), ctx.reg.spectral(a.name), rho


@builtin("in_commutant", 0)
def _in_commutant(ctx, p, s, w):
    d, a = (resolve(t, s) for t in p.args)
    if not (is_ground(d) and is_ground(a)):
        return SUSPEND
    if in_commutant(eval_opexpr(ctx, d, w), ctx.reg.spectral(a.name)):
        return [(s, w, "")]
    return Fail(f"{d} is not in the commutant of {a}")


@builtin("cond_expect", 0)
def _cond_expect(ctx, p, s, w):
    got = _op_and_state(ctx, p, s, w)
    if got is None:
        return SUSPEND
    d, spec, rho = got
    try:
        out = conditional_expectation(d, spec, rho)
    except (NotConditionable, NullEvent) as exc:
        return Fail(str(exc))
    s2 = unify(p.args[-1], Val(out, "matrix"), s, ctx.params)
    return [(s2, w, "")] if s2 is not None else Fail("conditional expectation does not match")


# -- state-changing applications (stratum 2) ------------------------------------


def _check_deco(p: Pred, op_entry, required_unitary: bool):
    if p.deco in (0, 3):
        raise HornError(f"decoration violation: @{p.deco} {p.functor} cannot act as a state operator")
    if (p.deco == 2 or required_unitary) and not (op_entry.unitary or op_entry.antiunitary):
        raise HornError(f"decoration violation: {op_entry.name} is not unitary")


def apply_named_op(ctx, p, s, w, op_name: str, sys_terms, required_unitary=False):
    sys_terms = [resolve(t, s) for t in sys_terms]
    if not all(is_ground(t) for t in sys_terms):
        return SUSPEND
    entry = ctx.reg.op(op_name)
    _check_deco(p, entry, required_unitary)
    names = system_names(ctx, sys_terms)
    dim = int(np.prod([w.dims[w.index(n)] for n in names]))
    if entry.matrix.shape != (dim, dim):
        raise HornError(f"operator {op_name} of shape {entry.matrix.shape} does not fit systems {names}")
    mat = entry.matrix
    if p.dagger:
        # inverse of psi -> U conj(psi) is psi -> U^T conj(psi)
        mat = mat.T if entry.antiunitary else dagger(mat)
    w2 = w.apply(mat, names, antiunitary=entry.antiunitary)
    label = op_name + ("^dag" if p.dagger else "")
    return [(s, w2, f"applied {label} on {', '.join(names)}")]


@builtin("unitary_apply", 2)
def _unitary_apply(ctx, p, s, w):
    op = resolve(p.args[0], s)
    if not isinstance(op, Atom):
        return SUSPEND
    return apply_named_op(ctx, p, s, w, op.name, p.args[1:], required_unitary=True)


@builtin("copy", 2)
def _copy(ctx, p, s, w):
    obs, sys_, ptr = (resolve(t, s) for t in p.args)
    if not all(is_ground(t) for t in (obs, sys_, ptr)):
        return SUSPEND
    if p.deco in (0, 3):
        raise HornError(f"decoration violation: @{p.deco} copy")
    spec = ctx.reg.spectral(obs.name)
    probe = build_probe_unitary(spec, 0)
    names = system_names(ctx, [sys_, ptr])
    w2 = w.apply(probe.unitary, names)
    new_obs = ctx.reg.op(obs.name).matrix
    disturbed = set(w.disturbed)
    hits = []
    for rec in w.probes:
        o, sy, pt = rec
        if sy == sys_.name and not is_compatible(ctx.reg.op(o).matrix, new_obs):
            disturbed.add(rec)
            hits.append(f"{o} copy in {pt}")
    w2 = replace(w2, probes=w.probes + ((obs.name, sys_.name, ptr.name),), disturbed=frozenset(disturbed))
    detail = f"copied {obs.name} of {sys_.name} into {ptr.name}"
    if hits:
        detail += "; disturbs " + ", ".join(hits)
    return [(s, w2, detail)]


def _walk_state(ctx, t):
    if isinstance(t, Atom) and t.name in ctx.reg.walks:
        return ctx.reg.walks[t.name]
    if isinstance(t, Val) and t.tag == "walk":
        return t.payload
    return None


def _require_deco3(p: Pred):
    if p.deco != 3:
        raise HornError(f"decoration violation: {p.functor} is a second-quantized predicate and needs @3")


@builtin("walk_step", 2)
def _walk_step(ctx, p, s, w):
    _require_deco3(p)
    cur = _walk_state(ctx, resolve(p.args[0], s))
    if cur is None:
        return SUSPEND
    nxt = qwalk.hadamard_step(cur)
    s2 = unify(p.args[1], Val(nxt, "walk"), s, ctx.params)
    return [(s2, w, f"step {nxt.n}")] if s2 is not None else Fail("walk state mismatch")


@builtin("walk_dist", 0)
def _walk_dist(ctx, p, s, w):
    cur = _walk_state(ctx, resolve(p.args[0], s))
    if cur is None:
        return SUSPEND
    s2 = unify(p.args[1], Val(qwalk.position_distribution(cur), "distribution"), s, ctx.params)
    return [(s2, w, "")] if s2 is not None else Fail("distribution mismatch")


def _fock_grid(ctx, t):
    if not (isinstance(t, Atom) and t.name in ctx.reg.focks):
        raise HornError(f"{t} is not a declared Fock register")
    return ctx.reg.focks[t.name]


@builtin("coherent", 0)
def _coherent(ctx, p, s, w):
    reg, c = (resolve(t, s) for t in p.args[:2])
    if not (is_ground(reg) and isinstance(c, Num)):
        return SUSPEND
    grid = _fock_grid(ctx, reg)
    f = fockweyl.TestFunction(grid.horizon, np.full(grid.cells, c.evaluate(ctx.params)))
    s2 = unify(p.args[2], Val(fockweyl.ExponentialVectorSum.single(f), "fock"), s, ctx.params)
    return [(s2, w, "")] if s2 is not None else Fail("coherent vector mismatch")


@builtin("weyl", 2)
def _weyl(ctx, p, s, w):
    _require_deco3(p)
    reg, c, v = (resolve(t, s) for t in p.args[:3])
    if not (is_ground(reg) and isinstance(c, Num) and isinstance(v, Val)):
        return SUSPEND
    grid = _fock_grid(ctx, reg)
    f = fockweyl.TestFunction(grid.horizon, np.full(grid.cells, c.evaluate(ctx.params)))
    out = fockweyl.weyl_apply(f, v.payload)
    s2 = unify(p.args[3], Val(out, "fock"), s, ctx.params)
    return [(s2, w, "")] if s2 is not None else Fail("Weyl image mismatch")


@builtin("inner", 0)
def _inner(ctx, p, s, w):
    u, v = (resolve(t, s) for t in p.args[:2])
    if not (isinstance(u, Val) and isinstance(v, Val)):
        return SUSPEND
    z = fockweyl.exp_inner(u.payload, v.payload)
    s2 = unify(p.args[2], Num(sympy.Float(_round(z.real), 12) + sympy.I * sympy.Float(_round(z.imag), 12)), s, ctx.params)
    return [(s2, w, "")] if s2 is not None else Fail("inner product mismatch")


# -- measurement (stratum 3) -----------------------------------------------------


@builtin("measure", 3)
def _measure(ctx, p, s, w):
    *sys_terms, outcome = (resolve(t, s) for t in p.args)
    if not sys_terms or not all(is_ground(t) for t in sys_terms):
        return SUSPEND
    names = system_names(ctx, sys_terms)
    dims = [w.dims[w.index(n)] for n in names]
    rho = w.reduced(names)
    probs = np.clip(np.real(np.diag(rho)), 0.0, None)
    labels = [ket_from_vector(np.eye(len(probs))[i], dims).terms[0][0] for i in range(len(probs))]
    dist = tuple((l, _round(q)) for l, q in zip(labels, probs))
    if isinstance(outcome, Var):
        rng = ctx.reg.rng(w)
        i = int(rng.choice(len(probs), p=probs / probs.sum()))
        target = Ket.build([(labels[i], 1)])
        sampled = True
    else:
        target = as_ket(ctx, outcome)
        if target is None:
            raise HornError(f"measurement outcome {outcome} is not a ket")
        sampled = False
    vec = target.vector(ctx.params, dims)
    vec = vec / np.linalg.norm(vec)
    proj = np.outer(vec, vec.conj())
    full = w.lift(proj, names)
    post = full @ w.psi
    prob = float(np.real(np.vdot(post, post)))
    if prob < 1e-12:
        return Fail(f"outcome {target} on {', '.join(names)} has probability 0")
    rec = MeasurementRecord(tuple(names), str(target), _round(prob), dist, sampled)
    w2 = replace(w, psi=post / np.sqrt(prob), log=w.log + (rec,))
    s2 = unify(outcome, target, s, ctx.params) if isinstance(outcome, Var) else s
    return [(s2, w2, f"outcome {target} with probability {_round(prob):.12g}")]


# -- readouts (stratum 4) ----------------------------------------------------------


@builtin("reduced", 4)
def _reduced(ctx, p, s, w):
    *sys_terms, out = p.args
    sys_terms = [resolve(t, s) for t in sys_terms]
    if not all(is_ground(t) for t in sys_terms):
        return SUSPEND
    value, _ = readout(w, system_names(ctx, sys_terms))
    s2 = unify(out, value, s, ctx.params)
    if s2 is None:
        return Fail(f"reduced state {value} does not match {resolve(out, s)}")
    return [(s2, w, f"= {value}")]


@builtin("prob", 4)
def _prob(ctx, p, s, w):
    *sys_terms, k, out = (resolve(t, s) for t in p.args)
    ket = as_ket(ctx, k)
    if ket is None or not all(is_ground(t) for t in sys_terms):
        return SUSPEND
    names = system_names(ctx, sys_terms)
    dims = [w.dims[w.index(n)] for n in names]
    vec = ket.vector(ctx.params, dims)
    vec = vec / np.linalg.norm(vec)
    pr = float(np.real(np.vdot(vec, w.reduced(names) @ vec)))
    s2 = unify(out, Num(sympy.Float(_round(pr), 12)), s, ctx.params)
    return [(s2, w, f"= {_round(pr):.12g}")] if s2 is not None else Fail("probability mismatch")


@builtin("same_stats", 4)
def _same_stats(ctx, p, s, w):
    obs, sys_, ptr = (resolve(t, s) for t in p.args)
    if not all(is_ground(t) for t in (obs, sys_, ptr)):
        return SUSPEND
    spec = ctx.reg.spectral(obs.name)
    rho = w.reduced(system_names(ctx, [sys_, ptr]))
    m = len(spec.eigenvalues)
    total = 0.0
    for a, proj in enumerate(spec.projectors):
        ptr_proj = np.zeros((m, m), dtype=complex)
        ptr_proj[a, a] = 1.0
        total += float(np.real(np.trace(rho @ kron(proj, ptr_proj))))
    if total > 1 - 1e-9:
        return [(s, w, f"P(pointer agrees) = {_round(total):.12g}")]
    why = f"P(pointer agrees) = {_round(total):.6g}"
    rec = (obs.name, sys_.name, ptr.name)
    if rec in w.disturbed:
        why += f"; {obs.name} on {sys_.name} was disturbed after it was copied into {ptr.name}"
    return Fail(why)


CHECK_STRATUM = 0
CALL_STRATUM = 1
APPLY_STRATUM = 2
MEASURE_STRATUM = 3
READOUT_STRATUM = 4


def stratum(p: Pred, registry=None) -> int:
    if p.measured or p.functor == "measure":
        return MEASURE_STRATUM
    b = BUILTINS.get(p.functor)
    if b is not None:
        return b.stratum
    if registry is not None and p.functor in registry.ops:
        return APPLY_STRATUM
    return CALL_STRATUM


def is_builtin(p: Pred, registry) -> bool:
    return p.functor in BUILTINS or p.functor in registry.ops


def evaluate(ctx: Context, p: Pred, s: dict, w: World):
    b = BUILTINS.get(p.functor)
    if b is not None:
        return b.fn(ctx, p, s, w)
    return apply_named_op(ctx, p, s, w, p.functor, p.args)
