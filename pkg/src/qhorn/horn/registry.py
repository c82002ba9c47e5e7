"""Named operators, states and systems, plus the immutable quantum world threaded through proofs."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import sympy

from ..fockweyl import TestFunction
from ..linalg import embed, is_unitary, partial_trace
from ..qprob import SpectralDecomposition
from ..qwalk import WalkState
from .parser import Program, parse_program
from .terms import Atom, Clause, HornError, Ket

DEFAULT_SEED = 20240607


@dataclass(frozen=True)
class OpEntry:
    name: str
    matrix: np.ndarray = field(repr=False)
    antiunitary: bool = False

    @property
    def unitary(self) -> bool:
        return is_unitary(self.matrix)


@dataclass(frozen=True)
class MeasurementRecord:
    systems: tuple
    outcome: str
    probability: float
    distribution: tuple  # ((label, prob), ...)
    sampled: bool


@dataclass(frozen=True)
class World:
    """Pure joint state of every declared system plus protocol bookkeeping."""

    systems: tuple  # names, tensor order
    dims: tuple
    psi: np.ndarray = field(repr=False)
    probes: tuple = ()  # (observable, system, pointer)
    disturbed: frozenset = frozenset()
    log: tuple = ()

    def index(self, name: str) -> int:
        try:
            return self.systems.index(name)
        except ValueError:
            raise HornError(f"unknown system {name!r}") from None

    def density(self) -> np.ndarray:
        return np.outer(self.psi, self.psi.conj())

    def reduced(self, names: Sequence[str]) -> np.ndarray:
        idx = [self.index(n) for n in names]
        if len(set(idx)) != len(idx):
            raise HornError("repeated system in reduced-state request")
        rho = partial_trace(self.density(), list(self.dims), sorted(idx))
        # partial_trace returns ascending order; permute to the requested order
        order = sorted(idx)
        perm = [order.index(i) for i in idx]
        sub = [self.dims[i] for i in order]
        k = len(sub)
        t = rho.reshape(sub + sub)
        t = t.transpose(perm + [k + p for p in perm])
        d = int(np.prod([self.dims[i] for i in idx]))
        return t.reshape(d, d)

    def lift(self, op: np.ndarray, names: Sequence[str]) -> np.ndarray:
        return embed(op, [self.index(n) for n in names], list(self.dims))

    def apply(self, op: np.ndarray, names: Sequence[str], antiunitary: bool = False) -> "World":
        full = self.lift(op, names)
        psi = self.psi.conj() if antiunitary else self.psi
        out = full @ psi
        nrm = np.linalg.norm(out)
        if nrm < 1e-12:
            raise HornError("operator annihilated the state")
        return replace(self, psi=out / nrm)


class Registry:
    """Program clauses, named values and the current world."""

    def __init__(self, seed: Optional[int] = None):
        self.seed = DEFAULT_SEED if seed is None else int(seed)
        self.clauses: list = []
        self.constraints: list = []  # headless clauses
        self.ops: dict = {}
        self.states: dict = {}
        self.params: dict = {}  # sympy Symbol -> value
        self.system_decl: dict = {}  # name -> (dim, initial state name)
        self.walks: dict = {}
        self.focks: dict = {}
        self.world: Optional[World] = None

    # -- loading
    @classmethod
    def from_source(cls, src: str, seed: Optional[int] = None) -> "Registry":
        reg = cls(seed)
        reg.load(parse_program(src))
        return reg

    @classmethod
    def from_file(cls, path, seed: Optional[int] = None) -> "Registry":
        with open(path, encoding="utf-8") as fh:
            return cls.from_source(fh.read(), seed)

    def load(self, prog: Program):
        for d in prog.directives:
            self._directive(d)
        for c in prog.clauses:
            if c.head is None:
                self.constraints.append(c)
            else:
                self.clauses.append(c)
        self._check_operator_names()
        self.reset_world()

    def _check_operator_names(self):
        """Operator-level body predicates must name a clause, a builtin or a registered operator."""
        from .builtins import BUILTINS

        heads = {c.head.functor for c in self.clauses}
        for c in self.clauses + self.constraints:
            for p in c.body:
                if p.deco in (1, 2) and p.functor not in heads | set(BUILTINS) | set(self.ops):
                    raise HornError(f"line {c.line}: unbound operator name {p.functor!r}")

    def _directive(self, d):
        if d.name in self.ops or d.name in self.states or d.name in self.system_decl:
            raise HornError(f"line {d.line}: name {d.name!r} already defined")
        if d.kind == "op":
            mat, anti = d.args
            if mat.shape[0] != mat.shape[1]:
                raise HornError(f"line {d.line}: operator {d.name!r} is not square")
            self.ops[d.name] = OpEntry(d.name, mat, anti)
        elif d.kind == "state":
            ket = d.args[0]
            vec = ket.vector(self.params)
            nrm = np.linalg.norm(vec)
            if nrm == 0:
                raise HornError(f"line {d.line}: state {d.name!r} is the zero vector")
            self.states[d.name] = ket.scale(1 / sympy.sqrt(sympy.nsimplify(nrm**2)))
        elif d.kind == "system":
            dim, init = d.args
            if init is not None and init not in self.states:
                raise HornError(f"line {d.line}: unknown initial state {init!r}")
            self.system_decl[d.name] = (dim, init)
        elif d.kind == "param":
            self.params[sympy.Symbol(d.name)] = d.args[0]
        elif d.kind == "walk":
            self.walks[d.name] = WalkState.localized()
        elif d.kind == "fock":
            horizon, cells = d.args
            self.focks[d.name] = TestFunction(horizon, np.zeros(cells))

    def add_op(self, name: str, matrix, antiunitary: bool = False):
        self.ops[name] = OpEntry(name, np.asarray(matrix, dtype=complex), antiunitary)

    def add_clause(self, clause: Clause):
        (self.clauses if clause.head is not None else self.constraints).append(clause)

    def reset_world(self):
        names = tuple(self.system_decl)
        dims = tuple(self.system_decl[n][0] for n in names)
        psi = np.ones(1, dtype=complex)
        for n in names:
            dim, init = self.system_decl[n]
            if init is None:
                v = np.zeros(dim, dtype=complex)
                v[0] = 1.0
            else:
                v = self.states[init].vector(self.params, [dim] * self.states[init].width)
                v = v / np.linalg.norm(v)
                if v.size != dim:
                    raise HornError(f"initial state of {n!r} has the wrong dimension")
            psi = np.kron(psi, v)
        self.world = World(names, dims, psi)

    # -- lookups
    def clauses_for(self, functor: str, arity: int) -> list:
        return [c for c in self.clauses if c.head.functor == functor and len(c.head.args) == arity]

    def is_system(self, t) -> bool:
        return isinstance(t, Atom) and t.name in self.system_decl

    def op(self, name: str) -> OpEntry:
        if name not in self.ops:
            raise HornError(f"unknown operator {name!r}")
        return self.ops[name]

    def spectral(self, name: str) -> SpectralDecomposition:
        return SpectralDecomposition.from_observable(self.op(name).matrix)

    def state_ket(self, name: str) -> Ket:
        if name not in self.states:
            raise HornError(f"unknown state {name!r}")
        return self.states[name]

    def reduced_state(self, names: Sequence[str]) -> np.ndarray:
        return self.world.reduced(names)

    def rng(self, world: World) -> np.random.Generator:
        return np.random.default_rng([self.seed, len(world.log)])

    # -- queries
    def solve(self, goal, **limits):
        """Solve a goal (text or predicates); a proof commits its world."""
        from .engine import solve

        trace = solve(goal, self, **limits)
        if trace.outcome == "proved":
            self.world = trace.world
        return trace
