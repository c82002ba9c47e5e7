"""Term and clause AST for the decorated Horn-clause language."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional

import numpy as np
import sympy

KET_TOL = 1e-9


class HornError(Exception):
    """Load-time or evaluation-time error (as opposed to a failed goal)."""


@dataclass(frozen=True)
class Var:
    name: str
    scope: int = 0  # renaming counter; 0 for source variables

    def __str__(self):
        return self.name if self.scope == 0 else f"{self.name}_{self.scope}"


@dataclass(frozen=True)
class Atom:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Num:
    value: Any  # sympy expression

    def __str__(self):
        return sympy.sstr(self.value)

    def evaluate(self, params: Mapping) -> complex:
        return complex(sympy.N(self.value.subs(params)))


@dataclass(frozen=True)
class Ket:
    """Σ c_k |label_k⟩ with sympy coefficients; labels are digit strings."""

    terms: tuple  # ((label, coeff), ...), labels sorted, no zero coefficients

    @classmethod
    def build(cls, pairs) -> "Ket":
        acc: dict = {}
        width = None
        for label, c in pairs:
            if width is None:
                width = len(label)
            elif len(label) != width:
                raise HornError(f"ket labels of different lengths: {label!r}")
            acc[label] = sympy.expand(acc.get(label, 0) + sympy.sympify(c))
        return cls(tuple(sorted((l, c) for l, c in acc.items() if c != 0)))

    @property
    def width(self) -> int:
        return len(self.terms[0][0]) if self.terms else 0

    def coeff(self, label: str):
        for l, c in self.terms:
            if l == label:
                return c
        return sympy.Integer(0)

    def vector(self, params: Mapping, dims=None) -> np.ndarray:
        dims = list(dims) if dims is not None else [2] * self.width
        if len(dims) != self.width:
            raise HornError(f"ket of width {self.width} does not match {len(dims)} systems")
        v = np.zeros(int(np.prod(dims)), dtype=complex)
        for label, c in self.terms:
            idx = 0
            for digit, d in zip(label, dims):
                k = int(digit)
                if k >= d:
                    raise HornError(f"label {label!r} out of range for dims {dims}")
                idx = idx * d + k
            v[idx] = complex(sympy.N(c.subs(params)))
        return v

    def scale(self, c) -> "Ket":
        return Ket.build((l, c * k) for l, k in self.terms)

    def tensor(self, other: "Ket") -> "Ket":
        return Ket.build((l1 + l2, c1 * c2) for l1, c1 in self.terms for l2, c2 in other.terms)

    def __add__(self, other: "Ket") -> "Ket":
        return Ket.build(list(self.terms) + list(other.terms))

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for label, c in self.terms:
            if c == 1:
                parts.append(f"|{label}⟩")
            else:
                text = sympy.sstr(c)
                if isinstance(c, sympy.Add):
                    text = f"({text})"
                parts.append(f"{text}|{label}⟩")
        return " + ".join(parts)


@dataclass(frozen=True)
class Val:
    """Opaque numeric payload (matrix, walk state, Fock vector)."""

    payload: Any = field(compare=False)
    tag: str = "value"

    def __eq__(self, other):
        if not isinstance(other, Val) or other.tag != self.tag:
            return False
        if self.payload is other.payload:
            return True
        if isinstance(self.payload, np.ndarray) and isinstance(other.payload, np.ndarray):
            return self.payload.shape == other.payload.shape and bool(np.allclose(self.payload, other.payload, atol=KET_TOL))
        return self.payload == other.payload

    def __hash__(self):
        return hash(self.tag)

    def __str__(self):
        p = self.payload
        if isinstance(p, np.ndarray):
            if p.ndim == 1 and p.size <= 16 and np.all(np.isreal(p)):
                return f"<{self.tag} [" + ", ".join(f"{float(np.real(x)):.12g}" for x in p) + "]>"
            return f"<{self.tag} {'x'.join(map(str, p.shape))}>"
        n = getattr(p, "n", None)
        return f"<{self.tag} n={n}>" if n is not None else f"<{self.tag}>"


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple

    def __str__(self):
        return f"{self.functor}({', '.join(map(str, self.args))})"


Term = Any  # Var | Atom | Num | Ket | Val | Compound


@dataclass(frozen=True)
class Pred:
    functor: str
    args: tuple
    deco: Optional[int] = None
    negated: bool = False
    measured: bool = False
    dagger: bool = False

    def __str__(self):
        if self.functor == "=" and len(self.args) == 2:
            core = f"{self.args[0]} = {self.args[1]}"
        elif self.functor == "commutes" and len(self.args) == 2:
            core = f"[{self.args[0]}, {self.args[1]}] = 0"
        else:
            core = f"{self.functor}({', '.join(map(str, self.args))})"
        if self.deco is not None:
            core = f"@{self.deco} {core}"
        if self.dagger:
            core += "^dag"
        if self.measured:
            core += "*"
        if self.negated:
            core = "~" + core
        return core

    def with_args(self, args) -> "Pred":
        return replace(self, args=tuple(args))


@dataclass(frozen=True)
class Clause:
    head: Optional[Pred]
    body: tuple = ()
    line: int = 0

    def __str__(self):
        head = str(self.head) if self.head is not None else ""
        if not self.body:
            return f"{head}."
        sep = " :- " if head else ":- "
        return f"{head}{sep}{', '.join(map(str, self.body))}."


def term_vars(t, out=None) -> list:
    out = [] if out is None else out
    if isinstance(t, Var):
        if t not in out:
            out.append(t)
    elif isinstance(t, Compound):
        for a in t.args:
            term_vars(a, out)
    elif isinstance(t, Pred):
        for a in t.args:
            term_vars(a, out)
    return out
