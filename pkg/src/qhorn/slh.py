"""SLH circuit algebra over labeled local operators.

Operators are kept symbolic (linear combinations of words in the local atoms
a, a†, σ, σ† on named factors) so that composite networks can be printed;
``to_matrix`` evaluates them on a truncated tensor-product space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .linalg import dagger, embed, is_hermitian

COEFF_TOL = 1e-15
TRIPLE_TOL = 1e-9

# atom -> (adjoint atom, factor kind)
_ATOMS = {"a": ("ad", "fock"), "ad": ("a", "fock"), "s": ("sd", "tls"), "sd": ("s", "tls")}
_ATOM_TEXT = {"a": "a", "ad": "a^dag", "s": "sigma", "sd": "sigma^dag"}


@dataclass(frozen=True)
class Factor:
    label: str
    kind: str  # "tls" or "fock"

    def dim(self, cutoff: int) -> int:
        return 2 if self.kind == "tls" else int(cutoff)


def _atom_matrix(atom: str, cutoff: int) -> np.ndarray:
    if atom in ("s", "sd"):
        s = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|, g = 0, e = 1
        return s if atom == "s" else s.T.copy()
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)
    return a if atom == "a" else a.T.copy()


def _canonical_word(word: tuple) -> Optional[tuple]:
    """Sort letters by factor label (different factors commute) and drop nilpotent pairs."""
    word = tuple(sorted(word, key=lambda letter: letter[0]))
    for (f1, x1), (f2, x2) in zip(word, word[1:]):
        if f1 == f2 and x1 == x2 and x1 in ("s", "sd"):
            return None
    return word


class Operator:
    """Finite linear combination of words of local atoms with complex coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping] = None):
        clean = {}
        for word, c in (terms or {}).items():
            word = _canonical_word(tuple(word))
            if word is None:
                continue
            clean[word] = clean.get(word, 0) + complex(c)
        self.terms = {w: c for w, c in clean.items() if abs(c) > COEFF_TOL}

    @classmethod
    def scalar(cls, c: complex) -> "Operator":
        return cls({(): c})

    @classmethod
    def atom(cls, factor: str, name: str) -> "Operator":
        if name not in _ATOMS:
            raise ValueError(f"unknown atom {name!r}")
        return cls({((factor, name),): 1.0})

    @staticmethod
    def lift(x) -> "Operator":
        return x if isinstance(x, Operator) else Operator.scalar(x)

    def __add__(self, other):
        other = Operator.lift(other)
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out.get(w, 0) + c
        return Operator(out)

    __radd__ = __add__

    def __neg__(self):
        return Operator({w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-Operator.lift(other))

    def __rsub__(self, other):
        return Operator.lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Operator):
            return Operator({w: c * other for w, c in self.terms.items()})
        out: dict = {}
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                w = _canonical_word(w1 + w2)
                if w is not None:
                    out[w] = out.get(w, 0) + c1 * c2
        return Operator(out)

    def __rmul__(self, other):
        return Operator({w: other * c for w, c in self.terms.items()})

    def dag(self) -> "Operator":
        return Operator(
            {tuple((f, _ATOMS[x][0]) for f, x in reversed(w)): np.conj(c) for w, c in self.terms.items()}
        )

    def is_zero(self) -> bool:
        return not self.terms

    def scalar_value(self) -> Optional[complex]:
        """The coefficient if this is a multiple of the identity, else None."""
        if not self.terms:
            return 0j
        if set(self.terms) == {()}:
            return self.terms[()]
        return None

    def factors(self) -> set:
        return {f for w in self.terms for f, _ in w}

    def to_matrix(self, space: Sequence[Factor], cutoff: int) -> np.ndarray:
        dims = [f.dim(cutoff) for f in space]
        index = {f.label: i for i, f in enumerate(space)}
        total = int(np.prod(dims)) if dims else 1
        out = np.zeros((total, total), dtype=complex)
        for w, c in self.terms.items():
            m = np.eye(total, dtype=complex)
            for f, x in w:
                if f not in index:
                    raise KeyError(f"factor {f!r} is not part of the space")
                m = m @ embed(_atom_matrix(x, dims[index[f]]), [index[f]], dims)
            out += c * m
        return out

    def __repr__(self):
        return f"Operator({format_operator(self)})"


def _fmt_complex(c: complex) -> str:
    c = complex(c)
    re, im = round(c.real, 12), round(c.imag, 12)
    if im == 0:
        return f"{re:g}"
    if re == 0:
        return f"{im:g}i"
    return f"({re:g}{im:+g}i)"


def format_operator(op: Operator) -> str:
    if op.is_zero():
        return "0"
    parts = []
    for w in sorted(op.terms, key=lambda w: (len(w), w)):
        c = op.terms[w]
        letters = " ".join(f"{_ATOM_TEXT[x]}[{f}]" for f, x in w)
        if not letters:
            parts.append(_fmt_complex(c))
        elif c == 1:
            parts.append(letters)
        else:
            parts.append(f"{_fmt_complex(c)}*{letters}")
    return " + ".join(parts)


ZERO = Operator()
ONE = Operator.scalar(1.0)


@dataclass(frozen=True)
class JCParams:
    kappa: float
    gamma: float
    Delta: float = 0.0
    Theta: float = 0.0
    g: float = 1.0
    alpha: complex = 0.0
    fock_cutoff: int = 3

    def __post_init__(self):
        if self.kappa < 0 or self.gamma < 0:
            raise ValueError("rates must be non-negative")
        if self.fock_cutoff < 2:
            raise ValueError("fock_cutoff must be at least 2")


REFERENCE_PARAMS = JCParams(kappa=10.0, gamma=0.1, Delta=0.0, Theta=0.0, g=1.0, alpha=1.0, fock_cutoff=3)


@dataclass(frozen=True)
class SLHTriple:
    S: tuple  # rows of Operators
    L: tuple
    H: Operator
    space: tuple = ()  # Factors, in promotion order

    def __post_init__(self):
        n = len(self.L)
        if len(self.S) != n or any(len(row) != n for row in self.S):
            raise ValueError("S must be n x n for n coupling operators")
        used = set(self.H.factors())
        for op in self.L:
            used |= op.factors()
        for row in self.S:
            for op in row:
                used |= op.factors()
        labels = {f.label for f in self.space}
        if not used <= labels:
            raise ValueError(f"operators act on undeclared factors {sorted(used - labels)}")

    @property
    def n_channels(self) -> int:
        return len(self.L)

    def dims(self, cutoff: int) -> list:
        return [f.dim(cutoff) for f in self.space]

    def matrices(self, cutoff: int = 3):
        """(S blocks as an n x n object grid of matrices, list of L matrices, H matrix)."""
        s = [[op.to_matrix(self.space, cutoff) for op in row] for row in self.S]
        l_ops = [op.to_matrix(self.space, cutoff) for op in self.L]
        return s, l_ops, self.H.to_matrix(self.space, cutoff)

    def scalar_S(self) -> np.ndarray:
        vals = [[op.scalar_value() for op in row] for row in self.S]
        if any(v is None for row in vals for v in row):
            raise ValueError("S has operator-valued entries")
        return np.array(vals, dtype=complex)

    def check(self, cutoff: int = 3, tol: float = TRIPLE_TOL) -> None:
        s, _, h = self.matrices(cutoff)
        n = self.n_channels
        dim = h.shape[0]
        for i in range(n):
            for j in range(n):
                acc = sum(s[i][l] @ dagger(s[j][l]) for l in range(n)) if n else 0
                want = np.eye(dim) if i == j else np.zeros((dim, dim))
                if np.max(np.abs(acc - want)) > tol:
                    raise ValueError("S is not unitary")
        if not is_hermitian(h, tol):
            raise ValueError("H is not Hermitian")

    def describe(self) -> str:
        lines = ["S ="]
        for row in self.S:
            lines.append("  [" + ", ".join(format_operator(op) for op in row) + "]")
        lines.append("L =")
        for op in self.L:
            lines.append("  " + format_operator(op))
        lines.append("H = " + format_operator(self.H))
        return "\n".join(lines)


def _identity_rows(n: int) -> tuple:
    return tuple(tuple(ONE if i == j else ZERO for j in range(n)) for i in range(n))


def _merge_space(s1: Sequence[Factor], s2: Sequence[Factor], shared: Sequence[str] = ()) -> tuple:
    out = list(s1)
    seen = {f.label: f for f in s1}
    for f in s2:
        if f.label in seen:
            if f.label not in shared:
                raise ValueError(f"label collision on factor {f.label!r}")
            if seen[f.label] != f:
                raise ValueError(f"shared factor {f.label!r} has inconsistent kinds")
            continue
        out.append(f)
        seen[f.label] = f
    return tuple(out)


def _union_space(s1: Sequence[Factor], s2: Sequence[Factor]) -> tuple:
    """Space for series composition: the same factor may feed both components."""
    return _merge_space(s1, s2, shared=[f.label for f in s2 if f in s1])


def concatenate(g1: SLHTriple, g2: SLHTriple, shared: Sequence[str] = ()) -> SLHTriple:
    """g1 ⊞ g2: block-diagonal S, stacked L, H1 + H2."""
    space = _merge_space(g1.space, g2.space, shared)
    n1, n2 = g1.n_channels, g2.n_channels
    rows = []
    for i in range(n1):
        rows.append(tuple(g1.S[i]) + (ZERO,) * n2)
    for i in range(n2):
        rows.append((ZERO,) * n1 + tuple(g2.S[i]))
    return SLHTriple(tuple(rows), tuple(g1.L) + tuple(g2.L), g1.H + g2.H, space)


def series(g2: SLHTriple, g1: SLHTriple) -> SLHTriple:
    """g2 ◁ g1 (g1 feeds g2): S2S1, L2 + S2L1, H1 + H2 + (1/2i)(L2†S2L1 - L1†S2†L2)."""
    n = g1.n_channels
    if g2.n_channels != n:
        raise ValueError(f"channel mismatch: {g2.n_channels} vs {n}")
    space = _union_space(g1.space, g2.space)
    s = tuple(tuple(sum((g2.S[i][k] * g1.S[k][j] for k in range(n)), ZERO) for j in range(n)) for i in range(n))
    s2l1 = [sum((g2.S[i][k] * g1.L[k] for k in range(n)), ZERO) for i in range(n)]
    l_ops = tuple(g2.L[i] + s2l1[i] for i in range(n))
    cross = sum((g2.L[i].dag() * s2l1[i] for i in range(n)), ZERO)
    h = g1.H + g2.H + (cross - cross.dag()) * (1 / 2j)
    return SLHTriple(s, l_ops, h, space)


def permutation_triple(perm: Sequence[int]) -> SLHTriple:
    """Scattering-only triple sending input channel perm[i] to output i."""
    perm = list(perm)
    n = len(perm)
    if sorted(perm) != list(range(n)):
        raise ValueError(f"invalid permutation {perm}")
    rows = tuple(tuple(ONE if j == perm[i] else ZERO for j in range(n)) for i in range(n))
    return SLHTriple(rows, (ZERO,) * n, ZERO, ())


def permute_channels(g: SLHTriple, perm: Sequence[int]) -> SLHTriple:
    """Output i of the result is output perm[i] of g."""
    if len(perm) != g.n_channels:
        raise ValueError(f"invalid permutation {list(perm)} for {g.n_channels} channels")
    return series(permutation_triple(perm), g)


def passthrough(n_channels: int = 1) -> SLHTriple:
    return SLHTriple(_identity_rows(n_channels), (ZERO,) * n_channels, ZERO, ())


def laser_triple(alpha: complex, n_channels: int = 1) -> SLHTriple:
    l_ops = (Operator.scalar(alpha),) + (ZERO,) * (n_channels - 1)
    return SLHTriple(_identity_rows(n_channels), l_ops, ZERO, ())


def jc_factors(name: str) -> tuple:
    return Factor(f"tls_{name}", "tls"), Factor(f"fock_{name}", "fock")


def jc_triple(p: JCParams, name: str = "jc") -> SLHTriple:
    """S = I; L = (√κ a, √γ σ); H = Δσ†σ + Θa†a + ig(σa† - σ†a)."""
    atom, field_ = jc_factors(name)
    a = Operator.atom(field_.label, "a")
    s = Operator.atom(atom.label, "s")
    l_ops = (np.sqrt(p.kappa) * a, np.sqrt(p.gamma) * s)
    h = p.Delta * (s.dag() * s) + p.Theta * (a.dag() * a) + 1j * p.g * (s * a.dag() - s.dag() * a)
    return SLHTriple(_identity_rows(2), l_ops, h, (atom, field_))


def jc_cascade_network(p: JCParams) -> SLHTriple:
    """Laser into J-C 1; J-C 1's cavity output into J-C 2; atomic channels crossed."""
    jc1 = jc_triple(p, "jc1")
    jc2 = jc_triple(p, "jc2")
    stage1 = series(concatenate(jc1, passthrough(1)), laser_triple(p.alpha, 3))
    crossed = permute_channels(stage1, [0, 2, 1])
    return series(concatenate(jc2, passthrough(1)), crossed)


def eliminated_jc_triple(p: JCParams, name: str, sign: float) -> SLHTriple:
    """Single-atom limit: L = (sign·(2g/√κ) σ, √γ σ), H = Δ σ†σ."""
    if p.kappa == 0:
        raise ValueError("kappa must be positive for adiabatic elimination")
    atom = Factor(f"tls_{name}", "tls")
    s = Operator.atom(atom.label, "s")
    c = 2 * p.g / np.sqrt(p.kappa)
    return SLHTriple(_identity_rows(2), (sign * c * s, np.sqrt(p.gamma) * s), p.Delta * (s.dag() * s), (atom,))


def adiabatic_jc_cascade(p: JCParams) -> SLHTriple:
    """Two-qubit cascade with both cavities eliminated."""
    if p.kappa == 0:
        raise ValueError("kappa must be positive for adiabatic elimination")
    el1 = eliminated_jc_triple(p, "jc1", -1.0)
    el2 = eliminated_jc_triple(p, "jc2", +1.0)
    stage1 = series(concatenate(el1, passthrough(1)), laser_triple(p.alpha, 3))
    crossed = permute_channels(stage1, [0, 2, 1])
    return series(concatenate(el2, passthrough(1)), crossed)


# -- adiabatic-elimination assumptions ---------------------------------------


@dataclass
class AdiabaticData:
    """K^k = k²Y + kA + B, L_i^k = kF_i + G_i, S^k = W on the pre-limit space."""

    Y: np.ndarray
    A: np.ndarray
    B: np.ndarray
    F: list
    G: list
    W: np.ndarray  # n x n grid flattened into an (n, n, dim, dim) array
    P0: np.ndarray
    P1: np.ndarray

    def __post_init__(self):
        dim = self.Y.shape[0]
        eye = np.eye(dim)
        if np.max(np.abs(self.P0 + self.P1 - eye)) > 1e-9:
            raise ValueError("P0 + P1 must be the identity")
        for p in (self.P0, self.P1):
            if np.max(np.abs(p @ p - p)) > 1e-9 or not is_hermitian(p, 1e-9):
                raise ValueError("P0 and P1 must be projections")
        if len(self.F) != len(self.G):
            raise ValueError("F and G must have one entry per channel")

    @property
    def dim(self) -> int:
        return self.Y.shape[0]

    @property
    def n_channels(self) -> int:
        return len(self.F)

    def K(self, k: float) -> np.ndarray:
        return k * k * self.Y + k * self.A + self.B

    def L(self, k: float) -> list:
        return [k * f + g for f, g in zip(self.F, self.G)]


@dataclass(frozen=True)
class AdiabaticReport:
    assumption1_plus: float  # K + K† - L†L
    assumption1_minus: float  # K + K† + L†L
    s_unitarity: float
    assumption2: float
    assumption3: float
    assumption4: float

    def violated(self, tol: float = 1e-9) -> list:
        out = []
        if min(self.assumption1_plus, self.assumption1_minus) > tol or self.s_unitarity > tol:
            out.append(1)
        for n, r in ((2, self.assumption2), (3, self.assumption3), (4, self.assumption4)):
            if r > tol:
                out.append(n)
        return out


def _mx(a) -> float:
    return float(np.max(np.abs(a), initial=0.0))


def check_adiabatic_assumptions(d: AdiabaticData, k: float) -> AdiabaticReport:
    K = d.K(k)
    Ls = d.L(k)
    dim = d.dim
    ltl = sum((dagger(l) @ l for l in Ls), np.zeros((dim, dim), dtype=complex))
    a1p = _mx(K + dagger(K) - ltl)
    a1m = _mx(K + dagger(K) + ltl)
    n = d.n_channels
    W = np.asarray(d.W, dtype=complex)
    su = 0.0
    for i in range(n):
        for j in range(n):
            want = np.eye(dim) if i == j else np.zeros((dim, dim))
            su = max(su, _mx(sum(W[i, l] @ dagger(W[j, l]) for l in range(n)) - want))
            su = max(su, _mx(sum(dagger(W[l, i]) @ W[l, j] for l in range(n)) - want))
    # the polynomial form is how K and L are built here, so it holds exactly
    a2 = max(_mx(K - (k * k * d.Y + k * d.A + d.B)), max((_mx(l - (k * f + g)) for l, f, g in zip(Ls, d.F, d.G)), default=0.0))
    P0, P1 = d.P0, d.P1
    y1inv = np.linalg.pinv(P1 @ d.Y @ P1, rcond=1e-10)
    a3 = _mx(P1 @ y1inv - y1inv @ P1)
    for z in [d.A] + list(d.F):
        a3 = max(a3, _mx(d.Y @ y1inv @ P1 @ z @ P0 - P1 @ z @ P0))
        a3 = max(a3, _mx(P0 @ z @ P1 @ y1inv @ d.Y - P0 @ z @ P1))
    a4 = max((_mx(P1 @ l) for l in Ls), default=0.0)
    a4 = max(a4, max((_mx(P1 @ W[i, j]) for i in range(n) for j in range(n)), default=0.0))
    return AdiabaticReport(a1p, a1m, su, a2, a3, a4)


# -- network files -------------------------------------------------------------


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    if isinstance(v, str):
        return complex(v.replace("i", "j"))
    return complex(v)


def build_component(name: str, spec: Mapping) -> SLHTriple:
    kind = spec.get("type")
    params = dict(spec.get("params", {}))
    if kind == "jc":
        p = JCParams(
            kappa=float(params.get("kappa", 1.0)),
            gamma=float(params.get("gamma", 0.0)),
            Delta=float(params.get("Delta", 0.0)),
            Theta=float(params.get("Theta", 0.0)),
            g=float(params.get("g", 1.0)),
            alpha=_complex(params.get("alpha", 0.0)),
            fock_cutoff=int(params.get("fock_cutoff", 3)),
        )
        return jc_triple(p, params.get("label", name))
    if kind == "laser":
        return laser_triple(_complex(params.get("alpha", 0.0)), int(params.get("n_channels", 1)))
    if kind == "passthrough":
        return passthrough(int(params.get("n_channels", 1)))
    raise ValueError(f"component {name!r}: unknown type {kind!r}")


def compose_network(spec: Mapping) -> SLHTriple:
    """Evaluate a network description (see ``load_network``)."""
    env = {name: build_component(name, c) for name, c in spec.get("components", {}).items()}
    for step in spec.get("connections", []):
        op = step.get("op")
        args = [env[a] for a in step.get("args", [])]
        if op == "concat":
            if len(args) < 2:
                raise ValueError("concat needs at least two arguments")
            out = args[0]
            for g in args[1:]:
                out = concatenate(out, g)
        elif op == "series":
            if len(args) != 2:
                raise ValueError("series takes [output_side, input_side]")
            out = series(args[0], args[1])
        elif op == "permute":
            if len(args) != 1:
                raise ValueError("permute takes one argument")
            out = permute_channels(args[0], step["perm"])
        else:
            raise ValueError(f"unknown connection op {op!r}")
        env[step["as"]] = out
    target = spec.get("output")
    if target not in env:
        raise ValueError(f"output {target!r} is not defined")
    return env[target]


def load_network(path) -> SLHTriple:
    with open(path, encoding="utf-8") as fh:
        return compose_network(json.load(fh))
