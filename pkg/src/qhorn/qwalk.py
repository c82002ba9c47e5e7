"""Discrete-time quantum stochastic flows and the Hadamard walk.

Operator ordering is always walker ⊗ coin_1 ⊗ coin_2 ⊗ ... with coin_k the
k-th factor of the noise chain.  The walker lives on a ring of
``walker_dim`` sites so that shift operators are unitary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .linalg import UNITARITY_TOL, dagger, is_unitary, kron

MAX_CHAIN_LEN = 12
MAX_FLOW_DIM = 4096
ROW_SUM_TOL = 1e-12

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


class TruncationExceeded(ValueError):
    pass


def ring_shift(n: int, step: int) -> np.ndarray:
    """|x + step mod n⟩⟨x|."""
    s = np.zeros((n, n), dtype=complex)
    for x in range(n):
        s[(x + step) % n, x] = 1.0
    return s


@dataclass(frozen=True)
class CoinSpec:
    """Coin unitary plus the walker step taken for each coin outcome."""

    dimension: int
    coin_unitary: np.ndarray = field(repr=False)
    shifts: tuple

    def __post_init__(self):
        u = np.asarray(self.coin_unitary, dtype=complex)
        if u.shape != (self.dimension, self.dimension) or not is_unitary(u, UNITARITY_TOL):
            raise ValueError("coin must be a unitary d x d matrix")
        if len(self.shifts) != self.dimension:
            raise ValueError("need one shift per coin outcome")

    @classmethod
    def hadamard(cls) -> "CoinSpec":
        return cls(2, HADAMARD, (1, -1))

    @classmethod
    def identity(cls, d: int = 2) -> "CoinSpec":
        return cls(d, np.eye(d, dtype=complex), (0,) * d)

    def step_unitary(self, walker_dim: int) -> np.ndarray:
        """W = S (I ⊗ U_c) with S = Σ_c shift_c ⊗ |c⟩⟨c|."""
        d = self.dimension
        s = np.zeros((walker_dim * d, walker_dim * d), dtype=complex)
        for c, step in enumerate(self.shifts):
            proj = np.zeros((d, d), dtype=complex)
            proj[c, c] = 1.0
            s += kron(ring_shift(walker_dim, step), proj)
        return s @ kron(np.eye(walker_dim), self.coin_unitary)


@dataclass(frozen=True)
class StructureMaps:
    """The homomorphism Θ together with its coin-matrix elements θ_i^j.

    ``homomorphism`` maps a walker operator X to Θ(X) on walker ⊗ coin.
    """

    d: int
    walker_dim: int
    homomorphism: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    unitary: Optional[np.ndarray] = field(default=None, repr=False)
    diagonal_only: bool = False

    def full(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.walker_dim, self.walker_dim):
            raise ValueError(f"walker operator must be {self.walker_dim}x{self.walker_dim}")
        if self.diagonal_only and np.max(np.abs(x - np.diag(np.diag(x))), initial=0.0) > 0:
            raise ValueError("this flow acts on the commutative algebra of functions only")
        return self.homomorphism(x)

    def theta(self, i: int, j: int, x) -> np.ndarray:
        """θ_i^j(X) = (I ⊗ ⟨e_i|) Θ(X) (I ⊗ |e_j⟩)."""
        big = self.full(x).reshape(self.walker_dim, self.d, self.walker_dim, self.d)
        return big[:, i, :, j]

    def table(self, x) -> np.ndarray:
        big = self.full(x).reshape(self.walker_dim, self.d, self.walker_dim, self.d)
        return big.transpose(1, 3, 0, 2)


def build_structure_maps(coin: CoinSpec, walker_dim: int) -> StructureMaps:
    if walker_dim < 2:
        raise ValueError("walker_dim must be at least 2")
    w = coin.step_unitary(walker_dim)
    eye = np.eye(coin.dimension)

    def hom(x):
        return dagger(w) @ kron(x, eye) @ w

    return StructureMaps(coin.dimension, walker_dim, hom, unitary=w)


@dataclass(frozen=True)
class FlowOperator:
    n: int
    matrix: np.ndarray = field(repr=False)
    walker_dim: int
    d: int

    @property
    def dims(self) -> list:
        return [self.walker_dim] + [self.d] * self.n


def _check_cap(walker_dim: int, d: int, n: int):
    if n > MAX_CHAIN_LEN or walker_dim * d**n > MAX_FLOW_DIM:
        raise TruncationExceeded(
            f"truncation exceeded: walker {walker_dim} x coin {d}^{n} is beyond the dense cap"
        )


def _flow_matrix(maps: StructureMaps, n: int, x: np.ndarray) -> np.ndarray:
    if n == 0:
        return np.asarray(x, dtype=complex)
    d = maps.d
    tab = maps.table(x)
    out = None
    for i in range(d):
        for j in range(d):
            blk = tab[i, j]
            if not np.any(blk):
                continue
            unit = np.zeros((d, d), dtype=complex)
            unit[i, j] = 1.0
            term = kron(_flow_matrix(maps, n - 1, blk), unit)
            out = term if out is None else out + term
    if out is None:
        size = maps.walker_dim * d**n
        out = np.zeros((size, size), dtype=complex)
    return out


def flow_initial(maps: StructureMaps, x) -> FlowOperator:
    """j_0(X) = X."""
    x = np.asarray(x, dtype=complex)
    return FlowOperator(0, x.copy(), maps.walker_dim, maps.d)


def flow(maps: StructureMaps, x, n: int) -> FlowOperator:
    """j_n(X) = Σ_ij j_{n-1}(θ_i^j(X)) ⊗ |e_i⟩⟨e_j|."""
    _check_cap(maps.walker_dim, maps.d, n)
    return FlowOperator(n, _flow_matrix(maps, n, np.asarray(x, dtype=complex)), maps.walker_dim, maps.d)


def flow_step(prev: FlowOperator, maps: StructureMaps, x) -> FlowOperator:
    """Advance to j_{prev.n + 1}(X); ``prev`` fixes the step and the dimensions."""
    if (prev.walker_dim, prev.d) != (maps.walker_dim, maps.d):
        raise ValueError("flow operator and structure maps have different dimensions")
    return flow(maps, x, prev.n + 1)


def flow_unitary(maps: StructureMaps, n: int) -> np.ndarray:
    """W_n with j_n(X) = W_n† (X ⊗ I) W_n, for unitarily implemented maps."""
    if maps.unitary is None:
        raise ValueError("structure maps are not unitarily implemented")
    _check_cap(maps.walker_dim, maps.d, n)
    d = maps.d
    w = np.eye(maps.walker_dim, dtype=complex)
    for k in range(n):
        # W^{(0,k+1)} acts on walker and the new coin slot; earlier slots idle
        size = maps.walker_dim * d**k
        lifted = maps.unitary.reshape(maps.walker_dim, d, maps.walker_dim, d)
        rest = d**k
        step = np.einsum("aibj,pq->apibqj", lifted, np.eye(rest)).reshape(size * d, size * d)
        w = step @ kron(w, np.eye(d))
    return w


def condition_on_past(op: FlowOperator, vacuum, keep: Optional[int] = None) -> np.ndarray:
    """E_{keep]}: take the expectation of coin slots keep+1..n in the vacuum vector.

    ``keep`` defaults to 0 (walker only).
    """
    vac = np.asarray(vacuum, dtype=complex).ravel()
    if vac.size != op.d:
        raise ValueError("vacuum vector must live in one coin factor")
    vac = vac / np.linalg.norm(vac)
    keep = 0 if keep is None else int(keep)
    if not 0 <= keep <= op.n:
        raise ValueError(f"keep must lie in [0, {op.n}]")
    lead = op.walker_dim * op.d**keep
    tail = op.d ** (op.n - keep)
    phi = np.ones(1, dtype=complex)
    for _ in range(op.n - keep):
        phi = np.kron(phi, vac)
    t = op.matrix.reshape(lead, tail, lead, tail)
    return np.einsum("t,atbs,s->ab", phi.conj(), t, phi)


def conditioned(op: FlowOperator, vacuum, keep: int) -> FlowOperator:
    return FlowOperator(keep, condition_on_past(op, vacuum, keep), op.walker_dim, op.d)


# -- Hadamard walk ---------------------------------------------------------


@dataclass(frozen=True)
class WalkState:
    """Amplitudes ψ_R, ψ_L on positions x = -n..n (index x + n)."""

    n: int
    psi_r: np.ndarray = field(repr=False)
    psi_l: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.psi_r.shape != (2 * self.n + 1,) or self.psi_l.shape != (2 * self.n + 1,):
            raise ValueError("amplitude arrays must cover positions -n..n")

    @classmethod
    def localized(cls, coin=(1.0, 0.0)) -> "WalkState":
        c = np.asarray(coin, dtype=complex)
        c = c / np.linalg.norm(c)
        return cls(0, np.array([c[0]]), np.array([c[1]]))

    @property
    def positions(self) -> np.ndarray:
        return np.arange(-self.n, self.n + 1)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.psi_r) ** 2 + np.abs(self.psi_l) ** 2)))


def hadamard_step(s: WalkState) -> WalkState:
    r = np.zeros(2 * s.n + 3, dtype=complex)
    l = np.zeros(2 * s.n + 3, dtype=complex)
    # old index k (position k - n) lands at new index k + 2 (moved right) or k (moved left)
    r[2:] = (s.psi_r + s.psi_l) / np.sqrt(2)
    l[:-2] = (s.psi_r - s.psi_l) / np.sqrt(2)
    return WalkState(s.n + 1, r, l)


def hadamard_walk(steps: int, coin=(1.0, 0.0)) -> WalkState:
    if steps < 0:
        raise ValueError("steps must be non-negative")
    s = WalkState.localized(coin)
    for _ in range(steps):
        s = hadamard_step(s)
    return s


def position_distribution(s: WalkState) -> np.ndarray:
    return np.abs(s.psi_r) ** 2 + np.abs(s.psi_l) ** 2


def walk_sigma(s: WalkState) -> float:
    p = position_distribution(s)
    x = s.positions
    mean = np.sum(p * x)
    return float(np.sqrt(np.sum(p * (x - mean) ** 2)))


def distribution_csv(s: WalkState) -> str:
    lines = ["x,prob"]
    for x, p in zip(s.positions, position_distribution(s)):
        lines.append(f"{x},{float(p)!r}")
    return "\n".join(lines) + "\n"


# -- discrete noise ----------------------------------------------------------


def _slot_op(op: np.ndarray, k: int, chain_len: int) -> np.ndarray:
    left = np.eye(2 ** (k - 1))
    right = np.eye(2 ** (chain_len - k))
    return kron(kron(left, op), right)


def _check_chain(n: int, chain_len: int):
    if chain_len > MAX_CHAIN_LEN:
        raise TruncationExceeded(f"truncation exceeded: chain_len {chain_len} > {MAX_CHAIN_LEN}")
    if not 0 <= n <= chain_len:
        raise ValueError(f"need 0 <= n <= chain_len, got n={n}, chain_len={chain_len}")


def slot_annihilator(k: int, chain_len: int) -> np.ndarray:
    """a_k = |e_0⟩⟨e_1| at slot k (1-based)."""
    _check_chain(k, chain_len)
    if k < 1:
        raise ValueError("slots are numbered from 1")
    return _slot_op(np.array([[0, 1], [0, 0]], dtype=complex), k, chain_len)


def discrete_noise_ops(n: int, chain_len: int):
    """(A_n, A_n†, Λ_n) with Λ_n = Σ_{k≤n} a_k† a_k."""
    _check_chain(n, chain_len)
    dim = 2**chain_len
    a = np.zeros((dim, dim), dtype=complex)
    lam = np.zeros((dim, dim), dtype=complex)
    for k in range(1, n + 1):
        ak = slot_annihilator(k, chain_len)
        a += ak
        lam += dagger(ak) @ ak
    return a, dagger(a), lam


def signed_count_op(n: int, chain_len: int) -> np.ndarray:
    """diag(n - 2|U ∩ [1, n]|), the alternative count reading of the basis action."""
    _check_chain(n, chain_len)
    diag = []
    for idx in range(2**chain_len):
        bits = [(idx >> (chain_len - k)) & 1 for k in range(1, chain_len + 1)]
        diag.append(n - 2 * sum(bits[:n]))
    return np.diag(np.asarray(diag, dtype=complex))


def chain_basis_vector(excited: Sequence[int], chain_len: int) -> np.ndarray:
    """e_U: slots in U (1-based) hold e_1, the rest e_0."""
    _check_chain(0, chain_len)
    idx = 0
    for k in excited:
        if not 1 <= k <= chain_len:
            raise ValueError(f"slot {k} out of range")
        idx |= 1 << (chain_len - k)
    v = np.zeros(2**chain_len, dtype=complex)
    v[idx] = 1.0
    return v


# -- classical Markov embedding ---------------------------------------------


def _check_row(p) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < 0) or abs(p.sum() - 1.0) > ROW_SUM_TOL:
        raise ValueError("probabilities must be non-negative and sum to 1")
    return p


def markov_chain_unitary(p_row, d: Optional[int] = None) -> np.ndarray:
    """Real orthogonal U with first row √p, first column (√p_0, -√p_1, ...) and block I - Q."""
    p = _check_row(p_row)
    if d is not None and d != p.size:
        raise ValueError(f"row has {p.size} entries, expected {d}")
    if p[0] <= 0:
        raise ValueError("pivot degenerate: p_0 must be positive")
    r = np.sqrt(p)
    u = np.zeros((p.size, p.size))
    u[0, :] = r
    u[1:, 0] = -r[1:]
    q = np.outer(r[1:], r[1:]) / (1.0 + r[0])
    u[1:, 1:] = np.eye(p.size - 1) - q
    return u.astype(complex)


def check_transition_matrix(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(t < 0) or np.max(np.abs(t.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
        raise ValueError("transition matrix must be row-stochastic")
    return t


def transition_from_maps(p_row, phi_maps) -> np.ndarray:
    p = _check_row(p_row)
    maps = np.asarray(phi_maps, dtype=int)
    n = maps.shape[1]
    t = np.zeros((n, n))
    for k, phi in enumerate(maps):
        for s in range(n):
            t[s, phi[s]] += p[k]
    return t


def embed_markov_chain(p_row, phi_maps, transition=None) -> StructureMaps:
    """Θ(f) = (I ⊗ U) Σ_k diag(f∘φ_k) ⊗ |k⟩⟨k| (I ⊗ U†) on functions of the state set.

    ``phi_maps[k][s]`` is φ_k(s).  If ``transition`` is given it must agree with
    the chain induced by (p, φ).
    """
    p = _check_row(p_row)
    maps = np.asarray(phi_maps, dtype=int)
    if maps.ndim != 2 or maps.shape[0] != p.size:
        raise ValueError("inconsistent map table: need one map per noise outcome")
    n = maps.shape[1]
    if n > 8:
        raise ValueError("state set larger than 8 is out of scope")
    if np.any(maps < 0) or np.any(maps >= n):
        raise ValueError("inconsistent map table: map values outside the state set")
    if transition is not None:
        t = check_transition_matrix(transition)
        if t.shape != (n, n) or np.max(np.abs(t - transition_from_maps(p, maps))) > 1e-12:
            raise ValueError("inconsistent map table: maps do not induce the given transition matrix")
    u = markov_chain_unitary(p)
    d = p.size
    lift = kron(np.eye(n), u)

    def hom(x):
        f = np.diag(x)
        body = np.zeros((n * d, n * d), dtype=complex)
        for k in range(d):
            proj = np.zeros((d, d))
            proj[k, k] = 1.0
            body += kron(np.diag(f[maps[k]]), proj)
        return lift @ body @ dagger(lift)

    return StructureMaps(d, n, hom, unitary=None, diagonal_only=True)
