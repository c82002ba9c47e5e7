"""Projection-lattice quantum logic, Gleason probabilities and the probe protocol.

Projections and density matrices are plain complex ndarrays; the validators
``check_projection`` / ``check_state`` enforce their invariants at the
boundaries of each operation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import (
    RANK_TOL,
    UNITARITY_TOL,
    commutator,
    dagger,
    hermitian_eigen,
    is_hermitian,
    is_unitary,
    kernel_projector,
    kron,
    kron_all,
)

PROJECTION_TOL = 1e-10
STATE_TRACE_TOL = 1e-10
STATE_POSITIVITY_TOL = 1e-9
COMPAT_TOL = 1e-9
PROB_CLIP = 1e-12
EIGEN_GROUP_TOL = 1e-9


class NotConditionable(ValueError):
    """The observable does not lie in the commutant of the conditioning algebra."""


class NullEvent(ValueError):
    """A conditioning event has vanishing probability."""


def check_projection(p, tol: float = PROJECTION_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"projection must be square, got shape {p.shape}")
    if np.max(np.abs(p @ p - p), initial=0.0) > tol or not is_hermitian(p, tol):
        raise ValueError("matrix is not an orthogonal projection")
    return p


def check_state(rho, tol: float = STATE_TRACE_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if not is_hermitian(rho, 1e-9):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValueError(f"density matrix has trace {np.trace(rho).real:.3g}, expected 1")
    if np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)) < -STATE_POSITIVITY_TOL:
        raise ValueError("density matrix has negative eigenvalues")
    return rho


def pure_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class SpectralDecomposition:
    """Distinct eigenvalues of an observable and their spectral projectors."""

    eigenvalues: tuple
    projectors: tuple = field(repr=False)

    def __post_init__(self):
        if len(self.eigenvalues) != len(self.projectors) or not self.projectors:
            raise ValueError("need one projector per eigenvalue")
        vals = np.asarray(self.eigenvalues, dtype=float)
        if len(np.unique(np.round(vals / EIGEN_GROUP_TOL))) != len(vals):
            raise ValueError("eigenvalues must be distinct")
        dim = self.projectors[0].shape[0]
        total = np.zeros((dim, dim), dtype=complex)
        for i, p in enumerate(self.projectors):
            check_projection(p)
            total += p
            for q in self.projectors[i + 1:]:
                if np.max(np.abs(p @ q)) > 1e-9:
                    raise ValueError("spectral projectors are not mutually orthogonal")
        if np.max(np.abs(total - np.eye(dim))) > 1e-9:
            raise ValueError("spectral projectors do not resolve the identity")

    @classmethod
    def from_observable(cls, a, tol: float = EIGEN_GROUP_TOL) -> "SpectralDecomposition":
        eig = hermitian_eigen(a)
        vals, vecs = eig.eigenvalues, eig.eigenvectors
        groups: list[list[int]] = []
        for k, lam in enumerate(vals):
            if groups and abs(lam - vals[groups[-1][0]]) <= tol * max(1.0, abs(lam)):
                groups[-1].append(k)
            else:
                groups.append([k])
        eigenvalues = tuple(float(np.mean(vals[g])) for g in groups)
        projectors = tuple(vecs[:, g] @ vecs[:, g].conj().T for g in groups)
        return cls(eigenvalues, projectors)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    @property
    def is_degenerate(self) -> bool:
        return len(self.eigenvalues) < self.dim

    def matrix(self) -> np.ndarray:
        return sum(lam * p for lam, p in zip(self.eigenvalues, self.projectors))


def gleason_probability(rho, e) -> float:
    """tr(rho E), clipped onto [0, 1] when within ``PROB_CLIP`` of an end."""
    rho = np.asarray(rho, dtype=complex)
    e = np.asarray(e, dtype=complex)
    if rho.shape != e.shape:
        raise ValueError(f"state shape {rho.shape} does not match projection shape {e.shape}")
    p = float(np.real(np.trace(rho @ e)))
    if -PROB_CLIP <= p < 0.0:
        return 0.0
    if 1.0 < p <= 1.0 + PROB_CLIP:
        return 1.0
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"tr(rho E) = {p!r} lies outside [0, 1]; inputs are not a state/projection")
    return p


def _same_shape(p, q):
    if np.shape(p) != np.shape(q):
        raise ValueError(f"shape mismatch {np.shape(p)} vs {np.shape(q)}")


def lattice_meet(p, q) -> np.ndarray:
    """Projector onto range(p) ∩ range(q): the kernel of (I-p) + (I-q)."""
    _same_shape(p, q)
    eye = np.eye(np.shape(p)[0])
    return kernel_projector((eye - p) + (eye - q), RANK_TOL)


def lattice_join(p, q) -> np.ndarray:
    """Projector onto the closed span of range(p) and range(q)."""
    _same_shape(p, q)
    eye = np.eye(np.shape(p)[0])
    return eye - lattice_meet(eye - p, eye - q)


def orthocomplement(p) -> np.ndarray:
    return np.eye(np.shape(p)[0]) - np.asarray(p, dtype=complex)


def is_compatible(p, q, tol: float = COMPAT_TOL) -> bool:
    """True iff p and q commute, i.e. they are co-measurable."""
    return bool(np.max(np.abs(commutator(np.asarray(p), np.asarray(q))), initial=0.0) < tol)


def co_measurable_decomposition(p, q):
    """The mutually orthogonal (a, b, c) with p = a ∨ b and q = a ∨ c, for commuting p, q."""
    if not is_compatible(p, q):
        raise ValueError("projections are not co-measurable")
    return lattice_meet(p, q), lattice_meet(p, orthocomplement(q)), lattice_meet(orthocomplement(p), q)


def check_automorphism(tau, sample: Sequence, tol: float = 1e-9) -> bool:
    """Does E -> tau E tau† preserve 0, 1, ∨, ∧ and ' on the sample?"""
    tau = np.asarray(tau, dtype=complex)
    if not is_unitary(tau, UNITARITY_TOL):
        raise ValueError("tau must be unitary")
    n = tau.shape[0]
    zero = np.zeros((n, n), dtype=complex)
    one = np.eye(n, dtype=complex)

    def act(e):
        return tau @ e @ tau.conj().T

    def close(x, y):
        return np.max(np.abs(x - y), initial=0.0) < tol

    if not (close(act(zero), zero) and close(act(one), one)):
        return False
    sample = [check_projection(e) for e in sample]
    for e in sample:
        if not close(act(orthocomplement(e)), orthocomplement(act(e))):
            return False
    for i, e in enumerate(sample):
        for f in sample[i:]:
            if not close(act(lattice_join(e, f)), lattice_join(act(e), act(f))):
                return False
            if not close(act(lattice_meet(e, f)), lattice_meet(act(e), act(f))):
                return False
    return True


def in_commutant(d, a: SpectralDecomposition, tol: float = COMPAT_TOL) -> bool:
    return all(np.max(np.abs(commutator(d, p))) < tol for p in a.projectors)


def conditional_expectation(d, a: SpectralDecomposition, rho) -> np.ndarray:
    """Sum_i tr(rho d A_i) / tr(rho A_i) * A_i over the spectral projectors A_i of a."""
    d = np.asarray(d, dtype=complex)
    rho = check_state(rho)
    if d.shape != (a.dim, a.dim) or rho.shape != d.shape:
        raise ValueError("dimension mismatch between observable, algebra and state")
    if not in_commutant(d, a):
        raise NotConditionable("not conditionable: observable is outside the commutant")
    out = np.zeros_like(d)
    for p in a.projectors:
        den = np.trace(rho @ p).real
        if den <= 1e-12:
            raise NullEvent("null event: conditioning projector has zero probability")
        out += (np.trace(rho @ d @ p) / den) * p
    return out


def build_xprime(a: int, b: int, basis: Sequence) -> np.ndarray:
    """Swap of levels a and b in the given orthonormal basis (identity when a == b)."""
    vecs = [np.asarray(v, dtype=complex).ravel() for v in basis]
    n = len(vecs)
    if not (0 <= a < n and 0 <= b < n):
        raise IndexError(f"levels ({a}, {b}) out of range for a {n}-vector basis")
    dim = vecs[0].size
    if a == b:
        return np.eye(dim, dtype=complex)
    out = np.outer(vecs[b], vecs[a].conj()) + np.outer(vecs[a], vecs[b].conj())
    for c in range(n):
        if c not in (a, b):
            out += np.outer(vecs[c], vecs[c].conj())
    return out


@dataclass(frozen=True)
class ProbeSystem:
    """System ⊗ probe with the interaction copying an observable into the probe.

    The probe is ``C^m`` with its canonical basis playing the role of the
    pointer eigenvectors; the probe starts in ``pointer_projector(pointer_index)``.
    """

    system_dim: int
    observable: SpectralDecomposition
    pointer_index: int
    unitary: np.ndarray = field(repr=False)

    @property
    def probe_dim(self) -> int:
        return len(self.observable.eigenvalues)

    def pointer_projector(self, c: int) -> np.ndarray:
        p = np.zeros((self.probe_dim, self.probe_dim), dtype=complex)
        p[c, c] = 1.0
        return p

    def heisenberg_pointer(self, c: int) -> np.ndarray:
        """U† (I ⊗ P'_c) U."""
        u = self.unitary
        return dagger(u) @ kron(np.eye(self.system_dim), self.pointer_projector(c)) @ u

    def expected_pointer(self, c: int) -> np.ndarray:
        """Right-hand side of the copy identity for pointer outcome c."""
        P = self.observable.projectors
        if c == self.pointer_index:
            return sum(kron(P[a], self.pointer_projector(a)) for a in range(self.probe_dim))
        eye = np.eye(self.system_dim)
        return kron(P[c], self.pointer_projector(self.pointer_index)) + kron(
            eye - P[c], self.pointer_projector(c)
        )

    def identity_residual(self) -> float:
        return max(
            float(np.max(np.abs(self.heisenberg_pointer(c) - self.expected_pointer(c))))
            for c in range(self.probe_dim)
        )

    def joint_state(self, rho) -> np.ndarray:
        return kron(rho, self.pointer_projector(self.pointer_index))

    def conditional_ratio(self, rho, c: int) -> float:
        """P(pointer reads c and system has c) / P(system has c) before the probe."""
        joint = self.joint_state(check_state(rho))
        sys_proj = kron(self.observable.projectors[c], np.eye(self.probe_dim))
        num = np.trace(joint @ self.heisenberg_pointer(c) @ sys_proj)
        den = np.trace(joint @ sys_proj)
        if abs(den) <= 1e-12:
            raise NullEvent("null event: outcome has zero probability")
        return float(np.real(num / den))

    def copied_statistics(self, rho) -> np.ndarray:
        joint = self.joint_state(check_state(rho))
        return np.array(
            [np.real(np.trace(joint @ self.heisenberg_pointer(c))) for c in range(self.probe_dim)]
        )


def build_probe_unitary(a: SpectralDecomposition, p: int) -> ProbeSystem:
    """U = Sum_a P_a ⊗ X'_{ap} for a non-degenerate observable."""
    m = a.dim
    if a.is_degenerate:
        raise ValueError("degenerate spectral data: the probe needs one pointer level per eigenvalue")
    if not 0 <= p < m:
        raise IndexError(f"pointer index {p} out of range for {m} levels")
    basis = list(np.eye(m, dtype=complex))
    u = sum(kron(P, build_xprime(k, p, basis)) for k, P in enumerate(a.projectors))
    if not is_unitary(u):
        raise ArithmeticError("probe interaction is not unitary")
    return ProbeSystem(m, a, p, u)


def probe_disturbance(a: SpectralDecomposition, b: SpectralDecomposition, rho, pointer: int = 0) -> float:
    """Max change of A's outcome probabilities after probing A then B.

    Works on system ⊗ probe_A ⊗ probe_B, both probes initialised at ``pointer``.
    """
    rho = check_state(rho)
    if a.dim != b.dim or rho.shape != (a.dim, a.dim):
        raise ValueError("observables and state must share the system dimension")
    m = a.dim
    ua = build_probe_unitary(a, pointer).unitary
    ub = build_probe_unitary(b, pointer).unitary
    eye = np.eye(m)
    # U_A on (system, probe_A); U_B on (system, probe_B)
    ua3 = kron(ua, eye)
    ub3 = _on_first_and_third(ub, m)
    start = np.zeros((m, m), dtype=complex)
    start[pointer, pointer] = 1.0
    joint = kron_all(rho, start, start)
    joint = ua3 @ joint @ dagger(ua3)
    joint = ub3 @ joint @ dagger(ub3)
    worst = 0.0
    for P in a.projectors:
        before = np.trace(rho @ P).real
        after = np.trace(joint @ kron_all(P, eye, eye)).real
        worst = max(worst, abs(after - before))
    return float(worst)


def _on_first_and_third(u: np.ndarray, m: int) -> np.ndarray:
    """Lift an operator on factors (0, 1) of an m⊗m space to factors (0, 2) of m⊗m⊗m."""
    t = u.reshape(m, m, m, m)
    full = np.einsum("ikjl,mn->imkjnl", t, np.eye(m))
    return full.reshape(m**3, m**3)
