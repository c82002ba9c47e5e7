"""Dense complex linear algebra shared by every other module.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``; the
functions here are pure and never mutate their inputs.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

HERMITICITY_TOL = 1e-10
RANK_TOL = 1e-10
UNITARITY_TOL = 1e-9

# Jacobi sweeps are O(n^3) in Python-level rotations; above this size the
# LAPACK Hermitian driver is used instead.
JACOBI_MAX_DIM = 32
_MAX_SWEEPS = 100


class HermitianEigen(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).conj().T


def is_hermitian(a: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    a = np.asarray(a)
    return a.shape[0] == a.shape[1] and np.max(np.abs(a - a.conj().T), initial=0.0) < tol


def is_unitary(u: np.ndarray, tol: float = UNITARITY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    eye = np.eye(u.shape[0])
    return bool(np.max(np.abs(u @ u.conj().T - eye), initial=0.0) < tol)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, ``kron(a, b)[i*q + k, j*r + l] = a[i, j] * b[k, l]``."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(*factors: np.ndarray) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for f in factors:
        out = np.kron(out, f)
    return out


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError(f"commutator needs equal square shapes, got {a.shape} and {b.shape}")
    return a @ b - b @ a


def partial_trace(rho: np.ndarray, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    Parameters
    ----------
    rho : ndarray
        Square operator on the product space ``dims[0] x dims[1] x ...``.
    dims : sequence of int
        Subsystem dimensions, first factor most significant.
    keep : iterable of int
        Indices of the subsystems that survive, returned in ascending order.
    """
    rho = np.asarray(rho, dtype=complex)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims)) if dims else 1
    if rho.ndim != 2 or rho.shape != (total, total):
        raise ValueError(f"rho of shape {rho.shape} does not match dims {dims}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    t = rho.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # trace the highest index first so remaining axis numbers stay valid
    for count, i in enumerate(sorted(traced, reverse=True)):
        m = n - count
        t = np.trace(t, axis1=i, axis2=i + m)
    d = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(d, d)


def _jacobi(a: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n, dtype=complex)
    scale = max(np.max(np.abs(a)), 1.0)
    for _ in range(_MAX_SWEEPS):
        off = np.max(np.abs(a - np.diag(np.diag(a))), initial=0.0)
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                app = a[p, p].real
                aqq = a[q, q].real
                theta = (aqq - app) / (2.0 * mag)
                t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # columns p, q of the unitary: phase-align then rotate
                g = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]], dtype=complex)
                idx = [p, q]
                a[:, idx] = a[:, idx] @ g
                a[idx, :] = g.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ g
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    return np.real(np.diag(a)), v


def hermitian_eigen(a: np.ndarray, method: str = "auto") -> HermitianEigen:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.

    ``method`` is ``"jacobi"`` (cyclic complex Jacobi rotations), ``"lapack"``
    or ``"auto"`` (Jacobi up to ``JACOBI_MAX_DIM``).
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"hermitian_eigen needs a square matrix, got {a.shape}")
    if not is_hermitian(a):
        raise ValueError("matrix is not Hermitian")
    a = (a + a.conj().T) / 2
    if a.shape[0] == 0:
        return HermitianEigen(np.zeros(0), np.zeros((0, 0), dtype=complex))
    if method == "auto":
        method = "jacobi" if a.shape[0] <= JACOBI_MAX_DIM else "lapack"
    if method == "jacobi":
        w, v = _jacobi(a, tol=1e-15)
    elif method == "lapack":
        w, v = np.linalg.eigh(a)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(w, kind="stable")
    return HermitianEigen(w[order], v[:, order])


def matrix_exp(a: np.ndarray) -> np.ndarray:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix_exp needs a square matrix, got {a.shape}")
    return scipy.linalg.expm(a)


def projector_from_vectors(vs: Sequence, dim: int | None = None) -> np.ndarray:
    """Orthogonal projector onto the span of ``vs`` (modified Gram-Schmidt).

    Vectors are processed in input order and any residual with norm below
    ``RANK_TOL`` is dropped.  ``dim`` is only needed when ``vs`` is empty.
    """
    vecs = [np.asarray(v, dtype=complex).ravel() for v in vs]
    if vecs:
        dims = {v.size for v in vecs}
        if len(dims) != 1:
            raise ValueError(f"inconsistent vector dimensions {sorted(dims)}")
        dim = dims.pop()
    if not dim:
        raise ValueError("zero-dimensional ambient space")
    basis: list[np.ndarray] = []
    for v in vecs:
        w = v.copy()
        for _ in range(2):  # re-orthogonalise once for stability
            for b in basis:
                w = w - b * np.vdot(b, w)
        nrm = np.linalg.norm(w)
        if nrm > RANK_TOL:
            basis.append(w / nrm)
    p = np.zeros((dim, dim), dtype=complex)
    for b in basis:
        p += np.outer(b, b.conj())
    return p


def range_projector(h: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Projector onto the eigenvectors of a PSD matrix with eigenvalue > tol."""
    eig = hermitian_eigen(h)
    cols = eig.eigenvectors[:, eig.eigenvalues > tol]
    return cols @ cols.conj().T


def kernel_projector(h: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Projector onto the eigenvectors of a PSD matrix with eigenvalue <= tol."""
    eig = hermitian_eigen(h)
    cols = eig.eigenvectors[:, eig.eigenvalues <= tol]
    return cols @ cols.conj().T


def sqrtm_psd(a: np.ndarray) -> np.ndarray:
    eig = hermitian_eigen(a)
    w = np.sqrt(np.clip(eig.eigenvalues, 0.0, None))
    v = eig.eigenvectors
    return (v * w) @ v.conj().T


def embed(op: np.ndarray, targets: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Lift ``op`` acting on subsystems ``targets`` (in that order) to the full space."""
    dims = [int(d) for d in dims]
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValueError(f"repeated target subsystems {targets}")
    sub = [dims[t] for t in targets]
    k = int(np.prod(sub)) if sub else 1
    op = np.asarray(op, dtype=complex)
    if op.shape != (k, k):
        raise ValueError(f"operator shape {op.shape} does not fit subsystems {targets} of {dims}")
    rest = [i for i in range(len(dims)) if i not in targets]
    r = int(np.prod([dims[i] for i in rest])) if rest else 1
    full = np.kron(op, np.eye(r, dtype=complex))
    # full currently orders factors as targets + rest; permute back to natural order
    order = targets + rest
    n = len(dims)
    shape = [dims[i] for i in order]
    t = full.reshape(shape + shape)
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [n + i for i in inv])
    total = int(np.prod(dims)) if dims else 1
    return t.reshape(total, total)
