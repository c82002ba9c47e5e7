"""Lindblad integration, two-qubit concurrence and the driven J-C cascade run."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .linalg import dagger, hermitian_eigen, is_hermitian
from .qprob import check_state
from .slh import REFERENCE_PARAMS, JCParams, SLHTriple, adiabatic_jc_cascade, jc_cascade_network

TRACE_DRIFT_ERROR = 1e-6
X_PATTERN_TOL = 1e-12
SIGMA_Y = np.array([[0, -1j], [1j, 0]])
# zero entries of an X-state (0-based), both triangles
X_ZEROS = [(i, j) for i in range(4) for j in range(4) if i != j and i + j != 3]


class StepSizeError(RuntimeError):
    pass


@dataclass(frozen=True)
class LindbladModel:
    H: np.ndarray = field(repr=False)
    Ls: tuple = field(repr=False)

    def __post_init__(self):
        h = np.asarray(self.H, dtype=complex)
        if not is_hermitian(h, 1e-9):
            raise ValueError("H is not Hermitian")
        for l in self.Ls:
            if np.shape(l) != h.shape:
                raise ValueError("all jump operators must match H's dimension")

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def liouvillian(self) -> np.ndarray:
        """Superoperator on row-major vec(ρ): vec(AρB) = (A ⊗ Bᵀ) vec(ρ)."""
        n = self.dim
        eye = np.eye(n)
        h = np.asarray(self.H, dtype=complex)
        gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        for l in self.Ls:
            l = np.asarray(l, dtype=complex)
            ltl = dagger(l) @ l
            gen += np.kron(l, l.conj()) - 0.5 * np.kron(ltl, eye) - 0.5 * np.kron(eye, ltl.T)
        return gen

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.H @ rho - rho @ self.H)
        for l in self.Ls:
            ltl = dagger(l) @ l
            out += l @ rho @ dagger(l) - 0.5 * (ltl @ rho + rho @ ltl)
        return out


def lindblad_from_slh(g: SLHTriple, cutoff: int = 3) -> LindbladModel:
    """Drops S; keeps H and the coupling vector."""
    _, l_ops, h = g.matrices(cutoff)
    return LindbladModel(h, tuple(l_ops))


@dataclass
class Trajectory:
    times: np.ndarray
    states: list = field(repr=False)
    observables: dict = field(default_factory=dict)

    def series(self, name: str) -> np.ndarray:
        return np.asarray(self.observables[name])

    def to_csv(self, include_rho: bool = False) -> str:
        head = ["t", "trace", "purity", "concurrence"]
        dim = self.states[0].shape[0] if self.states else 0
        if include_rho:
            head += [f"rho_{i}{j}" for i in range(dim) for j in range(dim)]
        lines = [",".join(head)]
        for k, t in enumerate(self.times):
            row = [
                repr(float(t)),
                format_complex(self.observables["trace"][k]),
                repr(float(self.observables["purity"][k])),
                repr(float(self.observables["concurrence"][k])),
            ]
            if include_rho:
                row += [format_complex(z) for z in self.states[k].ravel()]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def format_complex(z) -> str:
    z = complex(z)
    return f"{z.real!r}{'+' if z.imag >= 0 or np.isnan(z.imag) else '-'}{abs(z.imag)!r}j"


def rk4_step_matrix(gen: np.ndarray, dt: float) -> np.ndarray:
    """Exact RK4 propagator for a linear ODE: Σ_{k≤4} (dt·gen)^k / k!."""
    n = gen.shape[0]
    hg = dt * gen
    out = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, 5):
        term = term @ hg / k
        out = out + term
    return out


def rk4_integrate(
    m: LindbladModel,
    rho0,
    t_max: float,
    dt: float,
    record_every: int = 1,
    x_state_check: bool = False,
) -> Trajectory:
    """Fixed-step RK4 on dρ/dt = -i[H, ρ] + Σ (LρL† - ½{L†L, ρ})."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    rho = check_state(rho0).copy()
    if rho.shape != (m.dim, m.dim):
        raise ValueError("initial state does not match the model dimension")
    gen = m.liouvillian()
    norm = np.max(np.sum(np.abs(gen), axis=1), initial=0.0)
    if dt * norm > 1.0:
        warnings.warn(f"dt * |generator| = {dt * norm:.3g}; RK4 may be inaccurate", RuntimeWarning)
    step = rk4_step_matrix(gen, dt)
    n_steps = int(round(t_max / dt))
    n = m.dim
    times, states = [0.0], [rho.copy()]
    vec = rho.ravel()
    for k in range(1, n_steps + 1):
        vec = step @ vec
        r = vec.reshape(n, n)
        r = 0.5 * (r + dagger(r))
        vec = r.ravel()
        drift = abs(np.trace(r) - 1.0)
        if not drift <= TRACE_DRIFT_ERROR:  # also catches overflow to nan
            raise StepSizeError(f"step size too large: trace drift {drift:.3g} at t = {k * dt:.6g}")
        if x_state_check:
            assert_x_state(r)
        if k % record_every == 0 or k == n_steps:
            times.append(k * dt)
            states.append(r.copy())
    return _with_observables(Trajectory(np.array(times), states))


def _with_observables(tr: Trajectory) -> Trajectory:
    tr.observables["trace"] = [complex(np.trace(r)) for r in tr.states]
    tr.observables["purity"] = [float(np.real(np.trace(r @ r))) for r in tr.states]
    if tr.states and tr.states[0].shape == (4, 4):
        tr.observables["concurrence"] = [wootters_concurrence(r, validate=False) for r in tr.states]
    else:
        tr.observables["concurrence"] = [float("nan")] * len(tr.states)
    return tr


def spin_flip(rho: np.ndarray) -> np.ndarray:
    yy = np.kron(SIGMA_Y, SIGMA_Y)
    return yy @ rho.conj() @ yy


def wootters_concurrence(rho, validate: bool = True) -> float:
    """max(0, λ1 - λ2 - λ3 - λ4) with λ the singular values of τ = Aᵀ(σy⊗σy)A, ρ = AA†.

    The λ equal the square roots of eig(√ρ ρ̃ √ρ) but avoid square roots of
    rounding-level eigenvalues, which matter for pure states.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError("concurrence needs a two-qubit (4 x 4) state")
    if validate:
        rho = check_state(rho, tol=1e-9)
    eig = hermitian_eigen(0.5 * (rho + dagger(rho)))
    a = eig.eigenvectors * np.sqrt(np.clip(eig.eigenvalues, 0.0, None))
    lam = np.linalg.svd(a.T @ np.kron(SIGMA_Y, SIGMA_Y) @ a, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def x_state_concurrence(rho) -> float:
    """2 max(0, |ρ14| - √(ρ22ρ33), |ρ23| - √(ρ11ρ44))."""
    r = np.asarray(rho)
    d = np.real(np.diag(r))
    a = abs(r[0, 3]) - np.sqrt(max(d[1] * d[2], 0.0))
    b = abs(r[1, 2]) - np.sqrt(max(d[0] * d[3], 0.0))
    return float(2 * max(0.0, a, b))


def is_x_state(rho, tol: float = X_PATTERN_TOL) -> bool:
    r = np.asarray(rho)
    return r.shape == (4, 4) and max(abs(r[i, j]) for i, j in X_ZEROS) < tol


def assert_x_state(rho, tol: float = X_PATTERN_TOL):
    if not is_x_state(rho, tol):
        worst = max(abs(rho[i, j]) for i, j in X_ZEROS)
        raise AssertionError(f"X-pattern broken: off-pattern entry {worst:.3g}")


def random_x_state(rng: np.random.Generator) -> np.ndarray:
    """Random valid X-state: positivity reduces to two 2x2 blocks."""
    p = rng.dirichlet(np.ones(4))
    c14 = np.sqrt(p[0] * p[3]) * rng.uniform() * np.exp(2j * np.pi * rng.uniform())
    c23 = np.sqrt(p[1] * p[2]) * rng.uniform() * np.exp(2j * np.pi * rng.uniform())
    rho = np.diag(p).astype(complex)
    rho[0, 3], rho[3, 0] = c14, np.conj(c14)
    rho[1, 2], rho[2, 1] = c23, np.conj(c23)
    return rho


BASIS_LABELS = {"gg": 0, "ge": 1, "eg": 2, "ee": 3}


def product_state(label: str) -> np.ndarray:
    """|xy⟩⟨xy| with x the first cavity's atom; g = 0, e = 1."""
    if label not in BASIS_LABELS:
        raise ValueError(f"initial state must be one of {sorted(BASIS_LABELS)}")
    rho = np.zeros((4, 4), dtype=complex)
    k = BASIS_LABELS[label]
    rho[k, k] = 1.0
    return rho


def run_jc_cascade(
    p: JCParams = REFERENCE_PARAMS,
    initial: str = "ee",
    t_max: float = 10.0,
    dt: float = 1e-3,
    record_every: int = 1,
) -> Trajectory:
    """Integrates the eliminated two-atom cascade from a product initial state.

    The X-pattern is asserted at every step when the drive vanishes; a drive
    adds single-σ terms to H that mix the two X blocks.
    """
    model = lindblad_from_slh(adiabatic_jc_cascade(p))
    return rk4_integrate(
        model, product_state(initial), t_max, dt, record_every=record_every, x_state_check=(p.alpha == 0)
    )


def run_full_cascade(p: JCParams, initial: str = "ee", t_max: float = 1.0, dt: float = 1e-3, record_every: int = 10):
    """Pre-elimination cascade at ``p.fock_cutoff``; atoms reduced for concurrence."""
    from .linalg import partial_trace

    g = jc_cascade_network(p)
    model = lindblad_from_slh(g, p.fock_cutoff)
    c = p.fock_cutoff
    atoms = product_state(initial)
    vac = np.zeros((c, c), dtype=complex)
    vac[0, 0] = 1.0
    # factor order: atom1, field1, atom2, field2
    a1 = np.diag(np.diag(atoms).reshape(2, 2).sum(axis=1))
    a2 = np.diag(np.diag(atoms).reshape(2, 2).sum(axis=0))
    rho0 = np.kron(np.kron(np.kron(a1, vac), a2), vac)
    tr = rk4_integrate(model, rho0, t_max, dt, record_every=record_every)
    dims = [2, c, 2, c]
    reduced = [partial_trace(r, dims, [0, 2]) for r in tr.states]
    tr.observables["concurrence"] = [wootters_concurrence(r, validate=False) for r in reduced]
    return tr
