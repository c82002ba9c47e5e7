"""Symbolic Fock layer over the unit-rate Poisson space on [0, T].

Vectors are finite sums of exponential vectors e(f) with f piecewise constant
on a shared uniform grid, so every integral below is an exact finite sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

GRID_TOL = 1e-12
PHASE_TOL = 1e-10


@dataclass(frozen=True)
class TestFunction:
    """Piecewise-constant complex function on K uniform cells of [0, T]."""

    __test__ = False  # not a pytest class

    horizon: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex).ravel()
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if vals.size < 1:
            raise ValueError("need at least one grid cell")
        if not np.all(np.isfinite(vals)):
            raise ValueError("test function values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, c: complex, horizon: float, cells: int = 1) -> "TestFunction":
        return cls(horizon, np.full(cells, c, dtype=complex))

    @classmethod
    def from_callable(cls, fn: Callable[[float], complex], horizon: float, cells: int) -> "TestFunction":
        mids = (np.arange(cells) + 0.5) * horizon / cells
        return cls(horizon, np.array([fn(t) for t in mids], dtype=complex))

    @property
    def cells(self) -> int:
        return self.values.size

    @property
    def dt(self) -> float:
        return self.horizon / self.cells

    def same_grid(self, other: "TestFunction") -> bool:
        return self.cells == other.cells and abs(self.horizon - other.horizon) <= GRID_TOL

    def require_grid(self, other: "TestFunction"):
        if not self.same_grid(other):
            raise ValueError(
                f"grid mismatch: ({self.horizon}, {self.cells}) vs ({other.horizon}, {other.cells})"
            )

    def __add__(self, other: "TestFunction") -> "TestFunction":
        self.require_grid(other)
        return TestFunction(self.horizon, self.values + other.values)

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        self.require_grid(other)
        return TestFunction(self.horizon, self.values - other.values)

    def __mul__(self, c: complex) -> "TestFunction":
        return TestFunction(self.horizon, self.values * c)

    __rmul__ = __mul__

    def refine(self, factor: int = 2) -> "TestFunction":
        return TestFunction(self.horizon, np.repeat(self.values, factor))

    def overlap_weights(self, t: float) -> np.ndarray:
        """Length of [0, t] ∩ cell, per cell."""
        if not 0.0 <= t <= self.horizon + GRID_TOL:
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        left = np.arange(self.cells) * self.dt
        return np.clip(t - left, 0.0, self.dt)

    def indicator(self, t: float) -> "TestFunction":
        """χ_[0,t] on the same grid; requires t on a grid node."""
        w = self.overlap_weights(t) / self.dt
        if np.any((w > GRID_TOL) & (w < 1 - GRID_TOL)):
            raise ValueError("indicator time must fall on a grid node")
        return TestFunction(self.horizon, np.round(w).astype(complex))

    def integral(self, t: float | None = None) -> complex:
        """∫_0^t f."""
        t = self.horizon if t is None else t
        return complex(np.sum(self.overlap_weights(t) * self.values))

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.dt)

    def value_at(self, s) -> np.ndarray:
        idx = np.minimum((np.asarray(s) / self.dt).astype(int), self.cells - 1)
        return self.values[idx]


def l2_inner(f: TestFunction, g: TestFunction) -> complex:
    """⟨f, g⟩ = ∫ conj(f) g, antilinear in the first slot."""
    f.require_grid(g)
    return complex(np.sum(np.conj(f.values) * g.values) * f.dt)


def restricted_inner(t: float, f: TestFunction, g: TestFunction) -> complex:
    """⟨f 1_[0,t], g⟩."""
    f.require_grid(g)
    return complex(np.sum(f.overlap_weights(t) * np.conj(f.values) * g.values))


def kernel(f: TestFunction, g: TestFunction) -> complex:
    """⟨e(f), e(g)⟩ = exp(⟨f, g⟩ - T)."""
    return complex(np.exp(l2_inner(f, g) - f.horizon))


@dataclass(frozen=True)
class ExponentialVectorSum:
    """Σ c_k e(f_k); the empty sum is the zero vector on ``grid``."""

    terms: tuple
    grid: TestFunction = field(repr=False)

    def __post_init__(self):
        for c, f in self.terms:
            self.grid.require_grid(f)
            if not np.isfinite(c):
                raise ValueError("non-finite coefficient")

    @classmethod
    def single(cls, f: TestFunction, coeff: complex = 1.0) -> "ExponentialVectorSum":
        return cls(((complex(coeff), f),), f)

    @classmethod
    def zero(cls, grid: TestFunction) -> "ExponentialVectorSum":
        return cls((), grid)

    def __add__(self, other: "ExponentialVectorSum") -> "ExponentialVectorSum":
        self.grid.require_grid(other.grid)
        return ExponentialVectorSum(self.terms + other.terms, self.grid)

    def __sub__(self, other: "ExponentialVectorSum") -> "ExponentialVectorSum":
        return self + other.scale(-1.0)

    def scale(self, c: complex) -> "ExponentialVectorSum":
        return ExponentialVectorSum(tuple((c * a, f) for a, f in self.terms), self.grid)

    def __len__(self):
        return len(self.terms)


def _as_sum(v) -> ExponentialVectorSum:
    if isinstance(v, TestFunction):
        return ExponentialVectorSum.single(v)
    return v


def exp_inner(u, v) -> complex:
    """Sesquilinear extension of the exponential-vector kernel."""
    u, v = _as_sum(u), _as_sum(v)
    u.grid.require_grid(v.grid)
    total = 0j
    for a, f in u.terms:
        for b, g in v.terms:
            total += np.conj(a) * b * kernel(f, g)
    return complex(total)


def gram_matrix(fs: Sequence[TestFunction]) -> np.ndarray:
    return np.array([[kernel(f, g) for g in fs] for f in fs])


def weyl_apply(f: TestFunction, v) -> ExponentialVectorSum:
    """W(f) e(g) = exp(-⟨f, g⟩ - ½‖f‖²) e(f + g), termwise."""
    v = _as_sum(v)
    f.require_grid(v.grid)
    half = 0.5 * f.norm2()
    terms = tuple((a * np.exp(-l2_inner(f, g) - half), f + g) for a, g in v.terms)
    return ExponentialVectorSum(terms, v.grid)


def weyl_compose_check(f: TestFunction, g: TestFunction, probes: Iterable[TestFunction]) -> complex:
    """The scalar c with W(f)W(g) e(p) = c W(f+g) e(p) for every probe p."""
    c = None
    for p in probes:
        lhs = weyl_apply(f, weyl_apply(g, p)).terms[0]
        rhs = weyl_apply(f + g, p).terms[0]
        if np.max(np.abs(lhs[1].values - rhs[1].values)) > 1e-12:
            raise ArithmeticError("Weyl composition landed on different exponential vectors")
        ratio = lhs[0] / rhs[0]
        if c is None:
            c = ratio
        elif abs(ratio - c) > PHASE_TOL:
            raise ArithmeticError(f"inconsistent composition phase across probes: {c} vs {ratio}")
    if c is None:
        raise ValueError("need at least one probe")
    return complex(c)


def expected_compose_phase(f: TestFunction, g: TestFunction) -> complex:
    return complex(np.exp(-1j * l2_inner(f, g).imag))


def gauge_elem(t: float, u: TestFunction, v: TestFunction) -> complex:
    """⟨e(u), Λ_t e(v)⟩ = ⟨u 1_[0,t], v⟩ exp(⟨u, v⟩ - T)."""
    return restricted_inner(t, u, v) * kernel(u, v)


def annihilation_elem(t: float, u: TestFunction, v: TestFunction) -> complex:
    """⟨e(u), A_t e(v)⟩ = (∫_0^t v) ⟨e(u), e(v)⟩."""
    u.require_grid(v)
    return v.integral(t) * kernel(u, v)


def creation_elem(t: float, u: TestFunction, v: TestFunction) -> complex:
    """⟨e(u), A†_t e(v)⟩ = conj(∫_0^t u) ⟨e(u), e(v)⟩."""
    u.require_grid(v)
    return np.conj(u.integral(t)) * kernel(u, v)


def identity_elem(u: TestFunction, v: TestFunction) -> complex:
    return kernel(u, v)


def sum_elem(elem: Callable, u, v) -> complex:
    """Sesquilinear extension of a matrix-element function to exponential-vector sums."""
    u, v = _as_sum(u), _as_sum(v)
    return complex(sum(np.conj(a) * b * elem(f, g) for a, f in u.terms for b, g in v.terms))


def creation_difference(t: float, v: TestFunction, eps: float = 1e-4) -> ExponentialVectorSum:
    """Central difference [e(v + εχ) - e(v - εχ)] / 2ε ≈ A†_t e(v)."""
    chi = v.indicator(t)
    plus = ExponentialVectorSum.single(v + chi * eps, 1 / (2 * eps))
    minus = ExponentialVectorSum.single(v - chi * eps, -1 / (2 * eps))
    return plus + minus


def ccr_defect(t: float, u: TestFunction, v: TestFunction, eps: float = 1e-4) -> complex:
    """⟨e(u), (A_t A†_t - A†_t A_t) e(v)⟩ - t ⟨e(u), e(v)⟩ via finite-difference creation."""
    aa_dag = exp_inner(creation_difference(t, u, eps), creation_difference(t, v, eps))
    a_dag_a = np.conj(u.integral(t)) * v.integral(t) * kernel(u, v)
    return complex(aa_dag - a_dag_a - t * kernel(u, v))


def coherent_expectation(x_elems: Callable[[TestFunction, TestFunction], complex], f: TestFunction) -> complex:
    """ℙ_f(X) = ⟨e(f), X e(f)⟩ exp(T - ‖f‖²)."""
    return complex(x_elems(f, f) * np.exp(f.horizon - f.norm2()))


def poisson_mc_oracle(
    t: float,
    f: TestFunction,
    samples: int,
    seed: int,
    method: str = "direct",
    return_stderr: bool = False,
):
    """Monte-Carlo estimate of E_f[N_t] under the coherent law.

    ``direct`` samples jump configurations of the Poisson process with
    intensity |f|² cell by cell; ``reweight`` samples unit-rate configurations
    on [0, T] and weights each by ∏|f(t_i)|² exp(T - ‖f‖²).
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    f.overlap_weights(t)  # range check
    rng = np.random.default_rng(seed)
    if method == "direct":
        rates = np.abs(f.values) ** 2 * f.dt
        counts = rng.poisson(rates, size=(samples, f.cells))
        frac = f.overlap_weights(t) / f.dt
        # each jump is uniform inside its cell; keep those before t
        kept = rng.binomial(counts, np.clip(frac, 0.0, 1.0))
        values = kept.sum(axis=1).astype(float)
    elif method == "reweight":
        n_jumps = rng.poisson(f.horizon, size=samples)
        values = np.empty(samples)
        scale = np.exp(f.horizon - f.norm2())
        for k, n in enumerate(n_jumps):
            times = rng.uniform(0.0, f.horizon, size=n)
            w = np.prod(np.abs(f.value_at(times)) ** 2) * scale
            values[k] = w * np.count_nonzero(times <= t)
    else:
        raise ValueError(f"unknown method {method!r}")
    mean = float(values.mean())
    if return_stderr:
        return mean, float(values.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return mean


def fock_invariant_suite(seed: int = 20240607, samples: int = 100_000) -> list:
    """Runs the Fock-layer invariants; returns (name, passed, detail) rows."""
    rng = np.random.default_rng(seed)
    horizon, cells = 1.0, 8
    rows = []

    def rand_f(scale=0.8):
        return TestFunction(horizon, scale * (rng.normal(size=cells) + 1j * rng.normal(size=cells)))

    fs = [rand_f() for _ in range(5)]
    min_eig = float(np.min(np.linalg.eigvalsh(gram_matrix(fs))))
    rows.append(("gram_psd", min_eig > -1e-10, f"min eigenvalue {min_eig:.3e}"))

    f = rand_f(0.5)
    us = ExponentialVectorSum(tuple((complex(rng.normal()), rand_f()) for _ in range(3)), f)
    vs = ExponentialVectorSum(tuple((complex(rng.normal()), rand_f()) for _ in range(3)), f)
    before = exp_inner(us, vs)
    after = exp_inner(weyl_apply(f, us), weyl_apply(f, vs))
    err = abs(after - before) / max(1.0, abs(before))
    rows.append(("weyl_unitary", err < 1e-12, f"relative error {err:.3e}"))

    g = rand_f(0.5)
    try:
        c = weyl_compose_check(f, g, [rand_f() for _ in range(4)])
        dev = abs(c - expected_compose_phase(f, g))
        rows.append(("weyl_phase", dev < 1e-10, f"phase {c:.6f}, deviation {dev:.3e}"))
    except ArithmeticError as exc:
        rows.append(("weyl_phase", False, str(exc)))

    c0 = 1.0
    const = TestFunction.constant(c0, horizon, 10)
    exact = coherent_expectation(lambda u, v: gauge_elem(1.0, u, v), const).real
    mc = poisson_mc_oracle(1.0, const, samples, seed)
    rel = abs(mc - exact) / exact
    rows.append(("gauge_vs_mc", rel < 0.02, f"exact {exact:.4f}, mc {mc:.4f}, rel {rel:.3e}"))

    u1, v1 = rand_f(0.5), rand_f(0.5)
    ccr = abs(ccr_defect(0.5, u1, v1)) / abs(kernel(u1, v1))
    rows.append(("ccr", ccr < 1e-6, f"relative defect {ccr:.3e}"))
    return rows
