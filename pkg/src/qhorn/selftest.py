"""End-to-end acceptance checks, one per criterion, each against an independent oracle."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from . import dynamics, fockweyl, qprob, qwalk, slh
from .horn import FIXTURE_QUERIES, Registry, fixture_path

SEED = 20240607


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    budget: float

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number}. {self.name}: {self.detail} ({self.seconds:.2f}s of {self.budget:g}s)"


def _rng(seed: Optional[int]) -> np.random.Generator:
    return np.random.default_rng(SEED if seed is None else seed)


def _random_hermitian(rng, m: int) -> np.ndarray:
    a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    return (a + a.conj().T) / 2


def _random_density(rng, m: int) -> np.ndarray:
    a = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    r = a @ a.conj().T
    return r / np.trace(r)


# -- 1: probe protocol --------------------------------------------------------


def check_probe_protocol(seed=None):
    rng = _rng(seed)
    worst_ratio = worst_identity = 0.0
    for m in range(2, 6):
        for _ in range(3):
            spec = qprob.SpectralDecomposition.from_observable(_random_hermitian(rng, m))
            rho = _random_density(rng, m)
            for p in range(m):
                probe = qprob.build_probe_unitary(spec, p)
                worst_identity = max(worst_identity, probe.identity_residual())
                for c in range(m):
                    worst_ratio = max(worst_ratio, abs(probe.conditional_ratio(rho, c) - 1.0))
    ok = worst_ratio < 1e-10 and worst_identity < 1e-10
    return ok, f"max |ratio - 1| = {worst_ratio:.2e}, identity residual {worst_identity:.2e}"


# -- 2: probe disturbance -------------------------------------------------------


def check_probe_disturbance(seed=None):
    rng = _rng(seed)
    sz = qprob.SpectralDecomposition.from_observable(np.diag([1.0, -1.0]))
    sx = qprob.SpectralDecomposition.from_observable(np.array([[0, 1], [1, 0]]))
    rho = np.diag([1.0, 0.0]).astype(complex)
    big = qprob.probe_disturbance(sz, sx, rho)
    small = 0.0
    for m in (2, 3, 4):
        for _ in range(5):
            basis, _ = np.linalg.qr(rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)))
            ea, eb = rng.permutation(m) + 0.0, rng.normal(size=m)
            a = qprob.SpectralDecomposition.from_observable(basis @ np.diag(ea) @ basis.conj().T)
            b = qprob.SpectralDecomposition.from_observable(basis @ np.diag(eb) @ basis.conj().T)
            small = max(small, qprob.probe_disturbance(a, b, _random_density(rng, m)))
    return big > 0.1 and small < 1e-10, f"sigma_z/sigma_x change {big:.3f}, commuting max {small:.2e}"


# -- 3: Hadamard walk --------------------------------------------------------------


def brute_force_walk(steps: int, size: int) -> list:
    """Distributions from the explicit coin-then-shift unitary on positions -size..size."""
    npos = 2 * size + 1
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    shift = np.zeros((2 * npos, 2 * npos))
    for x in range(npos):
        if x + 1 < npos:
            shift[2 * (x + 1), 2 * x] = 1.0  # coin R moves right
        if x - 1 >= 0:
            shift[2 * (x - 1) + 1, 2 * x + 1] = 1.0  # coin L moves left
    u = shift @ np.kron(np.eye(npos), h)
    psi = np.zeros(2 * npos, dtype=complex)
    psi[2 * size] = 1.0
    out = []
    for n in range(steps + 1):
        prob = np.abs(psi.reshape(npos, 2)) ** 2
        out.append(prob.sum(axis=1)[size - n : size + n + 1])
        psi = u @ psi
    return out


def classical_sigma(n: int) -> float:
    p = np.array([1.0])
    for _ in range(n):
        p = np.convolve(p, [0.5, 0.0, 0.5])
    x = np.arange(-n, n + 1)
    return float(np.sqrt(np.sum(p * x**2) - np.sum(p * x) ** 2))


def check_walk(seed=None):
    brute = brute_force_walk(50, 51)
    s = qwalk.WalkState.localized()
    worst = 0.0
    for n in range(51):
        worst = max(worst, float(np.max(np.abs(qwalk.position_distribution(s) - brute[n]))))
        s = qwalk.hadamard_step(s)
    drift = abs(qwalk.hadamard_walk(200).norm() - 1.0)
    ratio = qwalk.walk_sigma(qwalk.hadamard_walk(100)) / qwalk.walk_sigma(qwalk.hadamard_walk(50))
    classical = classical_sigma(100) / classical_sigma(50)
    ok = worst < 1e-10 and drift < 1e-12 and 1.85 <= ratio <= 2.05 and abs(classical - np.sqrt(2)) < 0.05
    return ok, f"oracle gap {worst:.1e}, norm drift {drift:.1e}, sigma ratio {ratio:.3f} (classical {classical:.3f})"


# -- 4: Markov embedding -------------------------------------------------------------


def _random_row(rng, d):
    p = rng.random(d) + 0.05
    return p / p.sum()


def classical_expectation(p, maps, f, n: int) -> np.ndarray:
    """E[f(X_n) | X_0 = s] by enumerating every noise path."""
    d = len(p)
    out = np.zeros(len(f))
    for s in range(len(f)):
        total = 0.0
        for path in np.ndindex(*([d] * n)):
            w, x = 1.0, s
            for k in path:
                w *= p[k]
                x = maps[k][x]
            total += w * f[x]
        out[s] = total
    return out


def check_markov(seed=None):
    rng = _rng(seed)
    unit = 0.0
    for d in range(2, 7):
        for _ in range(5):
            u = qwalk.markov_chain_unitary(_random_row(rng, d))
            unit = max(unit, float(np.max(np.abs(u @ u.conj().T - np.eye(d)))))
    maps = qwalk.build_structure_maps(qwalk.CoinSpec.hadamard(), 4)
    vac = np.array([1.0, 0.0])
    markov = 0.0
    for n in range(1, 5):
        x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        lhs = qwalk.condition_on_past(qwalk.flow(maps, x, n), vac, keep=n - 1)
        rhs = qwalk.flow(maps, maps.theta(0, 0, x), n - 1).matrix
        markov = max(markov, float(np.max(np.abs(lhs - rhs))))
    stats = 0.0
    for _ in range(3):
        p = _random_row(rng, 2)
        phi = rng.integers(0, 3, size=(2, 3))
        emb = qwalk.embed_markov_chain(p, phi)
        f = rng.normal(size=3)
        for n in range(0, 6):
            got = np.real(np.diag(qwalk.condition_on_past(qwalk.flow(emb, np.diag(f), n), vac)))
            stats = max(stats, float(np.max(np.abs(got - classical_expectation(p, phi, f, n)))))
    ok = unit < 1e-12 and markov < 1e-9 and stats < 1e-10
    return ok, f"unitarity {unit:.1e}, Markov residual {markov:.1e}, vacuum statistics {stats:.1e}"


# -- 5: Fock layer ------------------------------------------------------------------------


def check_fock(seed=None):
    rows = fockweyl.fock_invariant_suite(seed=SEED if seed is None else seed)
    ok = all(r[1] for r in rows)
    return ok, "; ".join(f"{name} {'ok' if passed else 'FAIL'} ({detail})" for name, passed, detail in rows)


# -- 6: SLH fixtures --------------------------------------------------------------------------


def _ops(cutoff: int):
    """(a, σ) matrices for one factor of each kind."""
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)
    s = np.array([[0, 1], [0, 0]], dtype=complex)  # |g⟩⟨e| with g = 0
    return a, s


def _on(factor_ops, dims):
    out = np.eye(1)
    for op, d in zip(factor_ops, dims):
        out = np.kron(out, np.eye(d) if op is None else op)
    return out


def printed_cascade(p: slh.JCParams, cutoff: int = 3):
    """The composite S, L, H of the driven two-cavity cascade, typed in from the printed display."""
    a, s = _ops(cutoff)
    dims = [2, cutoff, 2, cutoff]
    a1, a2 = _on([None, a, None, None], dims), _on([None, None, None, a], dims)
    s1, s2 = _on([s, None, None, None], dims), _on([None, None, s, None], dims)
    one = np.eye(int(np.prod(dims)))
    dag = lambda x: x.conj().T  # noqa: E731
    k, al = np.sqrt(p.kappa), p.alpha
    S = np.array([[1, 0, 0], [0, 0, 1], [0, 1, 0]])
    L = [al * one + k * a1 + k * a2, np.sqrt(p.gamma) * s2, np.sqrt(p.gamma) * s1]
    H = (
        p.Delta * dag(s1) @ s1
        + p.Delta * dag(s2) @ s2
        + 1j * p.g * (dag(a1) @ s1 - a1 @ dag(s1))
        + 1j * p.g * (dag(a2) @ s2 - a2 @ dag(s2))
        + 0.5j * (-al * k * dag(a1) + k * np.conj(al) * a1)
        + 0.5j * (-k * (al * one + k * a1) @ dag(a2) + k * (np.conj(al) * one + k * dag(a1)) @ a2)
        + p.Theta * dag(a1) @ a1
        + p.Theta * dag(a2) @ a2
    )
    return S, L, H


def printed_adiabatic(p: slh.JCParams):
    _, s = _ops(2)
    s1, s2 = np.kron(s, np.eye(2)), np.kron(np.eye(2), s)
    one = np.eye(4)
    dag = lambda x: x.conj().T  # noqa: E731
    k, al, g = np.sqrt(p.kappa), p.alpha, p.g
    S = np.array([[1, 0, 0], [0, 0, 1], [0, 1, 0]])
    L = [al * one - 2 * g / k * s1 + 2 * g / k * s2, np.sqrt(p.gamma) * s2, np.sqrt(p.gamma) * s1]
    H = (
        p.Delta * dag(s1) @ s1
        + 1j * al / k * g * dag(s1)
        - 1j * g / k * np.conj(al) * s1
        + p.Delta * dag(s2) @ s2
        - 1j * al / k * g * dag(s2)
        + 1j * g / k * np.conj(al) * s2
        - 2j / p.kappa * g**2 * dag(s1) @ s2
        + 2j / p.kappa * g**2 * s1 @ dag(s2)
    )
    return S, L, H


def _triple_gap(g: slh.SLHTriple, printed, cutoff: int) -> float:
    s_blocks, l_ops, h = g.matrices(cutoff)
    S, L, H = printed
    dim = h.shape[0]
    gap = float(np.max(np.abs(h - H)))
    for i in range(len(L)):
        gap = max(gap, float(np.max(np.abs(l_ops[i] - L[i]))))
        for j in range(len(L)):
            gap = max(gap, float(np.max(np.abs(s_blocks[i][j] - S[i, j] * np.eye(dim)))))
    return gap


def check_slh(seed=None):
    p = replace(slh.REFERENCE_PARAMS, Delta=0.3, Theta=-0.2, alpha=0.7 + 0.4j)
    full = _triple_gap(slh.jc_cascade_network(p), printed_cascade(p, 3), 3)
    elim = _triple_gap(slh.adiabatic_jc_cascade(p), printed_adiabatic(p), 2)
    g1 = slh.jc_triple(p, "u")
    g2 = slh.jc_triple(p, "v")
    g3 = slh.laser_triple(0.5 - 0.2j, 2)
    left = slh.series(g1, slh.series(g2, g3))
    right = slh.series(slh.series(g1, g2), g3)
    assoc = _triple_gap(left, _as_printed(right, 3), 3)
    ok = full < 1e-12 and elim < 1e-12 and assoc < 1e-10
    return ok, f"cascade gap {full:.1e}, eliminated gap {elim:.1e}, associativity {assoc:.1e}"


def _as_printed(g: slh.SLHTriple, cutoff: int):
    s_blocks, l_ops, h = g.matrices(cutoff)
    n = len(l_ops)
    # collapse scalar S blocks back to numbers; operator-valued blocks fail the gap check loudly
    S = np.array([[s_blocks[i][j][0, 0] for j in range(n)] for i in range(n)])
    return S, l_ops, h


# -- 7: dynamics --------------------------------------------------------------------------------


def _exact_states(model: dynamics.LindbladModel, rho0: np.ndarray, t: float) -> np.ndarray:
    n = model.dim
    return (expm(model.liouvillian() * t) @ rho0.ravel()).reshape(n, n)


def check_dynamics(seed=None):
    rng = _rng(seed)
    gamma = 0.5
    sz = np.diag([1.0, -1.0]).astype(complex)
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    plus = np.full((2, 2), 0.5, dtype=complex)
    deph = dynamics.rk4_integrate(dynamics.LindbladModel(np.zeros((2, 2)), (np.sqrt(gamma) * sz,)), plus, 10.0, 0.01)
    deph_err = max(abs(r[0, 1] - 0.5 * np.exp(-2 * gamma * t)) for t, r in zip(deph.times, deph.states))
    excited = np.diag([0.0, 1.0]).astype(complex)
    damp = dynamics.rk4_integrate(dynamics.LindbladModel(np.zeros((2, 2)), (np.sqrt(gamma) * lower,)), excited, 10.0, 0.01)
    damp_err = max(abs(r[1, 1] - np.exp(-gamma * t)) for t, r in zip(damp.times, damp.states))

    run = dynamics.run_jc_cascade(initial="ee", t_max=10.0, dt=1e-3, record_every=10)
    drift = max(abs(z - 1.0) for z in run.observables["trace"])
    min_eig = min(float(np.min(np.linalg.eigvalsh(r))) for r in run.states)

    model = dynamics.lindblad_from_slh(slh.adiabatic_jc_cascade(slh.REFERENCE_PARAMS))
    rho0 = dynamics.product_state("eg")
    exact = _exact_states(model, rho0, 1.0)
    errs = [np.max(np.abs(dynamics.rk4_integrate(model, rho0, 1.0, dt).states[-1] - exact)) for dt in (0.05, 0.025)]
    ratio = errs[0] / errs[1]

    xgap = 0.0
    for _ in range(1000):
        r = dynamics.random_x_state(rng)
        xgap = max(xgap, abs(dynamics.x_state_concurrence(r) - dynamics.wootters_concurrence(r)))
    ok = deph_err < 1e-6 and damp_err < 1e-6 and drift < 1e-8 and min_eig > -1e-7 and 12 <= ratio <= 20 and xgap < 1e-10
    return ok, (
        f"dephasing {deph_err:.1e}, damping {damp_err:.1e}, trace drift {drift:.1e}, min eigenvalue {min_eig:.1e}, "
        f"step-halving ratio {ratio:.2f}, X-state gap {xgap:.1e}"
    )


# -- 8: concurrence at reference parameters --------------------------------------------------------


def check_figure(seed=None):
    peaks = {}
    for label in ("ee", "ge", "gg"):
        run = dynamics.run_jc_cascade(initial=label, t_max=10.0, dt=1e-3, record_every=10)
        peaks[label] = max(run.observables["concurrence"])
    ok = peaks["ee"] > 0.01 and peaks["ge"] < 1e-3 and peaks["gg"] < 1e-3
    return ok, "peak concurrence " + ", ".join(f"{k} {v:.4g}" for k, v in peaks.items()) + " (need ee > 0.01, ge and gg < 0.001)"


# -- 9: Horn engine ---------------------------------------------------------------------------------


def run_fixture(name: str, seed: Optional[int] = None, permute: Optional[Callable] = None) -> tuple:
    """Runs a fixture's query sequence; returns [(goal, outcome, bindings, trace text)] and the registry."""
    reg = Registry.from_file(fixture_path(name), seed=seed)
    if permute is not None:
        reg.clauses = [replace(c, body=permute(c.body)) for c in reg.clauses]
    out = []
    for goal in FIXTURE_QUERIES[name]:
        t = reg.solve(goal)
        out.append((goal, t.outcome, dict(t.bindings), t.to_text()))
    return out, reg


def check_horn(seed=None):
    from .dynamics import wootters_concurrence

    problems = []
    herald, reg = run_fixture("herald.qh", seed)
    conc = wootters_concurrence(reg.world.reduced(["nv1", "nv2"]))
    if herald[0][1] != "proved" or abs(conc - 1.0) > 1e-10:
        problems.append(f"herald {herald[0][1]}, concurrence {conc:.12f}")
    clone, _ = run_fixture("noclone.qh", seed)
    text = clone[0][3]
    if clone[0][1] != "failed" or clone[1][1] != "refuted":
        problems.append(f"no-cloning outcomes {clone[0][1]}/{clone[1][1]}")
    for eq in ("a**2 = a", "a*b = 0", "b**2 = b"):
        if eq not in text:
            problems.append(f"trace lacks {eq!r}")
    for name in FIXTURE_QUERIES:
        base, base_reg = run_fixture(name, seed)
        again, _ = run_fixture(name, seed)
        if [r[3] for r in base] != [r[3] for r in again]:
            problems.append(f"{name}: traces differ between identical runs")
        for perm in (lambda b: tuple(reversed(b)), lambda b: b[1:] + b[:1]):
            other, other_reg = run_fixture(name, seed, perm)
            if [(r[1], r[2]) for r in base] != [(r[1], r[2]) for r in other]:
                problems.append(f"{name}: body permutation changed outcomes or bindings")
            elif not np.allclose(base_reg.world.psi, other_reg.world.psi, atol=1e-12):
                problems.append(f"{name}: body permutation changed the final state")
    detail = f"herald concurrence {conc:.12f}; no-cloning {clone[0][1]}/{clone[1][1]}; {len(FIXTURE_QUERIES)} fixtures braided and replayed"
    if problems:
        detail += "; " + "; ".join(problems)
    return not problems, detail


CRITERIA = [
    (1, "probe protocol", check_probe_protocol, 1.0),
    (2, "probe disturbance", check_probe_disturbance, 1.0),
    (3, "Hadamard walk", check_walk, 10.0),
    (4, "Markov embedding", check_markov, 5.0),
    (5, "Fock layer", check_fock, 30.0),
    (6, "SLH fixtures", check_slh, 5.0),
    (7, "dynamics", check_dynamics, 30.0),
    (8, "concurrence at reference parameters", check_figure, 60.0),
    (9, "Horn engine", check_horn, 10.0),
]


def run_check(number: int, seed: Optional[int] = None) -> CheckResult:
    for num, name, fn, budget in CRITERIA:
        if num == number:
            t0 = time.perf_counter()
            try:
                ok, detail = fn(seed)
            except Exception as exc:  # a crash is a failed criterion, reported with its message
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            dt = time.perf_counter() - t0
            if dt > budget:
                ok, detail = False, detail + f"; over the {budget:g}s budget"
            return CheckResult(num, name, ok, detail, dt, budget)
    raise KeyError(f"no criterion {number}")


def run_all(seed: Optional[int] = None, echo: Optional[Callable[[str], None]] = None) -> list:
    results = []
    for num, *_ in CRITERIA:
        r = run_check(num, seed)
        if echo is not None:
            echo(r.line())
        results.append(r)
    return results
