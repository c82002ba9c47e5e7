import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qhorn import qwalk as qw
from qhorn.linalg import dagger, is_unitary, projector_from_vectors
from qhorn.qprob import check_automorphism

E0 = np.array([1, 0])


def brute_walk(n, coin=(1, 0)):
    """Full coined-walk unitary on positions -n..n, walker ⊗ coin, applied n times."""
    size = 2 * n + 1
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    shift = np.zeros((2 * size, 2 * size))
    for i in range(size):
        if i + 1 < size:
            shift[2 * (i + 1), 2 * i] = 1
        if i - 1 >= 0:
            shift[2 * (i - 1) + 1, 2 * i + 1] = 1
    w = shift @ np.kron(np.eye(size), h)
    psi = np.zeros(2 * size, dtype=complex)
    psi[2 * n : 2 * n + 2] = coin
    for _ in range(n):
        psi = w @ psi
    return (np.abs(psi) ** 2).reshape(size, 2).sum(axis=1)


def random_op(rng, n):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


@pytest.fixture
def hmaps():
    return qw.build_structure_maps(qw.CoinSpec.hadamard(), 4)


def test_identity_coin_maps_are_trivial(rng):
    maps = qw.build_structure_maps(qw.CoinSpec.identity(), 3)
    x = random_op(rng, 3)
    assert np.allclose(maps.theta(0, 0, x), x)
    assert np.allclose(maps.theta(1, 1, x), x)
    assert np.allclose(maps.theta(0, 1, x), 0)


def test_hadamard_maps_unital_and_linear(hmaps, rng):
    assert np.allclose(hmaps.full(np.eye(4)), np.eye(8))
    x, y = random_op(rng, 4), random_op(rng, 4)
    for i in range(2):
        for j in range(2):
            lhs = hmaps.theta(i, j, 2 * x - 3j * y)
            assert np.allclose(lhs, 2 * hmaps.theta(i, j, x) - 3j * hmaps.theta(i, j, y))


def test_coin_spec_rejects_non_unitary():
    with pytest.raises(ValueError):
        qw.CoinSpec(2, np.diag([1, 0.5]), (1, -1))
    with pytest.raises(ValueError):
        qw.build_structure_maps(qw.CoinSpec.hadamard(), 1)


def test_flow_base_case(hmaps, rng):
    x = random_op(rng, 4)
    assert np.allclose(qw.flow_initial(hmaps, np.eye(4)).matrix, np.eye(4))
    assert np.allclose(qw.condition_on_past(qw.flow_initial(hmaps, x), E0), x)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_markov_property(hmaps, rng, n):
    x = random_op(rng, 4)
    jn = qw.flow(hmaps, x, n)
    lhs = qw.condition_on_past(jn, E0, keep=n - 1)
    rhs = qw.flow(hmaps, hmaps.theta(0, 0, x), n - 1).matrix
    assert np.max(np.abs(lhs - rhs)) < 1e-10


@given(st.integers(0, 2**31 - 1), st.integers(1, 3))
def test_flow_star_homomorphism(seed, n):
    rng = np.random.default_rng(seed)
    maps = qw.build_structure_maps(qw.CoinSpec.hadamard(), 3)
    x, y = random_op(rng, 3), random_op(rng, 3)
    jx, jy = qw.flow(maps, x, n).matrix, qw.flow(maps, y, n).matrix
    assert np.max(np.abs(qw.flow(maps, x @ y, n).matrix - jx @ jy)) < 1e-9
    assert np.max(np.abs(qw.flow(maps, dagger(x), n).matrix - dagger(jx))) < 1e-9


def test_flow_step_matches_flow(hmaps, rng):
    x = random_op(rng, 4)
    j1 = qw.flow(hmaps, x, 1)
    assert np.allclose(qw.flow_step(j1, hmaps, x).matrix, qw.flow(hmaps, x, 2).matrix)


def test_flow_is_unitary_conjugation(hmaps, rng):
    x = random_op(rng, 4)
    for n in range(4):
        w = qw.flow_unitary(hmaps, n)
        assert is_unitary(w)
        lifted = np.kron(x, np.eye(2**n))
        assert np.allclose(dagger(w) @ lifted @ w, qw.flow(hmaps, x, n).matrix)


def test_step_map_is_lattice_automorphism(rng):
    maps = qw.build_structure_maps(qw.CoinSpec.hadamard(), 3)
    w = qw.flow_unitary(maps, 2)
    sample = [projector_from_vectors([rng.normal(size=12) for _ in range(k)]) for k in (1, 2, 5)]
    assert check_automorphism(dagger(w), sample)


def test_truncation_guard(hmaps):
    with pytest.raises(qw.TruncationExceeded, match="truncation exceeded"):
        qw.flow(hmaps, np.eye(4), 13)


def test_conditioning_idempotent_and_tower(hmaps, rng):
    j3 = qw.flow(hmaps, random_op(rng, 4), 3)
    c2 = qw.conditioned(j3, E0, 2)
    assert np.allclose(qw.condition_on_past(c2, E0, 2), c2.matrix)
    for m in range(3):
        assert np.allclose(qw.condition_on_past(c2, E0, m), qw.condition_on_past(j3, E0, m))


def test_conditioning_matches_vacuum_matrix_elements(hmaps, rng):
    j2 = qw.flow(hmaps, random_op(rng, 4), 2)
    u, v = rng.normal(size=4), rng.normal(size=4)
    phi = np.kron(E0, E0)
    lhs = u @ qw.condition_on_past(j2, E0) @ v
    rhs = np.kron(u, phi) @ j2.matrix @ np.kron(v, phi)
    assert abs(lhs - rhs) < 1e-12


def test_hadamard_walk_hand_values():
    p1 = qw.position_distribution(qw.hadamard_walk(1))
    assert np.allclose(p1, [0.5, 0, 0.5], atol=1e-15)
    p2 = qw.position_distribution(qw.hadamard_walk(2))
    assert np.allclose(p2, [0.25, 0, 0.5, 0, 0.25], atol=1e-15)
    assert np.array_equal(qw.position_distribution(qw.hadamard_walk(0)), [1.0])


def test_walk_norm_over_200_steps():
    s = qw.WalkState.localized()
    for _ in range(200):
        s = qw.hadamard_step(s)
        assert abs(s.norm() - 1) < 1e-12


@given(st.integers(0, 50))
def test_walk_matches_brute_force(n):
    p = qw.position_distribution(qw.hadamard_walk(n))
    assert np.max(np.abs(p - brute_walk(n))) < 1e-10
    assert abs(p.sum() - 1) < 1e-12
    assert np.all(p[(qw.hadamard_walk(n).positions - n) % 2 == 1] == 0)


def test_walk_is_ballistic():
    ratio = qw.walk_sigma(qw.hadamard_walk(100)) / qw.walk_sigma(qw.hadamard_walk(50))
    assert 1.85 <= ratio <= 2.05


def test_distribution_csv():
    text = qw.distribution_csv(qw.hadamard_walk(1))
    assert text.startswith("x,prob\n") and text.endswith("\n")
    rows = [line.split(",") for line in text.strip().split("\n")[1:]]
    assert [int(r[0]) for r in rows] == [-1, 0, 1]
    assert abs(sum(float(r[1]) for r in rows) - 1) < 1e-12


def test_noise_ops_examples():
    a, ad, lam = qw.discrete_noise_ops(1, 3)
    assert np.allclose(a @ qw.chain_basis_vector([1], 3), qw.chain_basis_vector([], 3))
    vac = qw.chain_basis_vector([], 3)
    _, _, lam3 = qw.discrete_noise_ops(3, 3)
    assert abs(vac @ lam3 @ vac) == 0
    a1, a2 = qw.slot_annihilator(1, 3), qw.slot_annihilator(2, 3)
    assert np.allclose(a1 @ dagger(a2) - dagger(a2) @ a1, 0)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_slot_algebra(k):
    a = qw.slot_annihilator(k, 4)
    assert np.allclose(a @ a, 0)
    lam = dagger(a) @ a
    assert np.allclose(lam @ lam, lam)


def test_count_operator_counts_excitations():
    _, _, lam = qw.discrete_noise_ops(3, 4)
    e = qw.chain_basis_vector([1, 3, 4], 4)
    assert np.allclose(lam @ e, 2 * e)
    sc = qw.signed_count_op(3, 4)
    assert np.allclose(sc @ e, (3 - 4) * e)


def test_noise_cap():
    with pytest.raises(qw.TruncationExceeded):
        qw.discrete_noise_ops(1, 13)


def test_markov_unitary_examples():
    assert np.allclose(qw.markov_chain_unitary([1, 0]), np.eye(2))
    r3 = np.sqrt(3) / 2
    assert np.allclose(qw.markov_chain_unitary([0.25, 0.75]), [[0.5, r3], [-r3, 0.5]])
    with pytest.raises(ValueError, match="pivot degenerate"):
        qw.markov_chain_unitary([0, 1])


@given(st.lists(st.floats(0.01, 1), min_size=1, max_size=6))
def test_markov_unitary_is_orthogonal(weights):
    p = np.array(weights) / np.sum(weights)
    p[-1] = 1 - p[:-1].sum()
    u = qw.markov_chain_unitary(p)
    assert np.max(np.abs(u @ dagger(u) - np.eye(p.size))) < 1e-12
    assert np.allclose(u[0], np.sqrt(p))


def test_identity_chain_embedding():
    maps = qw.embed_markov_chain([0.5, 0.5], [[0, 1, 2], [0, 1, 2]], transition=np.eye(3))
    f = np.diag([1.0, -2.0, 5.0])
    assert np.allclose(maps.theta(0, 0, f), f)


def test_two_state_chain_embedding():
    maps = qw.embed_markov_chain([0.5, 0.5], [[0, 1], [1, 0]])
    f = np.array([3.0, 7.0])
    assert np.allclose(maps.theta(0, 0, np.diag(f)), np.diag(0.5 * f + 0.5 * f[::-1]))
    with pytest.raises(ValueError):
        maps.full(np.ones((2, 2)))


def test_embedding_rejects_inconsistent_tables():
    with pytest.raises(ValueError, match="inconsistent"):
        qw.embed_markov_chain([0.5, 0.5], [[0, 1]])
    with pytest.raises(ValueError, match="inconsistent"):
        qw.embed_markov_chain([0.5, 0.5], [[0, 1], [1, 5]])
    with pytest.raises(ValueError, match="inconsistent"):
        qw.embed_markov_chain([0.5, 0.5], [[0, 1], [1, 0]], transition=np.eye(2))


@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_vacuum_flow_matches_classical_chain(seed, n):
    rng = np.random.default_rng(seed)
    p0 = rng.uniform(0.05, 0.95)
    p = [p0, 1 - p0]
    states = 3
    phi = [list(range(states)), list(rng.integers(0, states, size=states))]
    maps = qw.embed_markov_chain(p, phi)
    t = qw.transition_from_maps(p, phi)
    f = rng.normal(size=states)
    got = qw.condition_on_past(qw.flow(maps, np.diag(f), n), E0)
    want = np.linalg.matrix_power(t, n) @ f
    assert np.max(np.abs(got - np.diag(want))) < 1e-10
