from __future__ import annotations

import itertools

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from cavity_qram import fock
from cavity_qram.noise import lindblad_evolve


def brute_force_dim(num_modes, per_mode, global_cutoff):
    return sum(
        1
        for occ in itertools.product(range(per_mode + 1), repeat=num_modes)
        if global_cutoff is None or sum(occ) <= global_cutoff
    )


def channel_from_lindblad(H, jumps, dim, duration):
    """Superoperator columns from evolving every |m><n|."""
    inputs = np.zeros((dim * dim, dim, dim), dtype=complex)
    for k in range(dim * dim):
        inputs[k].flat[k] = 1.0
    traj = lindblad_evolve((H, duration), jumps, inputs, rtol=1e-11, atol=1e-13)
    return traj.final.reshape(dim * dim, dim * dim).T


# ---------------------------------------------------------------------------
# Basis construction
# ---------------------------------------------------------------------------


def test_twelve_mode_global_two_has_dimension_91():
    b = fock.build_basis(12, 2, 2)
    assert b.dim == 91 == brute_force_dim(12, 2, 2)


def test_single_mode_cutoff_three():
    assert fock.build_basis(1, 3).dim == 4


def test_two_modes_single_excitation_states():
    b = fock.build_basis(2, 1, 1)
    assert b.dim == 3
    assert set(b.state_list) == {(0, 0), (1, 0), (0, 1)}


def test_ancilla_triples_dimension():
    b = fock.build_basis(2, 2, None, 3)
    assert b.dim == 27 and b.mode_dim == 9
    assert b.state_list[0] == (0, 0, 0)


def test_ordering_is_lexicographic():
    b = fock.build_basis(3, 2, 3, 3)
    assert list(b.state_list) == sorted(b.state_list)


@pytest.mark.parametrize("bad", [dict(num_modes=0, per_mode_cutoff=1), dict(num_modes=2, per_mode_cutoff=-1),
                                 dict(num_modes=2, per_mode_cutoff=1, ancilla_levels=2)])
def test_invalid_basis_rejected(bad):
    with pytest.raises(ValueError):
        fock.build_basis(**bad)


@settings(max_examples=40, deadline=None)
@given(
    num_modes=st.integers(1, 5),
    per_mode=st.integers(0, 3),
    global_cutoff=st.one_of(st.none(), st.integers(0, 4)),
)
def test_basis_bijective_and_counted(num_modes, per_mode, global_cutoff):
    b = fock.build_basis(num_modes, per_mode, global_cutoff)
    assert b.dim == brute_force_dim(num_modes, per_mode, global_cutoff)
    assert len(set(b.state_list)) == b.dim
    for i, s in enumerate(b.state_list):
        assert b.index_map[s] == i
        assert max(s) <= per_mode
        assert global_cutoff is None or sum(s) <= global_cutoff


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


def test_mode_operator_examples():
    b = fock.build_basis(1, 3)
    a = fock.mode_operator(b, 0, "annihilate")
    n = fock.mode_operator(b, 0, "number")
    np.testing.assert_allclose(a @ b.ket([1]), b.ket([0]))
    np.testing.assert_allclose(n @ b.ket([2]), 2 * b.ket([2]))
    np.testing.assert_allclose(a @ b.ket([0]), 0)


def test_creation_truncates_instead_of_wrapping():
    b = fock.build_basis(2, 2, 2)
    ad = fock.mode_operator(b, 0, "create")
    assert np.allclose(ad @ b.ket([1, 1]), 0)
    assert np.allclose(ad @ b.ket([2, 0]), 0)
    np.testing.assert_allclose(ad @ b.ket([1, 0]), np.sqrt(2) * b.ket([2, 0]))


@pytest.mark.parametrize("cutoff", [1, 2, 4])
def test_commutator_is_identity_below_cutoff(cutoff):
    b = fock.build_basis(2, cutoff)
    a = fock.mode_operator(b, 1, "annihilate")
    comm = (a @ a.conj().T - a.conj().T @ a).toarray()
    below = b.occupations()[:, 1] < cutoff
    np.testing.assert_allclose(comm[np.ix_(below, below)], np.eye(below.sum()), atol=1e-14)


def test_ancilla_operator_examples():
    b = fock.build_basis(1, 1, None, 3)
    sz = fock.ancilla_operator(b, "sigma_z_gf")
    g, e, f = (b.ket([0], k) for k in range(3))
    np.testing.assert_allclose(sz @ g, g)
    np.testing.assert_allclose(sz @ f, -f)
    np.testing.assert_allclose(sz @ e, 0)
    np.testing.assert_allclose(fock.ancilla_operator(b, "hadamard_gf") @ g, (g + f) / np.sqrt(2))
    np.testing.assert_allclose(fock.ancilla_operator(b, "lower_ge") @ e, g)


def test_ancilla_operator_acts_as_identity_on_modes():
    b = fock.build_basis(2, 1, None, 3)
    P = fock.ancilla_operator(b, "proj_g").toarray()
    np.testing.assert_allclose(P[: b.mode_dim, : b.mode_dim], np.eye(b.mode_dim))


def test_ancilla_operator_needs_ancilla():
    with pytest.raises(ValueError):
        fock.ancilla_operator(fock.build_basis(2, 1), "proj_g")


# ---------------------------------------------------------------------------
# Unitary evolution
# ---------------------------------------------------------------------------


def test_zero_hamiltonian_is_identity(rng):
    b = fock.build_basis(2, 2)
    psi = rng.normal(size=b.dim) + 1j * rng.normal(size=b.dim)
    out = fock.evolve_unitary(sp.csr_matrix((b.dim, b.dim), dtype=complex), 1.3, psi)
    np.testing.assert_allclose(out, psi)


def test_beamsplitter_generator_matches_dense_expm():
    b = fock.build_basis(2, 1, 1)
    bm = fock.mode_operator(b, 0, "annihilate")
    cm = fock.mode_operator(b, 1, "annihilate")
    G = (np.pi / 4) * (cm.conj().T @ bm - bm.conj().T @ cm)
    H = (1j * G).tocsr()  # exp(-i H) = exp(G)
    out = fock.evolve_unitary(H, 1.0, b.ket([1, 0]))
    oracle = scipy.linalg.expm(G.toarray()) @ b.ket([1, 0])
    np.testing.assert_allclose(out, oracle, atol=1e-12)
    assert abs(abs(out @ b.ket([0, 1])) - 1 / np.sqrt(2)) < 1e-12


def test_sparse_path_matches_dense(rng):
    b = fock.build_basis(3, 2)
    A = rng.normal(size=(b.dim, b.dim)) + 1j * rng.normal(size=(b.dim, b.dim))
    H = sp.csr_matrix(A + A.conj().T)
    psi = rng.normal(size=b.dim) + 0j
    dense = fock.evolve_unitary(H, 0.2, psi)
    sparse = fock.evolve_unitary(H, 0.2, psi, dense_limit=1)
    np.testing.assert_allclose(dense, sparse, atol=1e-10)


def test_non_hermitian_rejected():
    b = fock.build_basis(1, 2)
    with pytest.raises(ValueError):
        fock.evolve_unitary(fock.mode_operator(b, 0, "annihilate"), 1.0, b.ket([1]))


@pytest.mark.property
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), t=st.floats(0.0, 5.0))
def test_unitary_evolution_preserves_norm(seed, t):
    r = np.random.default_rng(seed)
    d = 9
    A = r.normal(size=(d, d)) + 1j * r.normal(size=(d, d))
    psi = r.normal(size=d) + 1j * r.normal(size=d)
    out = fock.evolve_unitary(sp.csr_matrix(A + A.conj().T), t, psi)
    assert abs(np.linalg.norm(out) - np.linalg.norm(psi)) < 1e-10 * np.linalg.norm(psi)


# ---------------------------------------------------------------------------
# Partial trace
# ---------------------------------------------------------------------------


def test_partial_trace_of_product_state(rng):
    b = fock.build_basis(2, 1)
    ra = np.diag([0.3, 0.7]).astype(complex)
    ra[0, 1] = ra[1, 0] = 0.2
    rb = np.diag([0.9, 0.1]).astype(complex)
    red, small = fock.partial_trace(np.kron(ra, rb), b, [0])
    assert small.dim == 2
    np.testing.assert_allclose(red, ra, atol=1e-15)


def test_partial_trace_of_single_photon_superposition():
    b = fock.build_basis(2, 1, 1)
    psi = (b.ket([1, 0]) + b.ket([0, 1])) / np.sqrt(2)
    red, _ = fock.partial_trace(fock.ket_to_dm(psi), b, [0])
    np.testing.assert_allclose(red, np.diag([0.5, 0.5]), atol=1e-15)


def test_partial_trace_matrix_agrees(rng):
    b = fock.build_basis(3, 2, 3, 3)
    X = rng.normal(size=(b.dim, b.dim)) + 1j * rng.normal(size=(b.dim, b.dim))
    rho = X @ X.conj().T
    red, small = fock.partial_trace(rho, b, [2, 0], keep_ancilla=True)
    T, small2 = fock.partial_trace_matrix(b, [2, 0], keep_ancilla=True)
    assert small == small2
    np.testing.assert_allclose((T @ rho.reshape(-1)).reshape(small.dim, small.dim), red, atol=1e-10)


@pytest.mark.property
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), keep=st.sets(st.integers(0, 2), min_size=1, max_size=3))
def test_partial_trace_preserves_trace_and_hermiticity(seed, keep):
    r = np.random.default_rng(seed)
    b = fock.build_basis(3, 2, 2)
    X = r.normal(size=(b.dim, b.dim)) + 1j * r.normal(size=(b.dim, b.dim))
    rho = X @ X.conj().T
    rho /= np.trace(rho)
    red, _ = fock.partial_trace(rho, b, sorted(keep))
    assert abs(np.trace(red) - 1) < 1e-12
    np.testing.assert_allclose(red, red.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(red).min() > -1e-12


# ---------------------------------------------------------------------------
# Superoperators
# ---------------------------------------------------------------------------


def test_identity_tensor_identity():
    I = fock.SuperOperator.identity((2,))
    joint = fock.tensor_superoperators(I, I)
    np.testing.assert_allclose(joint.matrix, np.eye(16))


def random_unitary(r, d):
    q, _ = np.linalg.qr(r.normal(size=(d, d)) + 1j * r.normal(size=(d, d)))
    return q


def test_unitary_channels_tensor_product(rng):
    U, V = random_unitary(rng, 2), random_unitary(rng, 3)
    joint = fock.tensor_superoperators(fock.SuperOperator.from_unitary(U), fock.SuperOperator.from_unitary(V))
    ra = fock.ket_to_dm(random_unitary(rng, 2)[:, 0])
    rb = fock.ket_to_dm(random_unitary(rng, 3)[:, 0])
    W = np.kron(U, V)
    np.testing.assert_allclose(joint.apply(np.kron(ra, rb)), W @ np.kron(ra, rb) @ W.conj().T, atol=1e-12)


def test_wire_permutation_matches_direct_joint_lindblad():
    # four modes with distinct damping rates; channels on (A, B) and (C, D)
    # tensored and realigned to (A, C, B, D) must match one joint run
    rates = {"A": 0.3, "B": 0.7, "C": 1.1, "D": 0.2}
    duration = 0.8

    def damping_channel(names):
        b = fock.build_basis(len(names), 1)
        jumps = [np.sqrt(rates[x]) * fock.mode_operator(b, k, "annihilate") for k, x in enumerate(names)]
        M = channel_from_lindblad(sp.csr_matrix((b.dim, b.dim), dtype=complex), jumps, b.dim, duration)
        return fock.SuperOperator(M, (2,) * len(names), (2,) * len(names))

    joint = fock.tensor_superoperators(damping_channel("AB"), damping_channel("CD"), [0, 2, 1, 3])
    direct = damping_channel("ACBD")
    assert joint.in_dims == (2, 2, 2, 2)
    np.testing.assert_allclose(joint.matrix, direct.matrix, atol=1e-9)
    assert joint.is_completely_positive()


def test_tensor_dimension_mismatch_in_compose():
    a = fock.SuperOperator.identity((2,))
    b = fock.SuperOperator.identity((3,))
    with pytest.raises(ValueError):
        a.compose(b)


def test_superoperator_shape_checked():
    with pytest.raises(ValueError):
        fock.SuperOperator(np.eye(4), (3,), (3,))


def test_choi_detects_non_cp_map():
    # transpose is positive but not completely positive
    T = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            T[j * 2 + i, i * 2 + j] = 1
    assert not fock.SuperOperator(T, (2,), (2,)).is_completely_positive()


@pytest.mark.property
@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_superoperator_preserves_hermiticity(seed):
    r = np.random.default_rng(seed)
    U = random_unitary(r, 3)
    S = fock.SuperOperator.from_unitary(U)
    X = r.normal(size=(3, 3)) + 1j * r.normal(size=(3, 3))
    out = S.apply(X + X.conj().T)
    np.testing.assert_allclose(out, out.conj().T, atol=1e-12)


@pytest.mark.property
def test_cutoff_convergence_hook():
    ok, a, b = fock.check_cutoff_convergence(lambda k: 1 + 10.0**-k, 3, 1e-2)
    assert ok and a == 1.001
    ok, _, _ = fock.check_cutoff_convergence(lambda k: 10.0**-k, 1, 0.5)
    assert not ok
