import numpy as np
import pytest

from qpac import pauli


def test_single_qubit_basis():
    stack = pauli.pauli_basis(1)
    assert stack.shape == (4, 2, 2)
    gram = np.einsum("aij,bji->ab", stack, stack)
    assert np.allclose(gram, 2 * np.eye(4), atol=1e-12)


def test_two_qubit_ordering():
    stack = pauli.pauli_basis(2)
    zx = np.kron(pauli.pauli_basis(1)[3], pauli.pauli_basis(1)[1])
    assert np.allclose(stack[pauli.word_to_index("31")], zx)
    assert pauli.word_to_index("31") == 13
    assert pauli.index_to_word(13, 2) == (3, 1)


def test_two_qubit_orthogonality_exhaustive():
    # oracle: loop over all 256 pairs
    stack = pauli.pauli_basis(2)
    for a in range(16):
        for b in range(16):
            ip = np.trace(stack[a] @ stack[b])
            expected = 4.0 if a == b else 0.0
            assert abs(ip - expected) < 1e-12


@pytest.mark.parametrize("n", [0, 7])
def test_basis_rejects_out_of_range(n):
    with pytest.raises(ValueError):
        pauli.pauli_basis(n)


def test_coefficients_roundtrip(rng):
    rho = pauli.random_state(8, rng)
    s = pauli.pauli_coefficients(rho, 3)
    assert s.dtype == float
    back = pauli.matrix_from_coefficients(s, 3)
    assert np.allclose(back, rho, atol=1e-12)


def test_partial_trace_matches_kron(rng):
    a = pauli.random_state(2, rng)
    b = pauli.random_state(4, rng)
    rho = np.kron(a, b)
    assert np.allclose(pauli.partial_trace(rho, 3, [0]), a, atol=1e-12)
    assert np.allclose(pauli.partial_trace(rho, 3, [1, 2]), b, atol=1e-12)


def test_haar_unitary_is_unitary(rng):
    u = pauli.haar_unitary(8, rng)
    assert np.allclose(u @ u.conj().T, np.eye(8), atol=1e-10)
