"""Multi-qubit Pauli basis, index bookkeeping and small dense-matrix helpers.

Ordering convention used throughout the package: a Pauli word is a string of
digits over {0,1,2,3} (0=I, 1=X, 2=Y, 3=Z); the leftmost digit acts on the
most significant qubit (qubit 0).  Words are enumerated lexicographically,
which is the same as reading each word as a base-4 integer, so word ``"31"``
on two qubits has index 13 and matrix Z (x) X.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

ATOL = 1e-10          # absolute tolerance for exact identities
PSD_ATOL = 1e-8       # eigenvalue floor for PSD checks (large eigensolves drift)
MAX_QUBITS = 6        # desk-scale guard for dense 4^n objects

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS_1Q = np.stack([_I, _X, _Y, _Z])


def _check_nqubits(n: int) -> None:
    if not (1 <= n <= MAX_QUBITS):
        raise ValueError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")


def index_to_word(index: int, n: int) -> tuple[int, ...]:
    """Digits of `index` in base 4, most significant qubit first."""
    return tuple((index >> (2 * (n - 1 - k))) & 3 for k in range(n))


def word_to_index(word) -> int:
    idx = 0
    for c in word:
        c = int(c)
        if not 0 <= c <= 3:
            raise ValueError(f"Pauli digit out of range: {c}")
        idx = 4 * idx + c
    return idx


def kron_all(mats) -> np.ndarray:
    out = np.asarray(mats[0])
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def pauli_matrix(word) -> np.ndarray:
    """Dense matrix of one Pauli word (digits or string over 0..3)."""
    return kron_all([PAULIS_1Q[int(c)] for c in word])


@lru_cache(maxsize=8)
def pauli_basis(n: int) -> np.ndarray:
    """All 4^n Pauli words as a (4^n, 2^n, 2^n) stack in index order.

    Each matrix is Hermitian and unitary; all are traceless except index 0.
    """
    _check_nqubits(n)
    stack = PAULIS_1Q
    for _ in range(n - 1):
        stack = np.einsum("aij,bkl->abikjl", stack, PAULIS_1Q).reshape(
            4 * stack.shape[0], 2 * stack.shape[1], 2 * stack.shape[2]
        )
    stack.setflags(write=False)
    return stack


@lru_cache(maxsize=8)
def normalized_pauli_basis(n: int) -> np.ndarray:
    """Pauli stack divided by sqrt(2^n): orthonormal under <A,B> = Tr(A^dag B)."""
    stack = pauli_basis(n) / np.sqrt(2.0**n)
    stack.setflags(write=False)
    return stack


def pauli_coefficients(rho: np.ndarray, n: int) -> np.ndarray:
    """Real coefficient vector s with rho = sum_A s_A sigma_A / sqrt(2^n)."""
    s = np.einsum("aij,ji->a", normalized_pauli_basis(n), rho)
    return np.real_if_close(s, tol=1000).real.copy()


def matrix_from_coefficients(s: np.ndarray, n: int) -> np.ndarray:
    return np.einsum("a,aij->ij", s, normalized_pauli_basis(n))


def diag_pauli_indices(n: int) -> np.ndarray:
    """Indices of words built only from {I, Z}: the diagonal Pauli words."""
    idx = [i for i in range(4**n) if all(c in (0, 3) for c in index_to_word(i, n))]
    return np.array(idx, dtype=np.intp)


def vec_choi(op: np.ndarray) -> np.ndarray:
    """Vectorize with the input index major: (I (x) K)|Omega~> for K = op.

    With |Omega~> = sum_a |a>|a>, entry (a*d_out + m) equals op[m, a].  Choi
    operators built from these vectors carry the input factor first.
    """
    return np.ascontiguousarray(op.T).reshape(-1)


def partial_trace(rho: np.ndarray, n: int, keep) -> np.ndarray:
    """Trace out all qubits not in `keep` (qubit 0 = most significant)."""
    keep = sorted(keep)
    traced = [q for q in range(n) if q not in keep]
    t = rho.reshape([2] * (2 * n))
    for offset, q in enumerate(traced):
        ax = q - offset
        nq = n - offset
        t = np.trace(t, axis1=ax, axis2=nq + ax)
    d = 2 ** len(keep)
    return t.reshape(d, d)


def is_hermitian(m: np.ndarray, atol: float = ATOL) -> bool:
    return bool(np.allclose(m, m.conj().T, rtol=0, atol=atol))


def herm_eigvals(m: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh((m + m.conj().T) / 2)


def random_state(d: int, rng: np.random.Generator, pure: bool = False) -> np.ndarray:
    """Random density matrix: Haar pure state or normalized Wishart."""
    if pure:
        v = rng.normal(size=d) + 1j * rng.normal(size=d)
        v /= np.linalg.norm(v)
        return np.outer(v, v.conj())
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))
