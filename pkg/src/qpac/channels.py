"""Quantum-channel representations and conversions.

Four interchangeable representations are supported:

* Kraus: a stack of d_out x d_in operators K_i with sum_i K_i^dag K_i = I.
* Choi (unnormalized): J = sum_{a,b} |a><b| (x) phi(|a><b|), input factor
  first, Tr(J) = d_in for trace-preserving maps.
* Process matrix chi (square channels only): phi(rho) = sum chi(A,B)
  sigma_A rho sigma_B with Tr(chi) = 1.
* Pauli transfer matrix R with entries
  R(A,B) = Tr(sigma_A phi(sigma_B)) / sqrt(d_in d_out); this is the matrix
  of the channel on normalized-Pauli coefficient vectors, so PTMs compose by
  plain matrix multiplication and satisfy ||R||_F = ||J||_F.

Weight matrices W measure the deviation from the maximally depolarizing
baseline: chi = I/4^n + W, respectively R = R_DEP + W with
R_DEP(A,B) = delta_{A0} delta_{B0} sqrt(d_in/d_out).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pauli import (
    PSD_ATOL,
    haar_unitary,
    index_to_word,
    partial_trace,
    pauli_basis,
    pauli_coefficients,
    matrix_from_coefficients,
)

__all__ = [
    "KrausChannel",
    "ChoiMatrix",
    "ProcessMatrix",
    "TransferMatrix",
    "WeightMatrix",
    "CptpReport",
    "kraus_to_choi",
    "choi_to_kraus",
    "choi_to_pm",
    "pm_to_choi",
    "choi_to_ptm",
    "ptm_to_choi",
    "kraus_to_ptm",
    "to_choi",
    "channel_to_weight",
    "weight_to_pm",
    "weight_to_ptm",
    "apply_kraus",
    "apply_choi",
    "apply_pm",
    "apply_ptm",
    "apply_channel",
    "compose",
    "compose_kraus",
    "probabilities",
    "validate_cptp",
    "choi_from_map",
    "depolarizing_ptm",
    "identity_kraus",
    "random_cptp",
    "random_unitary_mixture",
    "random_pauli_channel",
    "random_sparse_pm_channel",
]


def _nqubits(d: int) -> int:
    n = int(round(np.log2(d)))
    if 2**n != d:
        raise ValueError(f"dimension {d} is not a power of two")
    return n


@dataclass(frozen=True)
class KrausChannel:
    """Stack of Kraus operators, shape (rank, d_out, d_in)."""

    ops: np.ndarray

    def __post_init__(self):
        ops = np.asarray(self.ops, dtype=complex)
        if ops.ndim != 3:
            raise ValueError("Kraus stack must have shape (rank, d_out, d_in)")
        object.__setattr__(self, "ops", ops)

    @property
    def d_in(self) -> int:
        return self.ops.shape[2]

    @property
    def d_out(self) -> int:
        return self.ops.shape[1]


@dataclass(frozen=True)
class ChoiMatrix:
    """Unnormalized Choi operator on (input) (x) (output), Tr = d_in if TP."""

    mat: np.ndarray
    d_in: int
    d_out: int

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        if mat.shape != (self.d_in * self.d_out,) * 2:
            raise ValueError("Choi matrix shape does not match d_in * d_out")
        object.__setattr__(self, "mat", mat)


@dataclass(frozen=True)
class ProcessMatrix:
    """chi matrix of a square n-qubit channel; Tr(chi) = 1 if TP."""

    chi: np.ndarray
    n: int

    def __post_init__(self):
        chi = np.asarray(self.chi, dtype=complex)
        if chi.shape != (4**self.n, 4**self.n):
            raise ValueError("chi must be 4^n x 4^n")
        object.__setattr__(self, "chi", chi)

    @property
    def d(self) -> int:
        return 2**self.n


@dataclass(frozen=True)
class TransferMatrix:
    """Pauli transfer matrix, shape (d_out^2, d_in^2), real entries."""

    mat: np.ndarray
    d_in: int
    d_out: int

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=float)
        if mat.shape != (self.d_out**2, self.d_in**2):
            raise ValueError("PTM shape must be (d_out^2, d_in^2)")
        object.__setattr__(self, "mat", mat)


@dataclass(frozen=True)
class WeightMatrix:
    """Deviation from the depolarizing baseline, in PM or PTM form."""

    kind: str  # "pm" | "ptm"
    mat: np.ndarray
    d_in: int
    d_out: int

    def __post_init__(self):
        if self.kind not in ("pm", "ptm"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "pm" and self.d_in != self.d_out:
            raise ValueError("PM weights require d_in = d_out")
        object.__setattr__(self, "mat", np.asarray(self.mat))


ChannelRep = KrausChannel | ChoiMatrix | ProcessMatrix | TransferMatrix


# ---------------------------------------------------------------------------
# conversions
# ---------------------------------------------------------------------------

def kraus_to_choi(k: KrausChannel) -> ChoiMatrix:
    vecs = k.ops.transpose(0, 2, 1).reshape(k.ops.shape[0], -1)
    mat = np.einsum("ri,rj->ij", vecs, vecs.conj())
    return ChoiMatrix(mat, k.d_in, k.d_out)


def choi_to_kraus(j: ChoiMatrix, atol: float = PSD_ATOL) -> KrausChannel:
    """Kraus operators from the Choi eigendecomposition (CP maps only)."""
    vals, vecs = np.linalg.eigh((j.mat + j.mat.conj().T) / 2)
    if vals.min() < -atol:
        raise ValueError(f"Choi operator is not PSD (min eigenvalue {vals.min():.3e})")
    ops = []
    for lam, v in zip(vals, vecs.T):
        if lam > atol:
            ops.append(np.sqrt(lam) * v.reshape(j.d_in, j.d_out).T)
    if not ops:
        ops = [np.zeros((j.d_out, j.d_in))]
    return KrausChannel(np.stack(ops))


def _pauli_vec_frame(n: int) -> np.ndarray:
    # Columns are vec_choi(sigma_A); unitary up to the factor sqrt(2^n).
    stack = pauli_basis(n)
    return stack.transpose(0, 2, 1).reshape(4**n, -1).T


def choi_to_pm(j: ChoiMatrix) -> ProcessMatrix:
    if j.d_in != j.d_out:
        raise ValueError("process matrix requires d_in = d_out")
    n = _nqubits(j.d_in)
    p = _pauli_vec_frame(n)
    chi = p.conj().T @ j.mat @ p / 4**n
    return ProcessMatrix(chi, n)


def pm_to_choi(pm: ProcessMatrix) -> ChoiMatrix:
    p = _pauli_vec_frame(pm.n)
    return ChoiMatrix(p @ pm.chi @ p.conj().T, pm.d, pm.d)


def choi_to_ptm(j: ChoiMatrix) -> TransferMatrix:
    n_in, n_out = _nqubits(j.d_in), _nqubits(j.d_out)
    j4 = j.mat.reshape(j.d_in, j.d_out, j.d_in, j.d_out)
    r = np.einsum(
        "ambl,Bab,Alm->AB", j4, pauli_basis(n_in), pauli_basis(n_out), optimize=True
    ) / np.sqrt(j.d_in * j.d_out)
    imag = np.abs(r.imag).max()
    if imag > 1e-7:
        raise ValueError(f"PTM of a non-Hermiticity-preserving map (imag {imag:.2e})")
    return TransferMatrix(r.real, j.d_in, j.d_out)


def ptm_to_choi(r: TransferMatrix) -> ChoiMatrix:
    n_in, n_out = _nqubits(r.d_in), _nqubits(r.d_out)
    j4 = np.einsum(
        "AB,Bba,Aml->ambl", r.mat, pauli_basis(n_in), pauli_basis(n_out), optimize=True
    ) / np.sqrt(r.d_in * r.d_out)
    d = r.d_in * r.d_out
    return ChoiMatrix(j4.reshape(d, d), r.d_in, r.d_out)


def kraus_to_ptm(k: KrausChannel) -> TransferMatrix:
    n_in, n_out = _nqubits(k.d_in), _nqubits(k.d_out)
    conj = np.einsum(
        "rmi,Bij,rlj->Bml", k.ops, pauli_basis(n_in), k.ops.conj(), optimize=True
    )
    r = np.einsum("Aml,Blm->AB", pauli_basis(n_out), conj, optimize=True)
    return TransferMatrix(r.real / np.sqrt(k.d_in * k.d_out), k.d_in, k.d_out)


def to_choi(rep: ChannelRep) -> ChoiMatrix:
    if isinstance(rep, ChoiMatrix):
        return rep
    if isinstance(rep, KrausChannel):
        return kraus_to_choi(rep)
    if isinstance(rep, ProcessMatrix):
        return pm_to_choi(rep)
    if isinstance(rep, TransferMatrix):
        return ptm_to_choi(rep)
    raise TypeError(f"not a channel representation: {type(rep)!r}")


def depolarizing_ptm(d_in: int, d_out: int) -> np.ndarray:
    """PTM of the maximally depolarizing baseline rho -> Tr(rho) I/d_out."""
    r = np.zeros((d_out**2, d_in**2))
    r[0, 0] = np.sqrt(d_in / d_out)
    return r


def channel_to_weight(rep: ChannelRep, kind: str) -> WeightMatrix:
    """Deviation of a channel from the depolarizing baseline."""
    if kind == "pm":
        pm = rep if isinstance(rep, ProcessMatrix) else choi_to_pm(to_choi(rep))
        w = pm.chi - np.eye(4**pm.n) / 4**pm.n
        return WeightMatrix("pm", w, pm.d, pm.d)
    if kind == "ptm":
        r = rep if isinstance(rep, TransferMatrix) else choi_to_ptm(to_choi(rep))
        w = r.mat - depolarizing_ptm(r.d_in, r.d_out)
        return WeightMatrix("ptm", w, r.d_in, r.d_out)
    raise ValueError(f"unknown weight kind {kind!r}")


def weight_to_pm(w: WeightMatrix) -> ProcessMatrix:
    if w.kind != "pm":
        raise ValueError("expected a PM weight")
    n = _nqubits(w.d_in)
    return ProcessMatrix(w.mat + np.eye(4**n) / 4**n, n)


def weight_to_ptm(w: WeightMatrix) -> TransferMatrix:
    if w.kind != "ptm":
        raise ValueError("expected a PTM weight")
    return TransferMatrix(w.mat + depolarizing_ptm(w.d_in, w.d_out), w.d_in, w.d_out)


# ---------------------------------------------------------------------------
# channel application and composition
# ---------------------------------------------------------------------------

def apply_kraus(k: KrausChannel, rho: np.ndarray) -> np.ndarray:
    return np.einsum("rmi,ij,rlj->ml", k.ops, rho, k.ops.conj(), optimize=True)


def apply_choi(j: ChoiMatrix, rho: np.ndarray) -> np.ndarray:
    j4 = j.mat.reshape(j.d_in, j.d_out, j.d_in, j.d_out)
    return np.einsum("ambl,ab->ml", j4, rho, optimize=True)


def apply_pm(chi: np.ndarray | ProcessMatrix, rho: np.ndarray) -> np.ndarray:
    """phi(rho) = sum_{A,B} chi(A,B) sigma_A rho sigma_B.

    Accepts the full chi matrix or a ProcessMatrix; a PM-kind WeightMatrix
    must be converted with weight_to_pm first (chi = I/4^n + W).
    """
    if isinstance(chi, ProcessMatrix):
        chi = chi.chi
    n = _nqubits(rho.shape[0])
    stack = pauli_basis(n)
    left = np.einsum("Amk,kl->Aml", stack, rho)
    right = np.einsum("AB,Bls->Als", chi, stack)
    return np.einsum("Aml,Als->ms", left, right, optimize=True)


def apply_ptm(r: TransferMatrix, rho: np.ndarray) -> np.ndarray:
    n_in, n_out = _nqubits(r.d_in), _nqubits(r.d_out)
    if rho.shape[0] != r.d_in:
        raise ValueError("input dimension mismatch")
    s = pauli_coefficients(rho, n_in)
    return matrix_from_coefficients(r.mat @ s, n_out)


def apply_channel(rep: ChannelRep, rho: np.ndarray) -> np.ndarray:
    if isinstance(rep, KrausChannel):
        return apply_kraus(rep, rho)
    if isinstance(rep, ChoiMatrix):
        return apply_choi(rep, rho)
    if isinstance(rep, ProcessMatrix):
        return apply_pm(rep, rho)
    if isinstance(rep, TransferMatrix):
        return apply_ptm(rep, rho)
    raise TypeError(f"not a channel representation: {type(rep)!r}")


def _rep_dims(rep: ChannelRep) -> tuple[int, int]:
    if isinstance(rep, ProcessMatrix):
        return rep.d, rep.d
    return rep.d_in, rep.d_out


def compose(layers, rho0: np.ndarray) -> np.ndarray:
    """Apply layers left-to-right: rho_out = (phi_L o ... o phi_1)(rho0)."""
    rho = rho0
    for idx, layer in enumerate(layers):
        d_in, _ = _rep_dims(layer)
        if rho.shape[0] != d_in:
            raise ValueError(f"dimension chain mismatch entering layer {idx + 1}")
        rho = apply_channel(layer, rho)
    return rho


def compose_kraus(layers) -> KrausChannel:
    """Collapse a stack of Kraus channels into a single Kraus set."""
    ops = layers[0].ops
    for layer in layers[1:]:
        if layer.d_in != ops.shape[1]:
            raise ValueError("dimension chain mismatch in Kraus composition")
        ops = np.einsum("smk,rki->srmi", layer.ops, ops).reshape(
            -1, layer.d_out, ops.shape[2]
        )
    return KrausChannel(ops)


def probabilities(rho: np.ndarray, keep=None) -> np.ndarray:
    """Computational-basis outcome probabilities, optionally on a subsystem."""
    if keep is not None:
        rho = partial_trace(rho, _nqubits(rho.shape[0]), keep)
    return np.real(np.diagonal(rho)).copy()


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CptpReport:
    is_cp: bool
    is_tp: bool
    min_choi_eigenvalue: float
    tp_residual: float


def validate_cptp(rep: ChannelRep, atol: float = PSD_ATOL) -> CptpReport:
    j = to_choi(rep)
    eigmin = float(np.linalg.eigvalsh((j.mat + j.mat.conj().T) / 2).min())
    j4 = j.mat.reshape(j.d_in, j.d_out, j.d_in, j.d_out)
    tr_out = np.einsum("ambm->ab", j4)
    residual = float(np.linalg.norm(tr_out - np.eye(j.d_in)))
    return CptpReport(
        is_cp=eigmin >= -atol,
        is_tp=residual <= atol,
        min_choi_eigenvalue=eigmin,
        tp_residual=residual,
    )


def choi_from_map(apply_fn, d_in: int, d_out: int) -> ChoiMatrix:
    """Choi operator of an arbitrary linear map via matrix-unit tomography."""
    mat = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    basis = np.eye(d_in)
    j4 = mat.reshape(d_in, d_out, d_in, d_out)
    for a in range(d_in):
        for b in range(d_in):
            unit = np.outer(basis[a], basis[b])
            j4[a, :, b, :] = apply_fn(unit)
    return ChoiMatrix(mat, d_in, d_out)


# ---------------------------------------------------------------------------
# random channels
# ---------------------------------------------------------------------------

def identity_kraus(d: int) -> KrausChannel:
    return KrausChannel(np.eye(d)[None, :, :])


def random_cptp(
    d_in: int, d_out: int, rank: int, rng: np.random.Generator
) -> KrausChannel:
    """Random CPTP channel from a Haar-ish Stinespring isometry."""
    if d_out * rank < d_in:
        raise ValueError("need d_out * rank >= d_in for an isometry to exist")
    g = rng.normal(size=(d_out * rank, d_in)) + 1j * rng.normal(size=(d_out * rank, d_in))
    v, _ = np.linalg.qr(g)
    return KrausChannel(v.reshape(rank, d_out, d_in))


def random_unitary_mixture(d: int, k: int, rng: np.random.Generator) -> KrausChannel:
    """Mixture of k Haar unitaries: always a unital CPTP channel."""
    probs = rng.dirichlet(np.ones(k))
    ops = np.stack([np.sqrt(p) * haar_unitary(d, rng) for p in probs])
    return KrausChannel(ops)


def random_pauli_channel(
    n: int, rng: np.random.Generator, support: int | None = None
) -> ProcessMatrix:
    """Pauli channel with probability mass redistributed on a small support.

    Outside the support every diagonal entry stays at the depolarizing value
    1/4^n, so the weight matrix is exactly `support`-sparse.
    """
    size = 4**n
    if support is None:
        support = size
    support = min(support, size)
    idx = rng.choice(size, size=support, replace=False)
    p = np.full(size, 1.0 / size)
    p[idx] = rng.dirichlet(np.ones(support)) * support / size
    return ProcessMatrix(np.diag(p.astype(complex)), n)


_PROD_CODE = np.array(
    [[0, 1, 2, 3], [1, 0, 3, 2], [2, 3, 0, 1], [3, 2, 1, 0]], dtype=int
)
_PROD_PHASE = np.array(
    [
        [1, 1, 1, 1],
        [1, 1, 1j, -1j],
        [1, -1j, 1, 1j],
        [1, 1j, -1j, 1],
    ],
    dtype=complex,
)


def pauli_product(a: int, b: int, n: int) -> tuple[complex, int]:
    """(phase, index) with sigma_a sigma_b = phase * sigma_index."""
    phase = 1.0 + 0j
    code = 0
    for ca, cb in zip(index_to_word(a, n), index_to_word(b, n)):
        phase *= _PROD_PHASE[ca, cb]
        code = 4 * code + _PROD_CODE[ca, cb]
    return phase, code


def random_sparse_pm_channel(
    n: int,
    rng: np.random.Generator,
    support: int = 4,
    offdiag_pairs: int = 2,
) -> ProcessMatrix:
    """Random CPTP channel whose PM weight has a small support.

    Starts from a sparse Pauli channel and adds trace-preservation-neutral
    off-diagonal entries: for A != B with sigma_A sigma_B = omega sigma_E,
    the choice chi(A,B) = i t omega (t real) contributes
    2 Re(chi(A,B) conj(omega)) sigma_E = 0 to the TP condition.  Entries are
    scaled to keep chi positive semidefinite.
    """
    pm = random_pauli_channel(n, rng, support)
    chi = pm.chi.copy()
    diag = np.real(np.diagonal(chi)).copy()
    occupied = np.where(diag > 1e-15)[0]
    for _ in range(offdiag_pairs):
        if len(occupied) < 2:
            break
        a, b = rng.choice(occupied, size=2, replace=False)
        phase, _ = pauli_product(int(a), int(b), n)
        # keep the 2x2 principal minor and the global Gershgorin slack positive
        cap = 0.45 * min(diag[a], diag[b])
        t = rng.uniform(-cap, cap)
        h = 1j * t * phase
        chi[a, b] += h
        chi[b, a] += np.conj(h)
    # damp off-diagonals until PSD; the diagonal (a valid Pauli channel) is kept
    off = chi - np.diag(np.diagonal(chi))
    base = np.diag(np.diagonal(chi))
    while np.linalg.eigvalsh(base + off).min() < 0:
        off *= 0.5
    return ProcessMatrix(base + off, n)
