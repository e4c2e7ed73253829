"""Finite-group representation machinery for equivariant channels.

A channel phi is (G, R_in, R_out)-equivariant when
phi(R_in(g) rho R_in(g)^dag) = R_out(g) phi(rho) R_out(g)^dag for all g.
Its Choi operator then lies in the commutant of the product representation
conj(R_in) (x) R_out; in a basis aligned with the isotypic decomposition it
is strictly block diagonal, one free Hermitian block per irrep multiplicity
space:

    J ~ direct_sum_lambda  I_{d_lambda} (x) (I_{m_lambda}/d_out + W_lambda).

All-zero blocks recover the maximally depolarizing channel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .channels import ChoiMatrix, apply_choi, to_choi
from .pauli import ATOL

BUILTIN_GROUPS = ("z2", "z3", "z4", "s3")


@dataclass(frozen=True)
class FiniteGroup:
    name: str
    labels: tuple
    table: np.ndarray  # table[i, j] = index of g_i g_j

    def __post_init__(self):
        table = np.asarray(self.table, dtype=int)
        object.__setattr__(self, "table", table)
        n = self.order
        if table.shape != (n, n):
            raise ValueError("multiplication table must be |G| x |G|")
        for axis in (0, 1):
            rows = table if axis == 0 else table.T
            if any(sorted(row) != list(range(n)) for row in rows.tolist()):
                raise ValueError("multiplication table is not a Latin square")
        if n <= 24:
            for a in range(n):
                for b in range(n):
                    for c in range(n):
                        if table[table[a, b], c] != table[a, table[b, c]]:
                            raise ValueError("multiplication table is not associative")

    @property
    def order(self) -> int:
        return len(self.labels)

    @property
    def identity(self) -> int:
        for e in range(self.order):
            if all(self.table[e, g] == g for g in range(self.order)):
                return e
        raise ValueError("group has no identity element")

    def inverse(self, g: int) -> int:
        e = self.identity
        return int(np.where(self.table[g] == e)[0][0])


@dataclass(frozen=True)
class Irrep:
    label: str
    dim: int
    matrices: np.ndarray  # (|G|, dim, dim), unitary

    @property
    def characters(self) -> np.ndarray:
        return np.einsum("gii->g", self.matrices)


@dataclass(frozen=True)
class IrrepTable:
    group: FiniteGroup
    irreps: tuple

    def __post_init__(self):
        order = self.group.order
        if sum(ir.dim**2 for ir in self.irreps) != order:
            raise ValueError("sum of squared irrep dimensions must equal |G|")
        chars = np.stack([ir.characters for ir in self.irreps])
        gram = chars @ chars.conj().T / order
        if not np.allclose(gram, np.eye(len(self.irreps)), atol=1e-8):
            raise ValueError("irrep characters are not orthonormal")
        for ir in self.irreps:
            _check_rep_property(self.group, ir.matrices)


@dataclass(frozen=True)
class UnitaryRep:
    group: FiniteGroup
    matrices: np.ndarray  # (|G|, dim, dim)

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=complex)
        object.__setattr__(self, "matrices", mats)
        _check_rep_property(self.group, mats)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]


def _check_rep_property(group: FiniteGroup, mats: np.ndarray, atol: float = 1e-8):
    e = group.identity
    if not np.allclose(mats[e], np.eye(mats.shape[1]), atol=atol):
        raise ValueError("representation does not map the identity to I")
    for g in range(group.order):
        u = mats[g]
        if not np.allclose(u @ u.conj().T, np.eye(u.shape[0]), atol=atol):
            raise ValueError("representation matrices must be unitary")
        for h in range(group.order):
            if not np.allclose(mats[g] @ mats[h], mats[group.table[g, h]], atol=atol):
                raise ValueError("matrices do not respect the multiplication table")


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def _mat_from_pairs(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def group_from_dict(doc: dict) -> tuple[FiniteGroup, IrrepTable]:
    group = FiniteGroup(doc["name"], tuple(doc["labels"]), np.array(doc["table"]))
    irreps = tuple(
        Irrep(
            ir["label"],
            int(ir["dim"]),
            np.stack([_mat_from_pairs(m) for m in ir["matrices"]]),
        )
        for ir in doc["irreps"]
    )
    return group, IrrepTable(group, irreps)


def load_group(name_or_path: str) -> tuple[FiniteGroup, IrrepTable]:
    """Load a builtin group (z2, z3, z4, s3) or a user-supplied JSON file."""
    if name_or_path in BUILTIN_GROUPS:
        text = resources.files("qpac.groups").joinpath(f"{name_or_path}.json").read_text()
    else:
        with open(name_or_path) as f:
            text = f.read()
        return group_from_dict(json.loads(text))
    return group_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------

def character_projector(rep: UnitaryRep, irrep: Irrep) -> np.ndarray:
    """P_lambda = (d_lambda / |G|) sum_g conj(chi_lambda(g)) R(g)."""
    if irrep.matrices.shape[0] != rep.group.order:
        raise ValueError("irrep and representation belong to different groups")
    chars = irrep.characters
    return irrep.dim / rep.group.order * np.einsum(
        "g,gij->ij", chars.conj(), rep.matrices
    )


@dataclass(frozen=True)
class IsotypicComponent:
    irrep: Irrep
    multiplicity: int
    # columns of the global basis occupied by this component, ordered with the
    # irrep index k outer and the multiplicity index i inner
    columns: slice


@dataclass(frozen=True)
class IsotypicDecomposition:
    rep: UnitaryRep
    components: tuple
    basis: np.ndarray  # unitary; conjugation yields direct_sum irrep (x) I_m

    @property
    def dims_and_mults(self) -> list[tuple[int, int]]:
        return [(c.irrep.dim, c.multiplicity) for c in self.components]


def _refined_projector(rep: UnitaryRep, irrep: Irrep, k: int, l: int) -> np.ndarray:
    coeff = irrep.matrices[:, k, l].conj()
    return irrep.dim / rep.group.order * np.einsum("g,gij->ij", coeff, rep.matrices)


def isotypic_decompose(rep: UnitaryRep, table: IrrepTable) -> IsotypicDecomposition:
    """Multiplicities and an aligned orthonormal basis for every irrep.

    Within each isotypic component, an orthonormal basis of the image of the
    refined projector T_11 is grown deterministically from the canonical
    basis by Gram-Schmidt; the intertwiners T_k1 then transport it to the
    remaining irrep rows, which keeps the result orthonormal because
    T_k1^dag T_k1 = T_11 for unitary irreps.
    """
    dim = rep.dim
    components = []
    columns = []
    used = 0
    for irrep in table.irreps:
        p = character_projector(rep, irrep)
        evals = np.linalg.eigvalsh((p + p.conj().T) / 2)
        rank = int(np.sum(evals > 0.5))
        if rank % irrep.dim != 0:
            raise ValueError(
                f"projector rank {rank} is not a multiple of dim({irrep.label})"
            )
        m = rank // irrep.dim
        if m == 0:
            continue
        t11 = _refined_projector(rep, irrep, 0, 0)
        seeds = []
        for j in range(dim):
            v = t11[:, j].copy()
            for w in seeds:
                v -= w * (w.conj() @ v)
            nrm = np.linalg.norm(v)
            if nrm > 1e-8:
                seeds.append(v / nrm)
            if len(seeds) == m:
                break
        if len(seeds) != m:
            raise ValueError("failed to span the multiplicity space")
        for k in range(irrep.dim):
            tk1 = t11 if k == 0 else _refined_projector(rep, irrep, k, 0)
            for w in seeds:
                columns.append(tk1 @ w)
        components.append(
            IsotypicComponent(irrep, m, slice(used, used + irrep.dim * m))
        )
        used += irrep.dim * m
    if used != dim:
        raise ValueError(
            f"isotypic components span {used} of {dim} dimensions; "
            "the irrep table does not match the representation"
        )
    basis = np.stack(columns, axis=1)
    if not np.allclose(basis.conj().T @ basis, np.eye(dim), atol=1e-8):
        raise ValueError("constructed isotypic basis is not orthonormal")
    return IsotypicDecomposition(rep, tuple(components), basis)


def product_rep(r_in: UnitaryRep, r_out: UnitaryRep) -> UnitaryRep:
    """conj(R_in) (x) R_out, the representation whose commutant holds Choi
    operators of equivariant channels."""
    if r_in.group is not r_out.group and r_in.group != r_out.group:
        raise ValueError("input and output representations need the same group")
    mats = np.stack(
        [
            np.kron(r_in.matrices[g].conj(), r_out.matrices[g])
            for g in range(r_in.group.order)
        ]
    )
    return UnitaryRep(r_in.group, mats)


def eq_param_count(decomp: IsotypicDecomposition) -> int:
    """Number of equivariant parameters Xi = sum_lambda m_lambda^2."""
    return int(sum(c.multiplicity**2 for c in decomp.components))


# ---------------------------------------------------------------------------
# equivariant Choi construction
# ---------------------------------------------------------------------------

def build_equivariant_choi(
    decomp: IsotypicDecomposition,
    blocks: dict,
    d_in: int,
    d_out: int,
    strict: bool = False,
) -> ChoiMatrix:
    """Assemble Eq.-(block) Choi: direct_sum I_{d_lam} (x) (I_m/d_out + W_lam),
    rotated back to the computational basis.

    `blocks` maps irrep labels to m_lambda x m_lambda arrays; missing labels
    mean W_lambda = 0.  With all blocks zero the result is the Choi operator
    of the maximally depolarizing channel.
    """
    dim = decomp.rep.dim
    if dim != d_in * d_out:
        raise ValueError("decomposition dimension must equal d_in * d_out")
    inner = np.zeros((dim, dim), dtype=complex)
    for comp in decomp.components:
        m = comp.multiplicity
        w = np.asarray(blocks.get(comp.irrep.label, np.zeros((m, m))), dtype=complex)
        if w.shape != (m, m):
            raise ValueError(
                f"block {comp.irrep.label} must be {m}x{m}, got {w.shape}"
            )
        block = np.kron(np.eye(comp.irrep.dim), np.eye(m) / d_out + w)
        inner[comp.columns, comp.columns] = block
    mat = decomp.basis @ inner @ decomp.basis.conj().T
    j = ChoiMatrix(mat, d_in, d_out)
    if strict:
        eigmin = np.linalg.eigvalsh((mat + mat.conj().T) / 2).min()
        if eigmin < -ATOL * 100:
            raise ValueError(f"assembled Choi is not PSD ({eigmin:.3e})")
    return j


def choi_blocks(decomp: IsotypicDecomposition, j: ChoiMatrix) -> dict:
    """Multiplicity-space blocks of the commutant projection of a Choi operator.

    For J already in the commutant this is exact block extraction; otherwise
    averaging over the d_lambda copies implements the group twirl.
    """
    t = decomp.basis.conj().T @ j.mat @ decomp.basis
    out = {}
    for comp in decomp.components:
        m = comp.multiplicity
        sub = t[comp.columns, comp.columns]
        acc = np.zeros((m, m), dtype=complex)
        for k in range(comp.irrep.dim):
            acc += sub[k * m : (k + 1) * m, k * m : (k + 1) * m]
        out[comp.irrep.label] = acc / comp.irrep.dim
    return out


def eq_weight_blocks(decomp: IsotypicDecomposition, j: ChoiMatrix) -> dict:
    """Weight blocks W_lambda = M_lambda - I/d_out of a channel's Choi."""
    blocks = choi_blocks(decomp, j)
    return {
        label: b - np.eye(b.shape[0]) / j.d_out for label, b in blocks.items()
    }


def off_block_mass(decomp: IsotypicDecomposition, j: ChoiMatrix) -> float:
    """Frobenius mass of J outside the Schur block structure."""
    t = decomp.basis.conj().T @ j.mat @ decomp.basis
    residual = t.copy()
    for comp in decomp.components:
        m = comp.multiplicity
        sub = t[comp.columns, comp.columns]
        keep = np.zeros_like(sub)
        for k in range(comp.irrep.dim):
            sl = slice(k * m, (k + 1) * m)
            keep[sl, sl] = sub[sl, sl]
        residual[comp.columns, comp.columns] -= keep
    return float(np.linalg.norm(residual))


def check_equivariance(channel, r_in: UnitaryRep, r_out: UnitaryRep) -> float:
    """Max over group elements and matrix-unit probes of
    ||phi(R_in rho R_in^dag) - R_out phi(rho) R_out^dag||_F."""
    j = to_choi(channel) if not isinstance(channel, ChoiMatrix) else channel
    d_in = r_in.dim
    if j.d_in != d_in or j.d_out != r_out.dim:
        raise ValueError("representation dimensions do not match the channel")
    worst = 0.0
    eye = np.eye(d_in)
    for a in range(d_in):
        for b in range(d_in):
            probe = np.outer(eye[a], eye[b])
            out = apply_choi(j, probe)
            for g in range(r_in.group.order):
                uin, uout = r_in.matrices[g], r_out.matrices[g]
                lhs = apply_choi(j, uin @ probe @ uin.conj().T)
                rhs = uout @ out @ uout.conj().T
                worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst
