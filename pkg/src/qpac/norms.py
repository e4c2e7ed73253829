"""Matrix norms, sparsity counting, and structural norm bounds.

The closed-form bounds cover the PM weight (trace-zero diagonal, diagonal
floor, 1-to-1 and Frobenius bounds), the PTM weight (entrywise and Frobenius
bounds plus the sparsity-based 1-to-1 estimate), the equivariant norms, the
rescaled-convention PTM Frobenius norm, and the Kraus parameter-blindness
witness sum_i ||K_i||_F^2 = d_in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChoiMatrix, KrausChannel

SPARSITY_TOL = 1e-9


@dataclass(frozen=True)
class NormReport:
    norm_11: float
    norm_F: float
    sparsity: int
    trace_norm: float
    spectral_norm: float
    sparsity_tolerance: float

    def to_dict(self) -> dict:
        return {
            "norm_11": self.norm_11,
            "norm_F": self.norm_F,
            "sparsity": self.sparsity,
            "trace_norm": self.trace_norm,
            "spectral_norm": self.spectral_norm,
            "sparsity_tolerance": self.sparsity_tolerance,
        }


def norm_report(mat: np.ndarray, sparsity_tolerance: float = SPARSITY_TOL) -> NormReport:
    """Entrywise 1-norm, Frobenius norm, sparsity and singular-value norms."""
    mat = np.asarray(mat)
    if not np.all(np.isfinite(mat.real)) or not np.all(np.isfinite(np.asarray(mat, dtype=complex).imag)):
        raise ValueError("matrix has non-finite entries")
    mags = np.abs(mat)
    svals = np.linalg.svd(mat, compute_uv=False) if mat.size else np.zeros(0)
    return NormReport(
        norm_11=float(mags.sum()),
        norm_F=float(np.sqrt((mags**2).sum())),
        sparsity=int(np.count_nonzero(mags > sparsity_tolerance)),
        trace_norm=float(svals.sum()),
        spectral_norm=float(svals.max()) if svals.size else 0.0,
        sparsity_tolerance=sparsity_tolerance,
    )


# ---------------------------------------------------------------------------
# PM weight bounds
# ---------------------------------------------------------------------------

def pm_w11_upper(xi: int, n: int) -> float:
    """||W||_{1,1} <= (2 xi^2 + xi - 2) / 4^n for xi-sparse CPTP PM weights."""
    if xi <= 0:
        return 0.0
    return (2.0 * xi**2 + xi - 2.0) / 4.0**n


def pm_wF_upper(xi: int, n: int) -> float:
    """||W||_F^2 <= xi^3 / 4^{2n} for xi-sparse CPTP PM weights."""
    if xi <= 0:
        return 0.0
    return float(xi) ** 3 / 4.0 ** (2 * n)


# ---------------------------------------------------------------------------
# PTM weight bounds
# ---------------------------------------------------------------------------

def ptm_entry_upper(d_in: int, d_out: int, unital: bool = False) -> float:
    """Entrywise PTM bound: sqrt(d_in/d_out), or sqrt(d_out/d_in) if the
    channel is contractive in the infinity norm (e.g. unital)."""
    if unital:
        return float(np.sqrt(d_out / d_in))
    return float(np.sqrt(d_in / d_out))


def ptm_w11_uppers(xi: int, d_in: int, d_out: int, unital: bool = False) -> dict:
    """1-to-1 bounds on the PTM weight: the unital branch xi*sqrt(d_out/d_in)
    (only reported when the flag is set) and the sparsity branch sqrt(xi)*d_in."""
    out = {"sparsity_bound": float(np.sqrt(max(xi, 0)) * d_in)}
    out["unital_bound"] = float(xi * np.sqrt(d_out / d_in)) if unital else None
    return out


def ptm_wF_upper(d_in: int, d_out: int) -> float:
    """||W||_F^2 <= d_in^2 - d_in/d_out; equality for unitary square channels."""
    return float(d_in**2 - d_in / d_out)


def alt_ptm_wF2(j: ChoiMatrix) -> float:
    """Squared Frobenius norm of the weight in the rescaled PTM convention:
    Tr(J^2)/(d_in d_out) - 1/d_out^2."""
    purity = float(np.trace(j.mat @ j.mat).real)
    return purity / (j.d_in * j.d_out) - 1.0 / j.d_out**2


# ---------------------------------------------------------------------------
# equivariant norms
# ---------------------------------------------------------------------------

def _trace_norm(mat: np.ndarray) -> float:
    return float(np.linalg.svd(np.asarray(mat), compute_uv=False).sum())


def eq_norm_1(blocks, dims) -> float:
    """||W||_{eq,1} = sum_lambda d_lambda ||W_lambda||_1 (trace norms)."""
    if len(blocks) != len(dims):
        raise ValueError("one irrep dimension required per block")
    return float(sum(d * _trace_norm(b) for d, b in zip(dims, blocks)))


def eq_norm_F2(blocks, dims) -> float:
    """||W||_{eq,F}^2 = sum_lambda d_lambda ||W_lambda||_F^2."""
    if len(blocks) != len(dims):
        raise ValueError("one irrep dimension required per block")
    return float(sum(d * np.sum(np.abs(np.asarray(b)) ** 2) for d, b in zip(dims, blocks)))


def eq_norm_bounds(xi_eq: int, group_order: int, eta: float) -> dict:
    """Factors bounding the equivariant 1-norm: (|G| Xi)^{1/4} (to be
    multiplied by the equivariant Frobenius norm) and eta sqrt(|G| Xi)."""
    return {
        "fourth_root_bound_factor": float((group_order * xi_eq) ** 0.25),
        "spectral_bound": float(eta * np.sqrt(group_order * xi_eq)),
    }


# ---------------------------------------------------------------------------
# Kraus witness
# ---------------------------------------------------------------------------

def kraus_frobenius_total(k: KrausChannel) -> float:
    """sum_i ||K_i||_F^2 = Tr(sum_i K_i^dag K_i) = d_in for every CPTP channel."""
    return float(np.sum(np.abs(k.ops) ** 2))
