"""The explicit PAC-Bayes bound pipeline.

Every ingredient of the margin bound is evaluated in closed form: the beta
amplification terms and their admissible ranges, the Gaussian tail threshold,
the noise-scale ceiling imposed by the margin condition, the KL divergence at
that ceiling, the covering-net size over discretized beta, and the final
bound

    L_0 <= L_gamma_hat + 4 sqrt((KL + ln(6 N N_beta / delta)) / (N - 1)).

The headline complexity term beta * sqrt(sum_j ||W_j||_F^2) is reported
alongside; it is the x-axis of the gap-correlation experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import e as _e

import numpy as np
from scipy.special import logsumexp

CSV_COLUMNS = [
    "run_id",
    "seed",
    "formalism",
    "L",
    "beta",
    "fro_sum",
    "xi_max",
    "complexity_term",
    "train_loss_margin",
    "test_loss_0",
    "gap",
    "bound_value",
]


# ---------------------------------------------------------------------------
# beta terms and ranges
# ---------------------------------------------------------------------------

def beta_pm(w11: list) -> float:
    """beta_PM = sum_j prod_{l>j} ||W_l||_{1,1} (empty product = 1)."""
    if len(w11) == 0:
        raise ValueError("empty layer list")
    return float(sum(np.prod(w11[j + 1 :]) for j in range(len(w11))))


def beta_ptm(w11: list, dims: list) -> float:
    """beta_PTM = sqrt(d_out^L) sum_j prod_{l>j} ||W_l||_{1,1} / sqrt(d_in^j)."""
    if len(w11) == 0:
        raise ValueError("empty layer list")
    if len(dims) != len(w11):
        raise ValueError("need one (d_in, d_out) pair per layer")
    total = sum(
        np.prod(w11[j + 1 :]) / np.sqrt(dims[j][0]) for j in range(len(w11))
    )
    return float(np.sqrt(dims[-1][1]) * total)


def beta_eq(eq1: list) -> float:
    """beta_eq has the PM form with equivariant 1-norms."""
    return beta_pm(eq1)


def _geometric_sum(c: float, L: int) -> float:
    # sum_{j=0}^{L-1} c^j, handling c = 1 exactly
    return float(sum(c**j for j in range(L)))


def pm_beta_range(n: int, L: int, xi_max: int) -> tuple[float, float]:
    """[1, M(n, L, xi_max)] with M the geometric sum of
    C = (2 xi^2 + xi - 2)/4^n; the C -> 1 limit returns L."""
    c = max((2.0 * xi_max**2 + xi_max - 2.0) / 4.0**n, 0.0)
    return 1.0, max(_geometric_sum(c, L), 1.0)


def ptm_layer_norm_cap(xi: int, d_in: int, d_out: int, unital: bool) -> float:
    """The per-layer cap C_l on ||W_l||_{1,1} used in the beta range:
    xi sqrt(d_out/d_in) for unital layers, else the sparsity-based bound."""
    if unital:
        return float(xi * np.sqrt(d_out / d_in))
    return float(
        min(
            np.sqrt(xi) * d_in,
            np.sqrt(max(xi * (d_in**2 - d_in / d_out), 0.0)),
        )
    )


def ptm_beta_range(dims: list, xis: list, unital: list) -> tuple[float, float]:
    caps = [
        ptm_layer_norm_cap(xi, d_in, d_out, u)
        for xi, (d_in, d_out), u in zip(xis, dims, unital)
    ]
    lo = float(np.sqrt(dims[-1][1] / dims[-1][0]))
    hi = beta_ptm(caps, dims)
    return lo, max(hi, lo)


def eq_beta_range(eta: float, group_order: int, xi_eq: int, L: int) -> tuple[float, float]:
    c = float(eta * np.sqrt(group_order * xi_eq))
    return 1.0, max(_geometric_sum(c, L), 1.0)


def beta_ranges(formalism: str, **kw) -> tuple[float, float]:
    if formalism == "pm":
        return pm_beta_range(kw["n"], kw["L"], kw["xi_max"])
    if formalism == "ptm":
        return ptm_beta_range(kw["dims"], kw["xis"], kw["unital"])
    if formalism == "eq":
        return eq_beta_range(kw["eta"], kw["group_order"], kw["xi_eq"], kw["L"])
    raise ValueError(f"unknown formalism {formalism!r}")


def select_beta_tilde(beta: float, beta_lo: float, L: int) -> float:
    """Nearest point of the geometric grid with ratio (1 + 1/L) starting at
    beta_lo; the covering construction guarantees |beta - beta_tilde| <= beta/L."""
    if L == 1:
        return beta
    if beta <= beta_lo:
        return beta_lo
    step = np.log1p(1.0 / L)
    k = round(np.log(beta / beta_lo) / step)
    return float(beta_lo * (1.0 + 1.0 / L) ** k)


# ---------------------------------------------------------------------------
# tail, noise ceiling, KL, covering
# ---------------------------------------------------------------------------

def log_two_sum_pow2(xis: list) -> float:
    """ln(2 sum_j 2^{xi_j}), evaluated in log space (xi can be thousands)."""
    return float(np.log(2.0) + logsumexp(np.asarray(xis, dtype=float) * np.log(2.0)))


def tail_factor(xis: list, d_max: int = 1) -> float:
    """t / sigma = d_max sqrt(2 xi_max ln(2 sum_j 2^{xi_j})); d_max = 1 except
    in the equivariant formalism."""
    xi_max = max(xis)
    if xi_max <= 0:
        return 0.0
    return float(d_max * np.sqrt(2.0 * xi_max * log_two_sum_pow2(xis)))


def tail_threshold(sigma: float, xis: list, d_max: int = 1) -> float:
    """Perturbation-norm threshold exceeded with probability at most 1/2."""
    return sigma * tail_factor(xis, d_max)


def _margin_headroom(L: int) -> float:
    # the (1 - 1/L) slack absorbs beta discretization error; a single layer
    # has beta = 1 exactly and needs no discretization
    return 1.0 if L == 1 else 1.0 - 1.0 / L


def sigma_ceiling(
    gamma: float, L: int, beta_tilde: float, xis: list, d_max: int = 1
) -> float:
    """Largest prior/posterior standard deviation honouring the gamma/4
    margin condition."""
    if gamma <= 0:
        return 0.0
    if beta_tilde <= 0:
        raise ValueError("beta_tilde must be positive")
    tf = tail_factor(xis, d_max)
    if tf == 0.0:
        return np.inf
    return float(gamma * _margin_headroom(L) / (4.0 * _e * beta_tilde * tf))


def kl_upper(fro_sq_sum: float, sigma: float) -> float:
    """KL(N(w, sigma^2 I) || N(0, sigma^2 I)) = ||w||_2^2 / (2 sigma^2)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if fro_sq_sum == 0.0:
        return 0.0
    if np.isinf(sigma):
        return 0.0
    return float(fro_sq_sum / (2.0 * sigma**2))


def kl_substituted(
    gamma: float,
    L: int,
    beta_tilde: float,
    xis: list,
    fro_sq_sum: float,
    d_max: int = 1,
) -> float:
    """KL divergence with the sigma ceiling substituted in closed form."""
    xi_max = max(xis)
    if xi_max <= 0 or fro_sq_sum == 0.0:
        return 0.0
    num = 16.0 * _e**2 * d_max**2 * beta_tilde**2 * xi_max * log_two_sum_pow2(xis)
    return float(num / (gamma**2 * _margin_headroom(L) ** 2) * fro_sq_sum)


def covering_size(beta_lo: float, beta_hi: float, L: int) -> float:
    """N_beta <= L beta_max / beta_min over the discretized beta interval."""
    if beta_lo <= 0:
        raise ValueError("beta_lo must be positive")
    return float(L * max(beta_hi, beta_lo) / beta_lo)


def capped_beta_hi(
    beta_hi_closed: float, beta_lo: float, gamma: float, N: int, fro_sq_sum: float
) -> float:
    """min{gamma sqrt(N) / sqrt(sum ||W||_F^2), closed-form hi}: beyond the cap
    the bound is vacuous anyway, so the net never needs to reach further."""
    if fro_sq_sum > 0:
        cap = gamma * np.sqrt(N) / np.sqrt(fro_sq_sum)
        beta_hi_closed = min(beta_hi_closed, cap)
    return max(beta_hi_closed, beta_lo)


def pacbayes_bound(
    empirical_margin_loss: float, kl: float, covering: float, delta: float, N: int
) -> float:
    """Margin bound with the union-bound delta -> delta / N_beta applied."""
    if N < 2:
        raise ValueError("bound requires N >= 2")
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    if not 0 <= empirical_margin_loss <= 1:
        raise ValueError("empirical loss must be in [0, 1]")
    extra = np.log(6.0 * N * max(covering, 1.0) / delta)
    return float(empirical_margin_loss + 4.0 * np.sqrt((kl + extra) / (N - 1)))


def complexity_term(beta: float, fro_sq_sum: float) -> float:
    return float(beta * np.sqrt(fro_sq_sum))


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComplexityReport:
    formalism: str
    layer_xis: list
    layer_w11: list
    layer_wF2: list
    xi_max: int
    beta: float
    beta_lo: float
    beta_hi: float
    beta_tilde: float
    complexity_term: float
    tail_factor: float
    sigma_ceiling: float
    kl_upper: float
    covering_size: float
    bound_value: float
    inputs: dict = field(default_factory=dict)

    @property
    def fro_sum(self) -> float:
        return float(sum(self.layer_wF2))

    def to_dict(self) -> dict:
        out = {
            "formalism": self.formalism,
            "layer_xis": [int(x) for x in self.layer_xis],
            "layer_w11": [float(x) for x in self.layer_w11],
            "layer_wF2": [float(x) for x in self.layer_wF2],
            "xi_max": int(self.xi_max),
            "beta": self.beta,
            "beta_lo": self.beta_lo,
            "beta_hi": self.beta_hi,
            "beta_tilde": self.beta_tilde,
            "complexity_term": self.complexity_term,
            "tail_factor": self.tail_factor,
            "sigma_ceiling": self.sigma_ceiling,
            "kl_upper": self.kl_upper,
            "covering_size": self.covering_size,
            "bound_value": self.bound_value,
            "inputs": self.inputs,
        }
        return out


def complexity_report(
    formalism: str,
    layer_xis: list,
    layer_w11: list,
    layer_wF2: list,
    *,
    gamma: float,
    delta: float,
    N: int,
    empirical_margin_loss: float,
    n: int | None = None,
    dims: list | None = None,
    unital: list | None = None,
    eta: float | None = None,
    group_order: int | None = None,
    d_max: int = 1,
) -> ComplexityReport:
    """Run the whole pipeline for one trained model."""
    L = len(layer_xis)
    if not (len(layer_w11) == len(layer_wF2) == L) or L == 0:
        raise ValueError("per-layer lists must be non-empty and equally long")
    xi_max = int(max(layer_xis))
    fro_sum = float(sum(layer_wF2))
    if formalism == "pm":
        beta = beta_pm(layer_w11)
        lo, hi_closed = pm_beta_range(n, L, xi_max)
    elif formalism == "ptm":
        beta = beta_ptm(layer_w11, dims)
        lo, hi_closed = ptm_beta_range(dims, layer_xis, unital)
    elif formalism == "eq":
        beta = beta_eq(layer_w11)
        lo, hi_closed = eq_beta_range(eta, group_order, xi_max, L)
    else:
        raise ValueError(f"unknown formalism {formalism!r}")
    hi = capped_beta_hi(hi_closed, lo, gamma, N, fro_sum)
    covering = covering_size(lo, hi, L)
    b_tilde = select_beta_tilde(max(beta, lo), lo, L)
    sigma = sigma_ceiling(gamma, L, b_tilde, layer_xis, d_max)
    kl = kl_upper(fro_sum, sigma)
    bound = pacbayes_bound(empirical_margin_loss, kl, covering, delta, N)
    return ComplexityReport(
        formalism=formalism,
        layer_xis=list(layer_xis),
        layer_w11=[float(x) for x in layer_w11],
        layer_wF2=[float(x) for x in layer_wF2],
        xi_max=xi_max,
        beta=float(beta),
        beta_lo=float(lo),
        beta_hi=float(hi),
        beta_tilde=float(b_tilde),
        complexity_term=complexity_term(beta, fro_sum),
        tail_factor=tail_factor(layer_xis, d_max),
        sigma_ceiling=float(sigma),
        kl_upper=float(kl),
        covering_size=float(covering),
        bound_value=float(bound),
        inputs={
            "gamma": gamma,
            "delta": delta,
            "N": N,
            "L": L,
            "dims": dims,
            "d_max": d_max,
            "empirical_margin_loss": empirical_margin_loss,
        },
    )


# ---------------------------------------------------------------------------
# losses and correlation statistics
# ---------------------------------------------------------------------------

def margin_loss(outputs, labels, gamma: float) -> float:
    """Fraction of samples with f[y] <= gamma + max_{k != y} f[k].

    Ties count as errors (the margin condition uses <=), so gamma = 0 gives
    the standard classification error. Labels are 1-based.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    outputs = np.asarray(outputs, dtype=float)
    labels = np.asarray(labels, dtype=int)
    k = outputs.shape[1]
    if labels.min() < 1 or labels.max() > k:
        raise ValueError("label out of range")
    idx = labels - 1
    correct = outputs[np.arange(len(labels)), idx]
    masked = outputs.copy()
    masked[np.arange(len(labels)), idx] = -np.inf
    best_wrong = masked.max(axis=1)
    return float(np.mean(correct <= gamma + best_wrong))


def pearson_r(x, y) -> float | None:
    """Pearson correlation; None when either column has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.std(x) == 0.0 or np.std(y) == 0.0:
        return None
    return float(np.corrcoef(x, y)[0, 1])


def bootstrap_r_interval(
    x, y, level: float = 0.9, resamples: int = 2000, seed: int = 0
) -> tuple[float, float]:
    """Percentile bootstrap interval for the Pearson correlation."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB007]))
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    stats = []
    n = len(x)
    for _ in range(resamples):
        idx = rng.integers(0, n, size=n)
        r = pearson_r(x[idx], y[idx])
        if r is not None:
            stats.append(r)
    lo, hi = np.quantile(stats, [(1 - level) / 2, 1 - (1 - level) / 2])
    return float(lo), float(hi)


def gap_and_correlation(runs: list) -> dict:
    """Pearson r between the complexity term and the generalization gap,
    plus the full table in the CSV column order."""
    if len(runs) < 3:
        raise ValueError("need at least 3 runs")
    rows = []
    for run in runs:
        rec = run if isinstance(run, dict) else run.to_dict()
        rows.append({col: rec[col] for col in CSV_COLUMNS})
    comp = [row["complexity_term"] for row in rows]
    gap = [row["gap"] for row in rows]
    return {
        "pearson_r": pearson_r(comp, gap),
        "run_count": len(rows),
        "table": rows,
    }
