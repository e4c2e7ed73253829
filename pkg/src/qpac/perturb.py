"""Closed-form perturbation bounds and their Monte-Carlo verification.

For layer weights W_j perturbed by U_j with ||U_j|| <= ||W_j|| / L in the
formalism's norm, the change of the output probability vector satisfies

    PM:   ||f' - f||_inf <= e sum_j ||U_j||_{1,1} prod_{l>j} ||W_l||_{1,1}
    PTM:  ||f' - f||_inf <= e sqrt(d_out^L) sum_j ||U_j||_{1,1} / sqrt(d_in^j)
                              prod_{l>j} ||W_l||_{1,1}
    EQ:   ||f' - f||_inf <= e sum_j ||U_j||_{eq,1} prod_{l>j} ||W_l||_{eq,1}

with the equivariant condition imposed block-wise.  The perturbed map is a
linear (not necessarily CPTP) map; `mc_verify` samples stacks and checks
that the simulated deviation never exceeds the closed form.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import e as _e

import numpy as np

from . import equivariant as eqv
from .channels import (
    ChoiMatrix,
    apply_choi,
    apply_pm,
    apply_ptm,
    TransferMatrix,
    channel_to_weight,
    choi_to_pm,
    depolarizing_ptm,
    kraus_to_choi,
    kraus_to_ptm,
    random_cptp,
    random_sparse_pm_channel,
)
from .norms import eq_norm_1
from .pauli import random_state

VIOLATION_SLACK = 1e-9


def _entry_norm(m) -> float:
    return float(np.abs(np.asarray(m)).sum())


def _trace_norm(m) -> float:
    m = np.asarray(m)
    if np.allclose(m, m.conj().T, atol=1e-12):
        return float(np.abs(np.linalg.eigvalsh(m)).sum())
    return float(np.linalg.svd(m, compute_uv=False).sum())


@dataclass(frozen=True)
class PerturbationPair:
    """Per-layer weights and perturbations in one formalism.

    weights / perturbations:
      pm  -> list of 4^n x 4^n arrays
      ptm -> list of (d_out^2, d_in^2) arrays, dims chained
      eq  -> list of dicts {irrep label: block}
    dims: per-layer (d_in, d_out); for eq these are the square layer dims.
    eq_dims: per-layer dict {irrep label: d_lambda} (eq only).
    """

    formalism: str
    weights: list
    perturbations: list
    dims: list = None
    eq_dims: list = None

    def __post_init__(self):
        if self.formalism not in ("pm", "ptm", "eq"):
            raise ValueError(f"unknown formalism {self.formalism!r}")
        if len(self.weights) != len(self.perturbations):
            raise ValueError("need one perturbation per layer")
        if len(self.weights) == 0:
            raise ValueError("empty layer list")

    @property
    def L(self) -> int:
        return len(self.weights)

    @property
    def scale_valid(self) -> bool:
        if self.formalism == "eq":
            for w, u in zip(self.weights, self.perturbations):
                for label, ub in u.items():
                    wn = _trace_norm(w.get(label, np.zeros_like(ub)))
                    if _trace_norm(ub) > wn / self.L + 1e-12:
                        return False
            return True
        for w, u in zip(self.weights, self.perturbations):
            if _entry_norm(u) > _entry_norm(w) / self.L + 1e-12:
                return False
        return True


def _layer_norms(pair: PerturbationPair) -> tuple[list, list]:
    if pair.formalism == "eq":
        wn = [
            eq_norm_1(list(w.values()), [pair.eq_dims[j][k] for k in w])
            for j, w in enumerate(pair.weights)
        ]
        un = [
            eq_norm_1(list(u.values()), [pair.eq_dims[j][k] for k in u])
            for j, u in enumerate(pair.perturbations)
        ]
    else:
        wn = [_entry_norm(w) for w in pair.weights]
        un = [_entry_norm(u) for u in pair.perturbations]
    return wn, un


def pm_deviation_bound(pair: PerturbationPair) -> float:
    if pair.formalism != "pm":
        raise ValueError("expected a PM pair")
    if not pair.scale_valid:
        raise ValueError("perturbation violates the 1/L scale condition")
    wn, un = _layer_norms(pair)
    return _e * sum(
        un[j] * float(np.prod(wn[j + 1 :])) for j in range(pair.L)
    )


def ptm_deviation_bound(pair: PerturbationPair) -> float:
    if pair.formalism != "ptm":
        raise ValueError("expected a PTM pair")
    if pair.dims is None:
        raise ValueError("PTM bound needs the dimension chain")
    for (d_in, d_out), (d_in2, _) in zip(pair.dims, pair.dims[1:]):
        if d_out != d_in2:
            raise ValueError("dimension chain mismatch")
    if not pair.scale_valid:
        raise ValueError("perturbation violates the 1/L scale condition")
    wn, un = _layer_norms(pair)
    d_out_last = pair.dims[-1][1]
    total = sum(
        un[j] / np.sqrt(pair.dims[j][0]) * float(np.prod(wn[j + 1 :]))
        for j in range(pair.L)
    )
    return _e * np.sqrt(d_out_last) * total


def eq_deviation_bound(pair: PerturbationPair) -> float:
    if pair.formalism != "eq":
        raise ValueError("expected an equivariant pair")
    if not pair.scale_valid:
        raise ValueError("perturbation violates the block-wise 1/L condition")
    wn, un = _layer_norms(pair)
    return _e * sum(
        un[j] * float(np.prod(wn[j + 1 :])) for j in range(pair.L)
    )


def deviation_bound(pair: PerturbationPair) -> float:
    return {
        "pm": pm_deviation_bound,
        "ptm": ptm_deviation_bound,
        "eq": eq_deviation_bound,
    }[pair.formalism](pair)


# ---------------------------------------------------------------------------
# simulated deviations
# ---------------------------------------------------------------------------

def _pm_chi(w: np.ndarray) -> np.ndarray:
    size = w.shape[0]
    return w + np.eye(size) / size


def _layer_maps(pair: PerturbationPair, decomps=None):
    """Per-layer (original, perturbed) apply callables."""
    maps = []
    for j in range(pair.L):
        w, u = pair.weights[j], pair.perturbations[j]
        if pair.formalism == "pm":
            chi0, chi1 = _pm_chi(w), _pm_chi(w + u)
            maps.append(
                (lambda r, c=chi0: apply_pm(c, r), lambda r, c=chi1: apply_pm(c, r))
            )
        elif pair.formalism == "ptm":
            d_in, d_out = pair.dims[j]
            r0 = TransferMatrix(w + depolarizing_ptm(d_in, d_out), d_in, d_out)
            r1 = TransferMatrix(w + u + depolarizing_ptm(d_in, d_out), d_in, d_out)
            maps.append(
                (lambda r, t=r0: apply_ptm(t, r), lambda r, t=r1: apply_ptm(t, r))
            )
        else:
            d_in, d_out = pair.dims[j]
            dec = decomps[j]
            j0 = eqv.build_equivariant_choi(dec, w, d_in, d_out)
            j1 = eqv.build_equivariant_choi(
                dec, {k: w.get(k, 0) + u.get(k, 0) for k in {*w, *u}}, d_in, d_out
            )
            maps.append(
                (lambda r, c=j0: apply_choi(c, r), lambda r, c=j1: apply_choi(c, r))
            )
    return maps


def actual_deviation(pair: PerturbationPair, rho_in: np.ndarray, decomps=None) -> float:
    """Infinity norm of the output probability-vector difference."""
    maps = _layer_maps(pair, decomps)
    rho0, rho1 = rho_in, rho_in
    for f0, f1 in maps:
        rho0, rho1 = f0(rho0), f1(rho1)
    p0 = np.real(np.diagonal(rho0))
    p1 = np.real(np.diagonal(rho1))
    return float(np.max(np.abs(p1 - p0)))


def recursion_check(pair: PerturbationPair, rho_in: np.ndarray, decomps=None) -> list:
    """Per-layer trace-norm deviations against the recursion right-hand side
    Delta_{j+1} <= nu ||U|| + mu (||W|| + ||U||) Delta_j."""
    wn, un = _layer_norms(pair)
    if pair.formalism == "ptm":
        mu = [float(np.sqrt(d_out / d_in)) for d_in, d_out in pair.dims]
    else:
        mu = [1.0] * pair.L
    nu = mu
    maps = _layer_maps(pair, decomps)
    rho0, rho1 = rho_in, rho_in
    delta_prev = 0.0
    records = []
    for j, (f0, f1) in enumerate(maps):
        rho0, rho1 = f0(rho0), f1(rho1)
        delta = _trace_norm(rho1 - rho0)
        rhs = nu[j] * un[j] + mu[j] * (wn[j] + un[j]) * delta_prev
        records.append(
            {"layer": j + 1, "delta": delta, "recursion_rhs": rhs,
             "holds": delta <= rhs + VIOLATION_SLACK}
        )
        delta_prev = delta
    return records


def unrolled_recursion_bound(pair: PerturbationPair) -> float:
    """Exact unrolled recursion value sum_j nu_j u_j prod_{l>j} mu_l (w_l + u_l);
    under the 1/L condition this is at most the e-form closed bound."""
    wn, un = _layer_norms(pair)
    if pair.formalism == "ptm":
        mu = [float(np.sqrt(d_out / d_in)) for d_in, d_out in pair.dims]
    else:
        mu = [1.0] * pair.L
    total = 0.0
    for j in range(pair.L):
        prod = 1.0
        for l in range(j + 1, pair.L):
            prod *= mu[l] * (wn[l] + un[l])
        total += mu[j] * un[j] * prod
    return total


# ---------------------------------------------------------------------------
# Monte-Carlo verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class McConfig:
    formalism: str = "pm"
    mode: str = "cptp-pair"  # or "free"
    trials: int = 1000
    seed: int = 0
    L: int = 2
    n: int = 1  # qubits for pm layers
    dims: tuple = None  # ((d_in, d_out), ...) for ptm
    group: str = "z2"  # equivariant fixture group
    max_retries: int = 64

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in ("cptp-pair", "free"):
            raise ValueError(f"unknown sampler mode {self.mode!r}")


def _eq_fixture(group_name: str):
    group, table = eqv.load_group(group_name)
    if group_name == "z2":
        gen = np.array([[0, 1], [1, 0]], dtype=complex)
    elif group_name == "z3":
        gen = np.diag([1.0, np.exp(2j * np.pi / 3)])
    elif group_name == "z4":
        gen = np.diag([1.0, 1j])
    elif group_name == "s3":
        std = next(ir for ir in table.irreps if ir.dim == 2)
        rep = eqv.UnitaryRep(group, std.matrices)
        prod = eqv.product_rep(rep, rep)
        return eqv.isotypic_decompose(prod, table), 2
    else:
        raise ValueError(f"no equivariant fixture for group {group_name!r}")
    mats = np.stack(
        [np.linalg.matrix_power(gen, g) for g in range(group.order)]
    )
    rep = eqv.UnitaryRep(group, mats)
    prod = eqv.product_rep(rep, rep)
    return eqv.isotypic_decompose(prod, table), 2


def _rescale(mat: np.ndarray, target: float) -> np.ndarray:
    norm = _entry_norm(mat)
    if norm < 1e-300:
        return np.zeros_like(mat)
    return mat * (target / norm)


def _sample_pm_layer(rng, n, mode, L):
    if rng.uniform() < 0.5:
        chi = random_sparse_pm_channel(n, rng, support=int(rng.integers(2, 6)))
    else:
        chi = choi_to_pm(kraus_to_choi(random_cptp(2**n, 2**n, int(rng.integers(1, 4)), rng)))
    w = chi.chi - np.eye(4**n) / 4**n
    target = rng.uniform(0.05, 1.0) * _entry_norm(w) / L
    if mode == "cptp-pair":
        chi2 = choi_to_pm(
            kraus_to_choi(random_cptp(2**n, 2**n, int(rng.integers(1, 4)), rng))
        )
        u = _rescale(chi2.chi - chi.chi, target)
    else:
        g = rng.normal(size=w.shape) + 1j * rng.normal(size=w.shape)
        u = _rescale((g + g.conj().T) / 2, target)
    return w, u


def _sample_ptm_layer(rng, d_in, d_out, mode, L):
    min_rank = -(-d_in // d_out)
    k = random_cptp(d_in, d_out, max(int(rng.integers(1, 4)), min_rank), rng)
    w = channel_to_weight(kraus_to_ptm(k), "ptm").mat
    target = rng.uniform(0.05, 1.0) * _entry_norm(w) / L
    if mode == "cptp-pair":
        k2 = random_cptp(d_in, d_out, max(int(rng.integers(1, 4)), min_rank), rng)
        u = _rescale(kraus_to_ptm(k2).mat - kraus_to_ptm(k).mat, target)
    else:
        u = _rescale(rng.normal(size=w.shape), target)
    return w, u


def _sample_eq_layer(rng, decomp, d, mode, L):
    prod = decomp.rep

    def twirled_blocks():
        j = kraus_to_choi(random_cptp(d, d, int(rng.integers(1, 3)), rng)).mat
        tw = sum(
            prod.matrices[g] @ j @ prod.matrices[g].conj().T
            for g in range(prod.group.order)
        ) / prod.group.order
        return eqv.eq_weight_blocks(decomp, ChoiMatrix(tw, d, d))

    w = twirled_blocks()
    if mode == "cptp-pair":
        other = twirled_blocks()
        raw = {k: other[k] - w[k] for k in w}
    else:
        raw = {}
        for comp in decomp.components:
            m = comp.multiplicity
            g = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
            raw[comp.irrep.label] = (g + g.conj().T) / 2
    u = {}
    for k, mat in raw.items():
        wn = _trace_norm(w[k])
        un = _trace_norm(mat)
        if wn < 1e-14 or un < 1e-300:
            u[k] = np.zeros_like(mat)
        else:
            u[k] = mat * (rng.uniform(0.05, 1.0) * wn / L / un)
    return w, u


def _run_trial(cfg: McConfig, trial: int, decomp=None, d=None):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, trial]))
    if cfg.formalism == "pm":
        layers = [_sample_pm_layer(rng, cfg.n, cfg.mode, cfg.L) for _ in range(cfg.L)]
        pair = PerturbationPair(
            "pm", [w for w, _ in layers], [u for _, u in layers],
            dims=[(2**cfg.n, 2**cfg.n)] * cfg.L,
        )
        rho = random_state(2**cfg.n, rng, pure=bool(rng.integers(0, 2)))
        return actual_deviation(pair, rho), deviation_bound(pair)
    if cfg.formalism == "ptm":
        dims = cfg.dims or (((2, 2),) * cfg.L)
        layers = [
            _sample_ptm_layer(rng, d_in, d_out, cfg.mode, cfg.L) for d_in, d_out in dims
        ]
        pair = PerturbationPair(
            "ptm", [w for w, _ in layers], [u for _, u in layers], dims=list(dims)
        )
        rho = random_state(dims[0][0], rng, pure=bool(rng.integers(0, 2)))
        return actual_deviation(pair, rho), deviation_bound(pair)
    # equivariant
    layers = [_sample_eq_layer(rng, decomp, d, cfg.mode, cfg.L) for _ in range(cfg.L)]
    eq_dims = [
        {c.irrep.label: c.irrep.dim for c in decomp.components}
    ] * cfg.L
    pair = PerturbationPair(
        "eq",
        [w for w, _ in layers],
        [u for _, u in layers],
        dims=[(d, d)] * cfg.L,
        eq_dims=eq_dims,
    )
    rho = random_state(d, rng, pure=bool(rng.integers(0, 2)))
    return actual_deviation(pair, rho, decomps=[decomp] * cfg.L), deviation_bound(pair)


def _run_chunk(args):
    cfg, start, stop = args
    decomp = d = None
    if cfg.formalism == "eq":
        decomp, d = _eq_fixture(cfg.group)
    ratios = []
    violations = 0
    worst = 0.0
    for trial in range(start, stop):
        actual, bound = _run_trial(cfg, trial, decomp, d)
        if actual > bound + VIOLATION_SLACK:
            violations += 1
        if bound > 1e-14:
            r = actual / bound
            ratios.append(r)
            worst = max(worst, r)
    return violations, worst, ratios


def mc_verify(cfg: McConfig, workers: int = 1) -> dict:
    """Sample perturbation pairs and count violations of the closed-form bound.

    Trial randomness derives from (seed, trial index), so reports are
    identical for any worker count.
    """
    chunk_edges = np.linspace(0, cfg.trials, max(workers, 1) * 4 + 1, dtype=int)
    chunks = [
        (cfg, int(a), int(b)) for a, b in zip(chunk_edges, chunk_edges[1:]) if b > a
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, chunks))
    else:
        results = [_run_chunk(c) for c in chunks]
    violations = sum(r[0] for r in results)
    max_ratio = max((r[1] for r in results), default=0.0)
    ratios = np.concatenate([np.asarray(r[2]) for r in results]) if results else []
    hist, edges = np.histogram(ratios, bins=21, range=(0.0, 1.05))
    return {
        "formalism": cfg.formalism,
        "mode": cfg.mode,
        "trials": cfg.trials,
        "violations": int(violations),
        "max_ratio": float(max_ratio),
        "seed": cfg.seed,
        "histogram": {
            "edges": [float(x) for x in edges],
            "counts": [int(c) for c in hist],
            "over_one": int(np.sum(np.asarray(ratios) > 1.0)) if len(ratios) else 0,
        },
    }
