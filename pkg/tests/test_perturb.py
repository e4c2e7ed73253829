import numpy as np
import pytest

from qpac import channels as ch
from qpac import perturb
from qpac.pauli import random_state

E = np.e


def pm_pair(weights, perturbations, n=1):
    return perturb.PerturbationPair(
        "pm", weights, perturbations, dims=[(2**n, 2**n)] * len(weights)
    )


def scaled_matrix(norm11, shape=(4, 4), seed=0):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=shape)
    if shape[0] == shape[1]:
        m = (m + m.T) / 2
    return m * (norm11 / np.abs(m).sum())


def test_pm_bound_single_layer():
    w = scaled_matrix(0.5)
    u = scaled_matrix(0.1, seed=1)
    bound = perturb.pm_deviation_bound(pm_pair([w], [u]))
    assert abs(bound - E * 0.1) < 1e-12


def test_pm_bound_zero_perturbation():
    w = scaled_matrix(0.5)
    assert perturb.pm_deviation_bound(pm_pair([w], [np.zeros((4, 4))])) == 0.0


def test_pm_bound_two_layers():
    weights = [scaled_matrix(0.5), scaled_matrix(0.3, seed=2)]
    perts = [scaled_matrix(0.1, seed=3), scaled_matrix(0.05, seed=4)]
    bound = perturb.pm_deviation_bound(pm_pair(weights, perts))
    assert abs(bound - E * (0.1 * 0.3 + 0.05)) < 1e-12


def test_pm_bound_rejects_invalid_scale():
    weights = [scaled_matrix(0.5), scaled_matrix(0.3, seed=2)]
    perts = [scaled_matrix(0.3, seed=3), scaled_matrix(0.05, seed=4)]
    pair = pm_pair(weights, perts)
    assert not pair.scale_valid
    with pytest.raises(ValueError):
        perturb.pm_deviation_bound(pair)


def test_ptm_bound_factors_cancel_single_qubit():
    w = scaled_matrix(0.5)
    u = scaled_matrix(0.1, seed=1)
    pair = perturb.PerturbationPair("ptm", [w], [u], dims=[(2, 2)])
    assert abs(perturb.ptm_deviation_bound(pair) - E * 0.1) < 1e-12


def test_ptm_bound_rectangular_chain():
    w1 = scaled_matrix(0.6, shape=(4, 16), seed=5)
    w2 = scaled_matrix(0.5, shape=(4, 4), seed=6)
    u1 = scaled_matrix(0.2, shape=(4, 16), seed=7)
    u2 = scaled_matrix(0.1, shape=(4, 4), seed=8)
    pair = perturb.PerturbationPair(
        "ptm", [w1, w2], [u1, u2], dims=[(4, 2), (2, 2)]
    )
    expected = E * np.sqrt(2) * (0.2 * 0.5 / 2 + 0.1 / np.sqrt(2))
    assert abs(perturb.ptm_deviation_bound(pair) - expected) < 1e-12


def test_ptm_bound_rejects_broken_chain():
    pair = perturb.PerturbationPair(
        "ptm",
        [scaled_matrix(0.5), scaled_matrix(0.5, seed=1)],
        [np.zeros((4, 4))] * 2,
        dims=[(2, 2), (4, 4)],
    )
    with pytest.raises(ValueError):
        perturb.ptm_deviation_bound(pair)


def test_eq_bound_scalar_case():
    pair = perturb.PerturbationPair(
        "eq",
        [{"t": np.array([[0.5]])}],
        [{"t": np.array([[0.05]])}],
        dims=[(1, 1)],
        eq_dims=[{"t": 1}],
    )
    assert abs(perturb.eq_deviation_bound(pair) - E * 0.05) < 1e-12
    zero = perturb.PerturbationPair(
        "eq",
        [{"t": np.array([[0.5]])}],
        [{"t": np.zeros((1, 1))}],
        dims=[(1, 1)],
        eq_dims=[{"t": 1}],
    )
    assert perturb.eq_deviation_bound(zero) == 0.0


def test_eq_bound_two_layer_sum():
    pair = perturb.PerturbationPair(
        "eq",
        [{"t": np.array([[10.0]])}, {"t": np.array([[0.4]])}],
        [{"t": np.array([[0.1]])}, {"t": np.array([[0.2]])}],
        dims=[(1, 1)] * 2,
        eq_dims=[{"t": 1}] * 2,
    )
    assert abs(perturb.eq_deviation_bound(pair) - E * (0.1 * 0.4 + 0.2)) < 1e-12


def test_actual_deviation_zero_perturbation(rng):
    chi = ch.choi_to_pm(ch.kraus_to_choi(ch.random_cptp(2, 2, 2, rng)))
    w = chi.chi - np.eye(4) / 4
    pair = pm_pair([w], [np.zeros((4, 4))])
    assert perturb.actual_deviation(pair, random_state(2, rng)) == 0.0


def test_actual_deviation_single_entry_oracle(rng):
    # planted single off-diagnoal entry pair in U: expand the sum by hand
    from qpac.pauli import pauli_basis

    stack = pauli_basis(1)
    chi = ch.choi_to_pm(ch.kraus_to_choi(ch.random_cptp(2, 2, 2, rng))).chi
    w = chi - np.eye(4) / 4
    u = np.zeros((4, 4), dtype=complex)
    u[1, 2] = 0.01j
    u[2, 1] = -0.01j
    pair = pm_pair([w], [u])
    rho = random_state(2, rng)
    delta = np.zeros((2, 2), dtype=complex)
    for a in range(4):
        for b in range(4):
            delta += u[a, b] * stack[a] @ rho @ stack[b]
    expected = np.max(np.abs(np.real(np.diagonal(delta))))
    assert abs(perturb.actual_deviation(pair, rho) - expected) < 1e-12


def test_monotonicity_in_perturbation_scale(rng):
    weights = [scaled_matrix(0.5), scaled_matrix(0.3, seed=2)]
    perts = [scaled_matrix(0.1, seed=3), scaled_matrix(0.05, seed=4)]
    base = perturb.pm_deviation_bound(pm_pair(weights, perts))
    for c in (0.25, 0.5, 0.75):
        scaled = perturb.pm_deviation_bound(
            pm_pair(weights, [c * p for p in perts])
        )
        assert abs(scaled - c * base) < 1e-12


def test_recursion_check_zero_and_random(rng):
    weights = [scaled_matrix(0.5), scaled_matrix(0.3, seed=2)]
    zero = pm_pair(weights, [np.zeros((4, 4))] * 2)
    recs = perturb.recursion_check(zero, random_state(2, rng))
    assert all(r["delta"] == 0.0 for r in recs)

    cfg = perturb.McConfig(formalism="pm", mode="cptp-pair", trials=1, seed=11, L=3, n=1)
    for trial in range(40):
        rng_t = np.random.default_rng(np.random.SeedSequence([7, trial]))
        layers = [perturb._sample_pm_layer(rng_t, 1, "cptp-pair", 3) for _ in range(3)]
        pair = pm_pair([w for w, _ in layers], [u for _, u in layers])
        recs = perturb.recursion_check(pair, random_state(2, rng_t))
        assert all(r["holds"] for r in recs)
        assert recs[0]["delta"] <= perturb._entry_norm(pair.perturbations[0]) + 1e-9


def test_unrolled_recursion_below_closed_form(rng):
    for seed in range(30):
        rng_t = np.random.default_rng(seed)
        L = int(rng_t.integers(1, 4))
        layers = [perturb._sample_pm_layer(rng_t, 1, "free", L) for _ in range(L)]
        pair = pm_pair([w for w, _ in layers], [u for _, u in layers])
        if not pair.scale_valid:
            continue
        assert (
            perturb.unrolled_recursion_bound(pair)
            <= perturb.pm_deviation_bound(pair) + 1e-12
        )


@pytest.mark.parametrize("formalism,mode", [
    ("pm", "cptp-pair"),
    ("pm", "free"),
    ("ptm", "cptp-pair"),
    ("ptm", "free"),
    ("eq", "cptp-pair"),
    ("eq", "free"),
])
def test_mc_verify_no_violations(formalism, mode):
    dims = ((4, 2), (2, 2)) if formalism == "ptm" else None
    cfg = perturb.McConfig(
        formalism=formalism, mode=mode, trials=300, seed=5, L=2, n=1, dims=dims
    )
    report = perturb.mc_verify(cfg)
    assert report["violations"] == 0
    assert report["max_ratio"] <= 1.0 + 1e-9
    assert report["trials"] == 300


def test_mc_verify_deterministic_across_workers():
    cfg = perturb.McConfig(formalism="pm", mode="free", trials=64, seed=3, L=2, n=1)
    r1 = perturb.mc_verify(cfg, workers=1)
    r2 = perturb.mc_verify(cfg, workers=2)
    assert r1 == r2


def test_mc_verify_rejects_zero_trials():
    with pytest.raises(ValueError):
        perturb.McConfig(trials=0)
