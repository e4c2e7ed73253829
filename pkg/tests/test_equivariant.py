import numpy as np
import pytest

from qpac import channels as ch
from qpac import equivariant as eq
from qpac.norms import eq_norm_1, eq_norm_F2
from qpac.pauli import pauli_basis


X = np.array([[0, 1], [1, 0]], dtype=complex)


def rep_from_generator(group, gen):
    """Cyclic-group rep from a single generator matrix (element g -> gen^g)."""
    mats = [np.linalg.matrix_power(gen, g) for g in range(group.order)]
    return eq.UnitaryRep(group, np.stack(mats))


@pytest.mark.parametrize("name", ["z2", "z3", "z4", "s3"])
def test_builtin_groups_load_and_validate(name):
    group, table = eq.load_group(name)
    assert sum(ir.dim**2 for ir in table.irreps) == group.order


def test_group_rejects_bad_table():
    with pytest.raises(ValueError):
        eq.FiniteGroup("bad", ("a", "b"), np.array([[0, 0], [1, 1]]))


def test_character_projectors_z2():
    group, table = eq.load_group("z2")
    rep = eq.UnitaryRep(group, np.stack([np.eye(4), np.kron(X, X)]))
    total = np.zeros((4, 4), dtype=complex)
    for ir in table.irreps:
        p = eq.character_projector(rep, ir)
        assert np.allclose(p @ p, p, atol=1e-10)
        assert np.allclose(p, p.conj().T, atol=1e-10)
        # rank = eigenspace dimension of X (x) X for the matching eigenvalue
        assert int(round(np.trace(p).real)) == 2
        total += p
    assert np.allclose(total, np.eye(4), atol=1e-10)


def test_character_projector_trivial_group():
    group = eq.FiniteGroup("triv", ("e",), np.array([[0]]))
    table = eq.IrrepTable(group, (eq.Irrep("t", 1, np.ones((1, 1, 1), dtype=complex)),))
    rep = eq.UnitaryRep(group, np.eye(3)[None, :, :])
    assert np.allclose(eq.character_projector(rep, table.irreps[0]), np.eye(3))


def test_regular_representation_z3():
    group, table = eq.load_group("z3")
    # regular rep: permutation matrices of left multiplication
    mats = np.zeros((3, 3, 3), dtype=complex)
    for g in range(3):
        for h in range(3):
            mats[g, group.table[g, h], h] = 1.0
    rep = eq.UnitaryRep(group, mats)
    for ir in table.irreps:
        p = eq.character_projector(rep, ir)
        assert int(round(np.trace(p).real)) == 1  # each irrep once (d_lambda = 1)
    decomp = eq.isotypic_decompose(rep, table)
    assert sorted(c.multiplicity for c in decomp.components) == [1, 1, 1]


def test_isotypic_decompose_single_qubit_z2():
    group, table = eq.load_group("z2")
    rep = eq.UnitaryRep(group, np.stack([np.eye(2), X]))
    decomp = eq.isotypic_decompose(rep, table)
    assert sorted(c.multiplicity for c in decomp.components) == [1, 1]
    assert eq.eq_param_count(decomp) == 2


def test_isotypic_decompose_product_rep_two_qubits():
    group, table = eq.load_group("z2")
    xx = np.kron(X, X)
    rep = eq.UnitaryRep(group, np.stack([np.eye(4), xx]))
    prod = eq.product_rep(rep, rep)  # 16-dimensional
    decomp = eq.isotypic_decompose(prod, table)
    mults = {c.irrep.label: c.multiplicity for c in decomp.components}
    assert sorted(mults.values()) == [8, 8]
    assert eq.eq_param_count(decomp) == 128
    # basis must block-diagonalize the rep as irrep (x) I_m
    s = decomp.basis
    for g in range(group.order):
        t = s.conj().T @ prod.matrices[g] @ s
        expected = np.zeros_like(t)
        for comp in decomp.components:
            blk = np.kron(comp.irrep.matrices[g], np.eye(comp.multiplicity))
            expected[comp.columns, comp.columns] = blk
        assert np.allclose(t, expected, atol=1e-9)


def test_trivial_group_decomposition():
    group = eq.FiniteGroup("triv", ("e",), np.array([[0]]))
    table = eq.IrrepTable(group, (eq.Irrep("t", 1, np.ones((1, 1, 1), dtype=complex)),))
    rep = eq.UnitaryRep(group, np.eye(5)[None, :, :])
    decomp = eq.isotypic_decompose(rep, table)
    assert decomp.components[0].multiplicity == 5
    assert eq.eq_param_count(decomp) == 25


def fixture_reps(name, rng=None):
    """(group, table, R_in, R_out) on small spaces for each builtin group."""
    group, table = eq.load_group(name)
    if name == "z2":
        gen = X
    elif name == "z3":
        gen = np.diag([1.0, np.exp(2j * np.pi / 3)])
    elif name == "z4":
        gen = np.diag([1.0, 1j])
    else:  # s3: the 2-dim standard irrep as the acting representation
        std = next(ir for ir in table.irreps if ir.dim == 2)
        rep = eq.UnitaryRep(group, std.matrices)
        return group, table, rep, rep
    rep = rep_from_generator(group, gen)
    return group, table, rep, rep


@pytest.mark.parametrize("name", ["z2", "z3", "z4", "s3"])
def test_equivariant_choi_baseline_is_depolarizing(name):
    group, table, r_in, r_out = fixture_reps(name)
    prod = eq.product_rep(r_in, r_out)
    decomp = eq.isotypic_decompose(prod, table)
    d = r_in.dim
    assert sum(c.irrep.dim * c.multiplicity for c in decomp.components) == d * d
    j = eq.build_equivariant_choi(decomp, {}, d, d)
    assert np.allclose(j.mat, np.eye(d * d) / d, atol=1e-10)
    assert ch.validate_cptp(j).is_cp


@pytest.mark.parametrize("name", ["z2", "z3", "z4", "s3"])
def test_built_channels_are_equivariant(name, rng):
    group, table, r_in, r_out = fixture_reps(name)
    prod = eq.product_rep(r_in, r_out)
    decomp = eq.isotypic_decompose(prod, table)
    d = r_in.dim
    for _ in range(5):
        blocks = {}
        for comp in decomp.components:
            m = comp.multiplicity
            g = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
            blocks[comp.irrep.label] = 0.1 * (g + g.conj().T) / 2
        j = eq.build_equivariant_choi(decomp, blocks, d, d)
        assert eq.check_equivariance(j, r_in, r_out) < 1e-9
        # round trip through block extraction
        back = eq.eq_weight_blocks(decomp, j)
        for comp in decomp.components:
            assert np.allclose(back[comp.irrep.label], blocks[comp.irrep.label], atol=1e-9)


def test_generic_channel_is_not_equivariant(rng):
    group, table, r_in, r_out = fixture_reps("z2")
    k = ch.random_cptp(2, 2, 2, rng)
    assert eq.check_equivariance(ch.kraus_to_choi(k), r_in, r_out) > 1e-6


def test_trivial_group_always_equivariant(rng):
    group = eq.FiniteGroup("triv", ("e",), np.array([[0]]))
    rep = eq.UnitaryRep(group, np.eye(2)[None, :, :])
    k = ch.random_cptp(2, 2, 2, rng)
    assert eq.check_equivariance(ch.kraus_to_choi(k), rep, rep) < 1e-12


def test_planted_diagonal_blocks_shift_choi_eigenvalues(rng):
    group, table, r_in, r_out = fixture_reps("z2")
    prod = eq.product_rep(r_in, r_out)
    decomp = eq.isotypic_decompose(prod, table)
    planted = {}
    for comp in decomp.components:
        m = comp.multiplicity
        planted[comp.irrep.label] = np.diag(rng.uniform(0.01, 0.2, size=m))
    j = eq.build_equivariant_choi(decomp, planted, 2, 2)
    expected = sorted(
        float(1 / 2 + v)
        for comp in decomp.components
        for v in np.diagonal(planted[comp.irrep.label]).real
        for _ in range(comp.irrep.dim)
    )
    got = sorted(np.linalg.eigvalsh(j.mat))
    assert np.allclose(got, expected, atol=1e-10)


def test_twirled_channel_lands_in_commutant(rng):
    group, table, r_in, r_out = fixture_reps("s3")
    prod = eq.product_rep(r_in, r_out)
    decomp = eq.isotypic_decompose(prod, table)
    j = ch.kraus_to_choi(ch.random_cptp(2, 2, 2, rng)).mat
    tw = sum(
        prod.matrices[g] @ j @ prod.matrices[g].conj().T for g in range(group.order)
    ) / group.order
    jt = ch.ChoiMatrix(tw, 2, 2)
    assert eq.off_block_mass(decomp, jt) < 1e-9
    assert eq.check_equivariance(jt, r_in, r_out) < 1e-9
    rep = ch.validate_cptp(jt)
    assert rep.is_cp and rep.is_tp


def test_block_norms_match_assembled_choi(rng):
    group, table, r_in, r_out = fixture_reps("z3")
    prod = eq.product_rep(r_in, r_out)
    decomp = eq.isotypic_decompose(prod, table)
    blocks, dims = [], []
    blocks_by_label = {}
    for comp in decomp.components:
        m = comp.multiplicity
        g = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
        b = 0.05 * (g + g.conj().T)
        blocks_by_label[comp.irrep.label] = b
        blocks.append(b)
        dims.append(comp.irrep.dim)
    j = eq.build_equivariant_choi(decomp, blocks_by_label, 2, 2)
    extracted = eq.eq_weight_blocks(decomp, j)
    ext_blocks = [extracted[c.irrep.label] for c in decomp.components]
    assert abs(eq_norm_1(blocks, dims) - eq_norm_1(ext_blocks, dims)) < 1e-9
    assert abs(eq_norm_F2(blocks, dims) - eq_norm_F2(ext_blocks, dims)) < 1e-9
