import numpy as np
import pytest
import scipy.sparse as sp

from ccstab.determinants import enumerate_determinants, mask_from_orbitals, orbitals_from_mask
from ccstab.hamiltonian import (
    DEGENERACY_TOL,
    DimensionMismatchError,
    Eigenpair,
    FciHamiltonian,
    IterativeFailureError,
    assemble,
    davidson,
    hf_energy,
    slater_condon_element,
    solve_eigenpair,
)
from ccstab.integrals import spinify
from ccstab.selfcheck import brute_force_matrix, random_integral_table

from conftest import fixture_metadata, fixture_path


def small_system(seed=0, norb=3, nelec=2, coupling=0.3):
    rng = np.random.default_rng(seed)
    table = random_integral_table(norb, nelec, rng, coupling=coupling)
    space = enumerate_determinants(2 * norb, nelec)
    return table, space, spinify(table)


class TestSlaterCondon:
    def test_diagonal_is_reference_expectation(self):
        table, space, ints = small_system()
        ref = space.reference
        occ = np.array(orbitals_from_mask(ref)) - 1
        expected = ints.h_so[occ, occ].sum()
        for i in occ:
            for j in occ:
                expected += 0.5 * ints.antisym[i, j, i, j]
        assert slater_condon_element(ref, ref, ints) == pytest.approx(expected, abs=1e-14)

    def test_triple_difference_vanishes(self):
        _, _, ints = small_system(norb=4, nelec=3)
        a = mask_from_orbitals((1, 2, 3))
        b = mask_from_orbitals((4, 5, 6))
        assert slater_condon_element(a, b, ints) == 0.0

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_two_electron_brute_force_oracle(self, seed):
        table, space, ints = small_system(seed, norb=2, nelec=2)
        built = assemble(space, ints).matrix.toarray()
        reference = brute_force_matrix(space, table)
        assert np.abs(built - reference).max() <= 1e-12

    @pytest.mark.parametrize("norb,nelec,seed", [(3, 2, 7), (4, 2, 8), (4, 3, 9), (3, 3, 10)])
    def test_oracle_equivalence_small_instances(self, norb, nelec, seed):
        table, space, ints = small_system(seed, norb=norb, nelec=nelec)
        built = assemble(space, ints).matrix.toarray()
        reference = brute_force_matrix(space, table)
        assert np.abs(built - reference).max() <= 1e-12


class TestAssemble:
    def test_symmetric(self):
        _, space, ints = small_system(11)
        mat = assemble(space, ints).matrix.toarray()
        assert np.abs(mat - mat.T).max() <= 1e-12

    def test_sparsity_limited_to_double_substitutions(self):
        _, space, ints = small_system(12, norb=4, nelec=3)
        mat = assemble(space, ints).matrix.tocoo()
        allowed = 0
        for a in space.dets:
            for b in space.dets:
                if (a ^ b).bit_count() <= 4:
                    allowed += 1
        assert mat.nnz <= allowed
        for r, c in zip(mat.row, mat.col):
            assert (space.dets[r] ^ space.dets[c]).bit_count() <= 4

    def test_dimension_mismatch(self):
        _, space, ints = small_system(13)
        other = enumerate_determinants(4, 2)
        with pytest.raises(DimensionMismatchError):
            assemble(other, ints)

    def test_reference_diagonal_is_hf_electronic_energy(self):
        _, space, ints = small_system(14)
        hmat = assemble(space, ints)
        assert hmat.matrix[0, 0] == pytest.approx(
            slater_condon_element(space.reference, space.reference, ints), abs=1e-12)


class TestSolveEigenpair:
    def test_one_by_one(self):
        space = enumerate_determinants(2, 2)
        hmat = FciHamiltonian(space=space, matrix=sp.csr_matrix(np.array([[-2.5]])),
                              e_core=0.3)
        eig = solve_eigenpair(hmat)
        assert eig.energy == -2.5
        assert eig.total == -2.2
        assert eig.gap == np.inf

    def test_two_by_two_closed_form(self):
        a, b, c = -1.0, 0.5, 0.3
        space = enumerate_determinants(2, 1)
        hmat = FciHamiltonian(space=space,
                              matrix=sp.csr_matrix(np.array([[a, c], [c, b]])),
                              e_core=0.0)
        eig = solve_eigenpair(hmat, "lowest")
        expected = (a + b) / 2 - np.sqrt(((a - b) / 2) ** 2 + c ** 2)
        assert eig.energy == pytest.approx(expected, abs=1e-14)

    def test_h2_fixture_total_energy(self, h2_problem):
        meta = fixture_metadata(fixture_path("h2_sto6g_r0.7414"))
        eig = solve_eigenpair(h2_problem.hmat)
        assert eig.total == pytest.approx(meta["expected"]["e_fci_total"], abs=1e-8)

    def test_variational_ordering(self, w4_problem):
        eig = solve_eigenpair(w4_problem.hmat)
        assert eig.total <= hf_energy(w4_problem.hmat)

    def test_residual_and_normalization(self, w6_problem):
        eig = solve_eigenpair(w6_problem.hmat)
        assert np.linalg.norm(eig.vector) == pytest.approx(1.0, abs=1e-12)
        assert eig.residual_norm <= 1e-9 * (1 + abs(eig.energy))
        assert eig.gap >= 0

    def test_kth_eigenpair_by_index(self):
        _, space, ints = small_system(15)
        hmat = assemble(space, ints)
        dense = np.linalg.eigvalsh(hmat.matrix.toarray())
        for k in (0, 1, 3):
            eig = solve_eigenpair(hmat, which=k)
            assert eig.energy == pytest.approx(dense[k], abs=1e-10)

    def test_degenerate_flagged(self):
        space = enumerate_determinants(2, 1)
        hmat = FciHamiltonian(space=space, matrix=sp.csr_matrix(np.eye(2) * -1.0),
                              e_core=0.0)
        eig = solve_eigenpair(hmat)
        assert eig.gap < DEGENERACY_TOL
        assert eig.degenerate

    def test_index_out_of_range(self):
        space = enumerate_determinants(2, 1)
        hmat = FciHamiltonian(space=space, matrix=sp.csr_matrix(np.eye(2)), e_core=0.0)
        with pytest.raises(DimensionMismatchError):
            solve_eigenpair(hmat, which=5)


class TestDavidson:
    def make_matrix(self, dim=400, seed=21):
        rng = np.random.default_rng(seed)
        mat = sp.random(dim, dim, density=0.01, random_state=seed).toarray()
        mat = 0.5 * (mat + mat.T) + np.diag(np.linspace(0.0, 10.0, dim))
        return sp.csr_matrix(mat)

    def test_matches_dense_spectrum(self):
        mat = self.make_matrix()
        evals, evecs = davidson(mat, nroots=3, tol=1e-10)
        dense = np.linalg.eigvalsh(mat.toarray())[:3]
        assert np.abs(evals - dense).max() <= 1e-9
        for i in range(3):
            resid = mat @ evecs[:, i] - evals[i] * evecs[:, i]
            assert np.linalg.norm(resid) <= 1e-10 * 10

    def test_iterative_path_in_solve_eigenpair(self):
        mat = self.make_matrix(dim=300, seed=22)
        space = enumerate_determinants(300, 1)
        hmat = FciHamiltonian(space=space, matrix=mat, e_core=0.0)
        eig = solve_eigenpair(hmat, which=1, dense_limit=10)
        dense = np.linalg.eigvalsh(mat.toarray())
        assert eig.energy == pytest.approx(dense[1], abs=1e-8)
        assert eig.gap == pytest.approx(
            min(dense[1] - dense[0], dense[2] - dense[1]), abs=1e-6)

    def test_failure_carries_best_residual(self):
        mat = self.make_matrix(dim=200, seed=23)
        with pytest.raises(IterativeFailureError) as err:
            davidson(mat, nroots=1, tol=1e-14, max_iter=2)
        assert err.value.best_residual > 0


class TestHfEnergy:
    def test_reference_diagonal_plus_core(self):
        _, space, ints = small_system(31)
        hmat = assemble(space, ints)
        assert hf_energy(hmat) == pytest.approx(
            hmat.matrix[0, 0] + ints.e_core, abs=1e-14)

    def test_equals_lowest_diagonal_for_energy_ordered(self, h2_problem):
        hmat = h2_problem.hmat
        diag = hmat.diagonal
        assert hf_energy(hmat) == pytest.approx(diag.min() + hmat.e_core, abs=1e-12)
