import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ccstab.cluster import (
    AmplitudeVector,
    InvalidShiftError,
    NotIntermediatelyNormalizableError,
    build_norm_metric,
    cc_to_ci,
    ci_to_cc,
    cluster_adjoint_apply,
    cluster_apply,
    cluster_csr,
    dual_norm,
    embed_values,
    exp_apply,
    exp_csr,
    get_excitation_table,
    vnorm,
)
from ccstab.determinants import (
    CONVENTIONS,
    ExcitationIndex,
    enumerate_determinants,
)
from ccstab.hamiltonian import FciHamiltonian, assemble, solve_eigenpair
from ccstab.integrals import spinify
from ccstab.selfcheck import excitation_matrix, random_integral_table


def table_for(k, n, convention="paper_signless"):
    return get_excitation_table(enumerate_determinants(k, n), convention)


def random_amplitudes(table, rng, scale=0.3):
    return AmplitudeVector(scale * rng.standard_normal(table.n_amplitudes),
                           table.excitations)


class TestClusterApply:
    def test_zero_amplitudes(self):
        tab = table_for(6, 2)
        v = np.ones(tab.space.size)
        t = AmplitudeVector(np.zeros(tab.n_amplitudes), tab.excitations)
        assert np.all(cluster_apply(t, v, tab) == 0.0)

    def test_single_amplitude_on_reference(self):
        tab = table_for(4, 2)
        mu = ExcitationIndex((1,), (3,))
        vals = np.zeros(tab.n_amplitudes)
        vals[tab.position[mu]] = 0.7
        t = AmplitudeVector(vals, tab.excitations)
        e0 = np.zeros(tab.space.size)
        e0[0] = 1.0
        out = cluster_apply(t, e0, tab)
        target = tab.space.index_of[0b110]   # orbitals {2, 3}
        expected = np.zeros(tab.space.size)
        expected[target] = 0.7
        assert np.array_equal(out, expected)

    @pytest.mark.parametrize("convention", CONVENTIONS)
    def test_matches_dense_matrix_sum(self, convention):
        rng = np.random.default_rng(1)
        space = enumerate_determinants(6, 2)
        tab = get_excitation_table(space, convention)
        assert space.size <= 100
        t = random_amplitudes(tab, rng)
        dense = sum(val * excitation_matrix(mu, space, convention)
                    for mu, val in zip(tab.excitations, t.values))
        v = rng.standard_normal(space.size)
        assert np.allclose(cluster_apply(t, v, tab), dense @ v, atol=1e-13)


class TestAdjointApply:
    def test_annihilates_reference(self):
        rng = np.random.default_rng(2)
        tab = table_for(6, 3)
        t = random_amplitudes(tab, rng)
        e0 = np.zeros(tab.space.size)
        e0[0] = 1.0
        assert np.all(cluster_adjoint_apply(t, e0, tab) == 0.0)

    def test_zero_amplitudes(self):
        tab = table_for(4, 2)
        t = AmplitudeVector(np.zeros(tab.n_amplitudes), tab.excitations)
        assert np.all(cluster_adjoint_apply(t, np.ones(tab.space.size), tab) == 0.0)

    @pytest.mark.parametrize("convention", CONVENTIONS)
    def test_transpose_oracle(self, convention):
        rng = np.random.default_rng(3)
        space = enumerate_determinants(5, 2)
        tab = get_excitation_table(space, convention)
        t = random_amplitudes(tab, rng)
        dense = cluster_csr(embed_values(t, tab), tab).toarray()
        v = rng.standard_normal(space.size)
        assert np.allclose(cluster_adjoint_apply(t, v, tab), dense.T @ v, atol=1e-13)


class TestExponential:
    @pytest.mark.parametrize("convention", CONVENTIONS)
    def test_inverse_pair(self, convention):
        rng = np.random.default_rng(4)
        space = enumerate_determinants(6, 3)
        tab = get_excitation_table(space, convention)
        t = random_amplitudes(tab, rng)
        v = rng.standard_normal(space.size)
        back = exp_apply(t, exp_apply(t, v, -1, tab), +1, tab)
        assert np.abs(back - v).max() <= 1e-12

    def test_one_electron_terminates_at_first_order(self):
        rng = np.random.default_rng(5)
        tab = table_for(4, 1)
        t = random_amplitudes(tab, rng)
        e0 = np.zeros(tab.space.size)
        e0[0] = 1.0
        out = exp_apply(t, e0, +1, tab)
        expected = e0 + cluster_apply(t, e0, tab)
        assert np.array_equal(out, expected)

    def test_matches_dense_matrix_exponential(self):
        rng = np.random.default_rng(6)
        space = enumerate_determinants(6, 2)   # dim 15 <= 50
        tab = get_excitation_table(space)
        t = random_amplitudes(tab, rng)
        tmat = cluster_csr(embed_values(t, tab), tab).toarray()
        v = rng.standard_normal(space.size)
        assert np.allclose(exp_apply(t, v, +1, tab), sla.expm(tmat) @ v, atol=1e-12)

    def test_exp_csr_matches_exp_apply(self):
        rng = np.random.default_rng(7)
        tab = table_for(6, 3)
        t = random_amplitudes(tab, rng)
        mat = exp_csr(embed_values(t, tab), tab, -1).toarray()
        v = rng.standard_normal(tab.space.size)
        assert np.allclose(mat @ v, exp_apply(t, v, -1, tab), atol=1e-13)

    def test_nilpotency_exact(self):
        rng = np.random.default_rng(8)
        tab = table_for(6, 2)
        t = random_amplitudes(tab, rng, scale=2.0)
        v = rng.standard_normal(tab.space.size)
        for _ in range(tab.space.N + 1):
            v = cluster_apply(t, v, tab)
        assert np.all(v == 0.0)

    def test_commuting_exponentials(self):
        rng = np.random.default_rng(9)
        tab = table_for(6, 3)
        t = random_amplitudes(tab, rng)
        s = random_amplitudes(tab, rng)
        both = AmplitudeVector(t.values + s.values, tab.excitations)
        v = rng.standard_normal(tab.space.size)
        ts = exp_apply(t, exp_apply(s, v, +1, tab), +1, tab)
        st_ = exp_apply(s, exp_apply(t, v, +1, tab), +1, tab)
        tps = exp_apply(both, v, +1, tab)
        assert np.abs(ts - st_).max() <= 1e-12
        assert np.abs(ts - tps).max() <= 1e-12


class TestCiCcConversion:
    def test_reference_maps_to_zero(self):
        tab = table_for(6, 2)
        e0 = np.zeros(tab.space.size)
        e0[0] = 1.0
        assert np.all(ci_to_cc(e0, tab).values == 0.0)

    def test_single_excited_admixture(self):
        tab = table_for(6, 2)
        mu = tab.excitations[0]
        assert mu.rank == 1
        psi = np.zeros(tab.space.size)
        psi[0] = 1.0
        psi[tab.det_of_mu[0]] = 0.4
        t = ci_to_cc(psi, tab)
        assert t.values[0] == pytest.approx(0.4, abs=1e-14)

    @pytest.mark.parametrize("k,n", [(6, 2), (8, 3)])
    @pytest.mark.parametrize("convention", CONVENTIONS)
    def test_round_trip_100_random_vectors(self, k, n, convention):
        rng = np.random.default_rng(10)
        tab = get_excitation_table(enumerate_determinants(k, n), convention)
        for _ in range(100):
            psi = rng.standard_normal(tab.space.size)
            psi[0] = np.sign(psi[0]) * (0.5 + abs(psi[0]))
            back = cc_to_ci(ci_to_cc(psi, tab), tab)
            assert np.abs(back - psi / psi[0]).max() <= 1e-12

    def test_not_intermediately_normalizable(self):
        tab = table_for(4, 2)
        psi = np.ones(tab.space.size)
        psi[0] = 1e-9
        with pytest.raises(NotIntermediatelyNormalizableError):
            ci_to_cc(psi, tab)

    def test_cc_to_ci_zero_is_reference(self):
        tab = table_for(5, 2)
        t = AmplitudeVector(np.zeros(tab.n_amplitudes), tab.excitations)
        out = cc_to_ci(t, tab)
        assert out[0] == 1.0
        assert np.all(out[1:] == 0.0)

    def test_linear_term_limit(self):
        rng = np.random.default_rng(11)
        tab = table_for(6, 2)
        t = random_amplitudes(tab, rng)
        e0 = np.zeros(tab.space.size)
        e0[0] = 1.0
        linear = cluster_apply(t, e0, tab)
        for eps in (1e-5, 1e-6):
            scaled = AmplitudeVector(eps * t.values, tab.excitations)
            diff = (cc_to_ci(scaled, tab) - e0) / eps
            assert np.abs(diff - linear).max() <= 10 * eps

    def test_eigenvector_conversion_consistency(self):
        rng = np.random.default_rng(12)
        table = random_integral_table(3, 2, rng, coupling=0.3)
        space = enumerate_determinants(6, 2)
        hmat = assemble(space, spinify(table))
        eig = solve_eigenpair(hmat)
        tab = get_excitation_table(space)
        back = cc_to_ci(ci_to_cc(eig.vector, tab), tab)
        assert np.abs(back - eig.vector / eig.vector[0]).max() <= 1e-11


class TestNormMetric:
    def diag_hamiltonian(self, diag):
        space = enumerate_determinants(6, 2)
        return FciHamiltonian(space=space, matrix=sp.diags(diag).tocsr(), e_core=0.0)

    def test_diagonal_weights_exact(self):
        rng = np.random.default_rng(13)
        diag = np.concatenate(([0.0], rng.uniform(0.5, 3.0, 14)))
        hmat = self.diag_hamiltonian(diag)
        metric = build_norm_metric(hmat, e_star=0.0, shift=1.0)
        assert np.array_equal(metric.det_weights, diag + 1.0)

    def test_invalid_shift_raises(self):
        diag = np.concatenate(([0.0], np.linspace(0.2, 3.0, 14)))
        hmat = self.diag_hamiltonian(diag)
        # target an interior eigenvalue above some diagonal entries
        with pytest.raises(InvalidShiftError):
            build_norm_metric(hmat, e_star=2.0, shift=0.5)

    def test_positive_floor_with_gap(self, h2_problem):
        eig = solve_eigenpair(h2_problem.hmat)
        metric = build_norm_metric(h2_problem.hmat, eig.energy, shift=1.0)
        assert metric.det_weights[1:].min() > 0
        assert metric.det_weights[1:].min() >= eig.gap * 0.5

    def test_mu_weight_alignment(self, h2_problem):
        eig = solve_eigenpair(h2_problem.hmat)
        metric = build_norm_metric(h2_problem.hmat, eig.energy)
        tab = h2_problem.table
        mw = metric.mu_weights(tab)
        diag = h2_problem.hmat.diagonal
        for i in range(tab.n_amplitudes):
            expected = diag[tab.det_of_mu[i]] - eig.energy + 1.0
            assert mw[i] == pytest.approx(expected, abs=1e-14)


class TestNorms:
    def test_identity_weights_are_euclidean(self):
        rng = np.random.default_rng(14)
        v = rng.standard_normal(20)
        ones = np.ones(20)
        assert vnorm(v, ones) == pytest.approx(np.linalg.norm(v), abs=1e-14)
        assert dual_norm(v, ones) == pytest.approx(np.linalg.norm(v), abs=1e-14)

    def test_unit_basis_vector(self):
        weights = np.array([2.0, 3.0, 5.0])
        e1 = np.array([0.0, 1.0, 0.0])
        assert vnorm(e1, weights) == pytest.approx(np.sqrt(3.0), abs=1e-15)
        assert dual_norm(e1, weights) == pytest.approx(1.0 / np.sqrt(3.0), abs=1e-15)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_cauchy_schwarz_pairing(self, seed):
        rng = np.random.default_rng(seed)
        n = 12
        weights = rng.uniform(0.3, 4.0, n)
        t = rng.standard_normal(n)
        w = rng.standard_normal(n)
        assert abs(np.dot(w, t)) <= dual_norm(w, weights) * vnorm(t, weights) + 1e-12

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_equivalence_with_euclidean(self, seed):
        rng = np.random.default_rng(seed)
        weights = rng.uniform(0.3, 4.0, 15)
        v = rng.standard_normal(15)
        lo, hi = np.sqrt(weights.min()), np.sqrt(weights.max())
        euclid = np.linalg.norm(v)
        assert lo * euclid - 1e-12 <= vnorm(v, weights) <= hi * euclid + 1e-12


class TestSerialization:
    def test_json_round_trip(self):
        rng = np.random.default_rng(15)
        tab = table_for(5, 2)
        t = random_amplitudes(tab, rng)
        back = AmplitudeVector.from_json(t.to_json())
        assert back.index_set == t.index_set
        assert np.array_equal(back.values, t.values)
        assert back.dual == t.dual

    def test_dual_tag_preserved(self):
        tab = table_for(4, 2)
        w = AmplitudeVector(np.ones(tab.n_amplitudes), tab.excitations, dual=True)
        assert AmplitudeVector.from_json(w.to_json()).dual

    def test_round_trip_is_stable(self):
        tab = table_for(4, 2)
        t = AmplitudeVector(np.linspace(-1, 1, tab.n_amplitudes), tab.excitations)
        once = t.to_json()
        assert AmplitudeVector.from_json(once).to_json() == once
