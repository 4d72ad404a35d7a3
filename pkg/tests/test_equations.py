import numpy as np
import pytest
import scipy.sparse as sp

from ccstab.cluster import (
    AmplitudeVector,
    build_norm_metric,
    ci_to_cc,
    cc_to_ci,
    cluster_csr,
    embed_values,
    get_excitation_table,
)
from ccstab.determinants import CONVENTIONS, enumerate_determinants
from ccstab.equations import (
    NearSingularJacobianError,
    NonConvergenceError,
    SolverOptions,
    cc_jacobian,
    cc_residual,
    newton_solve,
    similarity_transform,
)
from ccstab.hamiltonian import FciHamiltonian, assemble, hf_energy, solve_eigenpair
from ccstab.integrals import spinify
from ccstab.selfcheck import random_integral_table

import scipy.linalg as sla


def build_problem(seed=0, norb=3, nelec=2, coupling=0.3, convention="paper_signless"):
    rng = np.random.default_rng(seed)
    table = random_integral_table(norb, nelec, rng, coupling=coupling)
    space = enumerate_determinants(2 * norb, nelec)
    hmat = assemble(space, spinify(table))
    tab = get_excitation_table(space, convention)
    return hmat, tab, rng


class TestCcResidual:
    def test_zero_amplitudes_read_off_hamiltonian_column(self):
        hmat, tab, _ = build_problem(1)
        t0 = AmplitudeVector(np.zeros(tab.n_amplitudes), tab.excitations)
        res = cc_residual(t0, hmat, tab)
        col = hmat.matrix.toarray()[:, 0]
        assert res.energy == pytest.approx(col[0], abs=1e-14)
        for i in range(tab.n_amplitudes):
            expected = tab.ref_phase[i] * col[tab.det_of_mu[i]]
            assert res.f.values[i] == pytest.approx(expected, abs=1e-14)

    def test_energy_at_zero_is_electronic_hf(self):
        hmat, tab, _ = build_problem(2)
        t0 = AmplitudeVector(np.zeros(tab.n_amplitudes), tab.excitations)
        res = cc_residual(t0, hmat, tab)
        assert res.energy == pytest.approx(hf_energy(hmat) - hmat.e_core, abs=1e-13)

    @pytest.mark.parametrize("convention", CONVENTIONS)
    def test_fci_amplitudes_are_zeros(self, convention):
        hmat, tab, _ = build_problem(3, convention=convention)
        eig = solve_eigenpair(hmat)
        t = ci_to_cc(eig.vector, tab)
        res = cc_residual(t, hmat, tab)
        assert np.linalg.norm(res.f.values) <= 1e-9
        assert res.energy == pytest.approx(eig.energy, abs=1e-9)

    def test_matches_dense_similarity_transform(self):
        hmat, tab, rng = build_problem(4)
        assert tab.space.size <= 50
        t = AmplitudeVector(0.2 * rng.standard_normal(tab.n_amplitudes),
                            tab.excitations)
        tmat = cluster_csr(embed_values(t, tab), tab).toarray()
        dense = sla.expm(-tmat) @ hmat.matrix.toarray() @ sla.expm(tmat)
        res = cc_residual(t, hmat, tab)
        assert np.abs(res.aux - dense[:, 0]).max() <= 1e-12

    def test_invariants_between_fields(self):
        hmat, tab, rng = build_problem(5)
        t = AmplitudeVector(0.1 * rng.standard_normal(tab.n_amplitudes),
                            tab.excitations)
        res = cc_residual(t, hmat, tab)
        assert res.energy == res.aux[0]
        assert res.f.dual


class TestCcJacobian:
    @pytest.mark.parametrize("convention", CONVENTIONS)
    def test_central_finite_differences(self, convention):
        hmat, tab, rng = build_problem(6, convention=convention)
        t = AmplitudeVector(0.3 * rng.standard_normal(tab.n_amplitudes),
                            tab.excitations)
        jac = cc_jacobian(t, hmat, tab).matrix
        step = 1e-5
        fd = np.zeros_like(jac)
        for j in range(tab.n_amplitudes):
            for sgn in (1, -1):
                vals = t.values.copy()
                vals[j] += sgn * step
                res = cc_residual(AmplitudeVector(vals, tab.excitations), hmat, tab)
                fd[:, j] += sgn * res.f.values / (2 * step)
        rel = np.abs(jac - fd) / np.maximum(np.abs(jac), 1.0)
        assert rel.max() <= 1e-6

    def test_at_zero_equals_shifted_transform_block(self):
        hmat, tab, _ = build_problem(7)
        eig = solve_eigenpair(hmat)
        metric = build_norm_metric(hmat, eig.energy)
        seed = ci_to_cc(eig.vector, tab)
        tstar, _ = newton_solve(hmat, tab, tab.excitations, t0=seed, metric=metric)
        transform = similarity_transform(tstar, hmat, tab)
        jac = cc_jacobian(tstar, hmat, tab, transform=transform).matrix
        rows = tab.det_of_mu
        ph = tab.ref_phase
        res = cc_residual(tstar, hmat, tab)
        block = (ph[:, None] * ph[None, :]) * transform[np.ix_(rows, rows)]
        block = block - res.energy * np.eye(tab.n_amplitudes)
        assert np.abs(jac - block).max() <= 1e-8

    def test_diagonal_hamiltonian_at_zero(self):
        space = enumerate_determinants(6, 2)
        diag = np.concatenate(([0.0], np.linspace(1.0, 3.0, space.size - 1)))
        hmat = FciHamiltonian(space=space, matrix=sp.diags(diag).tocsr(), e_core=0.0)
        tab = get_excitation_table(space)
        t0 = AmplitudeVector(np.zeros(tab.n_amplitudes), tab.excitations)
        jac = cc_jacobian(t0, hmat, tab).matrix
        expected = np.diag(diag[tab.det_of_mu] - diag[0])
        assert np.abs(jac - expected).max() <= 1e-14


class TestNewtonSolve:
    def test_one_electron_closed_form_root(self):
        # K=2, N=1 toy: the residual is the scalar quadratic
        # f(t) = c + (b - a) t - c t^2 with energy a + c t
        a, b, c = -1.2, 0.4, 0.35
        space = enumerate_determinants(2, 1)
        hmat = FciHamiltonian(space=space,
                              matrix=sp.csr_matrix(np.array([[a, c], [c, b]])),
                              e_core=0.0)
        tab = get_excitation_table(space)
        tstar, trace = newton_solve(hmat, tab, tab.excitations,
                                    opts=SolverOptions(tol=1e-13))
        disc = np.sqrt((b - a) ** 2 + 4 * c ** 2)
        roots = [((b - a) + disc) / (2 * c), ((b - a) - disc) / (2 * c)]
        assert min(abs(tstar.values[0] - r) for r in roots) <= 1e-12
        res = cc_residual(tstar, hmat, tab)
        e_low = (a + b) / 2 - np.sqrt(((a - b) / 2) ** 2 + c ** 2)
        assert res.energy == pytest.approx(e_low, abs=1e-12)
        assert trace.converged

    @pytest.mark.parametrize("convention", CONVENTIONS)
    def test_full_index_set_reaches_fci(self, convention):
        hmat, tab, _ = build_problem(8, norb=3, nelec=3, convention=convention)
        eig = solve_eigenpair(hmat)
        metric = build_norm_metric(hmat, eig.energy)
        tstar, trace = newton_solve(hmat, tab, tab.excitations, metric=metric)
        res = cc_residual(tstar, hmat, tab)
        assert trace.converged
        assert abs(res.energy - eig.energy) <= 1e-9

    def test_truncated_rank_two(self, w4_problem):
        hmat, tab = w4_problem.hmat, w4_problem.table
        eig = solve_eigenpair(hmat)
        metric = build_norm_metric(hmat, eig.energy)
        active = tuple(tab.excitations[i] for i in tab.rank_positions(2))
        assert len(active) < tab.n_amplitudes
        t2, trace = newton_solve(hmat, tab, active, metric=metric)
        res = cc_residual(t2, hmat, tab)
        assert trace.converged
        ccsd_error = res.energy + hmat.e_core - eig.total
        hf_error = hf_energy(hmat) - eig.total
        assert 0 < abs(ccsd_error) < abs(hf_error)

    def test_zero_to_eigenvector_correspondence(self):
        hmat, tab, _ = build_problem(9)
        eig_all = np.linalg.eigvalsh(hmat.matrix.toarray())
        metric_e = solve_eigenpair(hmat)
        metric = build_norm_metric(hmat, metric_e.energy)
        tstar, _ = newton_solve(hmat, tab, tab.excitations, metric=metric)
        psi = cc_to_ci(tstar, tab)
        psi /= np.linalg.norm(psi)
        rayleigh = psi @ (hmat.matrix @ psi)
        assert np.linalg.norm(hmat.matrix @ psi - rayleigh * psi) <= 1e-8
        assert np.min(np.abs(eig_all - rayleigh)) <= 1e-9

    def test_every_normalizable_eigenvector_is_a_zero(self):
        hmat, tab, _ = build_problem(10)
        evals, evecs = np.linalg.eigh(hmat.matrix.toarray())
        for k in range(len(evals)):
            if abs(evecs[0, k]) < 1e-2:
                continue
            t = ci_to_cc(evecs[:, k], tab)
            res = cc_residual(t, hmat, tab)
            assert np.linalg.norm(res.f.values) <= 1e-9

    def test_oracle_seeded_excited_zero(self):
        hmat, tab, _ = build_problem(11)
        eig1 = solve_eigenpair(hmat, which=1)
        if abs(eig1.vector[0]) < 1e-2 or eig1.degenerate:
            pytest.skip("excited state not intermediately normalizable here")
        metric = build_norm_metric(hmat, eig1.energy, shift=2.0 + abs(
            (hmat.diagonal - eig1.energy).min()))
        seed = ci_to_cc(eig1.vector, tab)
        tstar, trace = newton_solve(hmat, tab, tab.excitations, t0=seed, metric=metric)
        res = cc_residual(tstar, hmat, tab)
        assert trace.converged
        assert res.energy == pytest.approx(eig1.energy, abs=1e-9)

    def test_quasi_newton_fallback(self):
        hmat, tab, _ = build_problem(12, coupling=0.15)
        eig = solve_eigenpair(hmat)
        metric = build_norm_metric(hmat, eig.energy)
        opts = SolverOptions(use_jacobian=False, max_iter=400)
        tstar, trace = newton_solve(hmat, tab, tab.excitations, opts=opts, metric=metric)
        res = cc_residual(tstar, hmat, tab)
        assert trace.converged
        assert abs(res.energy - eig.energy) <= 1e-9

    def test_mp_seed_mode(self):
        hmat, tab, _ = build_problem(13)
        eig = solve_eigenpair(hmat)
        metric = build_norm_metric(hmat, eig.energy)
        opts = SolverOptions(seed="mp")
        tstar, trace = newton_solve(hmat, tab, tab.excitations, opts=opts, metric=metric)
        assert trace.converged
        res = cc_residual(tstar, hmat, tab)
        assert abs(res.energy - eig.energy) <= 1e-9

    def test_non_convergence_carries_trace(self):
        hmat, tab, _ = build_problem(14)
        opts = SolverOptions(tol=1e-16, max_iter=1)
        with pytest.raises(NonConvergenceError) as err:
            newton_solve(hmat, tab, tab.excitations, opts=opts)
        assert err.value.trace.iterations
        assert err.value.best is not None

    def test_near_singular_jacobian(self):
        # equal diagonal entries make the scalar Jacobian c - c t^2 - t(b-a)
        # derivative (b - a) - 2 c t vanish exactly at the t = 0 start
        space = enumerate_determinants(2, 1)
        hmat = FciHamiltonian(space=space,
                              matrix=sp.csr_matrix(np.array([[0.5, 0.3], [0.3, 0.5]])),
                              e_core=0.0)
        tab = get_excitation_table(space)
        with pytest.raises(NearSingularJacobianError):
            newton_solve(hmat, tab, tab.excitations)

    def test_trace_records_monotone_decrease(self):
        hmat, tab, _ = build_problem(15)
        eig = solve_eigenpair(hmat)
        metric = build_norm_metric(hmat, eig.energy)
        _, trace = newton_solve(hmat, tab, tab.excitations, metric=metric)
        norms = [it["residual_dual_norm"] for it in trace.iterations]
        assert all(b < a for a, b in zip(norms, norms[1:]))
        assert not trace.non_monotone

    def test_jacobian_spectrum_positive_at_ground_zero(self, w4_problem):
        # diagnostic from the similarity-transformed operator: reported,
        # and on these fixtures the real parts do come out positive
        hmat, tab = w4_problem.hmat, w4_problem.table
        eig = solve_eigenpair(hmat)
        metric = build_norm_metric(hmat, eig.energy)
        seed = ci_to_cc(eig.vector, tab)
        tstar, _ = newton_solve(hmat, tab, tab.excitations, t0=seed, metric=metric)
        jac = cc_jacobian(tstar, hmat, tab).matrix
        assert np.min(np.linalg.eigvals(jac).real) > 0
