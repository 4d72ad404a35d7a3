"""Built-in oracle and property suites behind the `check` subcommand.

The centerpiece is a first-quantized brute-force Hamiltonian: determinants
are expanded as explicit antisymmetrized tensors over the K^N product space
and matrix elements taken literally, with no Slater-Condon shortcut and an
independent spin expansion.  Feasible for K <= 10, N <= 3, which is enough
to pin every sign in the fast path.
"""

from __future__ import annotations

from itertools import permutations
from math import factorial

import numpy as np
import scipy.sparse as sp

from . import cluster, determinants, hamiltonian, integrals
from .analysis import sigma_min_jacobian, verify_sandwich
from .determinants import (
    CONVENTIONS,
    PAPER_SIGNLESS,
    enumerate_determinants,
    enumerate_excitations,
    orbitals_from_mask,
)
from .equations import cc_jacobian, cc_residual, newton_solve


def excitation_matrix(mu, space, convention=PAPER_SIGNLESS, dagger=False) -> np.ndarray:
    """Dense matrix of X_mu (or its adjoint) over the determinant basis."""
    apply = determinants.apply_deexcitation if dagger else determinants.apply_excitation
    out = np.zeros((space.size, space.size))
    for j, det in enumerate(space.dets):
        res = apply(mu, det, convention)
        if res is not None:
            out[space.index_of[res[0]], j] = res[1]
    return out


def random_integral_table(norb: int, nelec: int, rng,
                          diag_spread: float = 1.0,
                          coupling: float = 0.1) -> integrals.IntegralTable:
    """Random symmetric integrals with the full 8-fold ERI symmetry.

    The one-electron diagonal is spread like energy-ordered orbitals so the
    reference determinant dominates the ground state.
    """
    h = coupling * rng.standard_normal((norb, norb))
    h = 0.5 * (h + h.T)
    h += np.diag(np.linspace(0.0, diag_spread * (norb - 1), norb) - norb / 2.0)
    eri = integrals.TwoElectronIntegrals(norb)
    for p in range(1, norb + 1):
        for q in range(1, p + 1):
            for r in range(1, p + 1):
                for s in range(1, r + 1):
                    if (p, q) < (r, s):
                        continue
                    eri.set(p, q, r, s, coupling * rng.standard_normal())
    return integrals.IntegralTable(norb=norb, nelec=nelec, ms2=nelec % 2,
                                   h=h, eri=eri, e_core=rng.standard_normal())


def _spin_phys(table: integrals.IntegralTable) -> tuple[np.ndarray, np.ndarray]:
    """Independent spin expansion: h_so and raw <pq|rs> (no antisymmetrization)."""
    norb = table.norb
    K = 2 * norb
    chem = table.eri.dense()
    h_so = np.zeros((K, K))
    phys = np.zeros((K, K, K, K))
    for P in range(K):
        p, sp_ = divmod(P, 2)
        for Q in range(K):
            q, sq = divmod(Q, 2)
            if sp_ == sq:
                h_so[P, Q] = table.h[p, q]
    for P in range(K):
        p, sp_ = divmod(P, 2)
        for Q in range(K):
            q, sq = divmod(Q, 2)
            for R in range(K):
                r, sr = divmod(R, 2)
                if sp_ != sr:
                    continue
                for S in range(K):
                    s, ss = divmod(S, 2)
                    if sq != ss:
                        continue
                    phys[P, Q, R, S] = chem[p, r, q, s]
    return h_so, phys


def brute_force_matrix(space, table: integrals.IntegralTable) -> np.ndarray:
    """<a|H|b> from explicit antisymmetrized N-particle tensors (no core)."""
    K, N = space.K, space.N
    h_so, phys = _spin_phys(table)
    dim_t = K**N

    h_t = np.zeros((dim_t, dim_t))
    eye = np.eye(K)
    for m in range(N):
        ops = [eye] * N
        ops[m] = h_so
        term = ops[0]
        for o in ops[1:]:
            term = np.kron(term, o)
        h_t += term
    v_pair = phys.reshape(K * K, K * K)
    for m in range(N):
        for n in range(m + 1, N):
            # embed the pair kernel on sites (m, n)
            term = np.zeros((dim_t, dim_t))
            idx = np.indices((K,) * N).reshape(N, -1)
            row_pair = idx[m] * K + idx[n]
            rest = [idx[i] for i in range(N) if i not in (m, n)]
            rest_key = np.zeros(dim_t, dtype=np.int64)
            for r in rest:
                rest_key = rest_key * K + r
            # group tensor indices by the spectator configuration
            order = np.argsort(rest_key, kind="stable")
            grouped = order.reshape(-1, K * K) if rest else order.reshape(1, -1)
            for grp in grouped:
                pr = row_pair[grp]
                term[np.ix_(grp, grp)] += v_pair[np.ix_(pr, pr)]
            h_t += term

    vecs = np.zeros((dim_t, space.size))
    for j, det in enumerate(space.dets):
        orbs = orbitals_from_mask(det)
        for perm in permutations(range(N)):
            sign = _perm_sign(perm)
            flat = 0
            for i in range(N):
                flat = flat * K + (orbs[perm[i]] - 1)
            vecs[flat, j] += sign
        vecs[:, j] /= np.sqrt(factorial(N))
    return vecs.T @ h_t @ vecs


def _perm_sign(perm) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


# ---------------------------------------------------------------------------
# property suites (each returns (name, ok, detail))

def check_counting() -> tuple[str, bool, str]:
    bad = []
    for K in range(2, 11):
        for N in range(1, K + 1):
            n_exc = len(enumerate_excitations(K, N))
            if n_exc + 1 != determinants.sector_size(K, N):
                bad.append((K, N))
    return "determinant_counting", not bad, f"failures: {bad}" if bad else "ok"


def check_commutativity() -> tuple[str, bool, str]:
    for K, N in ((4, 2), (5, 2), (6, 3)):
        space = enumerate_determinants(K, N)
        if space.size > 100:
            continue
        excs = enumerate_excitations(K, N)
        for convention in CONVENTIONS:
            mats = [excitation_matrix(mu, space, convention) for mu in excs]
            for i in range(len(mats)):
                for j in range(i + 1, len(mats)):
                    if not np.array_equal(mats[i] @ mats[j], mats[j] @ mats[i]):
                        return ("excitation_commutativity", False,
                                f"K={K} N={N} {convention} pair ({i},{j})")
    return "excitation_commutativity", True, "ok"


def check_adjoint() -> tuple[str, bool, str]:
    for K, N in ((4, 2), (6, 3)):
        space = enumerate_determinants(K, N)
        ref = space.reference
        for convention in CONVENTIONS:
            for mu in enumerate_excitations(K, N):
                m = excitation_matrix(mu, space, convention)
                md = excitation_matrix(mu, space, convention, dagger=True)
                if not np.array_equal(md, m.T):
                    return "adjoint_transpose", False, f"{mu} under {convention}"
                if determinants.apply_deexcitation(mu, ref, convention) is not None:
                    return "adjoint_transpose", False, f"X^dag ref != 0 for {mu}"
    return "adjoint_transpose", True, "ok"


def check_integral_roundtrip(tmpdir) -> tuple[str, bool, str]:
    import os
    rng = np.random.default_rng(7)
    table = random_integral_table(4, 2, rng)
    path = os.path.join(tmpdir, "roundtrip.fcidump")
    integrals.write_fcidump(table, path)
    back = integrals.parse_fcidump(path)
    ok = (np.array_equal(back.h, table.h)
          and np.array_equal(back.eri.dense(), table.eri.dense())
          and back.e_core == table.e_core)
    return "fcidump_roundtrip", ok, "ok" if ok else "values changed"


def check_slater_condon_oracle() -> tuple[str, bool, str]:
    rng = np.random.default_rng(11)
    worst = 0.0
    for norb, nelec in ((2, 2), (3, 2), (4, 3)):
        table = random_integral_table(norb, nelec, rng, coupling=0.3)
        space = enumerate_determinants(2 * norb, nelec)
        hmat = hamiltonian.assemble(space, integrals.spinify(table))
        ref = brute_force_matrix(space, table)
        worst = max(worst, float(np.abs(hmat.matrix.toarray() - ref).max()))
    return "slater_condon_oracle", worst <= 1e-12, f"max deviation {worst:.2e}"


def check_exponential_roundtrip() -> tuple[str, bool, str]:
    rng = np.random.default_rng(13)
    worst = 0.0
    for K, N in ((6, 2), (8, 3)):
        space = enumerate_determinants(K, N)
        for convention in CONVENTIONS:
            tab = cluster.get_excitation_table(space, convention)
            t = cluster.AmplitudeVector(0.3 * rng.standard_normal(tab.n_amplitudes),
                                        tab.excitations)
            v = rng.standard_normal(space.size)
            back = cluster.exp_apply(t, cluster.exp_apply(t, v, -1, tab), +1, tab)
            worst = max(worst, float(np.abs(back - v).max()))
            psi = rng.standard_normal(space.size)
            psi[0] = 1.0 + 0.2 * rng.uniform()
            amp = cluster.ci_to_cc(psi, tab)
            again = cluster.cc_to_ci(amp, tab)
            worst = max(worst, float(np.abs(again - psi / psi[0]).max()))
    return "exponential_roundtrip", worst <= 1e-12, f"max deviation {worst:.2e}"


def check_jacobian_fd() -> tuple[str, bool, str]:
    rng = np.random.default_rng(17)
    table_int = random_integral_table(3, 2, rng, coupling=0.3)
    space = enumerate_determinants(6, 2)
    hmat = hamiltonian.assemble(space, integrals.spinify(table_int))
    tab = cluster.get_excitation_table(space)
    t = cluster.AmplitudeVector(0.2 * rng.standard_normal(tab.n_amplitudes),
                                tab.excitations)
    jac = cc_jacobian(t, hmat, tab).matrix
    fd = np.zeros_like(jac)
    h = 1e-5
    for j in range(tab.n_amplitudes):
        for sgn in (+1, -1):
            vals = t.values.copy()
            vals[j] += sgn * h
            res = cc_residual(cluster.AmplitudeVector(vals, tab.excitations), hmat, tab)
            fd[:, j] += sgn * res.f.values / (2 * h)
    scale = np.maximum(np.abs(jac), 1.0)
    err = float(np.abs((jac - fd) / scale).max())
    return "jacobian_finite_difference", err <= 1e-6, f"max rel error {err:.2e}"


def check_diagonal_closed_forms() -> tuple[str, bool, str]:
    rng = np.random.default_rng(19)
    space = enumerate_determinants(6, 2)
    diag = np.concatenate(([0.0], np.sort(rng.uniform(0.5, 4.0, space.size - 1))))
    hmat = hamiltonian.FciHamiltonian(
        space=space, matrix=sp.diags(diag).tocsr(), e_core=0.0)
    eig = hamiltonian.solve_eigenpair(hmat, "lowest")
    metric = cluster.build_norm_metric(hmat, eig.energy, shift=1.0)
    tab = cluster.get_excitation_table(space)
    g = diag[1:]
    expect = g / (g + 1.0)
    from .analysis import alpha_continuity, infsup_gamma, theta
    gamma = infsup_gamma(hmat, eig, metric)
    tstar = cluster.AmplitudeVector(np.zeros(tab.n_amplitudes), tab.excitations)
    th, _, _ = theta(tstar, tab, metric)
    al = alpha_continuity(tstar, hmat, 0.0, tab, metric)
    jac = cc_jacobian(tstar, hmat, tab).matrix
    sm = sigma_min_jacobian(jac, metric.mu_weights(tab))
    ok = (abs(gamma - expect.min()) <= 1e-12 and abs(al - expect.max()) <= 1e-12
          and abs(th - 1.0) <= 1e-12 and abs(sm - expect.min()) <= 1e-12)
    return "diagonal_closed_forms", ok, (
        f"gamma {gamma:.3e} vs {expect.min():.3e}, alpha {al:.3e} vs {expect.max():.3e}, "
        f"theta {th:.3e}, sigma_min {sm:.3e}")


def check_sandwich_small() -> tuple[str, bool, str]:
    rng = np.random.default_rng(23)
    table_int = random_integral_table(3, 2, rng, coupling=0.2)
    space = enumerate_determinants(6, 2)
    hmat = hamiltonian.assemble(space, integrals.spinify(table_int))
    tab = cluster.get_excitation_table(space)
    eig = hamiltonian.solve_eigenpair(hmat, "lowest")
    metric = cluster.build_norm_metric(hmat, eig.energy)
    seed = cluster.ci_to_cc(eig.vector, tab)
    tstar, _ = newton_solve(hmat, tab, tab.excitations, t0=seed, metric=metric)
    from .analysis import alpha_continuity, infsup_gamma, theta
    gamma = infsup_gamma(hmat, eig, metric)
    th, _, _ = theta(tstar, tab, metric)
    al = alpha_continuity(tstar, hmat, eig.energy, tab, metric)
    result = verify_sandwich(tstar, hmat, tab, metric, al, th, gamma,
                             radii=(1e-3,), samples=25, rng_seed=5)
    ok = result["fraction_satisfied"] == 1.0
    return "sandwich_bounds", ok, f"fraction {result['fraction_satisfied']:.3f}"


def run_all(tmpdir: str) -> list[dict]:
    """Run every suite, returning machine-readable results."""
    cluster._TABLE_CACHE.clear()
    suites = [
        check_counting,
        check_commutativity,
        check_adjoint,
        lambda: check_integral_roundtrip(tmpdir),
        check_slater_condon_oracle,
        check_exponential_roundtrip,
        check_jacobian_fd,
        check_diagonal_closed_forms,
        check_sandwich_small,
    ]
    results = []
    for suite in suites:
        name, ok, detail = suite()
        results.append({"name": name, "passed": bool(ok), "detail": detail})
    return results
