"""Full-CI Hamiltonian assembly via Slater-Condon rules and eigensolvers.

The matrix lives over a DeterminantSpace in the determinant basis; the core
energy is excluded from all matrix arithmetic and only added to reported
totals (shifts cancel in every derived constant).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .determinants import DeterminantSpace, orbitals_from_mask, sequential_phase
from .integrals import SpinOrbitalIntegrals

DENSE_EIG_LIMIT = 2000     # dense eigensolver below, Davidson above
DEGENERACY_TOL = 1e-6      # Hartree; smaller gaps are flagged degenerate
SYMMETRY_TOL = 1e-12


class DimensionMismatchError(ValueError):
    pass


class IterativeFailureError(RuntimeError):
    """Davidson failed to converge; carries the best residual norm seen."""

    def __init__(self, message: str, best_residual: float):
        self.best_residual = best_residual
        super().__init__(message)


def _single_phase(mask: int, p: int, q: int) -> int:
    """Parity of a+_q a_p acting on `mask` (p occupied, q empty)."""
    lo, hi = (p, q) if p < q else (q, p)
    between = mask & (((1 << (hi - 1)) - 1) ^ ((1 << lo) - 1))
    return -1 if between.bit_count() % 2 else 1


def slater_condon_element(a: int, b: int, ints: SpinOrbitalIntegrals) -> float:
    """<a|H|b> for determinants a, b of the same space (electronic, no core).

    Diagonal, single and double substitution cases; zero beyond two
    differing spin orbitals.  The alignment phase is the parity of the
    line-up permutation of the two canonical determinants and applies
    regardless of the excitation-operator convention.
    """
    diff = a ^ b
    ndiff = diff.bit_count()
    if ndiff == 0:
        occ = np.array(orbitals_from_mask(a)) - 1
        w = ints.antisym[np.ix_(occ, occ, occ, occ)]
        return float(ints.h_so[occ, occ].sum() + 0.5 * np.einsum("ijij->", w))
    if ndiff == 2:
        p = (diff & a).bit_length()   # occupied in a only
        q = (diff & b).bit_length()   # occupied in b only
        common = np.array(orbitals_from_mask(a & b)) - 1
        val = ints.h_so[p - 1, q - 1]
        if common.size:
            val += ints.antisym[p - 1, common, q - 1, common].sum()
        return float(_single_phase(a, p, q) * val)
    if ndiff == 4:
        p1, p2 = orbitals_from_mask(diff & a)
        q1, q2 = orbitals_from_mask(diff & b)
        res = sequential_phase(a, [(True, q1), (True, q2), (False, p2), (False, p1)])
        assert res is not None and res[0] == b
        return float(res[1] * ints.antisym[p1 - 1, p2 - 1, q1 - 1, q2 - 1])
    return 0.0


@dataclass(frozen=True, eq=False)
class FciHamiltonian:
    """Sparse symmetric Full-CI matrix over `space` (Hartree, no core)."""

    space: DeterminantSpace
    matrix: sp.csr_matrix
    e_core: float

    @property
    def dim(self) -> int:
        return self.space.size

    @property
    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()


def assemble(space: DeterminantSpace, ints: SpinOrbitalIntegrals) -> FciHamiltonian:
    """Assemble the Full-CI Hamiltonian; nonzeros only within double substitutions."""
    if space.K != ints.K:
        raise DimensionMismatchError(f"space K={space.K} but integrals K={ints.K}")
    dim = space.size
    index_of = space.index_of
    h_so, antisym = ints.h_so, ints.antisym
    rows, cols, vals = [], [], []

    for ia, a in enumerate(space.dets):
        occ = orbitals_from_mask(a)
        occ0 = np.array(occ) - 1
        virt = [p for p in range(1, space.K + 1) if not a & (1 << (p - 1))]

        w_occ = antisym[np.ix_(occ0, occ0, occ0, occ0)]
        diag = float(h_so[occ0, occ0].sum() + 0.5 * np.einsum("ijij->", w_occ))
        rows.append(ia)
        cols.append(ia)
        vals.append(diag)

        for p in occ:
            pb = 1 << (p - 1)
            for q in virt:
                b = (a ^ pb) | (1 << (q - 1))
                ib = index_of.get(b)
                if ib is None or ib <= ia:
                    continue
                rest = occ0[occ0 != p - 1]
                val = h_so[p - 1, q - 1] + antisym[p - 1, rest, q - 1, rest].sum()
                val *= _single_phase(a, p, q)
                if val != 0.0:
                    rows += [ia, ib]
                    cols += [ib, ia]
                    vals += [val, val]

        nocc, nvirt = len(occ), len(virt)
        for i1 in range(nocc):
            p1 = occ[i1]
            for i2 in range(i1 + 1, nocc):
                p2 = occ[i2]
                amask = a ^ (1 << (p1 - 1)) ^ (1 << (p2 - 1))
                for j1 in range(nvirt):
                    q1 = virt[j1]
                    m1 = amask | (1 << (q1 - 1))
                    for j2 in range(j1 + 1, nvirt):
                        q2 = virt[j2]
                        b = m1 | (1 << (q2 - 1))
                        ib = index_of.get(b)
                        if ib is None or ib <= ia:
                            continue
                        val = antisym[p1 - 1, p2 - 1, q1 - 1, q2 - 1]
                        if val == 0.0:
                            continue
                        res = sequential_phase(
                            a, [(True, q1), (True, q2), (False, p2), (False, p1)])
                        val *= res[1]
                        rows += [ia, ib]
                        cols += [ib, ia]
                        vals += [val, val]

    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    matrix.sum_duplicates()
    return FciHamiltonian(space=space, matrix=matrix, e_core=ints.e_core)


@dataclass
class Eigenpair:
    """One eigenpair of the Full-CI matrix.

    `energy` is electronic (core excluded, as in all matrix arithmetic);
    `total` adds the core energy back.  `gap` is the distance to the nearest
    other eigenvalue and `degenerate` flags gap < DEGENERACY_TOL, in which
    case the well-posedness analysis refuses the pair.
    """

    energy: float
    vector: np.ndarray
    index: int
    gap: float
    e_core: float
    residual_norm: float

    @property
    def total(self) -> float:
        return self.energy + self.e_core

    @property
    def degenerate(self) -> bool:
        return self.gap < DEGENERACY_TOL


def hf_energy(hmat: FciHamiltonian) -> float:
    """Reference-determinant expectation value plus core energy."""
    return float(hmat.matrix[0, 0]) + hmat.e_core


def _resolve_index(which, dim: int) -> int:
    if which == "lowest":
        return 0
    k = int(which)
    if not 0 <= k < dim:
        raise DimensionMismatchError(f"eigenpair index {k} outside 0..{dim - 1}")
    return k


def solve_eigenpair(hmat: FciHamiltonian, which="lowest", tol: float = 1e-9,
                    dense_limit: int = DENSE_EIG_LIMIT) -> Eigenpair:
    """k-th eigenpair, dense below `dense_limit`, Davidson above."""
    dim = hmat.dim
    k = _resolve_index(which, dim)
    if dim <= dense_limit:
        evals, evecs = np.linalg.eigh(hmat.matrix.toarray())
        energy = float(evals[k])
        vector = evecs[:, k]
        others = np.delete(evals, k)
        gap = float(np.min(np.abs(others - energy))) if others.size else np.inf
    else:
        nroots = k + 2
        evals, evecs = davidson(hmat.matrix, nroots=nroots, tol=tol)
        energy = float(evals[k])
        vector = evecs[:, k]
        gap = float(np.min(np.abs(np.delete(evals[: k + 2], k) - energy)))
    resid = float(np.linalg.norm(hmat.matrix @ vector - energy * vector))
    # canonical sign: positive reference coefficient when visible
    if vector[0] < 0 or (vector[0] == 0 and vector[np.argmax(np.abs(vector))] < 0):
        vector = -vector
    return Eigenpair(energy=energy, vector=vector, index=k, gap=gap,
                     e_core=hmat.e_core, residual_norm=resid)


def lowest_eigenvalues(hmat: FciHamiltonian, n: int,
                       dense_limit: int = DENSE_EIG_LIMIT) -> np.ndarray:
    """The n smallest eigenvalues (electronic), dense or Davidson."""
    n = min(n, hmat.dim)
    if hmat.dim <= dense_limit:
        return np.linalg.eigvalsh(hmat.matrix.toarray())[:n]
    evals, _ = davidson(hmat.matrix, nroots=n)
    return evals


def davidson(matrix, nroots: int = 1, tol: float = 1e-9, max_iter: int = 200,
             max_subspace: int = 40, seed_vectors: np.ndarray | None = None):
    """Block Davidson for the lowest `nroots` eigenpairs of a symmetric matrix.

    Diagonal preconditioner, subspace capped at `max_subspace` with restart
    on the current Ritz vectors, convergence on the residual 2-norm.
    """
    dim = matrix.shape[0]
    diag = matrix.diagonal()
    nroots = min(nroots, dim)
    if seed_vectors is None:
        guess = np.zeros((dim, nroots))
        for i, j in enumerate(np.argsort(diag)[:nroots]):
            guess[j, i] = 1.0
    else:
        guess = np.array(seed_vectors, dtype=float)
    basis, _ = np.linalg.qr(guess)
    best_resid = np.inf
    for _ in range(max_iter):
        sigma = matrix @ basis
        hsub = basis.T @ sigma
        hsub = 0.5 * (hsub + hsub.T)
        theta, s = np.linalg.eigh(hsub)
        theta, s = theta[:nroots], s[:, :nroots]
        ritz = basis @ s
        resid = sigma @ s - ritz * theta
        norms = np.linalg.norm(resid, axis=0)
        best_resid = min(best_resid, float(norms.max()))
        if np.all(norms <= tol):
            return theta, ritz
        if basis.shape[1] + nroots > max_subspace:
            basis = ritz.copy()
        new_dirs = []
        for i in range(nroots):
            if norms[i] <= tol:
                continue
            denom = diag - theta[i]
            denom = np.where(np.abs(denom) < 1e-10, 1e-10, denom)
            new_dirs.append(resid[:, i] / denom)
        augmented = np.column_stack([basis] + new_dirs)
        basis, _ = np.linalg.qr(augmented)
        basis = basis[:, : min(basis.shape[1], max_subspace)]
    raise IterativeFailureError(
        f"Davidson did not reach tol={tol} in {max_iter} iterations", best_resid)
