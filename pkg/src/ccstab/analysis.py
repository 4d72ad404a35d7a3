"""Well-posedness constants and residual-based error bounds.

Everything is measured in the diagonal metric D of the shifted Hamiltonian:
operator norms between the primal space and its dual scale by D^(-1/2) on
both sides, norms of maps of the primal space into itself by D^(1/2) on the
left and D^(-1/2) on the right.  Orthogonal complements (of the reference
or of an eigenvector) are Euclidean, matching the coefficient-space pairing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .cluster import (
    AmplitudeVector,
    ExcitationTable,
    InvalidShiftError,
    NormMetric,
    cluster_csr,
    dual_norm,
    embed_values,
    exp_csr,
    vnorm,
)
from .equations import active_positions, cc_residual
from .hamiltonian import DEGENERACY_TOL, Eigenpair, FciHamiltonian

OP_DENSE_LIMIT = 2000
POWER_TOL = 1e-10
POWER_MAX_ITER = 5000
NEAR_DEGENERATE_GAP = 1e-3   # Hartree; reports warn below this gap


class DegenerateEigenpairError(ValueError):
    """The theory needs a simple, isolated eigenvalue; refuse otherwise."""


def _check_full_metric(metric: NormMetric) -> np.ndarray:
    d = metric.det_weights
    if d.min() <= 0.0:
        raise InvalidShiftError(
            f"whole-space metric has nonpositive weight {d.min():.3e}; "
            "increase the shift")
    return d


def _matvec(m, v):
    return m @ v


def power_sigma_max(matvec, rmatvec, dim: int, tol: float = POWER_TOL,
                    max_iter: int = POWER_MAX_ITER, seed: int = 0) -> float:
    """Largest singular value by power iteration on M M^T."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = rmatvec(matvec(v))
        new_lam = float(np.linalg.norm(w))
        if new_lam == 0.0:
            return 0.0
        v = w / new_lam
        if abs(new_lam - lam) <= tol * max(1.0, new_lam):
            return float(np.sqrt(new_lam))
        lam = new_lam
    return float(np.sqrt(lam))


def weighted_sigma_max(m, left: np.ndarray, right: np.ndarray,
                       dense_limit: int = OP_DENSE_LIMIT) -> float:
    """sigma_max(diag(left) M diag(right)); dense SVD below the size switch."""
    dim = m.shape[0]
    if max(m.shape) <= dense_limit:
        dense = np.asarray(m.todense()) if sp.issparse(m) else np.asarray(m)
        scaled = left[:, None] * dense * right[None, :]
        return float(np.linalg.svd(scaled, compute_uv=False)[0])

    def matvec(v):
        return left * _matvec(m, right * v)

    def rmatvec(v):
        return right * (m.T @ (left * v))

    return power_sigma_max(matvec, rmatvec, m.shape[1])


def weighted_sigma_min(m, left: np.ndarray, right: np.ndarray,
                       dense_limit: int = OP_DENSE_LIMIT) -> float:
    """sigma_min(diag(left) M diag(right)); LU-based inverse iteration above."""
    dense = np.asarray(m.todense()) if sp.issparse(m) else np.asarray(m)
    scaled = left[:, None] * dense * right[None, :]
    if max(m.shape) <= dense_limit:
        return float(np.linalg.svd(scaled, compute_uv=False)[-1])
    lu, piv = sla.lu_factor(scaled)

    def matvec(v):
        return sla.lu_solve((lu, piv), v)

    def rmatvec(v):
        return sla.lu_solve((lu, piv), v, trans=1)

    inv_sigma = power_sigma_max(matvec, rmatvec, m.shape[1])
    return np.inf if inv_sigma == 0.0 else 1.0 / inv_sigma


def euclidean_complement(vector: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the Euclidean orthogonal complement, (dim, dim-1)."""
    return sla.null_space(vector.reshape(1, -1))


def infsup_gamma(hmat: FciHamiltonian, eig: Eigenpair, metric: NormMetric,
                 dense_limit: int = OP_DENSE_LIMIT) -> float:
    """Inf-sup constant of H - E* on the complement of the eigenvector.

    Smallest singular value of N^(-1/2) Q^T (H - E*) Q N^(-1/2) with Q an
    orthonormal complement basis and N = Q^T D Q.
    """
    if eig.degenerate:
        raise DegenerateEigenpairError(
            f"gap {eig.gap:.3e} below {DEGENERACY_TOL}; eigenvalue not simple")
    d = _check_full_metric(metric)
    q = euclidean_complement(eig.vector)
    hq = hmat.matrix @ q
    b = q.T @ hq - eig.energy * np.eye(q.shape[1])
    b = 0.5 * (b + b.T)
    n = (q.T * d[None, :]) @ q
    n = 0.5 * (n + n.T)
    if q.shape[1] <= dense_limit:
        vals = sla.eigh(b, n, eigvals_only=True)
        return float(np.min(np.abs(vals)))
    lu, piv = sla.lu_factor(b)

    def matvec(v):
        return sla.lu_solve((lu, piv), n @ v)

    rho = _power_dominant(matvec, q.shape[1])
    return np.inf if rho == 0.0 else 1.0 / rho


def _power_dominant(matvec, dim: int, tol: float = POWER_TOL,
                    max_iter: int = POWER_MAX_ITER, seed: int = 1) -> float:
    """Dominant eigenvalue magnitude of an operator similar to a symmetric one."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = matvec(v)
        new_lam = float(np.linalg.norm(w))
        if new_lam == 0.0:
            return 0.0
        v = w / new_lam
        if abs(new_lam - lam) <= tol * max(1.0, new_lam):
            return new_lam
        lam = new_lam
    return lam


def theta(tstar: AmplitudeVector, table: ExcitationTable, metric: NormMetric,
          dense_limit: int = OP_DENSE_LIMIT) -> tuple[float, float, float]:
    """Theta = |exp(T*^dagger)| * |P0_perp exp(-T*)| in the D-metric.

    Returns (theta, factor_adjoint, factor_projected).
    """
    d = _check_full_metric(metric)
    sq, isq = np.sqrt(d), 1.0 / np.sqrt(d)
    full = embed_values(tstar, table)
    eplus = exp_csr(full, table, +1)
    eminus = exp_csr(full, table, -1)
    f1 = weighted_sigma_max(eplus.T.tocsr(), sq, isq, dense_limit)
    proj = sp.diags(np.concatenate(([0.0], np.ones(table.space.size - 1))))
    f2 = weighted_sigma_max((proj @ eminus).tocsr(), sq, isq, dense_limit)
    return f1 * f2, f1, f2


def alpha_continuity(tstar: AmplitudeVector, hmat: FciHamiltonian,
                     e_star: float, table: ExcitationTable, metric: NormMetric,
                     transform: np.ndarray | None = None,
                     dense_limit: int = OP_DENSE_LIMIT) -> float:
    """Norm of the excitation block of exp(-T*)(H - E*)exp(T*), primal to dual."""
    d = _check_full_metric(metric)
    if transform is None:
        from .equations import similarity_transform
        transform = similarity_transform(tstar, hmat, table)
    block = transform[1:, 1:] - e_star * np.eye(table.space.size - 1)
    isq = 1.0 / np.sqrt(d[1:])
    return weighted_sigma_max(block, isq, isq, dense_limit)


def sigma_min_jacobian(jac: np.ndarray, mu_weights: np.ndarray,
                       dense_limit: int = OP_DENSE_LIMIT) -> float:
    """Inverse norm |Df^-1|^-1 as sigma_min of D^(-1/2) J D^(-1/2).

    On a diagonal toy with t* = 0 this collapses to min g/(g+shift), the
    same closed form as the inf-sup constant, which pins the convention.
    """
    isq = 1.0 / np.sqrt(mu_weights)
    return weighted_sigma_min(jac, isq, isq, dense_limit)


def monotonicity_gamma(tstar: AmplitudeVector, hmat: FciHamiltonian,
                       e_star: float, table: ExcitationTable, metric: NormMetric,
                       omega: float, gamma: float,
                       dense_limit: int = OP_DENSE_LIMIT) -> tuple[float, dict]:
    """Prior local monotonicity bound Gamma = omega*gamma - |T*-T*^dag| |H-E*|.

    The quadratic remainder in |t*| is dropped; both operator-norm factors
    are returned so the sign can be attributed.
    """
    d = _check_full_metric(metric)
    sq, isq = np.sqrt(d), 1.0 / np.sqrt(d)
    tmat = cluster_csr(embed_values(tstar, table), table)
    asym = (tmat - tmat.T).tocsr()
    t_asym_norm = weighted_sigma_max(asym, sq, isq, dense_limit)
    shifted = (hmat.matrix - e_star * sp.identity(hmat.dim, format="csr")).tocsr()
    h_norm = weighted_sigma_max(shifted, isq, isq, dense_limit)
    gamma_mono = omega * gamma - t_asym_norm * h_norm
    return gamma_mono, {
        "omega": omega,
        "variant": "upper" if omega == 1.0 else "weighted",
        "gamma": gamma,
        "t_asym_norm": t_asym_norm,
        "shifted_h_norm": h_norm,
    }


@dataclass
class GapBound:
    """Analytic reference scalars built from the spectral gap (report only)."""

    spectral_gap: float
    q_factor: float
    continuity_bound: float
    ellipticity_offset: float


def spectral_gap_bound(eig: Eigenpair, n_electrons: int, z_total: float) -> GapBound:
    """Lambda*, q = Lambda*/(Lambda* + 9NZ^2 - E* - 1/4), and the two
    Hamiltonian constants 1/2 + 3 sqrt(N) Z and 9NZ^2 - 1/4, evaluated
    literally with the electronic eigenvalue."""
    lam = eig.gap
    offset = 9.0 * n_electrons * z_total**2 - eig.energy - 0.25
    q = lam / (lam + offset) if lam + offset != 0 else np.inf
    return GapBound(
        spectral_gap=float(lam),
        q_factor=float(q),
        continuity_bound=float(0.5 + 3.0 * np.sqrt(n_electrons) * z_total),
        ellipticity_offset=float(9.0 * n_electrons * z_total**2 - 0.25),
    )


def _sample_direction(rng, weights: np.ndarray) -> np.ndarray:
    """Isotropic direction in D^(-1/2) coordinates, unit V-norm."""
    g = rng.standard_normal(len(weights)) / np.sqrt(weights)
    return g / vnorm(g, weights)


def lipschitz_estimate(tstar: AmplitudeVector, hmat: FciHamiltonian,
                       table: ExcitationTable, metric: NormMetric,
                       delta_grid, samples: int = 4, rng_seed: int = 42,
                       dense_limit: int = OP_DENSE_LIMIT) -> list[tuple[float, float]]:
    """Sampled lower estimate L(delta) of the Jacobian Lipschitz function."""
    from .equations import cc_jacobian
    rng = np.random.default_rng(rng_seed)
    pos = active_positions(table, tstar.index_set)
    weights = metric.mu_weights(table)[pos]
    isq = 1.0 / np.sqrt(weights)
    out = []
    for delta in delta_grid:
        best = 0.0
        for _ in range(samples):
            pts = []
            for _ in range(2):
                direction = _sample_direction(rng, weights)
                radius = delta * rng.uniform(0.2, 1.0)
                pts.append(AmplitudeVector(tstar.values + radius * direction,
                                           tstar.index_set))
            j1 = cc_jacobian(pts[0], hmat, table).matrix
            j2 = cc_jacobian(pts[1], hmat, table).matrix
            dist = vnorm(pts[0].values - pts[1].values, weights)
            if dist == 0.0:
                continue
            ratio = weighted_sigma_max(j1 - j2, isq, isq, dense_limit) / dist
            best = max(best, ratio)
        out.append((float(delta), float(best)))
    return out


def locality_radius(gamma: float, theta_val: float, alpha: float,
                    lipschitz) -> float:
    """Best locality-ball estimate over the sampled Lipschitz grid.

    Optimistic because the sampled L underestimates the true supremum.
    """
    best = 0.0
    for delta, lip in lipschitz:
        if lip == 0.0:
            cand = delta
        else:
            cand = min(delta, gamma / (lip * theta_val), 2.0 * alpha / lip)
        best = max(best, cand)
    return best


@dataclass
class SandwichRow:
    radius: float
    residual_dual_norm: float
    lower: float
    actual: float
    upper: float
    lower_ok: bool
    upper_ok: bool


def verify_sandwich(tstar: AmplitudeVector, hmat: FciHamiltonian,
                    table: ExcitationTable, metric: NormMetric,
                    alpha: float, theta_val: float, gamma: float,
                    radii, samples: int = 100, rng_seed: int = 42) -> dict:
    """Check (1/2alpha)|f(s)| <= |t*-s| <= (2Theta/gamma)|f(s)| on samples.

    Perturbations have exact V-norm r; the theorem guarantees both bounds
    inside the locality ball, so failures flag radii outside it.
    """
    rng = np.random.default_rng(rng_seed)
    pos = active_positions(table, tstar.index_set)
    weights = metric.mu_weights(table)[pos]
    rows = []
    for r in radii:
        for _ in range(samples):
            direction = _sample_direction(rng, weights)
            s = AmplitudeVector(tstar.values + r * direction, tstar.index_set)
            res = cc_residual(s, hmat, table)
            fnorm = dual_norm(res.f.values, weights)
            lower = fnorm / (2.0 * alpha)
            upper = 2.0 * theta_val / gamma * fnorm
            rows.append(SandwichRow(
                radius=float(r), residual_dual_norm=fnorm,
                lower=lower, actual=float(r), upper=upper,
                lower_ok=bool(lower <= r * (1 + 1e-12)),
                upper_ok=bool(r <= upper * (1 + 1e-12))))
    n_ok = sum(1 for row in rows if row.lower_ok and row.upper_ok)
    return {
        "rows": rows,
        "fraction_satisfied": n_ok / len(rows) if rows else 1.0,
    }


@dataclass
class AnalysisReport:
    """All constants of the residual error estimate for one eigenpair."""

    label: str
    space: dict
    convention: str
    metric: dict
    eigen_index: int
    e_hf_total: float
    e_fci_total: float
    e_cc_total: float
    hf_error: float
    ccsd_error: float | None
    gamma: float
    theta: float
    theta_parts: tuple[float, float]
    alpha: float
    sigma_min_jac: float
    gamma_over_theta: float
    monotonicity_gamma: float
    monotonicity_parts: dict
    omega_used: float
    t_norm: float
    spectral_gap: float
    q_factor: float
    continuity_bound: float
    ellipticity_offset: float
    radius: float
    lipschitz: list
    sandwich: dict | None
    degenerate: bool
    sigma_vs_gamma_theta_flag: bool
    jacobian_min_real_part: float | None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["theta_parts"] = list(self.theta_parts)
        if self.sandwich is not None:
            out["sandwich"] = {
                "fraction_satisfied": self.sandwich["fraction_satisfied"],
                "rows": [row.__dict__ for row in self.sandwich["rows"]],
            }
        return out

    CSV_COLUMNS = (
        "molecule", "gamma", "t_norm", "monotonicity_gamma", "sigma_min_jac",
        "gamma_over_theta", "theta", "alpha", "spectral_gap",
        "hf_error", "ccsd_error",
    )

    def csv_row(self) -> list[str]:
        def fmt(x):
            if x is None:
                return ""
            return f"{x:.12e}"
        return [self.label, fmt(self.gamma), fmt(self.t_norm),
                fmt(self.monotonicity_gamma), fmt(self.sigma_min_jac),
                fmt(self.gamma_over_theta), fmt(self.theta), fmt(self.alpha),
                fmt(self.spectral_gap), fmt(self.hf_error), fmt(self.ccsd_error)]
