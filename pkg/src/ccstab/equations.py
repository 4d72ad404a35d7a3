"""Coupled cluster residual, Jacobian, and the damped Newton solver.

The residual components are the excited-determinant coefficients of
exp(-T) H exp(T) |ref>, the energy its reference coefficient.  The active
index set may be the full one (Full-CC, whose zeros match FCI eigenvectors)
or rank-truncated (CCSD and friends); the transformed vector is always
computed in the full determinant space.
"""

from __future__ import annotations

import warnings

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .cluster import (
    AmplitudeVector,
    ExcitationTable,
    NormMetric,
    cluster_csr,
    dual_norm,
    embed_values,
    exp_apply_csr,
    exp_csr,
    vnorm,
)
from .hamiltonian import FciHamiltonian

COND_LIMIT = 1e14


class NearSingularJacobianError(RuntimeError):
    pass


class NonConvergenceError(RuntimeError):
    """Newton ran out of iterations; carries the best iterate and trace."""

    def __init__(self, message, best: AmplitudeVector, trace: "SolverTrace"):
        self.best = best
        self.trace = trace
        super().__init__(message)


@dataclass
class CcResidual:
    """Residual f over the active set, CC energy, and the transformed vector."""

    f: AmplitudeVector
    energy: float
    aux: np.ndarray


@dataclass
class CcJacobian:
    """Dense derivative of the CC residual restricted to the active set."""

    matrix: np.ndarray
    at: AmplitudeVector


@dataclass
class SolverTrace:
    iterations: list = field(default_factory=list)
    converged: bool = False
    non_monotone: bool = False
    final: AmplitudeVector | None = None

    def record(self, residual_norm, energy, step_norm, damping):
        self.iterations.append({
            "residual_dual_norm": float(residual_norm),
            "energy": float(energy),
            "step_norm": float(step_norm),
            "damping": float(damping),
        })

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "non_monotone": self.non_monotone,
            "iterations": self.iterations,
        }


@dataclass
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 50
    max_halvings: int = 20
    use_jacobian: bool = True       # False: quasi-Newton with diagonal metric
    seed: str = "zero"              # "zero" | "mp"
    shift: float = 1.0


def active_positions(table: ExcitationTable, active) -> np.ndarray:
    pos = np.array([table.position[mu] for mu in active], dtype=np.int64)
    return pos


def cc_residual(t: AmplitudeVector, hmat: FciHamiltonian,
                table: ExcitationTable) -> CcResidual:
    """f_mu = <X_mu ref, exp(-T) H exp(T) ref> for mu in t's index set."""
    tmat = cluster_csr(embed_values(t, table), table)
    e0 = np.zeros(table.space.size)
    e0[0] = 1.0
    u = exp_apply_csr(tmat, e0, +1, table.space.N)
    aux = exp_apply_csr(tmat, hmat.matrix @ u, -1, table.space.N)
    pos = active_positions(table, t.index_set)
    f_vals = table.ref_phase[pos] * aux[table.det_of_mu[pos]]
    f = AmplitudeVector(f_vals, t.index_set, dual=True)
    return CcResidual(f=f, energy=float(aux[0]), aux=aux)


def similarity_transform(t: AmplitudeVector, hmat: FciHamiltonian,
                          table: ExcitationTable) -> np.ndarray:
    """Dense exp(-T) H exp(T) over the determinant basis."""
    full = embed_values(t, table)
    eplus = exp_csr(full, table, +1)
    eminus = exp_csr(full, table, -1)
    dense = hmat.matrix @ eplus.toarray()
    return eminus @ dense


def cc_jacobian(t: AmplitudeVector, hmat: FciHamiltonian,
                table: ExcitationTable,
                transform: np.ndarray | None = None) -> CcJacobian:
    """Column nu: excitation rows of exp(-T)[H, X_nu]exp(T) |ref>.

    Since X_nu commutes with exp(T), the column splits into a block of the
    dense similarity transform F = exp(-T) H exp(T) and a scatter of the
    transformed reference vector w = F |ref>; `transform` may pass a
    precomputed F.
    """
    pos = active_positions(table, t.index_set)
    F = similarity_transform(t, hmat, table) if transform is None else transform
    w = F[:, 0].copy()
    rows = table.det_of_mu[pos]
    ph = table.ref_phase[pos]
    j1 = (ph[:, None] * ph[None, :]) * F[np.ix_(rows, rows)]

    n_act = len(pos)
    dim = table.space.size
    act_row_of_det = np.full(dim, -1, dtype=np.int64)
    act_row_of_det[rows] = np.arange(n_act)
    act_col_of_amp = np.full(table.n_amplitudes, -1, dtype=np.int64)
    act_col_of_amp[pos] = np.arange(n_act)

    r_idx = act_row_of_det[table.dst]
    c_idx = act_col_of_amp[table.amp]
    mask = (r_idx >= 0) & (c_idx >= 0)
    j2 = np.zeros((n_act, n_act))
    np.add.at(j2, (r_idx[mask], c_idx[mask]),
              table.phase[mask] * w[table.src[mask]])
    j2 *= ph[:, None]
    return CcJacobian(matrix=j1 - j2, at=t)


def mp_seed(hmat: FciHamiltonian, table: ExcitationTable, active,
            weights: np.ndarray) -> AmplitudeVector:
    """Perturbative start t_mu = -f_mu(0) / D_mu."""
    t0 = AmplitudeVector(np.zeros(len(active)), tuple(active))
    res = cc_residual(t0, hmat, table)
    return AmplitudeVector(-res.f.values / weights, tuple(active))


def newton_solve(hmat: FciHamiltonian, table: ExcitationTable, active,
                 t0: AmplitudeVector | None = None,
                 opts: SolverOptions | None = None,
                 metric: NormMetric | None = None) -> tuple[AmplitudeVector, SolverTrace]:
    """Damped Newton on the CC equations over `active`.

    Convergence is met when the dual norm of the residual drops below
    opts.tol; steps are halved (at most opts.max_halvings times) whenever
    the residual norm fails to decrease.  Without Jacobian assembly a
    quasi-Newton update with the diagonal metric is used instead.
    """
    opts = opts or SolverOptions()
    active = tuple(active)
    if metric is not None:
        weights = metric.mu_weights(table)[active_positions(table, active)]
    else:
        # positive stand-in metric from the diagonal; analysis passes the
        # eigenvalue-shifted one
        diag = hmat.diagonal
        det_w = diag - diag.min() + opts.shift
        weights = det_w[table.det_of_mu[active_positions(table, active)]]

    if t0 is None:
        if opts.seed == "mp":
            t = mp_seed(hmat, table, active, weights)
        else:
            t = AmplitudeVector(np.zeros(len(active)), active)
    else:
        t = AmplitudeVector(np.array(t0.values, dtype=float), active)

    trace = SolverTrace()
    res = cc_residual(t, hmat, table)
    rnorm = dual_norm(res.f.values, weights)
    trace.record(rnorm, res.energy, 0.0, 1.0)

    for _ in range(opts.max_iter):
        if rnorm <= opts.tol:
            trace.converged = True
            trace.final = t
            return t, trace
        if opts.use_jacobian:
            jac = cc_jacobian(t, hmat, table).matrix
            with warnings.catch_warnings():
                # exact singularity is caught by the condition estimate below
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                lu, piv = sla.lu_factor(jac)
            cond = _condition_estimate(jac, lu, piv)
            if cond > COND_LIMIT:
                raise NearSingularJacobianError(
                    f"Jacobian condition estimate {cond:.2e} exceeds {COND_LIMIT:.0e}")
            step = sla.lu_solve((lu, piv), -res.f.values)
        else:
            step = -res.f.values / weights

        damping = 1.0
        accepted = None
        for _ in range(opts.max_halvings + 1):
            cand = AmplitudeVector(t.values + damping * step, active)
            cand_res = cc_residual(cand, hmat, table)
            cand_norm = dual_norm(cand_res.f.values, weights)
            if cand_norm < rnorm:
                accepted = (cand, cand_res, cand_norm, damping)
                break
            damping *= 0.5
        if accepted is None:
            # no decrease at the smallest step: take it and flag the run
            cand = AmplitudeVector(t.values + damping * 2.0 * step, active)
            cand_res = cc_residual(cand, hmat, table)
            cand_norm = dual_norm(cand_res.f.values, weights)
            accepted = (cand, cand_res, cand_norm, damping * 2.0)
            trace.non_monotone = True
        t, res, rnorm, damping = accepted
        trace.record(rnorm, res.energy, float(np.linalg.norm(damping * step)), damping)

    if rnorm <= opts.tol:
        trace.converged = True
        trace.final = t
        return t, trace
    trace.final = t
    raise NonConvergenceError(
        f"no convergence after {opts.max_iter} iterations "
        f"(residual dual norm {rnorm:.3e})", t, trace)


def _condition_estimate(jac: np.ndarray, lu, piv) -> float:
    anorm = np.linalg.norm(jac, 1)
    gecon = sla.get_lapack_funcs("gecon", (jac,))
    rcond, _ = gecon(lu, anorm)
    return np.inf if rcond == 0 else 1.0 / rcond


def amplitude_vnorm(t: AmplitudeVector, metric: NormMetric,
                    table: ExcitationTable) -> float:
    pos = active_positions(table, t.index_set)
    return vnorm(t.values, metric.mu_weights(table)[pos])
