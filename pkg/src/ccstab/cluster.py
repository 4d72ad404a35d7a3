"""Cluster operators T = sum_mu t_mu X_mu and their nilpotent exponentials.

An ExcitationTable caches the scatter action of every excitation index of a
space, so cluster operators become sparse matrices and the exponential
series terminates exactly at order N (nilpotency).  The module also carries
the CI <-> CC amplitude conversion and the diagonal V / V* norms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .determinants import (
    CONVENTIONS,
    PAPER_SIGNLESS,
    DeterminantSpace,
    ExcitationIndex,
    apply_excitation,
    excitations_for_space,
    orbitals_from_mask,
)
from .hamiltonian import FciHamiltonian

INTERMEDIATE_TOL = 1e-8   # |<ref, psi>| below this is not CC-representable
DEFAULT_SHIFT = 1.0


class IndexSetMismatchError(ValueError):
    pass


class NotIntermediatelyNormalizableError(ValueError):
    """Reference coefficient too small for the exponential ansatz."""


class InvalidShiftError(ValueError):
    """Shifted diagonal metric not positive; suggests a larger shift."""


@dataclass(eq=False)
class ExcitationTable:
    """Scatter form of all X_mu of a space under one phase convention.

    Entry arrays run over all (mu, source determinant) pairs with nonzero
    action: dst[e] = index of X_mu applied to dets[src[e]] with sign
    phase[e], where mu = excitations[amp[e]].
    """

    space: DeterminantSpace
    convention: str
    excitations: tuple[ExcitationIndex, ...]
    position: dict[ExcitationIndex, int] = field(repr=False)
    src: np.ndarray = field(repr=False)
    dst: np.ndarray = field(repr=False)
    amp: np.ndarray = field(repr=False)
    phase: np.ndarray = field(repr=False)
    det_of_mu: np.ndarray = field(repr=False)   # index of X_mu |ref>
    ref_phase: np.ndarray = field(repr=False)   # sign of X_mu |ref>
    row_of_det: np.ndarray = field(repr=False)  # inverse of det_of_mu, -1 at ref

    @property
    def n_amplitudes(self) -> int:
        return len(self.excitations)

    def ranks(self) -> np.ndarray:
        return np.array([mu.rank for mu in self.excitations])

    def rank_positions(self, max_rank: int) -> np.ndarray:
        """Positions of all excitations with rank <= max_rank."""
        return np.nonzero(self.ranks() <= max_rank)[0]


_TABLE_CACHE: dict[tuple, ExcitationTable] = {}


def get_excitation_table(space: DeterminantSpace,
                         convention: str = PAPER_SIGNLESS) -> ExcitationTable:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    key = (space.cache_token(), convention)
    cached = _TABLE_CACHE.get(key)
    if cached is not None and (cached.space is space or cached.space.dets == space.dets):
        return cached

    excitations = tuple(excitations_for_space(space))
    position = {mu: i for i, mu in enumerate(excitations)}
    ref = space.reference
    occ_ref = set(orbitals_from_mask(ref))
    index_of = space.index_of

    src, dst, amp, phase = [], [], [], []
    for isrc, det in enumerate(space.dets):
        ho = tuple(p for p in orbitals_from_mask(det) if p in occ_ref)
        pa = tuple(p for p in range(1, space.K + 1)
                   if p not in occ_ref and not det & (1 << (p - 1)))
        for j in range(1, min(len(ho), len(pa)) + 1):
            for holes in combinations(ho, j):
                for particles in combinations(pa, j):
                    mu = ExcitationIndex(holes, particles)
                    pos = position.get(mu)
                    if pos is None:
                        continue
                    res = apply_excitation(mu, det, convention)
                    idst = index_of.get(res[0])
                    if idst is None:
                        continue
                    src.append(isrc)
                    dst.append(idst)
                    amp.append(pos)
                    phase.append(res[1])

    det_of_mu = np.empty(len(excitations), dtype=np.int64)
    ref_phase = np.empty(len(excitations))
    for i, mu in enumerate(excitations):
        res = apply_excitation(mu, ref, convention)
        det_of_mu[i] = index_of[res[0]]
        ref_phase[i] = res[1]
    row_of_det = np.full(space.size, -1, dtype=np.int64)
    row_of_det[det_of_mu] = np.arange(len(excitations))

    table = ExcitationTable(
        space=space, convention=convention, excitations=excitations,
        position=position,
        src=np.asarray(src, dtype=np.int64), dst=np.asarray(dst, dtype=np.int64),
        amp=np.asarray(amp, dtype=np.int64), phase=np.asarray(phase, dtype=float),
        det_of_mu=det_of_mu, ref_phase=ref_phase, row_of_det=row_of_det)
    _TABLE_CACHE[key] = table
    return table


@dataclass
class AmplitudeVector:
    """Real coefficients over an excitation index set (possibly a subset)."""

    values: np.ndarray
    index_set: tuple[ExcitationIndex, ...]
    dual: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.index_set),):
            raise IndexSetMismatchError(
                f"{self.values.shape} values for {len(self.index_set)} indices")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("amplitudes must be finite")

    def to_json(self) -> str:
        return json.dumps({
            "dual": self.dual,
            "index_set": [[list(mu.holes), list(mu.particles)] for mu in self.index_set],
            "values": self.values.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "AmplitudeVector":
        data = json.loads(text)
        index_set = tuple(ExcitationIndex(tuple(h), tuple(p))
                          for h, p in data["index_set"])
        return cls(values=np.array(data["values"], dtype=float),
                   index_set=index_set, dual=bool(data.get("dual", False)))


def zeros_like_index_set(index_set) -> AmplitudeVector:
    return AmplitudeVector(np.zeros(len(index_set)), tuple(index_set))


def embed_values(t: AmplitudeVector, table: ExcitationTable) -> np.ndarray:
    """Amplitudes of `t` spread over the table's full index set."""
    full = np.zeros(table.n_amplitudes)
    for mu, v in zip(t.index_set, t.values):
        pos = table.position.get(mu)
        if pos is None:
            raise IndexSetMismatchError(f"{mu} not an excitation of the space")
        full[pos] = v
    return full


def cluster_csr(full_values: np.ndarray, table: ExcitationTable) -> sp.csr_matrix:
    """Sparse matrix of T = sum_mu t_mu X_mu over the determinant basis."""
    dim = table.space.size
    data = full_values[table.amp] * table.phase
    return sp.csr_matrix((data, (table.dst, table.src)), shape=(dim, dim))


def cluster_apply(t: AmplitudeVector, v: np.ndarray, table: ExcitationTable) -> np.ndarray:
    """(sum_mu t_mu X_mu) v."""
    v = np.asarray(v, dtype=float)
    if v.shape != (table.space.size,):
        raise IndexSetMismatchError(f"vector of dim {v.shape} on space {table.space.size}")
    return cluster_csr(embed_values(t, table), table) @ v


def cluster_adjoint_apply(t: AmplitudeVector, v: np.ndarray,
                          table: ExcitationTable) -> np.ndarray:
    """(sum_mu t_mu X_mu^dagger) v, the transpose action."""
    v = np.asarray(v, dtype=float)
    if v.shape != (table.space.size,):
        raise IndexSetMismatchError(f"vector of dim {v.shape} on space {table.space.size}")
    return cluster_csr(embed_values(t, table), table).T @ v


def exp_apply_csr(tmat: sp.csr_matrix, v: np.ndarray, sign: int, order: int) -> np.ndarray:
    """exp(sign*T) v with the series truncated exactly by nilpotency."""
    out = np.array(v, dtype=float)
    term = out.copy()
    for k in range(1, order + 1):
        term = sign * (tmat @ term) / k
        if not np.any(term):
            break
        out += term
    return out


def exp_apply(t: AmplitudeVector, v: np.ndarray, sign: int,
              table: ExcitationTable) -> np.ndarray:
    """exp(sign*T) v; exact because T^(N+1) = 0."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    v = np.asarray(v, dtype=float)
    if v.shape != (table.space.size,):
        raise IndexSetMismatchError(f"vector of dim {v.shape} on space {table.space.size}")
    tmat = cluster_csr(embed_values(t, table), table)
    return exp_apply_csr(tmat, v, sign, table.space.N)


def exp_csr(full_values: np.ndarray, table: ExcitationTable, sign: int) -> sp.csr_matrix:
    """exp(sign*T) as an explicit sparse matrix (series of csr powers)."""
    dim = table.space.size
    tmat = cluster_csr(sign * full_values, table)
    out = sp.identity(dim, format="csr")
    term = sp.identity(dim, format="csr")
    for k in range(1, table.space.N + 1):
        term = (term @ tmat) / k
        term.eliminate_zeros()
        if term.nnz == 0:
            break
        out = out + term
    return out.tocsr()


def cc_to_ci(t: AmplitudeVector, table: ExcitationTable) -> np.ndarray:
    """exp(T) applied to the reference determinant."""
    e0 = np.zeros(table.space.size)
    e0[0] = 1.0
    return exp_apply(t, e0, +1, table)


def ci_to_cc(psi: np.ndarray, table: ExcitationTable) -> AmplitudeVector:
    """Amplitudes t with exp(T) |ref> = psi / <ref, psi>.

    T = log(I + R) evaluated by iterated application to the reference only,
    where R carries the excited coefficients of the normalized vector.
    """
    psi = np.asarray(psi, dtype=float)
    c0 = psi[0]
    if abs(c0) < INTERMEDIATE_TOL:
        raise NotIntermediatelyNormalizableError(
            f"reference coefficient {c0:.3e} below {INTERMEDIATE_TOL}")
    scaled = psi / c0
    r_full = table.ref_phase * scaled[table.det_of_mu]
    rmat = cluster_csr(r_full, table)
    e0 = np.zeros(table.space.size)
    e0[0] = 1.0
    term = rmat @ e0
    acc = term.copy()
    for k in range(2, table.space.N + 1):
        term = rmat @ term
        if not np.any(term):
            break
        acc += ((-1) ** (k + 1)) * term / k
    t_full = table.ref_phase * acc[table.det_of_mu]
    return AmplitudeVector(t_full, table.excitations)


@dataclass
class NormMetric:
    """Diagonal weights realizing the working norm on the determinant basis.

    det_weights[k] = H_kk - e_star + shift over every determinant ordinal;
    the entries behind the excitation indices (all non-reference ordinals)
    are the positive weights D_mu of the amplitude norms, and the reference
    entry is kept for whole-space operator norms.
    """

    det_weights: np.ndarray
    shift: float
    e_star: float

    def mu_weights(self, table: ExcitationTable) -> np.ndarray:
        """Weights aligned with the table's excitation ordering."""
        return self.det_weights[table.det_of_mu]

    def scaled(self, c: float) -> "NormMetric":
        return NormMetric(self.det_weights * c, self.shift, self.e_star)


def build_norm_metric(hmat: FciHamiltonian, e_star: float,
                      shift: float = DEFAULT_SHIFT) -> NormMetric:
    """Diagonal metric of the shifted Hamiltonian; positive off the reference."""
    det_weights = hmat.diagonal - e_star + shift
    if det_weights[1:].min() <= 0.0:
        raise InvalidShiftError(
            f"nonpositive weight {det_weights[1:].min():.3e}; increase the shift "
            f"(currently {shift})")
    return NormMetric(det_weights=det_weights, shift=shift, e_star=e_star)


def vnorm(values: np.ndarray, weights: np.ndarray) -> float:
    """Primal norm sqrt(sum_mu D_mu t_mu^2)."""
    return float(np.sqrt(np.sum(weights * np.asarray(values) ** 2)))


def dual_norm(values: np.ndarray, weights: np.ndarray) -> float:
    """Dual norm sqrt(sum_mu w_mu^2 / D_mu)."""
    return float(np.sqrt(np.sum(np.asarray(values) ** 2 / weights)))
