"""Determinant bases, excitation index sets, and (de-)excitation actions.

Spin orbitals are numbered 1..K.  Spatial orbital p maps to spin orbitals
2p-1 (alpha) and 2p (beta), so the first N spin orbitals of an energy-ordered
integral set reproduce the Aufbau reference occupation.  A determinant is a
bitmask over the K spin orbitals (bit p-1 set means orbital p occupied);
Python integers make the encoding exact for any K.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import comb

# Phase conventions for excitation / de-excitation operators.
# PAPER_SIGNLESS maps basis determinant to basis determinant with phase +1.
# SECOND_QUANTIZED applies a+_{l1}..a+_{lj} a_{ij}..a_{i1} with fermionic
# parities, for cross-checks against standard quantum-chemistry conventions.
PAPER_SIGNLESS = "paper_signless"
SECOND_QUANTIZED = "second_quantized"
CONVENTIONS = (PAPER_SIGNLESS, SECOND_QUANTIZED)


class DimensionError(ValueError):
    """Raised when K, N or an index is outside the valid range."""


class EmptySectorError(ValueError):
    """Raised when the requested Sz sector contains no determinant."""


def mask_from_orbitals(orbitals) -> int:
    """Bitmask of a collection of 1-based orbital indices.

    >>> bin(mask_from_orbitals((1, 3)))
    '0b101'
    """
    mask = 0
    for p in orbitals:
        mask |= 1 << (p - 1)
    return mask


def orbitals_from_mask(mask: int) -> tuple[int, ...]:
    """Sorted 1-based orbital indices occupied in `mask`.

    >>> orbitals_from_mask(0b1011)
    (1, 2, 4)
    """
    orbs = []
    p = 1
    while mask:
        if mask & 1:
            orbs.append(p)
        mask >>= 1
        p += 1
    return tuple(orbs)


def ms2_of_mask(mask: int) -> int:
    """Twice the Sz projection: alpha (odd) orbitals count +1, beta -1."""
    ms2 = 0
    p = 1
    while mask:
        if mask & 1:
            ms2 += 1 if p % 2 == 1 else -1
        mask >>= 1
        p += 1
    return ms2


@dataclass(frozen=True)
class ExcitationIndex:
    """Rank-j excitation: replace occupied `holes` by virtual `particles`.

    Both tuples are strictly increasing; for a space with reference
    {1..N} the holes lie in 1..N and the particles in N+1..K.
    """

    holes: tuple[int, ...]
    particles: tuple[int, ...]

    def __post_init__(self):
        if len(self.holes) != len(self.particles) or not self.holes:
            raise DimensionError("holes and particles must be non-empty, equal length")
        if any(a >= b for a, b in zip(self.holes, self.holes[1:])):
            raise DimensionError(f"holes not strictly increasing: {self.holes}")
        if any(a >= b for a, b in zip(self.particles, self.particles[1:])):
            raise DimensionError(f"particles not strictly increasing: {self.particles}")

    @property
    def rank(self) -> int:
        return len(self.holes)

    def sort_key(self):
        return (self.rank, self.holes, self.particles)


@dataclass(frozen=True, eq=False)
class DeterminantSpace:
    """Ordered determinant basis over K spin orbitals with N electrons.

    `dets` is lexicographic by bitmask, which puts the reference determinant
    (first N spin orbitals, or the Aufbau filling of the requested Sz
    sector) at ordinal 0.  `index_of` inverts positional lookup.
    """

    K: int
    N: int
    ms2: int | None
    dets: tuple[int, ...]
    index_of: dict[int, int] = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.dets)

    @property
    def reference(self) -> int:
        return self.dets[0]

    def cache_token(self):
        # Construction is deterministic in (K, N, ms2), so the triple
        # identifies the space for memoized action tables.
        return (self.K, self.N, self.ms2)


def enumerate_determinants(K: int, N: int, ms2: int | None = None) -> DeterminantSpace:
    """All N-electron determinants over K spin orbitals, optionally in an Sz sector.

    >>> enumerate_determinants(2, 1).dets
    (1, 2)
    >>> enumerate_determinants(4, 2).size
    6
    """
    if N < 1 or K < N:
        raise DimensionError(f"need K >= N >= 1, got K={K}, N={N}")
    if ms2 is None:
        dets = [mask_from_orbitals(c) for c in combinations(range(1, K + 1), N)]
    else:
        if (N + ms2) % 2 != 0:
            raise EmptySectorError(f"ms2={ms2} incompatible with N={N}")
        n_alpha = (N + ms2) // 2
        n_beta = (N - ms2) // 2
        alphas = list(range(1, K + 1, 2))
        betas = list(range(2, K + 1, 2))
        if not (0 <= n_alpha <= len(alphas) and 0 <= n_beta <= len(betas)):
            raise EmptySectorError(f"no determinant with ms2={ms2} in K={K}, N={N}")
        dets = [
            mask_from_orbitals(ca + cb)
            for ca in combinations(alphas, n_alpha)
            for cb in combinations(betas, n_beta)
        ]
    dets.sort()
    index_of = {d: i for i, d in enumerate(dets)}
    return DeterminantSpace(K=K, N=N, ms2=ms2, dets=tuple(dets), index_of=index_of)


def enumerate_excitations(K: int, N: int, max_rank: int | None = None) -> list[ExcitationIndex]:
    """Excitation indices relative to the reference {1..N}, rank-major then lexicographic.

    >>> len(enumerate_excitations(4, 2))
    5
    >>> len(enumerate_excitations(6, 2, max_rank=1))
    8
    """
    if K < N:
        raise DimensionError(f"need K >= N, got K={K}, N={N}")
    if max_rank is None:
        max_rank = N
    if not 1 <= max_rank <= N:
        raise DimensionError(f"max_rank must be in 1..N, got {max_rank}")
    out = []
    for j in range(1, max_rank + 1):
        for holes in combinations(range(1, N + 1), j):
            for particles in combinations(range(N + 1, K + 1), j):
                out.append(ExcitationIndex(holes, particles))
    return out


def sequential_phase(mask: int, ops: list[tuple[bool, int]]) -> tuple[int, int] | None:
    """Apply a normal-ordered operator string right-to-left with fermionic parity.

    `ops` is listed left-to-right as (create, orbital); returns (mask, phase)
    or None when an annihilation hits an empty orbital or a creation a full one.
    """
    phase = 1
    for create, p in reversed(ops):
        bit = 1 << (p - 1)
        if create:
            if mask & bit:
                return None
        else:
            if not mask & bit:
                return None
        if (mask & (bit - 1)).bit_count() % 2 == 1:
            phase = -phase
        mask ^= bit
    return mask, phase


def _replace(mask: int, remove: tuple[int, ...], add: tuple[int, ...]) -> int | None:
    for p in remove:
        bit = 1 << (p - 1)
        if not mask & bit:
            return None
        mask ^= bit
    for p in add:
        bit = 1 << (p - 1)
        if mask & bit:
            return None
        mask |= bit
    return mask


def apply_excitation(mu: ExcitationIndex, det: int,
                     convention: str = PAPER_SIGNLESS) -> tuple[int, int] | None:
    """Image of `det` under X_mu, or None when the action annihilates it.

    >>> apply_excitation(ExcitationIndex((1,), (3,)), 0b011)
    (6, 1)
    >>> apply_excitation(ExcitationIndex((1,), (3,)), 0b110) is None
    True
    """
    if convention == PAPER_SIGNLESS:
        new = _replace(det, mu.holes, mu.particles)
        return None if new is None else (new, 1)
    if convention == SECOND_QUANTIZED:
        ops = [(True, p) for p in mu.particles] + [(False, h) for h in reversed(mu.holes)]
        return sequential_phase(det, ops)
    raise ValueError(f"unknown convention {convention!r}")


def apply_deexcitation(mu: ExcitationIndex, det: int,
                       convention: str = PAPER_SIGNLESS) -> tuple[int, int] | None:
    """Image of `det` under the adjoint X_mu^dagger (reverse replacement).

    >>> apply_deexcitation(ExcitationIndex((1,), (3,)), 0b110)
    (3, 1)
    >>> apply_deexcitation(ExcitationIndex((1,), (3,)), 0b011) is None
    True
    """
    if convention == PAPER_SIGNLESS:
        new = _replace(det, mu.particles, mu.holes)
        return None if new is None else (new, 1)
    if convention == SECOND_QUANTIZED:
        # Adjoint of a+_{l1}..a+_{lj} a_{ij}..a_{i1}: reverse and flip.
        ops = [(True, h) for h in mu.holes] + [(False, p) for p in reversed(mu.particles)]
        return sequential_phase(det, ops)
    raise ValueError(f"unknown convention {convention!r}")


def excitation_between(ref: int, det: int) -> ExcitationIndex | None:
    """The unique mu with X_mu ref = det (up to phase); None iff det == ref."""
    if det == ref:
        return None
    holes = orbitals_from_mask(ref & ~det)
    particles = orbitals_from_mask(det & ~ref)
    if not holes or len(holes) != len(particles):
        raise DimensionError(f"{det:#b} not reachable from reference {ref:#b}")
    return ExcitationIndex(holes, particles)


def excitations_for_space(space: DeterminantSpace,
                          max_rank: int | None = None) -> list[ExcitationIndex]:
    """Excitation indices whose action on the reference stays inside `space`.

    For an unrestricted space this is the full index set of
    :func:`enumerate_excitations`; in an Sz sector only spin-conserving
    indices survive.  Ordering is rank-major then lexicographic, and the
    list enumerates exactly the non-reference determinants of the space.
    """
    ref = space.reference
    occ = orbitals_from_mask(ref)
    virt = tuple(p for p in range(1, space.K + 1) if not ref & (1 << (p - 1)))
    if max_rank is None:
        max_rank = space.N
    out = []
    for j in range(1, min(max_rank, space.N, len(virt)) + 1):
        for holes in combinations(occ, j):
            for particles in combinations(virt, j):
                new = _replace(ref, holes, particles)
                if new is not None and new in space.index_of:
                    out.append(ExcitationIndex(holes, particles))
    return out


@lru_cache(maxsize=None)
def _cached_space(K: int, N: int, ms2: int | None) -> DeterminantSpace:
    return enumerate_determinants(K, N, ms2)


def sector_size(K: int, N: int, ms2: int | None = None) -> int:
    """Dimension of the determinant space without materializing it.

    >>> sector_size(14, 10)
    1001
    """
    if ms2 is None:
        return comb(K, N)
    if (N + ms2) % 2 != 0:
        return 0
    n_alpha = (N + ms2) // 2
    n_beta = (N - ms2) // 2
    n_a_orbs = (K + 1) // 2
    n_b_orbs = K // 2
    if not (0 <= n_alpha <= n_a_orbs and 0 <= n_beta <= n_b_orbs):
        return 0
    return comb(n_a_orbs, n_alpha) * comb(n_b_orbs, n_beta)
