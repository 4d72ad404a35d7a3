"""FCIDUMP parsing and antisymmetrized spin-orbital integrals.

The FCIDUMP dialect follows the Molpro convention: a namelist header with
NORB, NELEC, MS2 (ORBSYM/ISYM parsed and ignored), then free-format records
"value i j k l" with 1-based spatial indices in chemists' notation and
8-fold permutational symmetry implied.  The all-zero-index record carries
the core energy, "v p q 0 0" the one-electron integrals, and "v p 0 0 0"
orbital energies (parsed, unused).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

DENSE_ERI_LIMIT = 16   # spatial orbitals; hash map of unique elements above
CONFLICT_TOL = 1e-10   # duplicate records differing by more are an error


class FcidumpError(ValueError):
    """Malformed FCIDUMP content; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


def _canonical(p: int, q: int, r: int, s: int) -> tuple[int, int, int, int]:
    # Representative of the 8-fold orbit of (pq|rs).
    if p < q:
        p, q = q, p
    if r < s:
        r, s = s, r
    if (p, q) < (r, s):
        p, q, r, s = r, s, p, q
    return p, q, r, s


class TwoElectronIntegrals:
    """(pq|rs) in chemists' notation with 8-fold symmetry.

    Dense 4-index storage up to DENSE_ERI_LIMIT spatial orbitals, a dict of
    canonical elements above.
    """

    def __init__(self, norb: int):
        self.norb = norb
        self._dense = None
        self._map: dict[tuple[int, int, int, int], float] | None = None
        if norb <= DENSE_ERI_LIMIT:
            self._dense = np.zeros((norb,) * 4)
        else:
            self._map = {}

    def get(self, p: int, q: int, r: int, s: int) -> float:
        if self._dense is not None:
            return float(self._dense[p - 1, q - 1, r - 1, s - 1])
        return self._map.get(_canonical(p, q, r, s), 0.0)

    def set(self, p: int, q: int, r: int, s: int, value: float,
            line: int | None = None) -> None:
        key = _canonical(p, q, r, s)
        old = self.get(*key)
        if old != 0.0 and abs(old - value) > CONFLICT_TOL:
            raise FcidumpError(
                f"contradictory records for ({p}{q}|{r}{s}): {old!r} vs {value!r}", line)
        if self._dense is not None:
            a, b, c, d = (i - 1 for i in key)
            for i, j in ((a, b), (b, a)):
                for k, l in ((c, d), (d, c)):
                    self._dense[i, j, k, l] = value
                    self._dense[k, l, i, j] = value
        else:
            self._map[key] = value

    def unique_items(self):
        """Canonical (p, q, r, s, value) entries, deterministic order."""
        if self._dense is not None:
            for p in range(1, self.norb + 1):
                for q in range(1, p + 1):
                    for r in range(1, p + 1):
                        for s in range(1, r + 1):
                            if (p, q) < (r, s):
                                continue
                            v = self._dense[p - 1, q - 1, r - 1, s - 1]
                            if v != 0.0:
                                yield p, q, r, s, v
        else:
            for key in sorted(self._map):
                v = self._map[key]
                if v != 0.0:
                    yield (*key, v)

    def dense(self) -> np.ndarray:
        """Full (norb,)*4 array, materialized on demand for the dict path."""
        if self._dense is not None:
            return self._dense
        out = np.zeros((self.norb,) * 4)
        for p, q, r, s, v in self.unique_items():
            a, b, c, d = p - 1, q - 1, r - 1, s - 1
            for i, j in ((a, b), (b, a)):
                for k, l in ((c, d), (d, c)):
                    out[i, j, k, l] = v
                    out[k, l, i, j] = v
        return out


@dataclass
class IntegralTable:
    """Spatial-orbital integrals as read from an FCIDUMP file (Hartree)."""

    norb: int
    nelec: int
    ms2: int
    h: np.ndarray                 # (norb, norb), symmetric
    eri: TwoElectronIntegrals
    e_core: float
    orbsym: tuple[int, ...] = ()
    isym: int | None = None


@dataclass
class SpinOrbitalIntegrals:
    """Antisymmetrized integrals over K = 2*norb spin orbitals.

    `h_so` is the one-electron matrix and `antisym[P,Q,R,S]` holds
    <PQ||RS> = <PQ|RS> - <PQ|SR> in physicists' notation, 0-based indices.
    """

    K: int
    h_so: np.ndarray
    antisym: np.ndarray
    e_core: float

    def h1(self, p: int, q: int) -> float:
        """One-electron element for 1-based spin orbitals."""
        return float(self.h_so[p - 1, q - 1])

    def w(self, p: int, q: int, r: int, s: int) -> float:
        """<pq||rs> for 1-based spin orbitals."""
        return float(self.antisym[p - 1, q - 1, r - 1, s - 1])


_HEADER_KV = re.compile(r"([A-Za-z][A-Za-z0-9_]*)\s*=\s*([^=]*?)(?=(?:,?\s*[A-Za-z][A-Za-z0-9_]*\s*=)|$)")


def _parse_header(lines: list[str], path: str) -> tuple[dict, int]:
    if not lines:
        raise FcidumpError(f"{path}: empty file")
    first = lines[0].lstrip()
    if not (first.startswith("&") or first.startswith("$")):
        raise FcidumpError("header must start with a namelist (&FCI ...)", 1)
    header_parts = []
    end = None
    for i, raw in enumerate(lines):
        text = raw.strip()
        if i == 0:
            text = text.split(None, 1)[1] if len(text.split(None, 1)) > 1 else ""
        for term in ("&END", "$END", "/"):
            if term in text.upper():
                idx = text.upper().index(term)
                header_parts.append(text[:idx])
                end = i
                break
        if end is not None:
            break
        header_parts.append(text)
    if end is None:
        raise FcidumpError("unterminated namelist header (expected /, &END or $END)", len(lines))
    fields = {}
    for key, value in _HEADER_KV.findall(" ".join(header_parts)):
        fields[key.upper()] = value.strip().rstrip(",").strip()
    return fields, end + 1


def _int_field(fields: dict, key: str, default=None):
    if key not in fields:
        if default is not None:
            return default
        raise FcidumpError(f"header missing {key}")
    try:
        return int(float(fields[key]))
    except ValueError as exc:
        raise FcidumpError(f"bad {key} value {fields[key]!r}") from exc


def parse_fcidump(path: str) -> IntegralTable:
    """Read an FCIDUMP file into an IntegralTable, checking all symmetries."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    fields, body_start = _parse_header(lines, path)
    norb = _int_field(fields, "NORB")
    nelec = _int_field(fields, "NELEC")
    ms2 = _int_field(fields, "MS2", default=0)
    if norb < 1 or nelec < 1:
        raise FcidumpError(f"invalid NORB={norb} / NELEC={nelec}")
    orbsym = ()
    if "ORBSYM" in fields:
        orbsym = tuple(int(float(x)) for x in re.split(r"[,\s]+", fields["ORBSYM"]) if x)
    isym = _int_field(fields, "ISYM", default=0) if "ISYM" in fields else None

    h = np.zeros((norb, norb))
    h_seen = np.zeros((norb, norb), dtype=bool)
    eri = TwoElectronIntegrals(norb)
    e_core = 0.0
    core_seen = False

    for lineno0, raw in enumerate(lines[body_start:], start=body_start + 1):
        text = raw.strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 5:
            raise FcidumpError(f"expected 'value i j k l', got {text!r}", lineno0)
        try:
            value = float(parts[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(x) for x in parts[1:])
        except ValueError as exc:
            raise FcidumpError(f"unparsable record {text!r}", lineno0) from exc
        for idx in (i, j, k, l):
            if idx < 0 or idx > norb:
                raise FcidumpError(f"orbital index {idx} out of range 1..{norb}", lineno0)
        if (i, j, k, l) == (0, 0, 0, 0):
            if core_seen and abs(e_core - value) > CONFLICT_TOL:
                raise FcidumpError(f"contradictory core energy: {e_core!r} vs {value!r}", lineno0)
            e_core = value
            core_seen = True
        elif j == 0 and k == 0 and l == 0:
            continue  # orbital energy record, not used for assembly
        elif k == 0 and l == 0:
            if i == 0 or j == 0:
                raise FcidumpError(f"bad one-electron record {text!r}", lineno0)
            a, b = i - 1, j - 1
            if h_seen[a, b] and abs(h[a, b] - value) > CONFLICT_TOL:
                raise FcidumpError(f"contradictory records for h({i},{j})", lineno0)
            h[a, b] = h[b, a] = value
            h_seen[a, b] = h_seen[b, a] = True
        elif i > 0 and j > 0 and k > 0 and l > 0:
            eri.set(i, j, k, l, value, line=lineno0)
        else:
            raise FcidumpError(f"unrecognized index pattern {text!r}", lineno0)

    return IntegralTable(norb=norb, nelec=nelec, ms2=ms2, h=h, eri=eri,
                         e_core=e_core, orbsym=orbsym, isym=isym)


def write_fcidump(table: IntegralTable, path: str) -> None:
    """Write `table` in Molpro convention; round-trips to the last digit."""
    with open(path, "w") as fh:
        fh.write(f" &FCI NORB={table.norb:4d},NELEC={table.nelec:3d},MS2={table.ms2:2d},\n")
        if table.orbsym:
            fh.write("  ORBSYM=" + ",".join(str(s) for s in table.orbsym) + ",\n")
        if table.isym is not None:
            fh.write(f"  ISYM={table.isym},\n")
        fh.write(" &END\n")
        for p, q, r, s, v in table.eri.unique_items():
            fh.write(f" {v:.17g} {p:3d} {q:3d} {r:3d} {s:3d}\n")
        for p in range(1, table.norb + 1):
            for q in range(1, p + 1):
                v = table.h[p - 1, q - 1]
                if v != 0.0:
                    fh.write(f" {v:.17g} {p:3d} {q:3d}   0   0\n")
        fh.write(f" {table.e_core:.17g}   0   0   0   0\n")


def reorder_orbitals(table: IntegralTable, order: list[int]) -> IntegralTable:
    """Permute spatial orbitals so `order` comes first (occupation override).

    `order` lists 1-based spatial orbitals; any orbital not listed keeps its
    relative position after the listed ones.  Used when FCIDUMP orbitals are
    not energy-ordered and the reference determinant must be pinned by hand.
    """
    seen = set(order)
    if len(seen) != len(order) or not all(1 <= p <= table.norb for p in order):
        raise FcidumpError(f"invalid occupation list {order!r}")
    perm = list(order) + [p for p in range(1, table.norb + 1) if p not in seen]
    idx = np.array(perm) - 1
    h = table.h[np.ix_(idx, idx)]
    eri = TwoElectronIntegrals(table.norb)
    dense = table.eri.dense()[np.ix_(idx, idx, idx, idx)]
    for p, q, r, s in zip(*np.nonzero(dense)):
        eri.set(int(p) + 1, int(q) + 1, int(r) + 1, int(s) + 1, float(dense[p, q, r, s]))
    return IntegralTable(norb=table.norb, nelec=table.nelec, ms2=table.ms2,
                         h=h, eri=eri, e_core=table.e_core,
                         orbsym=(), isym=table.isym)


def spinify(table: IntegralTable) -> SpinOrbitalIntegrals:
    """Expand spatial integrals to antisymmetrized spin-orbital integrals.

    Spatial orbital p covers spin orbitals 2p-1 (alpha) and 2p (beta);
    <PQ|RS> = (pr|qs) with spin deltas on the bra/ket pairs.
    """
    norb = table.norb
    K = 2 * norb
    eye2 = np.eye(2)
    h_so = np.einsum("pq,ab->paqb", table.h, eye2).reshape(K, K)
    phys = table.eri.dense().transpose(0, 2, 1, 3)  # <pq|rs> = (pr|qs)
    coul = np.einsum("pqrs,ac,bd->paqbrcsd", phys, eye2, eye2).reshape(K, K, K, K)
    antisym = coul - coul.transpose(0, 1, 3, 2)
    return SpinOrbitalIntegrals(K=K, h_so=h_so, antisym=antisym, e_core=table.e_core)
