"""Molecular integral sets and the FCIDUMP file format.

Two-electron integrals are stored in chemist convention (pq|rs) as a full
n**4 array with the 8-fold permutation symmetry completed on ingestion.
Indices in files are 1-based; a line ``v i j 0 0`` is a one-electron entry,
``v 0 0 0 0`` is the core (nuclear repulsion) energy.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np


class IntegralError(ValueError):
    """Raised for malformed FCIDUMP content or inconsistent integral sets."""


_H2_PERMS = (
    (0, 1, 2, 3), (1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2),
    (2, 3, 0, 1), (2, 3, 1, 0), (3, 2, 0, 1), (3, 2, 1, 0),
)


@dataclass
class IntegralSet:
    """One- and two-electron integrals over a spatial-orbital basis.

    Fields:
        n_orbitals: spatial orbital count.
        n_electrons: electron count the set describes.
        ms2: twice the spin projection of the target sector.
        h1: (n, n) symmetric one-electron matrix, Hartree.
        h2: (n, n, n, n) chemist-convention (pq|rs) array, Hartree.
        core_energy: scalar constant (nuclear repulsion plus any frozen core).
    """

    n_orbitals: int
    n_electrons: int
    ms2: int
    h1: np.ndarray
    h2: np.ndarray
    core_energy: float
    source: str = ""

    SYM_TOL = 1e-10

    def validate(self):
        n = self.n_orbitals
        if self.h1.shape != (n, n):
            raise IntegralError(f"h1 shape {self.h1.shape} != ({n}, {n})")
        if self.h2.shape != (n, n, n, n):
            raise IntegralError(f"h2 shape {self.h2.shape} incompatible")
        if not (0 <= self.n_electrons <= 2 * n):
            raise IntegralError(f"electron count {self.n_electrons} out of range")
        if np.max(np.abs(self.h1 - self.h1.T)) > self.SYM_TOL:
            raise IntegralError("h1 not symmetric")
        for perm in _H2_PERMS[1:]:
            delta = np.max(np.abs(self.h2 - np.transpose(self.h2, perm)))
            if delta > self.SYM_TOL:
                raise IntegralError(
                    f"h2 violates permutation symmetry {perm} by {delta:.3e}")
        return self

    def copy(self):
        return IntegralSet(self.n_orbitals, self.n_electrons, self.ms2,
                           self.h1.copy(), self.h2.copy(), self.core_energy,
                           self.source)

    def scaled(self, factor):
        return IntegralSet(self.n_orbitals, self.n_electrons, self.ms2,
                           factor * self.h1, factor * self.h2,
                           factor * self.core_energy, self.source)


def combine(weighted_sets):
    """Weighted linear combination of integral sets on one orbital basis.

    Metadata (orbital/electron counts, ms2) is taken from the first entry.
    """
    weighted_sets = list(weighted_sets)
    if not weighted_sets:
        raise IntegralError("combine needs at least one integral set")
    first = weighted_sets[0][1]
    h1 = np.zeros_like(first.h1)
    h2 = np.zeros_like(first.h2)
    core = 0.0
    for w, s in weighted_sets:
        if s.n_orbitals != first.n_orbitals:
            raise IntegralError("orbital count mismatch in combine")
        h1 += w * s.h1
        h2 += w * s.h2
        core += w * s.core_energy
    return IntegralSet(first.n_orbitals, first.n_electrons, first.ms2,
                       h1, h2, core)


_HEADER_KV = re.compile(r"([A-Za-z0-9_]+)\s*=\s*([^,\s/]+)")


def parse_fcidump(path_or_text):
    """Parse an FCIDUMP file or string into an IntegralSet.

    Accepts Fortran-style D exponents, multi-line headers terminated by
    ``&END`` or ``/``, and ignores ORBSYM/ISYM entries. Conflicting duplicate
    entries (differing beyond 1e-10) raise IntegralError.
    """
    text = path_or_text
    if "\n" not in str(path_or_text):
        with open(path_or_text) as fh:
            text = fh.read()
        source = str(path_or_text)
    else:
        source = "<string>"
    lines = text.splitlines()
    header_lines = []
    body_start = 0
    in_header = False
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            continue
        if not in_header:
            if not stripped.upper().startswith("&FCI"):
                raise IntegralError("FCIDUMP must start with an &FCI header")
            in_header = True
            stripped = stripped[4:]
        header_lines.append(stripped)
        if "&END" in stripped.upper() or stripped.endswith("/"):
            body_start = i + 1
            break
    else:
        raise IntegralError("unterminated FCIDUMP header")
    header = " ".join(header_lines)
    header = header.upper().replace("&END", " ")
    fields = dict(_HEADER_KV.findall(header))
    try:
        n_orb = int(fields["NORB"])
        n_elec = int(fields["NELEC"])
    except KeyError as exc:
        raise IntegralError(f"FCIDUMP header missing {exc}") from exc
    ms2 = int(fields.get("MS2", 0))
    if n_orb < 1:
        raise IntegralError("NORB must be positive")

    h1 = np.zeros((n_orb, n_orb))
    h2 = np.zeros((n_orb, n_orb, n_orb, n_orb))
    h1_seen = np.zeros((n_orb, n_orb), dtype=bool)
    h2_seen = np.zeros(h2.shape, dtype=bool)
    core = 0.0
    core_seen = False
    for raw in lines[body_start:]:
        line = raw.strip()
        if not line:
            continue
        parts = line.replace("D", "E").replace("d", "e").split()
        if len(parts) != 5:
            raise IntegralError(f"malformed FCIDUMP line: {raw!r}")
        try:
            value = float(parts[0])
            i, j, k, l = (int(p) for p in parts[1:])
        except ValueError as exc:
            raise IntegralError(f"malformed FCIDUMP line: {raw!r}") from exc
        for idx in (i, j, k, l):
            if idx < 0 or idx > n_orb:
                raise IntegralError(f"orbital index out of range: {raw!r}")
        if i == 0 and j == 0 and k == 0 and l == 0:
            if core_seen and abs(core - value) > 1e-10:
                raise IntegralError("conflicting duplicate core energy")
            core = value
            core_seen = True
        elif k == 0 and l == 0:
            if i == 0 or j == 0:
                raise IntegralError(f"malformed one-electron entry: {raw!r}")
            a, b = i - 1, j - 1
            if h1_seen[a, b] and abs(h1[a, b] - value) > 1e-10:
                raise IntegralError(f"conflicting duplicate h1 entry {i} {j}")
            h1[a, b] = h1[b, a] = value
            h1_seen[a, b] = h1_seen[b, a] = True
        elif i == 0 or j == 0 or k == 0 or l == 0:
            raise IntegralError(f"malformed integral entry: {raw!r}")
        else:
            idx = (i - 1, j - 1, k - 1, l - 1)
            for perm in _H2_PERMS:
                tgt = tuple(idx[p] for p in perm)
                if h2_seen[tgt] and abs(h2[tgt] - value) > 1e-10:
                    raise IntegralError(
                        f"conflicting duplicate h2 entry {i} {j} {k} {l}")
                h2[tgt] = value
                h2_seen[tgt] = True
    out = IntegralSet(n_orb, n_elec, ms2, h1, h2, core, source)
    return out.validate()


def write_fcidump(path, ints, tol=1e-15):
    """Write an integral set as an FCIDUMP file with unique entries only."""
    n = ints.n_orbitals
    with open(path, "w") as fh:
        fh.write(f" &FCI NORB={n:4d},NELEC={ints.n_electrons:3d},"
                 f"MS2={ints.ms2:2d},\n")
        fh.write("  ORBSYM=" + "1," * n + "\n")
        fh.write("  ISYM=1,\n")
        fh.write(" &END\n")
        for i in range(n):
            for j in range(i + 1):
                for k in range(i + 1):
                    l_max = j if k == i else k
                    for l in range(l_max + 1):
                        v = ints.h2[i, j, k, l]
                        if abs(v) > tol:
                            fh.write(f"{v: .17E} {i + 1:4d} {j + 1:4d}"
                                     f" {k + 1:4d} {l + 1:4d}\n")
        for i in range(n):
            for j in range(i + 1):
                v = ints.h1[i, j]
                if abs(v) > tol:
                    fh.write(f"{v: .17E} {i + 1:4d} {j + 1:4d}    0    0\n")
        fh.write(f"{ints.core_energy: .17E}    0    0    0    0\n")
