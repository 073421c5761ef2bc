"""Pauli-string algebra, Jordan-Wigner mapping and Hamiltonian assembly.

Operators are stored as real linear combinations of Pauli strings plus an
identity constant. Qubit 0 is the leftmost (most significant) position of a
computational basis label, so ``|1100>`` on four qubits is amplitude index 12.
Spin-orbitals are interleaved: spatial orbital i maps to qubit 2i (spin up)
and qubit 2i+1 (spin down).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PAULI_OPS = ("X", "Y", "Z")

# Single-qubit products a*b -> (phase, op), identity encoded as "".
_PRODUCT = {
    ("X", "X"): (1.0, ""),
    ("Y", "Y"): (1.0, ""),
    ("Z", "Z"): (1.0, ""),
    ("X", "Y"): (1j, "Z"),
    ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"),
    ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"),
    ("X", "Z"): (-1j, "Y"),
}

_MATS = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class PauliError(ValueError):
    """Raised for malformed Pauli operators or mismatched qubit counts."""


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Pauli factors on distinct qubits.

    ``factors`` is a tuple of (qubit, op) pairs sorted by qubit index with
    op in {X, Y, Z}; qubits not listed carry identity. The empty tuple is
    the identity string.
    """

    factors: tuple = ()

    def __post_init__(self):
        qubits = [q for q, _ in self.factors]
        if any(op not in PAULI_OPS for _, op in self.factors):
            raise PauliError("Pauli factors must be one of X, Y, Z")
        if any(q < 0 for q in qubits):
            raise PauliError("qubit indices must be non-negative")
        if len(set(qubits)) != len(qubits):
            raise PauliError("duplicate qubit index in Pauli string")
        if list(qubits) != sorted(qubits):
            object.__setattr__(self, "factors", tuple(sorted(self.factors)))

    @staticmethod
    def from_ops(ops):
        """Build from an iterable of (qubit, op) pairs."""
        return PauliString(tuple(ops))

    @property
    def qubits(self):
        return tuple(q for q, _ in self.factors)

    def max_qubit(self):
        return max((q for q, _ in self.factors), default=-1)

    def weight(self):
        """Number of non-identity factors."""
        return len(self.factors)

    def __str__(self):
        if not self.factors:
            return "I"
        return " ".join(f"{op}{q}" for q, op in self.factors)


def multiply(a, b):
    """Product of two Pauli strings.

    Returns:
        (phase, string) with phase in {1, -1, 1j, -1j} such that
        a * b = phase * string.
    """
    ops = dict(a.factors)
    phase = complex(1.0)
    for q, op_b in b.factors:
        op_a = ops.pop(q, None)
        if op_a is None:
            ops[q] = op_b
            continue
        ph, op = _PRODUCT[(op_a, op_b)]
        phase *= ph
        if op:
            ops[q] = op
    return phase, PauliString(tuple(sorted(ops.items())))


@dataclass
class PauliSum:
    """Real linear combination of Pauli strings plus an identity constant.

    Fields:
        n_qubits: size of the register the operator acts on.
        terms: map PauliString -> real coefficient, pruned below 1e-12.
        constant: coefficient of the identity.
    """

    n_qubits: int
    terms: dict = field(default_factory=dict)
    constant: float = 0.0

    PRUNE_TOL = 1e-12

    def __post_init__(self):
        if self.n_qubits < 1:
            raise PauliError("n_qubits must be positive")
        for s in self.terms:
            if s.max_qubit() >= self.n_qubits:
                raise PauliError(
                    f"string {s} exceeds register of {self.n_qubits} qubits")
        self.prune()

    def prune(self, tol=None):
        """Drop terms with |coefficient| below tol (default 1e-12)."""
        tol = self.PRUNE_TOL if tol is None else tol
        for s in [s for s, c in self.terms.items() if abs(c) < tol]:
            del self.terms[s]
        self._compiled = None
        return self

    def copy(self):
        return PauliSum(self.n_qubits, dict(self.terms), self.constant)

    def add_term(self, string, coeff):
        self.terms[string] = self.terms.get(string, 0.0) + coeff
        self._compiled = None

    def scaled(self, factor):
        return PauliSum(
            self.n_qubits,
            {s: factor * c for s, c in self.terms.items()},
            factor * self.constant,
        )

    def __len__(self):
        return len(self.terms)

    def norm1(self):
        """Sum of absolute coefficients including the constant."""
        return abs(self.constant) + sum(abs(c) for c in self.terms.values())

    def sorted_terms(self):
        """Terms in canonical (deterministic) order."""
        return sorted(self.terms.items(), key=lambda item: item[0].factors)

    # Compiled bit-mask representation, shared by the simulator and the
    # exact-diagonalization paths. Masks use bit (n_qubits - 1 - q) for
    # qubit q so that integer basis labels read left to right.
    _compiled = None

    def compiled(self):
        if self._compiled is None:
            self._compiled = _compile(self)
        return self._compiled


@dataclass(frozen=True)
class CompiledPauliSum:
    """Arrays driving vectorized application of a PauliSum.

    For each term, acting on basis state |x>:
        P|x> = coeff * i**ny * (-1)^parity(x & phase_mask) * |x XOR flip_mask>
    where ny is the number of Y factors.
    """

    n_qubits: int
    flip_mask: np.ndarray
    phase_mask: np.ndarray
    ny: np.ndarray
    coeff: np.ndarray
    constant: float

    @property
    def n_terms(self):
        return len(self.coeff)

    def all_even_y(self):
        return bool(np.all(self.ny % 2 == 0))


def _compile(op):
    n = op.n_qubits
    items = op.sorted_terms()
    flip = np.zeros(len(items), dtype=np.uint64)
    phase = np.zeros(len(items), dtype=np.uint64)
    ny = np.zeros(len(items), dtype=np.int64)
    coeff = np.zeros(len(items), dtype=np.float64)
    for t, (s, c) in enumerate(items):
        f = 0
        p = 0
        y = 0
        for q, o in s.factors:
            bit = 1 << (n - 1 - q)
            if o in ("X", "Y"):
                f |= bit
            if o in ("Y", "Z"):
                p |= bit
            if o == "Y":
                y += 1
        flip[t] = f
        phase[t] = p
        ny[t] = y
        coeff[t] = c
    return CompiledPauliSum(n, flip, phase, ny, coeff, op.constant)


_PARITY_LUT = None


def parity_lut():
    """Parity of the low 16 bits, as a uint8 lookup table of length 65536."""
    global _PARITY_LUT
    if _PARITY_LUT is None:
        x = np.arange(1 << 16, dtype=np.uint32)
        x ^= x >> 8
        x ^= x >> 4
        x ^= x >> 2
        x ^= x >> 1
        _PARITY_LUT = (x & 1).astype(np.uint8)
    return _PARITY_LUT


def parity(values):
    """Elementwise bit parity for masked indices below 2**32."""
    lut = parity_lut()
    v = np.asarray(values, dtype=np.uint64)
    return lut[v & np.uint64(0xFFFF)] ^ lut[(v >> np.uint64(16)) & np.uint64(0xFFFF)]


def to_dense(op, max_qubits=16):
    """Dense matrix of a PauliSum, dimension 2**n_qubits.

    Args:
        op: PauliSum.
        max_qubits: safety cap; raise instead of allocating beyond it.
    """
    n = op.n_qubits
    if n > max_qubits:
        raise PauliError(f"dense matrix refused above {max_qubits} qubits")
    comp = op.compiled()
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    x = np.arange(dim, dtype=np.uint64)
    out[x.astype(np.int64), x.astype(np.int64)] += op.constant
    lut_phase = np.array([1.0, -1.0])
    for t in range(comp.n_terms):
        y = x ^ comp.flip_mask[t]
        ph = lut_phase[parity(x & comp.phase_mask[t])] * (1j ** int(comp.ny[t]))
        out[y.astype(np.int64), x.astype(np.int64)] += comp.coeff[t] * ph
    return out


def linear_combine(weighted_ops):
    """Weighted sum of PauliSums sharing one register size.

    Args:
        weighted_ops: iterable of (weight, PauliSum).

    Raises:
        PauliError: on mismatched qubit counts or an empty input.
    """
    weighted_ops = list(weighted_ops)
    if not weighted_ops:
        raise PauliError("linear_combine needs at least one operator")
    n = weighted_ops[0][1].n_qubits
    out = PauliSum(n)
    for w, op in weighted_ops:
        if op.n_qubits != n:
            raise PauliError(
                f"qubit count mismatch: {op.n_qubits} != {n}")
        out.constant += w * op.constant
        for s, c in op.terms.items():
            out.add_term(s, w * c)
    return out.prune()


# Jordan-Wigner ladder operators as lists of (complex coeff, PauliString).


def _ladder(p, dagger):
    """c_p (dagger=False) or c_p^+ (dagger=True) under Jordan-Wigner."""
    z_chain = tuple((q, "Z") for q in range(p))
    sign = -0.5j if dagger else 0.5j
    return [
        (0.5, PauliString(z_chain + ((p, "X"),))),
        (sign, PauliString(z_chain + ((p, "Y"),))),
    ]


def _ladder_product(ops):
    """Expand a product of ladder operators into a string -> coeff map."""
    acc = {PauliString(): 1.0 + 0.0j}
    for op in ops:
        nxt = {}
        for s_acc, c_acc in acc.items():
            for c_op, s_op in op:
                ph, s = multiply(s_acc, s_op)
                c = c_acc * c_op * ph
                nxt[s] = nxt.get(s, 0.0) + c
        acc = {s: c for s, c in nxt.items() if abs(c) > 1e-15}
    return acc


def jordan_wigner_one_body(p, q, coeff, n_qubits):
    """Jordan-Wigner image of coeff * (c_p^+ c_q + c_q^+ c_p), or the number
    operator coeff * c_p^+ c_p when p == q.

    Spin-orbital index equals qubit index (interleaved convention).
    """
    if p == q:
        acc = _ladder_product([_ladder(p, True), _ladder(p, False)])
    else:
        acc = _ladder_product([_ladder(p, True), _ladder(q, False)])
        for s, c in _ladder_product([_ladder(q, True), _ladder(p, False)]).items():
            acc[s] = acc.get(s, 0.0) + c
    out = PauliSum(n_qubits)
    for s, c in acc.items():
        if abs(c.imag) > 1e-12:
            raise PauliError("one-body Jordan-Wigner image not Hermitian")
        if s.factors:
            out.add_term(s, coeff * c.real)
        else:
            out.constant += coeff * c.real
    return out.prune()


# Assembly of a molecular Hamiltonian from an integral set. The expansion
#   H = sum_pq h1[pq] sum_s c+_ps c_qs
#     + 1/2 sum_pqrs (pq|rs) sum_st c+_ps c+_rt c_st c_qs  (chemist labels)
#     + core
# is precomputed once per orbital count as a sparse plan mapping flattened
# integral slots to Pauli-string coefficients, then applied per integral set
# with one gather/scatter pass.

_PLAN_CACHE = {}


@dataclass(frozen=True)
class _AssemblyPlan:
    n_orbitals: int
    n_qubits: int
    strings: tuple
    entry_string: np.ndarray
    entry_slot: np.ndarray
    entry_weight: np.ndarray
    h1_pairs: tuple
    h2_orbits: tuple
    n_slots: int


def _canonical_h2_slot(i, j, k, l):
    """Canonical representative of the 8-fold symmetry orbit of (ij|kl)."""
    a = min((i, j), (j, i))
    b = min((k, l), (l, k))
    return min((a + b), (b + a))


def _assembly_plan(n_orbitals):
    plan = _PLAN_CACHE.get(n_orbitals)
    if plan is not None:
        return plan
    n_qubits = 2 * n_orbitals
    n1 = n_orbitals
    # Flattened slot layout: h1 pairs (canonical p<=q), then unique h2 orbits.
    h1_slot = {}
    for p in range(n1):
        for q in range(p, n1):
            h1_slot[(p, q)] = len(h1_slot)
    h2_slot = {}
    accum = {}

    def add(slot, strings_map, factor):
        for s, c in strings_map.items():
            key = (s, slot)
            accum[key] = accum.get(key, 0.0) + factor * c

    for p in range(n1):
        for q in range(p, n1):
            slot = h1_slot[(p, q)]
            for sp in (0, 1):
                a, b = 2 * p + sp, 2 * q + sp
                if a == b:
                    prod = _ladder_product([_ladder(a, True), _ladder(a, False)])
                    add(slot, prod, 1.0)
                else:
                    prod = _ladder_product([_ladder(a, True), _ladder(b, False)])
                    add(slot, prod, 1.0)
                    prod = _ladder_product([_ladder(b, True), _ladder(a, False)])
                    add(slot, prod, 1.0)

    n_h1 = len(h1_slot)
    for p in range(n1):
        for q in range(n1):
            for r in range(n1):
                for s in range(n1):
                    orbit = _canonical_h2_slot(p, q, r, s)
                    slot = h2_slot.get(orbit)
                    if slot is None:
                        slot = n_h1 + len(h2_slot)
                        h2_slot[orbit] = slot
                    for sp in (0, 1):
                        for tp in (0, 1):
                            a = 2 * p + sp
                            bq = 2 * q + sp
                            cr = 2 * r + tp
                            ds = 2 * s + tp
                            if a == cr or bq == ds:
                                continue
                            prod = _ladder_product([
                                _ladder(a, True), _ladder(cr, True),
                                _ladder(ds, False), _ladder(bq, False),
                            ])
                            add(slot, prod, 0.5)

    # Merge by (string, slot); imaginary parts cancel inside each orbit.
    ordered_strings = tuple(sorted(
        {s for (s, _), _ in accum.items() if s.factors},
        key=lambda s: s.factors))
    string_id = {s: i for i, s in enumerate(ordered_strings)}
    entries = []
    for (s, slot), w in accum.items():
        if abs(w.imag) > 1e-10:
            raise PauliError("assembly plan weight not real after symmetry merge")
        if abs(w.real) < 1e-14:
            continue
        entries.append((string_id[s] if s.factors else -1, slot, w.real))
    entries.sort(key=lambda e: (e[0], e[1]))
    plan = _AssemblyPlan(
        n_orbitals=n_orbitals,
        n_qubits=n_qubits,
        strings=ordered_strings,
        entry_string=np.array([e[0] for e in entries], dtype=np.int64),
        entry_slot=np.array([e[1] for e in entries], dtype=np.int64),
        entry_weight=np.array([e[2] for e in entries], dtype=np.float64),
        h1_pairs=tuple(sorted(h1_slot, key=h1_slot.get)),
        h2_orbits=tuple(sorted(h2_slot, key=h2_slot.get)),
        n_slots=n_h1 + len(h2_slot),
    )
    _PLAN_CACHE[n_orbitals] = plan
    return plan


def _slot_vector(plan, ints):
    """Flatten an integral set onto the assembly plan's slot layout."""
    vec = np.empty(plan.n_slots, dtype=np.float64)
    for i, (p, q) in enumerate(plan.h1_pairs):
        vec[i] = ints.h1[p, q]
    off = len(plan.h1_pairs)
    for i, orbit in enumerate(plan.h2_orbits):
        vec[off + i] = ints.h2[orbit]
    return vec


def assemble_hamiltonian(ints):
    """Second-quantized Hamiltonian of an integral set under Jordan-Wigner.

    Args:
        ints: IntegralSet with chemist-convention two-electron integrals.

    Returns:
        PauliSum on 2 * n_orbitals qubits whose constant includes the core
        energy.
    """
    plan = _assembly_plan(ints.n_orbitals)
    vec = _slot_vector(plan, ints)
    contrib = plan.entry_weight * vec[plan.entry_slot]
    coeffs = np.zeros(len(plan.strings))
    string_rows = plan.entry_string >= 0
    np.add.at(coeffs, plan.entry_string[string_rows], contrib[string_rows])
    constant = ints.core_energy + float(np.sum(contrib[~string_rows]))
    out = PauliSum(plan.n_qubits)
    for s, c in zip(plan.strings, coeffs):
        if abs(c) >= PauliSum.PRUNE_TOL:
            out.terms[s] = float(c)
    out.constant = constant
    out._compiled = None
    return out
