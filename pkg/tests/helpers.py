"""Independent oracles shared by the test modules.

Everything here is deliberately built from first principles: dense
Kronecker-product ladder operators, Slater-Condon rules, explicit matrix
exponentials. None of it reuses the package's Pauli algebra or simulator
internals, so agreement between the two paths is evidence, not tautology.

Conventions mirror the package's documented ones: qubit 0 is the leftmost
(most significant) position of a basis label, spatial orbital p maps to
spin-orbitals 2p (up) and 2p+1 (down), and two-electron integrals are
chemist (pq|rs).
"""

import math
from itertools import combinations_with_replacement
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from vqederiv.grid import canonical_label, label_displacement
from vqederiv.integrals import IntegralSet
from vqederiv.pauli import PauliString, PauliSum, linear_combine

TESTDATA = Path(__file__).resolve().parents[1] / "testdata"

ACCEPTANCE_LINES = []


def record_acceptance(line):
    """Collect a one-line verdict for the end-of-run summary."""
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


_ID2 = np.eye(2)
_Z = np.diag([1.0, -1.0])
# annihilation on a single mode: |1> -> |0>
_LOWER = np.array([[0.0, 1.0], [0.0, 0.0]])

_PAULI_1Q = {
    "I": _ID2,
    "X": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]]),
    "Z": _Z,
}


def annihilation_matrix(mode, n_modes):
    """Dense Jordan-Wigner annihilation operator for one fermionic mode.

    Z parity factors sit on the modes before ``mode``; qubit order equals
    kron order so integer basis labels read left to right.
    """
    out = np.ones((1, 1))
    for k in range(n_modes):
        if k < mode:
            factor = _Z
        elif k == mode:
            factor = _LOWER
        else:
            factor = _ID2
        out = np.kron(out, factor)
    return out


def dense_fermionic_hamiltonian(ints):
    """Second-quantized Hamiltonian as an explicit dense matrix.

        H = E_core + sum_pq h1[p,q] sum_s a+_ps a_qs
          + 1/2 sum_pqrs (pq|rs) sum_st a+_ps a+_rt a_st a_qs

    Quartic loop over dense matrices; keep n_orbitals <= 3.
    """
    n = ints.n_orbitals
    n_modes = 2 * n
    dim = 1 << n_modes
    ann = [annihilation_matrix(m, n_modes) for m in range(n_modes)]
    cre = [a.T for a in ann]
    h = ints.core_energy * np.eye(dim)
    for p in range(n):
        for q in range(n):
            if ints.h1[p, q] == 0.0:
                continue
            for s in (0, 1):
                h = h + ints.h1[p, q] * (cre[2 * p + s] @ ann[2 * q + s])
    for p in range(n):
        for q in range(n):
            for r in range(n):
                for s in range(n):
                    v = ints.h2[p, q, r, s]
                    if v == 0.0:
                        continue
                    for sp in (0, 1):
                        for tp in (0, 1):
                            term = (cre[2 * p + sp] @ cre[2 * r + tp]
                                    @ ann[2 * s + tp] @ ann[2 * q + sp])
                            h = h + 0.5 * v * term
    return h


def slater_condon_diagonal(ints, occupations):
    """<n|H|n> for an occupation-number determinant.

    Standard diagonal Slater-Condon rule; ``occupations`` lists occupied
    spin-orbital (= qubit) indices under the interleaved convention.
    """
    occ = sorted(occupations)
    energy = ints.core_energy
    for a in occ:
        energy += ints.h1[a // 2, a // 2]
    for a in occ:
        for b in occ:
            if a == b:
                continue
            pa, pb = a // 2, b // 2
            energy += 0.5 * ints.h2[pa, pa, pb, pb]
            if a % 2 == b % 2:
                energy -= 0.5 * ints.h2[pa, pb, pb, pa]
    return energy


_H2_PERMS = (
    (0, 1, 2, 3), (1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2),
    (2, 3, 0, 1), (2, 3, 1, 0), (3, 2, 0, 1), (3, 2, 1, 0),
)


def random_integral_set(rng, n_orbitals, scale=1.0, n_electrons=None):
    """Random IntegralSet with the full 8-fold h2 symmetry."""
    n = n_orbitals
    h1 = scale * rng.standard_normal((n, n))
    h1 = 0.5 * (h1 + h1.T)
    raw = scale * rng.standard_normal((n, n, n, n))
    h2 = np.zeros_like(raw)
    for perm in _H2_PERMS:
        h2 += np.transpose(raw, perm)
    h2 /= len(_H2_PERMS)
    if n_electrons is None:
        n_electrons = n
    return IntegralSet(n, n_electrons, n_electrons % 2, h1, h2,
                       float(scale * rng.standard_normal())).validate()


def pauli_string_matrix(string, n_qubits):
    """Dense matrix of one Pauli string by direct Kronecker products."""
    ops = dict(string.factors)
    out = np.ones((1, 1), dtype=complex)
    for q in range(n_qubits):
        out = np.kron(out, _PAULI_1Q[ops.get(q, "I")])
    return out


def pauli_sum_matrix(op):
    """Dense matrix of a PauliSum, independent of the package's to_dense."""
    dim = 1 << op.n_qubits
    out = op.constant * np.eye(dim, dtype=complex)
    for string, coeff in op.terms.items():
        out = out + coeff * pauli_string_matrix(string, op.n_qubits)
    return out


def givens_generator(n_qubits, gate):
    """Dense antisymmetric generator K of a gate, so U(theta) = expm(theta/2 K).

    K couples every basis pair (head, partner): head states carry the
    first half of the wires occupied and the second half empty, partner
    states the inverted pattern; K |head> = -|partner>, K |partner> = |head>.
    Built by explicit bit tests, independent of the simulator's pairing.
    """
    half = len(gate.wires) // 2
    occupied = gate.wires[:half]
    empty = gate.wires[half:]
    dim = 1 << n_qubits

    def bit(index, qubit):
        return (index >> (n_qubits - 1 - qubit)) & 1

    k = np.zeros((dim, dim))
    flip = 0
    for q in gate.wires:
        flip |= 1 << (n_qubits - 1 - q)
    for head in range(dim):
        if not all(bit(head, q) == 1 for q in occupied):
            continue
        if not all(bit(head, q) == 0 for q in empty):
            continue
        partner = head ^ flip
        k[head, partner] = 1.0
        k[partner, head] = -1.0
    return k


def gate_matrix(n_qubits, gate):
    """Dense unitary of one excitation gate via the matrix exponential."""
    return expm(0.5 * gate.theta * givens_generator(n_qubits, gate))


def random_pauli_sum(rng, n_qubits, n_terms=8, scale=1.0, constant=True):
    """Random Hermitian PauliSum (real coefficients, random strings)."""
    out = PauliSum(n_qubits)
    if constant:
        out.constant = float(scale * rng.standard_normal())
    for _ in range(n_terms):
        factors = []
        for q in range(n_qubits):
            op = str(rng.choice(["I", "X", "Y", "Z"]))
            if op != "I":
                factors.append((q, op))
        if not factors:
            continue
        out.add_term(PauliString(tuple(factors)),
                     float(scale * rng.standard_normal()))
    return out.prune()


def random_hermitian(rng, dim, scale=1.0):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (a + a.conj().T)


def central_difference(f, x, h):
    """(f(x+h) - f(x-h)) / 2h, scalar or vector valued f."""
    return (np.asarray(f(x + h)) - np.asarray(f(x - h))) / (2.0 * h)


class SyntheticFamily:
    """Polynomial operator family with the Hamiltonian-grid duck interface.

        H(R) = sum over multi-indices alpha, |alpha| <= 3, of
               R^alpha / alpha! * D_alpha

    with every D_alpha a random Hermitian PauliSum. Written in Taylor form
    directly, so hamiltonian_derivative returns D_alpha exactly and the
    cubic truncation of the family is the family itself; that makes it an
    exact fixture for Taylor-truncation and stencil checks. D_() is
    dominated by a spread of single-qubit Z terms so the ground state
    stays non-degenerate over the sampled displacements.

    No ``n_electrons`` attribute on purpose: oracle consumers treat the
    family as sector-free and diagonalize densely.
    """

    def __init__(self, seed, n_qubits=6, n_coords=2, step_bohr=0.05,
                 max_repeat=6, scale=0.15):
        rng = np.random.default_rng(seed)
        self.n_qubits = n_qubits
        self.n_coords = n_coords
        self.step_bohr = float(step_bohr)
        self._energy_cache = {}

        h0 = PauliSum(n_qubits)
        for q, weight in enumerate(np.linspace(1.0, 2.2, n_qubits)):
            h0.add_term(PauliString(((q, "Z"),)), float(weight))
        h0 = linear_combine([(1.0, h0),
                             (1.0, random_pauli_sum(rng, n_qubits, 6, 0.05))])
        self._derivs = {(): h0}
        for order, n_terms in ((1, 6), (2, 4), (3, 3)):
            for multi in combinations_with_replacement(range(n_coords), order):
                self._derivs[multi] = random_pauli_sum(
                    rng, n_qubits, n_terms, scale)

        points = {()}
        for c in range(1, n_coords + 1):
            for reps in range(1, max_repeat + 1):
                points.add(canonical_label([c] * reps))
                points.add(canonical_label([-c] * reps))
        self.points = frozenset(points)

    def hamiltonian(self, label=()):
        disp = label_displacement(canonical_label(label), self.n_coords,
                                  self.step_bohr)
        terms = []
        for multi, op in self._derivs.items():
            weight = 1.0
            for c in multi:
                weight *= disp[c]
            for m in (multi.count(c) for c in set(multi)):
                weight /= math.factorial(m)
            if weight != 0.0:
                terms.append((weight, op))
        return linear_combine(terms)

    def hamiltonian_derivative(self, order, coords):
        """Analytic derivative at the base point; zero above cubic order."""
        coords = tuple(sorted(int(c) for c in coords))
        if len(coords) != order:
            raise ValueError("one coordinate index per derivative order")
        op = self._derivs.get(coords)
        if op is None:
            return PauliSum(self.n_qubits)
        return op.copy()
