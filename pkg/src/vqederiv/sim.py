"""Statevector simulation of particle-conserving excitation circuits.

Gates are Givens rotations between two occupation configurations:

* ``single`` on wires (a, b) rotates the pair |1_a 0_b> / |0_a 1_b>,
  sending |1_a 0_b> to cos(t/2)|1_a 0_b> - sin(t/2)|0_a 1_b>.
* ``double`` on wires (a, b, c, d) rotates |1_a 1_b 0_c 0_d> against
  |0_a 0_b 1_c 1_d> with the same sign convention.

All other amplitudes are untouched, regardless of the occupation of
intermediate wires. Qubit 0 is the leftmost (most significant) bit of a
basis label.

Public functions operate on full 2**n statevectors. The CircuitEngine runs
the same circuits inside the fixed particle/spin sector the reference state
occupies, which keeps optimization loops fast on 14-qubit problems; both
paths implement identical gate conventions and are cross-checked in tests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .pauli import PauliSum, parity

EXPVAL_IMAG_TOL = 1e-10


class SimulationError(ValueError):
    """Raised for malformed gates, states or register mismatches."""


@dataclass(frozen=True)
class Gate:
    """One excitation gate: kind, strictly increasing wires, angle."""

    kind: str
    wires: tuple
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if self.kind not in ("single", "double"):
            raise SimulationError(f"unknown gate kind {self.kind!r}")
        need = 2 if self.kind == "single" else 4
        if len(self.wires) != need:
            raise SimulationError(
                f"{self.kind} gate needs {need} wires, got {len(self.wires)}")
        if any(b <= a for a, b in zip(self.wires, self.wires[1:])):
            raise SimulationError("gate wires must be strictly increasing")
        if min(self.wires) < 0:
            raise SimulationError("gate wires must be non-negative")

    def with_theta(self, theta):
        return replace(self, theta=float(theta))

    @property
    def occupied_wires(self):
        """Wires occupied in the configuration the rotation starts from."""
        return self.wires[: len(self.wires) // 2]

    @property
    def empty_wires(self):
        return self.wires[len(self.wires) // 2:]


@dataclass
class Circuit:
    """Reference occupations followed by an ordered gate sequence."""

    n_qubits: int
    occupations: tuple
    gates: list = field(default_factory=list)

    def __post_init__(self):
        self.occupations = tuple(sorted(int(q) for q in self.occupations))
        if len(set(self.occupations)) != len(self.occupations):
            raise SimulationError("duplicate occupation index")
        if self.occupations and (min(self.occupations) < 0
                                 or max(self.occupations) >= self.n_qubits):
            raise SimulationError("occupation index outside register")
        for g in self.gates:
            if max(g.wires) >= self.n_qubits:
                raise SimulationError("gate wires outside register")

    @property
    def thetas(self):
        return np.array([g.theta for g in self.gates])

    def with_thetas(self, thetas):
        thetas = np.asarray(thetas, dtype=float)
        if thetas.shape != (len(self.gates),):
            raise SimulationError("one angle per gate required")
        return Circuit(self.n_qubits, self.occupations,
                       [g.with_theta(t) for g, t in zip(self.gates, thetas)])

    def copy(self):
        return Circuit(self.n_qubits, self.occupations, list(self.gates))


def _bit(n_qubits, qubit):
    return 1 << (n_qubits - 1 - qubit)


def basis_index(n_qubits, occupations):
    idx = 0
    for q in occupations:
        idx |= _bit(n_qubits, q)
    return idx


def prepare_reference(n_qubits, occupations):
    """Computational basis state with the given qubits set to 1."""
    if n_qubits < 1:
        raise SimulationError("n_qubits must be positive")
    occupations = tuple(sorted(occupations))
    if occupations and (min(occupations) < 0 or max(occupations) >= n_qubits):
        raise SimulationError("occupation index outside register")
    state = np.zeros(1 << n_qubits, dtype=complex)
    state[basis_index(n_qubits, occupations)] = 1.0
    return state


_PAIR_CACHE = {}


def _gate_pairs(n_qubits, gate):
    """Full-space index arrays (head, partner) the rotation couples.

    head states have the first half of the wires occupied and the second
    half empty; partner states are the same with the pattern inverted.
    """
    key = (n_qubits, gate.kind, gate.wires)
    hit = _PAIR_CACHE.get(key)
    if hit is not None:
        return hit
    ones = sum(_bit(n_qubits, q) for q in gate.occupied_wires)
    zeros = sum(_bit(n_qubits, q) for q in gate.empty_wires)
    x = np.arange(1 << n_qubits, dtype=np.int64)
    head = x[((x & ones) == ones) & ((x & zeros) == 0)]
    partner = head ^ (ones | zeros)
    _PAIR_CACHE[key] = (head, partner)
    return head, partner


def _rotate(state, head, partner, theta, derivative=False):
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    ah = state[head]
    ap = state[partner]
    if derivative:
        out = np.zeros_like(state)
        out[head] = 0.5 * (-s * ah + c * ap)
        out[partner] = 0.5 * (-c * ah - s * ap)
        return out
    out = state.copy()
    out[head] = c * ah + s * ap
    out[partner] = c * ap - s * ah
    return out


def apply_gate(state, gate, n_qubits=None):
    """Apply one gate to a full statevector."""
    if n_qubits is None:
        n_qubits = _infer_qubits(state)
    if max(gate.wires) >= n_qubits:
        raise SimulationError("gate wires outside register")
    head, partner = _gate_pairs(n_qubits, gate)
    return _rotate(state, head, partner, gate.theta)


def _infer_qubits(state):
    n = int(np.log2(len(state)) + 0.5)
    if (1 << n) != len(state):
        raise SimulationError("state length is not a power of two")
    return n


def circuit_state(circuit):
    """Full statevector prepared by a circuit."""
    state = prepare_reference(circuit.n_qubits, circuit.occupations)
    for g in circuit.gates:
        head, partner = _gate_pairs(circuit.n_qubits, g)
        state = _rotate(state, head, partner, g.theta)
    return state


def apply_paulisum(op, state):
    """Apply a PauliSum to a full statevector.

    Real input stays real when every term has an even Y count, matching
    the sector-space behavior.
    """
    comp = op.compiled()
    n = comp.n_qubits
    state = np.asarray(state)
    if len(state) != (1 << n):
        raise SimulationError("state length does not match operator register")
    x = np.arange(1 << n, dtype=np.uint64)
    real = comp.all_even_y()
    dtype = np.promote_types(state.dtype, np.float64 if real else np.complex128)
    out = np.asarray(comp.constant * state, dtype=dtype)
    sign = np.array([1.0, -1.0])
    for t in range(comp.n_terms):
        iny = 1j ** int(comp.ny[t])
        ph = sign[parity(x & comp.phase_mask[t])] * (iny.real if real else iny)
        idx = (x ^ comp.flip_mask[t]).astype(np.int64)
        out[idx] += comp.coeff[t] * ph * state
    return out


def expval(state, op):
    """Real expectation value <state|op|state>.

    Raises:
        SimulationError: if the imaginary residue exceeds 1e-10 relative
        to the operator scale, which indicates a non-Hermitian operator or
        inconsistent state.
    """
    val = complex(np.vdot(state, apply_paulisum(op, state)))
    scale = max(1.0, abs(val))
    if abs(val.imag) > EXPVAL_IMAG_TOL * scale:
        raise SimulationError(
            f"expectation value has imaginary residue {val.imag:.3e}")
    return val.real


def fidelity(a, b):
    """Squared overlap |<a|b>|^2 of two normalized states."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        raise SimulationError("fidelity of a null state")
    return float(abs(np.vdot(a, b)) ** 2 / (na * nb) ** 2)


def gradient(circuit, observable):
    """Analytic gradient of <psi(theta)|observable|psi(theta)> per gate angle.

    Adjoint-mode sweep: one forward pass storing intermediate states, one
    observable application, one backward pass.
    """
    engine = CircuitEngine.for_circuit(circuit)
    return engine.gradient(circuit.thetas, engine.sector_apply(observable))


def param_hessian(circuit, observable, step=1e-3):
    """Parameter-space Hessian by central differences of the analytic
    gradient, symmetrized."""
    engine = CircuitEngine.for_circuit(circuit)
    return engine.param_hessian(circuit.thetas,
                                engine.sector_apply(observable), step=step)


class SectorSpace:
    """Basis of a fixed (spin-up count, spin-down count) occupation sector.

    Spin-up orbitals sit on even qubits, spin-down on odd qubits, matching
    the interleaved Jordan-Wigner layout.
    """

    def __init__(self, n_qubits, n_alpha, n_beta):
        self.n_qubits = n_qubits
        self.n_alpha = n_alpha
        self.n_beta = n_beta
        even = [q for q in range(n_qubits) if q % 2 == 0]
        odd = [q for q in range(n_qubits) if q % 2 == 1]
        if n_alpha > len(even) or n_beta > len(odd):
            raise SimulationError("sector occupation exceeds register")
        states = []
        for occ_a in itertools.combinations(even, n_alpha):
            bits_a = basis_index(n_qubits, occ_a)
            for occ_b in itertools.combinations(odd, n_beta):
                states.append(bits_a | basis_index(n_qubits, occ_b))
        self.states = np.array(sorted(states), dtype=np.uint64)

    @classmethod
    def from_occupations(cls, n_qubits, occupations):
        n_alpha = sum(1 for q in occupations if q % 2 == 0)
        n_beta = sum(1 for q in occupations if q % 2 == 1)
        return cls(n_qubits, n_alpha, n_beta)

    @property
    def dim(self):
        return len(self.states)

    def position(self, full_index):
        pos = int(np.searchsorted(self.states, full_index))
        if pos >= self.dim or self.states[pos] != full_index:
            raise SimulationError("basis state outside sector")
        return pos

    def scatter(self, amps):
        """Embed sector amplitudes into a full statevector."""
        full = np.zeros(1 << self.n_qubits, dtype=complex)
        full[self.states.astype(np.int64)] = amps
        return full

    def project(self, full_state, check=True, tol=1e-10):
        amps = np.asarray(full_state)[self.states.astype(np.int64)]
        if check:
            outside = np.linalg.norm(full_state) ** 2 - np.linalg.norm(amps) ** 2
            if outside > tol:
                raise SimulationError(
                    f"state has weight {outside:.3e} outside the sector")
        return amps.copy()

    def term_actions(self, comp):
        """Per-term (source alive mask, target positions, phase) arrays.

        Coefficient arrays come out real float64 when every term has an
        even Y count, complex otherwise.
        """
        x = self.states
        real = comp.all_even_y()
        actions = []
        sign = np.array([1.0, -1.0])
        for t in range(comp.n_terms):
            y = x ^ comp.flip_mask[t]
            pos = np.searchsorted(x, y)
            pos_c = np.minimum(pos, self.dim - 1)
            valid = x[pos_c] == y
            iny = 1j ** int(comp.ny[t])
            ph = sign[parity(x & comp.phase_mask[t])] * (iny.real if real else iny)
            actions.append((valid, pos_c, comp.coeff[t] * ph))
        return actions

    def matrix(self, op):
        """Dense sector matrix of a PauliSum.

        Real float64 when every term has an even Y count (the molecular
        case), complex otherwise.
        """
        comp = op.compiled()
        if comp.n_qubits != self.n_qubits:
            raise SimulationError("operator register does not match sector")
        real = comp.all_even_y()
        out = np.zeros((self.dim, self.dim),
                       dtype=np.float64 if real else complex)
        for valid, pos, coeffs in self.term_actions(comp):
            src = np.nonzero(valid)[0]
            out[pos[src], src] += coeffs[src]
        out[np.diag_indices(self.dim)] += op.constant
        return out


class CircuitEngine:
    """Sector-restricted workspace for one circuit structure.

    Holds the sector basis, per-gate coupling positions, and an optional
    cached Hamiltonian matrix. Gate order and conventions match the
    full-space functions exactly.
    """

    def __init__(self, n_qubits, occupations, gates):
        self.n_qubits = n_qubits
        self.occupations = tuple(sorted(occupations))
        self.sector = SectorSpace.from_occupations(n_qubits, self.occupations)
        self.gates = list(gates)
        self._pair_cache = {}
        # excitation rotations are real orthogonal and the reference is a
        # basis state, so engine amplitudes stay real float64 throughout
        self._ref = np.zeros(self.sector.dim)
        self._ref[self.sector.position(
            basis_index(n_qubits, self.occupations))] = 1.0
        self._matrix_cache = {}

    @classmethod
    def for_circuit(cls, circuit):
        return cls(circuit.n_qubits, circuit.occupations, circuit.gates)

    def pairs(self, gate):
        key = (gate.kind, gate.wires)
        hit = self._pair_cache.get(key)
        if hit is None:
            head, partner = _gate_pairs(self.n_qubits, gate)
            head = head.astype(np.uint64)
            partner = partner.astype(np.uint64)
            in_sector = np.isin(head, self.sector.states)
            head = head[in_sector]
            partner = partner[in_sector]
            hpos = np.searchsorted(self.sector.states, head)
            ppos = np.searchsorted(self.sector.states, partner)
            if np.any(self.sector.states[ppos] != partner):
                raise SimulationError("gate does not preserve the sector")
            hit = (hpos, ppos)
            self._pair_cache[key] = hit
        return hit

    def hamiltonian_matrix(self, op):
        # keep a reference to op so its id cannot be recycled
        key = id(op)
        if key not in self._matrix_cache:
            self._matrix_cache[key] = (op, self.sector.matrix(op))
        return self._matrix_cache[key][1]

    def sector_apply(self, op):
        """Callable amps -> op @ amps without materializing the matrix."""
        comp = op.compiled()
        if comp.n_qubits != self.n_qubits:
            raise SimulationError("operator register does not match engine")
        actions = self.sector.term_actions(comp)
        const = op.constant
        real = comp.all_even_y()

        def apply(amps):
            # x -> x ^ flip is injective, so direct fancy scatter is safe.
            dtype = amps.dtype if real else np.promote_types(amps.dtype, complex)
            out = np.asarray(const * amps, dtype=dtype)
            for valid, pos, coeffs in actions:
                src = np.nonzero(valid)[0]
                out[pos[src]] += coeffs[src] * amps[src]
            return out

        return apply

    def state(self, thetas):
        """Sector amplitudes after the full gate sequence."""
        amps = self._ref.copy()
        for g, t in zip(self.gates, thetas):
            hpos, ppos = self.pairs(g)
            amps = _rotate_positions(amps, hpos, ppos, t)
        return amps

    def full_state(self, thetas):
        return self.sector.scatter(self.state(thetas))

    def expval(self, thetas, obs):
        amps = self.state(thetas)
        return self.expval_state(amps, obs)

    def expval_state(self, amps, obs):
        if callable(obs):
            val = complex(np.vdot(amps, obs(amps)))
        else:
            val = complex(np.vdot(amps, obs @ amps))
        scale = max(1.0, abs(val))
        if abs(val.imag) > EXPVAL_IMAG_TOL * scale:
            raise SimulationError(
                f"expectation value has imaginary residue {val.imag:.3e}")
        return val.real

    def _forward_states(self, thetas):
        states = [self._ref]
        amps = self._ref
        for g, t in zip(self.gates, thetas):
            hpos, ppos = self.pairs(g)
            amps = _rotate_positions(amps, hpos, ppos, t)
            states.append(amps)
        return states

    def gradient(self, thetas, obs):
        """Analytic gradient of <obs> over gate angles (adjoint sweep)."""
        thetas = np.asarray(thetas, dtype=float)
        states = self._forward_states(thetas)
        lam = obs(states[-1]) if callable(obs) else obs @ states[-1]
        grad = np.zeros(len(self.gates))
        for k in range(len(self.gates) - 1, -1, -1):
            hpos, ppos = self.pairs(self.gates[k])
            dstate = _rotate_positions(states[k], hpos, ppos, thetas[k],
                                       derivative=True)
            grad[k] = 2.0 * np.real(
                np.vdot(lam[hpos], dstate[hpos])
                + np.vdot(lam[ppos], dstate[ppos]))
            lam = _rotate_positions(lam, hpos, ppos, -thetas[k])
        return grad

    def param_hessian(self, thetas, obs, step=1e-3):
        """Central finite differences of the analytic gradient, symmetrized."""
        thetas = np.asarray(thetas, dtype=float)
        m = len(self.gates)
        out = np.zeros((m, m))
        for k in range(m):
            tp = thetas.copy()
            tp[k] += step
            tm = thetas.copy()
            tm[k] -= step
            out[k] = (self.gradient(tp, obs) - self.gradient(tm, obs)) / (2 * step)
        return 0.5 * (out + out.T)


def _rotate_positions(amps, hpos, ppos, theta, derivative=False):
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    ah = amps[hpos]
    ap = amps[ppos]
    if derivative:
        out = np.zeros_like(amps)
        out[hpos] = 0.5 * (-s * ah + c * ap)
        out[ppos] = 0.5 * (-c * ah - s * ap)
        return out
    out = amps.copy()
    out[hpos] = c * ah + s * ap
    out[ppos] = c * ap - s * ah
    return out
