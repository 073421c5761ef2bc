"""Adaptive circuit construction by gradient-ranked gate selection.

Starting from a reference determinant, the builder repeatedly scores every
pool gate by the magnitude of the energy derivative it would have if
appended at angle zero, appends the best one, and re-optimizes all angles
by gradient descent. Growth stops when no candidate scores above the
selection threshold or the gate budget is exhausted.

The candidate score for gate a with generator K_a on state |psi> is
Re <H psi | K_a psi>, evaluated for the whole pool from a single
Hamiltonian application.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .sim import (Circuit, CircuitEngine, Gate, SimulationError,
                  _gate_pairs, apply_paulisum)


class AdaptError(RuntimeError):
    """Raised when circuit growth or angle optimization cannot proceed."""


@dataclass(frozen=True)
class AdaptConfig:
    """Knobs for pool selection and the inner variational optimizer."""

    selection_threshold: float = 1e-5
    max_gates: int = 60
    vqe_learning_rate: float = 0.05
    vqe_grad_tol: float = 1e-5
    vqe_max_iters: int = 50000

    def __post_init__(self):
        if self.selection_threshold < 0:
            raise AdaptError("selection_threshold must be non-negative")
        if self.max_gates < 0:
            raise AdaptError("max_gates must be non-negative")
        if self.vqe_learning_rate <= 0:
            raise AdaptError("vqe_learning_rate must be positive")


class GatePool:
    """Spin-conserving excitation gates out of a reference determinant.

    Singles move one electron between same-spin orbitals. Doubles move two;
    the number of spin-up electrons removed must match the number added,
    which keeps every gate inside the reference occupation sector. Order is
    deterministic: singles in lexicographic wire order, then doubles.
    """

    def __init__(self, n_qubits, occupations):
        occupations = tuple(sorted(occupations))
        if occupations and (max(occupations) >= n_qubits
                            or min(occupations) < 0):
            raise AdaptError("occupation index outside register")
        self.n_qubits = n_qubits
        self.occupations = occupations
        virtuals = tuple(q for q in range(n_qubits) if q not in occupations)
        singles = []
        for i in occupations:
            for a in virtuals:
                if i % 2 == a % 2:
                    singles.append(Gate("single", (i, a)))
        doubles = []
        for i, j in itertools.combinations(occupations, 2):
            for a, b in itertools.combinations(virtuals, 2):
                up_removed = (i % 2 == 0) + (j % 2 == 0)
                up_added = (a % 2 == 0) + (b % 2 == 0)
                if up_removed == up_added:
                    doubles.append(Gate("double", (i, j, a, b)))
        self.n_singles = len(singles)
        self.n_doubles = len(doubles)
        self.gates = singles + doubles

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)


def build_pool(n_orbitals, n_electrons):
    """Pool for a closed-shell reference filling the lowest orbitals.

    Args:
        n_orbitals: spatial orbital count; the register has twice as many
            qubits.
        n_electrons: even electron count.
    """
    if n_electrons % 2 != 0 or n_electrons < 0:
        raise AdaptError("electron count must be even and non-negative; "
                         "pass explicit occupations for open shells")
    if n_electrons > 2 * n_orbitals:
        raise AdaptError("more electrons than spin orbitals")
    return GatePool(2 * n_orbitals, tuple(range(n_electrons)))


def selection_gradients(engine, amps, op_amps, pool_gates):
    """Score each candidate gate against an applied operator.

    Args:
        engine: CircuitEngine whose sector the candidates act in.
        amps: current sector state |psi>.
        op_amps: D|psi> for the operator being probed.
        pool_gates: iterable of Gate.

    Returns:
        Array of Re <D psi | K_a psi>, one entry per candidate.
    """
    out = np.zeros(len(pool_gates))
    for k, gate in enumerate(pool_gates):
        hpos, ppos = engine.pairs(gate)
        # K|head> = -|partner>, K|partner> = +|head>
        out[k] = np.real(np.vdot(op_amps[hpos], amps[ppos])
                         - np.vdot(op_amps[ppos], amps[hpos]))
    return out


def select_next(state, pool, hamiltonian):
    """Best pool gate to append to a prepared state, and its score.

    Full-statevector variant of the scoring used inside adapt_build, kept
    independent so the two can cross-check each other.

    Args:
        state: normalized full statevector.
        pool: GatePool.
        hamiltonian: PauliSum.

    Returns:
        (gate, |gradient|) with ties resolved to the lowest pool index.
    """
    if len(pool) == 0:
        raise AdaptError("empty gate pool")
    n = hamiltonian.n_qubits
    if len(state) != (1 << n):
        raise SimulationError("state length does not match operator register")
    h_state = apply_paulisum(hamiltonian, state)
    scores = np.zeros(len(pool))
    for k, gate in enumerate(pool.gates):
        head, partner = _gate_pairs(n, gate)
        scores[k] = np.real(np.vdot(h_state[head], state[partner])
                            - np.vdot(h_state[partner], state[head]))
    best = int(np.argmax(np.abs(scores)))
    return pool.gates[best], float(abs(scores[best]))


@dataclass
class VqeResult:
    thetas: np.ndarray
    energy: float
    grad_inf: float
    iterations: int
    converged: bool


def vqe_optimize(engine, thetas, hmat, config=None):
    """Minimize <H> over gate angles by backtracking gradient descent.

    The step size halves until an Armijo decrease is met and grows by a
    small factor after every accepted step. Convergence means the gradient
    infinity norm fell below config.vqe_grad_tol.
    """
    config = config or AdaptConfig()
    thetas = np.asarray(thetas, dtype=float).copy()
    if len(thetas) != len(engine.gates):
        raise AdaptError("one angle per engine gate required")
    if len(thetas) == 0:
        return VqeResult(thetas, engine.expval(thetas, hmat), 0.0, 0, True)
    lr = config.vqe_learning_rate
    lr_max = 100.0 * config.vqe_learning_rate
    energy = engine.expval(thetas, hmat)
    iterations = 0
    while iterations < config.vqe_max_iters:
        grad = engine.gradient(thetas, hmat)
        grad_inf = float(np.abs(grad).max())
        if grad_inf < config.vqe_grad_tol:
            return VqeResult(thetas, energy, grad_inf, iterations, True)
        gnorm2 = float(grad @ grad)
        while True:
            trial = thetas - lr * grad
            trial_energy = engine.expval(trial, hmat)
            if trial_energy <= energy - 1e-4 * lr * gnorm2:
                break
            lr *= 0.5
            if lr < 1e-14:
                # at the numerical floor; report where we stopped
                return VqeResult(thetas, energy, grad_inf, iterations, False)
        thetas = trial
        energy = trial_energy
        lr = min(lr * 1.25, lr_max)
        iterations += 1
    grad_inf = float(np.abs(engine.gradient(thetas, hmat)).max())
    return VqeResult(thetas, energy, grad_inf, iterations,
                     grad_inf < config.vqe_grad_tol)


@dataclass
class AdaptStep:
    """One growth cycle: which gate won and what the optimizer reached."""

    pool_index: int
    gate: Gate
    selection_gradient: float
    energy: float
    vqe_iterations: int


@dataclass
class AdaptResult:
    circuit: Circuit
    energy: float
    reference_energy: float
    steps: list = field(default_factory=list)
    stop_reason: str = ""
    converged: bool = False

    @property
    def energies(self):
        return np.array([s.energy for s in self.steps])


def adapt_build(hamiltonian, occupations, config=None, pool=None,
                engine=None):
    """Grow a circuit for the ground state of a Hamiltonian.

    Args:
        hamiltonian: PauliSum on the full register.
        occupations: reference determinant (occupied qubit indices).
        config: AdaptConfig; defaults apply when omitted.
        pool: GatePool override; the default pool is built from the
            reference.
        engine: CircuitEngine override sharing the Hamiltonian sector,
            mainly to reuse a cached sector matrix across calls.

    Returns:
        AdaptResult with the optimized circuit and per-cycle history.
        Ties in the selection score resolve to the lowest pool index.
    """
    config = config or AdaptConfig()
    n_qubits = hamiltonian.n_qubits
    occupations = tuple(sorted(occupations))
    pool = pool or GatePool(n_qubits, occupations)
    circuit = Circuit(n_qubits, occupations, [])
    if engine is None:
        engine = CircuitEngine(n_qubits, occupations, circuit.gates)
    else:
        engine.gates = circuit.gates
    hmat = engine.hamiltonian_matrix(hamiltonian)
    thetas = np.zeros(0)
    energy = engine.expval(thetas, hmat)
    result = AdaptResult(circuit, energy, reference_energy=energy)
    while len(circuit.gates) < config.max_gates:
        if len(pool) == 0:
            result.stop_reason = "empty pool"
            result.converged = True
            break
        amps = engine.state(thetas)
        scores = selection_gradients(engine, amps, hmat @ amps, pool.gates)
        best = int(np.argmax(np.abs(scores)))
        if abs(scores[best]) < config.selection_threshold:
            result.stop_reason = "below selection threshold"
            result.converged = True
            break
        circuit.gates.append(pool.gates[best])
        engine.gates = circuit.gates
        thetas = np.append(thetas, 0.0)
        opt = vqe_optimize(engine, thetas, hmat, config)
        thetas = opt.thetas
        energy = opt.energy
        result.steps.append(AdaptStep(best, pool.gates[best],
                                      float(scores[best]), energy,
                                      opt.iterations))
        if not opt.converged:
            # partial result with the flag; callers decide how to react
            result.stop_reason = (
                f"angle optimization stalled at gate {len(circuit.gates)} "
                f"with gradient {opt.grad_inf:.3e}")
            result.circuit = circuit.with_thetas(thetas)
            result.energy = energy
            return result
    else:
        result.stop_reason = "gate budget exhausted"
    result.circuit = circuit.with_thetas(thetas)
    result.energy = energy
    return result
