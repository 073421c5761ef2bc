"""Statevector simulation, excitation gates, circuit derivatives."""

import numpy as np
import pytest

import helpers
from vqederiv.adapt import GatePool
from vqederiv.pauli import PauliString, PauliSum
from vqederiv.sim import (Circuit, CircuitEngine, Gate, SimulationError,
                          apply_gate, apply_paulisum, basis_index,
                          circuit_state, expval, fidelity, gradient,
                          param_hessian, prepare_reference)


def random_state(rng, n_qubits):
    v = rng.standard_normal(1 << n_qubits) * 1j
    v += rng.standard_normal(1 << n_qubits)
    return v / np.linalg.norm(v)


def random_circuit(rng, n_qubits=4, occupations=(0, 1), n_gates=4):
    """Random angles on spin-conserving pool gates, repeats allowed."""
    pool = GatePool(n_qubits, occupations).gates
    picks = rng.integers(0, len(pool), size=n_gates)
    gates = [pool[k].with_theta(float(rng.uniform(-1.5, 1.5))) for k in picks]
    return Circuit(n_qubits, occupations, gates)


class TestGateValidation:
    def test_kinds_and_arity(self):
        with pytest.raises(SimulationError):
            Gate("triple", (0, 1, 2), 0.0)
        with pytest.raises(SimulationError):
            Gate("single", (0, 1, 2), 0.0)
        with pytest.raises(SimulationError):
            Gate("double", (0, 1), 0.0)

    def test_wires_strictly_increasing(self):
        with pytest.raises(SimulationError):
            Gate("single", (1, 1), 0.0)
        with pytest.raises(SimulationError):
            Gate("single", (2, 1), 0.0)
        with pytest.raises(SimulationError):
            Gate("single", (-1, 1), 0.0)

    def test_occupied_and_empty_split(self):
        g = Gate("double", (0, 2, 3, 5), 0.1)
        assert g.occupied_wires == (0, 2)
        assert g.empty_wires == (3, 5)


class TestPrepareReference:
    def test_basis_label_convention(self):
        # qubit 0 is the leftmost bit: |1100> on 4 qubits is index 12
        assert basis_index(4, (0, 1)) == 12
        state = prepare_reference(4, {0, 1})
        assert state[12] == 1.0
        assert np.sum(np.abs(state)) == 1.0

    def test_vacuum(self):
        state = prepare_reference(2, ())
        assert state[0] == 1.0

    def test_out_of_range_rejected(self):
        with pytest.raises(SimulationError):
            prepare_reference(2, (2,))


class TestApplyGate:
    def test_theta_zero_is_identity(self):
        rng = np.random.default_rng(0)
        state = random_state(rng, 4)
        for gate in (Gate("single", (0, 2)), Gate("double", (0, 1, 2, 3))):
            assert np.allclose(apply_gate(state, gate), state, atol=1e-15)

    def test_double_pi_maps_reference_across(self):
        state = prepare_reference(4, (0, 1))
        out = apply_gate(state, Gate("double", (0, 1, 2, 3), np.pi))
        # rotation by pi sends the head configuration to minus the partner
        want = np.zeros(16, dtype=complex)
        want[basis_index(4, (2, 3))] = -1.0
        assert np.allclose(out, want, atol=1e-12)
        assert fidelity(out, prepare_reference(4, (2, 3))) == pytest.approx(1.0)

    def test_single_on_10(self):
        state = prepare_reference(2, (0,))
        theta = 0.83
        out = apply_gate(state, Gate("single", (0, 1), theta))
        assert out[basis_index(2, (0,))] == pytest.approx(np.cos(theta / 2))
        assert out[basis_index(2, (1,))] == pytest.approx(-np.sin(theta / 2))

    def test_matches_matrix_exponential(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = 5
            state = random_state(rng, n)
            if rng.random() < 0.5:
                wires = tuple(sorted(rng.choice(n, size=2, replace=False)))
                gate = Gate("single", wires, float(rng.uniform(-2, 2)))
            else:
                wires = tuple(sorted(rng.choice(n, size=4, replace=False)))
                gate = Gate("double", wires, float(rng.uniform(-2, 2)))
            got = apply_gate(state, gate, n)
            want = helpers.gate_matrix(n, gate) @ state
            assert np.max(np.abs(got - want)) < 1e-12

    def test_inverse(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            state = random_state(rng, 4)
            gate = Gate("double", (0, 1, 2, 3), float(rng.uniform(-2, 2)))
            back = apply_gate(apply_gate(state, gate),
                              gate.with_theta(-gate.theta))
            assert np.max(np.abs(back - state)) < 1e-12

    def test_norm_and_particle_conservation(self):
        rng = np.random.default_rng(3)
        weight_of = np.array([bin(i).count("1") for i in range(16)])
        for _ in range(10):
            circuit = random_circuit(rng)
            state = circuit_state(circuit)
            assert np.linalg.norm(state) == pytest.approx(1.0, abs=1e-12)
            # all amplitude stays on Hamming weight len(occupations)
            mass = np.sum(np.abs(state[weight_of == 2]) ** 2)
            assert mass == pytest.approx(1.0, abs=1e-12)

    def test_wires_outside_register_rejected(self):
        with pytest.raises(SimulationError):
            apply_gate(prepare_reference(2, (0,)), Gate("single", (0, 2)), 2)


class TestExpval:
    def test_z_on_basis_states(self):
        z = PauliSum(1)
        z.add_term(PauliString(((0, "Z"),)), 1.0)
        assert expval(prepare_reference(1, ()), z) == pytest.approx(1.0)
        assert expval(prepare_reference(1, (0,)), z) == pytest.approx(-1.0)

    def test_plus_state(self):
        z = PauliSum(1)
        z.add_term(PauliString(((0, "Z"),)), 1.0)
        plus = np.array([1.0, 1.0]) / np.sqrt(2)
        assert expval(plus, z) == pytest.approx(0.0, abs=1e-15)

    def test_hartree_fock_energy_of_h2(self, h2_grid):
        # reference determinant energy equals the direct h1/h2 contraction
        ints = h2_grid.integrals(())
        state = prepare_reference(4, (0, 1))
        want = helpers.slater_condon_diagonal(ints, (0, 1))
        assert expval(state, h2_grid.hamiltonian(())) == pytest.approx(
            want, abs=1e-10)

    def test_matches_dense_quadratic_form(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            op = helpers.random_pauli_sum(rng, 4)
            state = random_state(rng, 4)
            want = np.real(state.conj() @ helpers.pauli_sum_matrix(op) @ state)
            assert expval(state, op) == pytest.approx(want, abs=1e-12)

    def test_imaginary_residue_rejected(self):
        op = PauliSum(1)
        op.add_term(PauliString(((0, "X"),)), 1.0)
        # corrupt the cached compiled form so X becomes the non-Hermitian iX
        comp = op.compiled()
        comp.ny[0] = 1
        state = np.array([1.0, 0.6])
        state /= np.linalg.norm(state)
        with pytest.raises(SimulationError):
            expval(state, op)

    def test_dimension_mismatch_rejected(self):
        op = PauliSum(2)
        with pytest.raises(SimulationError):
            expval(prepare_reference(3, ()), op)

    def test_invariant_under_zero_angle_gate(self, h2_grid):
        rng = np.random.default_rng(5)
        h = h2_grid.hamiltonian(())
        circuit = random_circuit(rng, 4, (0, 1), 3)
        base = expval(circuit_state(circuit), h)
        extended = circuit.copy()
        extended.gates.append(Gate("double", (0, 1, 2, 3), 0.0))
        assert expval(circuit_state(extended), h) == pytest.approx(
            base, abs=1e-15)


class TestApplyPauliSum:
    def test_matches_dense(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            op = helpers.random_pauli_sum(rng, 4)
            state = random_state(rng, 4)
            got = apply_paulisum(op, state)
            want = helpers.pauli_sum_matrix(op) @ state
            assert np.max(np.abs(got - want)) < 1e-12


class TestGradient:
    def test_constant_observable_zero(self):
        rng = np.random.default_rng(7)
        circuit = random_circuit(rng)
        op = PauliSum(4)
        op.constant = 2.5
        assert np.allclose(gradient(circuit, op), 0.0)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            circuit = random_circuit(rng, n_gates=int(rng.integers(1, 6)))
            op = helpers.random_pauli_sum(rng, 4)
            got = gradient(circuit, op)
            thetas = circuit.thetas

            def energy(t):
                return expval(circuit_state(circuit.with_thetas(t)), op)

            for k in range(len(thetas)):
                step = np.zeros_like(thetas)
                step[k] = 1e-4
                fd = (energy(thetas + step) - energy(thetas - step)) / 2e-4
                assert abs(got[k] - fd) < 1e-7

    def test_stationary_at_symmetric_point(self):
        z = PauliSum(4)
        z.add_term(PauliString(((0, "Z"),)), 1.0)
        circuit = Circuit(4, (0,), [Gate("single", (0, 2), 0.0)])
        assert gradient(circuit, z)[0] == pytest.approx(0.0, abs=1e-15)


class TestParamHessian:
    def test_constant_observable_zero(self):
        rng = np.random.default_rng(9)
        circuit = random_circuit(rng)
        op = PauliSum(4)
        op.constant = -1.0
        assert np.allclose(param_hessian(circuit, op), 0.0)

    def test_single_gate_closed_form(self):
        # one electron rotated between wires 0 and 2 gives <Z_0> = -cos(theta),
        # so the parameter second derivative is cos(theta)
        z = PauliSum(4)
        z.add_term(PauliString(((0, "Z"),)), 1.0)
        for theta in (0.0, 0.4, -1.1):
            circuit = Circuit(4, (0,), [Gate("single", (0, 2), theta)])
            got = param_hessian(circuit, z)[0, 0]
            # the 1e-3 differencing step leaves truncation error h^2/6
            assert got == pytest.approx(np.cos(theta), abs=1e-6)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            circuit = random_circuit(rng, n_gates=3)
            op = helpers.random_pauli_sum(rng, 4)
            got = param_hessian(circuit, op)
            assert np.max(np.abs(got - got.T)) < 1e-9
            thetas = circuit.thetas

            def energy(t):
                return expval(circuit_state(circuit.with_thetas(t)), op)

            for a in range(3):
                for b in range(3):
                    ea = np.zeros(3)
                    eb = np.zeros(3)
                    ea[a] = 1e-3
                    eb[b] = 1e-3
                    fd = (energy(thetas + ea + eb) - energy(thetas + ea - eb)
                          - energy(thetas - ea + eb)
                          + energy(thetas - ea - eb)) / 4e-6
                    assert abs(got[a, b] - fd) < 1e-5


class TestFidelity:
    def test_self_is_one(self):
        rng = np.random.default_rng(11)
        v = random_state(rng, 3)
        assert fidelity(v, v) == pytest.approx(1.0)

    def test_orthogonal_is_zero(self):
        assert fidelity(prepare_reference(2, (0,)),
                        prepare_reference(2, (1,))) == 0.0

    def test_phase_invariant(self):
        rng = np.random.default_rng(12)
        v = random_state(rng, 3)
        assert fidelity(v, np.exp(0.7j) * v) == pytest.approx(1.0)

    def test_null_state_rejected(self):
        with pytest.raises(SimulationError):
            fidelity(np.zeros(4), prepare_reference(2, ()))


class TestCircuitEngine:
    """The sector-restricted fast path must agree with the full-space one."""

    def test_state_matches_full_space(self, h2_grid):
        rng = np.random.default_rng(13)
        for _ in range(5):
            circuit = random_circuit(rng, 4, (0, 1), 3)
            engine = CircuitEngine.for_circuit(circuit)
            full = circuit_state(circuit)
            embedded = engine.full_state(circuit.thetas)
            assert np.max(np.abs(full - embedded)) < 1e-12

    def test_expval_and_gradient_match(self, h2_grid):
        rng = np.random.default_rng(14)
        h = h2_grid.hamiltonian(())
        for _ in range(5):
            circuit = random_circuit(rng, 4, (0, 1), 3)
            engine = CircuitEngine.for_circuit(circuit)
            hmat = engine.hamiltonian_matrix(h)
            assert engine.expval(circuit.thetas, hmat) == pytest.approx(
                expval(circuit_state(circuit), h), abs=1e-12)
            assert np.allclose(engine.gradient(circuit.thetas, hmat),
                               gradient(circuit, h), atol=1e-12)

    def test_angle_count_checked(self):
        circuit = Circuit(4, (0, 1), [Gate("single", (0, 2), 0.1)])
        with pytest.raises(SimulationError):
            circuit.with_thetas(np.zeros(3))
