"""Adaptive circuit growth: pool construction, scoring, optimization."""

import numpy as np
import pytest

import helpers
from vqederiv.adapt import (AdaptConfig, AdaptError, GatePool, adapt_build,
                            build_pool, select_next, selection_gradients,
                            vqe_optimize)
from vqederiv.pauli import PauliSum, assemble_hamiltonian
from vqederiv.sim import (Circuit, CircuitEngine, basis_index, circuit_state,
                          expval, prepare_reference)


def sector_ground_energy(hamiltonian, occupations):
    """Lowest eigenvalue in the spin sector of the reference, from the
    dense full-space matrix restricted by explicit occupation filtering."""
    n = hamiltonian.n_qubits
    n_alpha = sum(1 for q in occupations if q % 2 == 0)
    n_beta = sum(1 for q in occupations if q % 2 == 1)
    keep = []
    for x in range(1 << n):
        occ = [q for q in range(n) if x >> (n - 1 - q) & 1]
        if (sum(1 for q in occ if q % 2 == 0) == n_alpha
                and sum(1 for q in occ if q % 2 == 1) == n_beta):
            keep.append(x)
    mat = helpers.pauli_sum_matrix(hamiltonian)[np.ix_(keep, keep)]
    return float(np.linalg.eigvalsh(mat)[0])


class TestGatePool:
    def test_h2_pool_contents(self):
        pool = build_pool(2, 2)
        assert pool.n_qubits == 4
        assert pool.occupations == (0, 1)
        assert pool.n_singles == 2
        assert pool.n_doubles == 1
        kinds = [(g.kind, g.wires) for g in pool]
        assert kinds == [("single", (0, 2)), ("single", (1, 3)),
                         ("double", (0, 1, 2, 3))]

    def test_singles_conserve_spin(self):
        pool = GatePool(8, (0, 1, 2, 3))
        for g in pool.gates[:pool.n_singles]:
            assert g.wires[0] % 2 == g.wires[1] % 2

    def test_doubles_conserve_spin(self):
        pool = GatePool(8, (0, 1, 2, 3))
        for g in pool.gates[pool.n_singles:]:
            i, j, a, b = g.wires
            assert (i % 2 == 0) + (j % 2 == 0) == (a % 2 == 0) + (b % 2 == 0)

    def test_deterministic_order(self):
        a = GatePool(8, (0, 1, 2, 3))
        b = GatePool(8, (0, 1, 2, 3))
        assert a.gates == b.gates

    def test_validation(self):
        with pytest.raises(AdaptError):
            GatePool(4, (0, 4))
        with pytest.raises(AdaptError):
            build_pool(2, 3)
        with pytest.raises(AdaptError):
            build_pool(2, 6)


class TestSelection:
    def test_score_is_appended_gate_derivative(self, h2_grid):
        # the score for gate a must equal dE/dtheta_a of the circuit with
        # that gate appended at angle zero
        rng = np.random.default_rng(0)
        h = h2_grid.hamiltonian(())
        pool = build_pool(2, 2)
        base = Circuit(4, (0, 1),
                       [pool.gates[2].with_theta(0.31),
                        pool.gates[0].with_theta(-0.2)])
        engine = CircuitEngine.for_circuit(base)
        hmat = engine.hamiltonian_matrix(h)
        amps = engine.state(base.thetas)
        scores = selection_gradients(engine, amps, hmat @ amps, pool.gates)
        for k, gate in enumerate(pool.gates):
            step = 1e-5
            up = base.copy()
            up.gates.append(gate.with_theta(step))
            dn = base.copy()
            dn.gates.append(gate.with_theta(-step))
            fd = (expval(circuit_state(up), h)
                  - expval(circuit_state(dn), h)) / (2 * step)
            assert scores[k] == pytest.approx(fd, abs=1e-8)

    def test_full_space_variant_agrees(self, h2_grid):
        h = h2_grid.hamiltonian(())
        pool = build_pool(2, 2)
        state = prepare_reference(4, (0, 1))
        gate, score = select_next(state, pool, h)
        engine = CircuitEngine(4, (0, 1), [])
        hmat = engine.hamiltonian_matrix(h)
        amps = engine.state(np.zeros(0))
        scores = selection_gradients(engine, amps, hmat @ amps, pool.gates)
        assert gate == pool.gates[int(np.argmax(np.abs(scores)))]
        assert score == pytest.approx(np.max(np.abs(scores)), abs=1e-14)

    def test_double_wins_from_hartree_fock(self, h2_grid):
        # canonical orbitals: single-excitation gradients vanish at the
        # reference, so the double must be selected first
        h = h2_grid.hamiltonian(())
        pool = build_pool(2, 2)
        gate, score = select_next(prepare_reference(4, (0, 1)), pool, h)
        assert gate.kind == "double"
        assert score > 0.01

    def test_zero_hamiltonian_ties_to_lowest_index(self):
        pool = build_pool(2, 2)
        gate, score = select_next(prepare_reference(4, (0, 1)), pool,
                                  PauliSum(4))
        assert gate == pool.gates[0]
        assert score == 0.0

    def test_empty_pool_rejected(self, h2_grid):
        pool = GatePool(4, ())
        pool.gates = []
        with pytest.raises(AdaptError):
            select_next(prepare_reference(4, (0, 1)), pool,
                        h2_grid.hamiltonian(()))


class TestVqeOptimize:
    def test_single_double_matches_cosine_form(self, h2_grid):
        # one double gate sweeps a two-state plane, so the energy is
        # alpha + beta cos(theta) + gamma sin(theta) exactly
        h = h2_grid.hamiltonian(())
        mat = helpers.pauli_sum_matrix(h)
        up = basis_index(4, (0, 1))
        dn = basis_index(4, (2, 3))
        alpha = (mat[up, up] + mat[dn, dn]).real / 2
        beta = (mat[up, up] - mat[dn, dn]).real / 2
        gamma = -mat[up, dn].real
        circuit = Circuit(4, (0, 1), [build_pool(2, 2).gates[2]])
        engine = CircuitEngine.for_circuit(circuit)
        hmat = engine.hamiltonian_matrix(h)
        for theta in (0.0, 0.7, 2.4, -1.3):
            want = alpha + beta * np.cos(theta) + gamma * np.sin(theta)
            assert engine.expval(np.array([theta]), hmat) == pytest.approx(
                want, abs=1e-12)
        opt = vqe_optimize(engine, np.zeros(1), hmat)
        assert opt.converged
        assert opt.energy == pytest.approx(
            alpha - np.hypot(beta, gamma), abs=1e-6)

    def test_empty_circuit_returns_reference_energy(self, h2_grid):
        h = h2_grid.hamiltonian(())
        engine = CircuitEngine(4, (0, 1), [])
        hmat = engine.hamiltonian_matrix(h)
        opt = vqe_optimize(engine, np.zeros(0), hmat)
        assert opt.converged
        assert opt.iterations == 0
        want = helpers.slater_condon_diagonal(h2_grid.integrals(()), (0, 1))
        assert opt.energy == pytest.approx(want, abs=1e-10)

    def test_reconverging_changes_nothing(self, h2_grid, h2_head):
        engine = CircuitEngine.for_circuit(h2_head.circuit)
        hmat = engine.hamiltonian_matrix(h2_grid.hamiltonian(()))
        again = vqe_optimize(engine, h2_head.circuit.thetas, hmat)
        assert again.converged
        assert abs(again.energy - h2_head.energy) <= 1e-8

    def test_angle_count_checked(self, h2_grid):
        engine = CircuitEngine(4, (0, 1), [])
        hmat = engine.hamiltonian_matrix(h2_grid.hamiltonian(()))
        with pytest.raises(AdaptError):
            vqe_optimize(engine, np.zeros(2), hmat)

    def test_config_validation(self):
        with pytest.raises(AdaptError):
            AdaptConfig(selection_threshold=-1.0)
        with pytest.raises(AdaptError):
            AdaptConfig(max_gates=-1)
        with pytest.raises(AdaptError):
            AdaptConfig(vqe_learning_rate=0.0)


class TestAdaptBuild:
    def test_h2_reaches_exact_ground_state(self, h2_grid, h2_head):
        h = h2_grid.hamiltonian(())
        assert h2_head.converged
        assert h2_head.stop_reason == "below selection threshold"
        assert len(h2_head.circuit.gates) <= 3
        exact = sector_ground_energy(h, (0, 1))
        assert h2_head.energy - exact >= -1e-10
        assert h2_head.energy - exact <= 1e-6

    def test_energy_history_decreases(self, h2_head):
        energies = np.concatenate(([h2_head.reference_energy],
                                   h2_head.energies))
        assert np.all(np.diff(energies) < 0)

    def test_variational_bound_random_hamiltonians(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            ints = helpers.random_integral_set(rng, 2, scale=0.4,
                                               n_electrons=2)
            h = assemble_hamiltonian(ints)
            result = adapt_build(h, (0, 1))
            exact = sector_ground_energy(h, (0, 1))
            assert result.energy >= exact - 1e-9

    def test_deterministic(self, h2_grid):
        h = h2_grid.hamiltonian(())
        a = adapt_build(h, (0, 1))
        b = adapt_build(h, (0, 1))
        assert [s.pool_index for s in a.steps] == [s.pool_index
                                                  for s in b.steps]
        assert a.circuit.gates == b.circuit.gates
        assert a.energy == b.energy

    def test_zero_budget_returns_reference(self, h2_grid):
        result = adapt_build(h2_grid.hamiltonian(()), (0, 1),
                             AdaptConfig(max_gates=0))
        assert result.circuit.gates == []
        assert result.stop_reason == "gate budget exhausted"
        assert result.energy == result.reference_energy

    def test_zero_hamiltonian_adds_nothing(self):
        result = adapt_build(PauliSum(4), (0, 1))
        assert result.circuit.gates == []
        assert result.converged
        assert result.stop_reason == "below selection threshold"

    def test_reused_engine_matches_fresh(self, h2_grid):
        h = h2_grid.hamiltonian(())
        fresh = adapt_build(h, (0, 1))
        engine = CircuitEngine(4, (0, 1), [])
        engine.hamiltonian_matrix(h)
        reused = adapt_build(h, (0, 1), engine=engine)
        assert reused.energy == pytest.approx(fresh.energy, abs=1e-12)
        assert reused.circuit.gates == fresh.circuit.gates
