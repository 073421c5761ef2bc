"""Derivative-aware circuit augmentation.

A circuit optimized for the energy can have too few parameters to follow
the ground state when the nuclei move, which wrecks derivative quantities
computed from it. The fix implemented here appends a tail of zero-angle
gates to the optimized head. A pool gate joins the tail when its generator
responds to at least one operator in the derivative set

    {H} united with all coefficient derivatives of H through order n - 1

for a target energy-derivative order n. The response score of gate a
against operator D on the head state |psi> is Re <D psi | K_a psi>, the
same quantity the adaptive builder uses for selection, just probed against
derivative operators instead of H alone.

Zero-angle gates leave the state and energy untouched; they only widen the
parameter space the derivative calculations act in.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .adapt import GatePool, selection_gradients
from .sim import Circuit, CircuitEngine


class TailgateError(RuntimeError):
    pass


@dataclass
class DerivativeSet:
    """Hamiltonian plus coefficient derivatives, keyed by multi-index.

    members holds (multi-index, PauliSum) pairs; the empty tuple labels the
    undifferentiated Hamiltonian. order is the highest derivative included.
    """

    order: int
    members: list

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def labels(self):
        return [lab for lab, _ in self.members]

    @property
    def operators(self):
        return [op for _, op in self.members]


def derivative_labels(n_coords, order):
    """Coordinate multi-indices for derivatives through the given order.

    The empty tuple (order 0) comes first; mixed partials appear once with
    indices non-decreasing.
    """
    if order < 0:
        raise TailgateError("derivative order must be non-negative")
    labels = [()]
    for k in range(1, order + 1):
        labels.extend(itertools.combinations_with_replacement(
            range(n_coords), k))
    return labels


def build_derivative_set(grid, target_order):
    """Screening operators for energy derivatives of the target order.

    Includes H(R0) and its coefficient derivatives through order
    target_order - 1.

    Raises:
        TailgateError: for target_order < 1; grid stencil errors propagate
        when a required derivative is unsupported.
    """
    if target_order < 1:
        raise TailgateError("target derivative order must be at least 1")
    members = []
    for label in derivative_labels(grid.n_coords, target_order - 1):
        if not label:
            members.append((label, grid.hamiltonian(())))
        else:
            members.append(
                (label, grid.hamiltonian_derivative(len(label), label)))
    return DerivativeSet(target_order - 1, members)


@dataclass
class SelectionReport:
    """Screening outcome: every pool gate against every derivative operator.

    scores[a, d] = Re <D_d psi | K_a psi> on the head state. A gate is
    selected when any |score| exceeds epsilon; trigger_index records which
    operator achieved the per-gate maximum.
    """

    pool: GatePool
    operator_labels: list
    scores: np.ndarray
    epsilon: float

    @property
    def max_abs_scores(self):
        return np.abs(self.scores).max(axis=1)

    @property
    def trigger_index(self):
        return np.abs(self.scores).argmax(axis=1)

    @property
    def selected_mask(self):
        return self.max_abs_scores > self.epsilon

    @property
    def selected_gates(self):
        """The list L, in pool order."""
        return [self.pool.gates[k] for k in np.nonzero(self.selected_mask)[0]]

    def rows(self):
        """One record per pool gate, for serialization."""
        mask = self.selected_mask
        trig = self.trigger_index
        out = []
        for k, gate in enumerate(self.pool.gates):
            out.append({
                "kind": gate.kind,
                "wires": list(gate.wires),
                "max_gradient": float(self.max_abs_scores[k]),
                "trigger": list(self.operator_labels[trig[k]]),
                "selected": bool(mask[k]),
            })
        return out


def screen_gates(head, pool, derivs, epsilon, engine=None, threads=None):
    """Select the pool gates responsive to any derivative operator.

    Args:
        head: optimized Circuit.
        pool: GatePool; gates already in the head are screened like any
            other and may re-enter as tail copies.
        derivs: DerivativeSet or iterable of (label, PauliSum).
        epsilon: selection threshold on |score|; lowering it can only
            enlarge the selection.
        engine: CircuitEngine override for cache reuse.
        threads: score operator columns in a thread pool of this size;
            results land in fixed column slots, so the report is identical
            either way.

    Returns:
        SelectionReport; its selected_gates property is the list L.
    """
    if epsilon < 0:
        raise TailgateError("epsilon must be non-negative")
    members = list(derivs)
    if engine is None:
        engine = CircuitEngine(head.n_qubits, head.occupations, head.gates)
    else:
        engine.gates = head.gates
    amps = engine.state(head.thetas)
    scores = np.zeros((len(pool), len(members)))

    def column(op):
        op_amps = engine.sector_apply(op)(amps)
        return selection_gradients(engine, amps, op_amps, pool.gates)

    if threads and threads > 1 and len(members) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as ex:
            cols = list(ex.map(column, (op for _, op in members)))
        for col, vals in enumerate(cols):
            scores[:, col] = vals
    else:
        for col, (_, op) in enumerate(members):
            scores[:, col] = column(op)
    return SelectionReport(pool, [lab for lab, _ in members], scores,
                           epsilon)


@dataclass
class TailgatedCircuit:
    """Optimized head plus a zero-angle tail, with the screening record."""

    head: Circuit
    tail: list
    selection_report: SelectionReport = None

    def __post_init__(self):
        if any(g.theta != 0.0 for g in self.tail):
            raise TailgateError("tail gates must sit at angle zero")

    @property
    def circuit(self):
        """Full circuit: head gates at their angles, then the tail."""
        return Circuit(self.head.n_qubits, self.head.occupations,
                       list(self.head.gates) + list(self.tail))

    @property
    def n_head(self):
        return len(self.head.gates)

    @property
    def n_tail(self):
        return len(self.tail)

    @property
    def thetas(self):
        return self.circuit.thetas


def tailgate(head, selection):
    """Attach the selected gates as a zero-angle tail.

    Args:
        head: optimized Circuit, untouched by this call.
        selection: SelectionReport from screen_gates, or a plain iterable
            of gates.

    Returns:
        TailgatedCircuit. At tail angles zero its output state equals the
        head's output state bitwise.
    """
    if isinstance(selection, SelectionReport):
        tail = selection.selected_gates
        report = selection
    else:
        tail = list(selection)
        report = None
    tail = [g.with_theta(0.0) for g in tail]
    return TailgatedCircuit(head.copy(), tail, report)


def tailgate_for_derivatives(head, grid, target_order=2, epsilon=1e-5,
                             pool=None, engine=None, threads=None):
    """Screen and attach in one call; the common pipeline entry point."""
    pool = pool or GatePool(head.n_qubits, head.occupations)
    derivs = build_derivative_set(grid, target_order)
    report = screen_gates(head, pool, derivs, epsilon, engine=engine,
                          threads=threads)
    return tailgate(head, report)


def delta_curve(head, gate, grid, coordinate, engine=None):
    """Response of one gate at the head state: to H and to one coordinate.

    Returns:
        (delta, ddelta) where delta is the gate's gradient against H(R0)
        and ddelta its gradient against dH/dR_coordinate. A head gate that
        the optimizer converged has |delta| below the VQE tolerance while
        |ddelta| can still be large; that gap is what screening detects.
    """
    if engine is None:
        engine = CircuitEngine(head.n_qubits, head.occupations, head.gates)
    else:
        engine.gates = head.gates
    amps = engine.state(head.thetas)
    h_amps = engine.sector_apply(grid.hamiltonian(()))(amps)
    d_op = grid.hamiltonian_derivative(1, (coordinate,))
    d_amps = engine.sector_apply(d_op)(amps)
    delta = selection_gradients(engine, amps, h_amps, [gate])[0]
    ddelta = selection_gradients(engine, amps, d_amps, [gate])[0]
    return float(delta), float(ddelta)
