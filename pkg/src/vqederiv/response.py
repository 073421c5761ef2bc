"""Analytic energy derivatives of the variational surface.

First derivatives follow from the eigenstate stationarity of the optimized
angles: dE/dR_i = <psi|dH/dR_i|psi>. Second derivatives need the angle
response dtheta*/dR, obtained from the linear system

    A x_i = -g_i,    A_ab = d2<H>/dtheta_a dtheta_b,
                     (g_i)_a = d<dH/dR_i>/dtheta_a,

after which the coordinate Hessian assembles as

    H_ij = sum_a x_a^i (g_j)_a + <d2H/dR_i dR_j>.

Head and tail angles enter the parameter vector uniformly; zero-angle tail
gates contribute through g_i even though they leave the state itself
untouched. The parameter Hessian of a tailgated circuit is often singular,
so the response solve is minimum-norm least squares with singular values
below max(s) * 1e-10 truncated, and per-coordinate residual norms are
reported.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .sim import CircuitEngine
from .tailgate import TailgatedCircuit

RCOND = 1e-10


class ResponseError(RuntimeError):
    pass


def _as_circuit(circuit):
    if isinstance(circuit, TailgatedCircuit):
        return circuit.circuit
    return circuit


def _engine_for(circuit, engine):
    if engine is None:
        return CircuitEngine(circuit.n_qubits, circuit.occupations,
                             circuit.gates)
    engine.gates = circuit.gates
    return engine


def _check_converged(engine, thetas, hmat, grad_tol):
    grad = engine.gradient(thetas, hmat)
    worst = float(np.abs(grad).max()) if len(grad) else 0.0
    if worst > grad_tol:
        warnings.warn(
            f"circuit angle gradient {worst:.3e} exceeds {grad_tol:.1e}; "
            "derivative formulas assume a variational optimum",
            stacklevel=3)
    return worst


def energy_gradient(circuit, grid, engine=None, grad_tol=1e-5):
    """First energy derivatives at the optimized angles.

    Component i is <psi|dH/dR_i|psi>; the angle-response term vanishes at
    a variational optimum. A warning (not an error) flags circuits whose
    own angle gradient exceeds grad_tol.
    """
    circuit = _as_circuit(circuit)
    engine = _engine_for(circuit, engine)
    thetas = circuit.thetas
    hmat = engine.hamiltonian_matrix(grid.hamiltonian(()))
    _check_converged(engine, thetas, hmat, grad_tol)
    amps = engine.state(thetas)
    out = np.zeros(grid.n_coords)
    for i in range(grid.n_coords):
        op = grid.hamiltonian_derivative(1, (i,))
        out[i] = engine.expval_state(amps, engine.sector_apply(op))
    return out


def mixed_gradient(circuit, thetas, grid, coordinate, engine=None):
    """Angle gradient of <dH/dR_coordinate>: one column of Eq-20's RHS."""
    circuit = _as_circuit(circuit)
    engine = _engine_for(circuit, engine)
    op = grid.hamiltonian_derivative(1, (int(coordinate),))
    return engine.gradient(np.asarray(thetas, dtype=float),
                           engine.sector_apply(op))


@dataclass
class ResponseSolution:
    """Angle response dtheta*/dR with least-squares diagnostics."""

    dtheta_dR: np.ndarray
    residuals: np.ndarray
    rank: int


def solve_response(param_hessian, rhs):
    """Minimum-norm least-squares solve of A x_i = -rhs_i per coordinate.

    Args:
        param_hessian: (M, M) symmetric matrix A.
        rhs: (M,) vector or (M, N) matrix of mixed gradients g_i.

    Returns:
        ResponseSolution with dtheta_dR of shape (M, N) (or (M,) input
        kept one-dimensional in column 0), residual norms |A x_i + g_i|,
        and the effective rank at relative threshold 1e-10.
    """
    A = np.asarray(param_hessian, dtype=float)
    g = np.asarray(rhs, dtype=float)
    squeeze = g.ndim == 1
    if squeeze:
        g = g[:, None]
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ResponseError("parameter Hessian must be square")
    if g.shape[0] != A.shape[0]:
        raise ResponseError("rhs rows must match parameter count")
    if A.shape[0] == 0:
        empty = np.zeros((0, g.shape[1]))
        return ResponseSolution(empty[:, 0] if squeeze else empty,
                                np.zeros(g.shape[1]), 0)
    x, _, rank, _ = np.linalg.lstsq(A, -g, rcond=RCOND)
    residuals = np.linalg.norm(A @ x + g, axis=0)
    return ResponseSolution(x[:, 0] if squeeze else x, residuals, int(rank))


@dataclass
class HessianResult:
    """Symmetrized coordinate Hessian with solve diagnostics attached."""

    matrix: np.ndarray
    asymmetry: float
    response: ResponseSolution
    mixed_gradients: np.ndarray
    param_hessian: np.ndarray
    expectation_term: np.ndarray
    metadata: dict = field(default_factory=dict)

    def save_json(self, path):
        payload = {
            "units": "Hartree/Bohr^2",
            "matrix": self.matrix.tolist(),
            "asymmetry": self.asymmetry,
            "response_rank": self.response.rank,
            "response_residuals": self.response.residuals.tolist(),
            "metadata": self.metadata,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")

    def save_text(self, path):
        header = (f"coordinate hessian, Hartree/Bohr^2, "
                  f"asymmetry {self.asymmetry:.6e}")
        np.savetxt(path, self.matrix, fmt="% .17e", header=header)


def circuit_fingerprint(circuit):
    """Stable hash of the circuit structure and angles."""
    circuit = _as_circuit(circuit)
    blob = json.dumps(
        [circuit.n_qubits, list(circuit.occupations),
         [[g.kind, list(g.wires), float(g.theta).hex()]
          for g in circuit.gates]],
        separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def grid_fingerprint(grid):
    """Stable hash of the grid geometry, step and point labels."""
    geo = grid.geometry
    blob = json.dumps(
        [grid.molecule, grid.step_bohr, list(geo.symbols),
         [float(m).hex() for m in geo.masses_amu],
         [float(x).hex() for x in geo.coords_bohr.ravel()],
         sorted(str(k) for k in grid.points)],
        separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def hessian(circuit, grid, fd_step=1e-3, engine=None, grad_tol=1e-5,
            asymmetry_warn=1e-4):
    """Analytic coordinate Hessian of the variational energy surface.

    Args:
        circuit: TailgatedCircuit or plain Circuit at optimized angles;
            a plain circuit gives the non-tailgated (response-starved)
            Hessian the augmentation exists to fix.
        grid: HamiltonianGrid supporting first and second derivatives.
        fd_step: angle step for the finite-difference parameter Hessian.

    Returns:
        HessianResult; matrix is symmetrized, the pre-symmetrization
        asymmetry recorded, and a warning emitted when it exceeds
        asymmetry_warn.
    """
    epsilon = None
    if isinstance(circuit, TailgatedCircuit):
        if circuit.selection_report is not None:
            epsilon = circuit.selection_report.epsilon
        full = circuit.circuit
    else:
        full = circuit
    engine = _engine_for(full, engine)
    thetas = full.thetas
    n_coords = grid.n_coords
    hmat = engine.hamiltonian_matrix(grid.hamiltonian(()))
    _check_converged(engine, thetas, hmat, grad_tol)

    A = engine.param_hessian(thetas, hmat, step=fd_step)
    G = np.zeros((len(thetas), n_coords))
    for i in range(n_coords):
        G[:, i] = mixed_gradient(full, thetas, grid, i, engine=engine)
    resp = solve_response(A, G)

    amps = engine.state(thetas)
    S = np.zeros((n_coords, n_coords))
    for i in range(n_coords):
        for j in range(i, n_coords):
            op = grid.hamiltonian_derivative(2, (i, j))
            S[i, j] = S[j, i] = engine.expval_state(amps,
                                                    engine.sector_apply(op))

    raw = resp.dtheta_dR.T @ G + S
    asymmetry = float(np.abs(raw - raw.T).max()) if n_coords else 0.0
    if asymmetry > asymmetry_warn:
        warnings.warn(f"hessian asymmetry {asymmetry:.3e} exceeds "
                      f"{asymmetry_warn:.1e}", stacklevel=2)
    matrix = 0.5 * (raw + raw.T)
    meta = {
        "circuit": circuit_fingerprint(full),
        "grid": grid_fingerprint(grid),
        "epsilon": epsilon,
        "fd_step": fd_step,
        "n_parameters": len(thetas),
    }
    return HessianResult(matrix, asymmetry, resp, G, A, S, meta)
