"""Analytic energy derivatives from adaptive variational circuits.

The pipeline runs grid -> adapt -> tailgate -> response -> modes: load a
finite-difference Hamiltonian grid, build and optimize an adaptive
excitation circuit for the ground state, screen and attach zero-angle
gates against the Hamiltonian derivatives, solve the response equations
for the analytic coordinate Hessian, and convert it to harmonic
frequencies. The oracle module holds the exact-diagonalization
references everything is validated against.
"""

from .adapt import AdaptConfig, AdaptResult, GatePool, adapt_build, vqe_optimize
from .checkpoints import Checkpoint, load_checkpoint, save_checkpoint
from .grid import (
    Geometry,
    GridError,
    HamiltonianGrid,
    canonical_label,
    coeff_derivative,
    hamiltonian_derivative,
    label_displacement,
    load_grid,
    stencil_labels,
    validate_grid,
)
from .integrals import IntegralError, IntegralSet, parse_fcidump, write_fcidump
from .modes import (
    ModeResult,
    WAVENUMBER_PER_SQRT_EV,
    eckart_project,
    frequencies,
    harmonic_frequencies,
    mass_weight,
    rigid_body_basis,
)
from .oracle import (
    OracleError,
    exact_ground_state,
    eigvec_derivative,
    fd_energy_derivative,
    fd_hessian,
    fidelity_scan,
    second_derivative_via_states,
    taylor_hamiltonian,
    theorem1_check,
)
from .pauli import PauliError, PauliSum, assemble_hamiltonian, linear_combine
from .response import HessianResult, ResponseSolution, hessian, solve_response
from .sim import Circuit, CircuitEngine, Gate, SectorSpace, fidelity
from .tailgate import (
    SelectionReport,
    TailgatedCircuit,
    build_derivative_set,
    screen_gates,
    tailgate,
    tailgate_for_derivatives,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig",
    "AdaptResult",
    "Checkpoint",
    "Circuit",
    "CircuitEngine",
    "Gate",
    "GatePool",
    "Geometry",
    "GridError",
    "HamiltonianGrid",
    "HessianResult",
    "IntegralError",
    "IntegralSet",
    "ModeResult",
    "OracleError",
    "PauliError",
    "PauliSum",
    "ResponseSolution",
    "SectorSpace",
    "SelectionReport",
    "TailgatedCircuit",
    "WAVENUMBER_PER_SQRT_EV",
    "adapt_build",
    "assemble_hamiltonian",
    "build_derivative_set",
    "canonical_label",
    "coeff_derivative",
    "eckart_project",
    "eigvec_derivative",
    "exact_ground_state",
    "fd_energy_derivative",
    "fd_hessian",
    "fidelity",
    "fidelity_scan",
    "frequencies",
    "hamiltonian_derivative",
    "harmonic_frequencies",
    "hessian",
    "label_displacement",
    "linear_combine",
    "load_checkpoint",
    "parse_fcidump",
    "load_grid",
    "mass_weight",
    "rigid_body_basis",
    "save_checkpoint",
    "screen_gates",
    "second_derivative_via_states",
    "solve_response",
    "stencil_labels",
    "tailgate",
    "tailgate_for_derivatives",
    "taylor_hamiltonian",
    "theorem1_check",
    "validate_grid",
    "write_fcidump",
    "vqe_optimize",
]
