"""Exact-diagonalization ground truth for the variational machinery.

Everything here deliberately bypasses the circuit path: energies come from
dense (or sector-restricted) eigensolves, energy derivatives from central
stencils over those energies, and state derivatives from the spectral sum

    d|v_i>/dR = sum_{j != i} <v_j|dH|v_i> / (lambda_i - lambda_j) |v_j>,

so the simulator, response and tailgating results can be checked against an
independent route. Non-degeneracy is load-bearing: every operation checks
the relevant gap and raises DegeneracyError instead of dividing by it.

Eigenvector phase convention: largest-magnitude amplitude real positive.
Finite-difference scans override it with continuity (each state aligned to
its neighbour), since a smooth family is what the difference quotient
assumes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .adapt import AdaptConfig, vqe_optimize
from .grid import canonical_label, label_displacement, stencil_labels
from .pauli import linear_combine, to_dense
from .sim import CircuitEngine, SectorSpace, apply_paulisum, fidelity
from .tailgate import TailgatedCircuit

DEGENERACY_TOL = 1e-8
RESIDUAL_TOL = 1e-9
# dense eigensolve cap for full (sector-free) registers
DENSE_QUBITS = 10


class OracleError(RuntimeError):
    pass


class DegeneracyError(OracleError):
    pass


@dataclass
class ExactEigenpair:
    """Ground energy, full statevector, and gap to the next level."""

    energy: float
    state: np.ndarray
    gap: float


def _fix_phase(vec):
    k = int(np.argmax(np.abs(vec)))
    a = vec[k]
    if a == 0:
        raise OracleError("cannot phase-fix the zero vector")
    return vec * (np.conj(a) / abs(a))


def _sector_space(op_or_n, sector):
    n = op_or_n if isinstance(op_or_n, int) else op_or_n.n_qubits
    if isinstance(sector, SectorSpace):
        return sector
    return SectorSpace.from_occupations(n, tuple(sector))


def exact_ground_state(h, sector=None, degeneracy_tol=DEGENERACY_TOL):
    """Lowest eigenpair of a Hamiltonian, optionally sector-restricted.

    Args:
        h: PauliSum or dense Hermitian matrix.
        sector: occupation tuple or SectorSpace confining the search to a
            fixed particle/spin sector; None searches the full space.

    Returns:
        ExactEigenpair with the full-register state (largest amplitude
        real positive) and the gap to the next eigenvalue within the
        searched space.

    Raises:
        DegeneracyError: gap below degeneracy_tol.
    """
    if isinstance(h, np.ndarray):
        evals, evecs = np.linalg.eigh(h)
        energy, state = evals[0], evecs[:, 0]
        gap = float(evals[1] - evals[0]) if len(evals) > 1 else math.inf
        matvec = lambda v: h @ v
    elif sector is not None:
        space = _sector_space(h, sector)
        m = space.matrix(h)
        evals, evecs = np.linalg.eigh(m)
        energy = evals[0]
        gap = float(evals[1] - evals[0]) if len(evals) > 1 else math.inf
        state = space.scatter(evecs[:, 0])
        matvec = lambda v: apply_paulisum(h, v)
    elif h.n_qubits <= DENSE_QUBITS:
        return exact_ground_state(to_dense(h), None, degeneracy_tol)
    else:
        dim = 1 << h.n_qubits
        op = LinearOperator((dim, dim), dtype=complex,
                            matvec=lambda v: apply_paulisum(h, v))
        evals, evecs = eigsh(op, k=2, which="SA")
        order = np.argsort(evals)
        energy = evals[order[0]]
        gap = float(evals[order[1]] - evals[order[0]])
        state = evecs[:, order[0]]
        matvec = lambda v: apply_paulisum(h, v)
    if gap < degeneracy_tol:
        raise DegeneracyError(
            f"ground state degenerate within {degeneracy_tol:.1e} "
            f"(gap {gap:.3e})")
    state = _fix_phase(state)
    residual = np.linalg.norm(matvec(state) - energy * state)
    if residual > RESIDUAL_TOL:
        raise OracleError(f"eigenpair residual {residual:.3e}")
    return ExactEigenpair(float(energy), state, gap)


def _default_sector(family):
    # synthetic families carry no particle structure
    if hasattr(family, "n_electrons"):
        return tuple(range(family.n_electrons))
    return None


def ground_energy(grid, label=(), sector=None):
    """Exact ground energy at a grid point, cached on the grid."""
    sector = _default_sector(grid) if sector is None else tuple(sector)
    key = (tuple(label), sector)
    if key not in grid._energy_cache:
        grid._energy_cache[key] = exact_ground_state(
            grid.hamiltonian(label), sector).energy
    return grid._energy_cache[key]


@dataclass
class FdDerivative:
    """A stencil-evaluated energy derivative with its error estimate."""

    value: float
    order: int
    coords: tuple
    step: float
    stencil_accuracy: int
    truncation_error: float
    richardson: bool


def _stencil_value(energy_of, points, step, power):
    return sum(w * energy_of(lab) for lab, w in points.items()) / step ** power


def _double_label(label):
    out = []
    for s in label:
        out.extend([s, s])
    return canonical_label(out)


def _fd_with_error(energy_of, grid, order, coords):
    """Stencil value plus a Richardson error estimate when 2h points exist.

    All shipped stencils are second-order accurate, so the step-doubled
    value overshoots the error by a factor 2^2 - 1 = 3. Without the 2h
    points the estimate degrades to an eigensolver noise floor only.
    """
    points, power = stencil_labels(order, coords)
    h = grid.step_bohr
    value = _stencil_value(energy_of, points, h, power)
    weight_sum = sum(abs(w) for w in points.values())
    floor = 1e-12 * weight_sum / h ** power
    doubled = {_double_label(lab): w for lab, w in points.items()}
    if all(lab in grid.points for lab in doubled):
        coarse = _stencil_value(energy_of, doubled, 2.0 * h, power)
        return value, abs(value - coarse) / 3.0 + floor, True
    return value, floor, False


def fd_energy_derivative(grid, order, coords, sector=None):
    """Central finite-difference derivative of the exact ground energy.

    Args:
        grid: HamiltonianGrid with the stencil points present.
        order: derivative order, 1 to 4 (3 and 4 diagonal only).
        coords: 0-based coordinate indices, one per order.

    Returns:
        FdDerivative in Hartree/Bohr^order.
    """
    coords = tuple(int(c) for c in coords)
    value, err, rich = _fd_with_error(
        lambda lab: ground_energy(grid, lab, sector), grid, order, coords)
    return FdDerivative(value, int(order), coords, grid.step_bohr, 2, err,
                        rich)


def fd_hessian(grid, sector=None):
    """Full coordinate Hessian from exact energies, in Hartree/Bohr^2."""
    n = grid.n_coords
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            out[i, j] = out[j, i] = fd_energy_derivative(
                grid, 2, (i, j), sector).value
    return out


def eigvec_derivative(h, dh, index=0, degeneracy_tol=DEGENERACY_TOL):
    """Analytic derivative of one eigenvector via the spectral sum.

    Args:
        h: PauliSum or dense Hermitian matrix (full spectrum is taken).
        dh: operator derivative, same type and size.
        index: which eigenvector (ascending eigenvalue order).

    Returns:
        (eigenpair phase-fixed vector v_i, derivative dv_i). The phase
        convention makes <v_i|dv_i> exactly zero.
    """
    hm = h if isinstance(h, np.ndarray) else to_dense(h)
    dm = dh if isinstance(dh, np.ndarray) else to_dense(dh)
    evals, evecs = np.linalg.eigh(hm)
    gaps = np.abs(np.delete(evals - evals[index], index))
    if gaps.size and gaps.min() < degeneracy_tol:
        raise DegeneracyError(
            f"eigenvalue {index} degenerate within {degeneracy_tol:.1e}")
    vi = _fix_phase(evecs[:, index])
    dv = np.zeros_like(vi)
    for j in range(len(evals)):
        if j == index:
            continue
        vj = evecs[:, j]
        dv += (np.vdot(vj, dm @ vi) / (evals[index] - evals[j])) * vj
    return vi, dv


def second_derivative_via_states(grid, coords, sector=None):
    """Second energy derivative from exact states and state derivatives.

    Evaluates <d2H/dRi dRj> + 2 Re <psi0| dH/dRi |dpsi0/dRj> inside the
    particle sector (every operator involved preserves it, so the
    spectral sum over sector eigenvectors is complete).
    """
    i, j = (int(c) for c in coords)
    sector = _default_sector(grid) if sector is None else tuple(sector)
    if sector is None:
        dense = lambda op: to_dense(op)
    else:
        space = _sector_space(grid.n_qubits, sector)
        dense = space.matrix
    hm = dense(grid.hamiltonian(()))
    dmi = dense(grid.hamiltonian_derivative(1, (i,)))
    dmj = dense(grid.hamiltonian_derivative(1, (j,)))
    d2m = dense(grid.hamiltonian_derivative(2, (i, j)))
    v0, dvj = eigvec_derivative(hm, dmj)
    return float(np.real(np.vdot(v0, d2m @ v0))
                 + 2.0 * np.real(np.vdot(v0, dmi @ dvj)))


@dataclass
class ScanPoint:
    delta: float
    fidelity: float
    dfidelity: float
    energy: float
    exact_energy: float
    converged: bool


@dataclass
class ScanResult:
    """Fidelity of a re-optimized circuit along a displacement scan."""

    direction: tuple
    points: list

    @property
    def deltas(self):
        return np.array([p.delta for p in self.points])

    @property
    def fidelities(self):
        return np.array([p.fidelity for p in self.points])

    @property
    def dfidelities(self):
        return np.array([p.dfidelity for p in self.points])

    def endpoint_slope(self):
        return max(abs(self.points[0].dfidelity),
                   abs(self.points[-1].dfidelity))

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["delta_bohr", "fidelity", "dfidelity_ddelta",
                             "converged"])
            for p in self.points:
                writer.writerow([f"{p.delta:.10f}", f"{p.fidelity:.12f}",
                                 f"{p.dfidelity:.10e}", int(p.converged)])


def scan_direction(grid):
    """Infer the displacement unit label of a one-dimensional scan grid."""
    units = [lab for lab in grid.points if lab]
    if not units:
        raise OracleError("grid has no displaced points to scan")
    unit = min(units, key=len)
    for lab in units:
        k, rem = divmod(len(lab), len(unit))
        if rem or (_repeat_label(unit, k) != lab
                   and _repeat_label(_negate_label(unit), k) != lab):
            raise OracleError(
                f"grid point {list(lab)} is not a multiple of the scan "
                f"direction {list(unit)}")
    return unit


def _repeat_label(unit, k):
    out = []
    for s in unit:
        out.extend([s] * k)
    return canonical_label(out)


def _negate_label(unit):
    return canonical_label(-s for s in unit)


def fidelity_scan(circuit, grid, direction=None, sector=None, config=None,
                  reoptimize=True):
    """Fidelity against the exact ground state along a displacement scan.

    The circuit structure is fixed; at each sampled displacement the
    angles are re-optimized (warm-started from the neighbouring point,
    marching outward from delta = 0) and the fidelity against the exact
    ground state recorded. A tail under test stays in the parameter
    vector, free to move away from zero as the geometry changes.

    Args:
        circuit: Circuit or TailgatedCircuit with optimized base angles.
        grid: scan grid whose displaced labels are multiples of one unit.
        direction: unit label override, signed 1-based entries.
        config: AdaptConfig supplying the VQE settings.
        reoptimize: False freezes the angles (fixed-parameter curve).

    Returns:
        ScanResult ordered by delta; non-converged points are flagged,
        never dropped. The derivative column is a central difference,
        one-sided at the scan ends.
    """
    if isinstance(circuit, TailgatedCircuit):
        circuit = circuit.circuit
    config = config or AdaptConfig()
    sector = _default_sector(grid) if sector is None else tuple(sector)
    unit = canonical_label(direction) if direction else scan_direction(grid)
    neg = _negate_label(unit)
    kmax_pos = max((len(lab) // len(unit) for lab in grid.points
                    if lab and lab == _repeat_label(unit, len(lab) // len(unit))),
                   default=0)
    kmax_neg = max((len(lab) // len(unit) for lab in grid.points
                    if lab and lab == _repeat_label(neg, len(lab) // len(unit))),
                   default=0)
    engine = CircuitEngine(circuit.n_qubits, circuit.occupations,
                           circuit.gates)
    disp = label_displacement(unit, grid.n_coords, grid.step_bohr)
    delta_step = float(np.linalg.norm(disp))

    def solve(k, thetas):
        label = _repeat_label(unit if k >= 0 else neg, abs(k))
        h = grid.hamiltonian(label)
        hmat = engine.hamiltonian_matrix(h)
        if reoptimize and len(thetas):
            res = vqe_optimize(engine, thetas, hmat, config)
            thetas, energy, ok = res.thetas, res.energy, res.converged
        else:
            energy, ok = engine.expval(thetas, hmat), True
        exact = exact_ground_state(h, sector)
        fid = fidelity(engine.full_state(thetas), exact.state)
        return thetas, (k * delta_step, fid, energy, exact.energy, ok)

    base = np.asarray(circuit.thetas, dtype=float)
    rows = {}
    polished, rows[0] = solve(0, base)
    thetas = polished.copy()
    for k in range(1, kmax_pos + 1):
        thetas, rows[k] = solve(k, thetas)
    thetas = polished.copy()
    for k in range(-1, -kmax_neg - 1, -1):
        thetas, rows[k] = solve(k, thetas)

    ks = sorted(rows)
    fids = {k: rows[k][1] for k in ks}
    points = []
    for idx, k in enumerate(ks):
        lo, hi = ks[max(idx - 1, 0)], ks[min(idx + 1, len(ks) - 1)]
        dfid = (fids[hi] - fids[lo]) / ((hi - lo) * delta_step)
        delta, fid, energy, exact_e, ok = rows[k]
        points.append(ScanPoint(delta, fid, dfid, energy, exact_e, ok))
    return ScanResult(unit, points)


def taylor_hamiltonian(family, order, displacement):
    """Taylor expansion of H about the base point at a given displacement.

    Args:
        family: grid-like object with hamiltonian_derivative.
        order: truncation order n of H_n (0 keeps only H(R0)).
        displacement: length-n_coords vector in Bohr.

    Mixed derivative availability limits molecular grids to displacements
    along the stencil axes; synthetic families implement whatever they
    can differentiate.
    """
    disp = np.asarray(displacement, dtype=float)
    terms = [(1.0, family.hamiltonian(()))]
    for k in range(1, order + 1):
        active = [c for c in range(len(disp)) if disp[c] != 0.0]
        for multi in combinations_with_replacement(active, k):
            weight = 1.0
            for c in multi:
                weight *= disp[c]
            for m in (multi.count(c) for c in set(multi)):
                weight /= math.factorial(m)
            terms.append((weight, family.hamiltonian_derivative(k, multi)))
    return linear_combine(terms)


@dataclass
class Theorem1Entry:
    order: int
    coords: tuple
    exact: float
    truncated: float
    gap: float
    tolerance: float
    asserted: bool
    richardson: bool

    @property
    def within(self):
        return self.gap <= self.tolerance


@dataclass
class Theorem1Report:
    """FD derivative comparison of E(R) and the truncated-family surface."""

    taylor_order: int
    entries: list = field(default_factory=list)

    @property
    def passed(self):
        return all(e.within for e in self.entries if e.asserted)

    def save_json(self, path):
        payload = {
            "taylor_order": self.taylor_order,
            "entries": [{
                "order": e.order, "coords": list(e.coords),
                "exact": e.exact, "truncated": e.truncated,
                "gap": e.gap, "tolerance": e.tolerance,
                "asserted": e.asserted, "richardson": e.richardson,
                "within": e.within,
            } for e in self.entries],
            "passed": self.passed,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")


def theorem1_check(family, n, coordinates=None, orders=None, sector=None,
                   safety=5.0):
    """Compare energy derivatives of H against the Taylor-family surface.

    The truncated surface is E_t(R) = <phi0(R)|H(R)|phi0(R)> with phi0
    the exact ground state of the order n-1 Taylor Hamiltonian: the
    idealized circuit whose reachable manifold is exactly that family.
    Variational quadratic error makes the two surfaces agree at R0 to
    derivative order n; entries up to n are asserted against safety x
    (combined Richardson truncation estimates), higher orders are
    reported only.

    Args:
        family: HamiltonianGrid or synthetic family with the same duck
            interface.
        n: target derivative order; the Taylor family truncates at n - 1.
        coordinates: coordinate indices to scan (default: all with
            stencil points present).
        orders: derivative orders to evaluate (default 1..n+1, diagonal).

    Returns:
        Theorem1Report.
    """
    if n < 1:
        raise OracleError("theorem check needs n >= 1")
    orders = list(orders) if orders else list(range(1, n + 2))
    coords_list = (list(coordinates) if coordinates is not None
                   else list(range(family.n_coords)))
    report = Theorem1Report(taylor_order=n - 1)

    tsector = sector if sector is not None else _default_sector(family)

    def exact_energy(lab):
        return ground_energy(family, lab, sector)

    truncated_cache = {}

    def truncated_energy(lab):
        if lab not in truncated_cache:
            disp = label_displacement(lab, family.n_coords, family.step_bohr)
            ht = taylor_hamiltonian(family, n - 1, disp)
            phi = exact_ground_state(ht, tsector).state
            h_full = family.hamiltonian(lab)
            truncated_cache[lab] = float(np.real(
                np.vdot(phi, apply_paulisum(h_full, phi))))
        return truncated_cache[lab]

    for c in coords_list:
        for p in orders:
            coords = (c,) * p
            try:
                points, _ = stencil_labels(p, coords)
            except Exception:
                continue
            if not all(lab in family.points for lab in points):
                continue
            exact, err_e, rich_e = _fd_with_error(exact_energy, family, p,
                                                  coords)
            trunc, err_t, rich_t = _fd_with_error(truncated_energy, family,
                                                  p, coords)
            rich = rich_e and rich_t
            tol = safety * (err_e + err_t)
            # no Richardson points means no usable error estimate; report,
            # never assert
            report.entries.append(Theorem1Entry(
                p, coords, exact, trunc, abs(exact - trunc), tol,
                p <= n and rich, rich))
    return report


def aligned_state_family(grid, coordinate, sector=None, span=1):
    """Exact ground states at -span..span steps, phase-aligned for FD.

    Each state is multiplied by the phase making its overlap with the
    previous point real positive, the smoothness a difference quotient
    assumes.
    """
    c = int(coordinate)
    sector = _default_sector(grid) if sector is None else tuple(sector)
    states = []
    for k in range(-span, span + 1):
        sign = 1 if k >= 0 else -1
        label = canonical_label([sign * (c + 1)] * abs(k))
        states.append(exact_ground_state(grid.hamiltonian(label),
                                         sector).state)
    for idx in range(1, len(states)):
        ov = np.vdot(states[idx - 1], states[idx])
        if abs(ov) > 0:
            states[idx] = states[idx] * (np.conj(ov) / abs(ov))
    return states


def normalization_residual(states, step, order):
    """Residual of the normalization identity at a given order.

    Args:
        states: odd-length list of states at -span..span steps, already
            phase-aligned; the middle entry is the base point.
        step: grid step in Bohr.
        order: 1 checks |2 Re <dpsi|psi>|; 2 checks
            |2 Re <d2psi|psi> + 2 <dpsi|dpsi>|.
    """
    m = len(states) // 2
    psi = states[m]
    dpsi = (states[m + 1] - states[m - 1]) / (2.0 * step)
    if order == 1:
        return float(abs(2.0 * np.real(np.vdot(dpsi, psi))))
    if order == 2:
        d2psi = (states[m + 1] - 2.0 * psi + states[m - 1]) / step ** 2
        return float(abs(2.0 * np.real(np.vdot(d2psi, psi))
                         + 2.0 * np.real(np.vdot(dpsi, dpsi))))
    raise OracleError(f"unsupported identity order {order}")


def normalization_identity_check(grid, coordinate, order, sector=None):
    """Max normalization-identity violation from FD exact states."""
    states = aligned_state_family(grid, coordinate, sector)
    return normalization_residual(states, grid.step_bohr, order)
