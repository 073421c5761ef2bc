"""Hamiltonian grids: integral sets on central-difference stencils.

A grid is a base molecular geometry plus FCIDUMP files at displaced
geometries, described by a JSON manifest. Point labels are lists of signed
1-based coordinate indices: entry +k displaces Cartesian coordinate k-1 of
the flattened geometry by +step_bohr, entry -k by -step_bohr, and repeated
entries accumulate. The base point has the empty label.

Finite-difference stencils over the grid produce integral-set derivatives,
which assemble into Hamiltonian derivative operators. Gauge continuity of
the underlying orbitals is a property of the data, not of this code; the
validator flags coefficient jumps between neighboring points that exceed a
bound proportional to the step.
"""

from __future__ import annotations

import json
import pathlib
from dataclasses import dataclass, field

import numpy as np

from .integrals import IntegralError, IntegralSet, combine, parse_fcidump
from .pauli import assemble_hamiltonian


class GridError(ValueError):
    """Raised for malformed manifests or missing stencil points."""


class GaugeError(RuntimeError):
    """Raised when derivatives are requested on a gauge-flagged grid."""


# Standard atomic weights, used when a manifest omits mass_amu.
_DEFAULT_WEIGHTS_FILE = pathlib.Path(__file__).parent / "data" / "atomic_weights.json"


@dataclass
class Geometry:
    """Atomic symbols, masses and a flattened Cartesian coordinate vector."""

    symbols: tuple
    masses_amu: np.ndarray
    coords_bohr: np.ndarray

    def __post_init__(self):
        self.masses_amu = np.asarray(self.masses_amu, dtype=float)
        self.coords_bohr = np.asarray(self.coords_bohr, dtype=float).reshape(-1)
        if len(self.symbols) * 3 != self.coords_bohr.size:
            raise GridError("coordinate count must be 3 * atom count")
        if self.masses_amu.size != len(self.symbols):
            raise GridError("one mass per atom required")
        if np.any(self.masses_amu <= 0):
            raise GridError("masses must be positive")

    @property
    def n_atoms(self):
        return len(self.symbols)

    @property
    def n_coords(self):
        return self.coords_bohr.size

    def coordinate_masses(self):
        """Per-coordinate masses (each atom mass repeated for x, y, z)."""
        return np.repeat(self.masses_amu, 3)


def canonical_label(label):
    """Canonical tuple form of a point label."""
    out = []
    for s in label:
        s = int(s)
        if s == 0:
            raise GridError("label entries are signed 1-based indices; 0 invalid")
        out.append(s)
    return tuple(sorted(out, key=lambda s: (abs(s), -s)))


def label_displacement(label, n_coords, step):
    """Displacement vector (bohr) encoded by a label."""
    disp = np.zeros(n_coords)
    for s in label:
        idx = abs(s) - 1
        if idx >= n_coords:
            raise GridError(f"label entry {s} exceeds {n_coords} coordinates")
        disp[idx] += step if s > 0 else -step
    return disp


@dataclass
class HamiltonianGrid:
    """A geometry, a step size, and integral sets keyed by point label."""

    geometry: Geometry
    step_bohr: float
    points: dict
    molecule: str = ""
    validation: object = None
    allow_gauge_violations: bool = False
    _ham_cache: dict = field(default_factory=dict, repr=False)
    _energy_cache: dict = field(default_factory=dict, repr=False)
    _deriv_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.step_bohr <= 0:
            raise GridError("step_bohr must be positive")
        if () not in self.points:
            raise GridError("grid must contain the base point (empty label)")
        base = self.points[()]
        for label, ints in self.points.items():
            if ints.n_orbitals != base.n_orbitals:
                raise GridError("orbital count differs across grid points")
            if ints.n_electrons != base.n_electrons:
                raise GridError("electron count differs across grid points")

    @property
    def n_coords(self):
        return self.geometry.n_coords

    @property
    def n_qubits(self):
        return 2 * self.points[()].n_orbitals

    @property
    def n_electrons(self):
        return self.points[()].n_electrons

    def has_point(self, label):
        return canonical_label(label) in self.points

    def integrals(self, label=()):
        key = canonical_label(label)
        if key not in self.points:
            raise GridError(f"grid has no point {list(key)}")
        return self.points[key]

    def hamiltonian(self, label=()):
        """Assembled Hamiltonian at a grid point, cached."""
        key = canonical_label(label)
        if key not in self._ham_cache:
            self._ham_cache[key] = assemble_hamiltonian(self.integrals(key))
        return self._ham_cache[key]

    def hamiltonian_derivative(self, order, coords):
        """Assembled derivative operator at the base point, cached.

        The mixed derivative is symmetric in coords, so the cache keys on
        the sorted index tuple.
        """
        key = (int(order), tuple(sorted(int(c) for c in coords)))
        if key not in self._deriv_cache:
            self._deriv_cache[key] = assemble_hamiltonian(
                coeff_derivative(self, order, coords))
        return self._deriv_cache[key]

    def _check_gauge(self):
        if self.validation is not None and not self.validation.ok \
                and not self.allow_gauge_violations:
            raise GaugeError(
                "grid failed gauge-continuity validation; set "
                "allow_gauge_violations to override")


def load_grid(manifest_path, validate=True, mass_table=None):
    """Load a grid from a manifest JSON file.

    Args:
        manifest_path: path to manifest.json; point files resolve relative
            to its directory.
        validate: run the gauge-continuity validator after loading.
        mass_table: symbol -> amu map used when atoms omit mass_amu
            (defaults to the shipped standard-atomic-weights table).

    Raises:
        GridError: missing keys, missing base point, inconsistent counts.
    """
    manifest_path = pathlib.Path(manifest_path)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    for key in ("molecule", "atoms", "step_bohr", "points"):
        if key not in manifest:
            raise GridError(f"manifest missing key {key!r}")
    if mass_table is None:
        mass_table = default_mass_table()
    symbols, masses, coords = [], [], []
    for atom in manifest["atoms"]:
        sym = atom["symbol"]
        symbols.append(sym)
        if "mass_amu" in atom:
            masses.append(float(atom["mass_amu"]))
        elif sym in mass_table:
            masses.append(float(mass_table[sym]))
        else:
            raise GridError(f"no mass for atom {sym!r}")
        coords.extend(atom["xyz_bohr"])
    geometry = Geometry(tuple(symbols), np.array(masses), np.array(coords))
    points = {}
    for entry in manifest["points"]:
        label = canonical_label(entry["label"])
        label_displacement(label, geometry.n_coords, 1.0)
        if label in points:
            raise GridError(f"duplicate grid point {list(label)}")
        path = manifest_path.parent / entry["file"]
        if not path.is_file():
            raise GridError(f"point {list(label)} references missing file "
                            f"{path}")
        points[label] = parse_fcidump(path)
    grid = HamiltonianGrid(
        geometry=geometry,
        step_bohr=float(manifest["step_bohr"]),
        points=points,
        molecule=manifest.get("molecule", ""),
    )
    if validate:
        grid.validation = validate_grid(grid)
    return grid


_MASS_TABLE = None


def default_mass_table():
    global _MASS_TABLE
    if _MASS_TABLE is None:
        with open(_DEFAULT_WEIGHTS_FILE) as fh:
            _MASS_TABLE = json.load(fh)
    return _MASS_TABLE


@dataclass
class GridValidation:
    """Outcome of the gauge-continuity check."""

    ok: bool
    bound: float
    worst_jump: float
    violations: list

    def __str__(self):
        state = "ok" if self.ok else f"{len(self.violations)} violation(s)"
        return (f"grid validation: {state}; worst neighbor jump "
                f"{self.worst_jump:.3e} vs bound {self.bound:.3e}")


def _neighbor_pairs(labels):
    """Pairs of labels whose multisets differ by exactly one entry."""
    label_set = set(labels)
    pairs = []
    for label in labels:
        for i in range(len(label)):
            shrunk = canonical_label(label[:i] + label[i + 1:])
            if shrunk in label_set:
                pairs.append((shrunk, label))
    return sorted(set(pairs))


def _max_coeff_delta(a, b):
    return max(
        abs(a.core_energy - b.core_energy),
        float(np.max(np.abs(a.h1 - b.h1))),
        float(np.max(np.abs(a.h2 - b.h2))),
    )


def validate_grid(grid, continuity_bound=10.0):
    """Check coefficient continuity between adjacent grid points.

    Adjacent means the point labels differ by one signed step. Every
    coefficient (core, h1, h2) must move by at most continuity_bound * step
    between neighbors; anything larger indicates a gauge inconsistency
    (orbital sign flip, reordering) or corrupted data.
    """
    bound = continuity_bound * grid.step_bohr
    worst = 0.0
    violations = []
    for la, lb in _neighbor_pairs(list(grid.points)):
        delta = _max_coeff_delta(grid.points[la], grid.points[lb])
        worst = max(worst, delta)
        if delta > bound:
            violations.append((list(la), list(lb), delta))
    report = GridValidation(not violations, bound, worst, violations)
    grid.validation = report
    return report


# Central-difference stencils as (offset -> weight) maps over step units.
# Offsets are tuples of (coordinate, signed step count) pairs.


def _stencil(order, coords):
    if order == 0:
        return {(): 1.0}, 0
    if order == 1:
        (i,) = coords
        return {((i, 1),): 0.5, ((i, -1),): -0.5}, 1
    if order == 2:
        i, j = coords
        if i == j:
            return {((i, 1),): 1.0, (): -2.0, ((i, -1),): 1.0}, 2
        return {
            ((i, 1), (j, 1)): 0.25,
            ((i, 1), (j, -1)): -0.25,
            ((i, -1), (j, 1)): -0.25,
            ((i, -1), (j, -1)): 0.25,
        }, 2
    if order == 3:
        i, j, k = coords
        if not (i == j == k):
            raise GridError("third derivatives support one coordinate only")
        return {((i, 2),): 0.5, ((i, 1),): -1.0,
                ((i, -1),): 1.0, ((i, -2),): -0.5}, 3
    if order == 4:
        i, j, k, l = coords
        if not (i == j == k == l):
            raise GridError("fourth derivatives support one coordinate only")
        return {((i, 2),): 1.0, ((i, 1),): -4.0, (): 6.0,
                ((i, -1),): -4.0, ((i, -2),): 1.0}, 4
    raise GridError(f"unsupported derivative order {order}")


def stencil_labels(order, coords):
    """Labels and weights of the central stencil for a mixed derivative.

    Args:
        order: derivative order, 0 to 4. Orders 3 and 4 are diagonal only.
        coords: tuple of 0-based coordinate indices, length equal to order.

    Returns:
        (points, power): points maps canonical label -> stencil weight and
        the derivative equals sum(w * f(label)) / step**power.
    """
    if len(coords) != order:
        raise GridError("need one coordinate index per derivative order")
    offsets, power = _stencil(order, tuple(coords))
    points = {}
    for offset, weight in offsets.items():
        if weight == 0.0:
            continue
        label = []
        for coord, steps in offset:
            sign = 1 if steps > 0 else -1
            label.extend([sign * (coord + 1)] * abs(steps))
        points[canonical_label(label)] = weight
    return points, power


def coeff_derivative(grid, order, coords):
    """Integral-set derivative d^order / dR_coords at the base point.

    Args:
        grid: HamiltonianGrid.
        order: 0 to 4 (3 and 4 diagonal only; 0 returns the base point).
        coords: 0-based coordinate indices, one per order.

    Returns:
        IntegralSet holding derivative coefficients, units Hartree/bohr^order.

    Raises:
        GridError: missing stencil points.
        GaugeError: validation failed and override not set.
    """
    grid._check_gauge()
    points, power = stencil_labels(order, coords)
    missing = [list(lab) for lab in points if lab not in grid.points]
    if missing:
        raise GridError(
            f"stencil for order {order} coords {tuple(coords)} needs "
            f"missing points {missing}")
    h = grid.step_bohr ** power
    return combine((w / h, grid.points[lab]) for lab, w in points.items())


def hamiltonian_derivative(grid, order, coords):
    """Assembled Hamiltonian derivative operator at the base point."""
    return grid.hamiltonian_derivative(order, coords)


def from_integral_sets(geometry, step_bohr, labeled_sets, molecule=""):
    """Build a grid from in-memory integral sets.

    Args:
        labeled_sets: iterable of (label, IntegralSet).
    """
    points = {}
    for label, ints in labeled_sets:
        key = canonical_label(label)
        if key in points:
            raise GridError(f"duplicate grid point {list(key)}")
        points[key] = ints
    return HamiltonianGrid(geometry=geometry, step_bohr=step_bohr,
                           points=points, molecule=molecule)
