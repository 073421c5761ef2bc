"""Harmonic vibrational analysis of a coordinate Hessian.

Mass-weighting divides H_ij by sqrt(m_i m_j) with per-coordinate masses in
amu; eigenvalues lambda of the weighted matrix are squared angular
frequencies in Hartree/(amu Bohr^2), converted to wavenumbers by

    nu = WAVENUMBER_PER_SQRT_EV * sqrt(lambda).

The conversion constant is assembled from physical constants at import,
about 5140.49 cm^-1 per sqrt(Hartree/(amu Bohr^2)). Translations and
rotations are removed by magnitude thresholding by default: at a
stationary geometry they sit far below the 50 cm^-1 cutoff. Away from a
stationary point the rotational modes pick up gradient contamination and
drift to hundreds of wavenumbers (imaginary for a compressed geometry),
so eckart_project is available to remove the rigid-body subspace
explicitly before diagonalizing. Negative eigenvalues are reported as
negative-magnitude frequencies and flagged, never clamped.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

_E_H = constants.physical_constants["Hartree energy"][0]
_AMU = constants.physical_constants["atomic mass constant"][0]
_BOHR = constants.physical_constants["Bohr radius"][0]

# sqrt(Hartree/(amu Bohr^2)) -> cm^-1
WAVENUMBER_PER_SQRT_EV = (math.sqrt(_E_H / (_AMU * _BOHR ** 2))
                          / (2.0 * math.pi * constants.c) / 100.0)


class ModeError(ValueError):
    pass


def mass_weight(hessian, geometry):
    """Mass-weighted Hessian M_ij = H_ij / sqrt(m_i m_j).

    Args:
        hessian: HessianResult or (3N, 3N) array in Hartree/Bohr^2.
        geometry: Geometry supplying per-atom masses in amu.
    """
    matrix = np.asarray(getattr(hessian, "matrix", hessian), dtype=float)
    masses = np.repeat(np.asarray(geometry.masses_amu, dtype=float), 3)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ModeError("hessian must be square")
    if matrix.shape[0] != masses.size:
        raise ModeError(
            f"hessian is {matrix.shape[0]}x{matrix.shape[0]} but geometry "
            f"has {masses.size} coordinates")
    if np.any(masses <= 0):
        raise ModeError("masses must be positive")
    root = np.sqrt(masses)
    return matrix / np.outer(root, root)


def rigid_body_basis(geometry):
    """Orthonormal mass-weighted translation and rotation vectors.

    Rotations are taken about the centre of mass; a linear molecule has a
    null rotation about its axis, detected by singular value and dropped,
    so the column count is 6 for a general geometry and 5 for a linear
    one.
    """
    masses = np.asarray(geometry.masses_amu, dtype=float)
    coords = np.asarray(geometry.coords_bohr, dtype=float).reshape(-1, 3)
    root = np.sqrt(masses)[:, None]
    rel = coords - (masses[:, None] * coords).sum(0) / masses.sum()
    cols = []
    for axis in range(3):
        t = np.zeros_like(coords)
        t[:, axis] = root[:, 0]
        cols.append(t.ravel())
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = 1.0
        cols.append((root * np.cross(np.broadcast_to(e, rel.shape),
                                     rel)).ravel())
    basis = np.column_stack(cols)
    q, s, _ = np.linalg.svd(basis, full_matrices=False)
    return q[:, s > 1e-8 * s[0]]


def eckart_project(mass_weighted, geometry):
    """Project rigid-body translations and rotations out of the Hessian.

    The projected directions come back as exact zero modes, so the usual
    magnitude threshold in frequencies() removes them regardless of how
    far the geometry sits from a stationary point.
    """
    mw = np.asarray(mass_weighted, dtype=float)
    basis = rigid_body_basis(geometry)
    if mw.shape[0] != basis.shape[0]:
        raise ModeError(
            f"hessian is {mw.shape[0]}x{mw.shape[0]} but geometry has "
            f"{basis.shape[0]} coordinates")
    proj = np.eye(mw.shape[0]) - basis @ basis.T
    return proj @ mw @ proj


@dataclass
class ModeResult:
    """Frequencies (cm^-1, descending) with per-mode diagnostics."""

    frequencies: np.ndarray
    imaginary_flags: np.ndarray
    dropped_modes: int
    eigenvectors: np.ndarray

    def save_json(self, path):
        payload = {
            "units": "cm^-1",
            "frequencies": self.frequencies.tolist(),
            "imaginary_flags": [bool(f) for f in self.imaginary_flags],
            "dropped_modes": self.dropped_modes,
            "eigenvectors": self.eigenvectors.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["mode", "frequency_cm1", "imaginary"])
            for k, (nu, flag) in enumerate(
                    zip(self.frequencies, self.imaginary_flags)):
                writer.writerow([k, f"{nu:.6f}", int(flag)])


def frequencies(mass_weighted, drop_threshold=50.0):
    """Harmonic frequencies of a mass-weighted Hessian.

    Args:
        mass_weighted: symmetric matrix in Hartree/(amu Bohr^2).
        drop_threshold: modes with |nu| below this (cm^-1) are discarded
            as translations and rotations.

    Returns:
        ModeResult; eigenvectors are the retained mass-weighted
        displacement columns, same order as frequencies.
    """
    mw = np.asarray(mass_weighted, dtype=float)
    if mw.ndim != 2 or mw.shape[0] != mw.shape[1]:
        raise ModeError("mass-weighted hessian must be square")
    if mw.size and np.abs(mw - mw.T).max() > 1e-8 * max(
            1.0, np.abs(mw).max()):
        raise ModeError("mass-weighted hessian must be symmetric")
    evals, evecs = np.linalg.eigh(0.5 * (mw + mw.T))
    nu = np.where(evals >= 0,
                  WAVENUMBER_PER_SQRT_EV * np.sqrt(np.abs(evals)),
                  -WAVENUMBER_PER_SQRT_EV * np.sqrt(np.abs(evals)))
    keep = np.abs(nu) >= drop_threshold
    order = np.argsort(-nu[keep])
    kept = nu[keep][order]
    return ModeResult(
        frequencies=kept,
        imaginary_flags=kept < 0,
        dropped_modes=int(np.count_nonzero(~keep)),
        eigenvectors=evecs[:, keep][:, order],
    )


def harmonic_frequencies(hessian, geometry, drop_threshold=50.0,
                         project=False):
    """Mass-weight and diagonalize in one call.

    With project=True the rigid-body subspace is removed first; use this
    when the geometry is not a stationary point of the energy surface.
    """
    mw = mass_weight(hessian, geometry)
    if project:
        mw = eckart_project(mw, geometry)
    return frequencies(mw, drop_threshold)
