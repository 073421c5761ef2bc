"""Generate the committed FCIDUMP grids and manifests under testdata/.

Each derivative grid is a central-difference stencil around a base geometry:
the base point, axial displacements +-h (and +-2h where third or fourth
derivatives are needed), and the four-corner points for every coordinate
pair. Derivative grids use a frozen orbital gauge (symmetric
re-orthonormalization of the base molecular orbitals in the displaced
atomic-orbital metric) so every integral varies smoothly in R with no
per-point SCF noise. Scan grids sample large displacements along one
direction and use per-point canonical SCF orbitals aligned to the base
point by maximum overlap.

Geometry labels are lists of signed 1-based coordinate indices; entry +k
displaces coordinate k-1 by +step, entry -k by -step, repeats accumulate.

Base geometries for the frequency grids (H2, BeH2, H2O) are optimized at
the exact-diagonalization level so the base point is a stationary point
of the surface actually being differentiated; H3+ keeps the mean-field
geometry since its grids feed fidelity scans, not frequencies.

Run from the repository root:  python3 tools/generate_testdata.py
"""

from __future__ import annotations

import argparse
import json
import math
import pathlib
import sys

import numpy as np
from scipy.optimize import minimize, minimize_scalar

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))
import minichem as mc

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))
from vqederiv.integrals import IntegralSet, write_fcidump
from vqederiv.pauli import assemble_hamiltonian, to_dense

ROOT = pathlib.Path(__file__).resolve().parents[1]
TESTDATA = ROOT / "testdata"


def label_name(label):
    if not label:
        return "base"
    return "".join(f"{'p' if s > 0 else 'm'}{abs(s)}" for s in
                   sorted(label, key=lambda s: (abs(s), -s)))


def hessian_labels(n_coords, axial2=False):
    """Stencil labels for first and second derivatives on N coordinates."""
    labels = [[]]
    for i in range(1, n_coords + 1):
        labels.append([i])
        labels.append([-i])
    if axial2:
        for i in range(1, n_coords + 1):
            labels.append([i, i])
            labels.append([-i, -i])
    for i in range(1, n_coords + 1):
        for j in range(i + 1, n_coords + 1):
            for si in (1, -1):
                for sj in (1, -1):
                    labels.append([si * i, sj * j])
    return labels


def displace(atoms, label, step):
    coords = np.array([xyz for _, xyz in atoms], dtype=float).reshape(-1)
    for s in label:
        coords[abs(s) - 1] += step * (1 if s > 0 else -1)
    coords = coords.reshape(-1, 3)
    return [(sym, tuple(coords[i])) for i, (sym, _) in enumerate(atoms)]


def mo_set(ao, C, n_electrons):
    h1, h2 = mc.mo_integrals(ao, C)
    return IntegralSet(h1.shape[0], n_electrons, 0, h1, h2, ao.enuc)


def _aligned_to_base(C, S, C0):
    """Reorder and sign-fix canonical orbitals to track the base set."""
    ov = C0.T @ S @ C
    n = C.shape[1]
    order = np.full(n, -1)
    used = np.zeros(n, dtype=bool)
    for i in range(n):
        j = int(np.argmax(np.where(used, -1.0, np.abs(ov[i]))))
        order[i] = j
        used[j] = True
    C = C[:, order]
    ov = C0.T @ S @ C
    for k in range(n):
        if ov[k, k] < 0:
            C[:, k] *= -1
    return C


def write_grid(outdir, molecule, atoms, n_electrons, step, labels,
               gauge="frozen", charge_note=None):
    outdir = pathlib.Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ao0 = mc.ao_integrals(atoms)
    ao0.n_electrons = n_electrons
    _, C0, _ = mc.rhf(ao0)
    points = []
    prev_C = C0
    for label in labels:
        geom = displace(atoms, label, step)
        ao = mc.ao_integrals(geom)
        ao.n_electrons = n_electrons
        if not label:
            C = C0
        elif gauge == "frozen":
            C = mc.frozen_gauge(C0, ao.S)
        else:
            _, C, _ = mc.rhf(ao, C_init=prev_C)
            C = _aligned_to_base(C, ao.S, C0)
            prev_C = C
        fname = label_name(label) + ".fcidump"
        write_fcidump(outdir / fname, mo_set(ao, C, n_electrons))
        points.append({"label": list(label), "file": fname})
    manifest = {
        "molecule": molecule,
        "atoms": [
            {"symbol": sym, "mass_amu": mc.ISOTOPE_MASS[sym],
             "xyz_bohr": list(xyz)}
            for sym, xyz in atoms
        ],
        "step_bohr": step,
        "points": points,
    }
    if charge_note:
        manifest["meta"] = charge_note
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    print(f"  wrote {len(points)} points -> {outdir}")


def scan_labels(direction, n_steps):
    """Labels k * direction for k = -n_steps .. n_steps."""
    labels = []
    for k in range(-n_steps, n_steps + 1):
        lab = []
        for s in direction:
            rep = [s] * k if k > 0 else [-s] * (-k)
            lab.extend(rep)
        labels.append(lab)
    return labels


def rhf_energy(atoms, n_electrons=None):
    ao = mc.ao_integrals(atoms)
    if n_electrons is not None:
        ao.n_electrons = n_electrons
    e, _, _ = mc.rhf(ao)
    return e


def fci_energy_h2(r):
    atoms = [("H", (0.0, 0.0, -r / 2)), ("H", (0.0, 0.0, r / 2))]
    ao = mc.ao_integrals(atoms)
    _, C, _ = mc.rhf(ao)
    ints = mo_set(ao, C, 2)
    w = np.linalg.eigvalsh(to_dense(assemble_hamiltonian(ints)))
    return float(w[0])


def fci_energy(atoms, n_electrons):
    """Exact ground energy in the n-electron sector at this geometry."""
    from vqederiv.oracle import exact_ground_state

    ao = mc.ao_integrals(atoms)
    ao.n_electrons = n_electrons
    _, C, _ = mc.rhf(ao)
    h = assemble_hamiltonian(mo_set(ao, C, n_electrons))
    return exact_ground_state(h, tuple(range(n_electrons))).energy


def h2o_atoms(r, theta):
    s, c = math.sin(theta / 2), math.cos(theta / 2)
    return [("O", (0.0, 0.0, 0.0)),
            ("H", (r * s, 0.0, r * c)),
            ("H", (-r * s, 0.0, r * c))]


def beh2_atoms(r):
    return [("Be", (0.0, 0.0, 0.0)),
            ("H", (0.0, 0.0, r)),
            ("H", (0.0, 0.0, -r))]


def h3p_atoms(a):
    rc = a / math.sqrt(3.0)
    pts = []
    for ang in (90.0, 210.0, 330.0):
        t = math.radians(ang)
        pts.append(("H", (rc * math.cos(t), rc * math.sin(t), 0.0)))
    return pts


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--only", nargs="*", default=None,
                    help="subset of {h2,h3p,beh2,h2o,beh2scan}")
    args = ap.parse_args()
    only = set(args.only) if args.only else None

    def wanted(tag):
        return only is None or tag in only

    h = 0.005

    if wanted("h2"):
        print("H2: locating exact-diagonalization equilibrium bond length")
        res = minimize_scalar(fci_energy_h2, bounds=(1.2, 1.7),
                              method="bounded", options={"xatol": 1e-9})
        r_eq = float(res.x)
        print(f"  r_eq = {r_eq:.9f} bohr, E = {res.fun:.9f}")
        atoms = [("H", (0.0, 0.0, -r_eq / 2)), ("H", (0.0, 0.0, r_eq / 2))]
        write_grid(TESTDATA / "h2_hessian", "H2", atoms, 2, h,
                   hessian_labels(6, axial2=True))

    if wanted("h3p"):
        print("H3+: optimizing equilateral side length (RHF)")
        res = minimize_scalar(
            lambda a: rhf_energy(h3p_atoms(a), n_electrons=2),
            bounds=(1.3, 2.0), method="bounded", options={"xatol": 1e-9})
        a_eq = float(res.x)
        print(f"  a_eq = {a_eq:.9f} bohr, E = {res.fun:.9f}")
        atoms = h3p_atoms(a_eq)
        deriv_labels = hessian_labels(9)[:1 + 2 * 9]
        write_grid(TESTDATA / "h3p_deriv", "H3+", atoms, 2, h, deriv_labels,
                   charge_note={"charge": 1})
        # Vertical stretch of the two base hydrogens in opposite directions:
        # +y on atom 2 (coordinate 5), -y on atom 3 (coordinate 8).
        write_grid(TESTDATA / "h3p_scan", "H3+", atoms, 2, 0.05,
                   scan_labels((5, -8), 6), gauge="canonical",
                   charge_note={"charge": 1, "scan_direction": [5, -8]})

    # Frequency grids must sit at stationary points of the exact
    # (full-CI) surface, not the mean-field one: a leftover gradient
    # pushes the rigid-body rotations to hundreds of imaginary
    # wavenumbers and contaminates the bends, and the reference
    # frequencies correspond to the exact-surface minimum.
    if wanted("beh2"):
        print("BeH2: optimizing bond length (exact diagonalization)")
        res = minimize_scalar(lambda r: fci_energy(beh2_atoms(r), 6),
                              bounds=(2.3, 2.7), method="bounded",
                              options={"xatol": 1e-9})
        r_eq = float(res.x)
        print(f"  r_eq = {r_eq:.9f} bohr, E = {res.fun:.9f}")
        write_grid(TESTDATA / "beh2_hessian", "BeH2", beh2_atoms(r_eq), 6, h,
                   hessian_labels(9))

    if wanted("h2o"):
        print("H2O: optimizing bond length and angle (exact diagonalization)")
        res = minimize(
            lambda x: fci_energy(h2o_atoms(x[0], x[1]), 10),
            x0=np.array([1.84, math.radians(100.0)]),
            method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": 1e-13, "maxiter": 400})
        r_eq, th_eq = float(res.x[0]), float(res.x[1])
        print(f"  r_eq = {r_eq:.9f} bohr, theta = {math.degrees(th_eq):.6f} deg,"
              f" E = {res.fun:.9f}")
        write_grid(TESTDATA / "h2o_hessian", "H2O", h2o_atoms(r_eq, th_eq),
                   10, h, hessian_labels(9))

    if wanted("beh2scan"):
        print("BeH2: symmetric-stretch scan grid")
        res = minimize_scalar(lambda r: fci_energy(beh2_atoms(r), 6),
                              bounds=(2.3, 2.7), method="bounded",
                              options={"xatol": 1e-9})
        atoms = beh2_atoms(float(res.x))
        # Outward stretch of both hydrogens: +z on atom 2 (coordinate 6),
        # -z on atom 3 (coordinate 9).
        write_grid(TESTDATA / "beh2_scan", "BeH2", atoms, 6, 0.125,
                   scan_labels((6, -9), 6), gauge="canonical",
                   charge_note={"scan_direction": [6, -9]})

    print("done")


if __name__ == "__main__":
    main()
