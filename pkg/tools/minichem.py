"""Minimal STO-3G restricted-Hartree-Fock engine for test-data generation.

Analytic Gaussian integrals (overlap, kinetic, nuclear attraction, electron
repulsion) over s and p shells via the McMurchie-Davidson scheme, a dense
DIIS-accelerated RHF solver, and molecular-orbital transforms. Only the
elements needed by the shipped test molecules are tabulated.

This module is repository tooling, not part of the installed package; the
package itself only ingests FCIDUMP files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.special import gammainc, gammaln

BOHR_PER_ANGSTROM = 1.8897259886

# Universal STO-3G least-squares expansions for zeta = 1 Slater functions
# and the standard molecular Slater exponents per element.
_STO3G_1S = ((2.227660584, 0.1543289673),
             (0.4057711562, 0.5353281423),
             (0.1098175104, 0.4446345422))
_STO3G_2S = ((0.9942030666, -0.09996722919),
             (0.2310313333, 0.3995128261),
             (0.07513856770, 0.7001154689))
_STO3G_2P = ((0.9942030666, 0.1559162750),
             (0.2310313333, 0.6076837186),
             (0.07513856770, 0.3919573931))

_ELEMENTS = {
    "H": dict(Z=1, zeta1s=1.24, zeta2sp=None),
    "Be": dict(Z=4, zeta1s=3.68, zeta2sp=1.15),
    "O": dict(Z=8, zeta1s=7.66, zeta2sp=2.25),
}

# Most-abundant-isotope masses in amu, the convention of the comparison
# program behind the reference frequency table.
ISOTOPE_MASS = {"H": 1.007825032, "Be": 9.012183065, "O": 15.994914620}


@dataclass
class Primitive:
    alpha: float
    coeff: float


@dataclass
class BasisFunction:
    center: np.ndarray
    lmn: tuple
    prims: list

    def normalize(self):
        l, m, n = self.lmn
        # Normalize each primitive, then the contraction.
        for p in self.prims:
            p.coeff *= _prim_norm(p.alpha, l, m, n)
        s = 0.0
        for pa in self.prims:
            for pb in self.prims:
                s += pa.coeff * pb.coeff * _overlap_prim(
                    pa.alpha, self.lmn, self.center,
                    pb.alpha, self.lmn, self.center)
        scale = 1.0 / math.sqrt(s)
        for p in self.prims:
            p.coeff *= scale
        return self


def _prim_norm(alpha, l, m, n):
    df = _double_factorial
    num = (2.0 * alpha / math.pi) ** 0.75 * (4.0 * alpha) ** ((l + m + n) / 2.0)
    den = math.sqrt(df(2 * l - 1) * df(2 * m - 1) * df(2 * n - 1))
    return num / den


def _double_factorial(k):
    if k <= 0:
        return 1.0
    out = 1.0
    while k > 1:
        out *= k
        k -= 2
    return out


def build_basis(atoms):
    """STO-3G basis functions for a list of (symbol, xyz_bohr) atoms."""
    funcs = []
    for symbol, xyz in atoms:
        if symbol not in _ELEMENTS:
            raise ValueError(f"element {symbol} not tabulated")
        elem = _ELEMENTS[symbol]
        center = np.asarray(xyz, dtype=float)
        z1 = elem["zeta1s"] ** 2
        funcs.append(BasisFunction(
            center, (0, 0, 0),
            [Primitive(a * z1, c) for a, c in _STO3G_1S]).normalize())
        if elem["zeta2sp"] is not None:
            z2 = elem["zeta2sp"] ** 2
            funcs.append(BasisFunction(
                center, (0, 0, 0),
                [Primitive(a * z2, c) for a, c in _STO3G_2S]).normalize())
            for lmn in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
                funcs.append(BasisFunction(
                    center, lmn,
                    [Primitive(a * z2, c) for a, c in _STO3G_2P]).normalize())
    return funcs


def _hermite_e(i, j, t, qx, a, b):
    """Hermite expansion coefficient E_t^{ij} along one dimension."""
    p = a + b
    q = a * b / p
    if t < 0 or t > i + j:
        return 0.0
    if i == j == t == 0:
        return math.exp(-q * qx * qx)
    if j == 0:
        return ((1.0 / (2.0 * p)) * _hermite_e(i - 1, j, t - 1, qx, a, b)
                - (q * qx / a) * _hermite_e(i - 1, j, t, qx, a, b)
                + (t + 1) * _hermite_e(i - 1, j, t + 1, qx, a, b))
    return ((1.0 / (2.0 * p)) * _hermite_e(i, j - 1, t - 1, qx, a, b)
            + (q * qx / b) * _hermite_e(i, j - 1, t, qx, a, b)
            + (t + 1) * _hermite_e(i, j - 1, t + 1, qx, a, b))


def _overlap_prim(a, lmn1, A, b, lmn2, B):
    p = a + b
    s = 1.0
    for d in range(3):
        s *= _hermite_e(lmn1[d], lmn2[d], 0, A[d] - B[d], a, b)
    return s * (math.pi / p) ** 1.5


def _kinetic_prim(a, lmn1, A, b, lmn2, B):
    l2, m2, n2 = lmn2
    term0 = b * (2 * (l2 + m2 + n2) + 3) * _overlap_prim(a, lmn1, A, b, lmn2, B)
    term1 = -2.0 * b * b * (
        _overlap_prim(a, lmn1, A, b, (l2 + 2, m2, n2), B)
        + _overlap_prim(a, lmn1, A, b, (l2, m2 + 2, n2), B)
        + _overlap_prim(a, lmn1, A, b, (l2, m2, n2 + 2), B))
    term2 = -0.5 * (
        l2 * (l2 - 1) * _overlap_prim(a, lmn1, A, b, (l2 - 2, m2, n2), B)
        + m2 * (m2 - 1) * _overlap_prim(a, lmn1, A, b, (l2, m2 - 2, n2), B)
        + n2 * (n2 - 1) * _overlap_prim(a, lmn1, A, b, (l2, m2, n2 - 2), B))
    return term0 + term1 + term2


def boys(nmax, t):
    """Boys function values F_0..F_nmax at t, by downward recursion."""
    out = np.empty(nmax + 1)
    if t < 1e-13:
        for n in range(nmax + 1):
            out[n] = 1.0 / (2 * n + 1) - t / (2 * n + 3)
        return out
    s = nmax + 0.5
    out[nmax] = math.exp(gammaln(s)) * gammainc(s, t) / (2.0 * t ** s)
    expt = math.exp(-t)
    for n in range(nmax - 1, -1, -1):
        out[n] = (2.0 * t * out[n + 1] + expt) / (2 * n + 1)
    return out


def _hermite_coulomb(t, u, v, n, p, PC, fns):
    """Hermite Coulomb integral R_{tuv}^n by recursion."""
    if t == u == v == 0:
        return (-2.0 * p) ** n * fns[n]
    if t > 0:
        val = PC[0] * _hermite_coulomb(t - 1, u, v, n + 1, p, PC, fns)
        if t > 1:
            val += (t - 1) * _hermite_coulomb(t - 2, u, v, n + 1, p, PC, fns)
        return val
    if u > 0:
        val = PC[1] * _hermite_coulomb(t, u - 1, v, n + 1, p, PC, fns)
        if u > 1:
            val += (u - 1) * _hermite_coulomb(t, u - 2, v, n + 1, p, PC, fns)
        return val
    val = PC[2] * _hermite_coulomb(t, u, v - 1, n + 1, p, PC, fns)
    if v > 1:
        val += (v - 1) * _hermite_coulomb(t, u, v - 2, n + 1, p, PC, fns)
    return val


def _nuclear_prim(a, lmn1, A, b, lmn2, B, C):
    p = a + b
    P = (a * np.asarray(A) + b * np.asarray(B)) / p
    PC = P - np.asarray(C)
    rpc2 = float(PC @ PC)
    l1, m1, n1 = lmn1
    l2, m2, n2 = lmn2
    nmax = l1 + m1 + n1 + l2 + m2 + n2
    fns = boys(nmax, p * rpc2)
    val = 0.0
    for t in range(l1 + l2 + 1):
        et = _hermite_e(l1, l2, t, A[0] - B[0], a, b)
        if et == 0.0:
            continue
        for u in range(m1 + m2 + 1):
            eu = _hermite_e(m1, m2, u, A[1] - B[1], a, b)
            if eu == 0.0:
                continue
            for v in range(n1 + n2 + 1):
                ev = _hermite_e(n1, n2, v, A[2] - B[2], a, b)
                if ev == 0.0:
                    continue
                val += et * eu * ev * _hermite_coulomb(t, u, v, 0, p, PC, fns)
    return 2.0 * math.pi / p * val


def _eri_prim(a, lmn1, A, b, lmn2, B, c, lmn3, C, d, lmn4, D):
    p = a + b
    q = c + d
    omega = p * q / (p + q)
    P = (a * np.asarray(A) + b * np.asarray(B)) / p
    Q = (c * np.asarray(C) + d * np.asarray(D)) / q
    PQ = P - Q
    rpq2 = float(PQ @ PQ)
    l1, m1, n1 = lmn1
    l2, m2, n2 = lmn2
    l3, m3, n3 = lmn3
    l4, m4, n4 = lmn4
    nmax = l1 + m1 + n1 + l2 + m2 + n2 + l3 + m3 + n3 + l4 + m4 + n4
    fns = boys(nmax, omega * rpq2)
    val = 0.0
    for t in range(l1 + l2 + 1):
        e1t = _hermite_e(l1, l2, t, A[0] - B[0], a, b)
        if e1t == 0.0:
            continue
        for u in range(m1 + m2 + 1):
            e1u = _hermite_e(m1, m2, u, A[1] - B[1], a, b)
            if e1u == 0.0:
                continue
            for v in range(n1 + n2 + 1):
                e1v = _hermite_e(n1, n2, v, A[2] - B[2], a, b)
                if e1v == 0.0:
                    continue
                for tt in range(l3 + l4 + 1):
                    e2t = _hermite_e(l3, l4, tt, C[0] - D[0], c, d)
                    if e2t == 0.0:
                        continue
                    for uu in range(m3 + m4 + 1):
                        e2u = _hermite_e(m3, m4, uu, C[1] - D[1], c, d)
                        if e2u == 0.0:
                            continue
                        for vv in range(n3 + n4 + 1):
                            e2v = _hermite_e(n3, n4, vv, C[2] - D[2], c, d)
                            if e2v == 0.0:
                                continue
                            sign = (-1.0) ** (tt + uu + vv)
                            val += (e1t * e1u * e1v * e2t * e2u * e2v * sign
                                    * _hermite_coulomb(t + tt, u + uu, v + vv,
                                                       0, omega, PQ, fns))
    return val * 2.0 * math.pi ** 2.5 / (p * q * math.sqrt(p + q))


def _contracted(func, prim_kernel, *others):
    """Sum a primitive kernel over all primitive combinations.

    The kernel receives (alpha, lmn, center) triples, one per function.
    """
    funcs = (func,) + others
    val = 0.0

    def rec(idx, coeff, args):
        nonlocal val
        if idx == len(funcs):
            val += coeff * prim_kernel(*args)
            return
        f = funcs[idx]
        for p in f.prims:
            rec(idx + 1, coeff * p.coeff, args + (p.alpha, f.lmn, f.center))

    rec(0, 1.0, ())
    return val


def overlap_matrix(basis):
    n = len(basis)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            v = _contracted(basis[i], _overlap_prim, basis[j])
            out[i, j] = out[j, i] = v
    return out


def kinetic_matrix(basis):
    n = len(basis)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            v = _contracted(basis[i], _kinetic_prim, basis[j])
            out[i, j] = out[j, i] = v
    return out


def nuclear_matrix(basis, atoms):
    n = len(basis)
    out = np.zeros((n, n))
    for sym, xyz in atoms:
        Z = _ELEMENTS[sym]["Z"]
        C = np.asarray(xyz, dtype=float)
        for i in range(n):
            for j in range(i + 1):
                v = 0.0
                for pa in basis[i].prims:
                    for pb in basis[j].prims:
                        v += pa.coeff * pb.coeff * _nuclear_prim(
                            pa.alpha, basis[i].lmn, basis[i].center,
                            pb.alpha, basis[j].lmn, basis[j].center, C)
                out[i, j] -= Z * v
                if i != j:
                    out[j, i] = out[i, j]
    return out


def eri_tensor(basis):
    n = len(basis)
    out = np.zeros((n, n, n, n))
    pair = [(i, j) for i in range(n) for j in range(i + 1)]
    for ij_idx, (i, j) in enumerate(pair):
        for k, l in pair[: ij_idx + 1]:
            v = 0.0
            for pa in basis[i].prims:
                for pb in basis[j].prims:
                    for pc in basis[k].prims:
                        for pd in basis[l].prims:
                            v += (pa.coeff * pb.coeff * pc.coeff * pd.coeff
                                  * _eri_prim(
                                      pa.alpha, basis[i].lmn, basis[i].center,
                                      pb.alpha, basis[j].lmn, basis[j].center,
                                      pc.alpha, basis[k].lmn, basis[k].center,
                                      pd.alpha, basis[l].lmn, basis[l].center))
            for a, b in ((i, j), (j, i)):
                for c, d in ((k, l), (l, k)):
                    out[a, b, c, d] = v
                    out[c, d, a, b] = v
    return out


def nuclear_repulsion(atoms):
    e = 0.0
    for i, (si, xi) in enumerate(atoms):
        for j, (sj, xj) in enumerate(atoms[:i]):
            r = np.linalg.norm(np.asarray(xi, float) - np.asarray(xj, float))
            e += _ELEMENTS[si]["Z"] * _ELEMENTS[sj]["Z"] / r
    return e


@dataclass
class AOIntegrals:
    S: np.ndarray
    Hcore: np.ndarray
    eri: np.ndarray
    enuc: float
    n_electrons: int


def ao_integrals(atoms):
    basis = build_basis(atoms)
    S = overlap_matrix(basis)
    T = kinetic_matrix(basis)
    V = nuclear_matrix(basis, atoms)
    eri = eri_tensor(basis)
    nelec = sum(_ELEMENTS[s]["Z"] for s, _ in atoms)
    return AOIntegrals(S, T + V, eri, nuclear_repulsion(atoms), nelec)


class SCFError(RuntimeError):
    pass


def rhf(ao, e_tol=1e-13, err_tol=1e-11, max_iter=300, C_init=None):
    """Closed-shell restricted Hartree-Fock with DIIS.

    Returns:
        (energy, C, eps) with MO coefficients in columns and orbital
        energies in ascending order.
    """
    nocc = ao.n_electrons // 2
    if ao.n_electrons % 2:
        raise SCFError("open-shell system passed to RHF")
    s_val, s_vec = np.linalg.eigh(ao.S)
    if np.min(s_val) < 1e-10:
        raise SCFError("near-singular overlap matrix")
    X = s_vec @ np.diag(s_val ** -0.5) @ s_vec.T
    if C_init is not None:
        F = fock(ao, density(C_init, nocc))
    else:
        F = ao.Hcore.copy()
    energy = 0.0
    diis_f, diis_e = [], []
    for it in range(max_iter):
        err = None
        if it > 0:
            D = density(C, nocc)
            F = fock(ao, D)
            err = X.T @ (F @ D @ ao.S - ao.S @ D @ F) @ X
            diis_f.append(F.copy())
            diis_e.append(err)
            if len(diis_f) > 8:
                diis_f.pop(0)
                diis_e.pop(0)
            if len(diis_f) > 1:
                F = _diis_extrapolate(diis_f, diis_e)
        Fp = X.T @ F @ X
        eps, Cp = np.linalg.eigh(Fp)
        C = X @ Cp
        D = density(C, nocc)
        F_true = fock(ao, D)
        new_energy = 0.5 * np.sum(D * (ao.Hcore + F_true)) + ao.enuc
        delta = abs(new_energy - energy)
        energy = new_energy
        max_err = np.max(np.abs(
            X.T @ (F_true @ D @ ao.S - ao.S @ D @ F_true) @ X))
        if it > 2 and delta < e_tol and max_err < err_tol:
            return energy, _fix_column_signs(C), eps
    raise SCFError(f"SCF failed to converge (last error {max_err:.2e})")


def density(C, nocc):
    Cocc = C[:, :nocc]
    return 2.0 * Cocc @ Cocc.T


def fock(ao, D):
    J = np.einsum("ls,mnls->mn", D, ao.eri, optimize=True)
    K = np.einsum("ls,mlsn->mn", D, ao.eri, optimize=True)
    return ao.Hcore + J - 0.5 * K


def _diis_extrapolate(fs, errs):
    m = len(fs)
    B = -np.ones((m + 1, m + 1))
    B[m, m] = 0.0
    for i in range(m):
        for j in range(m):
            B[i, j] = np.sum(errs[i] * errs[j])
    rhs = np.zeros(m + 1)
    rhs[m] = -1.0
    try:
        w = np.linalg.solve(B, rhs)
    except np.linalg.LinAlgError:
        return fs[-1]
    out = np.zeros_like(fs[0])
    for i in range(m):
        out += w[i] * fs[i]
    return out


def _fix_column_signs(C):
    """Deterministic orbital gauge: largest-magnitude entry positive."""
    C = C.copy()
    for k in range(C.shape[1]):
        idx = np.argmax(np.abs(C[:, k]))
        if C[idx, k] < 0:
            C[:, k] *= -1
    return C


def frozen_gauge(C0, S):
    """Symmetric re-orthonormalization of base orbitals in a displaced basis.

    C(R) = C0 [C0^T S(R) C0]^(-1/2) spans the same space as C0, is exactly
    orthonormal under S(R), smooth in R, and reduces to C0 at the base point.
    """
    M = C0.T @ S @ C0
    val, vec = np.linalg.eigh(M)
    if np.min(val) < 1e-8:
        raise SCFError("frozen gauge breaks down: overlap projection singular")
    M_inv_sqrt = vec @ np.diag(val ** -0.5) @ vec.T
    return C0 @ M_inv_sqrt


def mo_integrals(ao, C):
    """One- and two-electron integrals in the molecular-orbital basis."""
    h1 = C.T @ ao.Hcore @ C
    h2 = np.einsum("mp,mnls->pnls", C, ao.eri, optimize=True)
    h2 = np.einsum("nq,pnls->pqls", C, h2, optimize=True)
    h2 = np.einsum("lr,pqls->pqrs", C, h2, optimize=True)
    h2 = np.einsum("st,pqrs->pqrt", C, h2, optimize=True)
    return h1, h2
