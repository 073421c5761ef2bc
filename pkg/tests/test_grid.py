"""Grid ingestion, stencil algebra, and Hamiltonian derivatives."""

import json
import shutil

import numpy as np
import pytest

import helpers
from vqederiv.grid import (GaugeError, Geometry, GridError, canonical_label,
                           coeff_derivative, from_integral_sets,
                           label_displacement, load_grid, stencil_labels,
                           validate_grid)
from vqederiv.integrals import IntegralSet
from vqederiv.pauli import linear_combine


def scalar_grid(core_of, labels, step=0.01, h1_of=None):
    """Synthetic 3-coordinate grid whose coefficients follow given functions."""
    geometry = Geometry(("X",), np.array([1.0]), np.zeros(3))
    sets = []
    for label in labels:
        disp = label_displacement(label, 3, step)
        h1 = np.array([[0.1]]) if h1_of is None else np.array(
            [[h1_of(disp)]], dtype=float)
        sets.append((label, IntegralSet(
            1, 1, 1, h1, np.full((1, 1, 1, 1), 0.05), float(core_of(disp)))))
    return from_integral_sets(geometry, step, sets)


ALL_LABELS = [()]
for c in (1, 2, 3):
    ALL_LABELS += [(c,), (-c,), (c, c), (-c, -c)]
for a in (1, 2, 3):
    for b in range(a + 1, 4):
        ALL_LABELS += [(a, b), (a, -b), (-a, b), (-a, -b)]


class TestLabels:
    def test_canonical_ordering(self):
        assert canonical_label([-1, 2, 1]) == (1, -1, 2)
        assert canonical_label([3, -3]) == (3, -3)
        assert canonical_label([]) == ()

    def test_zero_entry_rejected(self):
        with pytest.raises(GridError):
            canonical_label([0])

    def test_displacement(self):
        disp = label_displacement((1, -2, 1), 3, 0.5)
        assert np.allclose(disp, [1.0, -0.5, 0.0])

    def test_displacement_out_of_range(self):
        with pytest.raises(GridError):
            label_displacement((4,), 3, 0.5)


class TestStencils:
    def test_first_order(self):
        points, power = stencil_labels(1, (0,))
        assert power == 1
        assert points == {(1,): 0.5, (-1,): -0.5}

    def test_second_diagonal(self):
        points, power = stencil_labels(2, (1, 1))
        assert power == 2
        assert points == {(2,): 1.0, (): -2.0, (-2,): 1.0}

    def test_second_mixed(self):
        points, power = stencil_labels(2, (0, 1))
        assert power == 2
        assert points == {(1, 2): 0.25, (1, -2): -0.25,
                          (-1, 2): -0.25, (-1, -2): 0.25}

    def test_third_diagonal_only(self):
        points, power = stencil_labels(3, (0, 0, 0))
        assert power == 3
        assert points[(1, 1)] == 0.5
        with pytest.raises(GridError):
            stencil_labels(3, (0, 0, 1))

    def test_arity_checked(self):
        with pytest.raises(GridError):
            stencil_labels(2, (0,))
        with pytest.raises(GridError):
            stencil_labels(5, (0,) * 5)

    @pytest.mark.parametrize("order,coords,f,want", [
        (1, (0,), lambda r: 2.0 + 3.0 * r[0] + 4.0 * r[0] ** 2, 3.0),
        (2, (0, 0), lambda r: 1.0 + 2.5 * r[0] ** 2, 5.0),
        (2, (0, 1), lambda r: -1.5 * r[0] * r[1], -1.5),
        (3, (0, 0, 0), lambda r: 0.5 * r[0] ** 3, 3.0),
        (4, (0, 0, 0, 0), lambda r: r[0] ** 4 / 12.0, 2.0),
    ])
    def test_exact_on_polynomials(self, order, coords, f, want):
        grid = scalar_grid(f, ALL_LABELS)
        got = coeff_derivative(grid, order, coords).core_energy
        assert got == pytest.approx(want, abs=1e-8)


class TestCoeffDerivative:
    def test_constant_grid_zero(self):
        grid = scalar_grid(lambda r: 7.0, ALL_LABELS)
        for order, coords in ((1, (0,)), (2, (0, 0)), (2, (0, 2))):
            d = coeff_derivative(grid, order, coords)
            assert d.core_energy == 0.0
            assert np.all(d.h1 == 0.0)
            assert np.all(d.h2 == 0.0)

    def test_h1_tracked_alongside_core(self):
        grid = scalar_grid(lambda r: 0.0, ALL_LABELS,
                           h1_of=lambda r: 1.0 + 2.0 * r[0])
        assert coeff_derivative(grid, 1, (0,)).h1[0, 0] == pytest.approx(2.0)

    def test_missing_stencil_point_raises(self):
        grid = scalar_grid(lambda r: 0.0, [(), (1,), (-1,)])
        coeff_derivative(grid, 2, (0, 0))
        with pytest.raises(GridError):
            coeff_derivative(grid, 2, (0, 1))

    def test_linearity_in_grid_values(self):
        f = lambda r: 1.0 + 2.0 * r[0] - 0.7 * r[0] * r[1]
        g = lambda r: -0.3 + 0.9 * r[1] + 1.1 * r[0] * r[1]
        grid_f = scalar_grid(f, ALL_LABELS)
        grid_g = scalar_grid(g, ALL_LABELS)
        grid_fg = scalar_grid(lambda r: f(r) + 2.0 * g(r), ALL_LABELS)
        for order, coords in ((1, (1,)), (2, (0, 1))):
            lhs = coeff_derivative(grid_fg, order, coords).core_energy
            rhs = (coeff_derivative(grid_f, order, coords).core_energy
                   + 2.0 * coeff_derivative(grid_g, order, coords).core_energy)
            assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_mixed_symmetric_bitwise(self, h2_grid):
        ij = coeff_derivative(h2_grid, 2, (2, 5))
        ji = coeff_derivative(h2_grid, 2, (5, 2))
        assert np.array_equal(ij.h1, ji.h1)
        assert np.array_equal(ij.h2, ji.h2)
        assert ij.core_energy == ji.core_energy


class TestHamiltonianDerivative:
    def test_order_zero_is_base(self, h2_grid):
        d0 = h2_grid.hamiltonian_derivative(0, ())
        base = h2_grid.hamiltonian(())
        assert d0.terms == base.terms
        assert d0.constant == base.constant

    def test_constant_grid_zero_operator(self):
        grid = scalar_grid(lambda r: 3.0, ALL_LABELS)
        d = grid.hamiltonian_derivative(1, (0,))
        assert d.terms == {}
        assert d.constant == 0.0

    def test_equals_stencil_linear_combine(self, h2_grid):
        # compare at the undivided stencil scale: multiplying the derivative
        # back by h^power keeps both sides O(1)-conditioned so the 1e-12
        # agreement tests assembly linearity, not float division noise
        from vqederiv.pauli import assemble_hamiltonian
        for order, coords in ((1, (2,)), (2, (2, 2)), (2, (2, 5))):
            direct = h2_grid.hamiltonian_derivative(order, coords)
            points, power = stencil_labels(order, coords)
            h = h2_grid.step_bohr ** power
            recombined = linear_combine(
                [(w, assemble_hamiltonian(h2_grid.points[lab]))
                 for lab, w in points.items()])
            gap = abs(h * direct.constant - recombined.constant)
            for key in set(direct.terms) | set(recombined.terms):
                gap = max(gap, abs(h * direct.terms.get(key, 0.0)
                                   - recombined.terms.get(key, 0.0)))
            assert gap < 1e-12

    def test_h1_derivative_matches_richardson(self, h2_grid):
        c = 2
        h = h2_grid.step_bohr
        v_h = (h2_grid.points[(c + 1,)].h1
               - h2_grid.points[(-(c + 1),)].h1) / (2 * h)
        v_2h = (h2_grid.points[(c + 1, c + 1)].h1
                - h2_grid.points[(-(c + 1), -(c + 1))].h1) / (4 * h)
        richardson = (4.0 * v_h - v_2h) / 3.0
        got = coeff_derivative(h2_grid, 1, (c,)).h1
        assert abs(got[0, 0] - richardson[0, 0]) < 1e-6

    def test_feynman_hellmann_cross_check(self, h2_grid):
        from vqederiv.oracle import exact_ground_state, ground_energy
        from vqederiv.sim import expval
        c = 2
        pair = exact_ground_state(h2_grid.hamiltonian(()), sector=(0, 1))
        analytic = expval(pair.state, h2_grid.hamiltonian_derivative(1, (c,)))
        h = h2_grid.step_bohr
        fd = (ground_energy(h2_grid, (c + 1,))
              - ground_energy(h2_grid, (-(c + 1),))) / (2 * h)
        assert analytic == pytest.approx(fd, abs=1e-6)


class TestValidateGrid:
    def test_smooth_grid_clean(self, h2_grid):
        report = validate_grid(h2_grid)
        assert report.ok
        assert report.violations == []
        assert report.worst_jump < report.bound

    def corrupted(self):
        grid = scalar_grid(lambda r: 0.0, ALL_LABELS)
        # orbital sign flip at one point: h1 row negated
        bad = grid.points[(1,)]
        grid.points[(1,)] = IntegralSet(
            bad.n_orbitals, bad.n_electrons, bad.ms2, -10.0 * bad.h1,
            bad.h2, bad.core_energy)
        return grid

    def test_sign_flip_flagged(self):
        grid = self.corrupted()
        report = validate_grid(grid)
        assert not report.ok
        assert any([1] in pair[:2] for pair in report.violations)

    def test_flagged_grid_refuses_derivatives(self):
        grid = self.corrupted()
        validate_grid(grid)
        with pytest.raises(GaugeError):
            coeff_derivative(grid, 1, (0,))
        grid.allow_gauge_violations = True
        coeff_derivative(grid, 1, (0,))

    def test_constant_grid_clean(self):
        report = validate_grid(scalar_grid(lambda r: 1.0, ALL_LABELS))
        assert report.ok


class TestLoadGrid:
    def test_h2_structure(self, h2_grid):
        assert h2_grid.n_coords == 6
        assert h2_grid.n_qubits == 4
        assert h2_grid.n_electrons == 2
        assert len(h2_grid.points) == 85
        assert () in h2_grid.points
        assert h2_grid.step_bohr == pytest.approx(0.005)

    def test_missing_base_rejected(self, tmp_path):
        src = helpers.TESTDATA / "h2_hessian"
        manifest = json.loads((src / "manifest.json").read_text())
        manifest["points"] = [p for p in manifest["points"]
                              if p["label"] != []]
        for p in manifest["points"]:
            shutil.copy(src / p["file"], tmp_path / p["file"])
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(GridError):
            load_grid(tmp_path / "manifest.json")

    def test_missing_point_file_rejected(self, tmp_path):
        src = helpers.TESTDATA / "h2_hessian"
        manifest = json.loads((src / "manifest.json").read_text())
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))
        shutil.copy(src / "base.fcidump", tmp_path / "base.fcidump")
        with pytest.raises(GridError):
            load_grid(tmp_path / "manifest.json")

    def test_duplicate_label_rejected(self, tmp_path):
        src = helpers.TESTDATA / "h2_hessian"
        manifest = json.loads((src / "manifest.json").read_text())
        base_entry = next(p for p in manifest["points"] if p["label"] == [])
        manifest["points"].append(dict(base_entry))
        for p in manifest["points"]:
            shutil.copy(src / p["file"], tmp_path / p["file"])
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(GridError):
            load_grid(tmp_path / "manifest.json")


class TestGeometry:
    def test_coordinate_masses(self):
        geom = Geometry(("A", "B"), np.array([2.0, 3.0]), np.zeros(6))
        assert np.allclose(geom.coordinate_masses(),
                           [2.0, 2.0, 2.0, 3.0, 3.0, 3.0])

    def test_counts(self, h2_grid):
        geom = h2_grid.geometry
        assert geom.n_atoms == 2
        assert geom.n_coords == 6
        assert geom.symbols == ("H", "H")
