"""Port paths, excitation/probe patterns, and the Z/S conversions."""

import numpy as np
import pytest

from fitwave import MaterialMap, build_grid, build_material_diagonals, oracle
from fitwave.ports import (
    Port,
    build_rhs,
    current_vector,
    port_edges,
    probe_voltage,
    s_from_z,
    unit_pattern,
    validate_port,
    z_from_s,
    z_parameters,
)


@pytest.fixture
def cube():
    planes = [0.0, 0.01, 0.02, 0.03]
    g = build_grid(planes, planes, planes)
    diag = build_material_diagonals(g, MaterialMap.vacuum(g))
    return g, diag


class TestPortValidation:
    def test_needs_two_nodes(self):
        with pytest.raises(ValueError, match="at least two nodes"):
            Port(nodes=((1, 1, 1),))

    def test_zero_amplitude_rejected(self):
        with pytest.raises(ValueError, match="nonzero"):
            Port(nodes=((0, 0, 0), (1, 0, 0)), amplitude=0.0)

    def test_bad_role(self):
        with pytest.raises(ValueError, match="role"):
            Port(nodes=((0, 0, 0), (1, 0, 0)), role="sink")

    def test_role_flags(self):
        nodes = ((0, 0, 0), (1, 0, 0))
        assert Port(nodes=nodes).is_source and Port(nodes=nodes).is_probe
        p = Port(nodes=nodes, role="source")
        assert p.is_source and not p.is_probe
        p = Port(nodes=nodes, role="probe")
        assert p.is_probe and not p.is_source

    def test_nodes_coerced_to_int_tuples(self):
        p = Port(nodes=[[np.int64(1), 1.0, 2], (1, 1, 2)])
        assert p.nodes == ((1, 1, 2), (1, 1, 2))
        assert all(type(c) is int for nd in p.nodes for c in nd)


class TestPortEdges:
    def test_forward_path_along_x(self, cube):
        g, _ = cube
        p = Port(nodes=((0, 1, 1), (1, 1, 1), (2, 1, 1)))
        assert port_edges(g, p) == [
            (g.edge_index(0, 1, 1, 0), 1),
            (g.edge_index(1, 1, 1, 0), 1),
        ]

    def test_reversed_path_flips_signs_keeps_anchor(self, cube):
        g, _ = cube
        fwd = Port(nodes=((0, 1, 1), (1, 1, 1), (2, 1, 1)))
        rev = Port(nodes=((2, 1, 1), (1, 1, 1), (0, 1, 1)))
        assert port_edges(g, rev) == [(e, -s) for e, s in port_edges(g, fwd)][::-1]

    def test_bent_path(self, cube):
        g, _ = cube
        p = Port(nodes=((1, 1, 0), (1, 1, 1), (1, 2, 1)))
        assert port_edges(g, p) == [
            (g.edge_index(1, 1, 0, 2), 1),
            (g.edge_index(1, 1, 1, 1), 1),
        ]

    @pytest.mark.parametrize(
        "step", [(2, 2, 1), (3, 1, 1), (1, 1, 3)], ids=["diagonal", "two-cells", "jump"]
    )
    def test_non_unit_steps_rejected(self, cube, step):
        g, _ = cube
        with pytest.raises(ValueError, match="single grid-edge step"):
            port_edges(g, Port(nodes=((1, 1, 1), step)))

    def test_path_leaving_grid_rejected(self, cube):
        g, _ = cube
        # (3,1,1) is the last node plane; stepping to (4,1,1) uses the
        # degenerate x-edge slot at i=3
        with pytest.raises(ValueError, match="outside the grid"):
            port_edges(g, Port(nodes=((3, 1, 1), (4, 1, 1))))
        with pytest.raises(ValueError, match="segment 0"):
            port_edges(g, Port(nodes=((0, 1, 1), (-1, 1, 1))))

    def test_masked_edge_rejected_with_location(self, cube):
        g, diag = cube
        # x-edge in the z=0 wall plane is tangential to a PEC wall
        p = Port(nodes=((1, 0, 0), (2, 0, 0)), name="feed")
        with pytest.raises(ValueError, match=r"feed.*edge \(1,0,0,x\) which is masked"):
            validate_port(g, p, diag.edge_mask)

    def test_validate_returns_edges_when_clean(self, cube):
        g, diag = cube
        p = Port(nodes=((1, 1, 0), (1, 1, 1)))
        assert validate_port(g, p, diag.edge_mask) == port_edges(g, p)


class TestPatterns:
    def test_current_vector_entries(self, cube):
        g, _ = cube
        p = Port(nodes=((2, 1, 1), (1, 1, 1), (1, 2, 1)), amplitude=0.25)
        j = current_vector(g, p)
        assert j.dtype == np.float64
        want = np.zeros(g.n_edges)
        want[g.edge_index(1, 1, 1, 0)] = -0.25
        want[g.edge_index(1, 1, 1, 1)] = 0.25
        np.testing.assert_array_equal(j, want)

    def test_complex_amplitude_gives_complex_vector(self, cube):
        g, _ = cube
        j = current_vector(g, Port(nodes=((1, 1, 0), (1, 1, 1)), amplitude=1 - 2j))
        assert j.dtype == np.complex128
        assert j[g.edge_index(1, 1, 0, 2)] == 1 - 2j

    def test_retraced_segment_cancels(self, cube):
        g, _ = cube
        p = Port(nodes=((1, 1, 1), (2, 1, 1), (1, 1, 1), (1, 2, 1)))
        j = current_vector(g, p)
        assert j[g.edge_index(1, 1, 1, 0)] == 0.0
        assert j[g.edge_index(1, 1, 1, 1)] == 1.0

    def test_unit_pattern_is_signed_inv_sqrt_eps(self, cube):
        g, diag = cube
        p = Port(nodes=((2, 1, 1), (1, 1, 1), (1, 2, 1)), amplitude=3.0)
        u = unit_pattern(g, diag, p)
        assert u.dtype == diag.inv_sqrt_eps.dtype == np.float64
        want = np.zeros(g.n_edges)
        for idx, sign in port_edges(g, p):
            want[idx] = sign * diag.inv_sqrt_eps[idx]
        np.testing.assert_array_equal(u, want)  # amplitude does not enter

    def test_build_rhs_scales_patterns(self, cube):
        g, diag = cube
        p1 = Port(nodes=((1, 1, 0), (1, 1, 1)), amplitude=2.0, name="a")
        p2 = Port(nodes=((2, 1, 0), (2, 1, 1)), amplitude=1j, name="b")
        omega = 2 * np.pi * 1e9
        b = build_rhs(g, diag, [p1, p2], omega)
        assert b.dtype == np.complex128
        want = (-1j * omega) * (
            2.0 * unit_pattern(g, diag, p1) + 1j * unit_pattern(g, diag, p2)
        )
        np.testing.assert_allclose(b, want, rtol=0, atol=0)
        np.testing.assert_array_equal(build_rhs(g, diag, p1, omega), (-2j * omega) * unit_pattern(g, diag, p1))

    @pytest.mark.parametrize("omega", [0.0, -1.0])
    def test_build_rhs_needs_positive_omega(self, cube, omega):
        g, diag = cube
        with pytest.raises(ValueError, match="omega"):
            build_rhs(g, diag, Port(nodes=((1, 1, 0), (1, 1, 1))), omega)

    def test_probe_voltage_is_pattern_dot(self, cube):
        g, diag = cube
        p = Port(nodes=((1, 1, 0), (1, 1, 1), (1, 1, 2)))
        rng = np.random.default_rng(7)
        e = rng.standard_normal(g.n_edges)
        v = probe_voltage(g, diag, p, e)
        assert isinstance(v, float)
        assert v == np.dot(unit_pattern(g, diag, p), e)
        vc = probe_voltage(g, diag, p, e + 0j)
        assert isinstance(vc, complex) and vc == v

    def test_probe_is_complex_on_lossy_scene(self, cube):
        g, _ = cube
        mat = MaterialMap.vacuum(g)
        mat.sigma[1, 1, 1] = 0.05
        diag = build_material_diagonals(g, mat, omega=2 * np.pi * 1e9)
        p = Port(nodes=((1, 1, 1), (1, 1, 2)))
        v = probe_voltage(g, diag, p, np.ones(g.n_edges))
        assert isinstance(v, complex)


class TestNetworkParameters:
    def test_z_parameters_divides_columns(self):
        Z = z_parameters([[2.0, 3.0], [4.0, 6.0]], [2.0, 3.0])
        np.testing.assert_array_equal(Z, [[1.0, 1.0], [2.0, 2.0]])

    def test_z_parameters_shape_mismatch(self):
        with pytest.raises(ValueError, match="excitations"):
            z_parameters([[1.0, 2.0]], [1.0, 2.0, 3.0])
        with pytest.raises(ValueError, match="excitations"):
            z_parameters([1.0, 2.0], [1.0, 2.0])

    def test_s_known_values(self):
        eye = np.eye(2)
        np.testing.assert_allclose(s_from_z(50.0 * eye), 0.0 * eye, atol=1e-15)
        np.testing.assert_allclose(s_from_z(0.0 * eye), -eye, atol=1e-15)
        np.testing.assert_allclose(s_from_z(150.0 * eye, z0=50.0), 0.5 * eye, atol=1e-15)
        # one-port reactive load: |S| = 1
        s = s_from_z(np.array([[75j]]))
        assert abs(abs(s[0, 0]) - 1.0) < 1e-15

    def test_s_z_round_trip(self):
        rng = np.random.default_rng(3)
        Z = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        Z = 40.0 * (Z + Z.T)  # reciprocal network
        S = s_from_z(Z, z0=75.0)
        np.testing.assert_allclose(z_from_s(S, z0=75.0), Z, rtol=1e-12)
        np.testing.assert_allclose(S, S.T, rtol=1e-12)  # reciprocity carries over

    def test_s_from_z_singular(self):
        with pytest.raises(ValueError, match="condition number"):
            s_from_z(np.array([[-50.0]]), z0=50.0)

    def test_z_from_s_singular(self):
        with pytest.raises(ValueError, match="no impedance representation"):
            z_from_s(np.eye(2))

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            s_from_z(np.ones((2, 3)))


class TestAgainstDenseSolve:
    """Drive a tiny cavity below resonance and check port physics."""

    def setup_method(self):
        planes = np.linspace(0.0, 0.03, 5)
        self.g = build_grid(planes, planes, planes)
        self.diag = build_material_diagonals(self.g, MaterialMap.vacuum(self.g))
        self.system = oracle.dense_assemble(self.g, self.diag)
        self.ports = [
            Port(nodes=((1, 1, 1), (1, 1, 2)), name="p1"),
            Port(nodes=((3, 2, 1), (3, 2, 2)), name="p2"),
        ]
        self.omega = 2 * np.pi * 1.0e9  # far below the ~7 GHz fundamental

    def solve_z(self):
        u = np.zeros((2, 2), dtype=np.complex128)
        for n, drive in enumerate(self.ports):
            b = build_rhs(self.g, self.diag, drive, self.omega)
            e = self.system.solve(b, omega=self.omega)
            for m, probe in enumerate(self.ports):
                u[m, n] = probe_voltage(self.g, self.diag, probe, e)
        return z_parameters(u, np.array([p.amplitude for p in self.ports]))

    def test_lossless_z_is_reactive_and_reciprocal(self):
        Z = self.solve_z()
        scale = np.abs(Z).max()
        assert np.abs(Z.real).max() <= 1e-12 * scale
        assert abs(Z[0, 1] - Z[1, 0]) <= 1e-12 * scale

    def test_amplitude_invariance(self):
        Z = self.solve_z()
        self.ports = [
            Port(nodes=((1, 1, 1), (1, 1, 2)), amplitude=2.5, name="p1"),
            Port(nodes=((3, 2, 1), (3, 2, 2)), amplitude=0.5 - 1j, name="p2"),
        ]
        Z2 = self.solve_z()
        np.testing.assert_allclose(Z2, Z, rtol=1e-12)
