import numpy as np
import pytest

from gr_imaging.em_core import (C0, MU0, MeasurementMatrix, SensorPlacementError, SingularityError,
                                Transmitter, Wavenumber, adjoint_mismatch, apply_adjoint, apply_forward,
                                assemble_measurement_matrix, dyadic_green, incident_field, point_responses,
                                projected_green, scalar_green)
from gr_imaging.scene import ImagingGrid


def fd_dyadic(r, r_src, k0, h=1e-4):
    """(I + grad grad / k0^2) g by central differences of the scalar Green's function."""
    H = np.zeros((3, 3), dtype=complex)
    e = np.eye(3) * h
    for i in range(3):
        for j in range(3):
            H[i, j] = (scalar_green(r + e[i] + e[j], r_src, k0) - scalar_green(r + e[i] - e[j], r_src, k0)
                       - scalar_green(r - e[i] + e[j], r_src, k0)
                       + scalar_green(r - e[i] - e[j], r_src, k0)) / (4 * h * h)
    return scalar_green(r, r_src, k0) * np.eye(3) + H / k0**2


class TestScalarGreen:
    def test_static_limit(self):
        assert scalar_green([1, 0, 0], [0, 0, 0], 0.0) == pytest.approx(1 / (4 * np.pi))
        assert abs(1 / (4 * np.pi) - 0.0795775) < 1e-7

    def test_full_wavelength_phase(self):
        g = scalar_green([0, 0, 1], [0, 0, 0], 2 * np.pi)
        assert g.real == pytest.approx(1 / (4 * np.pi), rel=1e-12)
        assert abs(g.imag) < 1e-15

    def test_amplitude_decay(self):
        g = scalar_green([0, 2, 0], [0, 0, 0], np.pi)
        assert g.real == pytest.approx(1 / (8 * np.pi), rel=1e-12)
        assert abs(g.imag) < 1e-15

    def test_coincident_points(self):
        with pytest.raises(SingularityError):
            scalar_green([1, 2, 3], [1, 2, 3], 1.0)


class TestDyadicGreen:
    def test_matches_finite_difference_operator(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            r, r0 = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
            k0 = rng.uniform(2, 20)
            G = dyadic_green(r, r0, k0)
            assert np.max(np.abs(G - fd_dyadic(r, r0, k0))) < 1e-5 * np.max(np.abs(G))

    def test_reciprocity(self):
        rng = np.random.default_rng(2)
        r, r0 = rng.normal(size=(100, 3)), rng.normal(size=(100, 3))
        G = dyadic_green(r, r0, 7.3)
        Gt = np.swapaxes(dyadic_green(r0, r, 7.3), -1, -2)
        assert np.max(np.abs(G - Gt) / np.abs(G)) < 1e-12

    def test_transverse_isotropy(self):
        G = dyadic_green([0.1, 0.2, 1.5], [0.1, 0.2, 0.0], 12.0)
        assert G[0, 0] == pytest.approx(G[1, 1], rel=1e-14)
        assert abs(G[0, 1]) < 1e-15

    def test_longitudinal_term_small_in_far_field(self):
        k0 = 50.0
        G = dyadic_green([0, 0, 1000 / k0], [0, 0, 0], k0)
        assert abs(G[2, 2]) / abs(G[0, 0]) < 0.01

    @pytest.mark.parametrize("kr", [101.0, 300.0, 2000.0])
    def test_far_field_reduction(self, kr):
        rng = np.random.default_rng(int(kr))
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        k0 = 10.0
        R = kr / k0
        G = dyadic_green(R * u, [0, 0, 0], k0)
        far = scalar_green(R * u, [0, 0, 0], k0) * (np.eye(3) - np.outer(u, u))
        assert np.linalg.norm(G - far) / np.linalg.norm(far) < 3 / kr

    def test_domain_errors(self):
        with pytest.raises(SingularityError):
            dyadic_green([0, 0, 0], [0, 0, 0], 1.0)
        with pytest.raises(ValueError):
            dyadic_green([0, 0, 1], [0, 0, 0], 0.0)

    def test_projected_rows_match_full_dyad(self):
        rng = np.random.default_rng(3)
        rx, src = rng.normal(size=(4, 3)), rng.normal(size=(5, 3)) + 5
        e = rng.normal(size=(4, 3))
        e /= np.linalg.norm(e, axis=1, keepdims=True)
        pg = projected_green(e, rx, src, 9.0)
        full = np.einsum("sc,sncd->snd", e, dyadic_green(rx[:, None], src[None], 9.0))
        assert np.allclose(pg, full, rtol=1e-13, atol=0)


class TestIncidentField:
    k = Wavenumber.from_frequency(2e9)

    def test_prefactor(self):
        r, t = np.array([0.3, -0.5, 0.2]), np.array([0.0, 0.0, 0.0])
        E = incident_field(r, t, "z", self.k)
        expected = 1j * self.k.omega * MU0 * dyadic_green(r, t, self.k) @ [0, 0, 1]
        assert np.allclose(E, expected, rtol=1e-14)
        assert self.k.omega / self.k.k0 == pytest.approx(C0)

    def test_linear_in_polarization(self):
        r, t = np.array([0.3, -0.5, 0.2]), np.zeros(3)
        combo = incident_field(r, t, [1.0, 1.0, 0.0], self.k) * np.sqrt(2)
        parts = incident_field(r, t, "x", self.k) + incident_field(r, t, "y", self.k)
        assert np.allclose(combo, parts, rtol=1e-13)

    def test_far_field_of_z_dipole_is_z_polarized(self):
        E = incident_field([200.0, 0, 0], [0, 0, 0], "z", self.k)
        assert abs(E[2]) > 100 * max(abs(E[0]), abs(E[1]))

    def test_swap_is_transpose_action(self):
        r, t = np.array([0.3, -0.5, 0.2]), np.array([-0.1, 0.4, 0.9])
        p = np.array([0.6, 0.0, 0.8])
        swapped = incident_field(t, r, p, self.k)
        G = dyadic_green(r, t, self.k)
        assert np.allclose(swapped, 1j * self.k.omega * MU0 * G.T @ p, rtol=1e-13)


@pytest.fixture
def small_grid():
    return ImagingGrid((0.0, -0.6, 0.5), (0.6, 0.4, 0.4), (3, 2, 2))


def _rx(n=5, seed=0):
    rng = np.random.default_rng(seed)
    return np.column_stack([rng.uniform(-0.5, 0.5, n), np.zeros(n), rng.uniform(0, 1, n)])


class TestMeasurementMatrix:
    def test_shape(self, small_grid):
        A = assemble_measurement_matrix(small_grid, _rx(5), Transmitter(np.array([0.6, 0, 0])), 30.0)
        assert A.shape == (5, small_grid.n_voxels)

    def test_single_voxel_entry(self):
        grid = ImagingGrid((0.1, -0.5, 0.3), (0.05, 0.05, 0.05), (1, 1, 1))
        rs, rt = np.array([0.2, 0.0, 0.5]), np.array([-0.4, 0.0, 0.1])
        p = np.array([0.0, 0.0, 1.0])
        k = Wavenumber.from_frequency(1.7e9)
        A = assemble_measurement_matrix(grid, rs[None], Transmitter(rt, p), k, "z")
        c = np.array(grid.center)
        e_in = 1j * k.omega * MU0 * dyadic_green(c, rt, k) @ p
        expected = 1j * k.omega * MU0 * grid.voxel_volume * (dyadic_green(rs, c, k) @ e_in)[2]
        assert grid.centers[0] == pytest.approx(c)
        assert A.values[0, 0] == pytest.approx(expected, rel=1e-13)

    def test_adjoint_identity(self, small_grid):
        rng = np.random.default_rng(4)
        A = assemble_measurement_matrix(small_grid, _rx(6), Transmitter(np.array([0.6, 0, 0])), 40.0)
        for _ in range(20):
            x = rng.normal(size=12) + 1j * rng.normal(size=12)
            y = rng.normal(size=6) + 1j * rng.normal(size=6)
            assert adjoint_mismatch(A, x, y) < 1e-10

    def test_volume_scaling(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-0.2, 0.2, (4, 3)) + [0, -0.6, 0.5]
        tx = Transmitter(np.array([0.6, 0.0, 0.0]))
        a1 = point_responses(_rx(3), "z", tx, 25.0, pts, 1e-3)
        a2 = point_responses(_rx(3), "z", tx, 25.0, pts, 2e-3)
        assert np.array_equal(a2, 2 * a1)

    def test_scalar_mode(self, small_grid):
        rx = _rx(3)
        tx = Transmitter(np.array([0.6, 0.0, 0.0]))
        k = Wavenumber.from_frequency(1e9)
        A = assemble_measurement_matrix(small_grid, rx, tx, k, mode="scalar").values
        c = small_grid.centers
        g_sn = scalar_green(rx[:, None], c[None], k)
        g_nt = scalar_green(c, tx.position, k)
        expected = (1j * k.omega * MU0) ** 2 * small_grid.voxel_volume * g_sn * g_nt[None]
        assert np.allclose(A, expected, rtol=1e-13)

    def test_sensor_inside_grid_rejected(self, small_grid):
        with pytest.raises(SensorPlacementError):
            assemble_measurement_matrix(small_grid, np.array([[0.0, -0.6, 0.5]]),
                                        Transmitter(np.array([0.6, 0, 0])), 30.0)
        with pytest.raises(SensorPlacementError):
            assemble_measurement_matrix(small_grid, _rx(2), Transmitter(np.array([0.0, -0.45, 0.5])), 30.0)


class TestApply:
    def test_zero_linear_and_column(self):
        rng = np.random.default_rng(6)
        A = rng.normal(size=(4, 6)) + 1j * rng.normal(size=(4, 6))
        assert np.all(apply_forward(A, np.zeros(6)) == 0)
        x1, x2 = rng.normal(size=6), rng.normal(size=6) * 1j
        assert np.allclose(apply_forward(A, x1 + x2), apply_forward(A, x1) + apply_forward(A, x2))
        e = np.zeros(6)
        e[3] = 1
        assert np.array_equal(apply_forward(A, e), A[:, 3])

    def test_adjoint_of_unitary(self):
        rng = np.random.default_rng(7)
        Q, _ = np.linalg.qr(rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5)))
        y = rng.normal(size=5) + 1j * rng.normal(size=5)
        assert np.allclose(apply_forward(Q, apply_adjoint(Q, y)), y, atol=1e-13)
        assert np.all(apply_adjoint(Q, np.zeros(5)) == 0)

    def test_dimension_mismatch(self):
        A = MeasurementMatrix(np.ones((3, 4), dtype=complex))
        with pytest.raises(ValueError):
            apply_forward(A, np.ones(3))
        with pytest.raises(ValueError):
            apply_adjoint(A, np.ones(4))
