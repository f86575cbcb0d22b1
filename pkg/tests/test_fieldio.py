import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sint

from energymeasure import fieldio as fio
from energymeasure.fieldio import CutoffProfile, FieldFormatError, SampledField, SampledMeasure

from conftest import random_field


class TestGridHelpers:
    def test_rectangle_rule_on_cosine(self):
        N, L = 32, 3.0
        x = fio.grid_axes((N,), L)[0]
        assert fio.integrate(1 + np.cos(2 * np.pi * x / L), (N,), L) == pytest.approx(L, abs=1e-14)

    def test_periodic_delta_range(self):
        d = fio.periodic_delta(np.linspace(-10, 10, 101), 0.3, 2.0)
        assert np.all(d >= -1) and np.all(d < 1)

    def test_ball_mask_wraps(self):
        m = fio.ball_mask((8, 8), 8.0, (0.0, 0.0), 1.5)
        assert m[0, 0] and m[7, 0] and m[0, 7] and m[7, 7]
        assert not m[2, 0]

    def test_open_ball_excludes_boundary(self):
        assert fio.ball_cell_count((8,), 8.0, (0.0,), 1.0) == 1

    def test_ball_cell_count_matches_brute_force(self, rng):
        grid, L = (12, 10, 9), 5.0
        ax = fio.grid_axes(grid, L)
        pts = np.stack(np.meshgrid(*ax, indexing="ij"), -1)
        for _ in range(5):
            c, r = rng.uniform(0, L, 3), rng.uniform(0.2, 2.4)
            brute = int(np.sum(fio.periodic_distance(pts, c, L) < r))
            assert fio.ball_cell_count(grid, L, c, r) == brute

    def test_unit_ball_volume(self):
        assert fio.unit_ball_volume(2) == pytest.approx(math.pi)
        assert fio.unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


class TestCutoffProfile:
    def test_values_and_support(self):
        p = CutoffProfile.standard()
        assert p(0.0) == 1 and p(0.5) == 1 and p(1.0) == 0 and p(2.0) == 0
        s = np.linspace(0, 1.2, 1001)
        assert np.all(np.diff(p(s)) <= 1e-15)

    def test_derivative_by_finite_differences(self):
        p = CutoffProfile(0.3, 1.0, 3)
        s = np.linspace(0.31, 0.99, 50)
        h = 1e-6
        fd = (p(s + h) - p(s - h)) / (2 * h)
        assert np.allclose(p.derivative(s), fd, atol=1e-7)
        fd2 = (p.derivative(s + h) - p.derivative(s - h)) / (2 * h)
        assert np.allclose(p.second_derivative(s), fd2, atol=1e-5)

    @pytest.mark.parametrize("k", [0, 1, 2, 6])
    def test_lipschitz_is_max_slope(self, k):
        p = CutoffProfile(0.5, 1.0, k)
        s = np.linspace(0.5, 1.0, 20001)
        assert p.lipschitz == pytest.approx(np.max(np.abs(p.derivative(s))), rel=1e-6)

    def test_rejects_bad(self):
        with pytest.raises(ValueError):
            CutoffProfile(1.0, 0.5)
        with pytest.raises(ValueError):
            CutoffProfile(0.5, 1.0, 1.5)


class TestBump:
    def test_spatial_gradient_and_laplacian(self):
        # spectral derivatives of a smooth profile as the oracle
        N, L = 256, 2 * np.pi
        b = fio.BumpSpec((3.0, 2.5), 1.2, CutoffProfile(0.3, 1.0, 8))
        val, grad, lap = b.spatial((N, N), L)
        k = np.fft.fftfreq(N, L / N) * 2 * np.pi
        kx, ky = np.meshgrid(k, k, indexing="ij")
        vh = np.fft.fft2(val)
        assert np.allclose(np.real(np.fft.ifft2(1j * kx * vh)), grad[0], atol=1e-7)
        assert np.allclose(np.real(np.fft.ifft2(-(kx**2 + ky**2) * vh)), lap, atol=1e-5)

    def test_temporal(self):
        b = fio.BumpSpec((0.0, 0.0), 1.0, t_center=-0.5, t_radius=0.2)
        v, d = b.temporal(np.array([-0.5, -0.2, -0.9]))
        assert v[0] == 1 and v[1] == 0 and v[2] == 0
        assert fio.BumpSpec((0.0,), 1.0).temporal(np.array([-0.3]))[0][0] == 1

    def test_fit_check(self):
        with pytest.raises(ValueError):
            fio.BumpSpec((0.0, 0.0), 2.0).check_fits(6.0)
        with pytest.raises(ValueError):
            fio.BumpSpec((0.0,), 1.0, t_center=0.0)


class TestSampledField:
    def test_read_only(self):
        f = random_field()
        with pytest.raises(ValueError):
            f.velocity[0, 0, 0, 0] = 1.0

    @pytest.mark.parametrize("times", [[-0.5, -0.5], [-0.2, -0.5], [-1.5, 0.0], [0.0, 0.5]])
    def test_bad_times(self, times):
        with pytest.raises(ValueError):
            SampledField(2, (4, 4), 1.0, times, np.zeros((2, 2, 4, 4)))

    def test_bad_shapes_and_values(self):
        with pytest.raises(ValueError):
            SampledField(2, (4, 4), 1.0, [0.0], np.zeros((1, 3, 4, 4)))
        v = np.zeros((1, 2, 4, 4))
        v[0, 0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            SampledField(2, (4, 4), 1.0, [0.0], v)

    def test_energy_and_divergence(self):
        N, L = 32, 2 * np.pi
        x = fio.grid_axes((N, N), L)
        X, Y = np.meshgrid(*x, indexing="ij")
        u = np.array([np.sin(X) * np.cos(Y), -np.cos(X) * np.sin(Y)])
        f = SampledField(2, (N, N), L, [0.0], u[None])
        assert f.energy(0) == pytest.approx(2 * np.pi**2, rel=1e-13)
        f.check_divergence(1e-12)
        g = SampledField(2, (N, N), L, [0.0], np.array([np.sin(X), 0 * X])[None])
        with pytest.raises(ValueError):
            g.check_divergence()


class TestWindow:
    def test_full_window_is_identity(self):
        f = random_field(1)
        w = fio.window(f, (0.0, 0.0), 10 * f.box_length, -1, 0)
        assert np.array_equal(w.velocity, f.velocity)

    def test_constant_field_mass_ratio(self):
        N, L = 64, 1.0
        f = SampledField(2, (N, N), L, [0.0], np.ones((1, 2, N, N)))
        w = fio.window(f, (0.5, 0.5), 0.25, -1, 0)
        cells = fio.ball_cell_count((N, N), L, (0.5, 0.5), 0.25)
        assert w.energy(0) / f.energy(0) == pytest.approx(cells / N**2)
        assert w.energy(0) / f.energy(0) == pytest.approx(np.pi / 16, rel=0.02)

    def test_random_window_matches_parent(self, rng):
        f = random_field(2, n=3, N=12, T=4)
        c, r = rng.uniform(0, f.box_length, 3), 1.7
        w = fio.window(f, c, r, -1, 0)
        for k in range(f.n_times):
            mask = fio.ball_mask(f.grid, f.box_length, c, r)
            direct = float(np.sum(f.speed_squared(k)[mask]) * f.cell_volume)
            assert w.energy(k) == pytest.approx(direct, rel=1e-14)

    def test_empty_time_window(self):
        f = random_field(3)
        with pytest.raises(ValueError):
            fio.window(f, (0.0, 0.0), 1.0, 0.5, 0.6)


class TestFieldFormat:
    def test_roundtrip_bytes(self, tmp_path):
        f = random_field(4, n=3, N=6, T=3, pressure=True)
        fio.save_field(f, tmp_path / "a.vfld")
        g = fio.load_field(tmp_path / "a.vfld")
        assert fio.field_to_bytes(g) == (tmp_path / "a.vfld").read_bytes()
        assert np.array_equal(g.pressure, f.pressure)

    def _header_size(self, n):
        return 6 + 4 + 4 * n + 8 + 4

    def test_monotonicity_error_offset(self):
        f = random_field(5, T=2)
        data = bytearray(fio.field_to_bytes(f))
        off = self._header_size(2)
        data[off + 8:off + 16] = struct.pack("<d", f.times[0])
        with pytest.raises(FieldFormatError) as e:
            fio.field_from_bytes(bytes(data))
        assert e.value.offset == off + 8

    def test_truncation_offset(self):
        f = random_field(6, n=2, N=4, T=3)
        data = fio.field_to_bytes(f)
        head = self._header_size(2) + 8 * 3
        block = 2 * 16 * 8
        cut = data[: head + block + 40]
        with pytest.raises(FieldFormatError) as e:
            fio.field_from_bytes(cut)
        assert e.value.offset == head + block

    def test_nan_offset(self):
        f = random_field(7, N=4, T=1)
        data = bytearray(fio.field_to_bytes(f))
        pos = self._header_size(2) + 8 + 8 * 5
        data[pos:pos + 8] = struct.pack("<d", float("nan"))
        with pytest.raises(FieldFormatError) as e:
            fio.field_from_bytes(bytes(data))
        assert e.value.offset == pos

    def test_bad_magic_and_trailing(self):
        data = fio.field_to_bytes(random_field(8, N=4, T=1))
        with pytest.raises(FieldFormatError):
            fio.field_from_bytes(b"XXXXXX" + data[6:])
        with pytest.raises(FieldFormatError) as e:
            fio.field_from_bytes(data + b"\0")
        assert e.value.offset == len(data)


class TestMeasureFormat:
    def make(self):
        rng = np.random.default_rng(9)
        return SampledMeasure(2, (4, 4), 1.0, rng.uniform(0, 1, (4, 4)), rng.uniform(0, 1, (3, 2)), [1.0, 2.0, 3.0])

    def test_roundtrip(self, tmp_path):
        m = self.make()
        fio.save_measure(m, tmp_path / "m.vmsr")
        assert fio.measure_to_bytes(fio.load_measure(tmp_path / "m.vmsr")) == fio.measure_to_bytes(m)

    def test_negative_density(self):
        data = bytearray(fio.measure_to_bytes(self.make()))
        pos = 6 + 4 + 8 + 8 + 8 * 3
        data[pos:pos + 8] = struct.pack("<d", -1.0)
        with pytest.raises(FieldFormatError) as e:
            fio.measure_from_bytes(bytes(data))
        assert e.value.offset == pos
        with pytest.raises(ValueError):
            SampledMeasure(1, (2,), 1.0, [1.0, -1.0])

    def test_atom_outside_box(self):
        data = bytearray(fio.measure_to_bytes(self.make()))
        pos = 6 + 4 + 8 + 8 + 8 * 16 + 4
        data[pos:pos + 8] = struct.pack("<d", 1.5)
        with pytest.raises(FieldFormatError) as e:
            fio.measure_from_bytes(bytes(data))
        assert e.value.offset == pos
        with pytest.raises(ValueError):
            SampledMeasure(1, (2,), 1.0, [0.0, 0.0], [[1.0]], [1.0])

    def test_masses(self):
        m = SampledMeasure(1, (4,), 2.0, np.ones(4), [[0.5]], [3.0])
        assert m.density_mass == 2.0 and m.atom_mass == 3.0 and m.total_mass == 5.0


def test_export_slice_csv(tmp_path):
    f = random_field(10, n=3, N=4, T=1, pressure=True)
    fio.export_slice_csv(f, tmp_path / "s.csv", quantity="p", plane=1)
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "x,y,value" and len(rows) == 17
    assert float(rows[1].split(",")[2]) == f.pressure[0, 0, 0, 1]
    with pytest.raises(ValueError):
        fio.export_slice_csv(f, tmp_path / "s.csv", quantity="u7")


def test_gaussian_ball_integral_vs_quadrature():
    # 2D radial Gaussian: integral over the disc of radius r is pi s^2 (1 - exp(-r^2/s^2))
    N, L, s, r = 256, 2 * np.pi, 0.4, 1.0
    ax = fio.grid_axes((N, N), L)
    X, Y = np.meshgrid(*ax, indexing="ij")
    c = (np.pi, np.pi)
    g = np.exp(-((X - c[0]) ** 2 + (Y - c[1]) ** 2) / s**2)
    oracle, _ = sint.quad(lambda rho: 2 * np.pi * rho * np.exp(-rho**2 / s**2), 0, r)
    assert fio.ball_integral(g, (N, N), L, c, r) == pytest.approx(oracle, rel=5e-3)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.sampled_from([2, 3]))
def test_field_roundtrip_property(seed, n):
    f = random_field(seed, n=n, N=4, T=2, pressure=bool(seed % 2))
    data = fio.field_to_bytes(f)
    assert fio.field_to_bytes(fio.field_from_bytes(data)) == data
