"""Grid, norm, spectral-operator, resampling, and snapshot I/O tests."""

import math

import numpy as np
import pytest

from ermakov_lab.errors import InvalidInputError
from ermakov_lab.fields import (
    GridSpec,
    SpinorField,
    WaveField,
    expect_r2,
    expect_x,
    fidelity,
    gaussian_packet,
    laplacian,
    load_field,
    norm2,
    normalize,
    resample,
    sample_at,
    save_field,
    write_field_csv,
)


def unit_gaussian_1d(n=256, l_half=12.0):
    g = GridSpec.make(n, l_half)
    x = g.axis(0)
    psi = np.exp(-0.5 * x * x) / np.pi**0.25
    return WaveField(g, psi)


class TestGridSpec:
    def test_spacing_and_axis(self):
        g = GridSpec.make(16, 4.0)
        assert g.spacing() == pytest.approx(0.5)
        assert g.axis(0)[0] == -4.0
        assert g.axis(0)[8] == 0.0  # origin is a node
        assert g.axis(0)[-1] == pytest.approx(4.0 - 0.5)

    def test_rejects_non_power_of_two(self):
        with pytest.raises(InvalidInputError):
            GridSpec.make(100, 4.0)
        with pytest.raises(InvalidInputError):
            GridSpec.make(8, 4.0)  # below the n >= 16 floor
        with pytest.raises(InvalidInputError):
            GridSpec.make(32, -1.0)

    def test_dim2(self):
        g = GridSpec((32, 64), (4.0, 8.0))
        assert g.dim == 2
        assert g.cell_volume == pytest.approx(0.25 * 0.25)


class TestNorm:
    def test_zero_field(self):
        g = GridSpec.make(32, 4.0)
        assert norm2(WaveField(g, np.zeros(32, dtype=complex))) == 0.0

    def test_unit_gaussian(self):
        assert norm2(unit_gaussian_1d()) == pytest.approx(1.0, abs=1e-8)

    def test_scaling_bilinearity(self):
        f = unit_gaussian_1d()
        c = 0.3 - 1.7j
        assert norm2(f.with_values(c * f.values)) == pytest.approx(
            abs(c) ** 2 * norm2(f), rel=1e-12
        )

    def test_spinor_norm_adds_components(self):
        g = GridSpec.make(32, 6.0)
        x = g.axis(0)
        comp = np.exp(-0.5 * x * x) / np.pi**0.25
        f = SpinorField(g, comp, comp)
        assert norm2(f) == pytest.approx(2.0, abs=1e-8)


class TestExpectations:
    def test_gaussian_moments(self):
        f = unit_gaussian_1d()
        assert expect_r2(f) == pytest.approx(0.5, abs=1e-8)
        assert expect_x(f) == pytest.approx(0.0, abs=1e-10)

    def test_shifted_center(self):
        g = GridSpec.make(256, 14.0)
        f = gaussian_packet(g, center=1.75, sigma2=0.5)
        assert expect_x(f) == pytest.approx(1.75, abs=1e-8)

    def test_isotropic_2d(self):
        g = GridSpec.make(64, 8.0, dim=2)
        f = gaussian_packet(g, sigma2=0.5)
        assert expect_r2(f) == pytest.approx(1.0, abs=1e-8)


class TestSpectral:
    def test_parseval(self):
        rng = np.random.default_rng(0)
        g = GridSpec.make(128, 5.0)
        vals = rng.standard_normal(128) + 1j * rng.standard_normal(128)
        f = WaveField(g, vals)
        spec = np.fft.fft(vals)
        k_norm2 = np.sum(np.abs(spec) ** 2) / 128 * g.cell_volume
        assert k_norm2 == pytest.approx(norm2(f), rel=1e-12)

    def test_laplacian_plane_wave(self):
        g = GridSpec.make(128, np.pi)
        x = g.axis(0)
        for m in (1, 5, 17):
            k = m  # integer wavenumbers fit the 2*pi period
            f = WaveField(g, np.exp(1j * k * x))
            lap = laplacian(f)
            assert np.max(np.abs(lap.values + k * k * f.values)) < 1e-10

    def test_laplacian_2d_gaussian_matches_analytic(self):
        g = GridSpec.make(64, 10.0, dim=2)
        xm, ym = g.meshes()
        r2 = xm * xm + ym * ym
        psi = np.exp(-0.5 * r2)
        f = WaveField(g, psi.astype(complex))
        lap = laplacian(f).values
        want = (r2 - 2.0) * psi
        assert np.max(np.abs(lap - want)) < 1e-9


class TestResample:
    def test_identity(self):
        f = unit_gaussian_1d()
        out = resample(f, f.grid)
        assert np.max(np.abs(out.values - f.values)) < 1e-14
        assert out.warnings == ()

    def test_gaussian_to_finer(self):
        f = unit_gaussian_1d(n=64, l_half=12.0)
        target = GridSpec.make(128, 12.0)
        out = resample(f, target)
        x = target.axis(0)
        want = np.exp(-0.5 * x * x) / np.pi**0.25
        assert np.max(np.abs(out.values - want)) < 1e-10
        assert norm2(out) == pytest.approx(norm2(f), abs=1e-8)

    def test_plane_wave_below_nyquist(self):
        g = GridSpec.make(64, np.pi)
        x = g.axis(0)
        f = WaveField(g, np.exp(1j * 7 * x))
        target = GridSpec.make(256, np.pi)
        out = resample(f, target)
        want = np.exp(1j * 7 * target.axis(0))
        assert np.max(np.abs(out.values - want)) < 1e-10

    def test_different_extent(self):
        f = unit_gaussian_1d(n=128, l_half=12.0)
        target = GridSpec.make(128, 6.0)
        out = resample(f, target)
        x = target.axis(0)
        want = np.exp(-0.5 * x * x) / np.pi**0.25
        assert np.max(np.abs(out.values - want)) < 1e-9

    def test_aliasing_warning_attached(self):
        g = GridSpec.make(32, 2.0)
        x = g.axis(0)
        f = WaveField(g, np.full_like(x, 0.5, dtype=complex))  # no edge decay
        out = resample(f, GridSpec.make(64, 2.0))
        assert any("aliasing" in w for w in out.warnings)

    def test_2d_resample(self):
        g = GridSpec.make(32, 8.0, dim=2)
        f = gaussian_packet(g, sigma2=0.7)
        target = GridSpec.make(64, 8.0, dim=2)
        out = resample(f, target)
        xm, ym = target.meshes()
        want = np.exp(-(xm**2 + ym**2) / (4 * 0.7))
        want = want / np.sqrt(np.sum(np.abs(want) ** 2) * g.cell_volume / 4)
        # compare against the analytically-evaluated packet, normalized on
        # the fine grid (cell volume is 1/4 of the source's)
        assert fidelity(out, WaveField(target, want)) > 1 - 1e-12
        assert norm2(out) == pytest.approx(1.0, abs=1e-8)

    def test_sample_at_matches_resample(self):
        f = unit_gaussian_1d(n=64)
        pts = np.linspace(-3.0, 3.0, 17)
        got = sample_at(f, (pts,))
        want = np.exp(-0.5 * pts * pts) / np.pi**0.25
        assert np.max(np.abs(got - want)) < 1e-10


class TestIO:
    def test_wavefield_round_trip(self, tmp_path):
        f = unit_gaussian_1d(n=64)
        f = f.with_values(f.values * np.exp(0.3j), time=1.25)
        p = tmp_path / "snap.fld"
        save_field(p, f)
        g = load_field(p)
        assert isinstance(g, WaveField)
        assert g.grid == f.grid
        assert g.time == 1.25
        assert np.array_equal(g.values, f.values)

    def test_spinor_round_trip(self, tmp_path):
        grid = GridSpec.make(16, 3.0, dim=2)
        rng = np.random.default_rng(1)
        up = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        dn = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        f = SpinorField(grid, up, dn, time=0.5)
        p = tmp_path / "spinor.fld"
        save_field(p, f)
        g = load_field(p)
        assert isinstance(g, SpinorField)
        assert np.array_equal(g.up, up) and np.array_equal(g.down, dn)

    def test_csv_export(self, tmp_path):
        f = unit_gaussian_1d(n=32)
        p = tmp_path / "field.csv"
        write_field_csv(p, f)
        lines = p.read_text().strip().splitlines()
        assert lines[0] == "x,re,im"
        assert len(lines) == 33

    def test_load_rejects_garbage(self, tmp_path):
        p = tmp_path / "bad.fld"
        p.write_bytes(b"\x00" * 8)
        with pytest.raises(Exception):
            load_field(p)


class TestFieldValidation:
    def test_rejects_nonfinite(self):
        g = GridSpec.make(16, 2.0)
        vals = np.ones(16, dtype=complex)
        vals[3] = np.nan
        with pytest.raises(InvalidInputError):
            WaveField(g, vals)

    def test_rejects_shape_mismatch(self):
        g = GridSpec.make(16, 2.0)
        with pytest.raises(InvalidInputError):
            WaveField(g, np.ones(17, dtype=complex))

    def test_normalize(self):
        g = GridSpec.make(64, 8.0)
        x = g.axis(0)
        f = normalize(WaveField(g, 3.7 * np.exp(-0.5 * x * x)))
        assert norm2(f) == pytest.approx(1.0, rel=1e-12)
