"""Spinor propagation, spin observables, and EM scaling-law tests."""

import math

import numpy as np
import pytest

from ermakov_lab.errors import InvalidInputError
from ermakov_lab.fields import (
    GridSpec,
    SpinorField,
    WaveField,
    expect_x,
    fidelity,
    gaussian_packet,
    norm2,
)
from ermakov_lab.lattice import LatticeSpec, matched_envelope
from ermakov_lab.pauli import (
    EMFieldSpec,
    evolve_pauli,
    inverse_r_vector,
    inverse_square_bz,
    inverse_square_scalar,
    spin_observables,
    spinor_ermakov_forward,
    spinor_ermakov_inverse,
    transform_em,
    uniform_b,
    write_spin_csv,
)
from ermakov_lab.schrodinger import LabPotential, evolve_lab
from ermakov_lab.transform import TransformFrame, frame_at

SQRT2 = math.sqrt(2.0)
K4 = LatticeSpec(((4.0, 0.5),))  # matched beta = 1/2, a real dilation


def uniform_spinor(grid, up_amp, down_amp):
    ones = np.ones(grid.shape, dtype=complex)
    f = SpinorField(grid, up_amp * ones, down_amp * ones)
    scale = 1.0 / math.sqrt(norm2(f))
    return f.with_components(f.up * scale, f.down * scale)


class TestSpinObservables:
    def test_pure_up(self):
        g = GridSpec.make(16, 2.0)
        f = uniform_spinor(g, 1.0, 0.0)
        sx, sy, sz, n2 = spin_observables(f)
        assert (sx, sy) == (0.0, 0.0)
        assert sz == pytest.approx(1.0)
        assert n2 == pytest.approx(1.0)

    def test_equal_superposition(self):
        g = GridSpec.make(16, 2.0)
        f = uniform_spinor(g, 1.0, 1.0)
        sx, _, sz, _ = spin_observables(f)
        assert sx == pytest.approx(1.0)
        assert sz == pytest.approx(0.0, abs=1e-14)

    def test_zero_field_convention(self):
        g = GridSpec.make(16, 2.0)
        f = SpinorField(g, np.zeros(16, dtype=complex), np.zeros(16, dtype=complex))
        assert spin_observables(f) == (0.0, 0.0, 0.0, 0.0)

    def test_polarization_bounded(self):
        g = GridSpec.make(32, 3.0)
        rng = np.random.default_rng(2)
        up = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        dn = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        sx, sy, sz, _ = spin_observables(SpinorField(g, up, dn))
        assert math.sqrt(sx * sx + sy * sy + sz * sz) <= 1.0 + 1e-12


class TestPrecession:
    def test_uniform_bz_matches_two_level_solution(self):
        g = GridSpec.make(32, 4.0, dim=2)
        phi = uniform_spinor(g, 1.0 / SQRT2, 1.0 / SQRT2)
        pauli_coef, bz = 1.3, 2.0
        em = EMFieldSpec(b=uniform_b(0.0, 0.0, bz), pauli_coef=pauli_coef)
        rate = 2.0 * pauli_coef * bz / SQRT2
        for t in (0.3, 0.7):
            out = evolve_pauli(phi, em, 0.0, t, 1e-3)
            sx, sy, sz, n2 = spin_observables(out)
            assert sx == pytest.approx(math.cos(rate * t), abs=1e-6)
            assert sy == pytest.approx(math.sin(rate * t), abs=1e-6)
            assert sz == pytest.approx(0.0, abs=1e-10)
            assert abs(n2 - 1.0) < 1e-10

    def test_tilted_axis_precession(self):
        g = GridSpec.make(16, 2.0, dim=2)
        phi = uniform_spinor(g, 1.0, 0.0)  # along +z
        em = EMFieldSpec(b=uniform_b(1.0, 0.0, 0.0), pauli_coef=1.0)  # along +x
        quarter = (math.pi / 2.0) * SQRT2 / 2.0  # rotate z -> -y by angle pi/2
        out = evolve_pauli(phi, em, 0.0, quarter, 5e-4)
        sx, sy, sz, _ = spin_observables(out)
        assert sx == pytest.approx(0.0, abs=1e-6)
        assert sy == pytest.approx(-1.0, abs=1e-6)
        assert sz == pytest.approx(0.0, abs=1e-6)


class TestScalarReduction:
    def test_gauge_free_matches_scalar_propagator(self):
        g = GridSpec.make(128, 10.0)
        pk = gaussian_packet(g, sigma2=1.0 / SQRT2, center=0.5)
        sp = SpinorField(g, 0.8 * pk.values, 0.6 * pk.values)
        out_sp = evolve_pauli(sp, EMFieldSpec(), 1.0, 1.0, 1e-3)
        out_sc = evolve_lab(pk, LabPotential(1.0), 1.0, 1e-3)
        assert np.max(np.abs(out_sp.up - 0.8 * out_sc.values)) < 1e-10
        assert np.max(np.abs(out_sp.down - 0.6 * out_sc.values)) < 1e-10


class TestGaugeTerm:
    def test_uniform_vector_potential_dispersion(self):
        # (i grad + d A)^2 on plane waves gives (k - d A)^2:
        # group velocity sqrt(2) (k0 - d Ax)
        g = GridSpec.make(256, 16.0)
        k0, ax, d = 0.8, 0.5, 1.0
        pk = gaussian_packet(g, sigma2=1.0, momentum=k0)
        phi = SpinorField(g, pk.values, np.zeros_like(pk.values))
        em = EMFieldSpec(a=lambda x: (np.full_like(x, ax),), d_coef=d)
        out = evolve_pauli(phi, em, 0.0, 1.0, 1e-3)
        got = expect_x(WaveField(g, out.up))
        assert got == pytest.approx(SQRT2 * (k0 - d * ax), abs=1e-6)
        assert abs(norm2(out) - 1.0) < 1e-10

    def test_nonuniform_a_stays_unitary(self):
        g = GridSpec.make(64, 8.0, dim=2)
        pk = gaussian_packet(g, sigma2=0.5)
        phi = SpinorField(g, pk.values, 0.5 * pk.values)
        phi = phi.with_components(
            phi.up / math.sqrt(norm2(phi)), phi.down / math.sqrt(norm2(phi))
        )
        em = EMFieldSpec(a=inverse_r_vector((0.4, 0.3), 0.5), d_coef=1.0)
        out = evolve_pauli(phi, em, 0.0, 0.2, 1e-3)
        assert abs(norm2(out) - 1.0) < 1e-10


class TestTransformEm:
    def test_exact_invariance_of_scale_free_classes(self):
        rng = np.random.default_rng(3)
        em = EMFieldSpec(
            u=inverse_square_scalar(1.0, 0.0),
            a=inverse_r_vector((0.6, 0.8), 0.0),
            b=inverse_square_bz(2.0, 0.0),
        )
        for _ in range(5):
            fr = TransformFrame(
                beta=float(rng.uniform(0.2, 5.0)), dbeta=0.7, tau=0.1, dim=2
            )
            em_n = transform_em(em, fr)
            x = rng.uniform(0.5, 3.0, 7)
            y = rng.uniform(0.5, 3.0, 7)
            assert np.allclose(em_n.u(x, y), em.u(x, y), rtol=1e-14, atol=0)
            for got, want in zip(em_n.a(x, y), em.a(x, y)):
                assert np.allclose(got, want, rtol=1e-14, atol=1e-16)
            for got, want in zip(em_n.b(x, y), em.b(x, y)):
                assert np.allclose(got, want, rtol=1e-14, atol=1e-16)

    def test_scaling_factors(self):
        beta = 2.5
        fr = TransformFrame(beta=beta, dbeta=0.0, tau=0.0, dim=1)
        em = EMFieldSpec(
            u=lambda x: np.ones_like(x),
            a=lambda x: (np.ones_like(x),),
            b=lambda x: (np.zeros_like(x), np.zeros_like(x), np.ones_like(x)),
        )
        em_n = transform_em(em, fr)
        x = np.array([0.3])
        assert em_n.u(x)[0] == pytest.approx(beta)
        assert em_n.a(x)[0][0] == pytest.approx(math.sqrt(beta))
        assert em_n.b(x)[2][0] == pytest.approx(beta)

    def test_coefs_carried(self):
        em = EMFieldSpec(d_coef=0.4, pauli_coef=2.2)
        fr = TransformFrame(beta=2.0, dbeta=0.0, tau=0.0)
        em_n = transform_em(em, fr)
        assert (em_n.d_coef, em_n.pauli_coef) == (0.4, 2.2)


class TestCrossFrame:
    def test_magnetic_invariant_class(self):
        env0 = matched_envelope(K4)
        g = GridSpec.make(128, 8.0, dim=2)
        pk = gaussian_packet(g, sigma2=0.5 / SQRT2, center=(0.4, -0.2))
        phi = SpinorField(
            g, pk.values * math.sqrt(0.7), pk.values * math.sqrt(0.3)
        )
        em = EMFieldSpec(b=inverse_square_bz(1.0, 0.5), pauli_coef=1.0)
        t_end, dt = 0.5, 1e-3
        out_lab = evolve_pauli(phi, em, K4, t_end, dt)
        fr = frame_at(K4, env0, t_end, dim=2)
        route_a = spinor_ermakov_forward(out_lab, fr, g)
        fr0 = frame_at(K4, env0, 0.0, dim=2)
        phi_n = spinor_ermakov_forward(phi, fr0, g)
        route_b = evolve_pauli(phi_n, transform_em(em, fr0), 1.0, fr.tau, dt)
        assert fidelity(route_a, route_b) >= 1.0 - 1e-3

    def test_full_invariant_class_with_gauge(self):
        env0 = matched_envelope(K4)
        g = GridSpec.make(64, 8.0, dim=2)
        pk = gaussian_packet(g, sigma2=0.5 / SQRT2, center=(0.6, 0.2))
        phi = SpinorField(g, pk.values * math.sqrt(0.6), pk.values * math.sqrt(0.4))
        em = EMFieldSpec(
            u=inverse_square_scalar(0.5, 0.5),
            a=inverse_r_vector((0.3, 0.4), 0.5),
            b=inverse_square_bz(1.0, 0.5),
            d_coef=0.7,
        )
        t_end, dt = 0.2, 2e-3
        out_lab = evolve_pauli(phi, em, K4, t_end, dt)
        fr = frame_at(K4, env0, t_end, dim=2)
        route_a = spinor_ermakov_forward(out_lab, fr, g)
        fr0 = frame_at(K4, env0, 0.0, dim=2)
        phi_n = spinor_ermakov_forward(phi, fr0, g)
        route_b = evolve_pauli(phi_n, transform_em(em, fr0), 1.0, fr.tau, dt)
        assert fidelity(route_a, route_b) >= 1.0 - 1e-3

    def test_spinor_transform_round_trip(self):
        g = GridSpec.make(64, 8.0, dim=2)
        pk = gaussian_packet(g, sigma2=0.7, center=(0.3, 0.1))
        phi = SpinorField(g, pk.values, 1j * pk.values * 0.5)
        fr = TransformFrame(beta=1.8, dbeta=-0.6, tau=0.4, t=0.2, dim=2)
        back = spinor_ermakov_inverse(spinor_ermakov_forward(phi, fr, g), fr, g)
        err = norm2(back.with_components(back.up - phi.up, back.down - phi.down))
        assert math.sqrt(err) < 1e-8


class TestUnitarityAndErrors:
    def test_norm_conservation_1000_steps(self):
        g = GridSpec.make(64, 8.0, dim=2)
        pk = gaussian_packet(g, sigma2=0.5)
        phi = SpinorField(g, pk.values / SQRT2, pk.values / SQRT2)
        em = EMFieldSpec(b=inverse_square_bz(1.0, 0.5))
        out = evolve_pauli(phi, em, 1.0, 1.0, 1e-3)
        assert abs(norm2(out) - norm2(phi)) < 1e-10

    def test_nonfinite_field_rejected(self):
        g = GridSpec.make(32, 4.0)
        pk = gaussian_packet(g)
        phi = SpinorField(g, pk.values, np.zeros_like(pk.values))
        em = EMFieldSpec(u=inverse_square_scalar(1.0, 0.0))  # infinite at origin
        with pytest.raises(InvalidInputError):
            evolve_pauli(phi, em, 0.0, 0.1, 1e-2)

    def test_spin_csv(self, tmp_path):
        p = tmp_path / "spin.csv"
        write_spin_csv(
            p, [{"t": 0.0, "norm2": 1.0, "sx": 0.1, "sy": 0.2, "sz": 0.3}]
        )
        lines = p.read_text().strip().splitlines()
        assert lines[0] == "t,norm2,sx,sy,sz"
        assert len(lines) == 2
