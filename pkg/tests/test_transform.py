"""Frame construction, forward/inverse maps, potential scaling, equivalence."""

import math

import numpy as np
import pytest

from ermakov_lab.classical import Potential
from ermakov_lab.errors import InvalidInputError
from ermakov_lab.fields import (
    GridSpec,
    WaveField,
    expect_r2,
    fidelity,
    gaussian_packet,
    norm2,
    normalize,
)
from ermakov_lab.lattice import EnvelopeFrame, LatticeSpec, matched_envelope
from ermakov_lab.schrodinger import LabPotential, evolve_lab
from ermakov_lab.transform import (
    TransformFrame,
    checkpoint_times,
    equivalence_run,
    ermakov_forward,
    ermakov_inverse,
    frame_at,
    transform_potential,
)

SQRT2 = math.sqrt(2.0)

# FODO cell with the last drift split so one period carries 5 checkpoints
FODO5 = LatticeSpec(((2.0, 0.5), (0.0, 1.0), (-2.0, 0.5), (0.0, 0.5), (0.0, 0.5)))


def random_packet(grid, seed, width=0.5, n_modes=5):
    """Smooth seeded superposition: Gaussian envelope times a low-order polynomial."""
    rng = np.random.default_rng(seed)
    x = grid.axis(0)
    base = np.exp(-x * x / (4.0 * width))
    poly = np.zeros_like(x, dtype=complex)
    for m in range(n_modes):
        poly += (rng.standard_normal() + 1j * rng.standard_normal()) * (
            x / math.sqrt(width)
        ) ** m
    return normalize(WaveField(grid, base * poly))


class TestFrameAt:
    def test_matched_constant_focusing(self):
        lat = LatticeSpec(((1.0, 2.0),))
        env0 = matched_envelope(lat)
        fr = frame_at(lat, env0, 1.37)
        assert fr.beta == pytest.approx(1.0, abs=1e-12)
        assert fr.dbeta == pytest.approx(0.0, abs=1e-12)
        assert fr.g == 0.0
        assert fr.f == 1.0
        assert fr.tau == pytest.approx(1.37, abs=1e-10)

    def test_drift_frame(self):
        lat = LatticeSpec(((0.0, 10.0),))
        env0 = EnvelopeFrame(s=0.0, beta=1.0, dbeta=0.0, mu=0.0, tau=0.0)
        fr = frame_at(lat, env0, 1.0)
        assert fr.beta == pytest.approx(2.0, abs=1e-12)
        assert fr.dbeta == pytest.approx(2.0, abs=1e-12)
        assert fr.g == pytest.approx(1.0 / (2.0 * SQRT2), abs=1e-12)
        assert fr.f == pytest.approx(2.0 ** (-0.25), abs=1e-12)
        assert fr.tau == pytest.approx(math.pi / 4.0, abs=1e-10)

    def test_fodo_tau_equals_cell_phase_advance(self):
        env0 = matched_envelope(FODO5)
        fr = frame_at(FODO5, env0, FODO5.period)
        # independently: mu_C from the one-turn matrix
        from ermakov_lab.lattice import one_turn_matrix

        m = one_turn_matrix(FODO5)
        mu_c = math.acos(0.5 * (m.m11 + m.m22))
        if m.m12 < 0:
            mu_c = 2.0 * math.pi - mu_c
        assert fr.tau == pytest.approx(mu_c, abs=1e-8)

    def test_identities_exact(self):
        fr = TransformFrame(beta=3.1, dbeta=-0.7, tau=0.4, dim=2)
        assert fr.g == fr.dbeta / (4.0 * SQRT2)
        assert fr.f == 3.1 ** (-0.5)


class TestForwardInverse:
    def test_identity_frame(self):
        grid = GridSpec.make(256, 12.0)
        psi = gaussian_packet(grid, center=0.5, sigma2=0.8, momentum=0.3)
        fr = TransformFrame(beta=1.0, dbeta=0.0, tau=0.0)
        out = ermakov_forward(psi, fr, grid)
        assert np.max(np.abs(out.values - psi.values)) < 1e-12

    def test_pure_dilation(self):
        grid = GridSpec.make(512, 12.0)
        sigma2 = 1.0
        psi = gaussian_packet(grid, sigma2=sigma2)
        fr = TransformFrame(beta=4.0, dbeta=0.0, tau=0.0)
        out = ermakov_forward(psi, fr, grid)
        # width sigma -> sigma/2, amplitude x sqrt(2), no phase
        x = grid.axis(0)
        peak = np.abs(psi.values).max()
        want = math.sqrt(2.0) * peak * np.exp(-x * x / (4.0 * sigma2 / 4.0))
        assert np.max(np.abs(out.values - want)) < 1e-10
        assert np.max(np.abs(out.values.imag)) < 1e-12
        assert norm2(out) == pytest.approx(1.0, abs=1e-8)

    def test_round_trip(self):
        grid = GridSpec.make(512, 16.0)
        psi = random_packet(grid, seed=5)
        fr = TransformFrame(beta=2.3, dbeta=-1.1, tau=0.9, t=0.5)
        there = ermakov_forward(psi, fr, grid)
        back = ermakov_inverse(there, fr, grid)
        err2 = norm2(back.with_values(back.values - psi.values))
        assert math.sqrt(err2) < 1e-8
        assert back.time == 0.5

    def test_norm_preserved_random_frames(self):
        grid = GridSpec.make(512, 16.0)
        rng = np.random.default_rng(9)
        psi = random_packet(grid, seed=21)
        for _ in range(5):
            fr = TransformFrame(
                beta=float(rng.uniform(0.4, 3.0)),
                dbeta=float(rng.uniform(-2.0, 2.0)),
                tau=0.0,
            )
            out = ermakov_forward(psi, fr, grid)
            assert norm2(out) == pytest.approx(1.0, abs=1e-8)

    def test_dim_mismatch_rejected(self):
        grid = GridSpec.make(256, 12.0)
        psi = gaussian_packet(grid)
        fr = TransformFrame(beta=1.0, dbeta=0.0, tau=0.0, dim=2)
        with pytest.raises(InvalidInputError):
            ermakov_forward(psi, fr, grid)

    def test_inverse_of_ground_state_spreads_like_drift(self):
        # normalized ground state pushed through the drift frame at t gives
        # the free Gaussian whose width is beta x normalized width
        grid = GridSpec.make(1024, 24.0)
        lat = LatticeSpec(((0.0, 100.0),))
        env0 = EnvelopeFrame(s=0.0, beta=1.0, dbeta=0.0, mu=0.0, tau=0.0)
        gs = gaussian_packet(grid, sigma2=1.0 / SQRT2)  # normalized-frame ground state
        t = 1.5
        fr = frame_at(lat, env0, t)
        lab = ermakov_inverse(gs, fr, grid)
        direct = evolve_lab(gaussian_packet(grid, sigma2=1.0 / SQRT2), LabPotential(0.0), t, 1e-3)
        assert fidelity(lab, direct) > 1.0 - 1e-10
        assert expect_r2(lab) == pytest.approx(fr.beta / SQRT2, rel=1e-8)


class TestTransformPotential:
    def test_inverse_square_invariant(self):
        u = Potential("inverse_square", strength=1.0, eps=0.0)
        for beta in (0.3, 1.0, 2.0, 7.5):
            fr = TransformFrame(beta=beta, dbeta=0.4, tau=0.0)
            npot = transform_potential(u, fr)
            assert npot.tau_independent
            out = npot.extra_potential()
            r = np.array([0.7, 1.3, 2.9])
            assert out.value(r) == pytest.approx(u.value(r), rel=1e-15)

    def test_zero_potential(self):
        fr = TransformFrame(beta=2.0, dbeta=0.0, tau=0.0)
        npot = transform_potential(Potential("none"), fr)
        assert npot.tau_independent
        grid = GridSpec.make(64, 4.0)
        assert np.allclose(npot.total_values(grid), 0.5 * grid.r2_mesh())

    def test_extra_quadratic_gains_beta_squared(self):
        u = Potential("quadratic", strength=0.3)
        fr = TransformFrame(beta=1.7, dbeta=0.2, tau=0.0)
        npot = transform_potential(u, fr)
        assert not npot.tau_independent
        out = npot.extra_potential()
        assert out.kind == "quadratic"
        assert out.strength == pytest.approx(0.3 * 1.7**2, rel=1e-15)

    def test_regularized_inverse_square_scales_eps(self):
        u = Potential("inverse_square", strength=1.0, eps=1e-2)
        fr = TransformFrame(beta=4.0, dbeta=0.0, tau=0.0)
        out = transform_potential(u, fr).extra_potential()
        # beta*a/(beta r^2 + eps^2) = a/(r^2 + eps^2/beta)
        assert out.eps == pytest.approx(5e-3, rel=1e-15)
        r = np.array([0.0, 0.05, 1.0])
        want = 4.0 * u.value(r * 2.0)
        assert out.value(r) == pytest.approx(want, rel=1e-14)


class TestEquivalence:
    def test_matched_constant_focusing_identity(self):
        lat = LatticeSpec(((1.0, 0.4),) * 5)
        grid = GridSpec.make(512, 14.0)
        psi0 = gaussian_packet(grid, sigma2=1.0 / SQRT2, center=0.7)
        res = equivalence_run(lat, Potential("none"), psi0, grid, dt=1e-3)
        assert res.max_defect < 1e-10
        assert not res.phase_sign_flip_preferred

    def test_fodo_packet(self):
        grid = GridSpec.make(1024, 20.0)
        env0 = matched_envelope(FODO5)
        f0 = frame_at(FODO5, env0, 0.0)
        psi0 = ermakov_inverse(random_packet(grid, seed=12345), f0, grid)
        res = equivalence_run(FODO5, Potential("none"), psi0, grid, dt=1e-3)
        assert res.max_defect < 1e-6
        assert not res.phase_sign_flip_preferred
        assert len(res.fidelities) == 5
        for n in res.norms_direct + res.norms_transformed:
            assert n == pytest.approx(1.0, abs=1e-7)

    def test_matched_with_inverse_square(self):
        lat = LatticeSpec(((1.0, 0.4),) * 5)
        grid = GridSpec.make(1024, 20.0)
        psi0 = gaussian_packet(grid, sigma2=1.0 / SQRT2, center=1.5)
        u = Potential("inverse_square", strength=1.0, eps=1e-2)
        res = equivalence_run(lat, u, psi0, grid, dt=5e-4)
        assert res.max_defect < 1e-8

    def test_tau_dependent_case_rejected(self):
        grid = GridSpec.make(256, 12.0)
        psi0 = gaussian_packet(grid)
        with pytest.raises(InvalidInputError):
            equivalence_run(FODO5, Potential("quadratic", 0.1), psi0, grid)

    def test_checkpoint_times(self):
        ts = checkpoint_times(FODO5, n_periods=2)
        assert len(ts) == 10
        assert ts[4] == pytest.approx(FODO5.period)
        assert ts[-1] == pytest.approx(2 * FODO5.period)


class TestWidthLaw:
    def test_lab_width_follows_beta(self):
        grid = GridSpec.make(1024, 20.0)
        env0 = matched_envelope(FODO5)
        f0 = frame_at(FODO5, env0, 0.0)
        gs = gaussian_packet(grid, sigma2=1.0 / SQRT2)
        psi = ermakov_inverse(gs, f0, grid)
        xn2 = expect_r2(gs)
        pot = LabPotential(FODO5)
        for t in checkpoint_times(FODO5):
            psi = evolve_lab(psi, pot, t, 5e-4)
            fr = frame_at(FODO5, env0, t)
            want = fr.beta * xn2
            assert expect_r2(psi) == pytest.approx(want, rel=1e-4)
