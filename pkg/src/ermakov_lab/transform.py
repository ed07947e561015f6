"""The central map between lab and normalized frames.

A field psi(r, t) of the lab equation and its normalized image are related
by psi = f * exp(i g r_N^2) * psi_N with r_N = r/sqrt(beta), dtau = dt/beta,
g = beta'/(4 sqrt(2)), and amplitude f = beta^(-dim/4) (the 1D power
generalized so the map is exactly unitary in any dimension).  The forward
map therefore divides by f and the quadratic phase; the inverse multiplies.

The sign of the quadratic phase is a convention this package verifies
empirically: equivalence_run can evaluate both signs and flags a
discrepancy instead of silently flipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classical import Potential
from .errors import InvalidInputError
from .fields import (
    EDGE_ALIAS_RATIO,
    GridSpec,
    WaveField,
    edge_magnitude_ratio,
    fidelity,
    sample_at,
)
from .lattice import EnvelopeFrame, LatticeSpec, matched_envelope, propagate_envelope
from .schrodinger import HBAR_EFF, LabPotential, evolve_lab, evolve_normalized


@dataclass(frozen=True)
class TransformFrame:
    """Complete transform context at one lab time t.

    g = dbeta/(4 sqrt(2)) and f = beta^(-dim/4) are derived on construction
    so the stated identities hold exactly.
    """

    beta: float
    dbeta: float
    tau: float
    t: float = 0.0
    dim: int = 1

    def __post_init__(self):
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise InvalidInputError(f"beta = {self.beta} must be positive")
        if self.dim not in (1, 2):
            raise InvalidInputError("dim must be 1 or 2")

    @property
    def g(self) -> float:
        return self.dbeta / (4.0 * HBAR_EFF)

    @property
    def f(self) -> float:
        return self.beta ** (-self.dim / 4.0)


def frame_at(
    lattice: LatticeSpec, envelope0: EnvelopeFrame, t: float, dim: int = 1
) -> TransformFrame:
    """Transform frame at lab time t from an envelope initial condition (s == t)."""
    env = propagate_envelope(envelope0, lattice, t)
    return TransformFrame(beta=env.beta, dbeta=env.dbeta, tau=env.tau, t=t, dim=dim)


def _scaled_samples(field: WaveField, target: GridSpec, scale: float) -> np.ndarray:
    """Evaluate the field at scaled target coordinates.

    Points outside the source box are zeroed rather than wrapped: the
    trigonometric interpolant is periodic, but a transformable field has
    decayed below ~1e-12 at the edges, so zero is the faithful extension.
    """
    pts = tuple(target.axis(i) * scale for i in range(target.dim))
    vals = sample_at(field, pts)
    for i, p in enumerate(pts):
        outside = np.abs(p) > field.grid.l_halves[i]
        if np.any(outside):
            sl = [slice(None)] * target.dim
            sl[i] = outside
            vals[tuple(sl)] = 0.0
    return vals


def _alias_warnings(field: WaveField) -> tuple[str, ...]:
    ratio = edge_magnitude_ratio(field)
    if ratio > EDGE_ALIAS_RATIO:
        return field.warnings + (
            f"transform aliasing risk: edge magnitude ratio {ratio:.3e}",
        )
    return field.warnings


def ermakov_forward(
    field: WaveField, frame: TransformFrame, target: GridSpec, flip_phase_sign: bool = False
) -> WaveField:
    """Lab field at time t -> normalized field at time tau.

    psi_N(r_N) = f^(-1) exp(-i g r_N^2) psi(r_N sqrt(beta)), realized by
    trigonometric resampling of psi at the scaled coordinates.
    """
    if target.dim != field.grid.dim or frame.dim != field.grid.dim:
        raise InvalidInputError("field, frame, and target dimensions must agree")
    sb = math.sqrt(frame.beta)
    vals = _scaled_samples(field, target, sb)
    sign = +1.0 if flip_phase_sign else -1.0
    vals = vals * (np.exp(sign * 1j * frame.g * target.r2_mesh()) / frame.f)
    return WaveField(target, vals, time=frame.tau, warnings=_alias_warnings(field))


def ermakov_inverse(
    field_n: WaveField, frame: TransformFrame, target: GridSpec
) -> WaveField:
    """Normalized field at time tau -> lab field at time t (exact inverse)."""
    if target.dim != field_n.grid.dim or frame.dim != field_n.grid.dim:
        raise InvalidInputError("field, frame, and target dimensions must agree")
    sb = math.sqrt(frame.beta)
    vals = _scaled_samples(field_n, target, 1.0 / sb)
    r_n2 = target.r2_mesh() / frame.beta
    vals = vals * (frame.f * np.exp(1j * frame.g * r_n2))
    return WaveField(target, vals, time=frame.t, warnings=_alias_warnings(field_n))


@dataclass(frozen=True)
class NormalizedPotential:
    """Descriptor of V_N(r_N) = r_N^2/2 + beta * U(r_N sqrt(beta)) at a frame.

    For the scale-invariant class (a/r^2 with zero regularization) the extra
    term is exactly frame independent; tau_independent records that.
    """

    u_lab: Potential
    beta: float

    @property
    def tau_independent(self) -> bool:
        if self.u_lab.kind == "none":
            return True
        return self.u_lab.kind == "inverse_square" and self.u_lab.eps == 0.0

    def extra_potential(self) -> Potential:
        """The transformed extra term as a closed-form Potential."""
        u, b = self.u_lab, self.beta
        if u.kind == "none":
            return u
        if u.kind == "inverse_square":
            # beta * a / (beta r^2 + eps^2) = a / (r^2 + eps^2/beta)
            return Potential("inverse_square", u.strength, u.eps / math.sqrt(b))
        if u.kind == "quadratic":
            return Potential("quadratic", u.strength * b * b)
        return Potential("quartic", u.strength * b**3)

    def extra_values(self, grid: GridSpec) -> np.ndarray:
        p = self.extra_potential()
        return np.asarray(p.value(*grid.meshes()), dtype=float)

    def total_values(self, grid: GridSpec) -> np.ndarray:
        return 0.5 * grid.r2_mesh() + self.extra_values(grid)


def transform_potential(u: Potential, frame: TransformFrame) -> NormalizedPotential:
    """Map a lab potential descriptor to its normalized-frame descriptor."""
    return NormalizedPotential(u_lab=u, beta=frame.beta)


@dataclass(frozen=True)
class EquivalenceResult:
    """Per-checkpoint comparison of the two evolution routes."""

    times: tuple[float, ...]
    taus: tuple[float, ...]
    fidelities: tuple[float, ...]
    norms_direct: tuple[float, ...]
    norms_transformed: tuple[float, ...]
    phase_sign_flip_preferred: bool

    @property
    def min_fidelity(self) -> float:
        return min(self.fidelities)

    @property
    def max_defect(self) -> float:
        return max(1.0 - f for f in self.fidelities)


def checkpoint_times(lattice: LatticeSpec, n_periods: int = 1) -> list[float]:
    """Segment-boundary times over n_periods (beta, beta' known in closed form)."""
    bounds = lattice.boundaries()
    out = []
    for p in range(n_periods):
        for b in bounds[1:]:
            out.append(p * lattice.period + float(b))
    return out


def equivalence_run(
    lattice: LatticeSpec,
    u_lab: Potential,
    psi0: WaveField,
    target: GridSpec,
    n_periods: int = 1,
    dt: float = 5e-4,
    check_phase_sign: bool = True,
) -> EquivalenceResult:
    """Evolve-then-transform vs transform-then-evolve at matched (t, tau) pairs.

    Route A propagates the lab equation with K(t) from the lattice and maps
    each checkpoint through the forward transform; route B maps the initial
    state once and propagates the normalized equation to tau(t).  Checkpoints
    sit at segment boundaries.  Requires the normalized extra potential to be
    tau independent (U = 0, exact 1/r^2 class, or constant-beta lattice).
    """
    from .fields import norm2  # local import to keep module load cheap

    env0 = matched_envelope(lattice)
    frame0 = frame_at(lattice, env0, 0.0, dim=psi0.grid.dim)
    npot = transform_potential(u_lab, frame0)
    k_values = {k for k, _ in lattice.segments}
    beta_constant = len(k_values) == 1 and abs(frame0.dbeta) < 1e-12
    if not (npot.tau_independent or beta_constant):
        raise InvalidInputError(
            "normalized potential is tau dependent for this lattice/potential; "
            "the equivalence run covers the integrable construction only"
        )
    v_extra = npot.extra_potential()
    psi_n = ermakov_forward(psi0, frame0, target)
    psi_lab = psi0
    times, taus, fids, na, nb = [], [], [], [], []
    flip_preferred = False
    for t_i in checkpoint_times(lattice, n_periods):
        frame_i = frame_at(lattice, env0, t_i, dim=psi0.grid.dim)
        psi_lab = evolve_lab(psi_lab, LabPotential(lattice, u_lab), t_i, dt)
        psi_n = evolve_normalized(psi_n, v_extra, frame_i.tau, dt)
        direct = ermakov_forward(psi_lab, frame_i, target)
        fid = fidelity(direct, psi_n)
        if check_phase_sign and abs(frame_i.g) > 1e-9:
            flipped = ermakov_forward(psi_lab, frame_i, target, flip_phase_sign=True)
            if fidelity(flipped, psi_n) > fid + 1e-6:
                flip_preferred = True
        times.append(t_i)
        taus.append(frame_i.tau)
        fids.append(fid)
        na.append(norm2(direct))
        nb.append(norm2(psi_n))
    return EquivalenceResult(
        times=tuple(times),
        taus=tuple(taus),
        fidelities=tuple(fids),
        norms_direct=tuple(na),
        norms_transformed=tuple(nb),
        phase_sign_flip_preferred=flip_preferred,
    )
