"""Classical tracking through time-dependent focusing, normalized coordinates,
and invariant diagnostics.

The Hamiltonian is H = (px^2 + py^2)/2 + K(s)(x^2 + y^2)/2 + V(x, y, s).
Tracking uses a fixed-step second-order symplectic kick-drift-kick split;
the map to normalized coordinates plus the Courant-Snyder and normalized
Hamiltonian values diagnose invariant conservation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidInputError
from .lattice import (
    EnvelopeFrame,
    LatticeSpec,
    _beta_in_segment,
    matched_envelope,
    propagate_envelope,
)

_POT_KINDS = {
    "none": _kernels.POT_NONE,
    "quadratic": _kernels.POT_QUADRATIC,
    "quartic": _kernels.POT_QUARTIC,
    "inverse_square": _kernels.POT_INVERSE_SQUARE,
}


@dataclass(frozen=True)
class PhaseState:
    """Classical phase-space point (x, px, y, py) at longitudinal position s."""

    x: float
    px: float
    y: float = 0.0
    py: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        for name in ("x", "px", "y", "py", "s"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"PhaseState.{name} is not finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.px, self.y, self.py])


@dataclass(frozen=True)
class Potential:
    """Base spatial potential form, time independent.

    kinds: none | quadratic c*r^2/2 | quartic c*r^4/4 | inverse_square
    a/(r^2 + eps^2).  eps regularizes the 1/r^2 singularity (default 1e-3
    in grid units).
    """

    kind: str = "none"
    strength: float = 0.0
    eps: float = 1e-3

    def __post_init__(self):
        if self.kind not in _POT_KINDS:
            raise InvalidInputError(f"unknown potential kind {self.kind!r}")
        if self.kind == "inverse_square" and self.eps < 0.0:
            raise InvalidInputError("eps must be >= 0")

    def value(self, x, y=0.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "none":
            return np.zeros(np.broadcast(x, y).shape)
        if self.kind == "quadratic":
            return 0.5 * self.strength * (x * x + y * y)
        if self.kind == "quartic":
            return 0.25 * self.strength * (x * x + y * y) ** 2
        r2 = x * x + y * y
        with np.errstate(divide="ignore"):
            return self.strength / (r2 + self.eps**2)

    def grad(self, x, y=0.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "none":
            z = np.zeros(np.broadcast(x, y).shape)
            return z, z.copy()
        if self.kind == "quadratic":
            return self.strength * x, self.strength * y
        if self.kind == "quartic":
            r2 = x * x + y * y
            return self.strength * r2 * x, self.strength * r2 * y
        d = x * x + y * y + self.eps**2
        f = -2.0 * self.strength / (d * d)
        return f * x, f * y


@dataclass(frozen=True)
class PotentialSpec:
    """Tag-discriminated V(x, y, s).

    mu_independent=False: V is the base form, frozen in lab coordinates.
    mu_independent=True: V(x, y, s) = base(x/sqrt(beta), y/sqrt(beta))/beta
    with the lattice's matched beta(s) -- the construction whose normalized
    image is independent of the new time, so the normalized Hamiltonian is
    conserved.
    """

    base: Potential = Potential()
    mu_independent: bool = False

    @property
    def kind_tag(self) -> int:
        return _POT_KINDS[self.base.kind]

    def value_lab(self, x, y, beta: float = 1.0):
        if not self.mu_independent:
            return self.base.value(x, y)
        sb = math.sqrt(beta)
        return self.base.value(np.asarray(x) / sb, np.asarray(y) / sb) / beta


NO_POTENTIAL = PotentialSpec(Potential("none"), mu_independent=False)


def to_normalized(state: PhaseState, frame: EnvelopeFrame) -> PhaseState:
    """Map (z, p) -> (z/sqrt(beta), p*sqrt(beta) - beta'*z/(2 sqrt(beta))) per plane.

    The independent variable of the result is the phase advance mu.
    """
    sb = math.sqrt(frame.beta)
    half_slope = 0.5 * frame.dbeta / sb
    return PhaseState(
        x=state.x / sb,
        px=state.px * sb - half_slope * state.x,
        y=state.y / sb,
        py=state.py * sb - half_slope * state.y,
        s=frame.mu,
    )


def from_normalized(state: PhaseState, frame: EnvelopeFrame) -> PhaseState:
    """Exact algebraic inverse of to_normalized; result's s is the frame's s."""
    sb = math.sqrt(frame.beta)
    return PhaseState(
        x=state.x * sb,
        px=(state.px + 0.5 * frame.dbeta * state.x) / sb,
        y=state.y * sb,
        py=(state.py + 0.5 * frame.dbeta * state.y) / sb,
        s=frame.s,
    )


def courant_snyder(state_normalized: PhaseState) -> tuple[float, float]:
    """Per-plane invariant (p_N^2 + z_N^2)/2 of an already-normalized state."""
    ix = 0.5 * (state_normalized.px**2 + state_normalized.x**2)
    iy = 0.5 * (state_normalized.py**2 + state_normalized.y**2)
    return ix, iy


def normalized_hamiltonian(
    state_normalized: PhaseState, potential: PotentialSpec = NO_POTENTIAL
) -> float:
    """(p_xN^2 + p_yN^2)/2 + (x_N^2 + y_N^2)/2 + V_base(x_N, y_N).

    Only meaningful (conserved) for the mu-independent potential family or
    V = 0; other specs are rejected.
    """
    if potential.base.kind != "none" and not potential.mu_independent:
        raise InvalidInputError(
            "normalized_hamiltonian requires the mu-independent family (or none)"
        )
    kin = 0.5 * (state_normalized.px**2 + state_normalized.py**2)
    quad = 0.5 * (state_normalized.x**2 + state_normalized.y**2)
    v = float(potential.base.value(state_normalized.x, state_normalized.y))
    return kin + quad + v


def _beta_at_kick_nodes(lattice: LatticeSpec, steps_per_segment: int) -> np.ndarray:
    """Matched beta at every kick node of one period (n_seg*steps + 1 values)."""
    frame = matched_envelope(lattice)
    chunks = []
    for k, length in lattice.segments:
        offs = np.arange(steps_per_segment) * (length / steps_per_segment)
        chunks.append(_beta_in_segment(frame.beta, frame.alpha, k, offs))
        frame = propagate_envelope(frame, lattice, frame.s + length)
    chunks.append(np.array([frame.beta]))
    return np.concatenate(chunks)


def track(
    state: PhaseState,
    lattice: LatticeSpec,
    potential: PotentialSpec = NO_POTENTIAL,
    n_periods: int = 1,
    steps_per_segment: int = 64,
) -> list[PhaseState]:
    """Symplectic kick-drift-kick transport; records at segment boundaries.

    With potential none the result matches transfer-matrix transport to
    O(step^2).  A non-finite state truncates the trajectory and emits a
    diagnostic warning.
    """
    if steps_per_segment < 1:
        raise InvalidInputError("steps_per_segment must be >= 1")
    if n_periods < 1:
        raise InvalidInputError("n_periods must be >= 1")
    seg_k = np.array([k for k, _ in lattice.segments])
    seg_len = np.array([l for _, l in lattice.segments])
    boundaries = lattice.boundaries()
    if potential.mu_independent and potential.base.kind != "none":
        beta_nodes = _beta_at_kick_nodes(lattice, steps_per_segment)
        mu_flag = 1
    else:
        beta_nodes = np.ones(1)
        mu_flag = 0
    n_records = n_periods * lattice.n_segments + 1
    out = np.empty((n_records, 5))
    rec = _kernels.track_kdk(
        state.as_array(),
        seg_k,
        seg_len,
        boundaries,
        steps_per_segment,
        n_periods,
        potential.kind_tag,
        float(potential.base.strength),
        float(potential.base.eps),
        mu_flag,
        beta_nodes,
        out,
    )
    if rec < n_records:
        warnings.warn(
            f"trajectory truncated at record {rec}/{n_records}: "
            f"state became non-finite (s ~ {out[rec - 1, 0]:.4g})",
            RuntimeWarning,
            stacklevel=2,
        )
    return [
        PhaseState(x=row[1], px=row[2], y=row[3], py=row[4], s=row[0])
        for row in out[:rec]
    ]


def boundary_frames(lattice: LatticeSpec) -> list[EnvelopeFrame]:
    """Matched envelope frames at the n_seg+1 segment boundaries of one period."""
    frames = [matched_envelope(lattice)]
    for _, length in lattice.segments:
        frames.append(propagate_envelope(frames[-1], lattice, frames[-1].s + length))
    return frames


def trajectory_invariants(
    trajectory: list[PhaseState],
    lattice: LatticeSpec,
    potential: PotentialSpec = NO_POTENTIAL,
) -> dict[str, np.ndarray]:
    """Ix, Iy and H_N along a boundary-sampled trajectory via matched frames."""
    frames = boundary_frames(lattice)
    n_seg = lattice.n_segments
    ix = np.empty(len(trajectory))
    iy = np.empty(len(trajectory))
    hn = np.empty(len(trajectory))
    for i, st in enumerate(trajectory):
        # record i sits at boundary i mod n_seg; matched beta is periodic
        frame = frames[i % n_seg]
        norm = to_normalized(st, frame)
        ix[i], iy[i] = courant_snyder(norm)
        hn[i] = normalized_hamiltonian(norm, potential)
    return {"Ix": ix, "Iy": iy, "HN": hn}


def write_trajectory_csv(
    path,
    trajectory: list[PhaseState],
    lattice: LatticeSpec,
    potential: PotentialSpec = NO_POTENTIAL,
) -> None:
    """CSV with header s,x,px,y,py,Ix,Iy,HN."""
    inv = trajectory_invariants(trajectory, lattice, potential)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("s,x,px,y,py,Ix,Iy,HN\n")
        for i, st in enumerate(trajectory):
            fh.write(
                f"{st.s:.16g},{st.x:.16g},{st.px:.16g},{st.y:.16g},{st.py:.16g},"
                f"{inv['Ix'][i]:.16g},{inv['Iy'][i]:.16g},{inv['HN'][i]:.16g}\n"
            )
