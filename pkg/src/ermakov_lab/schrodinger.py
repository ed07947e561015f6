"""Split-operator propagation of i*sqrt(2) dpsi/dt = -lap(psi) + V psi.

The sqrt(2) prefactor is honored literally: it acts as an effective Planck
constant with kinetic coefficient 1, so every propagator applies phases
exp(-i V dt / (2 sqrt(2))) (half potential), exp(-i k^2 dt / sqrt(2))
(full kinetic, spectral), exp(-i V dt / (2 sqrt(2))).  Time-dependent
focusing K(t) comes from a lattice read with s == t; steps are aligned to
segment boundaries so K is constant within each step and the scheme stays
second order.  The stationary problem of the normalized frame is solved by
second-order finite differences (dense/tridiagonal in 1D, sparse
shift-invert in 2D).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh_tridiagonal

from .classical import Potential
from .errors import EigensolverError, InvalidInputError
from .fields import GridSpec, WaveField
from .lattice import LatticeSpec

HBAR_EFF = math.sqrt(2.0)


@dataclass(frozen=True)
class ScaledUnits:
    """Conventions of the scaled evolution equation.

    hbar_eff is the prefactor of i d/dt; the kinetic operator is -lap with
    coefficient 1.  All propagators in this package use exactly these.
    """

    hbar_eff: float = HBAR_EFF
    kinetic_coefficient: float = 1.0


SCALED_UNITS = ScaledUnits()


@dataclass(frozen=True)
class LabPotential:
    """K(t) r^2/2 + U(r): quadratic focusing kept separate from the extra term.

    k_source is either a constant focusing coefficient or a LatticeSpec
    sampled with s == t (periodic continuation).
    """

    k_source: LatticeSpec | float = 0.0
    u: Potential = Potential("none")

    def k_at(self, t: float) -> float:
        if isinstance(self.k_source, LatticeSpec):
            return self.k_source.k_at(t)
        return float(self.k_source)

    def windows(self, t0: float, t_end: float):
        """Yield (start, stop, K) intervals with constant K covering [t0, t_end]."""
        if not isinstance(self.k_source, LatticeSpec):
            yield (t0, t_end, float(self.k_source))
            return
        lat = self.k_source
        t = t0
        guard = 0
        while t < t_end - 1e-13 * max(1.0, abs(t_end)):
            _i, local, k, length = lat.locate(t)
            stop = min(t + (length - local), t_end)
            if stop <= t + 1e-15:
                stop = min(t + length, t_end)  # sitting on a boundary
            yield (t, stop, k)
            t = stop
            guard += 1
            if guard > 10_000_000:
                raise InvalidInputError("window subdivision did not terminate")


def _check_finite(v: np.ndarray, grid: GridSpec, what: str) -> None:
    bad = ~np.isfinite(v)
    if np.any(bad):
        idx = tuple(int(i[0]) for i in np.nonzero(bad))
        coords = tuple(float(grid.axis(d)[idx[d]]) for d in range(grid.dim))
        raise InvalidInputError(f"{what} is non-finite at node {idx}, r = {coords}")


def _n_steps(span: float, dt: float) -> int:
    if dt <= 0.0 or not math.isfinite(dt):
        raise InvalidInputError(f"dt = {dt} must be positive")
    return max(1, int(round(span / dt)))


def _strang_window(
    values: np.ndarray, k2: np.ndarray, v: np.ndarray, span: float, dt: float
) -> np.ndarray:
    """n Strang steps with a time-independent potential over one window."""
    n = _n_steps(span, dt)
    h = span / n
    half = np.exp(v * (-0.5j * h / HBAR_EFF))
    kin = np.exp(-1j * (h / HBAR_EFF) * k2)
    for _ in range(n):
        values = half * values
        values = np.fft.ifftn(kin * np.fft.fftn(values))
        values = half * values
    return values


def evolve_lab(field: WaveField, pot: LabPotential, t_end: float, dt: float) -> WaveField:
    """Propagate the lab-frame equation from field.time to t_end.

    Steps are aligned to the K(t) segment boundaries; within each window the
    potential is time independent so the Strang factors are precomputed.
    """
    if t_end < field.time:
        raise InvalidInputError(f"t_end = {t_end} < field.time = {field.time}")
    if t_end == field.time:
        return field.with_values(field.values.copy())
    grid = field.grid
    r2 = grid.r2_mesh()
    u_vals = np.asarray(pot.u.value(*grid.meshes()), dtype=float)
    _check_finite(u_vals, grid, "potential U")
    k2 = grid.k2_mesh()
    values = field.values
    for start, stop, k in pot.windows(field.time, t_end):
        v = 0.5 * k * r2 + u_vals
        values = _strang_window(values, k2, v, stop - start, dt)
    return field.with_values(values, time=t_end)


def evolve_normalized(field: WaveField, v_extra, tau_end: float, dtau: float) -> WaveField:
    """Propagate the normalized-frame equation from field.time to tau_end.

    v_extra is the potential beyond the universal r_N^2/2 term: a Potential
    (tau-independent, the integrable case), None, or a callable
    (grid, tau) -> ndarray for tau-dependent potentials, sampled at step
    midpoints.
    """
    if tau_end < field.time:
        raise InvalidInputError(f"tau_end = {tau_end} < field.time = {field.time}")
    if tau_end == field.time:
        return field.with_values(field.values.copy())
    grid = field.grid
    r2 = grid.r2_mesh()
    k2 = grid.k2_mesh()
    values = field.values
    span = tau_end - field.time
    if v_extra is None or isinstance(v_extra, Potential):
        extra = (
            np.zeros(grid.shape)
            if v_extra is None
            else np.asarray(v_extra.value(*grid.meshes()), dtype=float)
        )
        _check_finite(extra, grid, "normalized potential")
        values = _strang_window(values, k2, 0.5 * r2 + extra, span, dtau)
        return field.with_values(values, time=tau_end)
    # tau-dependent extra term: midpoint sampling per step
    n = _n_steps(span, dtau)
    h = span / n
    kin = np.exp(-1j * (h / HBAR_EFF) * k2)
    for j in range(n):
        tau_mid = field.time + (j + 0.5) * h
        v = 0.5 * r2 + np.asarray(v_extra(grid, tau_mid), dtype=float)
        _check_finite(v, grid, "normalized potential")
        half = np.exp(v * (-0.5j * h / HBAR_EFF))
        values = half * np.fft.ifftn(kin * np.fft.fftn(half * values))
    return field.with_values(values, time=tau_end)


def _potential_on_grid(v_n, grid: GridSpec) -> np.ndarray:
    if isinstance(v_n, Potential):
        return np.asarray(v_n.value(*grid.meshes()), dtype=float)
    if callable(v_n):
        return np.asarray(v_n(*grid.meshes()), dtype=float)
    return np.asarray(v_n, dtype=float)


def solve_stationary(v_n, grid: GridSpec, n_states: int) -> list[tuple[float, WaveField]]:
    """Lowest n_states eigenpairs of -lap + V_N by central finite differences.

    v_n: Potential, callable(x[, y]), or array of node values.  1D uses the
    dense tridiagonal solver; 2D uses sparse shift-invert Lanczos.
    Eigenfields are L2-normalized with a deterministic (real positive peak)
    phase and returned in ascending-energy order.
    """
    if n_states < 1:
        raise InvalidInputError("n_states must be >= 1")
    v = _potential_on_grid(v_n, grid)
    if v.shape != grid.shape:
        raise InvalidInputError(f"potential shape {v.shape} != grid {grid.shape}")
    _check_finite(v, grid, "stationary potential")
    total = int(np.prod(grid.shape))
    if n_states > total // 2:
        raise InvalidInputError("n_states too large for this grid")
    if grid.dim == 1:
        h = grid.spacing(0)
        diag = 2.0 / h**2 + v
        off = np.full(grid.ns[0] - 1, -1.0 / h**2)
        try:
            energies, vecs = eigh_tridiagonal(
                diag, off, select="i", select_range=(0, n_states - 1)
            )
        except Exception as exc:  # pragma: no cover - LAPACK failure
            raise EigensolverError(str(exc)) from exc
    else:
        hx, hy = grid.spacing(0), grid.spacing(1)
        nx, ny = grid.ns

        def lap1d(n, h):
            return sp.diags(
                [np.full(n - 1, -1.0 / h**2), np.full(n, 2.0 / h**2), np.full(n - 1, -1.0 / h**2)],
                offsets=[-1, 0, 1],
                format="csr",
            )

        a = (
            sp.kron(lap1d(nx, hx), sp.identity(ny, format="csr"))
            + sp.kron(sp.identity(nx, format="csr"), lap1d(ny, hy))
            + sp.diags(v.ravel())
        ).tocsc()
        sigma = float(v.min()) - 1.0
        try:
            energies, vecs = spla.eigsh(a, k=n_states, sigma=sigma, which="LM")
        except Exception as exc:
            raise EigensolverError(f"sparse eigensolve failed: {exc}") from exc
        order = np.argsort(energies)
        energies = energies[order]
        vecs = vecs[:, order]
    out = []
    cell = grid.cell_volume
    for i in range(n_states):
        vec = vecs[:, i].astype(np.complex128)
        vec /= np.sqrt(np.sum(np.abs(vec) ** 2) * cell)
        peak = np.argmax(np.abs(vec))
        phase = vec[peak] / abs(vec[peak])
        vec = vec / phase
        out.append((float(energies[i]), WaveField(grid, vec.reshape(grid.shape))))
    return out


def write_observables_csv(path, rows: list[dict]) -> None:
    """CSV with header t,norm2,ex,er2 (one row per checkpoint)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,norm2,ex,er2\n")
        for r in rows:
            fh.write(f"{r['t']:.16g},{r['norm2']:.16g},{r['ex']:.16g},{r['er2']:.16g}\n")
