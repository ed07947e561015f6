"""Closed-form oracles: drift envelope, oscillator eigenstates under the
sqrt(2) convention, the separable radial family, and eigenmode-population
(Lewis-Riesenfeld) diagnostics.

Every oracle is validated by substituting it back into its defining
equation before being trusted; no energy constants for the 1/r^2 family
are imported from elsewhere -- the radial finite-volume solver is the
authority, which keeps the nonstandard unit convention self-consistent.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import eval_hermite

from .errors import InvalidInputError
from .fields import GridSpec, WaveField, laplacian, norm2
from .transform import TransformFrame, ermakov_forward

SQRT2 = math.sqrt(2.0)
_ELL = 2.0**0.25  # oscillator length: exp(-x^2/(2 ell^2)) with ell^2 = sqrt(2)


def drift_beta(t):
    """Envelope of free motion from a waist: beta = 1 + t^2, beta' = 2t."""
    t = np.asarray(t, dtype=float)
    return 1.0 + t * t, 2.0 * t


def drift_beta_residual(ts) -> float:
    """|(sqrt(beta))'' - beta^(-3/2)| for the closed form (K = 0).

    The second derivative is substituted analytically through a different
    floating-point route than the right-hand side:
    w'' = d/dt [t (1+t^2)^(-1/2)] = (1+t^2)^(-1/2) - t^2 (1+t^2)^(-3/2).
    """
    ts = np.asarray(ts, dtype=float)
    s = 1.0 + ts * ts
    wpp = s ** (-0.5) - ts * ts * s ** (-1.5)
    beta, _ = drift_beta(ts)
    return float(np.max(np.abs(wpp - beta ** (-1.5))))


def oscillator_energy(n: int) -> float:
    """E_n = (n + 1/2) sqrt(2) for -psi'' + (x^2/2) psi = E psi."""
    if n < 0:
        raise InvalidInputError("n must be >= 0")
    return (n + 0.5) * SQRT2


def oscillator_eigens(n: int, grid: GridSpec) -> tuple[float, WaveField]:
    """Closed-form 1D Hermite-Gaussian eigenpair sampled on the grid."""
    if grid.dim != 1:
        raise InvalidInputError("oscillator_eigens is 1D")
    if n < 0:
        raise InvalidInputError("n must be >= 0")
    x = grid.axis(0)
    xi = x / _ELL
    norm = 1.0 / math.sqrt(float(2**n) * math.factorial(n) * _ELL * math.sqrt(math.pi))
    vals = norm * eval_hermite(n, xi) * np.exp(-0.5 * xi * xi)
    return oscillator_energy(n), WaveField(grid, vals.astype(np.complex128))


def oscillator_eigen_residual(n: int, grid: GridSpec) -> float:
    """L2 residual |H phi_n - E_n phi_n| with the spectral Hamiltonian."""
    e, phi = oscillator_eigens(n, grid)
    h_phi = -laplacian(phi).values + 0.5 * grid.r2_mesh() * phi.values
    res = h_phi - e * phi.values
    return math.sqrt(float(np.sum(np.abs(res) ** 2) * grid.cell_volume))


def _radial_spectrum(c: float, r_max: float, n_cells: int, k: int) -> np.ndarray:
    """Lowest k eigenvalues of -R'' - R'/r + (c/r^2 + r^2/2) R = E R on (0, r_max).

    Conservative finite-volume discretization of -(1/r)(r R')' on r_j = j h;
    the r = 0 node participates (Neumann-like, via the exact h^2/8 cell
    volume) only for c = 0, otherwise R(0) = 0.
    """
    h = r_max / n_cells
    r = np.arange(n_cells + 1) * h
    include_origin = c == 0.0
    j0 = 0 if include_origin else 1
    idx = np.arange(j0, n_cells)  # R = 0 at r_max
    r_minus = (idx - 0.5) * h
    r_plus = (idx + 0.5) * h
    w = r[idx] * h
    v = 0.5 * r[idx] ** 2
    if include_origin:
        r_minus[0] = 0.0
        w[0] = h * h / 8.0
        # v[0]: r^2/2 at the origin is 0; centrifugal term absent for c == 0
    else:
        v = v + c / r[idx] ** 2
    diag = ((r_minus + r_plus) / h + w * v) / w
    sub = -(r_plus[:-1] / h) / np.sqrt(w[:-1] * w[1:])
    return eigh_tridiagonal(diag, sub, select="i", select_range=(0, k - 1))[0]


def radial_separable_energies(
    a: float,
    n_r: int = 0,
    m: int = 0,
    r_max: float = 14.0,
    n_cells: int = 4096,
) -> float:
    """Energy of the 2D separable family -lap + r^2/2 + a/r^2, sector m.

    Produced by the radial finite-volume oracle at two resolutions with
    Richardson extrapolation; no literature formula is quoted.  Requires
    m^2 + a >= 0 (below that the centrifugal collapse makes the spectrum
    unbounded).
    """
    if n_r < 0:
        raise InvalidInputError("n_r must be >= 0")
    c = float(m * m) + float(a)
    if c < 0.0:
        raise InvalidInputError(
            f"m^2 + a = {c} < 0: below centrifugal stability, no bound spectrum"
        )
    coarse = _radial_spectrum(c, r_max, n_cells // 2, n_r + 1)[n_r]
    fine = _radial_spectrum(c, r_max, n_cells, n_r + 1)[n_r]
    return float((4.0 * fine - coarse) / 3.0)


def radial_oracle_self_consistency(
    a: float, n_r: int = 0, m: int = 0, r_max: float = 14.0, n_cells: int = 4096
) -> float:
    """|E(fine) - E(coarse)| of the radial oracle, its own error estimate."""
    c = float(m * m) + float(a)
    if c < 0.0:
        raise InvalidInputError("m^2 + a < 0")
    coarse = _radial_spectrum(c, r_max, n_cells // 2, n_r + 1)[n_r]
    fine = _radial_spectrum(c, r_max, n_cells, n_r + 1)[n_r]
    return float(abs(fine - coarse))


def radial_table(
    a_values, n_r_max: int = 2, m_values=(0, 1), r_max: float = 14.0, n_cells: int = 4096
) -> list[dict]:
    """Tabulated oracle energies per (a, n_r, m) for CSV emission."""
    rows = []
    for a in a_values:
        for m in m_values:
            for n_r in range(n_r_max + 1):
                rows.append(
                    {
                        "a": float(a),
                        "n_r": n_r,
                        "m": m,
                        "energy": radial_separable_energies(a, n_r, m, r_max, n_cells),
                    }
                )
    return rows


def eigenmode_populations(
    field_n: WaveField, n_modes: int = 20
) -> np.ndarray:
    """|<phi_n, psi_N>|^2 against the closed-form oscillator basis (1D)."""
    if field_n.grid.dim != 1:
        raise InvalidInputError("population projection is 1D")
    cell = field_n.grid.cell_volume
    pops = np.empty(n_modes)
    for n in range(n_modes):
        _, phi = oscillator_eigens(n, field_n.grid)
        c = np.vdot(phi.values, field_n.values) * cell
        pops[n] = abs(c) ** 2
    return pops


def lewis_riesenfeld_check(
    fields: list[WaveField],
    frames: list[TransformFrame],
    target: GridSpec | None = None,
    n_modes: int = 20,
) -> dict:
    """Project transformed snapshots onto normalized-frame eigenmodes.

    Constant populations |c_n|^2 along the trajectory mean the invariant is
    conserved.  Returns times, the population matrix, the worst per-mode
    drift, and the retained fraction sum(|c_n|^2); a low retained fraction
    flags an under-resolved projection basis in 'warnings'.
    """
    if len(fields) != len(frames):
        raise InvalidInputError("need one frame per field")
    if not fields:
        raise InvalidInputError("need at least one snapshot")
    tgt = target if target is not None else fields[0].grid
    pop_rows = []
    times = []
    for f, fr in zip(fields, frames):
        psi_n = ermakov_forward(f, fr, tgt)
        pops = eigenmode_populations(psi_n, n_modes) / norm2(f)
        pop_rows.append(pops)
        times.append(fr.t)
    pops = np.array(pop_rows)
    drift = np.max(np.abs(pops - pops[0]), axis=0)
    retained = pops.sum(axis=1)
    warnings = []
    if retained.min() < 0.999:
        warnings.append(
            f"projection basis retains only {retained.min():.6f} of the norm; "
            f"increase n_modes or the target grid"
        )
    return {
        "times": np.array(times),
        "populations": pops,
        "max_drift": float(drift.max()),
        "per_mode_drift": drift,
        "retained_fraction": retained,
        "warnings": warnings,
    }
