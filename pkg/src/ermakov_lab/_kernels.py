"""Hot numeric kernels: numba-compiled loops with a pure-NumPy fallback.

The two inner loops that dominate runtime are jitted when numba is
available: symplectic particle stepping (sequential in time, scalar math)
and the per-node 2x2 spin rotation (elementwise over the grid).  Setting
the environment variable ERMAKOV_LAB_NUMBA=0 before import selects the
fallback path: the same Python loop for tracking and a vectorized NumPy
implementation for the spin rotation.  Both paths apply identical
operations per element, so results agree to floating-point reassociation
(<= 1e-13).  benchmarks/bench_kernels.py compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("ERMAKOV_LAB_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _env not in ("0", "false", "off", "no")
NUMBA_ENABLED = False
if NUMBA_REQUESTED:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a hard dependency
        pass

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):  # noqa: D103 - identity decorator fallback
        if args and callable(args[0]):
            return args[0]

        def deco(f):
            return f

        return deco


# Potential tags shared with classical.py
POT_NONE = 0
POT_QUADRATIC = 1
POT_QUARTIC = 2
POT_INVERSE_SQUARE = 3


def _base_grad(kind, c, eps, x, y):
    """Gradient of the base potential form at (x, y)."""
    if kind == POT_QUADRATIC:  # c * r^2 / 2
        return c * x, c * y
    if kind == POT_QUARTIC:  # c * r^4 / 4
        r2 = x * x + y * y
        return c * r2 * x, c * r2 * y
    if kind == POT_INVERSE_SQUARE:  # c / (r^2 + eps^2)
        d = x * x + y * y + eps * eps
        f = -2.0 * c / (d * d)
        return f * x, f * y
    return 0.0, 0.0


def _track_kdk(
    y0,
    seg_k,
    seg_len,
    boundaries,
    steps_per_segment,
    n_periods,
    pot_kind,
    pot_c,
    pot_eps,
    mu_indep,
    beta_nodes,
    out,
):
    """Kick-drift-kick transport through the periodic lattice.

    beta_nodes holds the envelope beta at every kick node of one period
    (length n_seg * steps_per_segment + 1); it is only read when
    mu_indep == 1, where the potential is beta * scaled, i.e.
    V(x, y, s) = base(x / sqrt(beta), y / sqrt(beta)) / beta.

    Records (s, x, px, y, py) at every segment boundary into `out` and
    returns the number of rows written (short count = non-finite state,
    trajectory truncated).
    """
    x = y0[0]
    px = y0[1]
    yy = y0[2]
    py = y0[3]
    n_seg = seg_k.shape[0]
    period = boundaries[n_seg]
    out[0, 0] = 0.0
    out[0, 1] = x
    out[0, 2] = px
    out[0, 3] = yy
    out[0, 4] = py
    rec = 1
    for p in range(n_periods):
        node = 0
        for i_seg in range(n_seg):
            k = seg_k[i_seg]
            h = seg_len[i_seg] / steps_per_segment
            for _ in range(steps_per_segment):
                gx = 0.0
                gy = 0.0
                if pot_kind > 0:
                    if mu_indep == 1:
                        b = beta_nodes[node]
                        sb = np.sqrt(b)
                        bx, by = _base_grad(pot_kind, pot_c, pot_eps, x / sb, yy / sb)
                        gx = bx / (b * sb)
                        gy = by / (b * sb)
                    else:
                        gx, gy = _base_grad(pot_kind, pot_c, pot_eps, x, yy)
                px -= 0.5 * h * (k * x + gx)
                py -= 0.5 * h * (k * yy + gy)
                x += h * px
                yy += h * py
                node += 1
                gx = 0.0
                gy = 0.0
                if pot_kind > 0:
                    if mu_indep == 1:
                        b = beta_nodes[node]
                        sb = np.sqrt(b)
                        bx, by = _base_grad(pot_kind, pot_c, pot_eps, x / sb, yy / sb)
                        gx = bx / (b * sb)
                        gy = by / (b * sb)
                    else:
                        gx, gy = _base_grad(pot_kind, pot_c, pot_eps, x, yy)
                px -= 0.5 * h * (k * x + gx)
                py -= 0.5 * h * (k * yy + gy)
            finite = (
                x == x
                and px == px
                and yy == yy
                and py == py
                and abs(x) < 1e300
                and abs(px) < 1e300
                and abs(yy) < 1e300
                and abs(py) < 1e300
            )
            if not finite:
                return rec
            out[rec, 0] = p * period + boundaries[i_seg + 1]
            out[rec, 1] = x
            out[rec, 2] = px
            out[rec, 3] = yy
            out[rec, 4] = py
            rec += 1
    return rec


def _spin_rotate_loop(up, dn, bx, by, bz, coef, up_out, dn_out):
    """exp(-i * coef * (sigma . B)) applied per node (Rodrigues 2x2 form)."""
    n = up.shape[0]
    for i in range(n):
        tx = coef * bx[i]
        ty = coef * by[i]
        tz = coef * bz[i]
        th = np.sqrt(tx * tx + ty * ty + tz * tz)
        u = up[i]
        d = dn[i]
        if th == 0.0:
            up_out[i] = u
            dn_out[i] = d
            continue
        c = np.cos(th)
        sn = np.sin(th) / th
        sx = tx * sn
        sy = ty * sn
        sz = tz * sn
        up_out[i] = (c - 1j * sz) * u + (-sy - 1j * sx) * d
        dn_out[i] = (sy - 1j * sx) * u + (c + 1j * sz) * d
    return up_out, dn_out


def spin_rotate_numpy(up, dn, bx, by, bz, coef):
    """Vectorized NumPy implementation of the per-node spin rotation."""
    tx = coef * bx
    ty = coef * by
    tz = coef * bz
    th = np.sqrt(tx * tx + ty * ty + tz * tz)
    c = np.cos(th)
    sn = np.sinc(th / np.pi)  # sin(th)/th with the correct th -> 0 limit
    sx = tx * sn
    sy = ty * sn
    sz = tz * sn
    up_out = (c - 1j * sz) * up + (-sy - 1j * sx) * dn
    dn_out = (sy - 1j * sx) * up + (c + 1j * sz) * dn
    return up_out, dn_out


track_kdk_python = _track_kdk
spin_rotate_numba = None
track_kdk_numba = None

if NUMBA_ENABLED:
    _base_grad = njit(cache=True, error_model="numpy")(_base_grad)
    track_kdk_numba = njit(cache=True, error_model="numpy")(_track_kdk)
    _spin_rotate_numba_loop = njit(cache=True, error_model="numpy")(_spin_rotate_loop)

    def spin_rotate_numba(up, dn, bx, by, bz, coef):  # noqa: F811
        shape = up.shape
        up_out = np.empty(up.size, dtype=np.complex128)
        dn_out = np.empty(dn.size, dtype=np.complex128)
        _spin_rotate_numba_loop(
            np.ascontiguousarray(up).ravel(),
            np.ascontiguousarray(dn).ravel(),
            np.ascontiguousarray(bx, dtype=np.float64).ravel(),
            np.ascontiguousarray(by, dtype=np.float64).ravel(),
            np.ascontiguousarray(bz, dtype=np.float64).ravel(),
            float(coef),
            up_out,
            dn_out,
        )
        return up_out.reshape(shape), dn_out.reshape(shape)

    track_kdk = track_kdk_numba
    spin_rotate = spin_rotate_numba
    ACTIVE_BACKEND = "numba"
else:
    track_kdk = track_kdk_python
    spin_rotate = spin_rotate_numpy
    ACTIVE_BACKEND = "numpy"
