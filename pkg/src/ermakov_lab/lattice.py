"""Piecewise-constant focusing lattices and envelope (beta-function) transport.

A lattice is an ordered list of segments with constant focusing strength K
over length L, repeated with period C = sum(L).  Within a segment the
oscillator z'' + K z = 0 has a closed-form 2x2 flow map, and the envelope
beta(s) is transported exactly through those maps; the nonlinear envelope
equation (sqrt(beta))'' + K sqrt(beta) = beta^(-3/2) is used only as a
residual cross-check.  Phase advance mu (= the transform's new time tau) is
accumulated by adaptive quadrature of 1/beta inside each segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import InvalidInputError, SingularEnvelopeError, UnstableLatticeError

_BETA_FLOOR = 1e-12


@dataclass(frozen=True)
class TransferMatrix:
    """2x2 symplectic map acting on (z, z') pairs."""

    m11: float
    m12: float
    m21: float
    m22: float

    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        """Matrix product self @ other (other acts first)."""
        return TransferMatrix(
            self.m11 * other.m11 + self.m12 * other.m21,
            self.m11 * other.m12 + self.m12 * other.m22,
            self.m21 * other.m11 + self.m22 * other.m21,
            self.m21 * other.m12 + self.m22 * other.m22,
        )

    def apply(self, z: float, zp: float) -> tuple[float, float]:
        return (self.m11 * z + self.m12 * zp, self.m21 * z + self.m22 * zp)


IDENTITY = TransferMatrix(1.0, 0.0, 0.0, 1.0)


@dataclass(frozen=True)
class LatticeSpec:
    """Ordered piecewise-constant focusing segments (K, L) with period C."""

    segments: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.segments) == 0:
            raise InvalidInputError("lattice needs at least one segment")
        segs = []
        for i, (k, length) in enumerate(self.segments):
            k = float(k)
            length = float(length)
            if not (math.isfinite(k) and math.isfinite(length)):
                raise InvalidInputError(f"segment {i}: non-finite K or L")
            if length <= 0.0:
                raise InvalidInputError(f"segment {i}: L = {length} must be > 0")
            segs.append((k, length))
        object.__setattr__(self, "segments", tuple(segs))

    @property
    def period(self) -> float:
        return sum(length for _, length in self.segments)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def boundaries(self) -> np.ndarray:
        """Cumulative segment end positions within one period, starting at 0."""
        return np.concatenate([[0.0], np.cumsum([l for _, l in self.segments])])

    def k_at(self, s: float) -> float:
        """Focusing strength at position s (periodic continuation)."""
        _, local, k, _ = self.locate(s)
        del local
        return k

    def locate(self, s: float) -> tuple[int, float, float, float]:
        """Return (segment index, local offset, K, L) for position s mod C."""
        c = self.period
        s_mod = math.fmod(s, c)
        if s_mod < 0.0:
            s_mod += c
        acc = 0.0
        for i, (k, length) in enumerate(self.segments):
            if s_mod < acc + length or i == len(self.segments) - 1:
                return i, s_mod - acc, k, length
            acc += length
        raise AssertionError("unreachable")

    @classmethod
    def from_file(cls, path) -> "LatticeSpec":
        """Parse a plain-text lattice file: one 'K L' pair per line, '#' comments."""
        segments = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise InvalidInputError(
                        f"{path}:{lineno}: expected 'K L', got {raw.rstrip()!r}"
                    )
                try:
                    k, length = float(parts[0]), float(parts[1])
                except ValueError as exc:
                    raise InvalidInputError(f"{path}:{lineno}: {exc}") from exc
                segments.append((k, length))
        return cls(tuple(segments))


@dataclass(frozen=True)
class EnvelopeFrame:
    """Envelope state (beta, beta') plus accumulated phase advance at position s.

    tau duplicates mu: both integrate ds/beta, mu by accelerator convention
    and tau as the reparametrized time of the normalized frame.
    """

    s: float
    beta: float
    dbeta: float
    mu: float
    tau: float

    def __post_init__(self):
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise InvalidInputError(f"beta = {self.beta} must be positive and finite")

    @property
    def alpha(self) -> float:
        return -0.5 * self.dbeta

    @property
    def gamma(self) -> float:
        return (1.0 + self.alpha**2) / self.beta


def segment_matrix(k: float, length: float) -> TransferMatrix:
    """Exact flow map of z'' + K z = 0 over a constant-K segment.

    Trigonometric for K > 0, hyperbolic for K < 0, drift for K = 0.
    """
    k = float(k)
    length = float(length)
    if not (math.isfinite(k) and math.isfinite(length)):
        raise InvalidInputError("segment_matrix: non-finite K or L")
    if length <= 0.0:
        raise InvalidInputError(f"segment_matrix: L = {length} must be > 0")
    if k > 0.0:
        w = math.sqrt(k)
        c, sn = math.cos(w * length), math.sin(w * length)
        return TransferMatrix(c, sn / w, -w * sn, c)
    if k < 0.0:
        w = math.sqrt(-k)
        ch, sh = math.cosh(w * length), math.sinh(w * length)
        return TransferMatrix(ch, sh / w, w * sh, ch)
    return TransferMatrix(1.0, length, 0.0, 1.0)


def one_turn_matrix(lattice: LatticeSpec) -> TransferMatrix:
    """Ordered product of segment maps over one period (first segment acts first)."""
    m = IDENTITY
    for k, length in lattice.segments:
        m = segment_matrix(k, length) @ m
    return m


def matched_envelope(lattice: LatticeSpec) -> EnvelopeFrame:
    """Periodic (matched) envelope at s = 0.

    Standard one-turn Twiss extraction: cos(mu_C) = trace/2 with the branch
    mu_C in (0, pi) for m12 > 0 and (pi, 2pi) for m12 < 0, which makes
    beta0 = m12/sin(mu_C) positive.  Raises UnstableLatticeError when
    |trace| >= 2.
    """
    m = one_turn_matrix(lattice)
    trace = m.m11 + m.m22
    if abs(trace) >= 2.0:
        raise UnstableLatticeError(trace)
    mu_c = math.acos(0.5 * trace)
    if m.m12 < 0.0:
        mu_c = 2.0 * math.pi - mu_c
    sin_mu = math.sin(mu_c)
    beta0 = m.m12 / sin_mu
    dbeta0 = -(m.m11 - m.m22) / sin_mu  # dbeta = -2*alpha, alpha = (m11-m22)/(2 sin mu)
    if beta0 <= _BETA_FLOOR:
        raise SingularEnvelopeError(
            f"matched beta = {beta0:.3e} is not resolvable (mu_C = {mu_c:.6f})"
        )
    return EnvelopeFrame(s=0.0, beta=beta0, dbeta=dbeta0, mu=0.0, tau=0.0)


def _twiss_through(beta: float, alpha: float, m: TransferMatrix) -> tuple[float, float]:
    """Transport (beta, alpha) through a 2x2 map using the positive-definite form."""
    u = m.m11 * beta - m.m12 * alpha
    beta1 = (u * u + m.m12 * m.m12) / beta
    gamma = (1.0 + alpha * alpha) / beta
    alpha1 = (
        -m.m11 * m.m21 * beta
        + (m.m11 * m.m22 + m.m12 * m.m21) * alpha
        - m.m12 * m.m22 * gamma
    )
    return beta1, alpha1


def _beta_in_segment(
    beta0: float, alpha0: float, k: float, offsets: np.ndarray
) -> np.ndarray:
    """Vectorized beta at local offsets inside one constant-K segment."""
    offsets = np.asarray(offsets, dtype=float)
    out = np.empty_like(offsets)
    flat = offsets.ravel()
    res = np.empty_like(flat)
    for i, d in enumerate(flat):
        if d == 0.0:
            res[i] = beta0
            continue
        m = segment_matrix(k, d)
        u = m.m11 * beta0 - m.m12 * alpha0
        res[i] = (u * u + m.m12 * m.m12) / beta0
    out.ravel()[:] = res
    return out


def _segment_phase_advance(
    beta0: float, alpha0: float, k: float, length: float
) -> float:
    """Integral of ds/beta over [0, length] inside one constant-K segment."""
    if length <= 0.0:
        return 0.0

    def inv_beta(d: float) -> float:
        if d <= 0.0:
            return 1.0 / beta0
        m = segment_matrix(k, d)
        u = m.m11 * beta0 - m.m12 * alpha0
        b = (u * u + m.m12 * m.m12) / beta0
        if b <= _BETA_FLOOR:
            raise SingularEnvelopeError(f"beta = {b:.3e} inside segment")
        return 1.0 / b

    val, _err = quad(inv_beta, 0.0, length, epsabs=1e-12, epsrel=1e-12, limit=200)
    return val


def propagate_envelope(
    frame: EnvelopeFrame, lattice: LatticeSpec, s_end: float
) -> EnvelopeFrame:
    """Transport an envelope frame forward to s_end (>= frame.s).

    beta and beta' move through exact per-segment maps; mu and tau accumulate
    the quadrature of 1/beta.  Raises SingularEnvelopeError if beta collapses.
    """
    if s_end < frame.s:
        raise InvalidInputError(f"s_end = {s_end} < start s = {frame.s}")
    s = frame.s
    beta, alpha = frame.beta, frame.alpha
    mu = frame.mu
    remaining = s_end - frame.s
    while remaining > 1e-15 * max(1.0, abs(s_end)):
        _idx, local, k, length = lattice.locate(s)
        step = min(length - local, remaining)
        if step <= 0.0:
            # numerical edge: sitting exactly on a boundary
            s += 1e-16
            continue
        mu += _segment_phase_advance(beta, alpha, k, step)
        beta, alpha = _twiss_through(beta, alpha, segment_matrix(k, step))
        if beta <= _BETA_FLOOR:
            raise SingularEnvelopeError(f"beta = {beta:.3e} at s = {s + step}")
        s += step
        remaining = s_end - s
    return EnvelopeFrame(
        s=s_end,
        beta=beta,
        dbeta=-2.0 * alpha,
        mu=mu,
        tau=frame.tau + (mu - frame.mu),
    )


def envelope_table(
    lattice: LatticeSpec,
    frame0: EnvelopeFrame,
    samples_per_segment: int = 64,
    n_periods: int = 1,
) -> dict[str, np.ndarray]:
    """Dense sampling of (s, beta, dbeta, mu, tau) over n_periods.

    Sample points are uniform within each segment and include both boundary
    endpoints, so segment edges (where beta' is discontinuous in slope) are
    represented exactly.
    """
    if samples_per_segment < 1:
        raise InvalidInputError("samples_per_segment must be >= 1")
    s_list = [frame0.s]
    beta_list = [frame0.beta]
    dbeta_list = [frame0.dbeta]
    mu_list = [frame0.mu]
    frame = frame0
    for _ in range(n_periods):
        for k, length in lattice.segments:
            beta0, alpha0 = frame.beta, frame.alpha
            offs = np.linspace(0.0, length, samples_per_segment + 1)[1:]
            betas = _beta_in_segment(beta0, alpha0, k, offs)
            mus = np.empty_like(offs)
            acc = frame.mu
            prev = 0.0
            for j, d in enumerate(offs):
                acc += _segment_phase_advance(
                    *_twiss_at(beta0, alpha0, k, prev), k, d - prev
                )
                mus[j] = acc
                prev = d
            alphas = np.empty_like(offs)
            for j, d in enumerate(offs):
                m = segment_matrix(k, d)
                _, alphas[j] = _twiss_through(beta0, alpha0, m)
            s_list.extend(frame.s + offs)
            beta_list.extend(betas)
            dbeta_list.extend(-2.0 * alphas)
            mu_list.extend(mus)
            frame = EnvelopeFrame(
                s=frame.s + length,
                beta=betas[-1],
                dbeta=-2.0 * alphas[-1],
                mu=mus[-1],
                tau=mus[-1] - frame0.mu + frame0.tau,
            )
    mu_arr = np.array(mu_list)
    return {
        "s": np.array(s_list),
        "beta": np.array(beta_list),
        "dbeta": np.array(dbeta_list),
        "mu": mu_arr,
        "tau": mu_arr - frame0.mu + frame0.tau,
    }


def _twiss_at(
    beta0: float, alpha0: float, k: float, offset: float
) -> tuple[float, float]:
    if offset == 0.0:
        return beta0, alpha0
    return _twiss_through(beta0, alpha0, segment_matrix(k, offset))


def ermakov_residual(
    lattice: LatticeSpec,
    frame0: EnvelopeFrame,
    points_per_segment: int = 100,
    fd_step: float = 1e-3,
) -> float:
    """Max |(sqrt(beta))'' + K sqrt(beta) - beta^(-3/2)| at interior points.

    The second derivative uses a 5-point central-difference stencil on the
    closed-form beta, sampled strictly inside segments so the stencil never
    crosses a K discontinuity.
    """
    worst = 0.0
    frame = frame0
    for k, length in lattice.segments:
        beta0, alpha0 = frame.beta, frame.alpha
        h = min(fd_step, 0.05 * length)
        pad = 2.5 * h
        pts = np.linspace(pad, length - pad, points_per_segment)
        for d in pts:
            offsets = d + h * np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
            w = np.sqrt(_beta_in_segment(beta0, alpha0, k, offsets))
            wpp = (-w[0] + 16 * w[1] - 30 * w[2] + 16 * w[3] - w[4]) / (12 * h * h)
            res = wpp + k * w[2] - w[2] ** (-3)
            worst = max(worst, abs(res))
        beta1, alpha1 = _twiss_through(beta0, alpha0, segment_matrix(k, length))
        frame = EnvelopeFrame(
            s=frame.s + length, beta=beta1, dbeta=-2.0 * alpha1, mu=0.0, tau=0.0
        )
    return worst


def write_envelope_csv(path, table: dict[str, np.ndarray]) -> None:
    """Emit the envelope table as CSV with header s,beta,dbeta,mu,tau."""
    cols = ("s", "beta", "dbeta", "mu", "tau")
    data = np.column_stack([table[c] for c in cols])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.16g}" for v in row) + "\n")
