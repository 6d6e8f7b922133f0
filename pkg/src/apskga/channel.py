"""Satellite channel: Saleh AM/AM amplifier, AWGN, ML detection and distortion MSE.

Two independent routes give the mean squared label distortion of a
constellation: ``estimate_mse`` (Monte Carlo) and ``exact_mse`` (grid
quadrature of the Gaussian over nearest-neighbour decision cells).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .constellation import Constellation, validate

FITNESS_CAP = 1e12


class PrecisionError(ValueError):
    """Quadrature grid too coarse for the requested accuracy."""


@dataclass(frozen=True)
class SalehParams:
    a: float = 2.1587
    b: float = 1.1517

    def __post_init__(self) -> None:
        # b = 0 is allowed: it degenerates to a linear amplifier of gain a
        if not self.a > 0 or not self.b >= 0:
            raise ValueError(f"Saleh constants need a > 0, b >= 0 (got a={self.a}, b={self.b})")


def amam(rho, p: SalehParams = SalehParams()):
    """Saleh AM/AM response a*rho / (1 + b*rho**2); scalar or array."""
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise ValueError("amam is defined for rho >= 0")
    out = p.a * r / (1.0 + p.b * r * r)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class AmplifiedConstellation:
    source: Constellation
    points: np.ndarray
    values: np.ndarray
    es_avg: float


def amplify(c: Constellation, p: SalehParams = SalehParams()) -> AmplifiedConstellation:
    problems = validate(c)
    if problems:
        raise ValueError("invalid constellation: " + "; ".join(problems))
    pts = amam(c.radius, p) * np.exp(1j * c.phase)
    pts.setflags(write=False)
    return AmplifiedConstellation(
        source=c, points=pts, values=c.value, es_avg=float(np.mean(np.abs(pts) ** 2))
    )


def snr_to_noise(snr_db: float, es_avg: float) -> tuple[float, float]:
    """Es/N0 in dB -> (N0, per-dimension noise standard deviation)."""
    if not es_avg > 0:
        raise ValueError(f"es_avg must be positive, got {es_avg}")
    n0 = es_avg / 10.0 ** (snr_db / 10.0)
    return n0, math.sqrt(n0 / 2.0)


@dataclass(frozen=True)
class ChannelParams:
    """Target SNR (Es/N0 after the amplifier) and amplifier constants."""

    snr_db: float = 10.0
    saleh: SalehParams = field(default_factory=SalehParams)

    def noise(self, es_avg: float) -> tuple[float, float]:
        return snr_to_noise(self.snr_db, es_avg)


@dataclass(frozen=True)
class EvalSettings:
    n_symbols: int = 200_000
    seed: int = 0
    crn: bool = True

    def __post_init__(self) -> None:
        if self.n_symbols < 1:
            raise ValueError("n_symbols must be positive")


@numba.njit(cache=True, nogil=True)
def _nearest(xr, xi, pr, pi):
    best = 0
    dmin = np.inf
    for k in range(pr.shape[0]):
        dr = xr - pr[k]
        di = xi - pi[k]
        d = dr * dr + di * di
        if d < dmin:
            dmin = d
            best = k
    return best


@numba.njit(cache=True, nogil=True)
def _detect(rr, ri, pr, pi):
    out = np.empty(rr.shape[0], dtype=np.int64)
    for i in range(rr.shape[0]):
        out[i] = _nearest(rr[i], ri[i], pr, pi)
    return out


@numba.njit(cache=True, nogil=True)
def _sq_distortion_sum(u, zr, zi, sigma, pr, pi):
    # integer accumulator keeps the sum exact and order independent
    total = 0
    for i in range(u.shape[0]):
        k = u[i]
        d = _nearest(pr[k] + sigma * zr[i], pi[k] + sigma * zi[i], pr, pi) - k
        total += d * d
    return total


@numba.njit(cache=True, nogil=True)
def _phi(t):
    return 0.5 * math.erfc(-t / math.sqrt(2.0))


@numba.njit(cache=True, nogil=True)
def _cell_masses(cr, ci, sigma, t, pr, pi, sub, out):
    """Add the mass of N((cr, ci), sigma^2 I) falling in each decision region to ``out``.

    ``t`` are standardized grid node offsets. Cells whose four corners agree
    on the decision get their whole mass; the others are split sub x sub.
    """
    n = t.shape[0] - 1
    lab = np.empty((n + 1, n + 1), dtype=np.int64)
    for i in range(n + 1):
        for j in range(n + 1):
            lab[i, j] = _nearest(cr + sigma * t[i], ci + sigma * t[j], pr, pi)
    cdf = np.empty(n + 1)
    for i in range(n + 1):
        cdf[i] = _phi(t[i])
    for i in range(n):
        wx = cdf[i + 1] - cdf[i]
        for j in range(n):
            a = lab[i, j]
            if lab[i + 1, j] == a and lab[i, j + 1] == a and lab[i + 1, j + 1] == a:
                out[a] += wx * (cdf[j + 1] - cdf[j])
                continue
            hx = (t[i + 1] - t[i]) / sub
            hy = (t[j + 1] - t[j]) / sub
            for si in range(sub):
                x0 = t[i] + si * hx
                mx = _phi(x0 + hx) - _phi(x0)
                for sj in range(sub):
                    y0 = t[j] + sj * hy
                    k = _nearest(cr + sigma * (x0 + 0.5 * hx), ci + sigma * (y0 + 0.5 * hy),
                                 pr, pi)
                    out[k] += mx * (_phi(y0 + hy) - _phi(y0))


def ml_detect(r, amp: AmplifiedConstellation):
    """Label of the nearest amplified point; ties go to the lowest label."""
    r = np.asarray(r, dtype=complex)
    pts = amp.points
    idx = _detect(np.ascontiguousarray(r.real.ravel()), np.ascontiguousarray(r.imag.ravel()),
                  np.ascontiguousarray(pts.real), np.ascontiguousarray(pts.imag))
    labels = amp.values[idx]
    return int(labels[0]) if r.ndim == 0 else labels.reshape(r.shape)


@dataclass(frozen=True, eq=False)
class SymbolStream:
    """Transmitted labels plus unit-variance (per dimension) complex noise."""

    u: np.ndarray
    zr: np.ndarray
    zi: np.ndarray

    @classmethod
    def draw(cls, seed, n: int, M: int) -> SymbolStream:
        rng = np.random.default_rng(seed)
        u = rng.integers(0, M, size=n, dtype=np.int64)
        z = rng.standard_normal((2, n))
        return cls(u, np.ascontiguousarray(z[0]), np.ascontiguousarray(z[1]))


def mse_on_stream(amp: AmplifiedConstellation, sigma: float, stream: SymbolStream) -> float:
    pts = amp.points
    total = _sq_distortion_sum(
        stream.u, stream.zr, stream.zi, float(sigma),
        np.ascontiguousarray(pts.real), np.ascontiguousarray(pts.imag),
    )
    return total / stream.u.shape[0]


def estimate_mse(
    c: Constellation, ch: ChannelParams = ChannelParams(), ev: EvalSettings = EvalSettings()
) -> float:
    """Monte Carlo E[(u - u_hat)^2] over ``ev.n_symbols`` uniform symbols."""
    amp = amplify(c, ch.saleh)
    _, sigma = ch.noise(amp.es_avg)
    return mse_on_stream(amp, sigma, SymbolStream.draw(ev.seed, ev.n_symbols, c.M))


def transition_matrix(
    c: Constellation, ch: ChannelParams = ChannelParams(), grid_step_sigma_frac: float = 1 / 50,
    refine: int = 8,
) -> np.ndarray:
    """P[u, v]: probability of detecting label v when label u is sent (quadrature).

    Each transmitted point's Gaussian is integrated over a +-6 sigma square of
    cells with side ``grid_step_sigma_frac * sigma``. Cell masses come from the
    normal CDF; cells cut by a decision boundary are refined ``refine``-fold
    per axis.
    """
    if not 0 < grid_step_sigma_frac <= 1 / 25:
        raise PrecisionError(
            f"grid step {grid_step_sigma_frac} sigma is coarser than the 1/25 sigma limit"
        )
    amp = amplify(c, ch.saleh)
    _, sigma = ch.noise(amp.es_avg)
    n = int(math.ceil(12.0 / grid_step_sigma_frac))
    t = np.linspace(-6.0, 6.0, n + 1)
    pr = np.ascontiguousarray(amp.points.real)
    pi = np.ascontiguousarray(amp.points.imag)
    P = np.zeros((c.M, c.M))
    for k in range(c.M):
        _cell_masses(pr[k], pi[k], sigma, t, pr, pi, int(refine), P[k])
    # rows/columns are in value order because constellations are stored that way
    return P


def exact_mse(
    c: Constellation, ch: ChannelParams = ChannelParams(), grid_step_sigma_frac: float = 1 / 50
) -> float:
    """Deterministic quadrature of E[(u - u_hat)^2]; no random numbers involved."""
    P = transition_matrix(c, ch, grid_step_sigma_frac)
    v = c.value.astype(float)
    d2 = (v[:, None] - v[None, :]) ** 2
    return float(np.sum(P * d2) / c.M)


def fitness(mse: float) -> float:
    """R = 1/MSE, with MSE = 0 mapped to FITNESS_CAP."""
    if mse < 0 or math.isnan(mse):
        raise ValueError(f"MSE must be non-negative, got {mse}")
    return FITNESS_CAP if mse == 0 else min(1.0 / mse, FITNESS_CAP)
