"""
Moment-matched approximation of the envelope sum.

The sum ``Z = Z_1 + ... + Z_L`` is replaced by ``R = sqrt(R_1^2 + ... + R_L^2)``
where the ``R_k`` are identical, equally correlated Nakagami envelopes with
power ``omega_R`` and (real) fading parameter ``m_R``. ``R^2`` has the law of
an independent sum ``Gamma(m_R, theta_1) + Gamma(m_R (L - 1), theta_2)`` with

    theta_1 = omega_R (1 + (L - 1) sqrt(rho)) / m_R
    theta_2 = omega_R (1 - sqrt(rho)) / m_R

which is what the closed-form MGF, PDF and CDF below express.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import hyperfn
from .hyperfn import SeriesControl
from .moments import MomentError, ScenarioConfig, moment_pair

__all__ = [
    "ApproxParams",
    "FitError",
    "fit",
    "mgf_power",
    "pdf_power",
    "pdf_envelope",
    "cdf_power",
    "cdf_power_series",
    "cdf_power_quadrature",
    "sample_power",
]


class FitError(MomentError):
    """Moment matching cannot produce valid parameters."""


@dataclass(frozen=True)
class ApproxParams:
    """Parameters of the equivalent distribution.

    ``omega_R`` is the per-component power; in the SNR domain the same
    record carries the per-component average SNR instead.
    """

    omega_R: float
    m_R: float
    L: int
    rho: float

    def __post_init__(self):
        if not self.omega_R > 0:
            raise FitError(f"omega_R must be positive, got {self.omega_R}")
        if not self.m_R > 0:
            raise FitError(f"m_R must be positive, got {self.m_R}")
        if not 0 <= self.rho < 1:
            raise FitError(f"rho must lie in [0, 1), got {self.rho}")

    @property
    def scales(self) -> tuple[float, float]:
        """Gamma scales ``(theta_1, theta_2)`` of the two independent parts."""
        s = math.sqrt(self.rho)
        return (self.omega_R * (1 + (self.L - 1) * s) / self.m_R,
                self.omega_R * (1 - s) / self.m_R)

    @property
    def shapes(self) -> tuple[float, float]:
        return self.m_R, self.m_R * (self.L - 1)


def fit(config: ScenarioConfig, ctrl: SeriesControl | None = None) -> ApproxParams:
    """Match ``E[R^2]`` and ``E[R^4]`` to the exact moments of the sum."""
    try:
        mp = moment_pair(config, ctrl)
    except MomentError as exc:
        raise FitError(str(exc)) from exc
    L = config.L
    var = mp.ez4 - mp.ez2 ** 2
    m_R = (1 + (L - 1) * config.rho) / L * mp.ez2 ** 2 / var
    return ApproxParams(mp.ez2 / L, m_R, L, config.rho)


def mgf_power(s: float, p: ApproxParams) -> float:
    """``E[exp(s R^2)]``; valid below the nearer pole ``s < 1 / theta_1``."""
    t1, t2 = p.scales
    a1, a2 = p.shapes
    if not s * t1 < 1:
        raise hyperfn.DomainError(f"MGF diverges at s={s} (pole at {1 / t1})")
    return math.exp(-a1 * math.log1p(-s * t1) - a2 * math.log1p(-s * t2))


def _log_pdf_power(x: np.ndarray, p: ApproxParams) -> np.ndarray:
    """Log-density of ``R^2`` for ``x > 0``."""
    t1, t2 = p.scales
    a1, a2 = p.shapes
    shape = a1 + a2
    log_norm = -math.lgamma(shape) - a1 * math.log(t1) - a2 * math.log(t2)
    base = log_norm + (shape - 1) * np.log(x)
    if p.L == 1:
        return base - x / t1
    beta = 1 / t2 - 1 / t1
    out = base - x / t2
    if beta > 0:
        out = out + hyperfn.log_kummer_1f1(a1, shape, beta * x)
    return out


def pdf_power(x, p: ApproxParams):
    """Approximate density of ``Z^2`` (the law of ``R^2``)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise hyperfn.DomainError("pdf_power requires x >= 0")
    out = np.zeros(x.shape)
    pos = x > 0
    if np.any(pos):
        out[pos] = np.exp(_log_pdf_power(x[pos], p))
    shape = p.m_R * p.L
    if np.any(~pos):
        t1, t2 = p.scales
        a1, a2 = p.shapes
        if shape < 1:
            out[~pos] = np.inf
        elif shape == 1:
            out[~pos] = math.exp(-a1 * math.log(t1) - a2 * math.log(t2))
    return out if out.ndim else float(out)


def pdf_envelope(r, p: ApproxParams):
    """Approximate density of ``Z`` itself, ``2 r f_{R^2}(r^2)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise hyperfn.DomainError("pdf_envelope requires r >= 0")
    out = np.zeros(r.shape)
    pos = r > 0
    if np.any(pos):
        rp = r[pos]
        out[pos] = np.exp(math.log(2) + np.log(rp) + _log_pdf_power(rp * rp, p))
    if np.any(~pos) and p.m_R * p.L < 0.5:
        out[~pos] = np.inf
    return out if out.ndim else float(out)


def cdf_power_series(t: float, p: ApproxParams, ctrl: SeriesControl | None = None) -> float:
    """CDF of ``R^2`` through the Humbert ``Phi2`` closed form.

    Raises the underlying :class:`~naksum.hyperfn.ConvergenceError` if the
    double series cannot be summed.
    """
    if t < 0:
        raise hyperfn.DomainError("cdf requires t >= 0")
    if t == 0:
        return 0.0
    t1, t2 = p.scales
    a1, a2 = p.shapes
    shape = a1 + a2
    u1, u2 = t / t1, t / t2
    phi = hyperfn.humbert_phi2(a1, a2, 1 + shape, -u1, -u2, ctrl)
    log_f = a1 * math.log(u1) + a2 * math.log(u2) - math.lgamma(1 + shape) + phi.log()
    return min(1.0, math.exp(log_f))


def cdf_power_quadrature(t: float, p: ApproxParams) -> float:
    """CDF of ``R^2`` by adaptive quadrature of :func:`pdf_power`."""
    if t < 0:
        raise hyperfn.DomainError("cdf requires t >= 0")
    if t == 0:
        return 0.0
    mean = p.L * p.omega_R

    def f(x):
        return float(pdf_power(x, p))

    if t > 4 * mean:
        # integrate the upper tail instead; it is the small quantity
        tail, _ = integrate.quad(f, t, np.inf, epsabs=1e-14, epsrel=1e-12, limit=400)
        return max(0.0, 1.0 - tail)
    breaks = [b for b in (0.25 * mean, mean) if b < t]
    val, _ = integrate.quad(f, 0.0, t, points=breaks or None, epsabs=1e-14, epsrel=1e-12,
                            limit=400)
    return min(1.0, max(0.0, val))


def cdf_power(t: float, p: ApproxParams, ctrl: SeriesControl | None = None) -> float:
    """Approximate CDF of ``Z^2``, ``P(R^2 <= t)``.

    Evaluates the ``Phi2`` closed form and falls back to quadrature of the
    density when the series fails to converge or cancels.
    """
    try:
        return cdf_power_series(t, p, ctrl)
    except hyperfn.ConvergenceError:
        return cdf_power_quadrature(t, p)


def sample_power(p: ApproxParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` samples of ``R^2`` from its two-gamma representation."""
    t1, t2 = p.scales
    a1, a2 = p.shapes
    out = rng.gamma(a1, t1, n)
    if a2 > 0:
        out += rng.gamma(a2, t2, n)
    return out
