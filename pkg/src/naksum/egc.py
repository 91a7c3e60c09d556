"""
Equal gain combining in equally correlated Nakagami fading.

The combiner output SNR ``(Z_1 + ... + Z_L)^2 / (L N0)`` is approximated by
the fitted ``R^2`` law with ``omega_R`` replaced by the per-component
average SNR ``gamma_bar = omega_R / (L N0)``. All quantities here are
linear; dB conversions belong to the command line layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import approx, hyperfn
from .approx import ApproxParams
from .hyperfn import SeriesControl

__all__ = [
    "EgcParams",
    "BerResult",
    "branch_powers_from_profile",
    "to_egc_params",
    "outage",
    "ber_coherent_bpsk",
    "ber_noncoherent_bfsk",
    "ber_mgf_quadrature",
    "snr_mgf",
]


# Relative accuracy the BPSK closed form must be able to deliver.
CLOSED_FORM_RTOL = 1e-7
# Attainable relative accuracy of the F2 part in double precision.
_F2_ABS_ERR = 1e-14


@dataclass(frozen=True)
class EgcParams:
    """SNR-domain parameters of the equivalent distribution."""

    gamma_bar: float
    m_R: float
    L: int
    rho: float

    def __post_init__(self):
        if not self.gamma_bar > 0:
            raise ValueError(f"gamma_bar must be positive, got {self.gamma_bar}")

    def as_approx(self) -> ApproxParams:
        return ApproxParams(self.gamma_bar, self.m_R, self.L, self.rho)


@dataclass(frozen=True)
class BerResult:
    """Bit error probability with the evaluation route that produced it."""

    value: float
    method: str
    fallback: bool = False

    def __float__(self) -> float:
        return self.value


def branch_powers_from_profile(omega1: float, delta: float, L: int) -> np.ndarray:
    """Exponentially decaying branch powers ``omega1 * exp(-delta (k - 1))``."""
    if not omega1 > 0:
        raise ValueError(f"omega1 must be positive, got {omega1}")
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    return omega1 * np.exp(-delta * np.arange(L))


def to_egc_params(p: ApproxParams, n0: float) -> EgcParams:
    if not n0 > 0:
        raise ValueError(f"noise density must be positive, got {n0}")
    return EgcParams(p.omega_R / (p.L * n0), p.m_R, p.L, p.rho)


def outage(t: float, e: EgcParams, ctrl: SeriesControl | None = None) -> float:
    """Probability that the combiner output SNR is at most ``t``."""
    return approx.cdf_power(t, e.as_approx(), ctrl)


def snr_mgf(s: float, e: EgcParams) -> float:
    """MGF of the approximate output SNR."""
    return approx.mgf_power(s, e.as_approx())


def ber_mgf_quadrature(e: EgcParams) -> float:
    """Coherent BPSK error rate from ``(1/pi) int_0^{pi/2} M(-1/sin^2 t) dt``."""

    def f(theta):
        st = math.sin(theta)
        if st == 0:
            return 0.0
        return snr_mgf(-1.0 / (st * st), e)

    val, err = integrate.quad(f, 0.0, math.pi / 2, epsabs=1e-13, epsrel=1e-11, limit=200)
    if err > 1e-10:
        raise hyperfn.ConvergenceError(f"BPSK MGF quadrature error estimate {err:.2e}")
    return val / math.pi


def _bpsk_closed_form(e: EgcParams, ctrl: SeriesControl | None) -> float:
    m, L, g = e.m_R, e.L, e.gamma_bar
    s = math.sqrt(e.rho)
    gs = g * (1 - s)
    den = m + gs
    x = gs / den
    y = m * L * s / (den * (1 + (L - 1) * s))
    f2 = hyperfn.appell_f2(m * L + 0.5, 1.0, m, 1.5, m * L, x, y, ctrl)
    log_pre = (math.lgamma(m * L + 0.5) - math.lgamma(m * L) - 0.5 * math.log(math.pi)
               + 0.5 * math.log(x) + m * L * math.log(m / den)
               + m * math.log((1 - s) / (1 + (L - 1) * s)))
    return 0.5 - math.exp(log_pre + f2.log())


def ber_coherent_bpsk(e: EgcParams, ctrl: SeriesControl | None = None) -> BerResult:
    """Average coherent BPSK bit error probability.

    Uses the Appell ``F2`` closed form. Its arguments are
    ``x = gamma_bar (1 - sqrt(rho)) / (m_R + gamma_bar (1 - sqrt(rho)))`` and
    ``y = m_R L sqrt(rho) / ((m_R + gamma_bar (1 - sqrt(rho))) (1 + (L-1) sqrt(rho)))``.
    The closed form is ``1/2`` minus a positive quantity, so it loses about
    ``log10(1 / (2 P))`` digits. When that loss would leave less than
    ``CLOSED_FORM_RTOL`` relative accuracy, or when the series cannot be
    evaluated, the MGF quadrature is used and flagged through
    ``BerResult.fallback``.
    """
    ctrl = ctrl or hyperfn.default_control()
    tight = SeriesControl(min(ctrl.rel_tol, 1e-15), ctrl.max_terms)
    q = ber_mgf_quadrature(e)
    if 0.5 * _F2_ABS_ERR > CLOSED_FORM_RTOL * q:
        return BerResult(q, "mgf-quadrature", fallback=True)
    try:
        val = _bpsk_closed_form(e, tight)
    except hyperfn.HyperError:
        return BerResult(q, "mgf-quadrature", fallback=True)
    return BerResult(val, "appell-f2")


def ber_noncoherent_bfsk(e: EgcParams) -> float:
    """Average non-coherent BFSK bit error probability, ``M(-1/2) / 2``."""
    return 0.5 * snr_mgf(-0.5, e)
