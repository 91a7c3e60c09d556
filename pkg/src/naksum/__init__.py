"""
Sums of equally correlated Nakagami-m envelopes.

``Z = Z_1 + ... + Z_L`` is approximated by an equivalent envelope ``R`` whose
square is a sum of two independent gamma variates, fitted by matching the
exact second and fourth moments of ``Z``. Submodules:

hyperfn
    Hypergeometric series (1F1, 2F1, Appell F2, Humbert Phi2, Lauricella F_A).
moments
    Scenario description and exact ``E[Z^2]``, ``E[Z^4]``.
approx
    The moment fit and the MGF, PDF and CDF of the equivalent law.
egc
    Equal gain combining outage and bit error rates.
mcsim
    Monte-Carlo reference samples and estimators.
cli
    The ``nakagami-sum`` command.
"""

from .approx import ApproxParams, cdf_power, fit, pdf_envelope, pdf_power
from .egc import EgcParams, ber_coherent_bpsk, ber_noncoherent_bfsk, outage
from .moments import ScenarioConfig, fourth_moment, moment_pair, second_moment

__all__ = [
    "ApproxParams",
    "EgcParams",
    "ScenarioConfig",
    "ber_coherent_bpsk",
    "ber_noncoherent_bfsk",
    "cdf_power",
    "fit",
    "fourth_moment",
    "moment_pair",
    "outage",
    "pdf_envelope",
    "pdf_power",
    "second_moment",
]

__version__ = "0.1.0"
