"""
Exact second and fourth moments of a sum of equally correlated
Nakagami-m envelopes.

The fourth moment is a multinomial expansion whose cross-moment weights
``W(k_1, ..., k_N)`` (one per partition of 4) are available three ways:

- closed forms through ``2F1`` (:func:`w_closed_form`),
- a Lauricella ``F_A`` expression (:func:`w_lauricella`),
- direct Gauss-Laguerre quadrature of the defining integral
  (:func:`w_quadrature`), used as the independent oracle.
"""

from __future__ import annotations

import functools
import itertools
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import hyperfn
from .hyperfn import SeriesControl, gammaln

__all__ = [
    "ScenarioConfig",
    "MomentPair",
    "PARTITIONS",
    "correlation_to_a",
    "j_integral",
    "w_coefficient",
    "w_closed_form",
    "w_lauricella",
    "w_quadrature",
    "second_moment",
    "fourth_moment",
    "fourth_moment_expansion",
    "moment_pair",
]

#: Largest accepted correlation; ``1 - sqrt(rho)`` appears in denominators.
RHO_MAX = 0.999

#: Partitions of 4, canonical (descending) order.
PARTITIONS = ((4,), (3, 1), (2, 2), (2, 1, 1), (1, 1, 1, 1))

# Run the quadrature oracle next to every closed-form W and compare.
DEBUG = os.environ.get("NAKSUM_DEBUG", "") not in ("", "0")
DEBUG_RTOL = 1e-8


class MomentError(ValueError):
    """Invalid scenario or inconsistent moments."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Branch count, fading, correlation and branch powers of one scenario.

    Parameters
    ----------
    L : int
        Number of diversity branches.
    m_z : int
        Nakagami fading parameter, shared by all branches.
    rho : float
        Power correlation coefficient between every pair of branches,
        ``0 <= rho <= 0.999``.
    powers : tuple of float
        Average branch powers ``E[Z_k^2]``.
    noise_density : float
        One-sided noise density ``N0``; only used in the SNR domain.
    """

    L: int
    m_z: int
    rho: float
    powers: tuple = field(default=())
    noise_density: float = 1.0

    def __post_init__(self):
        powers = tuple(float(p) for p in np.atleast_1d(self.powers))
        if not powers:
            powers = (1.0,) * int(self.L)
        object.__setattr__(self, "powers", powers)
        if int(self.L) != self.L or self.L < 1:
            raise MomentError(f"L must be a positive integer, got {self.L}")
        object.__setattr__(self, "L", int(self.L))
        if float(self.m_z) != int(self.m_z) or self.m_z < 1:
            raise MomentError(f"m_z must be an integer >= 1, got {self.m_z}")
        object.__setattr__(self, "m_z", int(self.m_z))
        if not 0 <= self.rho <= RHO_MAX:
            raise MomentError(f"rho must lie in [0, {RHO_MAX}], got {self.rho}")
        if len(powers) != self.L:
            raise MomentError(f"expected {self.L} branch powers, got {len(powers)}")
        if any(not p > 0 for p in powers):
            raise MomentError("branch powers must be positive")
        if not self.noise_density > 0:
            raise MomentError("noise_density must be positive")

    @classmethod
    def from_profile(cls, L: int, m_z: int, rho: float, omega1: float = 1.0,
                     delta: float = 0.0, noise_density: float = 1.0) -> "ScenarioConfig":
        """Scenario with exponentially decaying branch powers."""
        from .egc import branch_powers_from_profile

        return cls(L, m_z, rho, tuple(branch_powers_from_profile(omega1, delta, L)),
                   noise_density)

    @property
    def equal_powers(self) -> bool:
        return all(p == self.powers[0] for p in self.powers)


@dataclass(frozen=True)
class MomentPair:
    """``E[Z^2]`` and ``E[Z^4]`` of the envelope sum."""

    ez2: float
    ez4: float

    def __post_init__(self):
        if not self.ez2 > 0:
            raise MomentError(f"E[Z^2] must be positive, got {self.ez2}")
        if not self.ez4 > self.ez2 ** 2:
            raise MomentError(
                f"degenerate moments: E[Z^4]={self.ez4} <= E[Z^2]^2={self.ez2 ** 2}"
            )


def correlation_to_a(rho: float) -> float:
    """Map the power correlation to ``a = sqrt(rho) / (1 - sqrt(rho))``."""
    if not 0 <= rho < 1:
        raise hyperfn.DomainError(f"rho must lie in [0, 1), got {rho}")
    s = math.sqrt(rho)
    return s / (1.0 - s)


def _canonical(k) -> tuple:
    k = tuple(int(v) for v in k)
    key = tuple(sorted(k, reverse=True))
    if key not in PARTITIONS or any(v <= 0 for v in k):
        raise ValueError(f"{k} is not a partition of 4")
    return key


def _check_m(m_z) -> int:
    if float(m_z) != int(m_z) or m_z < 1:
        raise MomentError(f"m_z must be an integer >= 1, got {m_z}")
    return int(m_z)


def _log_gamma_ratio(m: float, k) -> float:
    """``sum_j ln(Gamma(m + k_j/2) / Gamma(m))``."""
    return sum(gammaln(m + kj / 2) - gammaln(m) for kj in k)


def j_integral(m: float, a: float, p: float, q: float,
               ctrl: SeriesControl | None = None) -> float:
    """Closed form of
    ``(1/Gamma(m)) int u^(m-1) e^-u 1F1(-p/2; m; -a u) 1F1(-q/2; m; -a u) du``.
    """
    z = -a * a / (1 + 2 * a)
    f = hyperfn.gauss_2f1(m + p / 2, -q / 2, m, z, ctrl)
    return (1 + a) ** (p / 2) * ((1 + 2 * a) / (1 + a)) ** (q / 2) * float(f)


def w_closed_form(partition, m_z: int, rho: float,
                  ctrl: SeriesControl | None = None) -> float:
    """W coefficient from its ``2F1`` closed form.

    Available for the partitions ``(4)``, ``(2, 2)``, ``(3, 1)`` and
    ``(2, 1, 1)``.
    """
    key = _canonical(partition)
    m = _check_m(m_z)
    a = correlation_to_a(rho)
    if key == (4,):
        return m * (1 + m) * (1 + a) ** 2
    if key == (2, 2):
        return a * a * m + m * m * (1 + a) ** 2
    if key == (3, 1):
        ratio = math.exp(_log_gamma_ratio(m, (3, 1)))
        return ratio * j_integral(m, a, 3, 1, ctrl)
    if key == (2, 1, 1):
        g = math.exp(2 * _log_gamma_ratio(m, (1,)))
        h = m + 0.5
        bracket = (j_integral(m, a, 1, 1, ctrl)
                   + a * h * h / (m * m) * j_integral(m + 1, a, 1, 1, ctrl)
                   + a / (4 * m * m) * j_integral(m + 1, a, -1, -1, ctrl)
                   - a * h / (m * m) * j_integral(m + 1, a, -1, 1, ctrl))
        return m * g * bracket
    raise ValueError(f"no closed form for partition {key}")


def w_lauricella(k, m_z: int, rho: float, ctrl: SeriesControl | None = None) -> float:
    """W coefficient through the Lauricella ``F_A`` representation."""
    k = tuple(int(v) for v in k)
    _canonical(k)
    m = _check_m(m_z)
    N = len(k)
    s = math.sqrt(rho)
    x = s / (1 + (N - 1) * s)
    fa = hyperfn.lauricella_fa(m, [m + kj / 2 for kj in k], [m] * N, [x] * N, ctrl)
    log_w = _log_gamma_ratio(m, k) + m * math.log((1 - s) / (1 + (N - 1) * s)) + fa.log()
    return math.exp(log_w)


def _laguerre_rule(n: int, alpha: float):
    """Generalised Gauss-Laguerre nodes/weights (Golub-Welsch)."""
    i = np.arange(n)
    diag = 2 * i + 1 + alpha
    off = np.sqrt(i[1:] * (i[1:] + alpha))
    nodes, vecs = eigh_tridiagonal(diag, off)
    weights = math.exp(math.lgamma(alpha + 1)) * vecs[0] ** 2
    return nodes, weights


def w_quadrature(k, m_z: int, rho: float, rtol: float = 1e-10,
                 n_start: int = 64, n_max: int = 1024) -> float:
    """W coefficient from Gauss-Laguerre quadrature of its defining integral.

    The rule uses weight ``u^(m_z - 1) e^-u``; the node count doubles from
    ``n_start`` until successive results agree to ``rtol``.

    Raises
    ------
    ConvergenceError
        If agreement is not reached at ``n_max`` nodes.
    """
    k = tuple(int(v) for v in k)
    _canonical(k)
    m = _check_m(m_z)
    a = correlation_to_a(rho)
    log_pre = _log_gamma_ratio(m, k) - math.lgamma(m)
    ctrl = SeriesControl(max_terms=4_000)
    prev = None
    n = n_start
    while n <= n_max:
        u, w = _laguerre_rule(n, m - 1.0)
        keep = w > 0
        u, w = u[keep], w[keep]
        log_f = np.zeros(u.shape)
        for kj in k:
            log_f += hyperfn.log_kummer_1f1(-kj / 2, m, -a * u, ctrl)
        val = math.exp(log_pre) * float(np.sum(w * np.exp(log_f)))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        prev = val
        n *= 2
    raise hyperfn.ConvergenceError(
        f"Gauss-Laguerre quadrature of W{k} did not settle to {rtol} by {n_max} nodes"
    )


@functools.lru_cache(maxsize=512)
def _w_cached(key, m: int, rho: float, rel_tol: float, max_terms: int) -> float:
    ctrl = SeriesControl(rel_tol, max_terms)
    if rho == 0:
        return math.exp(_log_gamma_ratio(m, key))
    if key == (1, 1, 1, 1):
        return w_lauricella(key, m, rho, ctrl)
    return w_closed_form(key, m, rho, ctrl)


def w_coefficient(k, m_z: int, rho: float, ctrl: SeriesControl | None = None) -> float:
    """Cross-moment weight ``W(k_1, ..., k_N)`` for a partition of 4.

    Uses the ``2F1`` closed forms where they exist and the Lauricella
    ``F_A`` form for ``(1, 1, 1, 1)``. W is symmetric in its arguments, so
    any ordering of a partition is accepted. At ``rho = 0`` every ``1F1``
    factor is unity and W is a product of gamma ratios.
    """
    key = _canonical(k)
    m = _check_m(m_z)
    if not 0 <= rho < 1:
        raise hyperfn.DomainError(f"rho must lie in [0, 1), got {rho}")
    ctrl = ctrl or hyperfn.default_control()
    val = _w_cached(key, m, float(rho), ctrl.rel_tol, ctrl.max_terms)
    if DEBUG and rho > 0:
        ref = w_quadrature(key, m, rho)
        if abs(val - ref) > DEBUG_RTOL * abs(ref):
            raise AssertionError(f"W{key} closed form {val!r} disagrees with quadrature {ref!r}")
    return val


def _pair_sum(sq):
    return sum(sq[i] * sq[j] for i, j in itertools.combinations(range(len(sq)), 2))


def second_moment(config: ScenarioConfig, ctrl: SeriesControl | None = None) -> float:
    """``E[Z^2]`` for the envelope sum ``Z = Z_1 + ... + Z_L``."""
    m = config.m_z
    powers = config.powers
    total = math.fsum(powers)
    if config.L == 1:
        return total
    sq = [math.sqrt(p) for p in powers]
    g = math.exp(2 * (gammaln(m + 0.5) - gammaln(m)))
    f = 1.0 if config.rho == 0 else float(hyperfn.gauss_2f1(-0.5, -0.5, m, config.rho, ctrl))
    return total + 2 * g / m * _pair_sum(sq) * f


def _w_for_moment(key, m: int, rho: float, ctrl: SeriesControl | None) -> float:
    # close to rho = 1 the hypergeometric forms need more terms than the
    # budget allows, while the quadrature stays cheap and accurate
    try:
        return w_coefficient(key, m, rho, ctrl)
    except hyperfn.ConvergenceError:
        return w_quadrature(key, m, rho)


def fourth_moment(config: ScenarioConfig, ctrl: SeriesControl | None = None,
                  fast_path: bool = True) -> float:
    """``E[Z^4]`` for the envelope sum.

    Symmetric sums over branch pairs, triples and quadruples are formed
    directly (``O(L^4)``). When all branch powers are equal the
    combinatorial counts collapse into a short closed expression; pass
    ``fast_path=False`` to force the general sums.
    """
    m = config.m_z
    L = config.L
    rho = config.rho
    W = {key: _w_for_moment(key, m, rho, ctrl) for key in PARTITIONS if len(key) <= L}
    pre = ((1 - math.sqrt(rho)) / m) ** 2

    if fast_path and config.equal_powers:
        omega = config.powers[0]
        acc = L * W[(4,)]
        if L >= 2:
            acc += 3 * L * (L - 1) * W[(2, 2)] + 4 * L * (L - 1) * W[(3, 1)]
        if L >= 3:
            acc += 6 * L * (L - 1) * (L - 2) * W[(2, 1, 1)]
        if L >= 4:
            acc += L * (L - 1) * (L - 2) * (L - 3) * W[(1, 1, 1, 1)]
        return (omega * math.sqrt(pre)) ** 2 * acc

    p = config.powers
    sq = [math.sqrt(v) for v in p]
    idx = range(L)
    acc = W[(4,)] * math.fsum(v * v for v in p)
    if L >= 2:
        pairs = list(itertools.combinations(idx, 2))
        acc += 6 * W[(2, 2)] * math.fsum(p[i] * p[j] for i, j in pairs)
        acc += 4 * W[(3, 1)] * math.fsum(sq[i] * sq[j] * (p[i] + p[j]) for i, j in pairs)
    if L >= 3:
        acc += 12 * W[(2, 1, 1)] * math.fsum(
            sq[a] * sq[b] * sq[c] * (sq[a] + sq[b] + sq[c])
            for a, b, c in itertools.combinations(idx, 3)
        )
    if L >= 4:
        acc += 24 * W[(1, 1, 1, 1)] * math.fsum(
            sq[a] * sq[b] * sq[c] * sq[d] for a, b, c, d in itertools.combinations(idx, 4)
        )
    return pre * acc


def fourth_moment_expansion(config: ScenarioConfig, w=None) -> float:
    """``E[Z^4]`` by brute-force expansion of ``(Z_1 + ... + Z_L)^4``.

    Every ordered index 4-tuple contributes ``W(k)`` for its multiplicity
    pattern ``k``, with no use of W's symmetry. ``w(k, m_z, rho)`` defaults
    to :func:`w_quadrature`. Intended as a test oracle; cost ``L^4``.
    """
    w = w or w_quadrature
    cache = {}
    sq = [math.sqrt(v) for v in config.powers]
    terms = []
    for tup in itertools.product(range(config.L), repeat=4):
        counts = np.bincount(tup, minlength=config.L)
        branches = [i for i in range(config.L) if counts[i]]
        k = tuple(int(counts[i]) for i in branches)
        if k not in cache:
            cache[k] = w(k, config.m_z, config.rho)
        terms.append(cache[k] * math.prod(sq[i] ** counts[i] for i in branches))
    return ((1 - math.sqrt(config.rho)) / config.m_z) ** 2 * math.fsum(terms)


def moment_pair(config: ScenarioConfig, ctrl: SeriesControl | None = None) -> MomentPair:
    """Both moments of the envelope sum."""
    return MomentPair(second_moment(config, ctrl), fourth_moment(config, ctrl))
