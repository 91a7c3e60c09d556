"""
Monte-Carlo reference for equally correlated Nakagami envelopes.

Branch ``k`` is built from ``m_z`` complex Gaussians

    g_{k,i} = lam u_i + sqrt(1 - lam^2) x_{k,i},     lam = rho^(1/4)

with ``u_i`` shared by all branches, so the Gaussian correlation is
``sqrt(rho)`` and the power correlation is ``rho``. Samples are produced in
fixed blocks, each drawn from its own counter-based Philox stream keyed by
``(seed, stream, block)``. A batch of ``n`` samples is therefore a prefix of
any larger batch with the same seed and does not depend on how many
workers produced it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import interpolate, special

from . import approx
from .approx import ApproxParams
from .moments import ScenarioConfig

__all__ = [
    "BLOCK",
    "SampleBatch",
    "EmpiricalStats",
    "Estimate",
    "generate",
    "empirical_stats",
    "simulate_outage",
    "simulate_ber",
    "ks_distance",
    "MODULATIONS",
    "ks_critical",
]

BLOCK = 1 << 16
MODULATIONS = ("coherent-bpsk", "noncoherent-bfsk")
# stream identifiers inside the key
_CHANNEL, _NOISE = 0, 1
# groups for the delete-a-group jackknife
_GROUPS = 100
_SELF_CHECK_N = 100_000
_SELF_CHECK_Z = 5.0


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def _rng(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream, block])))


@dataclass(frozen=True)
class Estimate:
    """A Monte-Carlo estimate and its standard error."""

    value: float
    se: float


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Envelope samples, one row per branch."""

    samples: np.ndarray
    config: ScenarioConfig
    seed: int
    n: int

    @property
    def z(self) -> np.ndarray:
        """The envelope sum ``Z = Z_1 + ... + Z_L`` per sample."""
        return self.samples.sum(axis=0)

    def branch_zscores(self) -> np.ndarray:
        """``(mean(Z_k^2) - Omega_k) / SE`` for every branch."""
        p = self.samples ** 2
        se = p.std(axis=1, ddof=1) / math.sqrt(self.n)
        return (p.mean(axis=1) - np.asarray(self.config.powers)) / se


@dataclass(frozen=True, eq=False)
class EmpiricalStats:
    """Sample moments of ``Z`` with jackknife standard errors.

    ``rho_hat`` is the mean off-diagonal sample correlation of the branch
    powers; it is ``None`` for a single branch.
    """

    ez2_hat: Estimate
    ez4_hat: Estimate
    rho_hat: Estimate | None
    histogram: tuple[np.ndarray, np.ndarray]
    n: int


def _block(config: ScenarioConfig, seed: int, b: int) -> np.ndarray:
    L, m = config.L, config.m_z
    rng = _rng(seed, _CHANNEL, b)
    shared = rng.standard_normal((2 * m, BLOCK))
    own = rng.standard_normal((L, 2 * m, BLOCK))
    lam = config.rho ** 0.25
    g = lam * shared[None] + math.sqrt(1.0 - lam * lam) * own
    scale = np.sqrt(np.asarray(config.powers, dtype=float) / (2 * m))
    return scale[:, None] * np.sqrt(np.einsum("kib,kib->kb", g, g))


def generate(config: ScenarioConfig, n: int, seed: int, workers: int = 1,
             self_check: bool = True) -> SampleBatch:
    """Draw ``n`` correlated envelope vectors.

    Parameters
    ----------
    config : ScenarioConfig
        Scenario; ``m_z`` must be a positive integer.
    n : int
        Number of samples, ``n >= 1``.
    seed : int
        64-bit seed.
    workers : int
        Threads used to fill blocks. The result does not depend on it.
    self_check : bool
        For ``n >= 1e5`` verify that each branch mean-square lies within five
        standard errors of its power.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    n = int(n)
    if int(config.m_z) != config.m_z or config.m_z < 1:
        raise ValueError(f"generation needs integer m_z >= 1, got {config.m_z}")
    seed = _check_seed(seed)
    nblocks = -(-n // BLOCK)
    out = np.empty((config.L, nblocks * BLOCK))

    def fill(b):
        out[:, b * BLOCK:(b + 1) * BLOCK] = _block(config, seed, b)

    if workers > 1 and nblocks > 1:
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(fill, range(nblocks)))
    else:
        for b in range(nblocks):
            fill(b)
    batch = SampleBatch(np.ascontiguousarray(out[:, :n]), config, seed, n)
    if self_check and n >= _SELF_CHECK_N:
        z = batch.branch_zscores()
        if np.any(np.abs(z) > _SELF_CHECK_Z):
            raise RuntimeError(f"branch power self-check failed, z-scores {z}")
    return batch


def _jackknife(group_sums: np.ndarray, group_n: np.ndarray, stat) -> Estimate:
    """Delete-a-group jackknife for ``stat(sums, count)`` of pooled sums."""
    total, count = group_sums.sum(axis=0), group_n.sum()
    full = stat(total, count)
    loo = np.array([stat(total - s, count - c) for s, c in zip(group_sums, group_n)])
    g = len(group_n)
    se = math.sqrt((g - 1) / g * np.sum((loo - loo.mean()) ** 2))
    return Estimate(float(full), se)


def _groups(n: int) -> np.ndarray:
    return np.array_split(np.arange(n), min(_GROUPS, n))


def empirical_stats(batch: SampleBatch, bins: int = 100) -> EmpiricalStats:
    """Moments of ``Z``, branch power correlation and a density histogram."""
    if batch.n < 100:
        raise ValueError("empirical_stats needs n >= 100")
    if bins < 10:
        raise ValueError("empirical_stats needs bins >= 10")
    z = batch.z
    z2 = z * z
    if not np.all(np.isfinite(z2)) or np.all(z2 == z2[0]):
        raise ValueError("degenerate sample batch")
    idx = _groups(batch.n)
    gn = np.array([len(i) for i in idx], dtype=float)
    m_sums = np.array([[z2[i].sum(), (z2[i] ** 2).sum()] for i in idx])
    ez2 = _jackknife(m_sums[:, :1], gn, lambda s, c: s[0] / c)
    ez4 = _jackknife(m_sums[:, 1:], gn, lambda s, c: s[0] / c)

    rho = None
    L = batch.config.L
    if L > 1:
        p = batch.samples ** 2
        # per-group sums of p_k, p_k p_l
        s1 = np.array([p[:, i].sum(axis=1) for i in idx])
        s2 = np.array([p[:, i] @ p[:, i].T for i in idx]).reshape(len(idx), -1)
        off = ~np.eye(L, dtype=bool)

        def mean_corr(s, c):
            mu = s[:L] / c
            cov = s[L:].reshape(L, L) / c - np.outer(mu, mu)
            sd = np.sqrt(np.diag(cov))
            return np.clip((cov / np.outer(sd, sd))[off].mean(), -1.0, 1.0)

        rho = _jackknife(np.hstack([s1, s2]), gn, mean_corr)

    dens, edges = np.histogram(z, bins=bins, range=(0.0, float(z.max())), density=True)
    return EmpiricalStats(ez2, ez4, rho, (edges, dens), batch.n)


def _output_snr(samples: np.ndarray, config: ScenarioConfig) -> np.ndarray:
    z = samples.sum(axis=0)
    return z * z / (config.L * config.noise_density)


def simulate_outage(config: ScenarioConfig, n: int, seed: int, thresholds,
                    workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Empirical ``P(gamma_EGC <= t)`` per threshold with binomial standard errors."""
    t = np.asarray(thresholds, dtype=float)
    if np.any(t < 0):
        raise ValueError("thresholds must be non-negative")
    batch = generate(config, n, seed, workers)
    g = np.sort(_output_snr(batch.samples, config))
    p = np.searchsorted(g, t, side="right") / batch.n
    return p, np.sqrt(p * (1 - p) / batch.n)


def simulate_ber(config: ScenarioConfig, modulation: str, n_bits: int, seed: int,
                 workers: int = 1) -> Estimate:
    """Per-bit Monte-Carlo error rate of the combiner.

    Each bit sees its own channel draw. Coherent BPSK errs when unit
    Gaussian noise falls below ``-sqrt(2 gamma_EGC)``. Non-coherent BFSK
    averages the conditional error probability ``exp(-gamma_EGC / 2) / 2``.
    Blocks are streamed so memory stays bounded.
    """
    if modulation not in MODULATIONS:
        raise ValueError(f"modulation must be one of {MODULATIONS}, got {modulation!r}")
    if int(n_bits) != n_bits or n_bits < 10_000:
        raise ValueError(f"n_bits must be an integer >= 1e4, got {n_bits}")
    n_bits = int(n_bits)
    seed = _check_seed(seed)
    nblocks = -(-n_bits // BLOCK)

    def run(b):
        k = min(BLOCK, n_bits - b * BLOCK)
        g = _output_snr(_block(config, seed, b)[:, :k], config)
        if modulation == "coherent-bpsk":
            noise = _rng(seed, _NOISE, b).standard_normal(BLOCK)[:k]
            e = (noise < -np.sqrt(2 * g)).astype(float)
        else:
            e = 0.5 * np.exp(-0.5 * g)
        return e.sum(), (e * e).sum()

    if workers > 1 and nblocks > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, range(nblocks)))
    else:
        parts = [run(b) for b in range(nblocks)]
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s1 / n_bits
    var = max(s2 / n_bits - mean * mean, 0.0) * n_bits / (n_bits - 1)
    return Estimate(mean, math.sqrt(var / n_bits))


def _cdf_interpolant(u: np.ndarray, p: ApproxParams, knots: int):
    """Cubic Hermite interpolant of the fitted CDF through sample-quantile knots."""
    x = np.unique(np.quantile(u, np.linspace(0.0, 1.0, knots)))
    F = np.array([approx.cdf_power(float(t), p) for t in x])
    f = np.asarray(approx.pdf_power(x, p))
    if not np.all(np.isfinite(f)):
        # infinite density at the origin leaves no slope there
        return interpolate.PchipInterpolator(x, F)
    return interpolate.CubicHermiteSpline(x, F, f)


def ks_distance(batch: SampleBatch, p: ApproxParams, knots: int = 512) -> float:
    """Kolmogorov-Smirnov distance between the sample law of ``Z`` and the fit.

    The fitted CDF ``cdf_power(r^2)`` is evaluated exactly at ``knots``
    sample quantiles and interpolated in between with cubic Hermite
    polynomials built from the density. The few largest deviations are
    then recomputed with exact CDF values.
    """
    if batch.n < 10_000:
        raise ValueError("ks_distance needs n >= 1e4")
    u = np.sort(batch.z ** 2)
    n = u.size
    F = np.clip(_cdf_interpolant(u, p, knots)(u), 0.0, 1.0)
    hi = np.arange(1, n + 1) / n
    lo = np.arange(n) / n
    dev = np.maximum(hi - F, F - lo)
    top = np.argsort(dev)[-8:]
    exact = np.array([approx.cdf_power(float(u[i]), p) for i in top])
    dev[top] = np.maximum(hi[top] - exact, exact - lo[top])
    return float(dev.max())


def ks_critical(n: int, alpha: float = 0.01) -> float:
    """Asymptotic one-sample KS critical value ``c(alpha) / sqrt(n)``."""
    return float(special.kolmogi(alpha)) / math.sqrt(n)
