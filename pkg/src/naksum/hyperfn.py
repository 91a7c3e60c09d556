"""
Hypergeometric special functions for the correlated Nakagami sum.

All series are summed from log-magnitude terms built with incremental
Pochhammer recurrences, so large arguments (and the overflowing
intermediate factorials that come with them) never hit linear scale.
Results that would overflow are returned log-scaled, see
:class:`FnResult`.

Implemented:

- :func:`gammaln` -- ``ln Gamma(x)``
- :func:`kummer_1f1` -- confluent ``1F1(a; b; z)``
- :func:`gauss_2f1` -- Gauss ``2F1(a, b; c; z)``
- :func:`appell_f2` -- Appell ``F2(a; b1, b2; c1, c2; x, y)``
- :func:`lauricella_fa` -- Lauricella ``F_A`` in up to four variables
- :func:`humbert_phi2` -- Humbert ``Phi2(b1, b2; c; x, y)``
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln as _gammaln
from scipy.special import logsumexp

__all__ = [
    "HyperError",
    "DomainError",
    "ConvergenceError",
    "CancellationError",
    "SeriesControl",
    "FnResult",
    "default_control",
    "gammaln",
    "kummer_1f1",
    "log_kummer_1f1",
    "gauss_2f1",
    "appell_f2",
    "lauricella_fa",
    "humbert_phi2",
]

# Values beyond this log-magnitude are returned log-scaled.
_LOG_OVERFLOW = 700.0
# |largest term| / |sum| above this leaves no significant digits.
CANCELLATION_LIMIT = 1e15
# Terms are formed as exp(log-sum) and carry roughly this relative error, so an
# alternating sum is only trusted to (sum |t| / |sum|) * TERM_EPS.
TERM_EPS = 2.0 ** -50
# Largest accepted estimated relative rounding error of an alternating sum.
ROUNDING_LIMIT = 1e-8
# Log-magnitudes of series terms grow to O(1e4); accumulating them in extended
# precision keeps the per-term relative error near double rounding.
_XFLOAT = np.longdouble
# Elements per block when materialising double series.
_BLOCK_ELEMENTS = 1_000_000


class HyperError(ArithmeticError):
    """Base class for special-function failures."""


class DomainError(HyperError, ValueError):
    """Arguments outside the supported domain of a function."""


class ConvergenceError(HyperError):
    """A series did not reach the requested tolerance within the term cap."""


class CancellationError(ConvergenceError):
    """An alternating series cancelled beyond double precision."""


@dataclass(frozen=True)
class SeriesControl:
    """Truncation control shared by every series.

    Parameters
    ----------
    rel_tol : float
        Relative size of the last retained terms with respect to the sum.
    max_terms : int
        Cap on the number of terms per series index.
    """

    rel_tol: float = 1e-12
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise ValueError(f"max_terms must be a positive integer, got {self.max_terms}")


def default_control() -> SeriesControl:
    """Default control, with ``rel_tol`` overridable through ``NAKSUM_TOL``."""
    tol = os.environ.get("NAKSUM_TOL")
    if tol:
        return SeriesControl(rel_tol=float(tol))
    return SeriesControl()


@dataclass(frozen=True)
class FnResult:
    """Value of a special function.

    When ``log_scaled`` is set, ``value`` holds the natural logarithm of the
    (positive) function value. ``converged`` is always true on a returned
    result; failures raise instead.
    """

    value: float
    log_scaled: bool
    terms_used: int
    converged: bool = True

    def log(self) -> float:
        """Natural logarithm of the function value."""
        if self.log_scaled:
            return self.value
        if self.value <= 0:
            raise DomainError(f"log of non-positive value {self.value}")
        return math.log(self.value)

    def __float__(self) -> float:
        return math.exp(self.value) if self.log_scaled else self.value


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def _is_nonpos_int(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def _log_poch(a: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``ln|(a)_k|`` and ``sign((a)_k)`` for ``k = 0..n-1``."""
    f = a + np.arange(n - 1, dtype=_XFLOAT)
    with np.errstate(divide="ignore"):
        steps = np.log(np.abs(f))
    logabs = np.concatenate((np.zeros(1, _XFLOAT), np.cumsum(steps)))
    sign = np.concatenate(([1.0], np.cumprod(np.sign(f))))
    return logabs, sign


def _log_fact(n: int) -> np.ndarray:
    return np.concatenate((np.zeros(1, _XFLOAT), np.cumsum(np.log(np.arange(1, n, dtype=_XFLOAT)))))


def _log_power(z: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``ln|z^k|`` and its sign, with ``0^0 = 1``."""
    k = np.arange(n, dtype=_XFLOAT)
    if z == 0:
        logabs = np.full(n, -np.inf, dtype=_XFLOAT)
        logabs[0] = 0.0
        return logabs, np.ones(n)
    sign = np.ones(n) if z > 0 else np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    return k * np.log(_XFLOAT(abs(z))), sign


_TAIL_WINDOW = 32


def _tail_estimate(log_mass: np.ndarray) -> np.ndarray:
    """Geometric estimate of ``ln(sum of all later sweeps)`` after each sweep.

    ``log_mass[..., k]`` is the log of the summed |terms| of sweep k.
    """
    log_mass = np.atleast_2d(log_mass)
    prev = np.concatenate((np.full((log_mass.shape[0], 1), np.inf), log_mass[:, :-1]), axis=1)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        log_r = log_mass - prev
        r = np.exp(log_r)
        est = np.where(r < 1, log_mass + log_r - np.log1p(-np.minimum(r, 0.5 + 0.5 * r)), np.inf)
    return np.where(log_mass == -np.inf, -np.inf, est)


def _tail_converged(log_mass: np.ndarray, log_sum, tol: float) -> np.ndarray:
    """Rows whose estimated tail falls below ``tol`` three sweeps running past the peak."""
    log_mass = np.atleast_2d(log_mass)
    n = log_mass.shape[1]
    if n < 3:
        return np.zeros(log_mass.shape[0], dtype=bool)
    log_ratio = _tail_estimate(log_mass) - np.reshape(log_sum, (-1, 1))
    peak = np.argmax(log_mass, axis=1)
    ok = log_ratio < math.log(tol)
    ok &= np.arange(n)[None, :] > peak[:, None]
    run = ok[:, :-2] & ok[:, 1:-1] & ok[:, 2:]
    return run.any(axis=1)


def _finish(log_scale: float, scaled: float, terms: int, force_log: bool = False) -> FnResult:
    if scaled == 0:
        return FnResult(0.0, False, terms)
    log_abs = log_scale + math.log(abs(scaled))
    if scaled > 0 and (force_log or log_abs > _LOG_OVERFLOW or log_abs < -_LOG_OVERFLOW):
        return FnResult(log_abs, True, terms)
    if log_abs > 709.0:
        raise ConvergenceError("negative function value overflows double precision")
    return FnResult(math.copysign(math.exp(log_abs), scaled), False, terms)


def _check_cancellation(log_max: float, log_abs_total: float, log_sum: float, what: str):
    """Raise if an alternating sum has lost its significant digits.

    ``log_max`` is the largest term, ``log_abs_total`` the sum of magnitudes
    and ``log_sum`` the computed result, all as natural logs.
    """
    if log_max - log_sum > math.log(CANCELLATION_LIMIT):
        raise CancellationError(f"{what}: largest term exceeds 1e15 times the result")
    if log_abs_total - log_sum + math.log(TERM_EPS) > math.log(ROUNDING_LIMIT):
        raise CancellationError(
            f"{what}: estimated rounding error "
            f"{math.exp(log_abs_total - log_sum) * TERM_EPS:.1e} exceeds {ROUNDING_LIMIT:.0e}"
        )


def _sum_scaled(s: np.ndarray, mixed: bool) -> float:
    # compensated (exact-rounding) summation for alternating sums
    return math.fsum(s.ravel().tolist()) if mixed else float(np.sum(s))


# ---------------------------------------------------------------------------
# one-variable series
# ---------------------------------------------------------------------------

def _pfq_rows(num, den, z: np.ndarray, ctrl: SeriesControl):
    """Sum ``sum_k prod(num)_k / prod(den)_k z^k / k!`` for every entry of z.

    Returns ``(log_scale, scaled_sum, n_terms)`` arrays; value is
    ``exp(log_scale) * scaled_sum``.
    """
    z = np.asarray(z, dtype=float)
    out_scale = np.zeros(z.shape)
    out_sum = np.zeros(z.shape)
    out_terms = np.zeros(z.shape, dtype=int)
    zflat = z.ravel()
    # rows are grouped by the term count their own |z| needs, so one large
    # argument does not widen the term matrix of every other row
    need = np.maximum(64.0, 2 * np.abs(zflat) + 64)
    start = np.minimum(2.0 ** np.ceil(np.log2(need)), ctrl.max_terms).astype(int)
    for n0 in np.unique(start):
        _pfq_group(num, den, zflat, np.flatnonzero(start == n0), int(n0), ctrl,
                   out_scale, out_sum, out_terms)
    return out_scale, out_sum, out_terms


def _pfq_group(num, den, zflat, pending, n, ctrl, out_scale, out_sum, out_terms):
    """Sum the rows ``pending`` of ``_pfq_rows`` starting from ``n`` terms."""
    while pending.size:
        zp = zflat[pending]
        coef = -_log_fact(n)
        csign = np.ones(n)
        for a in num:
            la, sa = _log_poch(a, n)
            coef = coef + la
            csign = csign * sa
        for b in den:
            lb, sb = _log_poch(b, n)
            coef = coef - lb
            csign = csign * sb
        k = np.arange(n, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lz = np.log(np.abs(zp))
            logt = coef[None, :] + k[None, :] * lz[:, None]
        logt[:, 0] = coef[0]
        logt[zp == 0, 1:] = -np.inf
        odd = (np.arange(n) % 2 == 1)[None, :]
        sign = csign[None, :] * np.where((zp < 0)[:, None] & odd, -1.0, 1.0)
        sign[logt == -np.inf] = 0.0
        scale = np.max(logt, axis=1)
        s = sign * np.exp(logt - scale[:, None]).astype(float)
        scale = scale.astype(float)
        total = np.sum(s, axis=1)
        mixed = np.any(s < 0, axis=1) & np.any(s > 0, axis=1)
        for r in np.flatnonzero(mixed):
            total[r] = math.fsum(s[r].tolist())
            if total[r] == 0:
                raise CancellationError("series summed to zero")
            _check_cancellation(0.0, math.log(np.sum(np.abs(s[r]))), math.log(abs(total[r])),
                                "1-variable series")
        # past the peak the terms shrink monotonically, so the trailing
        # columns decide convergence as well as the whole row would
        with np.errstate(divide="ignore"):
            done = _tail_converged(np.log(np.abs(s[:, -_TAIL_WINDOW:])), np.log(np.abs(total)),
                                   ctrl.rel_tol)
        idx = pending[done]
        out_scale.flat[idx] = scale[done]
        out_sum.flat[idx] = total[done]
        out_terms.flat[idx] = n
        pending = pending[~done]
        if pending.size:
            if n >= ctrl.max_terms:
                raise ConvergenceError(
                    f"series did not converge within {ctrl.max_terms} terms "
                    f"(z={zflat[pending[0]]!r})"
                )
            n = min(2 * n, ctrl.max_terms)


def gammaln(x: float) -> float:
    """Natural logarithm of the gamma function for ``x > 0``."""
    if not x > 0:
        raise DomainError(f"gammaln requires x > 0, got {x}")
    return math.lgamma(x)


def _asymptotic_threshold(a: float, b: float, ctrl: SeriesControl) -> float:
    return max(0.4 * ctrl.max_terms, 40.0 * (abs(a) + abs(b) + 1.0), 200.0)


def _kummer_asymptotic(a: float, b: float, z: np.ndarray, tol: float):
    """``ln 1F1(a; b; z)`` for large positive ``z`` and ``a, b > 0``.

    Uses ``Gamma(b)/Gamma(a) e^z z^(a-b) sum_k (b-a)_k (1-a)_k / (k! z^k)``,
    truncated before the smallest term.
    """
    out = np.empty(z.shape)
    nterms = np.empty(z.shape, dtype=int)
    for i, zi in enumerate(z.flat):
        term, total, k = 1.0, 1.0, 0
        while True:
            nxt = term * (b - a + k) * (1 - a + k) / ((k + 1) * zi)
            if nxt == 0 or abs(nxt) >= abs(term):
                break
            term = nxt
            total += term
            k += 1
            if abs(term) < tol * abs(total):
                break
        if total <= 0:
            raise DomainError("asymptotic 1F1 sum is not positive")
        out.flat[i] = (math.lgamma(b) - math.lgamma(a) + zi + (a - b) * math.log(zi)
                       + math.log(total))
        nterms.flat[i] = k + 1
    return out, nterms


def _kummer_parts(a, b, z, ctrl, kummer):
    if _is_nonpos_int(b) and not (_is_nonpos_int(a) and a > b):
        raise DomainError(f"1F1 undefined for b={b}")
    z = np.asarray(z, dtype=float)
    terminating = _is_nonpos_int(a)
    if kummer is None:
        flip = (z < 0) & (not terminating)
    else:
        flip = np.full(z.shape, bool(kummer))
    scale = np.zeros(z.shape)
    scaled = np.zeros(z.shape)
    terms = np.zeros(z.shape, dtype=int)
    # the power series needs O(|z|) terms; far out the asymptotic series is exact
    # to rounding because the neglected term is O(e^-|z|)
    big = np.abs(z) > _asymptotic_threshold(a, b, ctrl)
    done = np.zeros(z.shape, dtype=bool)
    if not terminating:
        for sel, arg, shift, aa in ((big & ~flip, z, 0.0, a), (big & flip, -z, 1.0, b - a)):
            if np.any(sel) and aa > 0 and b > 0:
                done |= sel
                ls, nt = _kummer_asymptotic(aa, b, arg[sel], ctrl.rel_tol)
                scale[sel], scaled[sel], terms[sel] = ls + shift * z[sel], 1.0, nt
    flip = flip & ~done
    direct = ~flip & ~done
    if np.any(direct):
        s0, v0, t0 = _pfq_rows((a,), (b,), z[direct], ctrl)
        scale[direct], scaled[direct], terms[direct] = s0, v0, t0
    if np.any(flip):
        s1, v1, t1 = _pfq_rows((b - a,), (b,), -z[flip], ctrl)
        scale[flip], scaled[flip], terms[flip] = s1 + z[flip], v1, t1
    return scale, scaled, terms


def kummer_1f1(a: float, b: float, z: float, ctrl: SeriesControl | None = None,
               kummer: bool | None = None) -> FnResult:
    """Confluent hypergeometric function ``1F1(a; b; z)``.

    For ``z < 0`` and non-terminating ``a`` the Kummer transformation
    ``1F1(a; b; z) = e^z 1F1(b - a; b; -z)`` is applied so that the summed
    series has eventually positive terms. ``kummer`` forces (True) or
    suppresses (False) the transformation.

    For ``|z| > 700`` the result is returned log-scaled.
    """
    ctrl = ctrl or default_control()
    scale, scaled, terms = _kummer_parts(a, b, np.array([z], dtype=float), ctrl, kummer)
    return _finish(scale[0], scaled[0], int(terms[0]), force_log=abs(z) > _LOG_OVERFLOW)


def log_kummer_1f1(a: float, b: float, z, ctrl: SeriesControl | None = None) -> np.ndarray:
    """Vectorised ``ln 1F1(a; b; z)`` for arguments where the function is positive."""
    ctrl = ctrl or default_control()
    scale, scaled, _ = _kummer_parts(a, b, np.asarray(z, dtype=float), ctrl, None)
    if np.any(scaled <= 0):
        raise DomainError("1F1 is not positive at every requested argument")
    return scale + np.log(scaled)


def gauss_2f1(a: float, b: float, c: float, z: float, ctrl: SeriesControl | None = None,
              pfaff: bool | None = None) -> FnResult:
    """Gauss hypergeometric function ``2F1(a, b; c; z)``.

    Negative arguments are mapped into ``[0, 1)`` with the Pfaff
    transformation ``2F1(a, b; c; z) = (1-z)^(-b) 2F1(c-a, b; c; z/(z-1))``.
    ``pfaff`` forces or suppresses the transformation.
    """
    ctrl = ctrl or default_control()
    if _is_nonpos_int(c):
        raise DomainError(f"2F1 undefined for c={c}")
    if _is_nonpos_int(a) and not _is_nonpos_int(b):
        a, b = b, a
    terminating = _is_nonpos_int(b)
    use_pfaff = (z < 0) if pfaff is None else pfaff
    shift = 0.0
    if use_pfaff:
        if z >= 1:
            raise DomainError(f"Pfaff transformation undefined at z={z}")
        shift = -b * math.log1p(-z)
        a, z = c - a, z / (z - 1.0)
    if not terminating and not abs(z) < 1:
        raise DomainError(f"2F1 series diverges at z={z}")
    scale, scaled, terms = _pfq_rows((a, b), (c,), np.array([z]), ctrl)
    return _finish(scale[0] + shift, scaled[0], int(terms[0]))


# ---------------------------------------------------------------------------
# two-variable series
# ---------------------------------------------------------------------------

def _double_series(row, col, coupling, ctrl: SeriesControl):
    """Sum ``sum_{i,j} R[i] C[j] K[i+j]`` given log/sign generators.

    ``row(n)``, ``col(n)`` and ``coupling(n)`` return ``(logabs, sign)``
    arrays of length ``n``. The truncation square grows by doubling until,
    for three consecutive shells ``max(i, j) = k`` past the peak, the
    estimated remaining tail falls below ``rel_tol`` relative to the sum.
    """
    K = 64
    while True:
        K = min(K, ctrl.max_terms)
        lr, sr = row(K)
        lc, sc = col(K)
        lk, sk = coupling(2 * K - 1)
        # T[i, j] = T[i, 0] * prod_{k<j} (C[k+1] K[i+k+1]) / (C[k] K[i+k]); the row
        # bases and the log-ratios are both moderate near the peak, unlike the
        # individual log-factors, so the 2-D part can run in double precision
        with np.errstate(invalid="ignore"):
            base = lr + lk[:K]
            ref = np.max(base)
            base = (base - ref).astype(float)
            dk = np.nan_to_num(np.diff(lk).astype(float), nan=-np.inf, posinf=np.inf)
            dc = np.nan_to_num(np.diff(lc).astype(float), nan=-np.inf, posinf=np.inf)
        ref = float(ref)
        shell = np.full(K, -np.inf)
        mass = np.full(K, -np.inf)
        j = np.arange(K)
        step = max(1, _BLOCK_ELEMENTS // K)
        parts = []
        mixed = False
        for i0 in range(0, K, step):
            i = np.arange(i0, min(i0 + step, K))
            logt = np.empty((i.size, K))
            logt[:, 0] = 0.0
            with np.errstate(invalid="ignore"):
                np.cumsum(dk[i[:, None] + j[None, :-1]] + dc[None, :], axis=1, out=logt[:, 1:])
            logt += base[i, None]
            logt[np.isnan(logt)] = -np.inf
            sign = sr[i, None] * sc[None, :] * sk[i[:, None] + j[None, :]]
            lower = j[None, :] <= i[:, None]
            low = np.where(lower, logt, -np.inf)
            up = np.where(~lower, logt, -np.inf)
            shell[i] = np.maximum(shell[i], np.max(low, axis=1))
            shell = np.maximum(shell, np.max(up, axis=0))
            with np.errstate(divide="ignore"):
                mass[i] = np.logaddexp(mass[i], logsumexp(low, axis=1))
                mass = np.logaddexp(mass, logsumexp(up, axis=0))
            m = float(np.max(logt))
            if m == -np.inf:
                continue
            s = np.where(sign == 0, 0.0, sign) * np.exp(logt - m)
            blk_mixed = bool(np.any(s < 0) and np.any(s > 0))
            mixed |= blk_mixed
            parts.append((m, _sum_scaled(s, blk_mixed)))
        top = max(p[0] for p in parts)
        terms = [v * math.exp(m - top) for m, v in parts]
        shell += ref
        mass += ref
        top += ref
        total = math.fsum(terms) if mixed else sum(terms)
        if total == 0:
            raise CancellationError("double series summed to zero")
        log_sum = top + math.log(abs(total))
        if mixed:
            _check_cancellation(float(np.max(shell)), float(logsumexp(mass)), log_sum,
                                "double series")
        if _tail_converged(mass, log_sum, ctrl.rel_tol)[0]:
            return top, total, K * K
        if K >= ctrl.max_terms:
            raise ConvergenceError(f"double series did not converge within {K} terms per index")
        K *= 2


def _one_var(b: float, c: float | None, x: float):
    """Generator for ``(b)_k x^k / ((c)_k k!)`` factors (no ``(c)_k`` if c is None)."""

    def gen(n):
        lb, sb = _log_poch(b, n)
        lc, sc = _log_poch(c, n) if c is not None else (0.0, 1.0)
        lx, sx = _log_power(x, n)
        logabs = lb - lc + lx - _log_fact(n)
        sign = sb * sc * sx
        logabs = np.where(sign == 0, -np.inf, logabs)
        return logabs, sign

    return gen


def appell_f2(a: float, b1: float, b2: float, c1: float, c2: float, x: float, y: float,
              ctrl: SeriesControl | None = None) -> FnResult:
    """Appell function ``F2(a; b1, b2; c1, c2; x, y)``.

    Defined by its double series, which converges for ``|x| + |y| < 1``.

    Raises
    ------
    DomainError
        If ``|x| + |y| >= 1``.
    """
    ctrl = ctrl or default_control()
    if not abs(x) + abs(y) < 1:
        raise DomainError(f"F2 requires |x| + |y| < 1, got {abs(x) + abs(y)}")
    for c in (c1, c2):
        if _is_nonpos_int(c):
            raise DomainError(f"F2 undefined for c={c}")
    # terms eventually decay like (|x| + |y|)^n; give up early if the budget cannot cover it
    r = abs(x) + abs(y)
    if r > 0 and math.log(1 / ctrl.rel_tol) / -math.log(r) > ctrl.max_terms:
        raise ConvergenceError(f"F2 at |x| + |y| = {r} needs more than {ctrl.max_terms} terms")

    def coupling(n):
        return _log_poch(a, n)

    top, total, terms = _double_series(_one_var(b1, c1, x), _one_var(b2, c2, y), coupling, ctrl)
    return _finish(top, total, terms)


def humbert_phi2(b1: float, b2: float, c: float, x: float, y: float,
                 ctrl: SeriesControl | None = None, transform: bool | None = None) -> FnResult:
    """Humbert confluent function ``Phi2(b1, b2; c; x, y)``.

    The double series is entire in ``x`` and ``y`` but alternates for
    negative arguments. When both arguments are non-positive the
    transformation ``Phi2(b1, b2; c; x, y) = e^y Phi2(b1, c-b1-b2; c; x-y, -y)``
    (shifting by the more negative argument) turns it into a series with
    non-negative arguments. ``transform`` forces or suppresses this.

    Raises
    ------
    CancellationError
        If the summed series loses all significant digits.
    ConvergenceError
        If the series needs more than ``max_terms`` terms per index.
    """
    ctrl = ctrl or default_control()
    if _is_nonpos_int(c):
        raise DomainError(f"Phi2 undefined for c={c}")
    if transform is None:
        transform = x <= 0 and y <= 0 and (x < 0 or y < 0)
    shift = 0.0
    if transform:
        if y <= x:
            shift = y
            b1, b2, x, y = b1, c - b1 - b2, x - y, -y
        else:
            shift = x
            b1, b2, x, y = c - b1 - b2, b2, -x, y - x

    def coupling(n):
        lc, sc = _log_poch(c, n)
        return -lc, sc

    top, total, terms = _double_series(_one_var(b1, None, x), _one_var(b2, None, y), coupling, ctrl)
    return _finish(top + shift, total, terms)


# ---------------------------------------------------------------------------
# Lauricella F_A
# ---------------------------------------------------------------------------

# the degree mixing builds S x S matrices; this keeps them near 130 MB
_FA_MAX_DEGREE = 4096


def _binomial_mix(E: np.ndarray, v: np.ndarray, q: float) -> np.ndarray:
    """``out[s] = sum_t C(s, t) q^t (1-q)^(s-t) E[t] v[s-t]``."""
    S = E.size
    k = np.arange(S)
    lf = _gammaln(k + 1.0)
    u = np.subtract.outer(k, k)  # s - t
    lower = u >= 0
    u[~lower] = 0
    logw = (lf[:, None] + k[None, :] * (math.log(q) - math.log1p(-q)) - lf[None, :]
            - lf[u] + k[:, None] * math.log1p(-q))
    w = np.exp(logw, where=lower, out=np.zeros((S, S)))
    w *= v[u]
    return w @ E


def lauricella_fa(a: float, b, c, x, ctrl: SeriesControl | None = None) -> FnResult:
    """Lauricella function ``F_A(a; b_1..b_N; c_1..c_N; x_1..x_N)``, ``N <= 4``.

    The N-fold series is summed by total degree ``s = n_1 + ... + n_N``.
    Each degree collects a multinomial-weighted product of the
    one-variable factors ``(b_i)_n / (c_i)_n``; the weights are formed as
    nested binomial probabilities, which keeps every intermediate bounded.

    Raises
    ------
    DomainError
        If ``N`` is outside 1..4 or ``sum |x_i| >= 1``.
    """
    ctrl = ctrl or default_control()
    b = [float(v) for v in np.atleast_1d(b)]
    c = [float(v) for v in np.atleast_1d(c)]
    x = [float(v) for v in np.atleast_1d(x)]
    if not (len(b) == len(c) == len(x)):
        raise DomainError("b, c and x must have equal length")
    if not 1 <= len(b) <= 4:
        raise DomainError(f"F_A supports 1 to 4 variables, got {len(b)}")
    if any(_is_nonpos_int(ci) for ci in c):
        raise DomainError("F_A undefined for non-positive integer c")
    X = sum(abs(v) for v in x)
    if not X < 1:
        raise DomainError(f"F_A requires sum |x_i| < 1, got {X}")
    active = [(bi, ci, xi) for bi, ci, xi in zip(b, c, x) if xi != 0 and bi != 0]
    if not active:
        return FnResult(1.0, False, 1)

    # terms fall off no faster than X^s, which bounds the degree from below
    need = math.log(ctrl.rel_tol) / math.log(X)
    cap = min(ctrl.max_terms, _FA_MAX_DEGREE)
    if need > cap:
        raise ConvergenceError(
            f"F_A needs at least {need:.0f} degrees at sum |x| = {X:.6g}, budget is {cap}"
        )
    S = int(max(64, 2 ** math.ceil(math.log2(need))))
    while True:
        S = min(S, cap)
        E = None
        weight = 0.0
        for bi, ci, xi in active:
            lb, sb = _log_poch(bi, S)
            lc, sc = _log_poch(ci, S)
            _, sx = _log_power(xi, S)
            v = sb * sc * sx * np.exp(lb - lc).astype(float)
            if E is None:
                E = v
            else:
                E = _binomial_mix(E, v, weight / (weight + abs(xi)))
            weight += abs(xi)
        la, sa = _log_poch(a, S)
        with np.errstate(divide="ignore"):
            logt = la - _log_fact(S) + np.arange(S) * math.log(X) + np.log(np.abs(E))
        sign = sa * np.sign(E)
        topx = np.max(logt)
        top = float(topx)
        s = sign * np.exp(logt - topx).astype(float)
        mixed = bool(np.any(s < 0) and np.any(s > 0))
        total = _sum_scaled(s, mixed)
        if total == 0:
            raise CancellationError("F_A series summed to zero")
        with np.errstate(divide="ignore"):
            log_abs = np.log(np.abs(s))
        if mixed:
            _check_cancellation(float(np.max(log_abs)), float(logsumexp(log_abs)),
                                math.log(abs(total)), "F_A series")
        if np.all(s[1:] == 0) or _tail_converged(log_abs, math.log(abs(total)), ctrl.rel_tol)[0]:
            return _finish(top, total, S)
        if S >= cap:
            raise ConvergenceError(f"F_A did not converge within {S} degrees")
        S *= 2
