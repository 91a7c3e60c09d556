import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, stats

from naksum import approx, hyperfn
from naksum.approx import (ApproxParams, FitError, cdf_power, cdf_power_quadrature,
                           cdf_power_series, fit, mgf_power, pdf_envelope, pdf_power)
from naksum.moments import ScenarioConfig, moment_pair


def _convolved_pdf(x, p):
    """Density of Gamma(a1, t1) + Gamma(a2, t2) by numerical convolution."""
    (t1, t2), (a1, a2) = p.scales, p.shapes
    g1, g2 = stats.gamma(a1, scale=t1), stats.gamma(a2, scale=t2)
    val, _ = integrate.quad(lambda s: g1.pdf(s) * g2.pdf(x - s), 0, x, epsabs=1e-14,
                            epsrel=1e-12, limit=200)
    return val


SCENARIOS = [
    ScenarioConfig(2, 1, 0.5),
    ScenarioConfig.from_profile(4, 2, 0.5, 1.0, 0.5),
    ScenarioConfig(3, 3, 0.8),
    ScenarioConfig.from_profile(4, 4, 0.2, 1.0, 0.0),
]


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_single_branch_fit_is_exact(m):
    p = fit(ScenarioConfig(1, m, 0.0, (1.7,)))
    assert_allclose(p.m_R, m, rtol=1e-13)
    assert_allclose(p.omega_R, 1.7, rtol=1e-15)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_single_branch_density_is_nakagami(m):
    p = fit(ScenarioConfig(1, m, 0.0, (1.7,)))
    r = np.linspace(0.01, 4.0, 60)
    ref = stats.nakagami(m, scale=math.sqrt(1.7)).pdf(r)
    assert_allclose(pdf_envelope(r, p), ref, rtol=1e-10, atol=0)


@pytest.mark.parametrize("config", SCENARIOS)
def test_fit_reproduces_both_moments(config):
    # the fitted law has mean a1 t1 + a2 t2 and variance a1 t1^2 + a2 t2^2
    p = fit(config)
    mp = moment_pair(config)
    (t1, t2), (a1, a2) = p.scales, p.shapes
    mean = a1 * t1 + a2 * t2
    var = a1 * t1 ** 2 + a2 * t2 ** 2
    assert_allclose(mean, mp.ez2, rtol=1e-13)
    assert_allclose(var + mean ** 2, mp.ez4, rtol=1e-12)


def test_two_exponential_case():
    # m_R = 1, L = 2 gives Exp(t1) + Exp(t2)
    p = ApproxParams(1.3, 1.0, 2, 0.4)
    t1, t2 = p.scales
    x = np.array([0.05, 0.5, 1.0, 3.0, 8.0])
    f = (np.exp(-x / t1) - np.exp(-x / t2)) / (t1 - t2)
    F = 1 - (t1 * np.exp(-x / t1) - t2 * np.exp(-x / t2)) / (t1 - t2)
    assert_allclose(pdf_power(x, p), f, rtol=1e-12)
    assert_allclose([cdf_power(v, p) for v in x], F, rtol=1e-11)


@pytest.mark.parametrize("p", [ApproxParams(1.0, 1.84, 4, 0.5), ApproxParams(0.7, 0.6, 3, 0.9),
                               ApproxParams(2.0, 3.3, 2, 0.1)])
def test_density_against_convolution(p):
    for x in (0.2, 1.0, 2.5, 6.0):
        assert_allclose(pdf_power(x, p), _convolved_pdf(x, p), rtol=1e-9)


@pytest.mark.parametrize("config", SCENARIOS)
def test_density_normalised(config):
    p = fit(config)
    total, _ = integrate.quad(lambda x: pdf_power(x, p), 0, np.inf, epsabs=1e-13, limit=200)
    assert_allclose(total, 1.0, atol=1e-10)
    env, _ = integrate.quad(lambda r: pdf_envelope(r, p), 0, np.inf, epsabs=1e-13, limit=200)
    assert_allclose(env, 1.0, atol=1e-10)


def test_density_at_origin():
    assert pdf_power(0.0, ApproxParams(1.0, 1.0, 1, 0.0)) == 1.0
    assert pdf_power(0.0, ApproxParams(1.0, 2.0, 2, 0.3)) == 0.0
    assert math.isinf(pdf_power(0.0, ApproxParams(1.0, 0.3, 2, 0.3)))
    with pytest.raises(hyperfn.DomainError):
        pdf_power(-1.0, ApproxParams(1.0, 2.0, 2, 0.3))


@pytest.mark.parametrize("config", SCENARIOS)
def test_cdf_series_matches_quadrature(config):
    p = fit(config)
    mean = config.L * p.omega_R
    for t in mean * np.array([0.01, 0.1, 0.5, 1.0, 2.0, 5.0]):
        assert abs(cdf_power_series(t, p) - cdf_power_quadrature(t, p)) < 1e-10


def test_cdf_falls_back_to_quadrature(monkeypatch):
    p = ApproxParams(1.0, 1.84, 4, 0.5)

    def broken(*args, **kwargs):
        raise hyperfn.CancellationError("forced")

    expected = cdf_power_quadrature(3.0, p)
    monkeypatch.setattr(approx, "cdf_power_series", broken)
    assert cdf_power(3.0, p) == expected


def test_mgf_values():
    p = ApproxParams(1.2, 1.5, 3, 0.6)
    assert mgf_power(0.0, p) == 1.0
    s = -0.7
    val, _ = integrate.quad(lambda x: math.exp(s * x) * pdf_power(x, p), 0, np.inf,
                            epsabs=1e-13, limit=200)
    assert_allclose(mgf_power(s, p), val, rtol=1e-9)
    t1, _ = p.scales
    with pytest.raises(hyperfn.DomainError):
        mgf_power(1.0 / t1, p)


def test_sampler_matches_cdf():
    p = ApproxParams(1.0, 1.84, 4, 0.5)
    x = approx.sample_power(p, 4000, np.random.default_rng(2024))
    res = stats.kstest(x, lambda v: np.array([cdf_power(float(t), p) for t in np.atleast_1d(v)]))
    assert res.pvalue > 1e-3


def test_params_validation():
    with pytest.raises(FitError):
        ApproxParams(0.0, 1.0, 2, 0.5)
    with pytest.raises(FitError):
        ApproxParams(1.0, -1.0, 2, 0.5)
    with pytest.raises(FitError):
        ApproxParams(1.0, 1.0, 2, 1.0)


def test_fit_keeps_real_m():
    p = fit(ScenarioConfig(4, 2, 0.5))
    assert p.m_R != round(p.m_R)


@settings(max_examples=25, deadline=None)
@given(omega=st.floats(0.1, 10.0), m=st.floats(0.3, 6.0), L=st.integers(1, 6),
       rho=st.floats(0.0, 0.95), u=st.floats(0.01, 4.0), du=st.floats(0.01, 2.0))
def test_cdf_monotone_and_bounded(omega, m, L, rho, u, du):
    p = ApproxParams(omega, m, L, rho)
    mean = L * omega
    a, b = cdf_power(u * mean, p), cdf_power((u + du) * mean, p)
    assert 0.0 <= a <= b <= 1.0


@settings(max_examples=20, deadline=None)
@given(omega=st.floats(0.1, 10.0), m=st.floats(0.5, 5.0), L=st.integers(2, 5),
       rho=st.floats(0.0, 0.95), c=st.floats(0.1, 10.0), u=st.floats(0.05, 3.0))
def test_cdf_scale_invariance(omega, m, L, rho, c, u):
    # scaling omega_R and t by the same factor leaves the CDF unchanged
    p, q = ApproxParams(omega, m, L, rho), ApproxParams(c * omega, m, L, rho)
    t = u * L * omega
    assert_allclose(cdf_power(t, p), cdf_power(c * t, q), rtol=1e-9, atol=1e-13)
