import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from naksum import hyperfn, moments
from naksum.moments import (PARTITIONS, MomentError, MomentPair, ScenarioConfig, fourth_moment,
                            fourth_moment_expansion, moment_pair, second_moment, w_closed_form,
                            w_coefficient, w_lauricella, w_quadrature)

# W from mpmath quadrature of its defining integral (tests/oracles/generate_oracles.py)
W_REF = {
    (1, 0.2): [6.5450849718747374, 4.426323893510239, 3.9270509831248425,
               3.3058078503795777, 2.7889381942843254],
    (2, 0.5): [69.941125496954281, 60.94620712396469, 58.284271247461901,
               55.351162826843884, 52.587877956179099],
    (3, 0.8): [1076.65631459995, 1035.9526510363088, 1022.8234988699525,
               1009.284114369697, 995.96445400066937],
}

# E[(Z1 + Z2)^p] from the bivariate Nakagami density, integrated with mpmath
BIVARIATE = [
    (2, 0.5, (1.0, 0.6), 3.0563595226029313, 13.019789902931029),
    (1, 0.3, (1.0, 1.0), 3.691003515100135, 23.304519830619867),
]


def _gamma_product(m, k):
    return math.prod(math.gamma(m + kj / 2) / math.gamma(m) for kj in k)


@pytest.mark.parametrize("m, rho", sorted(W_REF))
def test_w_coefficient_reference(m, rho):
    got = [w_coefficient(k, m, rho) for k in PARTITIONS]
    assert_allclose(got, W_REF[(m, rho)], rtol=1e-12)


@pytest.mark.parametrize("m, rho", sorted(W_REF))
def test_w_three_routes_agree(m, rho):
    for k, ref in zip(PARTITIONS, W_REF[(m, rho)]):
        assert_allclose(w_lauricella(k, m, rho), ref, rtol=1e-12)
        assert_allclose(w_quadrature(k, m, rho), ref, rtol=1e-10)
        if k != (1, 1, 1, 1):
            assert_allclose(w_closed_form(k, m, rho), ref, rtol=1e-12)


def test_w_closed_form_missing_partition():
    with pytest.raises(ValueError):
        w_closed_form((1, 1, 1, 1), 2, 0.5)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_w_independent_branches(m):
    for k in PARTITIONS:
        expected = _gamma_product(m, k)
        assert_allclose(w_coefficient(k, m, 0.0), expected, rtol=1e-12)
        # the series forms approach the same limit continuously
        assert_allclose(w_lauricella(k, m, 1e-14), expected, rtol=1e-6)


def test_w_symmetric_in_arguments():
    assert w_coefficient((1, 3), 2, 0.4) == w_coefficient((3, 1), 2, 0.4)
    assert w_coefficient((1, 2, 1), 2, 0.4) == w_coefficient((2, 1, 1), 2, 0.4)
    assert_allclose(w_lauricella((1, 2, 1), 2, 0.4), w_lauricella((2, 1, 1), 2, 0.4),
                    rtol=1e-13)


def test_w_rejects_non_partition():
    with pytest.raises(ValueError):
        w_coefficient((2, 1), 2, 0.5)
    with pytest.raises(MomentError):
        w_coefficient((4,), 1.5, 0.5)


@pytest.mark.parametrize("m, rho, powers, ez2, ez4", BIVARIATE)
def test_moments_against_bivariate_density(m, rho, powers, ez2, ez4):
    c = ScenarioConfig(2, m, rho, powers)
    assert_allclose(second_moment(c), ez2, rtol=1e-12)
    assert_allclose(fourth_moment(c), ez4, rtol=1e-12)


@pytest.mark.parametrize("m", [1, 2, 5])
def test_single_branch_is_nakagami(m):
    c = ScenarioConfig(1, m, 0.0, (2.5,))
    assert_allclose(second_moment(c), 2.5, rtol=1e-15)
    assert_allclose(fourth_moment(c), 2.5 ** 2 * (1 + 1 / m), rtol=1e-14)


def test_independent_rayleigh_pair():
    # E[(Z1 + Z2)^2] = 2 + 2 (E Z)^2 with E Z = sqrt(pi)/2 for unit-power Rayleigh
    c = ScenarioConfig(2, 1, 0.0)
    assert_allclose(second_moment(c), 2 + math.pi / 2, rtol=1e-14)


@pytest.mark.parametrize("L", [2, 3, 4, 5])
def test_fast_path_matches_general_sums(L):
    c = ScenarioConfig(L, 3, 0.35)
    assert_allclose(fourth_moment(c, fast_path=True), fourth_moment(c, fast_path=False),
                    rtol=1e-13)


@pytest.mark.parametrize("L, powers", [
    (3, (1.0, 0.7, 0.2)),
    (4, (1.0, 0.6065306597126334, 0.36787944117144233, 0.22313016014842982)),
])
def test_fourth_moment_brute_force_expansion(L, powers):
    c = ScenarioConfig(L, 2, 0.5, powers)
    assert_allclose(fourth_moment(c), fourth_moment_expansion(c), rtol=1e-10)


def test_from_profile_powers():
    c = ScenarioConfig.from_profile(4, 2, 0.5, omega1=2.0, delta=0.5)
    assert_allclose(c.powers, 2.0 * np.exp(-0.5 * np.arange(4)), rtol=1e-15)


@pytest.mark.parametrize("kwargs", [
    dict(L=0, m_z=1, rho=0.1),
    dict(L=2, m_z=0, rho=0.1),
    dict(L=2, m_z=1.5, rho=0.1),
    dict(L=2, m_z=1, rho=-0.1),
    dict(L=2, m_z=1, rho=0.9995),
    dict(L=2, m_z=1, rho=0.1, powers=(1.0,)),
    dict(L=2, m_z=1, rho=0.1, powers=(1.0, -1.0)),
    dict(L=2, m_z=1, rho=0.1, noise_density=0.0),
])
def test_config_validation(kwargs):
    with pytest.raises(MomentError):
        ScenarioConfig(**kwargs)


def test_moment_pair_rejects_degenerate():
    with pytest.raises(MomentError):
        MomentPair(1.0, 1.0)


def test_debug_cross_check(monkeypatch):
    monkeypatch.setattr(moments, "DEBUG", True)
    moments._w_cached.cache_clear()
    assert_allclose(w_coefficient((2, 1, 1), 2, 0.3),
                    w_quadrature((2, 1, 1), 2, 0.3), rtol=1e-10)


@settings(max_examples=25, deadline=None)
@given(L=st.integers(1, 5), m=st.integers(1, 4), rho=st.floats(0.0, 0.95),
       scale=st.floats(0.01, 100.0))
def test_moments_homogeneous_in_power(L, m, rho, scale):
    base = ScenarioConfig(L, m, rho)
    scaled = ScenarioConfig(L, m, rho, (scale,) * L)
    a, b = moment_pair(base), moment_pair(scaled)
    assert_allclose(b.ez2, scale * a.ez2, rtol=1e-12)
    assert_allclose(b.ez4, scale ** 2 * a.ez4, rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(L=st.integers(2, 5), m=st.integers(1, 4), r1=st.floats(0.0, 0.9),
       dr=st.floats(0.01, 0.09))
def test_moments_increase_with_correlation(L, m, r1, dr):
    lo = moment_pair(ScenarioConfig(L, m, r1))
    hi = moment_pair(ScenarioConfig(L, m, r1 + dr))
    assert hi.ez2 > lo.ez2
    assert hi.ez4 > lo.ez4


@settings(max_examples=25, deadline=None)
@given(L=st.integers(1, 5), m=st.integers(1, 6), rho=st.floats(0.0, 0.999))
def test_moments_bracketed(L, m, rho):
    # Cauchy-Schwarz: (E sum Z_k)^2 <= E Z^2 <= L sum E Z_k^2, and kurtosis > 1
    p = moment_pair(ScenarioConfig(L, m, rho))
    ez = L * math.exp(math.lgamma(m + 0.5) - math.lgamma(m)) / math.sqrt(m)
    assert ez ** 2 <= p.ez2 * (1 + 1e-12)
    assert p.ez2 <= L * L * (1 + 1e-12)
    assert p.ez4 > p.ez2 ** 2


def test_near_full_correlation():
    # the F_A form gives up at once; the moments switch to quadrature and
    # approach the fully correlated limit Z = L Z_1
    with pytest.raises(hyperfn.ConvergenceError):
        w_coefficient((1, 1, 1, 1), 2, 0.999)
    p = moment_pair(ScenarioConfig(4, 2, 0.999))
    assert_allclose(p.ez2, 16.0, rtol=2e-4)
    assert_allclose(p.ez4, 4 ** 4 * 1.5, rtol=1e-3)
    assert_allclose(p.ez4, fourth_moment_expansion(ScenarioConfig(4, 2, 0.999)), rtol=1e-9)
