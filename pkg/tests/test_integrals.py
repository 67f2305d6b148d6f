import math

import gmpy2
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats
from scipy.stats import qmc

from fbhfs.errors import DomainError
from fbhfs.integrals import PerimetricPowers, gamma000, gamma_lmn, perimetric_terms, quadrature_oracle

exponent = st.floats(0.1, 1000, allow_nan=False, allow_infinity=False)
power = st.integers(0, 4)


def test_gamma000_closed_form(ctx):
    with ctx.local():
        a, b, c = gmpy2.mpfr(1), gmpy2.mpfr(2), gmpy2.mpfr(3)
        assert gamma000(a, b, c) == gamma_lmn(0, 0, 0, a, b, c)
        assert gamma000(a, b, c) == gmpy2.mpfr(2) / (3 * 4 * 5)


def test_gamma111_unit_exponents(ctx):
    with ctx.local():
        g = gamma_lmn(1, 1, 1, 1, 1, 1)
        assert g == gmpy2.mpfr(7) / 16


def test_terms_are_integers_and_count():
    terms = perimetric_terms(2, 1, 3)
    assert all(isinstance(w, int) and w > 0 for *_, w in terms)
    # each term has total degree l+m+n
    assert {p + q + r for p, q, r, _ in terms} == {6}


def test_negative_exponent_allowed_when_pair_sums_positive(ctx):
    with ctx.local():
        g = gamma_lmn(1, 1, 1, -0.5, 2, 300)
    ref = quadrature_oracle(1, 1, 1, -0.5, 2, 300)
    assert abs(float(g) - ref) <= 1e-10 * ref


@pytest.mark.parametrize("abc", [(-1, 1, 5), (-2, 1, 5), (1, -3, 2)])
def test_domain_error(abc):
    with pytest.raises(DomainError):
        gamma_lmn(0, 0, 0, *abc)


def test_oracle_rejects_unreachable_tolerance():
    with pytest.raises(ValueError):
        quadrature_oracle(0, 0, 0, 1, 1, 1, rel_tol=1e-14)


@settings(max_examples=60, deadline=None)
@given(power, power, power, exponent, exponent, exponent)
def test_closed_form_matches_quadrature(l, m, n, a, b, c):
    with gmpy2.context(precision=200):
        exact = float(gamma_lmn(l, m, n, a, b, c))
    assert abs(exact - quadrature_oracle(l, m, n, a, b, c)) <= 1e-10 * abs(exact)


@settings(max_examples=30, deadline=None)
@given(power, power, power, exponent, exponent, exponent)
def test_permutation_symmetry(l, m, n, a, b, c):
    # the triangle domain is symmetric in its three sides
    with gmpy2.context(precision=200):
        g = gamma_lmn(l, m, n, a, b, c)
        assert abs(g - gamma_lmn(m, l, n, b, a, c)) <= abs(g) * gmpy2.mpfr("1e-55")
        assert abs(g - gamma_lmn(n, m, l, c, b, a)) <= abs(g) * gmpy2.mpfr("1e-55")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 3), power, power, exponent, exponent, exponent)
def test_raising_l_is_minus_derivative_in_a(l, m, n, a, b, c):
    with gmpy2.context(precision=256):
        a, b, c = gmpy2.mpfr(a), gmpy2.mpfr(b), gmpy2.mpfr(c)
        h = a * gmpy2.mpfr("1e-20")
        fd = -(gamma_lmn(l, m, n, a + h, b, c) - gamma_lmn(l, m, n, a - h, b, c)) / (2 * h)
        up = gamma_lmn(l + 1, m, n, a, b, c)
        assert abs(fd - up) <= 1e-6 * abs(up)


def test_array_evaluation_matches_scalar(ctx):
    with ctx.local():
        a = ctx.array([1, 2, 3])
        b = ctx.array([0.5, 1.5, 2.5])
        c = ctx.array([400, 350, 300])
        vec = PerimetricPowers(a, b, c).gamma(2, 0, 1)
        for k in range(3):
            assert vec[k] == gamma_lmn(2, 0, 1, a[k], b[k], c[k])


def test_triangle_domain_direct_integration():
    # independent of perimetric coordinates: integrate r32 over |r21 - r31|..r21 + r31
    a, b, c = 0.7, 1.3, 2.1
    f = lambda r32, r31, r21: r21 * r31 * r32 * math.exp(-a * r21 - b * r31 - c * r32)
    val, _ = integrate.tplquad(f, 0, 40, 0, 40, lambda r21, r31: abs(r21 - r31),
                               lambda r21, r31: r21 + r31, epsabs=0, epsrel=1e-11)
    with gmpy2.context(precision=200):
        assert abs(val - float(gamma_lmn(1, 1, 1, a, b, c))) <= 1e-9 * val


def test_angular_factor_by_quasi_monte_carlo():
    # int d3x d3y exp(-a|x-y| - b|x| - c|y|) = 8 pi^2 Gamma111(a, b, c)
    a, b, c = 0.8, 1.5, 2.0
    u = qmc.Sobol(6, scramble=True, seed=7).random(2 ** 17)
    rx = stats.gamma.ppf(u[:, 0], 3, scale=1 / b)
    ry = stats.gamma.ppf(u[:, 3], 3, scale=1 / c)

    def direction(uc, up):
        ct = 2 * uc - 1
        st_ = np.sqrt(1 - ct ** 2)
        return np.stack([st_ * np.cos(2 * np.pi * up), st_ * np.sin(2 * np.pi * up), ct], axis=1)

    x = rx[:, None] * direction(u[:, 1], u[:, 2])
    y = ry[:, None] * direction(u[:, 4], u[:, 5])
    mean = np.mean(np.exp(-a * np.linalg.norm(x - y, axis=1)))
    qmc_val = (8 * math.pi / b ** 3) * (8 * math.pi / c ** 3) * mean
    with gmpy2.context(precision=200):
        ref = float(8 * gmpy2.const_pi() ** 2 * gamma_lmn(1, 1, 1, a, b, c))
    assert abs(qmc_val - ref) <= 1e-4 * ref
