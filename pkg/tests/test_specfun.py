import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kreinsl import (EntireSolutionSpec, Hydrogen, Laguerre, Legendre, SeriesConvergenceError,
                     make_problem)
from kreinsl.specfun import (GammaPoleError, conf_hyp_m, gamma_fn, hydrogen_coefficient_polys,
                             hydrogen_phi, hyp2f1_series, laguerre_phi, legendre_phi, pochhammer,
                             series_phi)


def test_pochhammer_examples():
    assert pochhammer(3, 0) == 1
    assert pochhammer(2, 3) == 24
    for n in range(11):
        assert pochhammer(1, n) == math.factorial(n)


def test_gamma_examples():
    assert gamma_fn(1.0) == 1.0
    assert gamma_fn(0.5) == pytest.approx(1.7724538509055159, rel=1e-14)
    assert gamma_fn(2.5) == pytest.approx(1.329340388179137, rel=1e-14)
    with pytest.raises(GammaPoleError):
        gamma_fn(-2.0)


def test_gamma_against_factorials():
    for n in range(1, 40):
        assert gamma_fn(n + 1.0) == pytest.approx(math.factorial(n), rel=1e-12)


def test_hyp2f1_examples():
    assert hyp2f1_series(0.3, 1.7, 2.2, 0.0)[0] == 1.0
    val, tail = hyp2f1_series(1, 1, 1, 0.5)
    assert val == pytest.approx(2.0, rel=1e-13) and tail.converged
    val, tail = hyp2f1_series(-1, 3.0, 4.0, 0.6)
    assert val == pytest.approx(1 - 0.75 * 0.6, rel=1e-15)
    # terminates after the linear term; the stopping rule then sees two zero terms
    assert tail.terms_used <= 4


def test_hyp2f1_tail_failure():
    with pytest.raises(SeriesConvergenceError) as info:
        hyp2f1_series(1, 1, 1, 0.999, max_terms=50)
    assert not info.value.tail.converged


def test_conf_hyp_examples():
    assert conf_hyp_m(2.0 + 1j, 2.5, 0.0)[0] == 1.0
    assert conf_hyp_m(2.5, 2.5, 1.0)[0] == pytest.approx(math.e, rel=1e-14)
    assert conf_hyp_m(0.0, 2.5, 7.0)[0] == 1.0


def test_hydrogen_first_coefficients():
    c = hydrogen_coefficient_polys(2, 0.0, 1.0)
    assert c[1].coef.tolist() == [0.0] or np.allclose(c[1].coef, 0)
    assert np.allclose(c[2].coef, [0.0, -1.0 / 8.0])


def test_hydrogen_coefficient_degree():
    for a_coul in (0.0, 1.3):
        polys = hydrogen_coefficient_polys(12, a_coul, 1.5)
        for n, p in enumerate(polys):
            if a_coul == 0.0 and n % 2:
                assert np.allclose(p.coef, 0)
            else:
                assert p.degree() == n // 2


def test_hydrogen_leading_behavior():
    x = np.array([1e-6, 1e-4])
    y = hydrogen_phi(x, 5.0 + 2j, 0.7, 1.5).y
    assert np.allclose(y / x**2.0, 1.0, rtol=1e-3)


def test_hydrogen_lambda_zero_is_power():
    x = np.linspace(0.05, 1.0, 7)
    sv = hydrogen_phi(x, 0.0, 0.0, 1.0)
    assert np.allclose(sv.y, x**1.5, rtol=1e-15)
    assert np.allclose(sv.quasi_d, 1.5 * x**0.5, rtol=1e-15)


def test_legendre_examples():
    x = np.array([-1 + 1e-12, -0.5, 0.3])
    assert abs(legendre_phi(x[0], 4.0, 1.0).y) < 1e-5
    sv = legendre_phi(x, 2.25, 1.0)
    assert np.allclose(sv.y, np.sqrt(1 - x**2), rtol=1e-14)
    # coefficient of t: ((m + 1/2)^2 - lam)/(m + 1), read off from a tiny t
    m, lam = 2.0, 3.0
    x = 2e-7 - 1
    t = 0.5 * (1 + x)
    s = legendre_phi(x, lam, m).y / ((1 - x) * (1 + x)) ** (m / 2)
    assert (s - 1) / t == pytest.approx(((m + 0.5) ** 2 - lam) / (m + 1), rel=1e-5)


def test_laguerre_examples():
    x = np.array([0.1, 1.0, 4.0])
    sv = laguerre_phi(x, 0.0, 1.5)
    assert np.all(sv.y == 1.0) and np.all(sv.quasi_d == 0.0)
    assert np.allclose(laguerre_phi(x, -1.0, 1.5).y, 1 - x / 2.5, rtol=1e-15)
    t = 1e-8
    assert (laguerre_phi(t, 3.0, 1.5).y - 1) / t == pytest.approx(3.0 / 2.5, rel=1e-6)


def test_series_stopping_rule_reports_tail():
    sv, tail = laguerre_phi(2.0, 3.7, 1.5, with_tail=True)
    assert tail.converged and tail.terms_used > 5
    with pytest.raises(SeriesConvergenceError):
        laguerre_phi(50.0, 3.7, 1.5, max_terms=20)


SPECS = [EntireSolutionSpec(Hydrogen(0.8, 1.5)), EntireSolutionSpec(Legendre(1.0)),
         EntireSolutionSpec(Laguerre(1.5)), EntireSolutionSpec(Laguerre(-1.5))]
POINTS = [0.6, 0.2, 1.2, 1.2]


@settings(max_examples=30, deadline=None)
@given(i=st.integers(0, 3), re=st.floats(-30, 30), im=st.floats(-30, 30))
def test_conjugation_symmetry(i, re, im):
    lam = complex(re, im)
    a = series_phi(SPECS[i], POINTS[i], lam)
    b = series_phi(SPECS[i], POINTS[i], lam.conjugate())
    assert b.y == pytest.approx(np.conj(a.y), rel=1e-12, abs=1e-300)
    assert b.quasi_d == pytest.approx(np.conj(a.quasi_d), rel=1e-12, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(i=st.integers(0, 3), re=st.floats(-10, 10))
def test_real_lambda_gives_real_phi(i, re):
    sv = series_phi(SPECS[i], POINTS[i], re)
    assert np.isrealobj(sv.y) or np.imag(sv.y) == 0


@settings(max_examples=20, deadline=None)
@given(i=st.integers(0, 3), re=st.floats(-8, 8), radius=st.floats(0.1, 2.0))
def test_cauchy_mean_value(i, re, radius):
    n = 64
    circle = re + radius * np.exp(2j * np.pi * np.arange(n) / n)
    vals = series_phi(SPECS[i], POINTS[i], circle).y
    center = series_phi(SPECS[i], POINTS[i], complex(re)).y
    assert abs(vals.mean() - center) <= 1e-8 * max(abs(center), np.max(np.abs(vals)))


@pytest.mark.parametrize("i", range(4))
def test_termwise_derivative_order(i):
    spec, x0, lam = SPECS[i], POINTS[i], 2.3
    p = make_problem(spec).p
    exact = series_phi(spec, x0, lam).quasi_d / p(x0)

    def fd(h):
        return (series_phi(spec, x0 + h, lam).y - series_phi(spec, x0 - h, lam).y) / (2 * h)

    # the O(h^2) regime; at h = 1e-5 and 1e-6 rounding already competes
    e1, e2 = abs(fd(1e-3) - exact), abs(fd(1e-4) - exact)
    assert math.log10(e1 / e2) >= 1.9
    for h in (1e-5, 1e-6):
        assert abs(fd(h) - exact) <= 1e-8 * max(1.0, abs(exact))
