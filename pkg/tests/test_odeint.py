import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kreinsl import (ConstantCoeff, EntireSolutionSpec, Hydrogen, IntegrationError, Laguerre,
                     Legendre, SLProblem, ShootingConfig, SolutionValue, integrate_sl,
                     make_problem, phi_eval, psi_c_theta)
from kreinsl.specfun import laguerre_phi, legendre_phi, series_reach

FREE = make_problem(EntireSolutionSpec(ConstantCoeff()), b=10.0)


def sv(y, v, x=0.0):
    return SolutionValue(y, v, x, None)


def test_sine_example():
    out = integrate_sl(FREE, 4.0, 1e-300, sv(0.0, 1.0), math.pi / 4)
    assert out.y == pytest.approx(0.5, abs=1e-10)
    assert out.quasi_d == pytest.approx(0.0, abs=1e-10)


def test_linear_when_lambda_zero():
    out = integrate_sl(FREE, 0.0, 0.5, sv(1.0, -2.0), 3.0)
    assert out.y == pytest.approx(1.0 - 2.0 * 2.5, rel=1e-12)


def test_vectorized_over_lambda():
    lam = np.array([1.0, 4.0, 9.0 + 1j])
    out = integrate_sl(FREE, lam, 1e-300, sv(0.0, 1.0), 1.0)
    k = np.sqrt(lam)
    assert np.allclose(out.y, np.sin(k) / k, rtol=1e-9)


def test_legendre_continuation_matches_series():
    pr = make_problem(EntireSolutionSpec(Legendre(1.0)))
    s0 = legendre_phi(-0.5, 2.25, 1.0)
    out = integrate_sl(pr, 2.25, -0.5, s0, 0.5)
    ref = legendre_phi(0.5, 2.25, 1.0)
    assert out.y == pytest.approx(ref.y, rel=1e-9)
    assert out.quasi_d == pytest.approx(ref.quasi_d, rel=1e-9)


def test_psi_initial_data():
    for theta, expect in ((0.0, (0.0, -1.0)), (math.pi / 2, (1.0, 0.0))):
        out = psi_c_theta(FREE, 1.0, theta, 3.0, 1.0)
        assert (out.y, out.quasi_d) == pytest.approx(expect, abs=1e-15)


def test_psi_uses_plain_derivative():
    pr = make_problem(EntireSolutionSpec(Legendre(1.0)))
    out = psi_c_theta(pr, 0.5, 0.3, 2.0, 0.5)
    assert out.y == pytest.approx(math.sin(0.3))
    assert out.quasi_d / pr.p(0.5) == pytest.approx(-math.cos(0.3))


def test_psi_closed_form():
    out = psi_c_theta(FREE, 1.0, 0.0, 1.0, np.array([0.0 + 1e-300, 0.5]))
    assert out.y == pytest.approx(np.sin(1 - np.array([0.0, 0.5])), abs=1e-10)


def test_psi_rejects_points_beyond_c():
    with pytest.raises(ValueError):
        psi_c_theta(FREE, 1.0, 0.0, 1.0, 1.5)
    with pytest.raises(ValueError):
        psi_c_theta(FREE, 1.0, 3.5, 1.0, 0.5)


def test_handoff_consistency_laguerre():
    spec = EntireSolutionSpec(Laguerre(1.5))
    pr = make_problem(spec)
    xs = series_reach(spec, pr.a, pr.b, 3.0)
    via_ode = phi_eval(pr, spec, 3.0, 2 * xs)
    direct = laguerre_phi(2 * xs, 3.0, 1.5)
    assert via_ode.y == pytest.approx(direct.y, rel=1e-9)
    assert via_ode.quasi_d == pytest.approx(direct.quasi_d, rel=1e-9)


def test_continuity_at_switch_point():
    spec = EntireSolutionSpec(Hydrogen(0.4, 1.0))
    pr = make_problem(spec)
    xs = series_reach(spec, pr.a, pr.b, 7.0)
    pts = np.array([xs * (1 - 1e-9), xs * (1 + 1e-9)])
    out = phi_eval(pr, spec, 7.0, pts)
    assert out.y[0] == pytest.approx(out.y[1], rel=1e-7)
    assert out.quasi_d[0] == pytest.approx(out.quasi_d[1], rel=1e-7)


def test_hydrogen_lambda_zero_continues_power():
    spec = EntireSolutionSpec(Hydrogen(0.0, 1.0))
    pr = make_problem(spec)
    x = np.array([0.1, 2.0, 7.5])
    out = phi_eval(pr, spec, 0.0, x)
    assert np.allclose(out.y, x**1.5, rtol=1e-9)


@pytest.mark.parametrize("fam", [Hydrogen(0.5, 1.0), Legendre(1.0), Laguerre(1.5)])
def test_real_lambda_gives_real_phi(fam):
    spec = EntireSolutionSpec(fam)
    pr = make_problem(spec)
    x = np.array([0.3, 0.9])
    out = phi_eval(pr, spec, np.array([-2.0, 5.0]), x)
    assert np.isrealobj(out.y)
    cplx = phi_eval(pr, spec, np.array([-2.0 + 0j, 5.0 + 0j]), x)
    assert np.max(np.abs(cplx.y.imag)) == 0.0


def test_output_shape():
    spec = EntireSolutionSpec(Laguerre(1.5))
    pr = make_problem(spec)
    out = phi_eval(pr, spec, np.zeros((2, 3)), np.array([1.0, 2.0, 3.0, 4.0]))
    assert out.y.shape == (4, 2, 3)


def test_legendre_l2_condition_at_left_end():
    spec = EntireSolutionSpec(Legendre(1.0))
    pr = make_problem(spec)
    vals = []
    for lo in (-1 + 1e-4, -1 + 1e-6, -1 + 1e-8):
        x, w = np.polynomial.legendre.leggauss(200)
        # integrate in log-distance to resolve the endpoint layer
        s_lo, s_hi = math.log(lo + 1), math.log(1.5)
        s = 0.5 * (s_hi - s_lo) * (x + 1) + s_lo
        xx = np.exp(s) - 1
        phi = phi_eval(pr, spec, 3.0, xx).y
        vals.append(float(np.sum(0.5 * (s_hi - s_lo) * w * phi**2 * np.exp(s))))
    assert np.isfinite(vals).all()
    assert abs(vals[2] - vals[1]) < abs(vals[1] - vals[0]) < 1e-3 * vals[0]


def test_step_underflow_reports_position():
    pr = SLProblem(lambda x: np.ones_like(x), lambda x: 1.0 / (x - 1.0) ** 4,
                   lambda x: np.ones_like(x), 0.0, 2.0)
    with pytest.raises(IntegrationError) as info:
        integrate_sl(pr, 0.0, 0.5, sv(1.0, 0.0), 1.5, ShootingConfig(max_steps=2000))
    assert 0.5 <= info.value.x_reached < 1.0


@settings(max_examples=15, deadline=None)
@given(y0=st.floats(-2, 2), v0=st.floats(-2, 2), lam=st.floats(-5, 40))
def test_reversibility(y0, v0, lam):
    pr = make_problem(EntireSolutionSpec(Hydrogen(0.3, 1.0)))
    fwd = integrate_sl(pr, lam, 0.5, sv(y0, v0, 0.5), 2.0)
    back = integrate_sl(pr, lam, 2.0, fwd, 0.5)
    scale = max(abs(y0), abs(v0), 1.0)
    assert abs(back.y - y0) <= 10 * 1e-10 * scale * max(1.0, abs(fwd.y))
    assert abs(back.quasi_d - v0) <= 10 * 1e-10 * scale * max(1.0, abs(fwd.quasi_d))


@settings(max_examples=15, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(-2, 2), lam=st.floats(-5, 40))
def test_linearity_in_initial_data(a, b, lam):
    pr = make_problem(EntireSolutionSpec(Laguerre(1.5)))
    u = integrate_sl(pr, lam, 1.0, sv(1.0, 0.3, 1.0), 3.0)
    v = integrate_sl(pr, lam, 1.0, sv(-0.2, 1.0, 1.0), 3.0)
    w = integrate_sl(pr, lam, 1.0, sv(a - 0.2 * b, 0.3 * a + b, 1.0), 3.0)
    scale = abs(a) * abs(u.y) + abs(b) * abs(v.y)
    # tiny combinations are only resolved to the integrator's absolute tolerance
    assert abs(w.y - (a * u.y + b * v.y)) <= 1e-8 * scale + 10 * 1e-12
