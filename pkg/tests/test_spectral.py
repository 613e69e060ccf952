import math
import warnings

import numpy as np
import pytest

from conftest import HALF_PI, family
from kreinsl import (Bump, ConstantCoeff, EntireSolutionSpec, Hydrogen, Laguerre, SLProblem,
                     SpectralAdvisory, StepMeasure, classify_endpoint, eigenvalues_truncated,
                     growth_exponent, integrate_sl, make_problem, measure_family, parseval_check,
                     spectral_measure_approx, wronskian, zero_function)
from kreinsl.model import SolutionValue, wronskian_of
from kreinsl.spectral import (measure_from_csv, measure_from_record, measure_to_csv,
                              measure_to_record)

CONST = EntireSolutionSpec(ConstantCoeff())
CONST_PR = make_problem(CONST)


def test_wronskian_constant_family():
    for lam in (2.0, 30.0):
        rep = wronskian(CONST_PR, CONST, 1.0, 0.0, lam, [0.2, 0.5, 0.9])
        k = math.sqrt(lam)
        assert rep.value.real == pytest.approx(-math.sin(k) / k, rel=1e-9)


def test_wronskian_of_sin_cos():
    x = np.linspace(0.1, 0.9, 5)
    s = integrate_sl(CONST_PR, 1.0, 1e-300, SolutionValue(0.0, 1.0, 0.0, 1.0), 0.5)
    u = SolutionValue(np.sin(x), np.cos(x), x, 1.0)
    v = SolutionValue(np.cos(x), -np.sin(x), x, 1.0)
    assert np.allclose(wronskian_of(u, v), -1.0)
    assert s.y == pytest.approx(math.sin(0.5), rel=1e-10)


def test_wronskian_constancy(fam):
    spec, pr, box = fam
    c = box[1]
    probes = np.linspace(box[0], c, 5)
    rep = wronskian(pr, spec, c, 0.6, 2.0 + 1j, probes)
    assert rep.max_deviation <= 1e-9 * abs(rep.value)


def test_dirichlet_sine_spectrum():
    recs = eigenvalues_truncated(CONST_PR, CONST, 1.0, 0.0, (0.5, 100.0))
    lam = [r.lambda_n for r in recs]
    assert lam == pytest.approx([math.pi**2, 4 * math.pi**2, 9 * math.pi**2], abs=1e-8)
    assert all(r.wronskian_residual <= 1e-12 and r.norm_sq > 0 for r in recs)


def test_constant_family_atoms():
    m = spectral_measure_approx(CONST_PR, CONST, 1.0, 0.0, (0.5, 400.0))
    n = np.arange(1, len(m) + 1)
    assert np.allclose(m.lambdas, (n * math.pi) ** 2, rtol=1e-12)
    assert np.allclose(m.weights, 2 * (n * math.pi) ** 2, rtol=1e-9)


def test_laguerre_atoms():
    spec, pr, _ = family("laguerre")
    m = spectral_measure_approx(pr, spec, 40.0, HALF_PI, (-3.5, 0.5))
    assert m.lambdas == pytest.approx([-3, -2, -1, 0], abs=1e-3)
    assert m.weights[-1] == pytest.approx(1 / math.gamma(2.5), rel=1e-2)


def test_legendre_truncation_monotone():
    spec, pr, _ = family("legendre")
    first = []
    for c in (0.99, 0.999, 0.9999, 1 - 1e-6):
        first.append(eigenvalues_truncated(pr, spec, c, HALF_PI, (0.0, 5.0))[0].lambda_n)
    gaps = np.abs(np.array(first) - 2.25)
    assert np.all(np.diff(first) > 0) and np.all(np.diff(gaps) < 0)


def test_theta_monotonicity_standard_families():
    for name, b, c, win in (("hydrogen", 1.0, 1.0, (0, 300)), ("legendre", None, 0.9, (0, 60))):
        spec, pr, _ = family(name)
        pr = make_problem(spec, b)
        l1 = spectral_measure_approx(pr, spec, c, 0.3, win).lambdas[:4]
        l2 = spectral_measure_approx(pr, spec, c, 1.2, win).lambdas[:4]
        assert np.all(l1 > l2)


def test_theta_monotonicity_laguerre_orientation():
    # tau = (p u')'/r: the standard-form parameter is -lam, so lam_n rises with theta
    spec, pr, _ = family("laguerre")
    l1 = spectral_measure_approx(pr, spec, 5.0, 0.3, (-12, 3)).lambdas[::-1][:4]
    l2 = spectral_measure_approx(pr, spec, 5.0, 1.2, (-12, 3)).lambdas[::-1][:4]
    assert np.all(-l1 > -l2)


def test_measure_consistency_under_refinement():
    spec, pr, _ = family("hydrogen")
    pr = make_problem(spec, 1.0)
    a = spectral_measure_approx(pr, spec, 1.0, 0.5, (0, 200), scan_pts=400)
    b = spectral_measure_approx(pr, spec, 1.0, 0.5, (0, 200), scan_pts=800, root_tol=5e-13)
    change = np.abs(a.lambdas - b.lambdas) / np.maximum(np.abs(a.lambdas), 1.0)
    assert np.all(change <= 10 * 1e-12)


def test_hydrogen_growth():
    spec, pr, _ = family("hydrogen")
    pr = make_problem(spec, 1.0)
    m = spectral_measure_approx(pr, spec, 1.0, 0.0, (0, 4000), scan_pts=1500)
    assert growth_exponent(m, 40, 4000) == pytest.approx(2.0, abs=0.1)


def test_parseval_constant_family():
    m = spectral_measure_approx(CONST_PR, CONST, 1.0, 0.0, (0.5, (50.5 * math.pi) ** 2),
                                scan_pts=2000)
    assert len(m) == 50
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SpectralAdvisory)
        rep = parseval_check(CONST_PR, CONST, m, Bump(0.5, 0.3).as_function())
    assert rep.relative_error <= 1e-6


def test_parseval_zero_function():
    m = spectral_measure_approx(CONST_PR, CONST, 1.0, 0.0, (0.5, 100.0))
    rep = parseval_check(CONST_PR, CONST, m, zero_function((0.2, 0.8)))
    assert rep.relative_error == 0.0 and rep.norm_sq == 0.0


def test_parseval_incomplete_window_advisory():
    m = spectral_measure_approx(CONST_PR, CONST, 1.0, 0.0, (0.5, 100.0))
    with pytest.warns(SpectralAdvisory, match="too small"):
        rep = parseval_check(CONST_PR, CONST, m, Bump(0.5, 0.1).as_function())
    assert not rep.complete


def test_parseval_support_must_lie_inside():
    m = spectral_measure_approx(CONST_PR, CONST, 1.0, 0.0, (0.5, 100.0))
    with pytest.raises(ValueError):
        parseval_check(CONST_PR, CONST, m, Bump(0.9, 0.2).as_function())


@pytest.mark.parametrize("name, end", [("legendre", "right"), ("legendre", "left"),
                                       ("hydrogen", "left"), ("laguerre", "right"),
                                       ("laguerre", "left"), ("hydrogen", "right")])
def test_classifier_agrees_with_tags(name, end):
    spec, pr, _ = family(name)
    rep = classify_endpoint(pr, end)
    assert rep.kind == (pr.left_kind if end == "left" else pr.right_kind) == "limit-point"
    assert len(rep.growth) == 2


def test_classifier_regular_ends():
    assert classify_endpoint(CONST_PR, "left").kind == "regular"
    spec, _, _ = family("hydrogen")
    assert classify_endpoint(make_problem(spec, 1.0), "right").kind == "regular"


def test_classifier_limit_circle():
    # alpha = 1/2 Laguerre-type expression: x^-1/2 is square integrable at 0
    pr = SLProblem(lambda x: x**1.5 * np.exp(-x), lambda x: 0 * x,
                   lambda x: x**0.5 * np.exp(-x), 0.0, math.inf, sign=-1)
    assert classify_endpoint(pr, "left").kind == "limit-circle"


def test_measure_family_interlaces():
    spec, _, _ = family("hydrogen")
    pr = make_problem(spec, 1.0)
    fam = measure_family(pr, spec, [0.0, math.pi / 4], (0, 300))
    a, b = fam[0.0].lambdas, fam[math.pi / 4].lambdas
    n = min(len(a), len(b))
    assert np.all(b[:n] < a[:n]) and np.all(a[: n - 1] < b[1:n])
    single = measure_family(pr, spec, [0.3], (0, 300))[0.3]
    direct = spectral_measure_approx(pr, spec, 1.0, 0.3, (0, 300))
    assert np.array_equal(single.lambdas, direct.lambdas)


def test_measure_family_needs_regular_end():
    spec, pr, _ = family("hydrogen")
    with pytest.raises(ValueError):
        measure_family(pr, spec, [0.0], (0, 10))


def test_measure_serialization_round_trip():
    m = spectral_measure_approx(CONST_PR, CONST, 1.0, 0.0, (0.5, 100.0))
    back = measure_from_record(measure_to_record(m))
    assert np.array_equal(back.lambdas, m.lambdas) and np.array_equal(back.weights, m.weights)
    assert back.provenance == m.provenance
    back = measure_from_csv(measure_to_csv(m))
    assert np.array_equal(back.lambdas, m.lambdas)
    assert measure_to_csv(m).splitlines()[0] == "lambda,weight,norm_sq,wronskian_residual"
    with pytest.raises(ValueError):
        measure_from_record('{"format": "kreinsl.step-measure", "version": 99, "atoms": []}')
