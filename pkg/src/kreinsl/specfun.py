"""Series for the entire solutions phi(x, lam) near the singular endpoint.

Every routine broadcasts over ``x`` and ``lam``.  Real ``lam`` keeps the
arithmetic real; complex ``lam`` switches to complex arithmetic.  Terms are
built multiplicatively from their predecessors, never from factorials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .model import (ConstantCoeff, CustomSeries, EntireSolutionSpec, Hydrogen,
                    Laguerre, Legendre, SolutionValue)


class SeriesConvergenceError(RuntimeError):
    def __init__(self, message, tail: "SeriesTail"):
        super().__init__(f"{message} (terms={tail.terms_used}, "
                         f"last term ratio={tail.last_term_ratio:.3g})")
        self.tail = tail


class GammaPoleError(ValueError):
    pass


@dataclass(frozen=True)
class SeriesTail:
    terms_used: int
    last_term_ratio: float
    converged: bool


def pochhammer(c: float, n: int) -> float:
    """Rising factorial ``c (c+1) ... (c+n-1)``; ``(c)_0 = 1``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    out = 1.0
    for k in range(n):
        out *= c + k
    return out


def gamma_fn(x: float) -> float:
    if x <= 0 and float(x).is_integer():
        raise GammaPoleError(f"gamma has a pole at {x}")
    try:
        return math.gamma(x)
    except OverflowError:
        return math.inf


class _Accumulator:
    """Running sums with the two-consecutive-small-terms stopping rule."""

    def __init__(self, first_terms, tol, max_terms):
        self.sums = [np.array(t, copy=True) for t in first_terms]
        self.tol = tol
        self.max_terms = max_terms
        self.small = np.zeros(self.sums[0].shape, dtype=int)
        self.ratio = np.zeros(self.sums[0].shape)
        self.n = 1

    def add(self, terms) -> bool:
        """Add one term per sum; return True once every element has converged."""
        self.n += 1
        small = np.ones(self.small.shape, dtype=bool)
        ratio = np.zeros(self.small.shape)
        for s, t in zip(self.sums, terms):
            s += t
            at = np.abs(t)
            asum = np.abs(s)
            small &= at <= self.tol * asum
            with np.errstate(divide="ignore", invalid="ignore"):
                rr = np.where(at == 0, 0.0, at / asum)
            ratio = np.maximum(ratio, rr)
        self.small = np.where(small, self.small + 1, 0)
        self.ratio = ratio
        return bool(np.all(self.small >= 2))

    def tail(self, converged=True) -> SeriesTail:
        return SeriesTail(self.n, float(np.max(self.ratio, initial=0.0)), converged)

    def fail(self, what):
        raise SeriesConvergenceError(f"{what} series did not converge within "
                                     f"{self.max_terms} terms", self.tail(False))


def _dtype(*args):
    return np.result_type(float, *[np.asarray(a).dtype for a in args])


def hyp2f1_series(a, b, c, t, series_tol=1e-14, max_terms=10000):
    """Gauss series ``sum (a)_n (b)_n / ((c)_n n!) t^n``."""
    t = np.asarray(t)
    dt = _dtype(a, b, c, t)
    term = np.ones(t.shape, dtype=dt)
    acc = _Accumulator([term], series_tol, max_terms)
    for n in range(1, max_terms):
        cn = c + n - 1
        if np.any(cn == 0):
            if np.all(term == 0):
                break
            raise ValueError("c is a non-positive integer and the series does not terminate")
        term = term * (a + n - 1) * (b + n - 1) / (cn * n) * t
        if acc.add([term]):
            break
    else:
        acc.fail("hypergeometric")
    return acc.sums[0], acc.tail()


def conf_hyp_m(lam, beta, x, series_tol=1e-14, max_terms=10000):
    """Kummer series ``M(lam, beta, x) = sum (lam)_n / ((beta)_n n!) x^n``."""
    if beta <= 0 and float(beta).is_integer():
        raise ValueError(f"beta must not be a non-positive integer (got {beta})")
    lam, x = np.broadcast_arrays(np.asarray(lam), np.asarray(x))
    term = np.ones(lam.shape, dtype=_dtype(lam, x))
    acc = _Accumulator([term], series_tol, max_terms)
    for n in range(1, max_terms):
        term = term * (lam + n - 1) / ((beta + n - 1) * n) * x
        if acc.add([term]):
            break
    else:
        acc.fail("confluent hypergeometric")
    return acc.sums[0], acc.tail()


# --------------------------------------------------------------------------
# entire solutions of the three operators


def hydrogen_phi(x, lam, a_coul, nu, series_tol=1e-14, max_terms=10000, with_tail=False):
    """Frobenius solution ``x^(nu+1/2) [1 + sum c_n(lam) x^n]`` and its derivative."""
    x, lam = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(lam))
    if np.any(x <= 0):
        raise ValueError("hydrogen series needs x > 0")
    dt = _dtype(lam)
    t_prev2 = np.zeros(x.shape, dtype=dt)
    t_prev = np.ones(x.shape, dtype=dt)
    acc = _Accumulator([t_prev, (nu + 0.5) * t_prev], series_tol, max_terms)
    for n in range(1, max_terms):
        t_n = -(a_coul * x * t_prev + lam * x * x * t_prev2) / (n * (n + 2 * nu))
        done = acc.add([t_n, (n + nu + 0.5) * t_n])
        t_prev2, t_prev = t_prev, t_n
        if done:
            break
    else:
        acc.fail("hydrogen")
    s, d = acc.sums
    y = x ** (nu + 0.5) * s
    dy = x ** (nu - 0.5) * d
    sv = SolutionValue(y, dy, x, lam)
    return (sv, acc.tail()) if with_tail else sv


def hydrogen_coefficient_polys(n_max, a_coul, nu):
    """Coefficients ``c_0 .. c_n_max`` as polynomials in ``lam``."""
    polys = [Polynomial([1.0])]
    prev2 = Polynomial([0.0])
    lam = Polynomial([0.0, 1.0])
    for n in range(1, n_max + 1):
        cn = -(a_coul * polys[-1] + lam * prev2) / (n * (n + 2 * nu))
        prev2 = polys[-1]
        polys.append(cn.trim())
    return polys


def legendre_phi(x, lam, m, series_tol=1e-14, max_terms=10000, with_tail=False):
    """``(1-x^2)^(m/2) F(m+1/2-sqrt(lam), m+1/2+sqrt(lam), m+1; (1+x)/2)``.

    The hypergeometric factor is summed through the product form, which is a
    polynomial in ``lam`` and needs no square root.
    """
    x, lam = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(lam))
    if np.any(x <= -1) or np.any(x >= 1):
        raise ValueError("Legendre series needs -1 < x < 1")
    t = 0.5 * (1.0 + x)
    term = np.ones(x.shape, dtype=_dtype(lam))
    acc = _Accumulator([term, np.zeros_like(term)], series_tol, max_terms)
    for j in range(1, max_terms):
        term = term * ((m + j - 0.5) ** 2 - lam) / (j * (m + j)) * t
        if acc.add([term, j * term]):
            break
    else:
        acc.fail("Legendre")
    s, js = acc.sums
    one_m = 1.0 - x
    w = (one_m * (1.0 + x)) ** (0.5 * m)
    y = w * s
    qd = w * (-m * x * s + one_m * js)
    sv = SolutionValue(y, qd, x, lam)
    return (sv, acc.tail()) if with_tail else sv


def laguerre_phi(x, lam, alpha, series_tol=1e-14, max_terms=10000, with_tail=False):
    """``M(lam, 1+alpha, x)`` with quasi-derivative ``x^(1+alpha) e^(-x) M'``."""
    x, lam = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(lam))
    if np.any(x <= 0):
        raise ValueError("Laguerre series needs x > 0")
    beta = 1.0 + alpha
    term = np.ones(x.shape, dtype=_dtype(lam))
    acc = _Accumulator([term, np.zeros_like(term)], series_tol, max_terms)
    for n in range(1, max_terms):
        term = term * (lam + n - 1) / ((beta + n - 1) * n) * x
        if acc.add([term, n * term]):
            break
    else:
        acc.fail("Laguerre")
    s, ns = acc.sums
    qd = x**alpha * np.exp(-x) * ns
    sv = SolutionValue(s, qd, x, lam)
    return (sv, acc.tail()) if with_tail else sv


def constant_phi(x, lam):
    """``sin(sqrt(lam) x)/sqrt(lam)`` and its derivative, entire in ``lam``."""
    x, lam = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(lam))
    if np.iscomplexobj(lam):
        kx = np.sqrt(lam) * x
        small = np.abs(kx) < 1e-3
        safe = np.where(small, 1.0, kx)
        # sin(z)/z near zero by its Taylor polynomial
        z2 = kx * kx
        sinc = np.where(small, 1 - z2 / 6 + z2 * z2 / 120, np.sin(safe) / safe)
        return SolutionValue(x * sinc, np.cos(kx), x, lam)
    lam = lam.astype(float)
    k = np.sqrt(np.abs(lam))
    kx = k * x
    ks = np.where(k == 0, 1.0, k)
    y = np.where(lam > 0, np.sin(kx) / ks, np.where(lam < 0, np.sinh(kx) / ks, x))
    dy = np.where(lam > 0, np.cos(kx), np.where(lam < 0, np.cosh(kx), 1.0))
    return SolutionValue(y, dy, x, lam)


def custom_phi(x, lam, fam: CustomSeries, series_tol=1e-14, max_terms=10000, with_tail=False):
    x, lam = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(lam))
    u = x - fam.a
    if np.any(u <= 0):
        raise ValueError("custom series needs x > a")
    coeffs = [np.ones(lam.shape, dtype=_dtype(lam))]
    power = np.ones_like(u)
    acc = _Accumulator([coeffs[0] * power, fam.rho * coeffs[0] * power], series_tol, max_terms)
    for n in range(1, max_terms):
        cn = np.asarray(fam.recurrence(n, lam, coeffs))
        coeffs.append(cn)
        power = power * u
        t = cn * power
        if acc.add([t, (n + fam.rho) * t]):
            break
    else:
        acc.fail("custom")
    s, d = acc.sums
    y = u**fam.rho * s
    qd = fam.p(x) * u ** (fam.rho - 1) * d
    sv = SolutionValue(y, qd, x, lam)
    return (sv, acc.tail()) if with_tail else sv


def series_phi(spec: EntireSolutionSpec, x, lam) -> SolutionValue:
    """Dispatch to the series of ``spec.family``."""
    fam = spec.family
    kw = dict(series_tol=spec.series_tol, max_terms=spec.max_terms)
    if isinstance(fam, Hydrogen):
        return hydrogen_phi(x, lam, fam.a_coul, fam.nu, **kw)
    if isinstance(fam, Legendre):
        return legendre_phi(x, lam, fam.m, **kw)
    if isinstance(fam, Laguerre):
        return laguerre_phi(x, lam, fam.alpha, **kw)
    if isinstance(fam, ConstantCoeff):
        return constant_phi(x, lam)
    if isinstance(fam, CustomSeries):
        return custom_phi(x, lam, fam, **kw)
    raise TypeError(f"unsupported family {type(fam).__name__}")


# largest series argument kept before cancellation costs more than ~e^3
_SERIES_REACH = 3.0


def series_reach(spec: EntireSolutionSpec, a: float, b: float, lam_abs: float) -> float:
    """Largest x at which the family series is summed before ODE continuation.

    An explicit ``spec.x_switch`` wins.  Otherwise the point is capped by the
    family's default and shrunk as |lam| grows, so that the largest series
    term stays within a factor ~e^3 of the sum.
    """
    if spec.x_switch is not None:
        return float(spec.x_switch)
    fam = spec.family
    lam_abs = float(lam_abs)
    z2 = _SERIES_REACH**2
    if isinstance(fam, Hydrogen):
        cap = 1.0 if math.isinf(b) else min(1.0, 0.5 * (a + b))
        bound = _SERIES_REACH / math.sqrt(lam_abs) if lam_abs > 0 else math.inf
        if fam.a_coul != 0:
            bound = min(bound, z2 / (4 * abs(fam.a_coul)))
        return min(cap, bound)
    if isinstance(fam, Legendre):
        t_cap = 0.5 if b >= 1.0 else min(0.5, 0.25 * (1.0 + b))
        t = min(t_cap, z2 / lam_abs) if lam_abs > 0 else t_cap
        return -1.0 + 2.0 * t
    if isinstance(fam, Laguerre):
        cap = 2.0 if math.isinf(b) else min(2.0, 0.5 * b)
        return min(cap, z2 / lam_abs) if lam_abs > 0 else cap
    if isinstance(fam, ConstantCoeff):
        return b
    if isinstance(fam, CustomSeries):
        cap = a + 1.0 if math.isinf(b) else 0.5 * (a + b)
        return cap
    raise TypeError(f"unsupported family {type(fam).__name__}")
