"""Problem definitions, solution families and shared value types.

A Sturm-Liouville problem is carried as three coefficient callbacks
``p, q, r`` on an interval ``(a, b)``.  The differential expression is

    tau u = sign * (-(p u')' + q u) / r

where ``sign`` is ``+1`` for the usual orientation and ``-1`` for the
Laguerre operator, which is written as ``x u'' + (1 + alpha - x) u'``.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

ENDPOINT_KINDS = ("regular", "limit-point", "limit-circle", "unknown")

Coefficient = Callable[[np.ndarray], np.ndarray]


class DomainError(ValueError):
    """Raised when a point lies outside the open interval of a problem."""


# --------------------------------------------------------------------------
# solution families


@dataclass(frozen=True)
class Hydrogen:
    """Coulomb operator -u'' + (-a/x + (nu^2 - 1/4)/x^2) u on (0, b)."""

    a_coul: float = 0.0
    nu: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.a_coul):
            raise ValueError(f"a_coul must be finite (got {self.a_coul})")
        if not self.nu >= 1.0:
            raise ValueError(f"Hydrogen requires nu >= 1 (got nu={self.nu})")


@dataclass(frozen=True)
class Legendre:
    """Associated Legendre operator on (-1, 1), shifted by 1/4."""

    m: float = 1.0

    def __post_init__(self):
        if not self.m >= 1.0:
            raise ValueError(f"Legendre requires m >= 1 (got m={self.m})")


@dataclass(frozen=True)
class Laguerre:
    """Laguerre operator x u'' + (1 + alpha - x) u' on (0, b)."""

    alpha: float = 1.5

    def __post_init__(self):
        al = self.alpha
        if not abs(al) > 1.0:
            raise ValueError(f"Laguerre requires |alpha| > 1 (got alpha={al})")
        if float(al).is_integer():
            raise ValueError(
                f"Laguerre requires alpha not in {{+-2, +-3, ...}} (got alpha={al})")


@dataclass(frozen=True)
class ConstantCoeff:
    """Test family -u'' on (0, b) with phi = sin(sqrt(lam) x)/sqrt(lam)."""


@dataclass(frozen=True)
class CustomSeries:
    """User-supplied Frobenius family.

    ``phi(x) = (x - a)**rho * sum_n c_n(lam) (x - a)**n`` where
    ``recurrence(n, lam, prev)`` returns ``c_n`` given the list
    ``prev = [c_0, ..., c_{n-1}]`` (``c_0 = 1``).  ``lam`` may be an array.
    """

    p: Coefficient
    q: Coefficient
    r: Coefficient
    a: float
    b: float
    rho: float
    recurrence: Callable[[int, np.ndarray, list], np.ndarray]
    left_kind: str = "limit-point"
    right_kind: str = "unknown"
    sign: int = 1
    dp: Optional[Coefficient] = None


Family = Union[Hydrogen, Legendre, Laguerre, ConstantCoeff, CustomSeries]

FAMILY_NAMES = {
    Hydrogen: "hydrogen",
    Legendre: "legendre",
    Laguerre: "laguerre",
    ConstantCoeff: "constant",
    CustomSeries: "custom",
}


@dataclass(frozen=True)
class EntireSolutionSpec:
    """Which entire solution phi(x, lam) to use, and how to sum its series."""

    family: Family
    series_tol: float = 1e-14
    max_terms: int = 10000
    x_switch: Optional[float] = None

    def __post_init__(self):
        if not self.series_tol > 0:
            raise ValueError(f"series_tol must be positive (got {self.series_tol})")
        if self.max_terms < 2:
            raise ValueError(f"max_terms must be >= 2 (got {self.max_terms})")

    @property
    def name(self) -> str:
        return FAMILY_NAMES[type(self.family)]


# --------------------------------------------------------------------------
# the differential problem


@dataclass(frozen=True)
class SLProblem:
    p: Coefficient
    q: Coefficient
    r: Coefficient
    a: float
    b: float
    left_kind: str = "unknown"
    right_kind: str = "unknown"
    sign: int = 1
    dp: Optional[Coefficient] = None
    name: str = "custom"

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b (got a={self.a}, b={self.b})")
        for kind in (self.left_kind, self.right_kind):
            if kind not in ENDPOINT_KINDS:
                raise ValueError(f"unknown endpoint kind {kind!r}")
        if math.isinf(self.b) and self.right_kind == "regular":
            raise ValueError("an infinite endpoint cannot be regular")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x > self.a) & (x < self.b)))

    def dp_eval(self, x):
        """Derivative of p; central differences if no analytic form was given."""
        if self.dp is not None:
            return self.dp(x)
        x = np.asarray(x, dtype=float)
        h = 1e-5 * np.maximum(1.0, np.abs(x))
        return (self.p(x + h) - self.p(x - h)) / (2 * h)


def make_problem(spec: EntireSolutionSpec, b: Optional[float] = None) -> SLProblem:
    """Build the (p, q, r, a, b) data for a solution family.

    ``b`` is the right endpoint; families have a natural default when omitted
    (infinity for hydrogen and Laguerre, 1 for Legendre and the constant family).
    """
    fam = spec.family
    if isinstance(fam, Hydrogen):
        b = math.inf if b is None else float(b)
        if not b > 0:
            raise ValueError(f"hydrogen needs b > 0 (got {b})")
        ac, mu = fam.a_coul, fam.nu**2 - 0.25
        return SLProblem(
            p=_one, q=lambda x: -ac / x + mu / (x * x), r=_one, dp=_zero,
            a=0.0, b=b, left_kind="limit-point",
            right_kind="limit-point" if math.isinf(b) else "regular",
            name="hydrogen")
    if isinstance(fam, Legendre):
        b = 1.0 if b is None else float(b)
        if not -1.0 < b <= 1.0:
            raise ValueError(f"Legendre needs -1 < b <= 1 (got {b})")
        m2 = fam.m**2

        def p(x):
            return (1.0 - x) * (1.0 + x)

        def q(x):
            return 0.25 + m2 / ((1.0 - x) * (1.0 + x))

        return SLProblem(
            p=p, q=q, r=_one, dp=lambda x: -2.0 * x, a=-1.0, b=b,
            left_kind="limit-point",
            right_kind="limit-point" if b == 1.0 else "regular",
            name="legendre")
    if isinstance(fam, Laguerre):
        b = math.inf if b is None else float(b)
        if not b > 0:
            raise ValueError(f"Laguerre needs b > 0 (got {b})")
        al = fam.alpha

        def p(x):
            return x ** (1.0 + al) * np.exp(-x)

        def r(x):
            return x**al * np.exp(-x)

        def dp(x):
            return (1.0 + al - x) * x**al * np.exp(-x)

        return SLProblem(
            p=p, q=_zero, r=r, dp=dp, a=0.0, b=b, sign=-1,
            left_kind="limit-point",
            right_kind="limit-point" if math.isinf(b) else "regular",
            name="laguerre")
    if isinstance(fam, ConstantCoeff):
        b = 1.0 if b is None else float(b)
        if not b > 0:
            raise ValueError(f"constant family needs b > 0 (got {b})")
        return SLProblem(
            p=_one, q=_zero, r=_one, dp=_zero, a=0.0, b=b,
            left_kind="regular",
            right_kind="limit-point" if math.isinf(b) else "regular",
            name="constant")
    if isinstance(fam, CustomSeries):
        return SLProblem(
            p=fam.p, q=fam.q, r=fam.r, dp=fam.dp, a=fam.a,
            b=fam.b if b is None else float(b),
            left_kind=fam.left_kind, right_kind=fam.right_kind, sign=fam.sign,
            name="custom")
    raise TypeError(f"unsupported family {type(fam).__name__}")


def _one(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def evaluate_coeffs(problem: SLProblem, x):
    """Return ``(p(x), q(x), r(x))`` at interior points."""
    xa = np.asarray(x, dtype=float)
    if not problem.contains(xa):
        raise DomainError(
            f"x must lie in the open interval ({problem.a}, {problem.b}); got {x}")
    return problem.p(xa), problem.q(xa), problem.r(xa)


# --------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class SolutionValue:
    """A solution sampled at ``x``: value ``y`` and quasi-derivative ``p y'``.

    ``y`` and ``quasi_d`` broadcast against ``lam`` (and ``x`` when arrays
    of points are requested).
    """

    y: np.ndarray
    quasi_d: np.ndarray
    x: Union[float, np.ndarray]
    lam: Union[complex, np.ndarray]


def wronskian_of(u: SolutionValue, v: SolutionValue):
    """``u.y * v.quasi_d - v.y * u.quasi_d``."""
    return u.y * v.quasi_d - v.y * u.quasi_d


@dataclass(frozen=True)
class StepMeasure:
    """Purely atomic approximation of a spectral measure."""

    lambdas: np.ndarray
    weights: np.ndarray
    norm_sq: Optional[np.ndarray] = None
    wronskian_residual: Optional[np.ndarray] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if lam.shape != w.shape or lam.ndim != 1:
            raise ValueError("lambdas and weights must be 1-d arrays of equal length")
        if np.any(w <= 0):
            raise ValueError("atom weights must be strictly positive")
        if np.any(np.diff(lam) <= 0):
            raise ValueError("atom locations must be strictly increasing")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "weights", w)

    @property
    def atoms(self):
        return list(zip(self.lambdas.tolist(), self.weights.tolist()))

    def __len__(self):
        return len(self.lambdas)

    def cumulative(self, lam_max):
        """sigma((-inf, lam_max]) restricted to the stored atoms."""
        return float(self.weights[self.lambdas <= lam_max].sum())


# --------------------------------------------------------------------------
# compactly supported test functions


@dataclass(frozen=True)
class CompactFunction:
    """Real function on [a, b) vanishing at and beyond ``support[1]``.

    Samples are interpolated with a spline of degree ``interpolation_order``.
    When ``exact`` is given it is used for evaluation and the samples only
    record the function; ``nodes`` always define the quadrature panels.
    """

    nodes: np.ndarray
    values: np.ndarray
    support: tuple
    interpolation_order: int = 3
    exact: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape:
            raise ValueError("nodes and values must be 1-d arrays of equal length")
        if len(nodes) < 2 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing (at least two)")
        lo, hi = map(float, self.support)
        if not lo < hi:
            raise ValueError(f"support must satisfy s_lo < s_hi (got {self.support})")
        if nodes[0] < lo - 1e-12 * max(1.0, abs(lo)) or nodes[-1] > hi + 1e-12 * max(1.0, abs(hi)):
            raise ValueError("nodes must lie inside the support")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "support", (lo, hi))
        if self.exact is None:
            k = min(self.interpolation_order, len(nodes) - 1)
            from scipy.interpolate import make_interp_spline

            object.__setattr__(self, "_spline", make_interp_spline(nodes, values, k=k))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        inside = (x >= lo) & (x < hi)
        if self.exact is not None:
            xs = np.where(inside, x, 0.5 * (lo + hi))
            return np.where(inside, self.exact(xs), 0.0)
        xs = np.clip(x, self.nodes[0], self.nodes[-1])
        inside &= (x >= self.nodes[0]) & (x <= self.nodes[-1])
        return np.where(inside, self._spline(xs), 0.0)

    def check_domain(self, problem: SLProblem):
        lo, hi = self.support
        if lo < problem.a or not hi < problem.b:
            raise DomainError(
                f"support [{lo}, {hi}] must lie in [{problem.a}, {problem.b}) "
                "with s_hi < b")

    def _combine(self, other: "CompactFunction", alpha, beta) -> "CompactFunction":
        nodes = np.union1d(self.nodes, other.nodes)
        support = (min(self.support[0], other.support[0]),
                   max(self.support[1], other.support[1]))
        f, g = self, other

        def exact(x):
            return alpha * f(x) + beta * g(x)

        return CompactFunction(nodes, exact(nodes), support,
                               self.interpolation_order, exact)

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __mul__(self, scalar):
        scalar = float(scalar)
        f = self

        def exact(x):
            return scalar * f(x)

        return CompactFunction(self.nodes, scalar * self.values, self.support,
                               self.interpolation_order, exact)

    __rmul__ = __mul__


def sampled_function(func, support, n_nodes=129, interpolation_order=3) -> CompactFunction:
    """Sample ``func`` on a uniform grid of ``support`` and keep only the samples."""
    nodes = np.linspace(support[0], support[1], n_nodes)
    return CompactFunction(nodes, np.asarray(func(nodes), float), support,
                           interpolation_order)


def zero_function(support) -> CompactFunction:
    nodes = np.linspace(support[0], support[1], 5)
    return CompactFunction(nodes, np.zeros(5), support, exact=lambda x: np.zeros_like(x))


@dataclass(frozen=True)
class Bump:
    """C-infinity bump ``amplitude * exp(-1/(1 - t^2))``, ``t = (x - center)/width``."""

    center: float
    width: float
    amplitude: float = 1.0

    @property
    def support(self):
        return (self.center - self.width, self.center + self.width)

    def derivatives(self, x):
        """Return ``(g, g', g'')`` at ``x`` (zero outside the support)."""
        x = np.asarray(x, dtype=float)
        t = (x - self.center) / self.width
        inside = np.abs(t) < 1.0
        t = np.where(inside, t, 0.0)
        s = 1.0 - t * t
        g = np.where(inside, self.amplitude * np.exp(-1.0 / s), 0.0)
        h1 = -2.0 * t / (s * s)
        h2 = -(2.0 + 6.0 * t * t) / s**3
        g1 = g * h1 / self.width
        g2 = g * (h1 * h1 + h2) / self.width**2
        return g, g1, g2

    def __call__(self, x):
        return self.derivatives(x)[0]

    def as_function(self, n_panels: int = 48) -> CompactFunction:
        nodes = np.linspace(*self.support, n_panels + 1)
        return CompactFunction(nodes, self(nodes), self.support, 3, self.__call__)


def apply_tau(problem: SLProblem, bump: Bump, lam: float = 0.0) -> CompactFunction:
    """``tau g - lam g`` for a bump ``g``, evaluated analytically."""
    p, dp, q, r, s = problem.p, problem.dp_eval, problem.q, problem.r, problem.sign
    lo, hi = bump.support
    if lo <= problem.a or hi >= problem.b:
        raise DomainError("bump must be supported strictly inside (a, b)")

    def exact(x):
        g, g1, g2 = bump.derivatives(x)
        return s * (-p(x) * g2 - dp(x) * g1 + q(x) * g) / r(x) - lam * g

    nodes = bump.as_function().nodes
    return CompactFunction(nodes, exact(nodes), bump.support, 3, exact)


# --------------------------------------------------------------------------
# config round trip

CONFIG_KEYS = ("family", "a_coul", "nu", "m", "alpha", "b",
               "series_tol", "max_terms", "x_switch")


class ConfigError(ValueError):
    pass


def spec_to_config(spec: EntireSolutionSpec, b: Optional[float] = None) -> str:
    fam = spec.family
    if isinstance(fam, CustomSeries):
        raise ConfigError("custom series families cannot be serialized")
    items = {"family": spec.name}
    if isinstance(fam, Hydrogen):
        items.update(a_coul=repr(fam.a_coul), nu=repr(fam.nu))
    elif isinstance(fam, Legendre):
        items["m"] = repr(fam.m)
    elif isinstance(fam, Laguerre):
        items["alpha"] = repr(fam.alpha)
    if b is not None:
        items["b"] = repr(float(b))
    items["series_tol"] = repr(spec.series_tol)
    items["max_terms"] = str(spec.max_terms)
    if spec.x_switch is not None:
        items["x_switch"] = repr(spec.x_switch)
    cp = configparser.ConfigParser()
    cp["problem"] = items
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def spec_from_config(text: str):
    """Parse a ``[problem]`` config; returns ``(spec, b)`` with ``b`` possibly None."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if "problem" not in cp:
        raise ConfigError("missing [problem] section")
    sec = cp["problem"]
    lines = text.splitlines()

    def where(key):
        for i, line in enumerate(lines, 1):
            if line.split("=")[0].strip() == key:
                return f"line {i}"
        return "config"

    unknown = set(sec) - set(CONFIG_KEYS)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"{where(key)}: unknown key {key!r}")

    def num(key, default=None, conv=float):
        if key not in sec:
            return default
        try:
            return conv(sec[key])
        except ValueError:
            raise ConfigError(f"{where(key)}: bad value for {key}: {sec[key]!r}") from None

    name = sec.get("family", "").strip().lower()
    try:
        if name == "hydrogen":
            fam = Hydrogen(num("a_coul", 0.0), num("nu", 1.0))
        elif name == "legendre":
            fam = Legendre(num("m", 1.0))
        elif name == "laguerre":
            fam = Laguerre(num("alpha", 1.5))
        elif name == "constant":
            fam = ConstantCoeff()
        else:
            raise ConfigError(f"{where('family')}: unknown family {name!r}")
        spec = EntireSolutionSpec(
            fam, series_tol=num("series_tol", 1e-14),
            max_terms=num("max_terms", 10000, int),
            x_switch=num("x_switch"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return spec, num("b")


def as_array(x: Union[float, Sequence[float], np.ndarray]) -> np.ndarray:
    return np.atleast_1d(np.asarray(x))
