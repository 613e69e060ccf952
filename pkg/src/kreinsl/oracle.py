"""Dense finite-difference eigensolver for truncated problems.

Independent of the series/shooting machinery; used as ground truth in tests.
The equation ``-(p u')' + q u = mu r u`` is discretized by a conservative
three-point scheme in a stretched variable ``s`` (``x = X(s)``), which turns
into ``-(P u_s)_s + Q u = mu R u`` with ``P = p/X'``, ``Q = q X'``, ``R = r X'``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import expit, logit

from .model import SLProblem


class RefinementAdvisory(UserWarning):
    """The mesh is too coarse near a singular coefficient."""


@dataclass(frozen=True)
class DiscretizedProblem:
    """Symmetric tridiagonal stiffness ``K`` and diagonal mass ``M`` on the unknown nodes."""

    x: np.ndarray
    diag: np.ndarray
    offdiag: np.ndarray
    mass: np.ndarray
    h: float
    sign: int
    c: float
    theta: float
    epsilon: float
    mapping: str

    def matrices(self):
        """Dense ``(K, M)``, for small meshes and tests."""
        K = np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        return K, np.diag(self.mass)


def _mapping(problem: SLProblem, c: float, eps: float):
    """``(kind, X, dX, s_lo, s_hi)`` for the stretched variable."""
    a, b = problem.a, problem.b
    left_sing = problem.left_kind != "regular"
    right_sing = problem.right_kind != "regular" and math.isfinite(b)
    x_lo = a + eps
    if left_sing and right_sing:
        L = b - a

        def X(s):
            return a + L * expit(s)

        def dX(s):
            e = expit(s)
            return L * e * (1.0 - e)

        return "logistic", X, dX, logit(eps / L), logit((c - a) / L)
    if left_sing:
        L = min(1.0, c - a)

        def X(s):
            return a + L * np.logaddexp(0.0, s)

        def dX(s):
            return L * expit(s)

        def inv(t):
            return math.log(math.expm1(t)) if t < 30 else t + math.log1p(-math.exp(-t))

        return "softplus", X, dX, inv(eps / L), inv((c - a) / L)

    def X(s):
        return np.asarray(s, dtype=float)

    def dX(s):
        return np.ones_like(np.asarray(s, dtype=float))

    return "uniform", X, dX, x_lo, c


def discretize(problem: SLProblem, c: float, theta: float, epsilon: float = 1e-8,
               n_nodes: int = 2000) -> DiscretizedProblem:
    """Second-order scheme on ``[a + epsilon, c]`` with ``u(a + epsilon) = 0``.

    At ``c`` a half cell carries ``cos(theta) u + sin(theta) u' = 0``; ``theta = 0``
    is a plain Dirichlet node.  ``epsilon`` is ignored when ``a`` is regular.
    """
    if n_nodes < 50:
        raise ValueError(f"n_nodes must be at least 50 (got {n_nodes})")
    if not 0.0 <= theta < math.pi:
        raise ValueError(f"theta must lie in [0, pi) (got {theta})")
    if not problem.a < c <= problem.b or not math.isfinite(c):
        raise ValueError(f"c must lie in (a, b] (got {c})")
    if c == problem.b and problem.right_kind != "regular":
        raise ValueError("c may equal b only at a regular endpoint")
    eps = 0.0 if problem.left_kind == "regular" else float(epsilon)
    if problem.left_kind != "regular" and not eps > 0:
        raise ValueError("epsilon must be positive at a singular endpoint")

    kind, X, dX, s_lo, s_hi = _mapping(problem, c, eps)
    h = (s_hi - s_lo) / n_nodes
    s = s_lo + h * np.arange(n_nodes + 1)
    s_mid = s_lo + h * (np.arange(n_nodes) + 0.5)
    x = X(s)
    x[0], x[-1] = problem.a + eps, c
    P = problem.p(X(s_mid)) / dX(s_mid)
    jac = dX(s)
    with np.errstate(all="ignore"):
        Q = np.asarray(problem.q(x[1:]) * jac[1:], dtype=float)
        R = np.asarray(problem.r(x[1:]) * jac[1:], dtype=float)
    Q = np.broadcast_to(Q, x[1:].shape).copy()
    R = np.broadcast_to(R, x[1:].shape).copy()

    if abs(Q[0]) * h * h / P[0] > 1.0:
        warnings.warn("mesh too coarse for the singular potential at the first node; "
                      "increase n_nodes", RefinementAdvisory)

    # unknowns at nodes 1..N
    diag = (P + np.append(P[1:], 0.0)) / h + Q * h
    mass = R * h
    off = -P[1:] / h
    if theta == 0.0:
        diag, mass, off, xs = diag[:-1], mass[:-1], off[:-1], x[1:-1]
    else:
        diag[-1] = P[-1] / h + 0.5 * Q[-1] * h + float(problem.p(c)) / math.tan(theta)
        mass[-1] = 0.5 * R[-1] * h
        xs = x[1:]
    return DiscretizedProblem(xs, diag, off, mass, h, problem.sign, float(c), float(theta),
                              eps, kind)


def oracle_eigs(dp: DiscretizedProblem, k: int):
    """The ``k`` lowest modes of ``K u = mu M u``; returns ``(lam, vecs)`` with ``lam = sign * mu``.

    Eigenvalues come back ascending in ``lam``; the columns of ``vecs`` are
    orthonormal for the discrete weight ``M``.
    """
    n = len(dp.diag)
    if not 1 <= k <= max(1, n // 4):
        raise ValueError(f"k must lie in [1, n_nodes/4] (got {k}, n={n})")
    w = 1.0 / np.sqrt(dp.mass)
    d = dp.diag * w * w
    e = dp.offdiag * w[:-1] * w[1:]
    mu, v = eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1), tol=1e-300)
    vecs = v * w[:, None]
    lam = dp.sign * mu
    order = np.argsort(lam)
    return lam[order], vecs[:, order]


def richardson(coarse, fine, order: int = 2):
    """Extrapolate values on meshes ``h`` and ``h/2`` for an ``O(h^order)`` error."""
    f = 2.0**order
    return (f * np.asarray(fine) - np.asarray(coarse)) / (f - 1.0)


def oracle_eigenvalues(problem: SLProblem, c: float, theta: float, k: int,
                       n_nodes: int = 2000, epsilon: float = 1e-8,
                       extrapolate: bool = True) -> np.ndarray:
    """The ``k`` lowest oracle eigenvalues, Richardson-extrapolated from ``n`` and ``2n`` cells."""
    lam_h, _ = oracle_eigs(discretize(problem, c, theta, epsilon, n_nodes), k)
    if not extrapolate:
        return lam_h
    lam_h2, _ = oracle_eigs(discretize(problem, c, theta, epsilon, 2 * n_nodes), k)
    return richardson(lam_h, lam_h2)
