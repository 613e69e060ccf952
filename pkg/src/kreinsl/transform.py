"""The transform Phi(f; lam) = int phi(x, lam) f(x) r(x) dx and the truncated resolvent."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .model import (Bump, CompactFunction, DomainError, EntireSolutionSpec,
                    SLProblem, apply_tau)
from .odeint import DEFAULT_CONFIG, ShootingConfig, phi_eval, phi_to_c, psi_c_theta
from .quadrature import QuadratureRule, gauss_nodes

__all__ = [
    "QuadratureRule", "NearEigenvalueError", "SolvabilityResult", "default_rule",
    "directing_functional", "l2_norm", "tau_of", "check_shift_property",
    "apply_resolvent", "resolvent_residual", "solvability_test",
    "non_range_function",
]


class NearEigenvalueError(ArithmeticError):
    pass


def default_rule(f: CompactFunction, problem: Optional[SLProblem] = None,
                 points_per_panel: int = 16) -> QuadratureRule:
    """Panels on the node intervals of ``f``; graded when the support reaches a singular ``a``."""
    bp = np.union1d(f.nodes, f.support)
    graded = (problem is not None and bp[0] <= problem.a
              and problem.left_kind != "regular")
    return QuadratureRule(tuple(bp), points_per_panel, graded)


def _nodes(problem, f, rule):
    f.check_domain(problem)
    rule = rule or default_rule(f, problem)
    x, w = rule.nodes_weights()
    # keep every node of the rule inside (a, b): phi is then sampled on the same
    # points for every f sharing the rule, which makes Phi exactly linear
    keep = (x > problem.a) & (x < problem.b)
    x, w = x[keep], w[keep]
    return x, w * f(x) * problem.r(x)


def directing_functional(problem: SLProblem, spec: EntireSolutionSpec, f: CompactFunction,
                         lam, rule: Optional[QuadratureRule] = None,
                         cfg: ShootingConfig = DEFAULT_CONFIG):
    """``Phi(f; lam)`` by composite Gauss-Legendre quadrature over ``supp f``.

    ``lam`` may be an array; the result then has the same shape.
    """
    x, wfr = _nodes(problem, f, rule)
    lam_arr = np.asarray(lam)
    if not np.any(wfr):
        return np.zeros(lam_arr.shape, dtype=np.result_type(lam_arr, float))[()]
    phi = phi_eval(problem, spec, lam_arr.ravel(), x, cfg).y
    return (wfr @ phi.reshape(len(x), -1)).reshape(lam_arr.shape)[()]


def l2_norm(problem: SLProblem, f: CompactFunction, rule: Optional[QuadratureRule] = None) -> float:
    """``(int |f|^2 r dx)^(1/2)``."""
    f.check_domain(problem)
    rule = rule or default_rule(f, problem)
    x, w = rule.nodes_weights()
    return float(math.sqrt(np.sum(w * f(x) ** 2 * problem.r(x))))


def tau_of(problem: SLProblem, g: Union[Bump, CompactFunction]) -> CompactFunction:
    """``tau g``: analytic for a bump, fourth-order differences on the sample grid otherwise."""
    if isinstance(g, Bump):
        return apply_tau(problem, g, 0.0)
    nodes, vals = g.nodes, g.values
    h = np.diff(nodes)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("finite-difference tau needs uniformly spaced nodes")
    h = h[0]
    scale = np.max(np.abs(vals), initial=0.0)
    if scale > 0 and (max(abs(vals[0]), abs(vals[1]), abs(vals[-1]), abs(vals[-2]))
                      > 1e-8 * scale):
        raise ValueError("g must vanish with its derivative at both support ends")
    d4 = np.diff(vals, 4)
    if scale > 0 and np.max(np.abs(d4)) > 0.5 * scale:
        raise ValueError("samples of g are too rough for a twice-differentiable function")
    pad = np.concatenate([[0.0, 0.0], vals, [0.0, 0.0]])
    g1 = (pad[:-4] - 8 * pad[1:-3] + 8 * pad[3:-1] - pad[4:]) / (12 * h)
    g2 = (-pad[:-4] + 16 * pad[1:-3] - 30 * pad[2:-2] + 16 * pad[3:-1] - pad[4:]) / (12 * h * h)
    x = nodes
    if x[0] <= problem.a or x[-1] >= problem.b:
        raise DomainError("g must be supported strictly inside (a, b)")
    tg = problem.sign * (-problem.p(x) * g2 - problem.dp_eval(x) * g1 + problem.q(x) * vals) / problem.r(x)
    return CompactFunction(nodes, tg, g.support, g.interpolation_order)


def check_shift_property(problem: SLProblem, spec: EntireSolutionSpec,
                         g: Union[Bump, CompactFunction], lam,
                         rule: Optional[QuadratureRule] = None,
                         cfg: ShootingConfig = DEFAULT_CONFIG) -> float:
    """``|Phi(tau g; lam) - lam Phi(g; lam)| / (1 + |lam Phi(g; lam)|)``."""
    tg = tau_of(problem, g)
    gf = g.as_function() if isinstance(g, Bump) else g
    rule = rule or default_rule(gf, problem)
    lam_arr = np.atleast_1d(np.asarray(lam))
    phi_tg = directing_functional(problem, spec, tg, lam_arr, rule, cfg)
    phi_g = directing_functional(problem, spec, gf, lam_arr, rule, cfg)
    res = np.abs(phi_tg - lam_arr * phi_g) / (1.0 + np.abs(lam_arr * phi_g))
    return float(res[0]) if np.ndim(lam) == 0 else res


# --------------------------------------------------------------------------
# truncated resolvent


def _w_at_c(problem, spec, c, theta, lam, cfg):
    yc, vc = phi_to_c(problem, spec, np.asarray(lam), c, cfg)
    pc = float(problem.p(c))
    w = -pc * math.cos(theta) * yc - math.sin(theta) * vc
    return w, abs(pc * yc) + abs(vc)


def _resolvent(problem, spec, c, theta, lam, f, x, rule, cfg, general=False,
               eig_tol=1e-10):
    """Values and quasi-derivatives of ``(H - lam)^(-1) f`` at points ``x``."""
    f.check_domain(problem)
    lo, hi = f.support
    if not hi < c:
        raise DomainError(f"supp f must end before c (s_hi={hi}, c={c})")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= problem.a) or np.any(x > c):
        raise DomainError(f"resolvent points must lie in (a, c]; got {x}")
    w, w_scale = _w_at_c(problem, spec, c, theta, lam, cfg)
    if abs(w) <= eig_tol * w_scale:
        raise NearEigenvalueError(f"lam={lam} is within the root tolerance of an eigenvalue "
                                  f"(|w|={abs(w):.3g})")
    rule = rule or default_rule(f, problem)
    bp = rule.breakpoints()
    n = rule.points_per_panel
    nodes, weights = gauss_nodes(bp, n)
    fr = f(nodes) * problem.r(nodes) * weights

    # partial panels [panel_lo, x] for points inside the support
    panel = np.clip(np.searchsorted(bp, x, side="right") - 1, 0, len(bp) - 2)
    inside = (x > bp[0]) & (x < bp[-1])
    pts = x[inside]
    p_lo = bp[panel[inside]]
    pn, pw = gauss_nodes(np.array([0.0, 1.0]), n)
    part_x = p_lo[:, None] + (pts - p_lo)[:, None] * pn[None, :]
    part_w = (pts - p_lo)[:, None] * pw[None, :]

    everything = np.concatenate([nodes, part_x.ravel(), x])
    phi = phi_eval(problem, spec, lam, everything, cfg)
    psi = psi_c_theta(problem, c, theta, lam, everything, cfg)
    nn, npart = len(nodes), part_x.size
    phi_n, psi_n = phi.y[:nn], psi.y[:nn]
    phi_p = phi.y[nn:nn + npart].reshape(part_x.shape)
    psi_p = psi.y[nn:nn + npart].reshape(part_x.shape)
    phi_x, dphi_x = phi.y[nn + npart:], phi.quasi_d[nn + npart:]
    psi_x, dpsi_x = psi.y[nn + npart:], psi.quasi_d[nn + npart:]

    cum_phi = np.concatenate([[0.0], np.cumsum((phi_n * fr).reshape(-1, n).sum(axis=1))])
    cum_psi = np.concatenate([[0.0], np.cumsum((psi_n * fr).reshape(-1, n).sum(axis=1))])
    below = np.where(x >= bp[-1], len(bp) - 1, np.where(x <= bp[0], 0, panel))
    int_phi = cum_phi[below].copy()
    int_psi = cum_psi[below].copy()
    if np.any(inside):
        fpr = f(part_x) * problem.r(part_x) * part_w
        int_phi[inside] = int_phi[inside] + np.sum(phi_p * fpr, axis=1)
        int_psi[inside] = int_psi[inside] + np.sum(psi_p * fpr, axis=1)
    tail_psi = cum_psi[-1] - int_psi
    k = -problem.sign / w
    g = k * (psi_x * int_phi + phi_x * tail_psi)
    dg = k * (dpsi_x * int_phi + dphi_x * tail_psi)
    if not general:
        beyond = x >= hi
        total = cum_phi[-1]
        g = np.where(beyond, k * psi_x * total, g)
        dg = np.where(beyond, k * dpsi_x * total, dg)
    return g, dg


def apply_resolvent(problem: SLProblem, spec: EntireSolutionSpec, c: float, theta: float,
                    lam, f: CompactFunction, x, rule: Optional[QuadratureRule] = None,
                    cfg: ShootingConfig = DEFAULT_CONFIG, general: bool = False,
                    with_quasi: bool = False):
    """``((H^theta_(a,c) - lam)^(-1) f)(x)`` by the Green's function of phi and psi.

    Beyond ``max supp f`` the value reduces to ``-sign psi(x) Phi(f; lam) / w(lam)``;
    ``general=True`` forces the two-integral form everywhere.
    """
    g, dg = _resolvent(problem, spec, c, theta, lam, f, x, rule, cfg, general)
    if np.ndim(x) == 0:
        g, dg = g[0], dg[0]
    return (g, dg) if with_quasi else g


def resolvent_residual(problem: SLProblem, spec: EntireSolutionSpec, c, theta, lam,
                       f: CompactFunction, x, h=None, rule=None,
                       cfg: ShootingConfig = DEFAULT_CONFIG):
    """``tau g - lam g - f`` at ``x`` for ``g`` the resolvent output.

    ``(p g')'`` is taken by fourth-order central differences of the returned
    quasi-derivative; the default step is ``1e-4`` of the support length.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if h is None:
        h = 1e-4 * (f.support[1] - f.support[0])
    offs = np.array([-2, -1, 1, 2]) * h
    pts = np.concatenate([x, (x[:, None] + offs[None, :]).ravel()])
    g, dg = _resolvent(problem, spec, c, theta, lam, f, pts, rule, cfg)
    g0 = g[:len(x)]
    d = dg[len(x):].reshape(len(x), 4)
    ddg = (d[:, 0] - 8 * d[:, 1] + 8 * d[:, 2] - d[:, 3]) / (12 * h)
    tau_g = problem.sign * (-ddg + problem.q(x) * g0) / problem.r(x)
    return tau_g - lam * g0 - f(x)


# --------------------------------------------------------------------------
# solvability of (A0 - lam0) g = f


@dataclass(frozen=True)
class SolvabilityResult:
    solvable: bool
    phi_value: complex
    threshold: float
    witness: Optional[CompactFunction] = None
    c: Optional[float] = None
    theta: Optional[float] = None
    tail_residual: Optional[float] = None


def _default_c(problem, f):
    hi = f.support[1]
    if math.isinf(problem.b):
        return hi + max(1.0, 0.25 * (hi - problem.a))
    return 0.5 * (hi + problem.b)


def solvability_test(problem: SLProblem, spec: EntireSolutionSpec, f: CompactFunction,
                     lam0: float, tol: Optional[float] = None, c: Optional[float] = None,
                     rule: Optional[QuadratureRule] = None,
                     cfg: ShootingConfig = DEFAULT_CONFIG,
                     thetas=(math.pi / 2, 0.0, math.pi / 4)) -> SolvabilityResult:
    """Decide whether ``tau g - lam0 g = f`` has a compactly supported solution.

    Solvable iff ``|Phi(f; lam0)|`` is below ``tol`` (default
    ``1e-8 * ||f|| * ||phi(., lam0)||`` over ``supp f``).  A solvable case
    carries the resolvent witness, which is set to zero from ``c`` on.
    """
    lam0 = float(lam0)
    rule = rule or default_rule(f, problem)
    value = complex(directing_functional(problem, spec, f, lam0, rule, cfg))
    fnorm = l2_norm(problem, f, rule)
    if tol is None:
        x, w = rule.nodes_weights()
        keep = (x >= f.support[0]) & (x < f.support[1])
        phi = phi_eval(problem, spec, lam0, x[keep], cfg).y
        phinorm = math.sqrt(float(np.sum(w[keep] * phi**2 * problem.r(x[keep]))))
        tol = 1e-8 * fnorm * phinorm
    if fnorm == 0.0:
        zero = CompactFunction(f.nodes, np.zeros_like(f.values), f.support,
                               exact=lambda x: np.zeros_like(np.asarray(x, float)))
        return SolvabilityResult(True, 0j, tol, zero, None, None, 0.0)
    if abs(value) > tol:
        return SolvabilityResult(False, value, tol)

    c = _default_c(problem, f) if c is None else c
    for theta in thetas:
        w, scale = _w_at_c(problem, spec, c, theta, lam0, cfg)
        if abs(w) > 1e-4 * scale:
            break
    else:
        raise RuntimeError(f"lam0={lam0} is an eigenvalue for every tried theta; "
                           "eigenvalues should move strictly with theta")

    a = problem.a

    def witness_values(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        ok = (x > a) & (x < c)
        if np.any(ok):
            out[ok] = np.real(_resolvent(problem, spec, c, theta, lam0, f, x[ok], rule, cfg)[0])
        return out

    lo, hi = f.support
    nodes = np.union1d(f.nodes, np.linspace(hi, c, 6)[:-1])
    nodes = nodes[nodes > a]
    vals = witness_values(nodes)
    inner = np.linspace(lo, hi, 41)[1:-1]
    outer = np.linspace(hi, c, 12)[1:-1]
    g_in = np.max(np.abs(witness_values(inner[inner > a])), initial=0.0)
    g_out = np.max(np.abs(witness_values(outer)), initial=0.0)
    tail = g_out / g_in if g_in > 0 else g_out
    support = (max(a, min(nodes[0], lo)), c)
    witness = CompactFunction(nodes, vals, support, 3, witness_values)
    return SolvabilityResult(True, value, tol, witness, c, theta, tail)


def non_range_function(problem: SLProblem, spec: EntireSolutionSpec, bump: Bump, lam0: float,
                       cfg: ShootingConfig = DEFAULT_CONFIG) -> CompactFunction:
    """``bump * phi(., lam0)`` scaled so that ``Phi(f; lam0) = 1``."""
    lam0 = float(lam0)

    def raw(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        ok = bump(x) != 0
        if np.any(ok):
            out[ok] = bump(x[ok]) * np.real(phi_eval(problem, spec, lam0, x[ok], cfg).y)
        return out

    base = bump.as_function()
    f0 = CompactFunction(base.nodes, raw(base.nodes), bump.support, 3, raw)
    value = float(np.real(directing_functional(problem, spec, f0, lam0, None, cfg)))
    return f0 * (1.0 / value)
