"""Shooting for tau u = lam u in first-order form.

With ``v = p u'`` the equation becomes

    u' = v / p,    v' = (q - sign * lam * r) u,

which is integrated by an adaptive Dormand-Prince 8(5,3) pair.  A whole
vector of spectral parameters is carried through one integration with a
common step sequence, which is how eigenvalue scans stay cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

from .model import EntireSolutionSpec, SLProblem, SolutionValue, DomainError
from .quadrature import gauss_nodes, graded_panels, subdivide
from .specfun import series_phi, series_reach

_NST = _dop.N_STAGES
_A = np.asarray(_dop.A[:_NST, :_NST])
_B = np.asarray(_dop.B)
_C = np.asarray(_dop.C[:_NST])
_E3 = np.asarray(_dop.E3)
_E5 = np.asarray(_dop.E5)

_SAFETY, _MIN_FACTOR, _MAX_FACTOR = 0.9, 0.2, 10.0


class IntegrationError(RuntimeError):
    def __init__(self, message, x_reached):
        super().__init__(f"{message} (reached x={x_reached!r})")
        self.x_reached = x_reached


@dataclass(frozen=True)
class ShootingConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_steps: int = 500_000
    min_step: float = 1e-15

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("rel_tol and abs_tol must be positive")
        if self.max_steps < 1 or not self.min_step > 0:
            raise ValueError("max_steps and min_step must be positive")


DEFAULT_CONFIG = ShootingConfig()


def _shoot(problem: SLProblem, lam, x0, y0, v0, x_out, cfg: ShootingConfig,
           accumulate=False):
    """Integrate from ``x0`` through the monotone points ``x_out``.

    ``lam``, ``y0``, ``v0`` are flattened 1-d arrays of equal length.
    Returns ``(Y, V, I)`` with shape ``(len(x_out), len(lam))``; ``I`` holds
    the running integral of ``|y|^2 r`` from ``x0`` (or None).
    """
    x_out = np.asarray(x_out, dtype=float)
    n_l = lam.shape[0]
    dtype = np.result_type(lam, y0, v0, float)
    slam = problem.sign * lam
    p, q, r = problem.p, problem.q, problem.r
    k = 3 if accumulate else 2

    def rhs(x, z):
        px, qx, rx = float(p(x)), float(q(x)), float(r(x))
        y = z[:n_l]
        out = np.empty_like(z)
        out[:n_l] = z[n_l:2 * n_l] / px
        out[n_l:2 * n_l] = (qx - slam * rx) * y
        if accumulate:
            out[2 * n_l:] = (y.real**2 + y.imag**2) * rx if np.iscomplexobj(y) else y * y * rx
        return out

    z = np.zeros(k * n_l, dtype=dtype)
    z[:n_l] = y0
    z[n_l:2 * n_l] = v0

    def scale(x_new, za, zb):
        s = np.empty(za.shape)
        az, bz = np.abs(za), np.abs(zb)
        s[:n_l] = cfg.abs_tol + cfg.rel_tol * np.maximum(az[:n_l], bz[:n_l])
        s[n_l:2 * n_l] = (cfg.abs_tol * float(p(x_new))
                          + cfg.rel_tol * np.maximum(az[n_l:2 * n_l], bz[n_l:2 * n_l]))
        if accumulate:
            # the running integral is judged against its own increment over the step
            s[2 * n_l:] = cfg.rel_tol * (np.maximum(az[2 * n_l:], bz[2 * n_l:])
                                         + np.abs(zb[2 * n_l:] - za[2 * n_l:])) + 1e-300
        return s

    n_out = len(x_out)
    Y = np.empty((n_out, n_l), dtype=dtype)
    V = np.empty((n_out, n_l), dtype=dtype)
    I = np.empty((n_out, n_l)) if accumulate else None

    x = float(x0)
    idx = 0

    def record():
        nonlocal idx
        while idx < n_out and x_out[idx] == x:
            Y[idx] = z[:n_l]
            V[idx] = z[n_l:2 * n_l]
            if accumulate:
                I[idx] = z[2 * n_l:].real
            idx += 1

    record()
    if idx == n_out:
        return Y, V, I

    direction = 1.0 if x_out[-1] > x else -1.0
    if np.any(np.diff(x_out) * direction < 0) or (x_out[idx] - x) * direction < 0:
        raise ValueError("output points must be monotone in the direction of integration")

    f0 = rhs(x, z)
    span = abs(x_out[-1] - x)
    h = _initial_step(rhs, x, z, f0, direction, span, scale, 2 * n_l)
    K = np.empty((_NST + 1, z.shape[0]), dtype=dtype)
    steps = 0
    step_rejected = False
    while idx < n_out:
        if steps >= cfg.max_steps:
            raise IntegrationError("maximum number of steps exceeded", x)
        target = x_out[idx]
        h_abs = abs(h)
        min_step = max(cfg.min_step, 10 * np.spacing(abs(x)))
        if h_abs < min_step:
            raise IntegrationError("step size underflow", x)
        remaining = abs(target - x)
        if h_abs >= remaining:
            h_step = remaining
            hit = True
        else:
            h_step = h_abs
            hit = False
        hs = h_step * direction
        K[0] = f0
        for s in range(1, _NST):
            dz = _A[s, :s] @ K[:s] * hs
            K[s] = rhs(x + _C[s] * hs, z + dz)
        z_new = z + hs * (_B @ K[:_NST])
        x_new = target if hit else x + hs
        f_new = rhs(x_new, z_new)
        K[_NST] = f_new
        sc = scale(x_new, z, z_new)
        e5 = np.max(np.abs(_E5 @ K) / sc)
        e3 = np.max(np.abs(_E3 @ K) / sc)
        denom = math.hypot(e5, 0.1 * e3)
        err = h_step * e5 * e5 / denom if denom > 0 else 0.0
        steps += 1
        if not np.isfinite(err):
            h = 0.1 * h_step * direction
            step_rejected = True
            continue
        if err <= 1.0:
            factor = _MAX_FACTOR if err == 0 else min(_MAX_FACTOR, _SAFETY * err ** (-1 / 8))
            if step_rejected:
                factor = min(1.0, factor)
            x, z, f0 = x_new, z_new, f_new
            # a clipped step does not shrink the proposal for the next one
            h = max(h_abs, h_step * factor) * direction if hit else h_step * factor * direction
            step_rejected = False
            record()
        else:
            h = h_step * max(_MIN_FACTOR, _SAFETY * err ** (-1 / 8)) * direction
            step_rejected = True
    return Y, V, I


def _initial_step(rhs, x, z, f0, direction, span, scale, n_dyn):
    # only the solution components steer the first step; an accumulated integral starts at zero
    sc = scale(x, z, z)[:n_dyn]
    d0 = np.max(np.abs(z[:n_dyn]) / sc)
    d1 = np.max(np.abs(f0[:n_dyn]) / sc)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    z1 = z + h0 * direction * f0
    f1 = rhs(x + h0 * direction, z1)
    d2 = np.max(np.abs(f1[:n_dyn] - f0[:n_dyn]) / sc) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 8)
    return min(100 * h0, h1, span) * direction


# --------------------------------------------------------------------------
# public surface


def _flat_lam(lam):
    lam = np.asarray(lam)
    if not np.iscomplexobj(lam):
        lam = lam.astype(float)
    return lam, lam.shape, lam.ravel()


def integrate_sl(problem: SLProblem, lam, x0, init: SolutionValue, x1,
                 cfg: ShootingConfig = DEFAULT_CONFIG) -> SolutionValue:
    """Carry ``(y, p y')`` from ``x0`` to ``x1`` for every ``lam``."""
    _check_inside(problem, [x0, x1])
    lam, shape, lf = _flat_lam(lam)
    y0 = np.broadcast_to(np.asarray(init.y), shape).ravel()
    v0 = np.broadcast_to(np.asarray(init.quasi_d), shape).ravel()
    Y, V, _ = _shoot(problem, lf, x0, y0, v0, [x1], cfg)
    return SolutionValue(Y[0].reshape(shape), V[0].reshape(shape), float(x1), lam)


def _check_inside(problem: SLProblem, xs, allow_right=False):
    xs = np.asarray(xs, dtype=float)
    hi_ok = xs < problem.b
    if allow_right and problem.right_kind == "regular":
        hi_ok = xs <= problem.b
    if not np.all((xs > problem.a) & hi_ok):
        raise DomainError(f"points must lie inside ({problem.a}, {problem.b}); got {xs}")


def _evaluate_on_points(lam, x, run):
    """Sort ``x``, call ``run(sorted_x, lam_flat)`` and scatter the result back."""
    lam, lshape, lf = _flat_lam(lam)
    x = np.asarray(x, dtype=float)
    xs = x.ravel()
    order = np.argsort(xs, kind="stable")
    Y, V = run(xs[order], lf)
    y = np.empty_like(Y)
    v = np.empty_like(V)
    y[order] = Y
    v[order] = V
    shape = x.shape + lshape
    return SolutionValue(y.reshape(shape)[()], v.reshape(shape)[()], x[()], lam[()])


def psi_c_theta(problem: SLProblem, c, theta, lam, x,
                cfg: ShootingConfig = DEFAULT_CONFIG) -> SolutionValue:
    """Solution with ``psi(c) = sin(theta)``, ``psi'(c) = -cos(theta)``, integrated back to ``x``.

    Output arrays have shape ``x.shape + lam.shape``.
    """
    if not 0.0 <= theta < math.pi:
        raise ValueError(f"theta must lie in [0, pi) (got {theta})")
    _check_inside(problem, [c], allow_right=True)
    if np.any(np.asarray(x) > c):
        raise DomainError("psi is only defined on (a, c]")
    _check_inside(problem, x, allow_right=True)
    y_c, v_c = math.sin(theta), float(problem.p(c)) * -math.cos(theta)

    def run(xs, lf):
        back = xs[::-1]
        Y, V, _ = _shoot(problem, lf, c, np.full(lf.shape, y_c), np.full(lf.shape, v_c),
                         back, cfg)
        return Y[::-1], V[::-1]

    return _evaluate_on_points(lam, x, run)


def switch_point(problem: SLProblem, spec: EntireSolutionSpec, lam_flat) -> float:
    lam_abs = float(np.max(np.abs(lam_flat), initial=0.0))
    xs = series_reach(spec, problem.a, problem.b, lam_abs)
    if spec.x_switch is None and problem.right_kind == "regular":
        xs = min(xs, problem.b)
    return xs


def _phi_sorted(problem, spec, xs, lf, cfg):
    x_sw = switch_point(problem, spec, lf)
    near = xs <= x_sw
    n_l = lf.shape[0]
    dtype = np.result_type(lf, float)
    Y = np.empty((len(xs), n_l), dtype=dtype)
    V = np.empty((len(xs), n_l), dtype=dtype)
    if np.any(near):
        sv = series_phi(spec, xs[near][:, None], lf[None, :])
        Y[near], V[near] = sv.y, sv.quasi_d
    if not np.all(near):
        s0 = series_phi(spec, x_sw, lf)
        Yf, Vf, _ = _shoot(problem, lf, x_sw, s0.y, s0.quasi_d, xs[~near], cfg)
        Y[~near], V[~near] = Yf, Vf
    return Y, V


def phi_eval(problem: SLProblem, spec: EntireSolutionSpec, lam, x,
             cfg: ShootingConfig = DEFAULT_CONFIG) -> SolutionValue:
    """The entire solution phi(x, lam): series up to the switch point, ODE beyond.

    Output arrays have shape ``x.shape + lam.shape``.
    """
    _check_inside(problem, x, allow_right=True)
    return _evaluate_on_points(lam, x, lambda xs, lf: _phi_sorted(problem, spec, xs, lf, cfg))


def phi_to_c(problem: SLProblem, spec: EntireSolutionSpec, lam, c,
             cfg: ShootingConfig = DEFAULT_CONFIG, with_norm=False):
    """``(phi(c), p phi'(c))`` and optionally ``int_a^c |phi|^2 r dx`` for a vector of ``lam``.

    The norm integral is split at the switch point: Gauss panels graded toward
    ``a`` over the series part, an integral carried by the ODE beyond it.
    """
    _check_inside(problem, [c], allow_right=True)
    lam, shape, lf = _flat_lam(lam)
    x_sw = min(switch_point(problem, spec, lf), c)
    if x_sw < c:
        s0 = series_phi(spec, x_sw, lf)
        Y, V, I = _shoot(problem, lf, x_sw, s0.y, s0.quasi_d, [c], cfg, accumulate=with_norm)
        yc, vc = Y[0], V[0]
        ode_part = I[0] if with_norm else 0.0
    else:
        sc = series_phi(spec, c, lf)
        yc, vc, ode_part = sc.y, sc.quasi_d, 0.0
    if not with_norm:
        return yc.reshape(shape), vc.reshape(shape)
    series_part = _series_norm(problem, spec, lf, x_sw)
    return yc.reshape(shape), vc.reshape(shape), (series_part + ode_part).reshape(shape)


def _series_norm(problem, spec, lf, x_hi):
    a = problem.a
    lam_abs = float(np.max(np.abs(lf), initial=0.0))
    # grade toward a only as far as double precision can separate the nodes from a
    ulp = np.spacing(abs(a)) if a != 0 else 1e-300
    levels = int(min(50, max(1, math.log2((x_hi - a) / (1e4 * ulp)))))
    bp = graded_panels(a, x_hi, levels=levels)
    bp = subdivide(bp, 1.0 / (1.0 + math.sqrt(lam_abs)))
    nodes, weights = gauss_nodes(bp, 16)
    keep = nodes > a
    nodes, weights = nodes[keep], weights[keep]
    sv = series_phi(spec, nodes[:, None], lf[None, :])
    y = sv.y
    mag = y.real**2 + y.imag**2 if np.iscomplexobj(y) else y * y
    return (weights * problem.r(nodes)) @ mag
