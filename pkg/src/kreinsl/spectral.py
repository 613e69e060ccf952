"""Eigenvalues of truncated realizations, step spectral measures and Parseval checks.

The truncated operator lives on (a, c) with the boundary condition
``cos(theta) u(c) + sin(theta) u'(c) = 0`` and no condition at ``a``.  Its
eigenvalues are the zeros of

    w(lam) = phi * (p psi') - psi * (p phi'),

which at ``x = c`` needs only ``phi(c)`` and ``p phi'(c)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import CompactFunction, EntireSolutionSpec, SLProblem, StepMeasure
from .odeint import DEFAULT_CONFIG, ShootingConfig, _shoot, phi_eval, phi_to_c, psi_c_theta
from .transform import default_rule, directing_functional, l2_norm


class SpectralAdvisory(UserWarning):
    """A numerical result that is usable but should be double checked."""


@dataclass(frozen=True)
class EigenRecord:
    lambda_n: float
    wronskian_residual: float
    norm_sq: float
    theta: float
    c: float


@dataclass(frozen=True)
class WronskianReport:
    value: complex
    values: np.ndarray
    max_deviation: float


def wronskian(problem: SLProblem, spec: EntireSolutionSpec, c: float, theta: float, lam,
              x_probe: Sequence[float], cfg: ShootingConfig = DEFAULT_CONFIG) -> WronskianReport:
    """``phi (p psi') - psi (p phi')`` at every probe point, with its spread."""
    xp = np.asarray(x_probe, dtype=float)
    phi = phi_eval(problem, spec, lam, xp, cfg)
    psi = psi_c_theta(problem, c, theta, lam, xp, cfg)
    vals = np.atleast_1d(phi.y * psi.quasi_d - psi.y * phi.quasi_d)
    mean = vals.mean()
    dev = float(np.max(np.abs(vals[:, None] - vals[None, :])))
    return WronskianReport(complex(mean), vals, dev)


def wronskian_at_c(problem: SLProblem, spec: EntireSolutionSpec, c: float, theta: float,
                   lam, cfg: ShootingConfig = DEFAULT_CONFIG):
    """``w(lam)`` from ``psi(c) = sin(theta)``, ``psi'(c) = -cos(theta)``; also a magnitude scale."""
    yc, vc = phi_to_c(problem, spec, lam, c, cfg)
    pc = float(problem.p(c))
    w = -pc * math.cos(theta) * yc - math.sin(theta) * vc
    return w, np.abs(pc * yc) + np.abs(vc)


def eigenvalues_truncated(problem: SLProblem, spec: EntireSolutionSpec, c: float, theta: float,
                          window, scan_pts: int = 400, root_tol: float = 1e-12,
                          cfg: ShootingConfig = DEFAULT_CONFIG,
                          oracle_check: bool = False) -> list:
    """All eigenvalues of the truncated realization inside ``window``.

    Sign changes of ``w`` on a uniform grid are bisected to a relative width
    of ``root_tol`` (absolute near zero) and polished by one secant step.
    """
    lo, hi = map(float, window)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError(f"window must be finite with lo < hi (got {window})")
    if scan_pts < 2:
        raise ValueError("scan_pts must be at least 2")

    def w_of(lam):
        return wronskian_at_c(problem, spec, c, theta, lam, cfg)[0].real

    grid = np.linspace(lo, hi, scan_pts)
    wg = w_of(grid)
    sgn = np.sign(wg)
    exact = np.flatnonzero(sgn == 0)
    for i in exact:
        left = sgn[i - 1] if i > 0 else 0
        right = sgn[i + 1] if i + 1 < len(sgn) else 0
        if left != 0 and left == right:
            warnings.warn(f"w vanishes at {grid[i]} without changing sign", SpectralAdvisory)
    brackets = np.flatnonzero(sgn[:-1] * sgn[1:] < 0)

    a_lam, b_lam = grid[brackets].copy(), grid[brackets + 1].copy()
    wa, wb = wg[brackets].copy(), wg[brackets + 1].copy()
    while len(a_lam):
        width = b_lam - a_lam
        tol = root_tol * np.maximum(np.abs(0.5 * (a_lam + b_lam)), 1.0)
        active = width > tol
        if not np.any(active):
            break
        mid = 0.5 * (a_lam[active] + b_lam[active])
        wm = w_of(mid)
        left = np.sign(wm) == np.sign(wa[active])
        idx = np.flatnonzero(active)
        a_lam[idx[left]], wa[idx[left]] = mid[left], wm[left]
        b_lam[idx[~left]], wb[idx[~left]] = mid[~left], wm[~left]
        hit = wm == 0
        a_lam[idx[hit]] = b_lam[idx[hit]] = mid[hit]
    with np.errstate(invalid="ignore", divide="ignore"):
        sec = a_lam - wa * (b_lam - a_lam) / (wb - wa)
        slope = np.abs(wb - wa) / (b_lam - a_lam)
    roots = np.where((sec >= a_lam) & (sec <= b_lam), sec, 0.5 * (a_lam + b_lam))
    if len(exact):
        nb_lo, nb_hi = np.maximum(exact - 1, 0), np.minimum(exact + 1, len(grid) - 1)
        ex_slope = np.abs(wg[nb_hi] - wg[nb_lo]) / (grid[nb_hi] - grid[nb_lo])
        roots = np.concatenate([roots, grid[exact]])
        slope = np.concatenate([slope, ex_slope])
    order = np.argsort(roots, kind="stable")
    roots, slope = roots[order], slope[order]

    records = []
    if len(roots):
        yc, vc, nsq = phi_to_c(problem, spec, roots, c, cfg, with_norm=True)
        pc = float(problem.p(c))
        w = -pc * math.cos(theta) * yc - math.sin(theta) * vc
        # |w| against its local slope: the implied relative error of the root
        with np.errstate(invalid="ignore", divide="ignore"):
            resid = np.where(w == 0, 0.0, np.abs(w) / (slope * np.maximum(np.abs(roots), 1.0)))
        records = [EigenRecord(float(l), float(rr), float(n), float(theta), float(c))
                   for l, rr, n in zip(roots, resid, nsq)]
    if oracle_check:
        _oracle_count_check(problem, c, theta, (lo, hi), roots)
    return records


def _oracle_count_check(problem, c, theta, window, roots):
    from .oracle import discretize, oracle_eigs

    dp = discretize(problem, c, theta, n_nodes=2000)
    vals, _ = oracle_eigs(dp, min(len(dp.x) // 4, max(4 * len(roots) + 8, 16)))
    lo, hi = window
    inside = vals[(vals > lo) & (vals < hi)]
    if len(inside) != len(roots):
        warnings.warn(f"scan found {len(roots)} roots but the oracle has {len(inside)} "
                      f"eigenvalues in {window}; refine scan_pts", SpectralAdvisory)


def spectral_measure_approx(problem: SLProblem, spec: EntireSolutionSpec, c: float,
                            theta: float, window, scan_pts: int = 400,
                            root_tol: float = 1e-12,
                            cfg: ShootingConfig = DEFAULT_CONFIG) -> StepMeasure:
    """Atoms ``(lam_n, 1/||phi(., lam_n)||^2)`` of the truncated realization."""
    recs = eigenvalues_truncated(problem, spec, c, theta, window, scan_pts, root_tol, cfg)
    lam = np.array([r.lambda_n for r in recs])
    nsq = np.array([r.norm_sq for r in recs])
    res = np.array([r.wronskian_residual for r in recs])
    prov = {"c": float(c), "theta": float(theta), "window": [float(window[0]), float(window[1])],
            "problem": problem.name, "scan_pts": int(scan_pts), "root_tol": float(root_tol)}
    return StepMeasure(lam, 1.0 / nsq, nsq, res, prov)


def growth_exponent(measure: StepMeasure, lam_lo: float, lam_hi: float) -> float:
    """Log-log slope of the cumulative measure over the atoms in ``(lam_lo, lam_hi)``.

    The staircase is read at mid-height of each jump, the usual normalization
    ``(sigma(lam+) + sigma(lam-))/2``; reading at the top of every jump biases
    the slope low by the relative size of the last step.
    """
    if not 0 < lam_lo < lam_hi:
        raise ValueError("need 0 < lam_lo < lam_hi")
    cum = np.cumsum(measure.weights) - 0.5 * measure.weights
    sel = (measure.lambdas > lam_lo) & (measure.lambdas < lam_hi)
    if np.count_nonzero(sel) < 3:
        raise ValueError("fewer than three atoms in the fitting range")
    return float(np.polyfit(np.log(measure.lambdas[sel]), np.log(cum[sel]), 1)[0])


@dataclass(frozen=True)
class ParsevalReport:
    relative_error: float
    norm_sq: float
    spectral_sum: float
    atoms_used: int
    tail_term: float
    complete: bool


def parseval_check(problem: SLProblem, spec: EntireSolutionSpec, measure: StepMeasure,
                   f: CompactFunction, rule=None,
                   cfg: ShootingConfig = DEFAULT_CONFIG) -> ParsevalReport:
    """Compare ``(f, f)`` with ``sum_n |Phi(f; lam_n)|^2 mu_n``."""
    c = measure.provenance.get("c")
    if c is not None and not f.support[1] < c:
        raise ValueError(f"f must be supported inside (a, c) (s_hi={f.support[1]}, c={c})")
    rule = rule or default_rule(f, problem)
    ff = l2_norm(problem, f, rule) ** 2
    if ff == 0.0:
        return ParsevalReport(0.0, 0.0, 0.0, 0, 0.0, True)
    if len(measure) == 0:
        return ParsevalReport(1.0, ff, 0.0, 0, math.inf, False)
    phi = directing_functional(problem, spec, f, measure.lambdas, rule, cfg)
    terms = np.abs(phi) ** 2 * measure.weights
    # the spectrum is unbounded toward +inf (or -inf when the orientation is flipped)
    order = np.arange(len(terms)) if problem.sign > 0 else np.arange(len(terms))[::-1]
    used = len(terms)
    small = terms[order] < 1e-14 * ff
    run = np.flatnonzero(small[:-1] & small[1:])
    if len(run):
        used = int(run[0]) + 1
    total = float(np.sum(terms[order][:used]))
    tail = float(terms[order][-1])
    complete = tail <= 1e-6 * ff
    if not complete:
        warnings.warn(f"window looks too small: last Parseval term {tail:.3g} "
                      f"exceeds 1e-6 (f, f)", SpectralAdvisory)
    return ParsevalReport(abs(ff - total) / ff, ff, total, used, tail, complete)


# --------------------------------------------------------------------------
# endpoint classification


@dataclass(frozen=True)
class EndpointReport:
    kind: str
    lam_probe: Optional[float]
    mesh: np.ndarray = field(default_factory=lambda: np.zeros(0))
    growth: tuple = ()
    decade_ratio: tuple = ()


def _integrable_decades(g, e, side, d0):
    """Per-decade contributions ``d * g(e +- d)`` shrink geometrically when ``g`` is integrable."""
    d = d0 * 10.0 ** -np.arange(1, 10)
    x = e + d if side == "left" else e - d
    with np.errstate(all="ignore"):
        vals = np.abs(g(x))
    if not np.all(np.isfinite(vals)):
        return False
    contrib = d * vals
    last = contrib[-4:]
    if np.all(last == 0):
        return True
    return bool(np.all(last[1:] <= 0.5 * last[:-1]))


def classify_endpoint(problem: SLProblem, endpoint: str = "left", lam_probe: Optional[float] = None,
                      cfg: ShootingConfig = DEFAULT_CONFIG) -> EndpointReport:
    """Weyl alternative at one endpoint, decided numerically.

    Regular when ``1/p``, ``q`` and ``r`` are integrable up to a finite
    endpoint.  Otherwise the solutions with data ``(1, 0)`` and ``(0, 1)`` at an
    interior point are carried toward the endpoint on a geometric mesh while
    ``int |u|^2 r`` accumulates: limit-circle when both integrals settle,
    limit-point when one keeps growing by a steady factor per mesh step.
    """
    if endpoint not in ("left", "right"):
        raise ValueError("endpoint must be 'left' or 'right'")
    a, b = problem.a, problem.b
    e = a if endpoint == "left" else b
    if math.isfinite(b):
        half = 0.5 * (b - a)
    else:
        half = 1.0
    d0 = min(1.0, half)
    if math.isfinite(e):
        coeffs = (lambda x: 1.0 / problem.p(x), problem.q, problem.r)
        if all(_integrable_decades(g, e, endpoint, d0) for g in coeffs):
            return EndpointReport("regular", None)

    probes = [0.0, -1.0] if lam_probe is None else [float(lam_probe)]
    report = None
    for lp in probes:
        report = _weyl_test(problem, e, endpoint, d0, lp, cfg)
        if report.kind != "unknown":
            return report
    return report


def _weyl_test(problem, e, endpoint, d0, lam_probe, cfg):
    if math.isfinite(e):
        x0 = e + d0 if endpoint == "left" else e - d0
        dist = d0 * 10.0 ** -np.arange(1, 11)
        mesh = e + dist if endpoint == "left" else e - dist
    else:
        x0 = max(problem.a + 1.0, 1.0)
        mesh = x0 + 2.0 ** np.arange(1, 8)
    lam = np.array([lam_probe, lam_probe])
    Y, V, I = _shoot(problem, lam, x0, np.array([1.0, 0.0]), np.array([0.0, 1.0]),
                     mesh, cfg, accumulate=True)
    growth = (np.abs(I[:, 0]), np.abs(I[:, 1]))
    ratios = []
    for curve in growth:
        inc = np.diff(np.concatenate([[0.0], curve]))
        m = 3
        a_, b_ = inc[-1 - m], inc[-1]
        ratios.append(float((b_ / a_) ** (1.0 / m)) if a_ > 0 else 0.0)
    divergent = [rho >= 0.9 for rho in ratios]
    convergent = [rho <= 0.5 for rho in ratios]
    if any(divergent):
        kind = "limit-point"
    elif all(convergent):
        kind = "limit-circle"
    else:
        kind = "unknown"
    return EndpointReport(kind, lam_probe, mesh, growth, tuple(ratios))


# --------------------------------------------------------------------------
# theta family at a regular endpoint


def measure_family(problem: SLProblem, spec: EntireSolutionSpec, thetas: Sequence[float],
                   window, scan_pts: int = 400, root_tol: float = 1e-12,
                   cfg: ShootingConfig = DEFAULT_CONFIG, threads: int = 1) -> dict:
    """Exact spectral measures ``theta -> StepMeasure`` with the boundary condition at ``b``."""
    if problem.right_kind != "regular" or not math.isfinite(problem.b):
        raise ValueError("measure_family needs a regular right endpoint")
    c = problem.b

    def one(theta):
        return spectral_measure_approx(problem, spec, c, theta, window, scan_pts, root_tol, cfg)

    thetas = [float(t) for t in thetas]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, thetas))
    else:
        results = [one(t) for t in thetas]
    return dict(zip(thetas, results))


# --------------------------------------------------------------------------
# serialization

MEASURE_FORMAT = "kreinsl.step-measure"
MEASURE_VERSION = 1
CSV_COLUMNS = ("lambda", "weight", "norm_sq", "wronskian_residual")


def measure_to_csv(measure: StepMeasure) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_COLUMNS)
    n = len(measure)
    nsq = measure.norm_sq if measure.norm_sq is not None else np.full(n, np.nan)
    res = measure.wronskian_residual if measure.wronskian_residual is not None else np.full(n, np.nan)
    for row in zip(measure.lambdas, measure.weights, nsq, res):
        wr.writerow([f"{v:.17g}" for v in row])
    return buf.getvalue()


def measure_from_csv(text: str, provenance: Optional[dict] = None) -> StepMeasure:
    rows = list(csv.DictReader(io.StringIO(text)))
    col = {k: np.array([float(r[k]) for r in rows]) for k in CSV_COLUMNS}
    return StepMeasure(col["lambda"], col["weight"], col["norm_sq"],
                       col["wronskian_residual"], dict(provenance or {}))


def measure_to_record(measure: StepMeasure) -> str:
    rec = {
        "format": MEASURE_FORMAT,
        "version": MEASURE_VERSION,
        "provenance": measure.provenance,
        "atoms": [
            {"lambda": float(l), "weight": float(w),
             "norm_sq": None if measure.norm_sq is None else float(measure.norm_sq[i]),
             "wronskian_residual": (None if measure.wronskian_residual is None
                                    else float(measure.wronskian_residual[i]))}
            for i, (l, w) in enumerate(zip(measure.lambdas, measure.weights))
        ],
    }
    return json.dumps(rec, indent=2, sort_keys=True)


def measure_from_record(text: str) -> StepMeasure:
    rec = json.loads(text)
    if rec.get("format") != MEASURE_FORMAT:
        raise ValueError("not a step-measure record")
    if rec.get("version") != MEASURE_VERSION:
        raise ValueError(f"unsupported step-measure record version {rec.get('version')}")
    atoms = rec["atoms"]
    lam = np.array([a["lambda"] for a in atoms], dtype=float)
    w = np.array([a["weight"] for a in atoms], dtype=float)
    nsq = (np.array([a["norm_sq"] for a in atoms], dtype=float)
           if atoms and atoms[0]["norm_sq"] is not None else None)
    res = (np.array([a["wronskian_residual"] for a in atoms], dtype=float)
           if atoms and atoms[0]["wronskian_residual"] is not None else None)
    return StepMeasure(lam, w, nsq, res, rec.get("provenance", {}))
