"""Composite Gauss-Legendre rules on panel subdivisions."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


@dataclass(frozen=True)
class QuadratureRule:
    """Panels of a support interval, integrated with Gauss-Legendre per panel.

    ``panels`` holds the breakpoints.  With ``graded`` set, the first panel
    is split geometrically toward its left end (``grading_levels`` halvings).
    """

    panels: tuple
    points_per_panel: int = 16
    graded: bool = False
    grading_levels: int = 40

    def __post_init__(self):
        bp = np.asarray(self.panels, dtype=float)
        if bp.ndim != 1 or len(bp) < 2 or np.any(np.diff(bp) <= 0):
            raise ValueError("panel breakpoints must be strictly increasing")
        if self.points_per_panel < 1:
            raise ValueError("points_per_panel must be positive")
        object.__setattr__(self, "panels", tuple(bp.tolist()))

    @property
    def span(self):
        return self.panels[0], self.panels[-1]

    def breakpoints(self) -> np.ndarray:
        bp = np.asarray(self.panels)
        if not self.graded:
            return bp
        lo, hi = bp[0], bp[1]
        inner = lo + (hi - lo) * 0.5 ** np.arange(self.grading_levels, 0, -1)
        return np.concatenate([[lo], inner, bp[1:]])

    def nodes_weights(self):
        return gauss_nodes(self.breakpoints(), self.points_per_panel)


def gauss_nodes(breakpoints, n=16):
    """Nodes and weights of an ``n``-point rule on every panel."""
    bp = np.asarray(breakpoints, dtype=float)
    t, w = _leggauss(n)
    lo, hi = bp[:-1, None], bp[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + half * (t + 1.0)).ravel()
    weights = (half * w).ravel()
    return nodes, weights


def subdivide(breakpoints, max_len):
    """Split every panel longer than ``max_len`` into equal pieces."""
    bp = np.asarray(breakpoints, dtype=float)
    out = [bp[:1]]
    for lo, hi in zip(bp[:-1], bp[1:]):
        k = max(1, int(np.ceil((hi - lo) / max_len)))
        out.append(np.linspace(lo, hi, k + 1)[1:])
    return np.concatenate(out)


def graded_panels(lo, hi, levels=50, ratio=0.5):
    """Breakpoints ``lo, lo + d*ratio^levels, ..., lo + d*ratio, hi`` with ``d = hi - lo``."""
    d = hi - lo
    inner = lo + d * ratio ** np.arange(levels, 0, -1)
    return np.concatenate([[lo], inner, [hi]])
