"""Composite Gauss-Legendre rules on Farey partitions of [0, 1] and of branch windows."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .farey import LN2, branch_map, farey_level


@dataclass(frozen=True)
class QuadratureSpec:
    level: int = 8
    nodes: int = 32

    def __post_init__(self):
        if self.level < 0 or self.nodes < 1:
            raise ValueError("quadrature level must be >= 0 and nodes >= 1")


DEFAULT_QUAD = QuadratureSpec()


@lru_cache(maxsize=8)
def _leggauss(m: int):
    return np.polynomial.legendre.leggauss(m)


def composite_rule(edges: np.ndarray, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Points and Lebesgue weights of an ``nodes``-point rule on every [edges[i], edges[i+1]]."""
    x, w = _leggauss(nodes)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    pts = (a + half * (x[None, :] + 1.0)).ravel()
    wts = (half * w[None, :]).ravel()
    return pts, wts


@lru_cache(maxsize=16)
def gauss_rule(spec: QuadratureSpec = DEFAULT_QUAD) -> tuple[np.ndarray, np.ndarray]:
    """Rule for integrals over [0, 1] against Gauss measure (density folded into the weights)."""
    pts, wts = composite_rule(farey_level(spec.level).values, spec.nodes)
    wts = wts / (LN2 * (1.0 + pts))
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


@lru_cache(maxsize=64)
def window_rule(s: int, spec: QuadratureSpec = DEFAULT_QUAD) -> tuple[np.ndarray, np.ndarray]:
    """Rule on the window [1/(s+1), 1/s] against Gauss measure.

    Subintervals are the g_s-images of the Farey intervals of ``spec.level``,
    so every window node of quotient level <= spec.level is an edge.
    """
    edges = np.sort(branch_map(s, farey_level(spec.level).values))
    pts, wts = composite_rule(edges, spec.nodes)
    wts = wts / (LN2 * (1.0 + pts))
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def integrate_mu(g, spec: QuadratureSpec = DEFAULT_QUAD):
    """Integral of the vectorized function ``g`` over [0, 1] against Gauss measure."""
    pts, wts = gauss_rule(spec)
    return np.dot(wts, g(pts))
