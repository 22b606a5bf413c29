"""Composite Gauss-Legendre rules on unions of intervals."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = ["gauss_legendre", "composite_nodes", "integrate", "graded_edges"]


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]."""
    if n < 1:
        raise ValueError("need at least one node")
    return np.polynomial.legendre.leggauss(n)


def composite_nodes(edges: Sequence[float], nodes_per_panel: int = 12
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for panels [edges[i], edges[i+1]] glued together."""
    edges = np.asarray(edges, dtype=np.float64)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing")
    z, w = gauss_legendre(nodes_per_panel)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    xs = (mid[:, None] + half[:, None] * z[None, :]).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    return xs, ws


def integrate(fn: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
              panels: int = 16, nodes_per_panel: int = 12) -> float:
    xs, ws = composite_nodes(np.linspace(lo, hi, panels + 1), nodes_per_panel)
    return float(ws @ np.asarray(fn(xs), dtype=np.float64))


def graded_edges(lo: float, hi: float, refine_at: Sequence[float],
                 finest: float = 1e-7, coarsest: float = 0.25) -> np.ndarray:
    """Panel edges geometrically refined toward the given interior points.

    Integrands with boundary-layer behaviour (sharp sigmoids, kinks known
    only to machine precision) need panels that shrink toward the layer.
    """
    pts = {lo, hi}
    for c in refine_at:
        if not lo <= c <= hi:
            continue
        pts.add(c)
        d = finest
        while d < coarsest:
            for s in (c - d, c + d):
                if lo < s < hi:
                    pts.add(s)
            d *= 4.0
    edges = np.array(sorted(pts))
    # also cap the coarse panels far from the refinement points
    out = [edges[0]]
    for e in edges[1:]:
        while e - out[-1] > coarsest:
            out.append(out[-1] + coarsest)
        out.append(e)
    return np.array(out)
