"""Composite and tensor Gauss-Legendre rules on intervals and the unit cube."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def _reference(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1) / 2, w / 2


def panel_edges(a: float, b: float, panels: int, breaks=()) -> np.ndarray:
    """Uniform panel edges on [a, b] with extra edges inserted at ``breaks``."""
    edges = np.linspace(a, b, panels + 1)
    inner = [float(t) for t in np.atleast_1d(breaks) if a < t < b]
    if inner:
        edges = np.unique(np.concatenate([edges, inner]))
        # drop slivers produced by breaks that sit on existing edges
        keep = np.concatenate([[True], np.diff(edges) > 1e-14 * (b - a)])
        edges = edges[keep]
    return edges


def composite_gauss_legendre(a: float, b: float, panels: int, order: int, breaks=()):
    """Nodes and weights of a composite rule; panels are split at ``breaks``."""
    edges = panel_edges(a, b, panels, breaks)
    ref_x, ref_w = _reference(order)
    h = np.diff(edges)
    x = (edges[:-1, None] + h[:, None] * ref_x[None, :]).ravel()
    w = (h[:, None] * ref_w[None, :]).ravel()
    return x, w


def tensor_gauss_legendre(d: int, panels: int, order: int, breaks=None):
    """Tensor rule on [0, 1]^d.  ``breaks[j]`` lists panel splits for axis j."""
    axes = []
    for j in range(d):
        bj = () if breaks is None else breaks[j]
        axes.append(composite_gauss_legendre(0.0, 1.0, panels, order, bj))
    xs = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    ws = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    X = np.stack([x.ravel() for x in xs], axis=-1)
    W = np.prod(np.stack([w.ravel() for w in ws], axis=-1), axis=-1)
    return X, W
