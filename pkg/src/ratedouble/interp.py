"""Interpolation with positive definite kernels.

The interpolant ``f_n = sum_k a_k K(t_k, .)`` solves ``G a = f(t)``.  When K
reproduces a Hilbert space H this is the H-orthogonal projection onto the
span of the kernel translates, so H-norms of errors on kernel spans follow
from Gram arithmetic alone.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree

from . import korobov
from ._util import as_points, reshape_values
from .quadrature import composite_gauss_legendre

__all__ = [
    "DuplicatePointsError",
    "SolveFailure",
    "KernelSpec",
    "PointSet",
    "Gram",
    "Interpolant",
    "SyntheticTarget",
    "korobov_kernel",
    "min_kernel",
    "custom_kernel",
    "gram",
    "fit",
    "evaluate",
    "synthetic_target",
    "h_error",
    "galerkin_residuals",
    "direct_h_error_sq",
    "min_kernel_check",
    "JITTER_LADDER",
    "DUPLICATE_TOL",
]

log = logging.getLogger(__name__)

JITTER_LADDER = (0.0, 1e-14, 1e-12, 1e-10)
DUPLICATE_TOL = 1e-12


class DuplicatePointsError(ValueError):
    pass


class SolveFailure(RuntimeError):
    """The Gram system could not be solved even with the largest jitter."""


@dataclass(frozen=True)
class KernelSpec:
    """A symmetric kernel K(x, y) with a vectorised matrix rule.

    ``matrix(X, Y)`` returns ``K(X[i], Y[j])``.  ``periodic`` kernels live on
    the torus, so node distinctness is judged modulo 1.
    """

    name: str
    d: int
    matrix: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False, compare=False)
    periodic: bool = False
    space: korobov.KorobovSpace | None = None

    def __call__(self, x, y) -> float:
        return float(self.matrix(as_points(x, self.d)[0], as_points(y, self.d)[0])[0, 0])


def korobov_kernel(space: korobov.KorobovSpace) -> KernelSpec:
    return KernelSpec("korobov", space.d,
                      lambda X, Y: korobov.kernel_matrix(space, X, Y),
                      periodic=True, space=space)


def _min_matrix(X, Y):
    return 1.0 + np.minimum(X[:, 0, None], Y[None, :, 0])


def min_kernel() -> KernelSpec:
    """K(x, y) = 1 + min(x, y) on [0, 1]."""
    return KernelSpec("min_kernel", 1, _min_matrix)


def custom_kernel(func, d: int, name: str = "custom", periodic: bool = False) -> KernelSpec:
    return KernelSpec(name, d, func, periodic=periodic)


@dataclass(frozen=True)
class PointSet:
    """Ordered interpolation nodes, shape (n, d), with how they were made.

    ``lattice`` is ``(z, n)`` for rank-1 lattice nodes ``frac(k z / n)``,
    k = 0..n-1; equispaced nodes on [0, 1) are the d = 1 lattice with z = 1.
    """

    nodes: np.ndarray = field(repr=False)
    provenance: str = "explicit"
    lattice: tuple | None = None
    seed: int | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @property
    def d(self) -> int:
        return self.nodes.shape[1]

    def __len__(self):
        return self.n

    @classmethod
    def explicit(cls, nodes) -> "PointSet":
        return cls(nodes)

    @classmethod
    def rank1_lattice(cls, z, n: int) -> "PointSet":
        z = tuple(int(v) for v in np.atleast_1d(z))
        k = np.arange(n)[:, None]
        nodes = (k * np.asarray(z)[None, :] % n) / n
        return cls(nodes, f"rank1_lattice(z={list(z)}, n={n})", lattice=(z, n))

    @classmethod
    def equispaced(cls, n: int, interior: bool = False) -> "PointSet":
        """k/n for k = 0..n-1, or k/(n+1) for k = 1..n when ``interior``."""
        if interior:
            return cls(np.arange(1, n + 1) / (n + 1), "equispaced_interior")
        pts = cls.rank1_lattice((1,), n)
        return cls(pts.nodes, "equispaced", lattice=pts.lattice)

    @classmethod
    def random(cls, n: int, d: int, seed: int) -> "PointSet":
        rng = np.random.default_rng(seed)
        return cls(rng.random((n, d)), f"random(seed={seed})", seed=seed)

    def min_distance(self, periodic: bool = False) -> float:
        if self.n < 2:
            return math.inf
        pts = self.nodes
        if periodic:
            pts = pts - np.floor(pts)
            pts[pts >= 1.0] = 0.0
            tree = cKDTree(pts, boxsize=1.0)
        else:
            tree = cKDTree(pts)
        dist, _ = tree.query(pts, k=2)
        return float(dist[:, 1].min())

    def check_distinct(self, periodic: bool = False, tol: float = DUPLICATE_TOL):
        dmin = self.min_distance(periodic)
        if dmin <= tol:
            raise DuplicatePointsError(f"nodes are not distinct (min distance {dmin:.3e})")


@dataclass(frozen=True)
class Gram:
    matrix: np.ndarray = field(repr=False)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return linalg.eigvalsh(self.matrix)

    @property
    def min_eig(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def max_eig(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def condition(self) -> float:
        lo = self.min_eig
        return math.inf if lo <= 0 else self.max_eig / lo


def _pointset(pts) -> PointSet:
    return pts if isinstance(pts, PointSet) else PointSet(pts)


def gram(kernel: KernelSpec, pts) -> Gram:
    """Gram matrix G[j, k] = K(t_j, t_k) on distinct nodes."""
    pts = _pointset(pts)
    if pts.d != kernel.d:
        raise ValueError(f"points have dimension {pts.d}, kernel {kernel.d}")
    pts.check_distinct(kernel.periodic)
    G = kernel.matrix(pts.nodes, pts.nodes)
    # exact symmetry; the kernel formula is symmetric up to rounding
    G = 0.5 * (G + G.T)
    return Gram(G)


@dataclass(frozen=True)
class Interpolant:
    kernel: KernelSpec
    nodes: PointSet
    coeffs: np.ndarray = field(repr=False)
    gram_norm_sq: float = 0.0
    jitter: float = 0.0
    residual: float = 0.0

    def __call__(self, x):
        pts, shape = as_points(x, self.kernel.d)
        return reshape_values(self.kernel.matrix(pts, self.nodes.nodes) @ self.coeffs, shape)

    def spectral(self) -> korobov.SpectralFunction:
        """The interpolant as a kernel-combination spectral function (Korobov only)."""
        if self.kernel.space is None:
            raise ValueError("spectral form needs a Korobov kernel")
        return korobov.SpectralFunction.kernel_combination(
            self.kernel.space, self.nodes.nodes, self.coeffs, self.nodes.lattice)


def evaluate(interp: Interpolant, x):
    return interp(x)


def _solve(G: np.ndarray, values: np.ndarray):
    n = G.shape[0]
    scale = np.trace(G) / n
    tol = 1e-8 * (1 + np.abs(values).max(initial=0.0))
    last = None
    for lam in JITTER_LADDER:
        Gj = G + lam * scale * np.eye(n) if lam else G
        try:
            factor = linalg.cho_factor(Gj, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            last = exc
            continue
        a = linalg.cho_solve(factor, values, check_finite=False)
        # iterative refinement against the unregularised matrix
        for _ in range(2):
            r = values - G @ a
            if np.abs(r).max(initial=0.0) <= tol:
                break
            a = a + linalg.cho_solve(factor, r, check_finite=False)
        res = float(np.abs(values - G @ a).max(initial=0.0))
        if res <= tol:
            if lam:
                log.warning("Gram solve needed jitter %.0e * trace/n", lam)
            return a, lam, res
        last = SolveFailure(f"residual {res:.3e} exceeds {tol:.3e} at jitter {lam:g}")
    raise SolveFailure(f"Gram solve failed after jitter ladder: {last}")


def fit(kernel: KernelSpec, pts, values) -> Interpolant:
    """Kernel interpolant through (pts, values)."""
    pts = _pointset(pts)
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.shape[0] != pts.n:
        raise ValueError(f"{values.shape[0]} values for {pts.n} nodes")
    G = gram(kernel, pts).matrix
    a, lam, res = _solve(G, values)
    return Interpolant(kernel, pts, a, float(a @ G @ a), lam, res)


@dataclass(frozen=True)
class SyntheticTarget:
    """f = sum_j c_j K(s_j, .) with exactly known H-norm c^T G_ss c."""

    kernel: KernelSpec
    nodes: PointSet
    coeffs: np.ndarray = field(repr=False)
    gram_ss: np.ndarray = field(repr=False)

    @property
    def norm_sq(self) -> float:
        return float(self.coeffs @ self.gram_ss @ self.coeffs)

    def __call__(self, x):
        return Interpolant(self.kernel, self.nodes, self.coeffs)(x)


def synthetic_target(kernel: KernelSpec, fine_pts, coeffs) -> SyntheticTarget:
    fine_pts = _pointset(fine_pts)
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
    if coeffs.shape[0] != fine_pts.n:
        raise ValueError("one coefficient per fine node is required")
    G = gram(kernel, fine_pts).matrix
    return SyntheticTarget(kernel, fine_pts, coeffs, G)


def _check_pair(target: SyntheticTarget, interp: Interpolant):
    if target.kernel != interp.kernel:
        raise ValueError("target and interpolant use different kernels")


def direct_h_error_sq(target: SyntheticTarget, nodes: PointSet, a) -> float:
    """||f - sum a_k K(t_k, .)||_H^2 by expanding the inner product."""
    a = np.asarray(a, dtype=float)
    K = target.kernel.matrix
    G_ts = K(nodes.nodes, target.nodes.nodes)
    G_tt = K(nodes.nodes, nodes.nodes)
    return float(target.norm_sq - 2 * a @ G_ts @ target.coeffs + a @ G_tt @ a)


def h_error(target: SyntheticTarget, interp: Interpolant):
    """H-error of the interpolant by Pythagoras, plus the direct expansion.

    Returns (err_h, cross_check) where err_h^2 = ||f||^2 - ||f_n||^2 and
    cross_check is the directly expanded ||f - f_n||_H (both non-negative).
    """
    _check_pair(target, interp)
    fsq = target.norm_sq
    pyth = fsq - interp.gram_norm_sq
    direct = direct_h_error_sq(target, interp.nodes, interp.coeffs)
    slack = 1e-10 * max(fsq, 0.0)
    for name, v in (("Pythagoras", pyth), ("direct", direct)):
        if v < -slack - 1e-300:
            log.warning("%s H-error^2 is negative (%.3e) beyond rounding", name, v)
    return math.sqrt(max(pyth, 0.0)), math.sqrt(max(direct, 0.0))


def galerkin_residuals(target: SyntheticTarget, interp: Interpolant, coeffs=None):
    """<f - f_n, K(t_k, .)>_H for every node, computed two ways.

    Returns (pointwise, gram): f(t_k) - f_n(t_k) by evaluation, and
    G_ts c - G_tt a from Gram blocks.  ``coeffs`` overrides the interpolant's
    coefficients (for perturbation experiments).
    """
    _check_pair(target, interp)
    a = interp.coeffs if coeffs is None else np.asarray(coeffs, dtype=float)
    t = interp.nodes.nodes
    fn = Interpolant(interp.kernel, interp.nodes, a)
    pointwise = np.asarray(target(t)).reshape(-1) - np.asarray(fn(t)).reshape(-1)
    K = target.kernel.matrix
    by_gram = K(t, target.nodes.nodes) @ target.coeffs - K(t, t) @ a
    return pointwise, by_gram


def min_kernel_inner(f0, df, g0, dg, panels: int = 64, order: int = 8, breaks=()) -> float:
    """<f, g>_H = f(0) g(0) + int_0^1 f' g' for the min-kernel space."""
    x, w = composite_gauss_legendre(0.0, 1.0, panels, order, breaks)
    return f0 * g0 + float(w @ (df(x) * dg(x)))


def min_kernel_check(panels: int = 64, order: int = 8, n_points: int = 20) -> dict:
    """Quadrature check of the min-kernel reproducing property and of int K(x, x).

    The derivative of K(y, .) is 1 on [0, y) and 0 on (y, 1]; panels are
    split at y so the quadrature is exact for polynomial f.
    """
    tests = {
        "1": (lambda x: np.ones_like(x), lambda x: np.zeros_like(x)),
        "x": (lambda x: x, lambda x: np.ones_like(x)),
        "x^2": (lambda x: x * x, lambda x: 2 * x),
        "sin(pi x)": (lambda x: np.sin(np.pi * x), lambda x: np.pi * np.cos(np.pi * x)),
    }
    ys = (np.arange(n_points) + 0.5) / n_points
    worst = {}
    for name, (f, df) in tests.items():
        errs = []
        for y in ys:
            dK = lambda x, y=y: (x < y).astype(float)
            # K(y, 0) = 1
            val = min_kernel_inner(1.0, dK, float(f(np.array(0.0))), df,
                                   panels, order, breaks=(y,))
            errs.append(abs(val - float(f(np.array(y)))))
        worst[name] = max(errs)
    x, w = composite_gauss_legendre(0.0, 1.0, panels, order)
    diag = float(w @ (1.0 + x))
    return {"reproducing_errors": worst, "max_error": max(worst.values()),
            "diagonal_integral": diag}
