"""Interpolation with conditionally positive definite radial basis functions.

An interpolant of order m has the form

    s(y) = sum_k a_k Phi(t_k - y) + p(y),    p in Pi_{m-1},

with moment conditions sum_k a_k q(t_k) = 0 for every q in Pi_{m-1}.  The
native-space inner product on such functions is evaluated through the
modified kernel K_Phi and a point term at a unisolvent set xi.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from ._util import as_points, reshape_values
from .quadrature import tensor_gauss_legendre

__all__ = [
    "NotUnisolvent",
    "MomentViolation",
    "SolveFailure",
    "CpdBasis",
    "PolySpace",
    "RbfFunction",
    "RbfInterpolant",
    "ProjectionAudit",
    "thin_plate",
    "polyharmonic",
    "gaussian",
    "inverse_multiquadric",
    "make_basis",
    "unisolvency_check",
    "fit_rbf",
    "cpd_quadratic_form",
    "k_phi",
    "native_kernel",
    "native_inner",
    "kernel_section",
    "calL2_norm",
    "rbf_projection_audit",
    "project_moments",
]

log = logging.getLogger(__name__)


class NotUnisolvent(ValueError):
    pass


class MomentViolation(ValueError):
    pass


class SolveFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class CpdBasis:
    """Radial function Phi(y) = profile(||y||) of conditional order ``order``."""

    name: str
    order: int
    profile: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)

    def matrix(self, X, Y) -> np.ndarray:
        """Phi(X[i] - Y[j])."""
        return self.profile(cdist(np.atleast_2d(X), np.atleast_2d(Y)))

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.profile(np.linalg.norm(np.atleast_2d(y), axis=-1))


def _r2logr(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = r[pos] ** 2 * np.log(r[pos])
    return out


def thin_plate() -> CpdBasis:
    """Phi(y) = ||y||^2 log ||y||, conditionally positive definite of order 2."""
    return CpdBasis("thin_plate", 2, _r2logr)


def polyharmonic(k: int) -> CpdBasis:
    """Sign-adjusted r^k (k odd) or r^k log r (k even)."""
    if k < 1:
        raise ValueError("polyharmonic degree must be positive")
    if k % 2:
        m = math.ceil(k / 2)
        sign = (-1) ** m
        return CpdBasis(f"polyharmonic({k})", m, lambda r: sign * np.asarray(r, float) ** k)
    m = k // 2 + 1
    sign = (-1) ** (k // 2 + 1)

    def prof(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = sign * r[pos] ** k * np.log(r[pos])
        return out

    return CpdBasis(f"polyharmonic({k})", m, prof)


def gaussian(eps: float = 1.0) -> CpdBasis:
    return CpdBasis(f"gaussian({eps:g})", 0, lambda r: np.exp(-(eps * np.asarray(r)) ** 2))


def inverse_multiquadric(eps: float = 1.0) -> CpdBasis:
    return CpdBasis(f"inverse_multiquadric({eps:g})", 0,
                    lambda r: 1.0 / np.sqrt(1.0 + (eps * np.asarray(r)) ** 2))


def make_basis(name: str, param: float | None = None) -> CpdBasis:
    if name == "thin_plate":
        return thin_plate()
    if name == "polyharmonic":
        return polyharmonic(int(param if param is not None else 3))
    if name == "gaussian":
        return gaussian(param if param is not None else 1.0)
    if name == "inverse_multiquadric":
        return inverse_multiquadric(param if param is not None else 1.0)
    raise ValueError(f"unknown basis {name!r}")


def monomial_exponents(d: int, m: int) -> np.ndarray:
    """Exponents of monomials of degree < m: by total degree, then lexicographic."""
    exps = []
    for deg in range(m):
        block = [e for e in itertools.product(range(deg + 1), repeat=d) if sum(e) == deg]
        exps.extend(sorted(block, reverse=True))
    return np.array(exps, dtype=int).reshape(-1, d)


def vandermonde(X, exps: np.ndarray) -> np.ndarray:
    """Monomials at points mapped from [0, 1]^d to [-1, 1]^d."""
    U = 2.0 * np.atleast_2d(np.asarray(X, dtype=float)) - 1.0
    if exps.shape[0] == 0:
        return np.zeros((U.shape[0], 0))
    return np.prod(U[:, None, :] ** exps[None, :, :], axis=-1)


@dataclass(frozen=True)
class PolySpace:
    """Pi_{m-1} on R^d with a unisolvent set xi and its Lagrange basis."""

    d: int
    m: int
    xi: np.ndarray = field(repr=False)

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float).reshape(-1, self.d)
        object.__setattr__(self, "xi", xi)
        if xi.shape[0] != self.Q:
            raise ValueError(f"need {self.Q} points in xi, got {xi.shape[0]}")
        if self.Q and np.linalg.matrix_rank(vandermonde(xi, self.exponents), tol=1e-10) < self.Q:
            raise NotUnisolvent("xi is not unisolvent for Pi_{m-1}")

    @classmethod
    def from_points(cls, d: int, m: int, pts) -> "PolySpace":
        """Select xi from ``pts`` by pivoted QR; raises if pts is not unisolvent."""
        ok, xi = unisolvency_check(d, m, pts)
        if not ok:
            raise NotUnisolvent(f"points are not Pi_{m - 1}-unisolvent")
        return cls(d, m, xi)

    @property
    def Q(self) -> int:
        return math.comb(self.m - 1 + self.d, self.d) if self.m > 0 else 0

    @cached_property
    def exponents(self) -> np.ndarray:
        return monomial_exponents(self.d, self.m)

    def vandermonde(self, X) -> np.ndarray:
        return vandermonde(X, self.exponents)

    @cached_property
    def lagrange_coeffs(self) -> np.ndarray:
        """Column i holds the monomial coefficients of p_i."""
        if self.Q == 0:
            return np.zeros((0, 0))
        return np.linalg.inv(self.vandermonde(self.xi))

    def lagrange(self, X) -> np.ndarray:
        """p_i(X[a]) as an array of shape (len(X), Q)."""
        return self.vandermonde(X) @ self.lagrange_coeffs


def unisolvency_check(d: int, m: int, pts):
    """Decide Pi_{m-1}-unisolvency and pick a unisolvent subset xi of the points.

    Returns (is_unisolvent, xi).  The subset comes from a column-pivoted QR of
    the transposed Vandermonde, so it depends only on the input order.
    """
    pts = np.asarray(getattr(pts, "nodes", pts), dtype=float).reshape(-1, d)
    Q = math.comb(m - 1 + d, d) if m > 0 else 0
    if Q == 0:
        return True, np.zeros((0, d))
    if pts.shape[0] < Q:
        return False, np.zeros((0, d))
    V = vandermonde(pts, monomial_exponents(d, m))
    sv = np.linalg.svd(V, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        return False, np.zeros((0, d))
    _, _, piv = linalg.qr(V.T, pivoting=True, mode="economic")
    return True, pts[np.sort(piv[:Q])]


@dataclass(frozen=True)
class RbfFunction:
    """sum_k coeffs[k] Phi(nodes[k] - .) + polynomial (monomial coefficients)."""

    basis: CpdBasis
    nodes: np.ndarray = field(repr=False)
    coeffs: np.ndarray = field(repr=False)
    poly: np.ndarray = field(repr=False)
    d: int = 2

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).reshape(-1, self.d)
        coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if nodes.shape[0] != coeffs.shape[0]:
            raise ValueError("nodes and coeffs differ in length")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "poly", np.asarray(self.poly, dtype=float).reshape(-1))

    @cached_property
    def exponents(self) -> np.ndarray:
        return monomial_exponents(self.d, self.basis.order)

    def __call__(self, x):
        pts, shape = as_points(x, self.d)
        out = self.basis.matrix(pts, self.nodes) @ self.coeffs
        if self.poly.size:
            out = out + vandermonde(pts, self.exponents) @ self.poly
        return reshape_values(out, shape)

    def _combine(self, other: "RbfFunction", sign: float) -> "RbfFunction":
        if other.basis != self.basis or other.d != self.d:
            raise ValueError("functions use different bases")
        return RbfFunction(self.basis, np.concatenate([self.nodes, other.nodes]),
                           np.concatenate([self.coeffs, sign * other.coeffs]),
                           self.poly + sign * other.poly, self.d)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def scaled(self, c: float) -> "RbfFunction":
        return RbfFunction(self.basis, self.nodes, c * self.coeffs, c * self.poly, self.d)

    def moment_residual(self) -> float:
        """max_q |sum_k a_k q(t_k)| over the scaled monomials q of degree < m."""
        if self.basis.order == 0 or self.coeffs.size == 0:
            return 0.0
        return float(np.abs(vandermonde(self.nodes, self.exponents).T @ self.coeffs).max())


@dataclass(frozen=True)
class RbfInterpolant(RbfFunction):
    residual: float = 0.0
    degraded: bool = False


def _check_moments(f: RbfFunction, tol: float = 1e-6):
    res = f.moment_residual()
    scale = np.linalg.norm(f.coeffs)
    if res > tol * max(scale, 1e-300) and res > 0:
        raise MomentViolation(f"moment residual {res:.3e} for ||a|| = {scale:.3e}")


def project_moments(nodes, coeffs, order: int) -> np.ndarray:
    """Orthogonal projection of coeffs onto the moment-condition subspace."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    coeffs = np.asarray(coeffs, dtype=float)
    if order == 0:
        return coeffs.copy()
    P = vandermonde(nodes, monomial_exponents(nodes.shape[1], order))
    Qf, _ = np.linalg.qr(P)
    return coeffs - Qf @ (Qf.T @ coeffs)


def fit_rbf(basis: CpdBasis, pts, values) -> RbfInterpolant:
    """Solve [[A, P], [P^T, 0]] [a; c] = [f; 0] for the interpolant."""
    pts = np.asarray(getattr(pts, "nodes", pts), dtype=float)
    pts = pts.reshape(pts.shape[0], -1)
    n, d = pts.shape
    values = np.asarray(values, dtype=float).reshape(-1)
    if np.min(cdist(pts, pts) + np.diag(np.full(n, np.inf)), initial=np.inf) <= 1e-12:
        raise ValueError("interpolation nodes are not distinct")
    exps = monomial_exponents(d, basis.order)
    Q = exps.shape[0]
    if Q:
        ok, _ = unisolvency_check(d, basis.order, pts)
        if not ok:
            raise NotUnisolvent(f"nodes are not Pi_{basis.order - 1}-unisolvent")
    A = basis.matrix(pts, pts)
    P = vandermonde(pts, exps)
    M = np.block([[A, P], [P.T, np.zeros((Q, Q))]])
    rhs = np.concatenate([values, np.zeros(Q)])
    degraded = False
    try:
        sol = linalg.solve(M, rhs, assume_a="sym")
        sol = sol + linalg.solve(M, rhs - M @ sol, assume_a="sym")
    except (linalg.LinAlgError, ValueError) as exc:
        log.warning("saddle-point solve failed (%s); falling back to least squares", exc)
        sol = linalg.lstsq(M, rhs, cond=1e-10)[0]
        degraded = True
    resid = float(np.abs(M @ sol - rhs).max(initial=0.0))
    tol = 1e-8 * (1 + np.abs(values).max(initial=0.0))
    if not np.all(np.isfinite(sol)) or resid > tol:
        raise SolveFailure(f"saddle-point residual {resid:.3e} exceeds {tol:.3e}")
    a, c = sol[:n], sol[n:]
    return RbfInterpolant(basis, pts, a, c, d, residual=resid, degraded=degraded)


def cpd_quadratic_form(basis: CpdBasis, pts, a) -> float:
    """a^T A a, defined for coefficients that satisfy the moment conditions."""
    pts = np.atleast_2d(np.asarray(getattr(pts, "nodes", pts), dtype=float))
    a = np.asarray(a, dtype=float)
    f = RbfFunction(basis, pts, a, np.zeros(0 if basis.order == 0 else
                                           monomial_exponents(pts.shape[1], basis.order).shape[0]),
                    pts.shape[1])
    _check_moments(f)
    return float(a @ basis.matrix(pts, pts) @ a)


def k_phi(basis: CpdBasis, pspace: PolySpace, X, Y) -> np.ndarray:
    """Modified kernel K_Phi(X[a], Y[b]); vanishes when either argument is in xi."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    out = basis.matrix(X, Y)
    if pspace.Q == 0:
        return out
    PX, PY = pspace.lagrange(X), pspace.lagrange(Y)
    xi = pspace.xi
    out = out - PX @ basis.matrix(xi, Y) - basis.matrix(X, xi) @ PY.T
    return out + PX @ basis.matrix(xi, xi) @ PY.T


def native_kernel(basis: CpdBasis, pspace: PolySpace, X, Y, point_weight: float = 1.0):
    """Reproducing kernel K_Phi + (1/w) sum_i p_i(x) p_i(y) for point-term weight w."""
    out = k_phi(basis, pspace, X, Y)
    if pspace.Q:
        out = out + pspace.lagrange(np.atleast_2d(X)) @ pspace.lagrange(np.atleast_2d(Y)).T / point_weight
    return out


def native_inner(basis: CpdBasis, pspace: PolySpace, f: RbfFunction, g: RbfFunction,
                 point_weight: float = 1.0) -> float:
    """sum_kj a_k K_Phi(t_k, u_j) b_j + w sum_i f(xi_i) g(xi_i).

    ``point_weight = 1`` makes ``native_kernel`` reproducing; pass ``1 / Q``
    for the alternative normalisation.
    """
    for h in (f, g):
        if h.basis != basis:
            raise ValueError("function uses a different basis")
        _check_moments(h)
    first = float(f.coeffs @ k_phi(basis, pspace, f.nodes, g.nodes) @ g.coeffs) if (
        f.coeffs.size and g.coeffs.size) else 0.0
    if pspace.Q == 0:
        return first
    fx = np.asarray(f(pspace.xi)).reshape(-1)
    gx = np.asarray(g(pspace.xi)).reshape(-1)
    return first + point_weight * float(fx @ gx)


def kernel_section(basis: CpdBasis, pspace: PolySpace, x, point_weight: float = 1.0) -> RbfFunction:
    """K(x, .) written as a kernel combination plus a polynomial."""
    x = np.asarray(x, dtype=float).reshape(1, pspace.d)
    if pspace.Q == 0:
        return RbfFunction(basis, x, [1.0], np.zeros(0), pspace.d)
    px = pspace.lagrange(x)[0]
    xi = pspace.xi
    nodes = np.vstack([x, xi])
    coeffs = np.concatenate([[1.0], -px])
    # values of the polynomial part at xi, turned into monomial coefficients
    at_xi = -(basis.matrix(x, xi)[0] - px @ basis.matrix(xi, xi)) + px / point_weight
    return RbfFunction(basis, nodes, coeffs, pspace.lagrange_coeffs @ at_xi, pspace.d)


def calL2_norm(f, pspace: PolySpace, panels: int = 16, order: int = 8) -> float:
    """(int_{[0,1]^d} f^2 + (1/Q) sum_i f(xi_i)^2)^(1/2)."""
    X, W = tensor_gauss_legendre(pspace.d, panels, order)
    val = float(W @ np.asarray(f(X)).reshape(-1) ** 2)
    if pspace.Q:
        fx = np.asarray(f(pspace.xi)).reshape(-1)
        val += float(fx @ fx) / pspace.Q
    return math.sqrt(max(val, 0.0))


@dataclass
class ProjectionAudit:
    galerkin_pointwise: np.ndarray
    galerkin_inner: np.ndarray
    norm_sq_target: float
    norm_sq_interp: float
    err_sq_direct: float
    err_sq_pythagoras: float
    perturbation_gains: np.ndarray
    l2_err: float
    calL2_err: float
    scale: float
    galerkin_tol: float = 1e-7
    pythagoras_rtol: float = 1e-6

    @property
    def galerkin_ok(self) -> bool:
        worst = max(np.abs(self.galerkin_pointwise).max(initial=0.0),
                    np.abs(self.galerkin_inner).max(initial=0.0))
        return bool(worst <= self.galerkin_tol * self.scale)

    @property
    def pythagoras_ok(self) -> bool:
        diff = abs(self.err_sq_direct - self.err_sq_pythagoras)
        return bool(diff <= self.pythagoras_rtol * max(self.norm_sq_target, 1e-300))

    @property
    def minimal_norm_ok(self) -> bool:
        return bool(np.all(self.perturbation_gains > 0))

    @property
    def passed(self) -> bool:
        return self.galerkin_ok and self.pythagoras_ok and self.minimal_norm_ok


def rbf_projection_audit(basis: CpdBasis, pspace: PolySpace, target: RbfFunction, coarse,
                         n_perturb: int = 20, seed: int = 0, point_weight: float = 1.0,
                         panels: int = 16) -> ProjectionAudit:
    """Check that the interpolant on ``coarse`` is the native-space projection of target."""
    coarse = np.atleast_2d(np.asarray(getattr(coarse, "nodes", coarse), dtype=float))
    if pspace.Q:
        dist = cdist(pspace.xi, coarse).min(axis=1)
        if np.any(dist > 1e-12):
            raise ValueError("xi must be a subset of the coarse nodes")
    s = fit_rbf(basis, coarse, target(coarse))
    s_fn = RbfFunction(basis, s.nodes, s.coeffs, s.poly, s.d)
    err = target - s_fn
    inner = lambda u, v: native_inner(basis, pspace, u, v, point_weight)

    pointwise = np.asarray(target(coarse)).reshape(-1) - np.asarray(s_fn(coarse)).reshape(-1)
    via_inner = np.array([inner(err, kernel_section(basis, pspace, t, point_weight))
                          for t in coarse])
    nf, ns = inner(target, target), inner(s_fn, s_fn)
    err_direct = inner(err, err)

    rng = np.random.default_rng(seed)
    base = err_direct
    gains = []
    Q = s.poly.size
    for _ in range(n_perturb):
        raw = rng.standard_normal(coarse.shape[0])
        delta = project_moments(coarse, raw, basis.order)
        # with n = Q the moment conditions force a = 0; only the polynomial moves
        norm = np.linalg.norm(delta)
        delta = delta * (1e-2 / norm) if norm > 1e-10 * np.linalg.norm(raw) else 0.0 * delta
        v = RbfFunction(basis, coarse, delta, 1e-2 * rng.standard_normal(Q), s.d)
        e2 = err - v
        gains.append(inner(e2, e2) - base)

    X, W = tensor_gauss_legendre(s.d, panels, 8)
    l2 = math.sqrt(max(float(W @ np.asarray(err(X)).reshape(-1) ** 2), 0.0))
    scale = math.sqrt(max(nf, 0.0)) * max(1.0, float(np.abs(basis.matrix(coarse, coarse)).max()))
    return ProjectionAudit(pointwise, via_inner, nf, ns, err_direct, nf - ns,
                           np.array(gains), l2, calL2_norm(err, pspace, panels), scale)
