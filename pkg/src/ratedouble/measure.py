"""Error measurement: L2 by quadrature or Fourier sums, H and B norms of errors.

Every quantity comes with an uncertainty: quadrature values carry the
difference against a refined rule (or a QMC standard error), spectral values
carry the tail bounds from :mod:`ratedouble.korobov`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import korobov
from ._util import rng_for
from .interp import Interpolant
from .quadrature import composite_gauss_legendre, tensor_gauss_legendre

__all__ = [
    "ErrorTriple",
    "l2_error_quadrature",
    "l2_error_spectral",
    "h_b_error_spectral",
    "korobov_errors",
    "korobov_errors_gram",
    "min_kernel_h_error",
    "l2_norm_quadrature",
    "korobov_generating_vector",
    "QMC_POINTS",
    "QMC_SHIFTS",
]

QMC_POINTS = 2 ** 16
QMC_SHIFTS = 8


@dataclass
class ErrorTriple:
    """Errors of one interpolant against its target.

    ``b_norm`` is the B-norm of the target (``inf`` when the target is not
    in B).  ``l2_bound`` and ``h_bound`` are the measurement uncertainties.
    """

    n: int
    l2_err: float
    h_err: float
    b_norm: float
    l2_bound: float = 0.0
    h_bound: float = 0.0
    b_bound: float = 0.0
    methods: dict = field(default_factory=dict)

    @property
    def b_finite(self) -> bool:
        return math.isfinite(self.b_norm)


def _eval(f, X: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(f(X[:, 0] if d == 1 else X), dtype=float).reshape(-1)


def _tensor_sq_integral(f, s, d: int, panels: int, order: int, breaks) -> float:
    X, W = tensor_gauss_legendre(d, panels, order, breaks)
    diff = _eval(f, X, d) - (_eval(s, X, d) if s is not None else 0.0)
    return float(W @ diff ** 2)


@lru_cache(maxsize=16)
def korobov_generating_vector(n: int, d: int, candidates: int = 64) -> tuple[int, ...]:
    """Korobov-form vector (1, a, a^2, ...) mod n minimising the worst-case error
    of the lattice rule in the unweighted alpha = 1 Korobov space."""
    space = korobov.KorobovSpace.create(1.0, d, [0.9 ** j for j in range(d)])
    k = np.arange(n)
    best, best_err = None, math.inf
    # odd candidates spread over (1, n/2)
    for a in np.unique(np.linspace(3, n // 2 - 1, candidates).astype(int) | 1):
        z = [pow(int(a), j, n) for j in range(d)]
        prod = np.ones(n)
        for j, zj in enumerate(z):
            prod *= 1 + space.gamma[j] * korobov.eta(1.0, (k * zj % n) / n)
        err = prod.mean() - 1.0
        if err < best_err:
            best, best_err = tuple(z), err
    return best


def _qmc_sq_integral(f, s, d: int, n_points: int, shifts: int, seed: int):
    z = np.asarray(korobov_generating_vector(n_points, d))
    base = (np.arange(n_points)[:, None] * z[None, :] % n_points) / n_points
    rng = rng_for(seed, 0x51F7)
    ests = []
    for _ in range(shifts):
        X = (base + rng.random(d)) % 1.0
        diff = _eval(f, X, d) - (_eval(s, X, d) if s is not None else 0.0)
        ests.append(float(np.mean(diff ** 2)))
    ests = np.array(ests)
    return float(ests.mean()), float(ests.std(ddof=1) / math.sqrt(shifts))


def l2_error_quadrature(f, s=None, d: int = 1, panels: int = 32, order: int = 8,
                        breaks=None, qmc_points: int = QMC_POINTS,
                        qmc_shifts: int = QMC_SHIFTS, seed: int = 0):
    """||f - s||_{L2([0,1]^d)} with an uncertainty estimate.

    For d <= 3 a composite tensor Gauss-Legendre rule is compared against
    one with twice as many panels; the finer value is returned and the
    difference of the two norms is the bound.  ``breaks[j]`` lists kinks of
    the integrand along axis j (for d = 1 a flat list is accepted).  For
    d > 3 a randomly shifted lattice rule is used and the bound is the
    standard error over the shifts.
    """
    if d <= 3:
        if breaks is not None and d == 1 and np.ndim(breaks) == 1:
            breaks = [breaks]
        coarse = _tensor_sq_integral(f, s, d, panels, order, breaks)
        fine = _tensor_sq_integral(f, s, d, 2 * panels, order, breaks)
        value = math.sqrt(max(fine, 0.0))
        return value, abs(value - math.sqrt(max(coarse, 0.0)))
    mean, se = _qmc_sq_integral(f, s, d, qmc_points, qmc_shifts, seed)
    value = math.sqrt(max(mean, 0.0))
    # propagate the standard error of the squared norm to the norm
    bound = math.sqrt(max(mean + se, 0.0)) - value
    return value, bound


def l2_norm_quadrature(f, d: int = 1, **kw):
    return l2_error_quadrature(f, None, d, **kw)


def _residual(space: korobov.KorobovSpace, g: korobov.SpectralFunction,
              interp: Interpolant | None) -> korobov.SpectralFunction:
    if g.d != space.d:
        raise ValueError(f"target has dimension {g.d}, space has {space.d}")
    if interp is None:
        return g
    if interp.kernel.space != space:
        raise ValueError("interpolant was fitted with a different kernel/space")
    return g - interp.spectral()


def l2_error_spectral(space: korobov.KorobovSpace, g: korobov.SpectralFunction,
                      interp: Interpolant | None, truncation=korobov.DEFAULT_TRUNCATION):
    """||g - g_n||_{L2} by Parseval; returns (value, tail)."""
    nr = korobov.spectral_norms(space, _residual(space, g, interp), truncation)
    return nr.l2, nr.l2_tail


def h_b_error_spectral(space: korobov.KorobovSpace, g: korobov.SpectralFunction,
                       interp: Interpolant | None, truncation=korobov.DEFAULT_TRUNCATION):
    """H_{alpha,gamma} and H_{2 alpha,gamma^2} norms of g - g_n.

    Returns (h_err, b_err, h_tail, b_tail).  The residual of a nonzero kernel
    interpolant is never in the doubled space, which shows up as an
    infinite b_tail.
    """
    nr = korobov.spectral_norms(space, _residual(space, g, interp), truncation)
    return nr.h, nr.b, nr.h_tail, nr.b_tail


def _sqrt_interval(v: float, delta: float):
    """sqrt of a value known to +-delta: (estimate, half-width)."""
    est = math.sqrt(max(v, 0.0))
    hi = math.sqrt(max(v + delta, 0.0))
    lo = math.sqrt(max(v - delta, 0.0))
    return est, max(hi - est, est - lo)


def _fast_doubled(space: korobov.KorobovSpace) -> bool:
    return korobov._integer_alpha(2 * space.alpha) is not None


def korobov_errors_gram(space: korobov.KorobovSpace, g: korobov.SpectralFunction,
                        interp: Interpolant):
    """L2 and H errors of a Korobov interpolant by expanding the squared norms.

    ||g - g_n||^2 = ||g||^2 - 2 <g, g_n> + ||g_n||^2 with every term exact:
    <g, g_n>_H = sum_k a_k g(t_k), ||g_n||_H^2 = a^T K a, and in L2 the
    Gram matrix of the doubled space, since |f_n^(h)|^2 = |A(h)|^2 / r(h)^2.
    g must be either a pure Fourier table or a pure kernel combination.
    Returns ((l2, l2_bound), (h, h_bound)); the bounds cover cancellation,
    so this path is accurate for errors above ~1e-8 ||g||.
    """
    _residual(space, g, interp)
    has_table, has_kernel = bool(g.freqs.size), g.coeffs is not None
    if has_table and has_kernel:
        raise ValueError("mixed Fourier/kernel targets are not supported")
    t, a = interp.nodes.nodes, interp.coeffs
    eps = np.finfo(float).eps * max(16, t.shape[0])
    big = space.doubled()
    Kt = interp.kernel.matrix(t, t)
    Bt = korobov.kernel_matrix(big, t, t)
    gt = np.asarray(g(t)).reshape(-1)
    h_cross = a @ gt
    if has_kernel:
        s, c = g.nodes, g.coeffs
        Bs = korobov.kernel_matrix(big, t, s)
        g_l2, g_h = c @ korobov.kernel_matrix(big, s, s) @ c, c @ korobov.kernel_matrix(space, s, s) @ c
        l2_cross = a @ Bs @ c
        l2_mag = np.abs(a) @ np.abs(Bs) @ np.abs(c)
    else:
        r = korobov.r_weight(space, g.freqs)
        g_l2 = float(np.sum(np.abs(g.amps) ** 2))
        g_h = float(np.sum(r * np.abs(g.amps) ** 2))
        smoothed = korobov.SpectralFunction(g.d, g.freqs, g.amps / r)
        st = np.asarray(smoothed(t)).reshape(-1)
        l2_cross = a @ st
        l2_mag = np.abs(a) @ np.abs(st)
    n_l2, n_h = a @ Bt @ a, a @ Kt @ a
    v_l2 = g_l2 - 2 * l2_cross + n_l2
    v_h = g_h - 2 * h_cross + n_h
    d_l2 = eps * (abs(g_l2) + 2 * l2_mag + np.abs(a) @ np.abs(Bt) @ np.abs(a))
    d_h = eps * (abs(g_h) + 2 * np.abs(a) @ np.abs(gt) + np.abs(a) @ np.abs(Kt) @ np.abs(a))
    return _sqrt_interval(float(v_l2), float(d_l2)), _sqrt_interval(float(v_h), float(d_h))


def korobov_errors(space: korobov.KorobovSpace, g: korobov.SpectralFunction,
                   interp: Interpolant, truncation=korobov.DEFAULT_TRUNCATION):
    """Best available L2 and H errors of a Korobov interpolant.

    Computes the spectral values (lower bounds with tail bounds) and, when
    the doubled-space kernel has a closed form, the Gram expansion; for
    each norm the one with the smaller bound is returned.  Returns a dict
    with keys l2, l2_bound, l2_method, h, h_bound, h_method, spectral.
    """
    nr = korobov.spectral_norms(space, _residual(space, g, interp), truncation)
    out = {"l2": nr.l2, "l2_bound": nr.l2_tail, "l2_method": "spectral",
           "h": nr.h, "h_bound": nr.h_tail, "h_method": "spectral", "spectral": nr}
    mixed = bool(g.freqs.size) and g.coeffs is not None
    tight = nr.l2_tail <= 1e-10 * nr.l2 and nr.h_tail <= 1e-10 * nr.h
    if mixed or tight or not _fast_doubled(space):
        return out
    (l2g, l2b), (hg, hb) = korobov_errors_gram(space, g, interp)
    for key, val, bnd, lower, tail in (("l2", l2g, l2b, nr.l2, nr.l2_tail),
                                       ("h", hg, hb, nr.h, nr.h_tail)):
        # the spectral value is a lower bound; a Gram value below it is rounding
        consistent = val + bnd >= lower * (1 - 1e-12) and val - bnd <= lower + tail
        if bnd < out[f"{key}_bound"] and consistent:
            out.update({key: max(val, lower), f"{key}_bound": bnd, f"{key}_method": "gram"})
    return out


def min_kernel_h_error(g, dg, interp: Interpolant, panels: int = 64, order: int = 8,
                       breaks=()):
    """||g - g_n||_H for the min kernel, where <f, f>_H = f(0)^2 + int f'^2.

    The derivative of K(t, .) is the indicator of [0, t), so panels are
    split at the nodes and at any kinks of g listed in ``breaks``.
    Returns (value, bound) from panel refinement.
    """
    t = np.asarray(interp.nodes.nodes[:, 0])
    a = interp.coeffs
    order_idx = np.argsort(t)
    ts, cum = t[order_idx], np.cumsum(a[order_idx][::-1])[::-1]

    def dgn(x):
        # sum of a_k over nodes with t_k > x
        idx = np.searchsorted(ts, x, side="right")
        out = np.zeros_like(x)
        inside = idx < ts.size
        out[inside] = cum[idx[inside]]
        return out

    e0 = float(g(np.array(0.0))) - float(a.sum())
    cuts = np.concatenate([t, np.ravel(breaks)])

    def at(p):
        x, w = composite_gauss_legendre(0.0, 1.0, p, order, cuts)
        return math.sqrt(max(e0 * e0 + float(w @ (dg(x) - dgn(x)) ** 2), 0.0))

    fine, coarse = at(2 * panels), at(panels)
    return fine, abs(fine - coarse)
