"""Weighted Korobov spaces of dominating mixed smoothness.

A function on the unit cube belongs to ``H_{alpha,gamma}`` when

    sum_h r(h) |f^(h)|^2 < inf,    r(h) = prod_{j in supp h} |h_j|^(2 alpha) / gamma_j

with product weights ``gamma_u = prod_{j in u} gamma_j``.  The reproducing
kernel is ``K(y, x) = prod_j (1 + gamma_j * eta_alpha(y_j - x_j))`` where
``eta_alpha(t) = sum_{h != 0} exp(2 pi i h t) / |h|^(2 alpha)``.

Fourier-side quantities are computed on the tensor grid ``|h_j| <= bound``
and always come with an upper bound for the part of the sum that lies
outside the grid.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import mpmath
import numpy as np
from scipy import special

from ._util import as_points, reshape_values

__all__ = [
    "ProductWeights",
    "KorobovSpace",
    "SpectralFunction",
    "SpectralNorms",
    "r_weight",
    "r_square_identity",
    "eta",
    "eta_series",
    "kernel_eval",
    "kernel_matrix",
    "kernel_eval_subsets",
    "frequency_grid",
    "outside_sum",
    "spectral_norms",
    "inner_product",
    "DEFAULT_TRUNCATION",
]

DEFAULT_TRUNCATION = 64

# closed forms of eta are used up to this integer alpha
_MAX_CLOSED_ALPHA = 8


@lru_cache(maxsize=None)
def _bernoulli_centered(n: int) -> np.ndarray:
    """Coefficients of B_n(1/2 + u) in increasing powers of u.

    Expanding about 1/2 avoids the cancellation of the monomial form near
    t = 1.  The Bernoulli numbers come from mpmath (scipy's lose ~1e-14).
    """
    half = [float((mpmath.mpf(2) ** (1 - m) - 1) * mpmath.bernoulli(m)) for m in range(n + 1)]
    return np.array([math.comb(n, j) * half[n - j] for j in range(n + 1)])


@dataclass(frozen=True)
class ProductWeights:
    """Coordinate weights gamma_1..gamma_d; gamma_u is the product over u."""

    gamma: tuple[float, ...]

    def __post_init__(self):
        gamma = tuple(float(g) for g in np.atleast_1d(self.gamma))
        if not gamma:
            raise ValueError("need at least one coordinate weight")
        if not all(g > 0 and math.isfinite(g) for g in gamma):
            raise ValueError(f"weights must be positive and finite, got {gamma}")
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def uniform(cls, d: int, value: float = 1.0) -> "ProductWeights":
        return cls((value,) * d)

    @property
    def d(self) -> int:
        return len(self.gamma)

    def subset_weight(self, u) -> float:
        # empty product is 1
        return float(np.prod([self.gamma[j] for j in u])) if len(u) else 1.0

    def squared(self) -> "ProductWeights":
        return ProductWeights(tuple(g * g for g in self.gamma))


@dataclass(frozen=True)
class KorobovSpace:
    alpha: float
    weights: ProductWeights

    def __post_init__(self):
        if not self.alpha > 0.5:
            raise ValueError(f"alpha must exceed 1/2, got {self.alpha}")
        if not isinstance(self.weights, ProductWeights):
            object.__setattr__(self, "weights", ProductWeights(self.weights))

    @classmethod
    def create(cls, alpha: float, d: int = 1, gamma=1.0) -> "KorobovSpace":
        gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (d,))
        return cls(float(alpha), ProductWeights(tuple(gamma)))

    @property
    def d(self) -> int:
        return self.weights.d

    @property
    def gamma(self) -> np.ndarray:
        return np.asarray(self.weights.gamma)

    def doubled(self) -> "KorobovSpace":
        """The smoother space H_{2 alpha, gamma^2}."""
        return KorobovSpace(2 * self.alpha, self.weights.squared())


def _as_freqs(space: KorobovSpace, h) -> np.ndarray:
    h = np.asarray(h)
    if h.ndim == 0:
        h = h.reshape(1)
    if h.shape[-1] != space.d:
        raise ValueError(f"frequency has dimension {h.shape[-1]}, space has {space.d}")
    return h


def r_weight(space: KorobovSpace, h):
    """Weight r_{alpha,gamma}(h); accepts one index of shape (d,) or a stack (m, d)."""
    h = _as_freqs(space, h)
    absh = np.abs(h).astype(float)
    nz = absh > 0
    # per-coordinate factor |h_j|^(2 alpha) / gamma_j on the support, 1 off it
    factors = np.where(nz, np.where(nz, absh, 1.0) ** (2 * space.alpha) / space.gamma, 1.0)
    out = np.prod(factors, axis=-1)
    return float(out) if out.ndim == 0 else out


def r_square_identity(space: KorobovSpace, h, rtol: float = 1e-12) -> bool:
    """Check r_{alpha,gamma}(h)^2 == r_{2 alpha, gamma^2}(h)."""
    lhs = np.asarray(r_weight(space, h)) ** 2
    rhs = np.asarray(r_weight(space.doubled(), h))
    return bool(np.all(np.abs(lhs - rhs) <= rtol * rhs))


def _frac(t):
    t = np.asarray(t, dtype=float)
    out = t - np.floor(t)
    # t slightly below an integer can round up to exactly 1.0
    return np.where(out >= 1.0, 0.0, out)


def _integer_alpha(alpha: float):
    k = round(alpha)
    if abs(alpha - k) < 1e-14 and 1 <= k <= _MAX_CLOSED_ALPHA:
        return int(k)
    return None


def eta(alpha: float, t, tol: float = 1e-10):
    """Evaluate eta_alpha(t) = sum_{h != 0} exp(2 pi i h t) / |h|^(2 alpha).

    Integer alpha (up to 8) uses the closed form
    (-1)^(alpha+1) (2 pi)^(2 alpha) / (2 alpha)! * B_{2 alpha}({t}).
    Other alpha go through the polylogarithm 2 Re Li_{2 alpha}(exp(2 pi i t)),
    evaluated with enough digits for ``tol``; that path is slow.
    """
    if not alpha > 0.5:
        raise ValueError(f"eta needs alpha > 1/2, got {alpha}")
    x = _frac(t)
    k = _integer_alpha(alpha)
    if k is not None:
        const = (-1) ** (k + 1) * (2 * np.pi) ** (2 * k) / math.factorial(2 * k)
        return const * np.polynomial.polynomial.polyval(x - 0.5, _bernoulli_centered(2 * k))

    dps = max(15, int(-math.log10(tol)) + 5)
    s = 2 * alpha

    def one(xv):
        with mpmath.workdps(dps):
            if xv == 0.0:
                return float(2 * mpmath.zeta(s))
            return float(2 * mpmath.re(mpmath.polylog(s, mpmath.expj(2 * mpmath.pi * xv))))

    out = np.vectorize(one, otypes=[float])(x)
    return float(out) if out.ndim == 0 else out


def eta_series(alpha: float, t, terms: int):
    """Truncated series for eta with |h| <= terms, plus the analytic tail bound.

    Returns (value, tail) with |eta(t) - value| <= tail, where
    tail = 2 / ((2 alpha - 1) terms^(2 alpha - 1)).
    """
    if not alpha > 0.5:
        raise ValueError(f"eta needs alpha > 1/2, got {alpha}")
    x = np.atleast_1d(_frac(t))
    h = np.arange(1, terms + 1, dtype=float)
    w = h ** (-2 * alpha)
    value = np.empty_like(x)
    for start in range(0, x.size, 256):
        chunk = x[start:start + 256]
        value[start:start + 256] = 2 * np.cos(2 * np.pi * np.outer(chunk, h)) @ w
    tail = 2.0 / ((2 * alpha - 1) * terms ** (2 * alpha - 1))
    if np.ndim(t) == 0:
        return float(value[0]), tail
    return value.reshape(np.shape(t)), tail


def kernel_matrix(space: KorobovSpace, Y, X) -> np.ndarray:
    """K(y_i, x_j) for point stacks Y (p, d) and X (q, d)."""
    Y = np.asarray(Y, dtype=float).reshape(-1, space.d)
    X = np.asarray(X, dtype=float).reshape(-1, space.d)
    out = np.ones((Y.shape[0], X.shape[0]))
    for j, g in enumerate(space.weights.gamma):
        out *= 1.0 + g * eta(space.alpha, Y[:, j, None] - X[None, :, j])
    return out


def kernel_eval(space: KorobovSpace, y, x) -> float:
    return float(kernel_matrix(space, y, x)[0, 0])


def kernel_eval_subsets(space: KorobovSpace, y, x) -> float:
    """Subset-sum form sum_u gamma_u prod_{j in u} eta(y_j - x_j); O(2^d)."""
    y = np.asarray(y, dtype=float).reshape(space.d)
    x = np.asarray(x, dtype=float).reshape(space.d)
    etas = [eta(space.alpha, y[j] - x[j]) for j in range(space.d)]
    total = 0.0
    for size in range(space.d + 1):
        for u in itertools.combinations(range(space.d), size):
            total += space.weights.subset_weight(u) * math.prod(etas[j] for j in u)
    return total


def frequency_grid(d: int, bound) -> np.ndarray:
    """All h in Z^d with |h_j| <= bound_j, in lexicographic order, shape (m, d)."""
    bound = np.broadcast_to(np.asarray(bound, dtype=int), (d,))
    axes = [np.arange(-b, b + 1) for b in bound]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def outside_sum(space: KorobovSpace, bound, p: float) -> float:
    """sum over h outside the grid |h_j| <= bound of r(h)^(-p).

    Uses sum_{h in Z^d} r^(-p) = prod_j (1 + 2 gamma_j^p zeta(2 alpha p)) and
    telescopes the difference against the in-grid product to avoid cancellation.
    """
    if p <= 0 or 2 * space.alpha * p <= 1:
        return math.inf
    bound = np.broadcast_to(np.asarray(bound, dtype=int), (space.d,))
    s = 2 * space.alpha * p
    full = []
    outside = []
    for g, b in zip(space.weights.gamma, bound):
        tail = 2 * g ** p * float(special.zeta(s, b + 1))
        full.append(1 + 2 * g ** p * float(special.zeta(s)))
        outside.append(tail)
    inside = [f - o for f, o in zip(full, outside)]
    total = 0.0
    for j in range(space.d):
        total += math.prod(inside[:j]) * outside[j] * math.prod(full[j + 1:])
    return total


@dataclass(frozen=True)
class SpectralFunction:
    """A periodic function given by Fourier data.

    Two parts are summed: a finite table ``amps[i]`` at frequencies
    ``freqs[i]`` and an optional kernel combination
    ``sum_k coeffs[k] K(nodes[k], .)`` in ``space``, whose coefficients are
    ``A(h) / r(h)`` with ``A(h) = sum_k coeffs[k] exp(-2 pi i h . nodes[k])``.
    ``lattice = (z, n)`` records that ``nodes[k] = frac(k z / n)`` so that A
    can be read off an FFT.
    """

    d: int
    freqs: np.ndarray = field(repr=False)
    amps: np.ndarray = field(repr=False)
    space: KorobovSpace | None = None
    nodes: np.ndarray | None = field(default=None, repr=False)
    coeffs: np.ndarray | None = field(default=None, repr=False)
    lattice: tuple | None = None

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=np.int64).reshape(-1, self.d)
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        if freqs.shape[0] != amps.shape[0]:
            raise ValueError("freqs and amps differ in length")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "amps", amps)
        if self.coeffs is not None:
            if self.space is None or self.space.d != self.d:
                raise ValueError("kernel part needs a space of matching dimension")
            nodes = np.asarray(self.nodes, dtype=float).reshape(-1, self.d)
            coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1)
            if nodes.shape[0] != coeffs.shape[0]:
                raise ValueError("nodes and coeffs differ in length")
            object.__setattr__(self, "nodes", nodes)
            object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_coefficients(cls, coeffs, d: int | None = None) -> "SpectralFunction":
        """Build from a mapping {h: amplitude}; scalar keys are allowed for d = 1."""
        items = list(dict(coeffs).items())
        if d is None:
            d = 1 if not items else len(np.atleast_1d(items[0][0]))
        freqs = np.array([np.atleast_1d(h) for h, _ in items], dtype=np.int64).reshape(-1, d)
        amps = np.array([a for _, a in items], dtype=complex)
        return cls(d, freqs, amps)

    @classmethod
    def kernel_combination(cls, space: KorobovSpace, nodes, coeffs, lattice=None) -> "SpectralFunction":
        return cls(space.d, np.zeros((0, space.d)), np.zeros(0), space, nodes, coeffs, lattice)

    @property
    def has_kernel_part(self) -> bool:
        return self.coeffs is not None and bool(np.any(self.coeffs != 0))

    @property
    def max_support(self) -> int:
        return int(np.abs(self.freqs).max()) if self.freqs.size else 0

    def _combine(self, other: "SpectralFunction", sign: float) -> "SpectralFunction":
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        freqs = np.concatenate([self.freqs, other.freqs])
        amps = np.concatenate([self.amps, sign * other.amps])
        # merge repeated frequencies so the table stays a function of h
        if freqs.size:
            uniq, inv = np.unique(freqs, axis=0, return_inverse=True)
            merged = np.zeros(len(uniq), dtype=complex)
            np.add.at(merged, inv.reshape(-1), amps)
            freqs, amps = uniq, merged
        parts = [(f.space, f.nodes, s * f.coeffs, f.lattice)
                 for f, s in ((self, 1.0), (other, sign)) if f.coeffs is not None]
        if not parts:
            return SpectralFunction(self.d, freqs, amps)
        if len(parts) == 2:
            (sp1, n1, c1, l1), (sp2, n2, c2, l2) = parts
            if sp1 != sp2:
                raise ValueError("kernel parts live in different spaces")
            if l1 is not None and l1 == l2:
                return SpectralFunction(self.d, freqs, amps, sp1, n1, c1 + c2, l1)
            return SpectralFunction(self.d, freqs, amps, sp1,
                                    np.concatenate([n1, n2]), np.concatenate([c1, c2]))
        sp, nodes, coeffs, lat = parts[0]
        return SpectralFunction(self.d, freqs, amps, sp, nodes, coeffs, lat)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return self.scaled(-1.0)

    def scaled(self, c: float) -> "SpectralFunction":
        coeffs = None if self.coeffs is None else c * self.coeffs
        return SpectralFunction(self.d, self.freqs, c * self.amps, self.space,
                                self.nodes, coeffs, self.lattice)

    def kernel_amplitudes(self, h: np.ndarray) -> np.ndarray:
        """A(h) of the kernel part at frequencies h (m, d)."""
        h = np.asarray(h, dtype=np.int64).reshape(-1, self.d)
        if self.coeffs is None:
            return np.zeros(h.shape[0], dtype=complex)
        if self.lattice is not None:
            z, n = self.lattice
            spectrum = np.fft.fft(self.coeffs)
            return spectrum[(h @ np.asarray(z, dtype=np.int64)) % n]
        out = np.empty(h.shape[0], dtype=complex)
        for start in range(0, h.shape[0], 2048):
            block = h[start:start + 2048].astype(float)
            phase = _frac(block @ self.nodes.T)
            out[start:start + 2048] = np.exp(-2j * np.pi * phase) @ self.coeffs
        return out

    def kernel_amplitude_bound(self) -> float:
        """An upper bound on sup_h |A(h)|."""
        if self.coeffs is None:
            return 0.0
        if self.lattice is not None:
            return float(np.abs(np.fft.fft(self.coeffs)).max())
        return float(np.abs(self.coeffs).sum())

    def fourier(self, h) -> np.ndarray:
        """Fourier coefficients f^(h) for a stack of frequencies (m, d)."""
        h = np.asarray(h, dtype=np.int64).reshape(-1, self.d)
        out = np.zeros(h.shape[0], dtype=complex)
        if self.freqs.size:
            table = dict(zip(map(tuple, self.freqs), self.amps))
            out += np.array([table.get(tuple(k), 0.0) for k in h], dtype=complex)
        if self.coeffs is not None:
            out += self.kernel_amplitudes(h) / r_weight(self.space, h)
        return out

    def __call__(self, x) -> np.ndarray:
        pts, shape = as_points(x, self.d)
        out = np.zeros(pts.shape[0])
        if self.freqs.size:
            ft = self.freqs.T.astype(float)
            step = max(1, 2 ** 20 // self.freqs.shape[0])
            for start in range(0, pts.shape[0], step):
                phase = _frac(pts[start:start + step] @ ft)
                out[start:start + step] += np.real(np.exp(2j * np.pi * phase) @ self.amps)
        if self.coeffs is not None:
            out += kernel_matrix(self.space, pts, self.nodes) @ self.coeffs
        return reshape_values(out, shape)



class SpectralNorms(NamedTuple):
    """Truncated norms (lower bounds) and bounds on what lies beyond the grid.

    The true norm lies in [value, value + tail]; an infinite tail means the
    norm diverges.
    """

    l2: float
    h: float
    b: float
    l2_tail: float
    h_tail: float
    b_tail: float


def _norm_tail(inside_sq: float, tail_sq: float) -> float:
    if tail_sq == 0:
        return 0.0
    if not math.isfinite(tail_sq):
        return math.inf
    return tail_sq / (math.sqrt(inside_sq + tail_sq) + math.sqrt(inside_sq))


def _grid_data(space: KorobovSpace, f: SpectralFunction, truncation):
    if f.d != space.d:
        raise ValueError(f"function has dimension {f.d}, space has {space.d}")
    if f.coeffs is not None and f.space != space:
        raise ValueError("kernel part belongs to a different space")
    bound = np.broadcast_to(np.asarray(truncation, dtype=int), (space.d,))
    if f.freqs.size and np.any(np.abs(f.freqs).max(axis=0) > bound):
        raise ValueError(
            f"truncation {tuple(bound)} is below the finite support {f.max_support}")
    grid = frequency_grid(space.d, bound)
    r = r_weight(space, grid)
    coef = np.zeros(grid.shape[0], dtype=complex)
    if f.freqs.size:
        idx = np.ravel_multi_index(tuple((f.freqs + bound).T), tuple(2 * bound + 1))
        np.add.at(coef, idx, f.amps)
    if f.coeffs is not None:
        coef += f.kernel_amplitudes(grid) / r
    return bound, r, coef


def _lattice_tail_sq(space: KorobovSpace, f: SpectralFunction, bound: int, power: int) -> float:
    """Exact sum_{|h| > bound} r^power |f^(h)|^2 for a d = 1 lattice kernel part.

    A(h) only depends on h mod n, so the outside sum splits into arithmetic
    progressions, each a Hurwitz zeta value.
    """
    (z,), n = f.lattice
    spectrum = np.abs(np.fft.fft(f.coeffs)) ** 2
    s = 2 * space.alpha * (2 - power)
    if s <= 1:
        return math.inf if spectrum.any() else 0.0
    g = space.weights.gamma[0] ** (2 - power)
    c = np.arange(n)
    first = bound + 1 + (c - (bound + 1)) % n
    # h > bound with h = c (mod n), and h < -bound with -h = c (mod n)
    pos = n ** (-s) * special.zeta(s, first / n)
    amp_pos = spectrum[(c * z) % n]
    amp_neg = spectrum[(-c * z) % n]
    return float(g * (amp_pos @ pos + amp_neg @ pos))


def _tail_sq(space: KorobovSpace, f: SpectralFunction, bound, power: int):
    """Outside-grid part of sum_h r^power |f^(h)|^2 for power in {0, 1, 2}.

    Returns (value, exact).  For a d = 1 lattice kernel part the value is
    the exact tail; otherwise it is the bound sup|A|^2 sum_{outside} r^(power-2).
    """
    if not f.has_kernel_part:
        return 0.0, True
    if f.lattice is not None and f.d == 1:
        return _lattice_tail_sq(space, f, int(np.ravel(bound)[0]), power), True
    amp = f.kernel_amplitude_bound()
    return amp * amp * outside_sum(space, bound, 2 - power), False


# relative rounding allowance for tails computed exactly
_EXACT_TAIL_RTOL = 1e-12


def spectral_norms(space: KorobovSpace, f: SpectralFunction,
                   truncation=DEFAULT_TRUNCATION) -> SpectralNorms:
    """L2, H_{alpha,gamma} and H_{2 alpha,gamma^2} norms of f with tail bounds.

    When the outside-grid part can be summed exactly it is folded into the
    value and the reported tail only covers rounding.
    """
    bound, r, coef = _grid_data(space, f, truncation)
    a2 = np.abs(coef) ** 2
    sums = [float(a2.sum()), float((r * a2).sum()), float((r * r * a2).sum())]
    norms, tails = [], []
    for q, inside in enumerate(sums):
        tail, exact = _tail_sq(space, f, bound, q)
        if exact and math.isfinite(tail):
            total = inside + tail
            norms.append(math.sqrt(total))
            tails.append(_norm_tail(total, _EXACT_TAIL_RTOL * tail))
        else:
            norms.append(math.sqrt(inside))
            tails.append(_norm_tail(inside, tail))
    return SpectralNorms(*norms, *tails)


def inner_product(space: KorobovSpace, f: SpectralFunction, g: SpectralFunction,
                  truncation=DEFAULT_TRUNCATION, imag_tol: float = 1e-10):
    """<f, g>_{alpha,gamma} on the grid plus a bound on the neglected part.

    Returns (value, tail).  The value is real for real f and g; an imaginary
    part above ``imag_tol`` relative to the sum of magnitudes raises.
    """
    if f.d != g.d:
        raise ValueError(f"dimension mismatch: {f.d} vs {g.d}")
    bound, r, cf = _grid_data(space, f, truncation)
    _, _, cg = _grid_data(space, g, truncation)
    terms = r * cf * np.conj(cg)
    value = complex(terms.sum())
    scale = max(1.0, float(np.abs(terms).sum()))
    if abs(value.imag) > imag_tol * scale:
        raise ValueError(f"inner product has imaginary part {value.imag:.3e}")
    tf, tg = _tail_sq(space, f, bound, 1)[0], _tail_sq(space, g, bound, 1)[0]
    tail = 0.0 if tf == 0 or tg == 0 else math.sqrt(tf * tg)
    return value.real, tail
