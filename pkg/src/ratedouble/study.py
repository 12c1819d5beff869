"""Convergence studies: n-sweeps, log-log rate fits and per-instance audits.

A sweep fits the kernel interpolant of one target at every n, measures the
L2 and H errors together with the B-norm of the target, checks the two
inequalities behind the doubled rate,

    ||g - g_n||_H^2 <= ||g - g_n||_{L2} ||g||_B    and    <g - g_n, K(t_k, .)>_H = 0,

and fits ``err ~ c n^(-kappa)`` over the tail of the sweep.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from threadpoolctl import threadpool_limits

from . import interp as ip
from . import korobov, measure, rbf
from ._util import rng_for
from .quadrature import composite_gauss_legendre

__all__ = [
    "StudyConfig",
    "RateFit",
    "InequalityAudit",
    "StudyReport",
    "Verdict",
    "DegenerateFit",
    "UnboundedB",
    "IncompatibleReports",
    "run_sweep",
    "fit_rate",
    "doubling_verdict",
    "verdict_pair",
    "audit_doubling",
    "audit_min_kernel",
    "duality_check",
    "spectral_target",
    "min_kernel_target",
    "rbf_target",
    "synthetic_report",
    "identity_suite",
    "audit_batch",
    "duality_batch",
    "IdentityCheck",
    "ProjectionCheck",
    "projection_suite",
    "ERROR_FLOOR",
    "SATURATION_FACTOR",
    "DEFAULT_SLACK",
]

log = logging.getLogger(__name__)

ERROR_FLOOR = 1e-13
SATURATION_FACTOR = 100.0
DEFAULT_SLACK = 0.35
# decay exponent excess over the borderline of H (rough) or B (smooth) membership
EXCESS = 0.05
GALERKIN_TOL = 1e-7
# relative rounding allowance on audited inequalities
ROUNDING = 1e-10

SETTINGS = ("korobov", "min_kernel", "rbf")
TARGETS = {
    "korobov": ("rough", "smooth", "trig", "synthetic", "span"),
    "min_kernel": ("rough", "smooth", "singular", "synthetic"),
    "rbf": ("rough", "smooth", "synthetic"),
}
NODE_SCHEMES = ("equispaced", "rank1_lattice", "random")

# RNG stream tags
_TARGET, _NODES, _AUDIT = 1, 2, 3


class DegenerateFit(ValueError):
    """Fewer than three usable points for a rate fit."""


class UnboundedB(ValueError):
    """The target has no finite B-norm."""


class IncompatibleReports(ValueError):
    pass


@dataclass(frozen=True)
class StudyConfig:
    setting: str = "korobov"
    alpha: float = 1.0
    gamma: tuple = (1.0,)
    d: int = 1
    basis: str = "thin_plate"
    basis_param: float | None = None
    nodes: str = "equispaced"
    z: tuple | None = None
    n_values: tuple = (16, 32, 64, 128, 256, 512, 1024)
    target: str = "smooth"
    cutoff: int | None = None
    trig_degree: int = 3
    fine_size: int = 64
    truncation: int | None = None
    panels: int = 32
    order: int = 8
    window: int | None = None
    slack: float = DEFAULT_SLACK
    seed: int = 0
    threads: int = 1
    n_dual: int = 20
    out: str | None = None

    def __post_init__(self):
        fix = lambda name, v: object.__setattr__(self, name, v)
        fix("n_values", tuple(int(n) for n in self.n_values))
        fix("gamma", tuple(float(g) for g in np.atleast_1d(self.gamma)))
        if self.z is not None:
            fix("z", tuple(int(v) for v in np.atleast_1d(self.z)))
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}; expected one of {SETTINGS}")
        if self.target not in TARGETS[self.setting]:
            raise ValueError(f"target {self.target!r} is not available for {self.setting}; "
                             f"expected one of {TARGETS[self.setting]}")
        if self.nodes not in NODE_SCHEMES:
            raise ValueError(f"unknown node scheme {self.nodes!r}")
        ns = np.asarray(self.n_values)
        if ns.size < 4 or np.any(np.diff(ns) <= 0) or ns[0] < 1:
            raise ValueError("n_values must be strictly increasing positive integers, at least 4")
        if self.setting == "min_kernel" and self.d != 1:
            raise ValueError("the min kernel lives on [0, 1]; d must be 1")
        if self.setting == "rbf" and self.d < 1:
            raise ValueError("d must be positive")
        if len(self.gamma) not in (1, self.d):
            raise ValueError(f"gamma needs 1 or {self.d} entries")
        if self.z is not None and len(self.z) != self.d:
            raise ValueError(f"generating vector needs {self.d} entries")
        if self.truncation is not None and self.truncation < self.effective_cutoff:
            raise ValueError("truncation must be at least the target cutoff")
        if self.window is not None and self.window < 3:
            raise ValueError("window must cover at least 3 points")
        if self.threads < 1:
            raise ValueError("threads must be positive")

    @property
    def label(self) -> str:
        return f"{self.setting}:{self.target}"

    @property
    def effective_cutoff(self) -> int:
        if self.cutoff is not None:
            return int(self.cutoff)
        if self.target == "trig":
            return self.trig_degree
        return 4096 if self.d == 1 else 32

    @property
    def effective_truncation(self) -> int:
        if self.truncation is not None:
            return int(self.truncation)
        return max(self.effective_cutoff, 4096 if self.d == 1 else 64)

    @property
    def effective_window(self) -> int:
        return self.window if self.window is not None else math.ceil(len(self.n_values) / 2)

    def space(self) -> korobov.KorobovSpace:
        return korobov.KorobovSpace.create(self.alpha, self.d, self.gamma if len(self.gamma) > 1
                                           else self.gamma[0])

    def replace(self, **kw) -> "StudyConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class RateFit:
    kappa: float
    log_c: float
    window: tuple
    residual: float
    excluded: tuple = ()

    @property
    def c(self) -> float:
        return math.exp(self.log_c)


def fit_rate(pairs, window=None, floor: float = ERROR_FLOOR) -> RateFit:
    """Least-squares fit of log err = log c - kappa log n.

    ``window`` is None (all pairs), an int k (the k largest n) or a
    collection of n values.  Points with err <= floor or non-finite err are
    dropped and listed in ``excluded``.
    """
    pairs = sorted((int(n), float(e)) for n, e in pairs)
    if window is None:
        chosen = pairs
    elif isinstance(window, (int, np.integer)):
        chosen = pairs[-int(window):] if window > 0 else []
    else:
        keep = {int(n) for n in window}
        chosen = [p for p in pairs if p[0] in keep]
    usable = [(n, e) for n, e in chosen if math.isfinite(e) and e > floor]
    excluded = tuple(n for n, e in chosen if not (math.isfinite(e) and e > floor))
    if len(usable) < 3:
        raise DegenerateFit(f"{len(usable)} usable points in window (need 3)")
    x = np.log([n for n, _ in usable])
    y = np.log([e for _, e in usable])
    A = np.column_stack([np.ones_like(x), x])
    (log_c, slope), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((y - A @ np.array([log_c, slope])) ** 2)))
    return RateFit(float(-slope), float(log_c), tuple(n for n, _ in usable), resid, excluded)


@dataclass
class InequalityAudit:
    """Per-instance check of the inequalities behind the doubled rate.

    ``audit_A`` is None when it was skipped (``skip_reason`` says why).
    """

    l2_err: float
    h_err: float
    b_norm: float
    lhs_A: float = math.nan
    rhs_A: float = math.nan
    slack_A: float = 0.0
    audit_A: bool | None = None
    skip_reason: str = ""
    galerkin_max: float = 0.0
    galerkin_tol: float = 0.0
    audit_B: bool = True
    embedding_ok: bool | None = None
    duality_checked: int = 0
    duality_worst: float = 0.0
    duality_ok: bool | None = None

    @property
    def passed(self) -> bool:
        return (self.audit_A is not False and self.audit_B
                and self.embedding_ok is not False and self.duality_ok is not False)


def _check_A(audit: InequalityAudit, l2, l2_bound, h, b, b_bound):
    upper = (l2 + l2_bound) * (b + b_bound)
    audit.lhs_A = h * h
    audit.rhs_A = l2 * b
    audit.slack_A = upper - l2 * b + ROUNDING * (h * h + upper)
    audit.audit_A = bool(audit.lhs_A <= audit.rhs_A + audit.slack_A)


def duality_check(space: korobov.KorobovSpace, f: korobov.SpectralFunction,
                  g: korobov.SpectralFunction, truncation=korobov.DEFAULT_TRUNCATION):
    """|<f, g>_H| <= ||f||_{L2} ||g||_B for finite-support f and g.

    Returns (lhs, rhs, ok); rhs includes the tail bounds and a rounding allowance.
    """
    value, tail = korobov.inner_product(space, f, g, truncation)
    nf = korobov.spectral_norms(space, f, truncation)
    ng = korobov.spectral_norms(space, g, truncation)
    rhs = (nf.l2 + nf.l2_tail) * (ng.b + ng.b_tail)
    lhs = abs(value)
    return lhs, rhs, bool(lhs <= rhs * (1 + ROUNDING) + tail)


def _random_trig(d: int, support: int, rng: np.random.Generator) -> korobov.SpectralFunction:
    """Real trigonometric polynomial with random coefficients on |h|_inf <= support."""
    grid = korobov.frequency_grid(d, support)
    half = grid.shape[0] // 2
    c = rng.standard_normal(half) + 1j * rng.standard_normal(half)
    amps = np.concatenate([np.conj(c[::-1]), [rng.standard_normal()], c])
    return korobov.SpectralFunction(d, grid, amps)


def audit_doubling(space: korobov.KorobovSpace, g: korobov.SpectralFunction,
                   interp: ip.Interpolant, truncation=korobov.DEFAULT_TRUNCATION,
                   n_dual: int = 20, seed: int = 0, skip_unbounded: bool = False) -> InequalityAudit:
    """Audit one Korobov instance.

    (A) ||g - g_n||_H^2 <= ||g - g_n||_{L2} ||g||_B with slack from the tail
    bounds; (B) Galerkin residuals g(t_k) - g_n(t_k) vanish; the duality
    inequality is checked on ``n_dual`` random trigonometric polynomials f.
    Raises UnboundedB when ||g||_B diverges unless ``skip_unbounded``.
    """
    err = measure.korobov_errors(space, g, interp, truncation)
    res = err["spectral"]
    tg = korobov.spectral_norms(space, g, truncation)
    audit = InequalityAudit(err["l2"], err["h"], tg.b)

    t = interp.nodes.nodes
    gt = np.asarray(g(t)).reshape(-1)
    gal = gt - np.asarray(interp(t)).reshape(-1)
    audit.galerkin_max = float(np.abs(gal).max(initial=0.0))
    audit.galerkin_tol = GALERKIN_TOL * max(1.0, float(np.abs(gt).max(initial=0.0)))
    audit.audit_B = audit.galerkin_max <= audit.galerkin_tol
    if np.all(space.gamma <= 1):
        audit.embedding_ok = bool(err["l2"] - err["l2_bound"]
                                  <= (err["h"] + err["h_bound"]) * (1 + ROUNDING))

    if not math.isfinite(tg.b_tail) or not math.isfinite(tg.b):
        if not skip_unbounded:
            raise UnboundedB("target has a divergent B-norm")
        audit.b_norm = math.inf
        audit.skip_reason = "unbounded B-norm"
        return audit
    _check_A(audit, err["l2"], err["l2_bound"], max(err["h"] - err["h_bound"], res.h),
             tg.b, tg.b_tail)

    rng = rng_for(seed, _AUDIT, interp.nodes.n)
    support = int(min(8, np.min(truncation)))
    worst, ok = 0.0, True
    for _ in range(n_dual):
        f = _random_trig(space.d, support, rng)
        lhs, rhs, good = duality_check(space, f, g, truncation)
        worst = max(worst, lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf))
        ok &= good
    audit.duality_checked = n_dual
    audit.duality_worst = worst
    audit.duality_ok = bool(ok) if n_dual else None
    return audit


# ---------------------------------------------------------------- targets

def spectral_target(space: korobov.KorobovSpace, kind: str, cutoff: int, seed: int = 0,
                    ) -> korobov.SpectralFunction:
    """Real Korobov targets with random signs s(h) = s(-h).

    rough:  g^(h) = +-r(h)^(-(alpha + 1/2 + 0.05) / (2 alpha)), in H but not B
    smooth: g^(h) = +-r(h)^(-(2 alpha + 1/2 + 0.05) / (2 alpha)), in B
    trig:   g^(h) = +-1/2
    all for 1 <= |h|_inf <= cutoff.  In d = 1 with gamma = 1 the first two
    are +-|h|^(-(alpha + 0.55)) and +-|h|^(-(2 alpha + 0.55)).
    """
    a = space.alpha
    power = {"rough": (a + 0.5 + EXCESS) / (2 * a),
             "smooth": (2 * a + 0.5 + EXCESS) / (2 * a),
             "trig": 0.0}
    if kind not in power:
        raise ValueError(f"unknown spectral target {kind!r}")
    grid = korobov.frequency_grid(space.d, cutoff)
    half = grid.shape[0] // 2
    pos = grid[half + 1:]
    mag = 0.5 * np.ones(half) if kind == "trig" else korobov.r_weight(space, pos) ** -power[kind]
    signs = rng_for(seed, _TARGET).choice([-1.0, 1.0], size=half)
    amps = signs * mag
    return korobov.SpectralFunction(space.d, grid,
                                    np.concatenate([amps[::-1], [0.0], amps]))


SINGULAR_POWER = 0.55
_SMOOTH_MIN = Polynomial([0, 0, 1, -2, 1]) * Polynomial([3, -2])  # x^2 (1-x)^2 (3-2x)


def min_kernel_target(kind: str, fine_size: int = 64, seed: int = 0):
    """Targets for the min-kernel space.

    Returns (g, dg, b_norm, synthetic) where synthetic is a SyntheticTarget
    for kernel combinations and None otherwise.  ``rough`` is g(x) = x,
    which violates g'(0) = 0 and so has no finite B-norm.  It is smooth
    inside (0, 1), so its L2 error only comes from the end intervals and
    decays like n^-1.5.  ``singular`` is g(x) = x^0.55, in H but with an
    unbounded derivative at 0, whose L2 error decays at the worst-case
    rate n^-1; its H-error is not measured.
    """
    if kind == "singular":
        return (lambda x: np.asarray(x, dtype=float) ** SINGULAR_POWER,
                lambda x: SINGULAR_POWER * np.asarray(x, dtype=float) ** (SINGULAR_POWER - 1),
                math.inf, None)
    if kind == "rough":
        return (lambda x: np.asarray(x, dtype=float),
                lambda x: np.ones_like(np.asarray(x, dtype=float)), math.inf, None)
    if kind == "smooth":
        p, dp, ddp = _SMOOTH_MIN, _SMOOTH_MIN.deriv(), _SMOOTH_MIN.deriv(2)
        sq = (ddp * ddp).integ()
        return p, dp, math.sqrt(sq(1.0) - sq(0.0)), None
    if kind == "synthetic":
        rng = rng_for(seed, _TARGET)
        fine = ip.PointSet(rng.random(fine_size), "synthetic_fine")
        target = ip.synthetic_target(ip.min_kernel(), fine, rng.standard_normal(fine_size))
        s, c = fine.nodes[:, 0], target.coeffs

        def dg(x):
            x = np.asarray(x, dtype=float)
            return (x[..., None] < s).astype(float) @ c
        return target, dg, math.inf, target
    raise ValueError(f"unknown min-kernel target {kind!r}")


def _franke(X):
    x, y = 9 * X[..., 0], 9 * X[..., 1]
    return (0.75 * np.exp(-((x - 2) ** 2 + (y - 2) ** 2) / 4)
            + 0.75 * np.exp(-(x + 1) ** 2 / 49 - (y + 1) / 10)
            + 0.5 * np.exp(-((x - 7) ** 2 + (y - 3) ** 2) / 4)
            - 0.2 * np.exp(-(x - 4) ** 2 - (y - 7) ** 2))


def rbf_target(kind: str, basis: rbf.CpdBasis, d: int = 2, fine_size: int = 40, seed: int = 0):
    """Targets for RBF sweeps; returns (g, synthetic) with synthetic an RbfFunction or None.

    smooth is Franke's function (d = 2) or a product of cosines; rough is
    ||x - c||^1.5, whose second derivatives are square integrable but whose
    higher ones are not.
    """
    if kind == "smooth":
        if d == 2:
            return _franke, None
        return (lambda X: np.prod(np.cos(2 * np.asarray(X)), axis=-1)), None
    if kind == "rough":
        c = np.full(d, 0.4)
        return (lambda X: np.linalg.norm(np.asarray(X) - c, axis=-1) ** 1.5), None
    if kind == "synthetic":
        rng = rng_for(seed, _TARGET)
        fine = rng.random((fine_size, d))
        coeffs = rbf.project_moments(fine, rng.standard_normal(fine_size), basis.order)
        Q = rbf.monomial_exponents(d, basis.order).shape[0] if basis.order else 0
        f = rbf.RbfFunction(basis, fine, coeffs, rng.standard_normal(Q), d)
        return f, f
    raise ValueError(f"unknown rbf target {kind!r}")


# ---------------------------------------------------------------- sweeps

@dataclass
class StudyReport:
    config: StudyConfig
    triples: list = field(default_factory=list)
    audits: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    fit_notes: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return self.config.label

    @property
    def n_values(self) -> tuple:
        return tuple(t.n for t in self.triples)

    @property
    def audits_passed(self) -> bool:
        return all(a is None or a.passed for a in self.audits)

    def audit_column(self, which: str) -> list:
        out = []
        for a in self.audits:
            if a is None:
                out.append("na")
            elif which == "A":
                out.append("skip" if a.audit_A is None else ("pass" if a.audit_A else "fail"))
            else:
                out.append("pass" if a.audit_B else "fail")
        return out

    def refit(self) -> "StudyReport":
        """Recompute the L2 and H rate fits, honouring flags and the window."""
        window_n = self.config.n_values[-self.config.effective_window:]
        for key in ("l2", "h"):
            pairs = [(t.n, getattr(t, f"{key}_err")) for t, fl in zip(self.triples, self.flags)
                     if not any(f in fl for f in ("failed", "degraded", f"saturated_{key}"))]
            if self.triples and all(t.methods.get(key) == "none" for t in self.triples):
                self.fits[key] = None
                self.fit_notes[key] = "not measured"
                continue
            try:
                self.fits[key] = fit_rate(pairs, window_n)
                self.fit_notes.pop(key, None)
            except DegenerateFit as exc:
                self.fits[key] = None
                self.fit_notes[key] = f"degenerate: {exc}"
        return self


def synthetic_report(n_values, l2_errs, h_errs, config: StudyConfig | None = None) -> StudyReport:
    """A report built from given error sequences (for testing the verdict logic)."""
    config = config or StudyConfig(n_values=tuple(n_values))
    triples = [measure.ErrorTriple(int(n), float(l), float(h), math.inf)
               for n, l, h in zip(n_values, l2_errs, h_errs)]
    rep = StudyReport(config, triples, [None] * len(triples), [()] * len(triples))
    return rep.refit()


def _nodes_for(cfg: StudyConfig, n: int) -> ip.PointSet:
    if cfg.nodes == "random":
        sub = int(rng_for(cfg.seed, _NODES, n).integers(2 ** 62))
        return ip.PointSet.random(n, cfg.d, sub)
    if cfg.nodes == "rank1_lattice":
        z = cfg.z if cfg.z is not None else measure.korobov_generating_vector(n, cfg.d)
        return ip.PointSet.rank1_lattice(z, n)
    # equispaced
    if cfg.setting == "min_kernel":
        return ip.PointSet.equispaced(n, interior=True)
    if cfg.d == 1:
        return ip.PointSet.equispaced(n)
    if cfg.setting == "rbf":
        m = math.isqrt(n)
        if m ** cfg.d != n:
            raise ValueError(f"equispaced rbf nodes need n = m^{cfg.d}, got {n}")
        axes = [np.linspace(0.0, 1.0, m)] * cfg.d
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, cfg.d)
        return ip.PointSet(grid, "tensor_grid")
    raise ValueError("equispaced nodes in d > 1 are not defined for this setting; "
                     "use rank1_lattice")


def _saturation(flags: list, key: str, err: float, bound: float):
    if math.isnan(err):
        return
    if not math.isfinite(err) or err <= ERROR_FLOOR or err < SATURATION_FACTOR * bound:
        flags.append(f"saturated_{key}")


class _Problem:
    """Everything about a sweep that does not depend on n."""

    def __init__(self, cfg: StudyConfig):
        self.cfg = cfg
        if cfg.setting == "korobov":
            self.space = cfg.space()
            self.kernel = ip.korobov_kernel(self.space)
            self.synthetic = None
            if cfg.target in ("rough", "smooth", "trig"):
                self.g = spectral_target(self.space, cfg.target, cfg.effective_cutoff, cfg.seed)
            else:
                rng = rng_for(cfg.seed, _TARGET)
                if cfg.target == "synthetic":
                    fine = ip.PointSet(rng.random((cfg.fine_size, cfg.d)), "synthetic_fine")
                else:
                    fine = _nodes_for(cfg, cfg.n_values[0])
                c = rng.standard_normal(fine.n)
                self.synthetic = ip.synthetic_target(self.kernel, fine, c)
                self.g = korobov.SpectralFunction.kernel_combination(
                    self.space, fine.nodes, c, fine.lattice)
        elif cfg.setting == "min_kernel":
            self.kernel = ip.min_kernel()
            self.g, self.dg, self.b_norm, self.synthetic = min_kernel_target(
                cfg.target, cfg.fine_size, cfg.seed)
        else:
            self.basis = rbf.make_basis(cfg.basis, cfg.basis_param)
            self.g, self.synthetic = rbf_target(cfg.target, self.basis, cfg.d,
                                                cfg.fine_size, cfg.seed)
            self.pspace = None
            if self.synthetic is not None and self.basis.order:
                self.pspace = rbf.PolySpace.from_points(cfg.d, self.basis.order,
                                                        self.synthetic.nodes)

    def run(self, n: int):
        cfg = self.cfg
        flags: list[str] = []
        try:
            pts = _nodes_for(cfg, n)
            method = {"korobov": self._korobov, "min_kernel": self._min_kernel,
                      "rbf": self._rbf}[cfg.setting]
            triple, audit = method(pts, flags)
        except (ip.SolveFailure, rbf.SolveFailure, rbf.NotUnisolvent,
                ip.DuplicatePointsError) as exc:
            log.warning("n = %d failed: %s", n, exc)
            flags.append("failed")
            return measure.ErrorTriple(n, math.nan, math.nan, math.nan), None, tuple(flags)
        _saturation(flags, "l2", triple.l2_err, triple.l2_bound)
        _saturation(flags, "h", triple.h_err, triple.h_bound)
        if audit is not None and audit.audit_A is None:
            flags.append("audit_A_skipped")
        return triple, audit, tuple(flags)

    def _korobov(self, pts, flags):
        cfg, space = self.cfg, self.space
        T = cfg.effective_truncation
        s = ip.fit(self.kernel, pts, self.g(pts.nodes))
        if s.jitter:
            flags.append(f"jitter={s.jitter:g}")
        audit = audit_doubling(space, self.g, s, T, cfg.n_dual, cfg.seed, skip_unbounded=True)
        err = measure.korobov_errors(space, self.g, s, T)
        tg = korobov.spectral_norms(space, self.g, T)
        b, b_tail = (tg.b, tg.b_tail) if math.isfinite(tg.b_tail) else (math.inf, 0.0)
        return measure.ErrorTriple(pts.n, err["l2"], err["h"], b, err["l2_bound"], err["h_bound"],
                                   b_tail, {"l2": err["l2_method"], "h": err["h_method"]}), audit

    def _min_kernel(self, pts, flags):
        cfg = self.cfg
        s = ip.fit(self.kernel, pts, self.g(pts.nodes[:, 0]))
        if s.jitter:
            flags.append(f"jitter={s.jitter:g}")
        breaks = pts.nodes[:, 0]
        if self.synthetic is not None:
            breaks = np.concatenate([breaks, self.synthetic.nodes.nodes[:, 0]])
        l2, l2_b = measure.l2_error_quadrature(self.g, s, 1, cfg.panels, cfg.order, breaks)
        if self.synthetic is not None:
            h, cross = ip.h_error(self.synthetic, s)
            h_b, h_method = abs(h - cross), "gram"
        elif cfg.target == "singular":
            # g' is not bounded at 0; Gauss-Legendre refinement cannot resolve it
            h, h_b, h_method = math.nan, 0.0, "none"
        else:
            h, h_b = measure.min_kernel_h_error(self.g, self.dg, s, cfg.panels, cfg.order)
            h_method = "quadrature"
        audit = audit_min_kernel(self.g, self.dg, self.b_norm, s, (l2, l2_b), (h, h_b),
                                 cfg.n_dual, cfg.seed)
        return measure.ErrorTriple(pts.n, l2, h, self.b_norm, l2_b, h_b, 0.0,
                                   {"l2": "quadrature", "h": h_method}), audit

    def _rbf(self, pts, flags):
        cfg = self.cfg
        vals = np.asarray(self.g(pts.nodes)).reshape(-1)
        s = rbf.fit_rbf(self.basis, pts.nodes, vals)
        if s.degraded:
            flags.append("degraded")
        l2, l2_b = measure.l2_error_quadrature(self.g, s, cfg.d, max(4, cfg.panels // 4), cfg.order)
        h, h_b, h_method = math.nan, 0.0, "none"
        if self.synthetic is not None:
            err = self.synthetic - rbf.RbfFunction(self.basis, s.nodes, s.coeffs, s.poly, s.d)
            h = math.sqrt(max(rbf.native_inner(self.basis, self.pspace, err, err), 0.0))
            h_method = "gram"
        audit = InequalityAudit(l2, h, math.inf, skip_reason="no computable B-norm")
        gal = vals - np.asarray(s(pts.nodes)).reshape(-1)
        audit.galerkin_max = float(np.abs(gal).max(initial=0.0))
        audit.galerkin_tol = GALERKIN_TOL * max(1.0, float(np.abs(vals).max(initial=0.0)))
        audit.audit_B = audit.galerkin_max <= audit.galerkin_tol
        return measure.ErrorTriple(pts.n, l2, h, math.inf, l2_b, h_b, 0.0,
                                   {"l2": "quadrature", "h": h_method}), audit


def audit_min_kernel(g, dg, b_norm: float, interp: ip.Interpolant, l2=None, h=None,
                     n_dual: int = 20, seed: int = 0, panels: int = 32, order: int = 8,
                     ) -> InequalityAudit:
    """Min-kernel counterpart of :func:`audit_doubling`, with quadrature norms.

    ``l2`` and ``h`` are optional precomputed (value, bound) pairs.  Audit A
    is skipped when ``b_norm`` is infinite.  The duality inequality is
    checked on random f = c0 + sum_k (a_k cos(k pi x) + b_k sin(k pi x)).
    """
    t = interp.nodes.nodes[:, 0]
    if l2 is None:
        l2 = measure.l2_error_quadrature(g, interp, 1, panels, order, t)
    if h is None:
        h = measure.min_kernel_h_error(g, dg, interp, panels, order)
    audit = InequalityAudit(l2[0], h[0], b_norm)
    gt = np.asarray(g(t), dtype=float).reshape(-1)
    gal = gt - np.asarray(interp(t)).reshape(-1)
    audit.galerkin_max = float(np.abs(gal).max(initial=0.0))
    audit.galerkin_tol = GALERKIN_TOL * max(1.0, float(np.abs(gt).max(initial=0.0)))
    audit.audit_B = audit.galerkin_max <= audit.galerkin_tol
    # ||f||_L2^2 <= 3/2 ||f||_H^2
    if not math.isnan(h[0]):
        audit.embedding_ok = bool(l2[0] <= math.sqrt(1.5) * (h[0] + h[1]) + l2[1])
    if not math.isfinite(b_norm):
        audit.skip_reason = "unbounded B-norm"
        return audit
    _check_A(audit, l2[0], l2[1], max(h[0] - h[1], 0.0), b_norm, 1e-14 * b_norm)

    rng = rng_for(seed, _AUDIT, t.size)
    x, w = composite_gauss_legendre(0.0, 1.0, panels, order)
    g0 = float(np.asarray(g(np.array(0.0))))
    k = np.arange(1, 5)
    worst, ok = 0.0, True
    for _ in range(n_dual):
        c0, a, b = rng.standard_normal(), rng.standard_normal(4), rng.standard_normal(4)
        cx, sx = np.cos(np.pi * np.outer(x, k)), np.sin(np.pi * np.outer(x, k))
        f = c0 + cx @ a + sx @ b
        df = np.pi * (-sx @ (k * a) + cx @ (k * b))
        lhs = abs((c0 + a.sum()) * g0 + float(w @ (df * np.asarray(dg(x)))))
        rhs = math.sqrt(float(w @ f ** 2)) * b_norm
        worst = max(worst, lhs / rhs if rhs > 0 else 0.0)
        ok &= lhs <= rhs * (1 + 1e-9) + 1e-12
    audit.duality_checked = n_dual
    audit.duality_worst = worst
    audit.duality_ok = bool(ok) if n_dual else None
    return audit


def run_sweep(config: StudyConfig) -> StudyReport:
    """Fit and measure at every n of the sweep, then fit the rates.

    Per-n runs are independent; with ``config.threads > 1`` they run on a
    thread pool and are reassembled in sweep order.  BLAS is pinned to one
    thread so results do not depend on the thread count.
    """
    problem = _Problem(config)
    with threadpool_limits(limits=1):
        if config.threads > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                results = list(pool.map(problem.run, config.n_values))
        else:
            results = [problem.run(n) for n in config.n_values]
    report = StudyReport(config,
                         [r[0] for r in results], [r[1] for r in results],
                         [r[2] for r in results])
    return report.refit()


@dataclass
class Verdict:
    passed: bool
    kappa_smooth_l2: float
    kappa_smooth_h: float
    kappa_rough_l2: float
    deficit_l2: float
    deficit_h: float
    slack: float
    fits: dict
    audits_passed: bool
    notes: list = field(default_factory=list)
    rough_label: str = "rough"


def verdict_pair(reports):
    """(smooth, rough) reports for the doubling verdict, or None.

    ``singular`` is preferred over ``rough`` as the partner when both were run.
    """
    by_target = {r.config.target: r for r in reports}
    rough = by_target.get("singular", by_target.get("rough"))
    if "smooth" not in by_target or rough is None:
        return None
    return by_target["smooth"], rough


def _kappa(report: StudyReport, key: str) -> float:
    fit = report.fits.get(key)
    return fit.kappa if fit is not None else math.nan


def doubling_verdict(report_smooth: StudyReport, report_rough: StudyReport,
                     slack: float | None = None) -> Verdict:
    """Pass iff kappa_smooth >= 2 kappa_rough - slack (L2) and
    kappa_smooth(H) >= kappa_rough - slack.

    The deficits 2 kappa_rough - kappa_smooth and kappa_rough - kappa_smooth(H)
    are reported; a degenerate fit makes the verdict fail.
    """
    cs, cr = report_smooth.config, report_rough.config
    for name in ("setting", "alpha", "gamma", "d", "nodes", "z", "basis", "basis_param"):
        if getattr(cs, name) != getattr(cr, name):
            raise IncompatibleReports(f"reports differ in {name}: "
                                      f"{getattr(cs, name)!r} vs {getattr(cr, name)!r}")
    slack = cs.slack if slack is None else slack
    ks, ksh, kr = _kappa(report_smooth, "l2"), _kappa(report_smooth, "h"), _kappa(report_rough, "l2")
    d_l2, d_h = 2 * kr - ks, kr - ksh
    notes = []
    for label, rep in (("smooth", report_smooth), ("rough", report_rough)):
        notes += [f"{label} {k}: {v}" for k, v in rep.fit_notes.items()]
    passed = bool(d_l2 <= slack and d_h <= slack)
    fits = {"smooth_l2": report_smooth.fits.get("l2"), "smooth_h": report_smooth.fits.get("h"),
            "rough_l2": report_rough.fits.get("l2"), "rough_h": report_rough.fits.get("h")}
    return Verdict(passed, ks, ksh, kr, d_l2, d_h, slack, fits,
                   report_smooth.audits_passed and report_rough.audits_passed, notes,
                   cr.target)


# ---------------------------------------------------------------- identities

@dataclass(frozen=True)
class IdentityCheck:
    name: str
    value: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tol)


def identity_suite(seed: int = 0, n_freqs: int = 10_000, eta_terms: int = 2000) -> list:
    """Exact identities every build must satisfy; each entry is an IdentityCheck.

    r^2 = r_doubled on random frequencies, eta closed form against its
    truncated series, the reproducing property of the min kernel, of the
    Korobov kernel and of the RBF native kernel, and K_Phi(xi_i, .) = 0.
    """
    rng = rng_for(seed, 0x1D)
    out = []

    worst = 0.0
    for d in range(1, 5):
        space = korobov.KorobovSpace.create(rng.choice([1.0, 1.5, 2.0, 3.0]), d,
                                            rng.uniform(0.05, 1.0, d))
        h = rng.integers(-50, 51, size=(n_freqs // 4, d))
        lhs = korobov.r_weight(space, h) ** 2
        rhs = korobov.r_weight(space.doubled(), h)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / rhs)))
    out.append(IdentityCheck("r^2 = r_doubled (relative)", worst, 1e-12))

    t = np.linspace(0.0, 1.0, 1000)
    for alpha in (1, 2, 3):
        series, tail = korobov.eta_series(alpha, t, eta_terms)
        diff = float(np.max(np.abs(korobov.eta(alpha, t) - series)))
        # tail bound plus a rounding allowance for the two summations
        out.append(IdentityCheck(f"eta_{alpha} closed form vs series", diff, tail + 1e-13))

    mk = ip.min_kernel_check()
    out.append(IdentityCheck("min-kernel reproducing property", mk["max_error"], 1e-8))

    space = korobov.KorobovSpace.create(1.0, 2, (1.0, 0.5))
    f = _random_trig(2, 4, rng)
    worst = 0.0
    for x in rng.random((10, 2)):
        section = korobov.SpectralFunction.kernel_combination(space, x[None, :], [1.0])
        val, tail = korobov.inner_product(space, f, section, 8)
        worst = max(worst, abs(val - float(f(x))) - tail)
    out.append(IdentityCheck("Korobov reproducing property", max(worst, 0.0), 1e-10))

    basis = rbf.thin_plate()
    pts = rng.random((30, 2))
    pspace = rbf.PolySpace.from_points(2, basis.order, pts)
    Y = rng.random((50, 2))
    scale = float(np.abs(basis.matrix(pts, pts)).max())
    ann = float(np.abs(rbf.k_phi(basis, pspace, pspace.xi, Y)).max())
    out.append(IdentityCheck("K_Phi(xi_i, .) annihilation", ann, 1e-9 * max(scale, 1.0)))

    coeffs = rbf.project_moments(pts, rng.standard_normal(30), basis.order)
    g = rbf.RbfFunction(basis, pts, coeffs, rng.standard_normal(pspace.Q), 2)
    worst = 0.0
    for x in Y[:10]:
        sec = rbf.kernel_section(basis, pspace, x)
        worst = max(worst, abs(rbf.native_inner(basis, pspace, g, sec) - float(g(x))))
    gscale = max(1.0, float(np.abs(g(Y)).max()))
    out.append(IdentityCheck("RBF native reproducing property", worst, 1e-9 * gscale))
    return out


def audit_batch(space: korobov.KorobovSpace, n_values, trials: int = 100, support: int = 8,
                seed: int = 0, truncation: int | None = None):
    """Audit random finite-support targets at equispaced/lattice nodes.

    Each trial draws a real trigonometric polynomial with a random support
    radius in 1..support.  Returns a list of (trial, n, InequalityAudit).
    """
    T = truncation or max(support, korobov.DEFAULT_TRUNCATION)
    kernel = ip.korobov_kernel(space)
    rng = rng_for(seed, 0xA0D)
    out = []
    for trial in range(trials):
        g = _random_trig(space.d, int(rng.integers(1, support + 1)), rng)
        for n in n_values:
            if space.d == 1:
                pts = ip.PointSet.equispaced(n)
            else:
                pts = ip.PointSet.rank1_lattice(measure.korobov_generating_vector(n, space.d), n)
            s = ip.fit(kernel, pts, g(pts.nodes))
            out.append((trial, n, audit_doubling(space, g, s, T, n_dual=0, seed=seed)))
    return out


def duality_batch(space: korobov.KorobovSpace, pairs: int = 2000, support: int = 8,
                  seed: int = 0):
    """Check |<f, g>_H| <= ||f||_{L2} ||g||_B on random trigonometric pairs.

    Returns (worst lhs/rhs ratio, number of failures).
    """
    rng = rng_for(seed, 0xD0A1)
    worst, failures = 0.0, 0
    for _ in range(pairs):
        f = _random_trig(space.d, int(rng.integers(1, support + 1)), rng)
        g = _random_trig(space.d, int(rng.integers(1, support + 1)), rng)
        lhs, rhs, ok = duality_check(space, f, g, support)
        worst = max(worst, lhs / rhs)
        failures += not ok
    return worst, failures


@dataclass(frozen=True)
class ProjectionCheck:
    """Worst case of the projection identities over a batch of synthetic targets."""

    setting: str
    targets: int
    galerkin_worst: float
    pythagoras_worst: float
    min_gain: float
    failures: int

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _kernel_projection(kernel: ip.KernelSpec, fine: ip.PointSet, coarse: ip.PointSet,
                       rng: np.random.Generator, n_perturb: int):
    target = ip.synthetic_target(kernel, fine, rng.standard_normal(fine.n))
    s = ip.fit(kernel, coarse, target(coarse.nodes))
    pointwise, by_gram = ip.galerkin_residuals(target, s)
    scale = max(1.0, float(np.abs(target(coarse.nodes)).max()))
    gal = max(np.abs(pointwise).max(), np.abs(by_gram).max()) / scale
    fsq = target.norm_sq
    pyth = fsq - s.gram_norm_sq
    direct = ip.direct_h_error_sq(target, coarse, s.coeffs)
    pyth_rel = abs(pyth - direct) / fsq
    gains = []
    for _ in range(n_perturb):
        delta = rng.standard_normal(coarse.n)
        delta *= 1e-2 / np.linalg.norm(delta)
        gains.append(ip.direct_h_error_sq(target, coarse, s.coeffs + delta) - direct)
    return gal, pyth_rel, min(gains)


def projection_suite(targets: int = 50, n_perturb: int = 20, seed: int = 0) -> list:
    """Galerkin orthogonality, Pythagoras and the minimal-norm property on
    random synthetic targets in four settings: Korobov d = 1 and d = 2,
    the min kernel and thin-plate splines in d = 2.

    Returns one ProjectionCheck per setting; a target fails when a Galerkin
    residual exceeds 1e-7 of the data scale, the two H-error formulas differ
    by more than 1e-6 of ||f||^2, or some perturbation does not increase the error.
    """
    rng = rng_for(seed, 0x9A0)
    settings = {
        "korobov_d1": (ip.korobov_kernel(korobov.KorobovSpace.create(1.0, 1)), 1),
        "korobov_d2": (ip.korobov_kernel(korobov.KorobovSpace.create(1.0, 2, (1.0, 0.5))), 2),
        "min_kernel": (ip.min_kernel(), 1),
    }
    out = []
    for name, (kernel, d) in settings.items():
        worst_g, worst_p, min_gain, fails = 0.0, 0.0, math.inf, 0
        for _ in range(targets):
            fine = ip.PointSet(rng.random((int(rng.integers(8, 33)), d)))
            coarse = ip.PointSet(rng.random((int(rng.integers(4, 17)), d)))
            gal, pyth, gain = _kernel_projection(kernel, fine, coarse, rng, n_perturb)
            worst_g, worst_p, min_gain = max(worst_g, float(gal)), max(worst_p, pyth), min(min_gain, gain)
            fails += not (gal <= GALERKIN_TOL and pyth <= 1e-6 and gain > 0)
        out.append(ProjectionCheck(name, targets, worst_g, worst_p, min_gain, fails))

    basis = rbf.thin_plate()
    worst_g, worst_p, min_gain, fails = 0.0, 0.0, math.inf, 0
    for k in range(targets):
        fine = rng.random((40, 2))
        coarse = fine[:12]
        pspace = rbf.PolySpace.from_points(2, basis.order, coarse)
        coeffs = rbf.project_moments(fine, rng.standard_normal(40), basis.order)
        target = rbf.RbfFunction(basis, fine, coeffs, rng.standard_normal(pspace.Q), 2)
        audit = rbf.rbf_projection_audit(basis, pspace, target, coarse, n_perturb, seed + k)
        gal = max(np.abs(audit.galerkin_pointwise).max(),
                  np.abs(audit.galerkin_inner).max()) / audit.scale
        pyth = abs(audit.err_sq_direct - audit.err_sq_pythagoras) / audit.norm_sq_target
        worst_g, worst_p = max(worst_g, float(gal)), max(worst_p, float(pyth))
        min_gain = min(min_gain, float(audit.perturbation_gains.min()))
        fails += not audit.passed
    out.append(ProjectionCheck("thin_plate_d2", targets, worst_g, worst_p, min_gain, fails))
    return out
