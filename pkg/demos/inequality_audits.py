"""Audits of the inequalities behind rate doubling.

For a target g in the doubled space and its interpolant g_n,

    ||g - g_n||_H^2 <= ||g - g_n||_L2 ||g||_B,

and the duality bound |<f, g>_H| <= ||f||_L2 ||g||_B holds for all f.  This
script checks both on random trigonometric polynomials and shows one
instance in detail.

    python demos/inequality_audits.py
"""
from ratedouble import interp as ip
from ratedouble import study
from ratedouble.korobov import KorobovSpace, SpectralFunction

space = KorobovSpace.create(1.0, 1)

# cos(2 pi 5 x) at four points: every frequency aliases, the errors are large
g = SpectralFunction.from_coefficients({5: 0.5, -5: 0.5})
pts = ip.PointSet.equispaced(4)
s = ip.fit(ip.korobov_kernel(space), pts, g(pts.nodes))
a = study.audit_doubling(space, g, s, 4096)
print("cos(10 pi x), n = 4")
print(f"  ||g - g_n||_H^2 = {a.lhs_A:.4f} <= ||g - g_n||_L2 ||g||_B = {a.rhs_A:.4f}")
print(f"  Galerkin residual {a.galerkin_max:.1e}, duality worst ratio {a.duality_worst:.3f}")

results = study.audit_batch(space, (4, 8, 16, 32), trials=100)
worst = max(r.lhs_A / r.rhs_A for *_, r in results if r.rhs_A > 0)
passed = sum(r.passed for *_, r in results)
print(f"\n{passed}/{len(results)} random instances pass; worst lhs/rhs {worst:.3f}")
ratio, failures = study.duality_batch(space, pairs=2000)
print(f"duality on 2000 random pairs: {failures} failures, worst ratio {ratio:.3f}")
