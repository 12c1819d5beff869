"""Rate doubling for periodic kernel interpolation in one dimension.

Two targets are interpolated at n equispaced points in the Korobov space
with smoothness alpha.  The rough one lies in the space but not in its
"doubled" subspace; the smooth one lies in both.  The L2 error of the
smooth target should decay at about twice the rate of the rough one.

    python demos/korobov_doubling.py [alpha]
"""
import sys

from ratedouble import study

alpha = float(sys.argv[1]) if len(sys.argv) > 1 else 1.0
ns = (16, 32, 64, 128, 256, 512, 1024)

reports = {}
for target in ("rough", "smooth"):
    cfg = study.StudyConfig(setting="korobov", alpha=alpha, target=target, n_values=ns)
    reports[target] = rep = study.run_sweep(cfg)
    print(f"\n{target} target, alpha = {alpha:g}")
    print(f"{'n':>6} {'L2 error':>12} {'H error':>12}")
    for t in rep.triples:
        print(f"{t.n:>6} {t.l2_err:12.4e} {t.h_err:12.4e}")
    print(f"fitted L2 rate {rep.fits['l2'].kappa:.3f}, H rate {rep.fits['h'].kappa:.3f}")

v = study.doubling_verdict(reports["smooth"], reports["rough"])
print(f"\nsmooth L2 rate {v.kappa_smooth_l2:.3f} against twice the rough rate "
      f"{2 * v.kappa_rough_l2:.3f}: {'doubled' if v.passed else 'not doubled'} "
      f"(slack {v.slack})")
