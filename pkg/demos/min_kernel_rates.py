"""Interpolation with K(x, y) = 1 + min(x, y) on [0, 1].

The native space holds functions with a square-integrable derivative; the
smoother subspace B also asks for g(0) = g'(0) = g'(1) = 0.  Three targets
at interior nodes k/(n+1):

* x^2 (1-x)^2 (3-2x), in B: L2 error ~ n^-2
* x^0.55, in the space but not in B: L2 error ~ n^-1, the worst case
* x, which breaks g'(0) = 0: it is smooth inside (0, 1), so only the end
  intervals contribute and the L2 error decays like n^-1.5

    python demos/min_kernel_rates.py
"""
from ratedouble import study

ns = (8, 16, 32, 64, 128, 256, 512)
reports = []
for target in ("smooth", "singular", "rough"):
    rep = study.run_sweep(study.StudyConfig(setting="min_kernel", target=target, n_values=ns))
    reports.append(rep)
    l2 = rep.fits["l2"]
    h = rep.fits["h"]
    h_text = f"{h.kappa:.3f}" if h is not None else rep.fit_notes["h"]
    print(f"{target:>9}: L2 rate {l2.kappa:.3f}, H rate {h_text}, "
          f"audits {'pass' if rep.audits_passed else 'FAIL'}")

v = study.doubling_verdict(*study.verdict_pair(reports))
print(f"\ndoubling against x^0.55: deficit {v.deficit_l2:+.3f} (L2), {v.deficit_h:+.3f} (H); "
      f"{'pass' if v.passed else 'fail'}")
