"""Thin-plate spline interpolation in the unit square.

Checks the structure that makes RBF interpolation an orthogonal
projection in the native space, then reports L2 rates for a smooth and a
rough target at random nodes.  There is no computable norm for the
smoother subspace here, so the rates are shown, not judged.

    python demos/rbf_thin_plate.py
"""
import numpy as np

from ratedouble import rbf, study

rng = np.random.default_rng(1)
basis = rbf.thin_plate()

# a target in the span of 40 shifted kernels, projected onto 12 of them
fine = rng.random((40, 2))
coarse = fine[:12]
pspace = rbf.PolySpace.from_points(2, basis.order, coarse)
coeffs = rbf.project_moments(fine, rng.standard_normal(40), basis.order)
target = rbf.RbfFunction(basis, fine, coeffs, rng.standard_normal(pspace.Q), 2)
audit = rbf.rbf_projection_audit(basis, pspace, target, coarse)
print("projection audit")
print(f"  Galerkin residuals    {np.abs(audit.galerkin_inner).max():.2e}")
print(f"  |f - s|^2 direct      {audit.err_sq_direct:.10f}")
print(f"  |f|^2 - |s|^2         {audit.err_sq_pythagoras:.10f}")
print(f"  perturbations worse   {int(np.sum(audit.perturbation_gains > 0))}/"
      f"{audit.perturbation_gains.size}")
print(f"  L2 and calL2 errors   {audit.l2_err:.4e}, {audit.calL2_err:.4e}")

ns = (16, 32, 64, 128, 256)
for kind in ("smooth", "rough"):
    rep = study.run_sweep(study.StudyConfig(setting="rbf", d=2, nodes="random", target=kind,
                                            n_values=ns))
    errs = ", ".join(f"{t.l2_err:.2e}" for t in rep.triples)
    print(f"\n{kind}: L2 errors {errs}")
    print(f"  fitted rate {rep.fits['l2'].kappa:.2f}")
