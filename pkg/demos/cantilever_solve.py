"""A multi-patch cantilever solved by IETI-DP and checked against a direct solve.

Run with ``python3 demos/cantilever_solve.py``.
"""
import numpy as np
import scipy.sparse.linalg as spla

from igaieti import ieti
from igaieti.assembly import Material, ProblemData, assemble_global, h1_seminorm_error
from igaieti.geometry import make_cantilever

# Eight unit-square patches, clamped at x = 0, pulled down at the free end
K, p, l = 8, 2, 3
dom = make_cantilever(K).discretize(p, l)
material = Material(mu=1.0, lam=1.0)
data = ProblemData(traction={'neumann_load': (0.0, -1.0)})

for mode in ieti.PRIMAL_MODES:
    op = ieti.setup(dom, material, data, ieti.PrimalConfig(mode))
    sol = ieti.solve(op, tol=1e-8)
    r = sol.report
    print('%-24s primal %3d  multipliers %4d  iterations %3d  kappa %.2f'
          % (mode, op.num_primal, op.num_multipliers, r.iterations, r.kappa))

# The torn and reconnected solution agrees with the monolithic one
A, f, dm = assemble_global(dom, material, data)
ref = dm.global_to_patches(spla.spsolve(A.tocsc(), f))
got = dm.global_to_patches(sol.u)
rel = h1_seminorm_error([a - b for a, b in zip(got, ref)], None, dom) / h1_seminorm_error(ref, None, dom)
print('relative H1 difference to the direct solve: %.1e' % rel)
print('jump across interfaces: %.1e' % ieti.jump_norm(op, sol.patch_coefficients))

# Refining the patches raises kappa only slowly
for l in (2, 3, 4):
    op = ieti.setup(make_cantilever(K).discretize(p, l), material, data)
    print('level %d: kappa %.2f' % (l, ieti.solve(op).report.kappa))
