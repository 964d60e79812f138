"""B-spline basics: open knot vectors, Cox-de Boor values and refinement.

Run with ``python3 demos/bspline_basics.py``.
"""
import numpy as np

from igaieti.bspline import (collocation_matrix, eval_basis, knot_insertion_matrix, make_knots,
                             make_uniform_space)

# A quadratic knot vector on two uniform refinements of [0, 1]
kv = make_knots(2, 2)
print('knots:', kv.knots)
print('number of basis functions:', kv.numdofs)

# Only p + 1 functions are nonzero at a point, and they sum to one
first, vals = eval_basis(kv, 0.3)
print('nonzero at x = 0.3: functions %d..%d, values %s, sum %.15f'
      % (first, first + len(vals) - 1, np.round(vals, 4), vals.sum()))

# Refinement nests the spaces: a coarse spline is reproduced exactly on the fine grid
fine = kv.refine()
T = knot_insertion_matrix(kv, fine)
coef = np.random.default_rng(0).standard_normal(kv.numdofs)
xs = np.linspace(0, 1, 7)
coarse_vals = collocation_matrix(kv, xs) @ coef
fine_vals = collocation_matrix(fine, xs) @ (T @ coef)
print('max difference after knot insertion: %.1e' % np.abs(coarse_vals - fine_vals).max())

# Tensor-product spaces index the scalar basis as i * n2 + j
space = make_uniform_space(3, 1)
print('cubic tensor space dims', space.dims, 'size', space.size, 'h', space.h_max)
