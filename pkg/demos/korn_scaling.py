"""Korn constants of long thin domains.

The global constant of a cantilever of length K decays like 1 / K, which is
what makes slender structures hard for solvers whose bounds involve it. The
bending field v = ((2y - 1) x, -x^2) shows why: its strain is small compared
to its gradient.

Run with ``python3 demos/korn_scaling.py``.
"""
import numpy as np

from igaieti.bspline import make_uniform_space
from igaieti.geometry import make_cantilever, rectangle_map
from igaieti.korn import korn_global, korn_local_curlfree, korn_quotient
from igaieti.studies import bending_field_grad

print(' K   alpha^-1   sqrt(1+8K^2)   ratio to previous')
prev = None
for K in (1, 2, 4, 8):
    inv = korn_global(make_cantilever(K).discretize(2, 2)).inverse
    bound = 1 / korn_quotient(bending_field_grad, make_cantilever(K))
    ratio = '' if prev is None else '%.3f' % (inv / prev)
    print('%2d   %8.3f   %12.3f   %s' % (K, inv, bound, ratio))
    prev = inv

# Local constant with zero mean curl and translations removed, for stretched patches
sp = make_uniform_space(2, 2)
for L in (1, 2, 4):
    print('patch (0,%d)x(0,1): local alpha %.3f' % (L, korn_local_curlfree(rectangle_map(0, L, 0, 1), sp).alpha))
