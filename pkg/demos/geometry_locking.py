"""Bending of an end-loaded cantilever under refinement.

Low degree splines are too stiff on coarse grids; raising the degree removes
most of the error even on the coarsest grid.

Run with ``python3 demos/geometry_locking.py`` (about half a minute).
"""
from igaieti.studies import ExperimentConfig, run_bending

cfg = ExperimentConfig(K=(10,), degree=(1, 2, 3), levels=(1, 2, 3, 4))
rep = run_bending(cfg)
ref = run_bending(ExperimentConfig(K=(10,), degree=(4,), levels=(5,))).rows[0][2]
print('reference displacement (p=4, l=5): %.6e' % ref)
print(' p  l   bending        fraction of reference')
for p, l, b, it in rep.rows:
    print('%2d %2d   %.6e   %.4f' % (p, l, b, b / ref))
