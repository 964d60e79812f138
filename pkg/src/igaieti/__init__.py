"""Isogeometric multi-patch linear elasticity with a dual-primal tearing and
interconnecting (IETI-DP) solver, and discrete Korn constants."""
from .bspline import (KnotVector, TensorSplineSpace, eval_basis, make_knots,
                      make_uniform_space, uniform_refine)
from .geometry import (GeometryMap, MultiPatchDomain, build_topology, geometry_report,
                       make_cantilever, make_strip_grid, read_geometry, write_geometry)
from .assembly import (DofMap, LocalSystem, Material, ProblemData, assemble_global,
                       assemble_local, h1_seminorm_error)
from .linalg import PcgReport, dense_sym_eig, factorize, pcg
from .ieti import PrimalConfig, build_ieti, setup, solve
from .korn import KornEstimate, korn_global, korn_local_curlfree, korn_quotient

__version__ = '0.1.0'
