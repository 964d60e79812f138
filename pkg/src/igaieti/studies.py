"""Experiment drivers: iteration/condition tables, Korn scaling, bending,
length independence and manufactured-solution convergence.

Every driver takes an :class:`ExperimentConfig` and returns a
:class:`StudyReport`, a small table that is written as CSV with the
configuration echoed in ``# key=value`` comment lines.
"""
import io
import json
import math
from dataclasses import dataclass, field, fields

import numpy as np
import scipy
import sympy

from . import __version__, ieti, linalg
from .assembly import Material, ProblemData, h1_seminorm_error
from .geometry import (CORNER_PARAMS, make_cantilever, make_strip_grid,
                       read_geometry)
from .korn import korn_global, korn_quotient

STUDIES = ('solve', 'kappa_table', 'korn_scaling', 'bending',
           'length_independence', 'convergence')
BENDING_TOL = 1e-12
CONVERGENCE_TOL = 1e-10


@dataclass
class ExperimentConfig:
    """Parameters shared by all studies.

    ``domain`` is ``'cantilever'``, ``'strip'`` or the path of a geometry
    file. ``K`` lists patch counts along the length; studies that need a
    single domain use its first entry. ``length`` defaults to ``K`` (unit
    square patches for the strip grid).
    """
    domain: str = 'cantilever'
    K: tuple = (8,)
    Ky: int = 1
    length: float = None
    degree: tuple = (2,)
    levels: tuple = (2,)
    mu: float = 1.0
    lam: tuple = (1.0,)
    primal: str = 'corners'
    tol: float = 1e-6
    seed: int = 42
    study: str = 'solve'
    load: float = 1e-5
    max_it: int = 1000

    def __post_init__(self):
        for name in ('K', 'degree', 'levels', 'lam'):
            v = getattr(self, name)
            if np.isscalar(v):
                v = (v,)
            setattr(self, name, tuple(v))

    def validate(self):
        """Raise ValueError on the first invalid field."""
        if self.study not in STUDIES:
            raise ValueError('unknown study %r' % self.study)
        if not self.K or any(int(k) != k or k < 1 for k in self.K):
            raise ValueError('K must be positive integers')
        if self.Ky < 1:
            raise ValueError('Ky must be positive')
        if self.length is not None and not self.length > 0:
            raise ValueError('length must be positive')
        if not self.degree or any(p < 1 for p in self.degree):
            raise ValueError('degree must be at least 1')
        if not self.levels or any(l < 0 for l in self.levels):
            raise ValueError('levels must be nonnegative')
        Material(self.mu, min(self.lam) if self.lam else -1.0)
        ieti.PrimalConfig(self.primal)
        if not self.tol > 0:
            raise ValueError('tol must be positive')
        if self.max_it < 1:
            raise ValueError('max_it must be positive')
        return self

    def material(self, lam=None):
        return Material(self.mu, self.lam[0] if lam is None else lam)

    def problem(self):
        """End load ``(0, -load)`` on the sides tagged ``neumann_load``."""
        return ProblemData(traction={'neumann_load': (0.0, -self.load)})

    def make_domain(self, K=None):
        """Geometry only; use ``.discretize(p, l)`` for displacement spaces."""
        K = self.K[0] if K is None else K
        if self.domain == 'cantilever':
            return make_cantilever(K)
        if self.domain == 'strip':
            return make_strip_grid(K, self.Ky, K if self.length is None else self.length)
        return read_geometry(self.domain)

    def echo(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class StudyReport:
    columns: list
    rows: list
    metadata: dict = field(default_factory=dict)

    def column(self, name):
        j = self.columns.index(name)
        return [r[j] for r in self.rows]

    def to_csv(self):
        out = io.StringIO()
        for key in sorted(self.metadata):
            out.write('# %s=%s\n' % (key, json.dumps(self.metadata[key], sort_keys=True)))
        out.write(','.join(self.columns) + '\n')
        for r in self.rows:
            out.write(','.join(_fmt(v) for v in r) + '\n')
        return out.getvalue()

    @classmethod
    def from_csv(cls, text):
        meta, lines = {}, []
        for line in text.splitlines():
            if line.startswith('# '):
                key, _, val = line[2:].partition('=')
                meta[key] = json.loads(val)
            elif line.strip():
                lines.append(line)
        columns = lines[0].split(',')
        rows = [[_parse(v) for v in line.split(',')] for line in lines[1:]]
        return cls(columns, rows, meta)

    def __eq__(self, other):
        if not isinstance(other, StudyReport):
            return NotImplemented
        return (self.columns == other.columns and _same(self.rows, other.rows)
                and _same(self.metadata, other.metadata))


def _fmt(v):
    if v is None:
        return '-'
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _parse(s):
    if s == '-':
        return None
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def _same(a, b):
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_same(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b


def _metadata(cfg, **extra):
    meta = dict(config=_jsonable(cfg.echo()),
                versions=dict(igaieti=__version__, numpy=np.__version__,
                              scipy=scipy.__version__),
                seed=cfg.seed)
    meta.update(extra)
    return meta


def _jsonable(d):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _solve_cell(cfg, domain, material, data, tol):
    op = ieti.setup(domain, material, data, ieti.PrimalConfig(cfg.primal))
    sol = ieti.solve(op, tol=tol, seed=cfg.seed, max_it=cfg.max_it, raise_on_failure=False)
    return op, sol


def run_solve(cfg):
    """One row per (degree, levels, lambda)."""
    cfg.validate()
    geo = cfg.make_domain()
    rows = []
    for p in cfg.degree:
        for l in cfg.levels:
            dom = geo.discretize(p, l)
            for lam in cfg.lam:
                op, sol = _solve_cell(cfg, dom, cfg.material(lam), cfg.problem(), cfg.tol)
                r = sol.report
                rows.append([p, l, float(lam), r.iterations, r.kappa, op.dofmap.num_global,
                             op.num_multipliers, bool(r.converged)])
    return StudyReport(['p', 'l', 'lambda', 'it', 'kappa', 'dofs', 'multipliers', 'converged'],
                       rows, _metadata(cfg))


def run_kappa_table(cfg):
    """Iterations and condition estimates over degrees and refinement levels.

    Non-converged cells are listed in ``metadata['nonconverged']``.
    """
    cfg.validate()
    geo = cfg.make_domain()
    rows, failed = [], []
    for p in cfg.degree:
        for l in cfg.levels:
            op, sol = _solve_cell(cfg, geo.discretize(p, l), cfg.material(), cfg.problem(), cfg.tol)
            r = sol.report
            if not r.converged:
                failed.append([p, l])
            rows.append([p, l, r.iterations, r.kappa, op.dofmap.num_global, op.num_multipliers])
    return StudyReport(['p', 'l', 'it', 'kappa', 'dofs', 'multipliers'], rows,
                       _metadata(cfg, nonconverged=failed))


def run_length_independence(cfg):
    """Per entry of ``cfg.K``: Korn constant (when below the dense cap), iterations, kappa.

    Uses the first degree and level. ``alpha_inv2`` is ``'-'`` above the cap.
    """
    cfg.validate()
    p, l = cfg.degree[0], cfg.levels[0]
    rows = []
    for K in cfg.K:
        dom = cfg.make_domain(K).discretize(p, l)
        try:
            a = korn_global(dom).alpha
            ainv2 = a ** -2
        except linalg.DenseSizeError:
            ainv2 = None
        op, sol = _solve_cell(cfg, dom, cfg.material(), cfg.problem(), cfg.tol)
        r = sol.report
        rows.append([K, p, l, ainv2, r.iterations, r.kappa, op.dofmap.num_global,
                     op.num_multipliers])
    return StudyReport(['K', 'p', 'l', 'alpha_inv2', 'it', 'kappa', 'dofs', 'multipliers'],
                       rows, _metadata(cfg))


def lower_right_corner(domain):
    """``(patch, local corner, point)`` of the patch corner with largest x, then smallest y."""
    best = None
    for k, g in enumerate(domain.geometries):
        for c in range(4):
            x = g.corner_point(c)
            key = (round(float(x[0]), 10), -round(float(x[1]), 10))
            if best is None or key > best[0]:
                best = (key, k, c, x)
    return best[1], best[2], best[3]


def point_value(domain, dofmap, parts, k, xhat):
    """Displacement of patch k at parameter point ``xhat``."""
    from .bspline import collocation_matrix
    coef = dofmap.expand(k, parts[k])
    b1, b2 = (collocation_matrix(kv, [t])[0] for kv, t in zip(domain.spaces[k].kvs, xhat))
    return np.array([b1 @ coef[c].reshape(len(b1), len(b2)) @ b2 for c in range(2)])


def run_bending(cfg):
    """y-displacement at the lower right corner under the end load, solved to 1e-12."""
    cfg.validate()
    geo = cfg.make_domain()
    k, c, x = lower_right_corner(geo)
    rows = []
    for p in cfg.degree:
        for l in cfg.levels:
            dom = geo.discretize(p, l)
            op, sol = _solve_cell(cfg, dom, cfg.material(), cfg.problem(), BENDING_TOL)
            val = point_value(dom, op.dofmap, sol.patch_coefficients, k, CORNER_PARAMS[c])
            rows.append([p, l, float(val[1]), sol.report.iterations])
    return StudyReport(['p', 'l', 'bending', 'it'], rows,
                       _metadata(cfg, point=[float(x[0]), float(x[1])], tol=BENDING_TOL))


def manufactured(u_expr, mu, lam):
    """Body force, traction and gradient callables for a sympy displacement.

    Args:
        u_expr: pair of sympy expressions in the symbols ``x`` and ``y``.

    Returns:
        (ProblemData, grad) where the traction ``sigma(u) n`` is attached to
        both Neumann tags and ``grad(x, y)[..., c, a] = d u_c / d x_a``.
    """
    x, y = sympy.symbols('x y')
    u = sympy.Matrix(u_expr)
    G = u.jacobian([x, y])
    eps = (G + G.T) / 2
    sig = 2 * mu * eps + lam * eps.trace() * sympy.eye(2)
    f = -sympy.Matrix([sympy.diff(sig[i, 0], x) + sympy.diff(sig[i, 1], y) for i in range(2)])
    nx, ny = sympy.symbols('nx ny')
    g = sig * sympy.Matrix([nx, ny])

    def vec(exprs, args):
        fn = sympy.lambdify(args, list(exprs), 'numpy')

        def call(*a):
            vals = fn(*a)
            return np.stack([np.broadcast_to(np.asarray(v, dtype=float), np.shape(a[0]))
                             for v in vals], -1)
        return call

    gradf = vec(list(G), (x, y))

    def grad(X, Y):
        return gradf(X, Y).reshape(np.shape(X) + (2, 2))

    traction = vec(g, (x, y, nx, ny))
    data = ProblemData(body_force=vec(f, (x, y)),
                       traction={'neumann': traction, 'neumann_load': traction})
    return data, grad


def default_solution():
    x, y = sympy.symbols('x y')
    return (sympy.sin(sympy.pi * x) * sympy.cos(sympy.pi * y),
            sympy.sin(sympy.pi * x / 2) * sympy.sin(sympy.pi * y) + x * y)


def run_convergence(cfg, solution=None):
    """H1-seminorm error of the solver output against a manufactured solution.

    The domain is ``cfg.make_domain()`` (for the default ``strip`` setup a
    2 x 1 split of the unit square); the solution must vanish on the
    clamped sides. Linear systems are solved to 1e-10.
    """
    cfg.validate()
    u_expr = solution or default_solution()
    geo = cfg.make_domain()
    data, grad = manufactured(u_expr, cfg.mu, cfg.lam[0])
    rows = []
    for p in cfg.degree:
        prev = None
        for l in cfg.levels:
            dom = geo.discretize(p, l)
            op, sol = _solve_cell(cfg, dom, cfg.material(), data, CONVERGENCE_TOL)
            err = h1_seminorm_error(sol.patch_fields(op.dofmap), grad, dom)
            order = None if prev is None or err == 0 else math.log2(prev / err)
            rows.append([p, l, err, order, op.dofmap.num_global])
            prev = err
    return StudyReport(['p', 'l', 'error', 'order', 'dofs'], rows,
                       _metadata(cfg, solution=[str(e) for e in u_expr]))


def bending_field_grad(x, y):
    """Gradient of ``v(x, y) = ((2y - 1) x, -x^2)``."""
    return np.stack([np.stack([2 * y - 1, 2 * x], -1),
                     np.stack([-2 * x, np.zeros_like(x)], -1)], -2)


def run_korn_scaling(cfg):
    """Global Korn constants of the clamped domains for each entry of ``cfg.K``.

    Columns: ``alpha``, ``alpha_inv``, ``ratio = alpha_inv / K``, the
    bound ``1/sqrt(1+2K^2)`` and the Korn quotient of the bending field
    ``v = ((2y-1)x, -x^2)`` computed by quadrature. Rows above the dense
    cap carry ``'-'`` and ``skipped=1``.
    """
    cfg.validate()
    p, l = cfg.degree[0], cfg.levels[0]
    rows = []
    for K in cfg.K:
        geo = cfg.make_domain(K)
        dom = geo.discretize(p, l)
        q = korn_quotient(bending_field_grad, dom)
        bound = 1.0 / math.sqrt(1 + 2 * K * K)
        try:
            a = korn_global(dom).alpha
            rows.append([K, p, l, a, 1 / a, 1 / (a * K), bound, q, 0])
        except linalg.DenseSizeError:
            rows.append([K, p, l, None, None, None, bound, q, 1])
    return StudyReport(['K', 'p', 'l', 'alpha', 'alpha_inv', 'ratio', 'analytic_bound',
                        'test_quotient', 'skipped'], rows, _metadata(cfg))


RUNNERS = dict(solve=run_solve, kappa_table=run_kappa_table, korn_scaling=run_korn_scaling,
               bending=run_bending, length_independence=run_length_independence,
               convergence=run_convergence)


def run(cfg):
    return RUNNERS[cfg.validate().study](cfg)
