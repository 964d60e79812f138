"""Galerkin assembly of linearized elasticity on multi-patch spline domains.

Vector-valued coefficients of a patch are stored component-major: the
coefficient of component ``c`` for scalar basis function ``s`` sits at
``c * n + s`` ("full" local numbering). Homogeneous Dirichlet coefficients
are removed from the local systems, and the remaining ("free") coefficients
are ordered interface block first, interior block second.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from . import bspline
from .geometry import (CORNER_SIDES, LEFT, RIGHT, BOTTOM, TOP, corner_index,
                       side_indices, side_knots, side_param)


class AssemblyError(ValueError):
    pass


class SingularSystemError(ValueError):
    pass


@dataclass(frozen=True)
class Material:
    """Lamé coefficients."""
    mu: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError('mu must be positive')
        if self.lam < 0:
            raise ValueError('lambda must be nonnegative')


@dataclass
class ProblemData:
    """Volume force and Neumann tractions; Dirichlet data are always zero.

    ``body_force(x, y)`` and the traction callables ``g(x, y, nx, ny)`` take
    arrays of equal shape and return an array with a trailing axis of
    length 2. A traction may also be given as a constant 2-vector.
    """
    body_force: object = None
    traction: dict = field(default_factory=dict)


def _gauss(nq):
    return np.polynomial.legendre.leggauss(nq)


def _rule_1d(breakpoints, nq):
    xg, wg = _gauss(nq)
    a, b = breakpoints[:-1, None], breakpoints[1:, None]
    x = 0.5 * (b - a) * xg[None, :] + 0.5 * (b + a)
    w = 0.5 * (b - a) * wg[None, :]
    return x, w          # shape (nspans, nq)


def side_rule(gmap, space, side, nq=None):
    """Gauss rule on one side of a patch.

    Returns:
        dict with physical points ``X`` (m, 2), arc-length weights ``w`` (m,),
        outward unit normals ``normal`` (m, 2), side-basis matrix ``B``
        (m, n_side) and the scalar indices ``idx`` of the side functions.
    """
    if nq is None:
        nq = max(space.degree, gmap.space.degree) + 1
    along = 1 if side in (LEFT, RIGHT) else 0
    kv = side_knots(space, side)
    gkv = gmap.space.kvs[along]
    bp = np.union1d(kv.breakpoints, gkv.breakpoints)
    t, w = _rule_1d(bp, nq)
    t, w = t.ravel(), w.ravel()
    u, v = side_param(side, t)
    if along == 1:
        X, J = gmap.grid_eval(u[:1], v)
        X, J = X[0], J[0]
    else:
        X, J = gmap.grid_eval(u, v[:1])
        X, J = X[:, 0], J[:, 0]
    T = J[:, :, along]
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    speed = np.linalg.norm(T, axis=1)
    rot = np.stack((T[:, 1], -T[:, 0]), axis=1) / speed[:, None]
    sign = 1.0 if side in (RIGHT, BOTTOM) else -1.0
    normal = sign * np.sign(det)[:, None] * rot
    B = bspline.collocation_matrix(kv, t)
    return dict(X=X, w=w * speed, normal=normal, B=B, idx=side_indices(space, side))


class PatchQuadrature:
    """Tensor Gauss rule on one patch with cached basis data.

    The rule uses ``nq`` points per direction on every span of the union of
    displacement and geometry breakpoints; ``nq`` defaults to the largest
    degree involved plus one.
    """

    def __init__(self, gmap, space, nq=None):
        self.gmap = gmap
        self.space = space
        if nq is None:
            nq = max(space.degree, gmap.space.degree) + 1
        self.nq = nq
        n1, n2 = space.dims
        self.n = n1 * n2
        per_dir = []
        for kv, gkv in zip(space.kvs, gmap.space.kvs):
            bp = np.union1d(kv.breakpoints, gkv.breakpoints)
            x, w = _rule_1d(bp, nq)
            first, vals, ders = bspline.eval_basis_many(kv, x.ravel())
            ne = x.shape[0]
            per_dir.append(dict(
                x=x.ravel(), w=w,
                first=first.reshape(ne, nq)[:, 0],
                vals=vals.reshape(ne, nq, -1), ders=ders.reshape(ne, nq, -1)))
        self._dirs = per_dir
        d1, d2 = per_dir
        ne1, ne2 = len(d1['first']), len(d2['first'])
        p1, p2 = d1['vals'].shape[-1], d2['vals'].shape[-1]
        X, J = gmap.grid_eval(d1['x'], d2['x'])
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.any(np.abs(det) < 1e-14) or not (np.all(det > 0) or np.all(det < 0)):
            raise AssemblyError('degenerate or folded geometry map')
        Jinv = np.linalg.inv(J)

        def per_elem(a):
            # (ne1*nq, ne2*nq, ...) -> (nel, nq*nq, ...)
            a = a.reshape((ne1, nq, ne2, nq) + a.shape[2:])
            a = np.moveaxis(a, 2, 1)
            return a.reshape((ne1 * ne2, nq * nq) + a.shape[4:])

        self.points = per_elem(X)
        self.weights = per_elem(np.outer(d1['w'].ravel(), d2['w'].ravel()) * np.abs(det))
        Ji = per_elem(Jinv)
        V1, D1, V2, D2 = d1['vals'], d1['ders'], d2['vals'], d2['ders']

        def tprod(A, B):
            # (ne1,nq,p1),(ne2,nq,p2) -> (nel, nq*nq, p1*p2)
            T = np.einsum('aqi,brj->abqrij', A, B)
            return T.reshape(ne1 * ne2, nq * nq, p1 * p2)

        self.N = tprod(V1, V2)
        du, dv = tprod(D1, V2), tprod(V1, D2)
        gx = Ji[..., 0, 0, None] * du + Ji[..., 1, 0, None] * dv
        gy = Ji[..., 0, 1, None] * du + Ji[..., 1, 1, None] * dv
        self.grads = (gx, gy)
        ii = d1['first'][:, None, None, None] + np.arange(p1)[None, None, :, None]
        jj = d2['first'][None, :, None, None] + np.arange(p2)[None, None, None, :]
        self.dofs = (ii * n2 + jj).reshape(ne1 * ne2, p1 * p2)

    def _scatter(self, loc):
        rows = np.broadcast_to(self.dofs[:, :, None], loc.shape).ravel()
        cols = np.broadcast_to(self.dofs[:, None, :], loc.shape).ravel()
        M = scipy.sparse.coo_matrix((loc.ravel(), (rows, cols)), shape=(self.n, self.n))
        return M.tocsr()

    def gradient_grams(self):
        """Dict ``(a, b) -> Q`` with ``Q[i, j] = int d_a N_i d_b N_j``."""
        out = {}
        for a in range(2):
            for b in range(2):
                loc = np.einsum('eq,eqi,eqj->eij', self.weights, self.grads[a], self.grads[b])
                out[a, b] = self._scatter(loc)
        return out

    def mass(self):
        return self._scatter(np.einsum('eq,eqi,eqj->eij', self.weights, self.N, self.N))

    def load(self, f):
        """``int f . N_i`` as array of shape (2, n)."""
        X = self.points
        fv = np.asarray(f(X[..., 0], X[..., 1]), dtype=float)
        out = np.zeros((2, self.n))
        for c in range(2):
            loc = np.einsum('eq,eq,eqi->ei', self.weights, fv[..., c], self.N)
            np.add.at(out[c], self.dofs.ravel(), loc.ravel())
        return out

    def evaluate(self, coeffs):
        """Values (nel, nqq, 2) and gradients (nel, nqq, 2, 2) of a field.

        ``grad[..., c, a]`` is the derivative of component c in direction a.
        """
        coeffs = np.asarray(coeffs).reshape(2, self.n)
        loc = coeffs[:, self.dofs]               # (2, nel, nloc)
        vals = np.einsum('eqi,cei->eqc', self.N, loc)
        grad = np.stack([np.einsum('eqi,cei->eqc', g, loc) for g in self.grads], axis=-1)
        return vals, grad

    def side_rule(self, side):
        return side_rule(self.gmap, self.space, side, self.nq)

    def traction_load(self, side, g):
        """``int_side g . N_i ds`` as array of shape (2, n)."""
        r = self.side_rule(side)
        X, nrm = r['X'], r['normal']
        if callable(g):
            gv = np.asarray(g(X[:, 0], X[:, 1], nrm[:, 0], nrm[:, 1]), dtype=float)
        else:
            gv = np.broadcast_to(np.asarray(g, dtype=float), X.shape)
        out = np.zeros((2, self.n))
        for c in range(2):
            out[c, r['idx']] += r['B'].T @ (r['w'] * gv[:, c])
        return out


def elasticity_matrix(grams, mu, lam):
    """Full local stiffness matrix from gradient Grams (component-major)."""
    lap = grams[0, 0] + grams[1, 1]
    blocks = [[None, None], [None, None]]
    for c in range(2):
        for d in range(2):
            M = mu * grams[d, c] + lam * grams[c, d]
            if c == d:
                M = M + mu * lap
            blocks[c][d] = M
    return scipy.sparse.bmat(blocks, format='csr')


def strain_gram(grams):
    """Matrix of ``(eps(u), eps(v))``; equals the stiffness for mu = 1/2, lam = 0."""
    return elasticity_matrix(grams, 0.5, 0.0)


def div_gram(grams):
    """Matrix of ``(div u, div v)``."""
    return scipy.sparse.bmat([[grams[0, 0], grams[0, 1]], [grams[1, 0], grams[1, 1]]],
                             format='csr')


def seminorm_gram(grams):
    """Matrix of ``(grad u, grad v)``."""
    lap = grams[0, 0] + grams[1, 1]
    return scipy.sparse.block_diag([lap, lap], format='csr')


def assemble_patch(gmap, space, material, data=None, bc=None, k=None, quad=None):
    """Full (Dirichlet-free) patch matrix and load vector in full local numbering.

    Args:
        bc: optional ``(patch, side) -> tag`` map; with ``k`` it selects the
            sides on which ``data.traction`` is integrated.
    """
    quad = quad or PatchQuadrature(gmap, space)
    A = elasticity_matrix(quad.gradient_grams(), material.mu, material.lam)
    f = np.zeros((2, quad.n))
    if data is not None:
        if data.body_force is not None:
            f += quad.load(data.body_force)
        if bc is not None and data.traction:
            for (kk, side), tag in sorted(bc.items()):
                if kk == k and tag in data.traction:
                    f += quad.traction_load(side, data.traction[tag])
    return A, f.ravel()


class DofMap:
    """Dirichlet elimination, interface/interior splitting and global numbering.

    Per patch ``k``:

    * ``free[k]``: full local indices of the kept coefficients, interface block first;
    * ``n_gamma[k]``: size of the interface block;
    * ``pos[k]``: full local index -> position in ``free[k]`` (or -1);
    * ``global_index[k]``: position in ``free[k]`` -> global coefficient index.

    Global coefficients are numbered component-major, ``c * n_scalar + g``.
    """

    def __init__(self, domain):
        self.domain = domain
        K = domain.num_patches
        sizes = [sp.size for sp in domain.spaces]
        self.sizes = sizes
        dirichlet = [set() for _ in range(K)]
        gamma = [set() for _ in range(K)]
        for (k, side), tag in domain.bc.items():
            if tag == 'dirichlet':
                dirichlet[k].update(side_indices(domain.spaces[k], side).tolist())
        for k, c in domain.dirichlet_vertices:
            dirichlet[k].add(corner_index(domain.spaces[k], c))
        for itf in domain.interfaces:
            gamma[itf.k].update(side_indices(domain.spaces[itf.k], itf.side_k).tolist())
            gamma[itf.l].update(side_indices(domain.spaces[itf.l], itf.side_l).tolist())
        for corner in domain.corners:
            for k, c in corner.members:
                gamma[k].add(corner_index(domain.spaces[k], c))
        self.dirichlet = [np.array(sorted(d), dtype=int) for d in dirichlet]
        self.gamma_scalars = [np.array(sorted(g - d), dtype=int) for g, d in zip(gamma, dirichlet)]
        self.free, self.n_gamma, self.pos = [], [], []
        for k in range(K):
            n = sizes[k]
            gs = self.gamma_scalars[k]
            inner = np.setdiff1d(np.arange(n), np.union1d(gs, self.dirichlet[k]))
            free = np.concatenate([gs, gs + n, inner, inner + n]).astype(int)
            pos = -np.ones(2 * n, dtype=int)
            pos[free] = np.arange(len(free))
            self.free.append(free)
            self.n_gamma.append(2 * len(gs))
            self.pos.append(pos)

        # global scalar numbering via union-find over matched coefficients
        parent = {}

        def find(a):
            while parent.setdefault(a, a) != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

        for itf in domain.interfaces:
            ik = side_indices(domain.spaces[itf.k], itf.side_k)
            il = side_indices(domain.spaces[itf.l], itf.side_l)
            if itf.flipped:
                il = il[::-1]
            for a, b in zip(ik, il):
                union((itf.k, int(a)), (itf.l, int(b)))
        for corner in domain.corners:
            keys = [(k, corner_index(domain.spaces[k], c)) for k, c in corner.members]
            for a in keys[1:]:
                union(keys[0], a)
        label = {}
        scalar_global = []
        for k in range(K):
            dset = set(self.dirichlet[k].tolist())
            g = -np.ones(sizes[k], dtype=int)
            for s in range(sizes[k]):
                if s in dset:
                    continue
                r = find((k, s))
                if r not in label:
                    label[r] = len(label)
                g[s] = label[r]
            scalar_global.append(g)
        self.scalar_global = scalar_global
        self.n_scalar = len(label)
        self.num_global = 2 * self.n_scalar
        self.global_index = []
        for k in range(K):
            n = sizes[k]
            full = self.free[k]
            c, s = full // n, full % n
            self.global_index.append(c * self.n_scalar + scalar_global[k][s])

    @property
    def num_patches(self):
        return len(self.sizes)

    def is_gamma(self, k):
        m = np.zeros(len(self.free[k]), dtype=bool)
        m[:self.n_gamma[k]] = True
        return m

    def expand(self, k, x):
        """Free local vector -> full local coefficients of shape (2, n)."""
        out = np.zeros(2 * self.sizes[k])
        out[self.free[k]] = x
        return out.reshape(2, -1)

    def restrict(self, k, full):
        return np.asarray(full).ravel()[self.free[k]]

    def global_to_patches(self, u):
        """Global coefficient vector -> list of (2, n) patch coefficient arrays."""
        return [self.expand(k, u[self.global_index[k]]) for k in range(self.num_patches)]

    def patches_to_global(self, fields):
        """Average patch coefficients into a global vector (exact for continuous fields)."""
        u = np.zeros(self.num_global)
        cnt = np.zeros(self.num_global)
        for k, fk in enumerate(fields):
            gi = self.global_index[k]
            np.add.at(u, gi, self.restrict(k, fk))
            np.add.at(cnt, gi, 1.0)
        return u / np.maximum(cnt, 1.0)


@dataclass
class LocalSystem:
    """Patch stiffness matrix and load with interface block first.

    ``A`` is the whole free-coefficient matrix; the four blocks are views of it.
    """
    A: scipy.sparse.csr_matrix
    f: np.ndarray
    n_gamma: int

    @property
    def A_GG(self):
        g = self.n_gamma
        return self.A[:g, :g]

    @property
    def A_GI(self):
        g = self.n_gamma
        return self.A[:g, g:]

    @property
    def A_IG(self):
        g = self.n_gamma
        return self.A[g:, :g]

    @property
    def A_II(self):
        g = self.n_gamma
        return self.A[g:, g:]

    @property
    def f_G(self):
        return self.f[:self.n_gamma]

    @property
    def f_I(self):
        return self.f[self.n_gamma:]


def assemble_local(domain, k, material, data=None, dofmap=None):
    """Local system of patch ``k`` (Dirichlet rows/columns removed)."""
    dofmap = dofmap or DofMap(domain)
    A, f = assemble_patch(domain.geometries[k], domain.spaces[k], material, data,
                          domain.bc, k)
    free = dofmap.free[k]
    return LocalSystem(A[free][:, free].tocsr(), f[free], dofmap.n_gamma[k])


def assemble_all(domain, material, data=None, dofmap=None):
    dofmap = dofmap or DofMap(domain)
    return [assemble_local(domain, k, material, data, dofmap)
            for k in range(domain.num_patches)], dofmap


def scatter_global(locals_, dofmap):
    """Sum local systems into the conforming global system."""
    rows, cols, vals = [], [], []
    f = np.zeros(dofmap.num_global)
    for k, ls in enumerate(locals_):
        gi = dofmap.global_index[k]
        A = ls.A.tocoo()
        rows.append(gi[A.row])
        cols.append(gi[A.col])
        vals.append(A.data)
        np.add.at(f, gi, ls.f)
    n = dofmap.num_global
    A = scipy.sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A, f


def assemble_global(domain, material, data=None, dofmap=None):
    """Conforming global stiffness matrix and load vector.

    Raises:
        SingularSystemError: if the domain has no Dirichlet boundary.
    """
    if not domain.has_dirichlet():
        raise SingularSystemError('empty Dirichlet boundary: the global system is singular')
    locals_, dofmap = assemble_all(domain, material, data, dofmap)
    A, f = scatter_global(locals_, dofmap)
    return A, f, dofmap


def interpolate(domain, u, dofmap=None):
    """Coefficients of the spline interpolant of ``u(x, y) -> (..., 2)`` per patch.

    Interpolation at Greville points in the parameter domain; used for
    reproduction tests (exact for fields in the discrete space).
    """
    out = []
    for g, sp in zip(domain.geometries, domain.spaces):
        grev = []
        colloc = []
        for kv in sp.kvs:
            p = kv.degree
            t = np.array([kv.knots[i + 1:i + p + 1].mean() for i in range(kv.numdofs)])
            grev.append(t)
            colloc.append(bspline.collocation_matrix(kv, t))
        X, _ = g.grid_eval(*grev)
        vals = np.asarray(u(X[..., 0], X[..., 1]), dtype=float)
        C1inv, C2inv = (np.linalg.inv(C) for C in colloc)
        coef = np.stack([C1inv @ vals[..., c] @ C2inv.T for c in range(2)])
        out.append(coef.reshape(2, -1))
    return out


def h1_seminorm_error(u_h, u_exact_grad, domain):
    """Broken H1 seminorm of ``u_h - u`` from patch coefficients and the exact gradient.

    ``u_exact_grad(x, y)`` returns an array with trailing shape (2, 2),
    ``[..., c, a] = d u_c / d x_a``. Pass ``None`` for ``|u_h|_{H1}``.
    """
    total = 0.0
    for g, sp, coef in zip(domain.geometries, domain.spaces, u_h):
        q = PatchQuadrature(g, sp)
        _, grad = q.evaluate(coef)
        if u_exact_grad is not None:
            X = q.points
            grad = grad - np.asarray(u_exact_grad(X[..., 0], X[..., 1]), dtype=float)
        total += np.einsum('eq,eqca,eqca->', q.weights, grad, grad)
    return float(np.sqrt(total))


def rigid_modes(domain, k, dofmap=None):
    """Coefficient vectors (full local numbering) of the two translations and r = (-y, x)."""
    modes = [lambda x, y: np.stack([np.ones_like(x), np.zeros_like(x)], -1),
             lambda x, y: np.stack([np.zeros_like(x), np.ones_like(x)], -1),
             lambda x, y: np.stack([-y, x], -1)]
    sub = _single_patch_view(domain, k)
    return [interpolate(sub, m)[0].ravel() for m in modes]


def _single_patch_view(domain, k):
    class _View:
        geometries = [domain.geometries[k]]
        spaces = [domain.spaces[k]]
    return _View()
