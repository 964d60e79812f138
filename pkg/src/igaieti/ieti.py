"""Dual-primal tearing and interconnecting solver for multi-patch elasticity.

Each patch keeps its own copy of the interface coefficients. Continuity is
enforced in two ways:

* primal constraints (corner values, optionally edge averages of the normal
  component or of both components) are enforced exactly through a small
  global coarse problem built from an energy-minimizing primal basis;
* all other matched interface coefficients are glued by Lagrange
  multipliers, one per coefficient pair.

The multiplier system ``F lam = g`` is solved by PCG with the scaled
Dirichlet preconditioner; the displacement is recovered patch by patch.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

from . import linalg
from .assembly import DofMap, assemble_all, side_rule
from .geometry import corner_index, side_indices

PRIMAL_MODES = ('corners', 'corners+normal_averages', 'corners+edge_averages')


class ConfigurationError(ValueError):
    """Local or coarse systems are singular for the chosen primal constraints."""


class ConvergenceError(RuntimeError):
    def __init__(self, msg, report):
        super().__init__(msg)
        self.report = report


@dataclass(frozen=True)
class PrimalConfig:
    mode: str = 'corners'

    def __post_init__(self):
        if self.mode not in PRIMAL_MODES:
            raise ValueError('unknown primal mode %r (choose from %s)'
                             % (self.mode, ', '.join(PRIMAL_MODES)))

    @property
    def normal_averages(self):
        return self.mode == 'corners+normal_averages'

    @property
    def edge_averages(self):
        return self.mode == 'corners+edge_averages'


@dataclass(frozen=True)
class PrimalDof:
    kind: str           # 'corner', 'normal' or 'edge'
    ref: int            # corner index or interface index
    component: int = -1


@dataclass
class PrimalConstraints:
    """Per patch: ``C[k]`` (local primal dofs x interface block) and ``R[k]``
    (global primal index of each local row)."""
    dofs: list
    C: list
    R: list

    @property
    def num_primal(self):
        return len(self.dofs)


def _edge_weights(domain, dofmap, k, side, normal_sign=None):
    """Weights of ``|E|^-1 int_E u_c ds`` (or of the normal component) on patch k's Γ block.

    Returns a list with one weight vector per row; for the normal average a
    single row using ``normal_sign * (outward normal of patch k)``.
    """
    r = side_rule(domain.geometries[k], domain.spaces[k], side)
    length = r['w'].sum()
    n = dofmap.sizes[k]
    ng = dofmap.n_gamma[k]
    base = (r['B'] * r['w'][:, None]).T / length          # (n_side, m)
    rows = []
    comps = [(0, None), (1, None)] if normal_sign is None else [(None, normal_sign)]
    for c, sgn in comps:
        w = np.zeros(ng)
        for cc in range(2):
            if c is not None and cc != c:
                continue
            vals = base.sum(axis=1) if sgn is None else base @ (sgn * r['normal'][:, cc])
            pos = dofmap.pos[k][cc * n + r['idx']]
            keep = pos >= 0
            assert np.all(pos[keep] < ng)
            w[pos[keep]] += vals[keep]
        rows.append(w)
    return rows


def build_primal_constraints(domain, dofmap, config=PrimalConfig()):
    """Primal functionals per patch in terms of the interface coefficients.

    Corner rows select single coefficients (open knot vectors interpolate at
    the patch corners). Edge and normal averages are integrated with the
    side Gauss rule; the normal average uses the outward normal of the
    lower-indexed patch on both sides of the interface.
    """
    K = domain.num_patches
    dofs = []
    rows = [[] for _ in range(K)]     # (global primal index, weight vector)
    for j, corner in enumerate(domain.corners):
        for c in range(2):
            gidx = len(dofs)
            dofs.append(PrimalDof('corner', j, c))
            for k, lc in corner.members:
                n = dofmap.sizes[k]
                p = dofmap.pos[k][c * n + corner_index(domain.spaces[k], lc)]
                if not 0 <= p < dofmap.n_gamma[k]:
                    raise AssertionError('corner coefficient is not an interface dof')
                w = np.zeros(dofmap.n_gamma[k])
                w[p] = 1.0
                rows[k].append((gidx, w))
    if config.mode != 'corners':
        for i, itf in enumerate(domain.interfaces):
            if config.normal_averages:
                gidx = len(dofs)
                dofs.append(PrimalDof('normal', i))
                rows[itf.k].append((gidx, _edge_weights(domain, dofmap, itf.k, itf.side_k, 1.0)[0]))
                rows[itf.l].append((gidx, _edge_weights(domain, dofmap, itf.l, itf.side_l, -1.0)[0]))
            else:
                wk = _edge_weights(domain, dofmap, itf.k, itf.side_k)
                wl = _edge_weights(domain, dofmap, itf.l, itf.side_l)
                for c in range(2):
                    gidx = len(dofs)
                    dofs.append(PrimalDof('edge', i, c))
                    rows[itf.k].append((gidx, wk[c]))
                    rows[itf.l].append((gidx, wl[c]))
    C, R = [], []
    for k in range(K):
        rk = sorted(rows[k], key=lambda t: t[0])
        ng = dofmap.n_gamma[k]
        if rk:
            C.append(scipy.sparse.csr_matrix(np.array([w for _, w in rk])))
        else:
            C.append(scipy.sparse.csr_matrix((0, ng)))
        R.append(np.array([g for g, _ in rk], dtype=int))
    return PrimalConstraints(dofs, C, R)


@dataclass
class JumpOperator:
    """Signed boolean jump matrices on the interface blocks.

    ``B[k]`` has shape (num_multipliers, n_gamma[k]). ``provenance[m]`` is
    ``(k, pos_k, l, pos_l)``: multiplier m measures ``u_k[pos_k] - u_l[pos_l]``.
    """
    B: list
    provenance: list

    @property
    def num_multipliers(self):
        return len(self.provenance)

    def apply(self, u_gamma):
        """``sum_k B[k] u_gamma[k]``."""
        out = np.zeros(self.num_multipliers)
        for Bk, uk in zip(self.B, u_gamma):
            out += Bk @ uk
        return out


def build_jump_operator(domain, dofmap, config=PrimalConfig()):
    """One multiplier per matched interface coefficient pair that is neither
    a primal corner value nor a Dirichlet coefficient.

    Ordering: interfaces in topology order, then component, then position
    along the edge. The lower patch index gets the +1 sign.
    """
    corner_scalars = [set() for _ in range(domain.num_patches)]
    for corner in domain.corners:
        for k, lc in corner.members:
            corner_scalars[k].add(corner_index(domain.spaces[k], lc))
    prov = []
    for itf in domain.interfaces:
        ik = side_indices(domain.spaces[itf.k], itf.side_k)
        il = side_indices(domain.spaces[itf.l], itf.side_l)
        if itf.flipped:
            il = il[::-1]
        nk, nl = dofmap.sizes[itf.k], dofmap.sizes[itf.l]
        for c in range(2):
            for sk, sl in zip(ik, il):
                if sk in corner_scalars[itf.k] or sl in corner_scalars[itf.l]:
                    continue
                pk = dofmap.pos[itf.k][c * nk + sk]
                pl = dofmap.pos[itf.l][c * nl + sl]
                if pk < 0 or pl < 0:
                    continue
                prov.append((itf.k, int(pk), itf.l, int(pl)))
    nm = len(prov)
    B = []
    for k in range(domain.num_patches):
        rows, cols, vals = [], [], []
        for m, (a, pa, b, pb) in enumerate(prov):
            if a == k:
                rows.append(m); cols.append(pa); vals.append(1.0)
            if b == k:
                rows.append(m); cols.append(pb); vals.append(-1.0)
        B.append(scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(nm, dofmap.n_gamma[k])))
    return JumpOperator(B, prov)


@dataclass
class LocalSaddle:
    """Factorized constrained patch matrix ``[[A, C^T], [C, 0]]`` (C padded on I)."""
    factor: linalg.Factorization
    n_free: int
    n_gamma: int
    C: scipy.sparse.csr_matrix
    R: np.ndarray

    def solve(self, rhs_u, rhs_c=None):
        rhs = np.zeros((self.n_free + len(self.R),) + np.shape(rhs_u)[1:])
        rhs[:self.n_free] = rhs_u
        if rhs_c is not None:
            rhs[self.n_free:] = rhs_c
        return self.factor.solve(rhs)


@dataclass
class IetiOperator:
    """Everything needed to apply ``F`` and the scaled Dirichlet preconditioner."""
    dofmap: DofMap
    locals: list
    primal: PrimalConstraints
    jump: JumpOperator
    saddles: list
    Psi: list                  # per patch (n_free, n_primal_k)
    Phi: list
    A_Pi: np.ndarray
    A_Pi_factor: object
    f_Pi: np.ndarray
    B_Pi: np.ndarray
    A_II_factors: list
    D_inv: list
    _active: list = field(default_factory=list)

    @property
    def num_multipliers(self):
        return self.jump.num_multipliers

    @property
    def num_primal(self):
        return self.primal.num_primal

    def _coarse_solve(self, rhs):
        if self.num_primal == 0:
            return np.zeros_like(rhs)
        return scipy.linalg.cho_solve(self.A_Pi_factor, rhs)

    def apply_F(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = self.B_Pi @ self._coarse_solve(self.B_Pi.T @ lam)
        for k in self._active:
            Bk = self.jump.B[k]
            t = Bk.T @ lam
            sd = self.saddles[k]
            rhs = np.zeros(sd.n_free)
            rhs[:sd.n_gamma] = t
            x = sd.solve(rhs)
            out += Bk @ x[:sd.n_gamma]
        return out

    def apply_MsD(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = np.zeros_like(lam)
        for k in self._active:
            Bk = self.jump.B[k]
            ls = self.locals[k]
            t = self.D_inv[k] * (Bk.T @ lam)
            s = ls.A_GG @ t
            if ls.A.shape[0] > ls.n_gamma:
                s = s - ls.A_GI @ self.A_II_factors[k].solve(ls.A_IG @ t)
            out += Bk @ (self.D_inv[k] * s)
        return out

    def rhs(self):
        """``g = B_Pi A_Pi^-1 f_Pi + sum_k Bbar_k Abar_k^-1 fbar_k``."""
        g = self.B_Pi @ self._coarse_solve(self.f_Pi)
        for k in self._active:
            sd = self.saddles[k]
            x = sd.solve(self.locals[k].f)
            g += self.jump.B[k] @ x[:sd.n_gamma]
        return g

    def recover(self, lam):
        """Patchwise free coefficients from a multiplier vector."""
        x_Pi = self._coarse_solve(self.f_Pi - self.B_Pi.T @ lam)
        out = []
        for k, sd in enumerate(self.saddles):
            rhs = self.locals[k].f.copy()
            rhs[:sd.n_gamma] -= self.jump.B[k].T @ lam
            x = sd.solve(rhs)[:sd.n_free]
            if len(sd.R):
                x = x + self.Psi[k] @ x_Pi[sd.R]
            out.append(x)
        return out


def multiplicities(dofmap):
    """Number of patches holding each interface coefficient, per patch."""
    count = np.zeros(dofmap.num_global)
    for gi in dofmap.global_index:
        np.add.at(count, gi, 1.0)
    return [count[gi[:ng]] for gi, ng in zip(dofmap.global_index, dofmap.n_gamma)]


def build_ieti(domain, locals_, config=PrimalConfig(), dofmap=None):
    """Factorize local saddle systems, build the primal basis and coarse problem.

    Raises:
        ConfigurationError: a local saddle matrix or the coarse matrix is singular.
    """
    dofmap = dofmap or DofMap(domain)
    primal = build_primal_constraints(domain, dofmap, config)
    jump = build_jump_operator(domain, dofmap, config)
    NP = primal.num_primal
    saddles, Psi, Phi, AII = [], [], [], []
    A_Pi = np.zeros((NP, NP))
    f_Pi = np.zeros(NP)
    B_Pi = np.zeros((jump.num_multipliers, NP))
    D_inv = [1.0 / m for m in multiplicities(dofmap)]
    for k, ls in enumerate(locals_):
        nf, ng = ls.A.shape[0], ls.n_gamma
        C = primal.C[k]
        Cpad = scipy.sparse.hstack([C, scipy.sparse.csr_matrix((C.shape[0], nf - ng))]).tocsr()
        Abar = scipy.sparse.bmat([[ls.A, Cpad.T], [Cpad, None]], format='csc') \
            if C.shape[0] else ls.A.tocsc()
        try:
            fac = linalg.Factorization(Abar, context='patch %d' % k)
        except linalg.SingularMatrixError as exc:
            raise ConfigurationError('local saddle system of patch %d is singular; '
                                     'insufficient primal constraints' % k) from exc
        sd = LocalSaddle(fac, nf, ng, C, primal.R[k])
        saddles.append(sd)
        npk = len(sd.R)
        if npk:
            sol = sd.solve(np.zeros((nf, npk)), np.eye(npk))
            Psi_k, Phi_k = sol[:nf], sol[nf:]
            idx = sd.R
            A_Pi[np.ix_(idx, idx)] += Psi_k.T @ (ls.A @ Psi_k)
            f_Pi[idx] += Psi_k.T @ ls.f
            B_Pi[:, idx] += jump.B[k] @ Psi_k[:ng]
        else:
            Psi_k, Phi_k = np.zeros((nf, 0)), np.zeros((0, 0))
        Psi.append(Psi_k)
        Phi.append(Phi_k)
        if nf > ng:
            AII.append(linalg.Factorization(ls.A_II, context='interior of patch %d' % k))
        else:
            AII.append(None)
    A_Pi = 0.5 * (A_Pi + A_Pi.T)
    factor = None
    if NP:
        try:
            factor = scipy.linalg.cho_factor(A_Pi)
        except scipy.linalg.LinAlgError as exc:
            raise ConfigurationError('primal system is not positive definite') from exc
    op = IetiOperator(dofmap, list(locals_), primal, jump, saddles, Psi, Phi,
                      A_Pi, factor, f_Pi, B_Pi, AII, D_inv)
    op._active = [k for k in range(len(locals_)) if jump.B[k].nnz]
    return op


@dataclass
class IetiSolution:
    patch_coefficients: list      # free local coefficients per patch
    u: np.ndarray                 # global conforming coefficients
    report: linalg.PcgReport
    multipliers: np.ndarray

    def patch_fields(self, dofmap):
        return [dofmap.expand(k, x) for k, x in enumerate(self.patch_coefficients)]


def solve(op, tol=1e-6, seed=42, max_it=1000, raise_on_failure=True):
    """PCG on the multiplier system from a seeded random initial guess.

    Raises:
        ConvergenceError: if ``max_it`` is reached (unless ``raise_on_failure``
            is False, in which case the report says ``converged=False``).
    """
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(op.num_multipliers)
    lam, report = linalg.pcg(op.apply_F, op.apply_MsD, op.rhs(), x0, tol, max_it)
    if not report.converged and raise_on_failure:
        raise ConvergenceError('PCG did not converge in %d iterations' % max_it, report)
    parts = op.recover(lam)
    dm = op.dofmap
    u = dm.patches_to_global([dm.expand(k, x) for k, x in enumerate(parts)])
    return IetiSolution(parts, u, report, lam)


def setup(domain, material, data=None, config=PrimalConfig()):
    """Assemble all local systems and build the operator."""
    locals_, dofmap = assemble_all(domain, material, data)
    return build_ieti(domain, locals_, config, dofmap)


def jump_norm(op, parts):
    """Euclidean norm of ``sum_k B_k u_Gamma^(k)`` for patchwise coefficients."""
    return float(np.linalg.norm(op.jump.apply([x[:ng] for x, ng in zip(parts, op.dofmap.n_gamma)])))
