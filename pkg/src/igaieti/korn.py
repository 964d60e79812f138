"""Discrete Korn constants.

The Korn constant of a displacement space V is

    alpha = inf_{v in V, |v|_H1 > 0} |eps(v)|_L2 / |v|_H1,

so ``alpha**2`` is the smallest eigenvalue of the pencil (strain Gram,
gradient Gram) restricted to V. Two choices of V are supported: the
discrete space with homogeneous Dirichlet values on the clamped sides, and
the space of single-patch fields with vanishing mean curl.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .assembly import (DofMap, LocalSystem, PatchQuadrature, scatter_global,
                       seminorm_gram, strain_gram)


class UndefinedQuotientError(ValueError):
    pass


@dataclass
class KornEstimate:
    """Result of a discrete Korn constant computation.

    Attributes:
        alpha: the constant, in (0, 1].
        dims: dimension of the constrained space.
        constraint: ``'dirichlet'`` or ``'zero_mean_curl'``.
        field: coefficient vector of a minimizing field (full numbering of
            the underlying Gram matrices).
    """
    alpha: float
    dims: int
    constraint: str
    field: np.ndarray

    @property
    def inverse(self):
        return 1.0 / self.alpha


def korn_quotient(u_grad, domain, nq=None):
    """``|eps(u)|_L2 / |u|_H1`` for a field given by its gradient.

    Args:
        u_grad: callable ``(x, y) -> array (..., 2, 2)`` with
            ``[..., c, a] = d u_c / d x_a``.
        domain: anything with ``geometries`` and ``spaces``; the spaces
            only determine the quadrature partition.

    Raises:
        UndefinedQuotientError: if ``|u|_H1 = 0``.
    """
    num = den = 0.0
    for g, sp in zip(domain.geometries, domain.spaces):
        q = PatchQuadrature(g, sp, nq)
        X = q.points
        G = np.asarray(u_grad(X[..., 0], X[..., 1]), dtype=float)
        eps = 0.5 * (G + np.swapaxes(G, -1, -2))
        num += np.einsum('eq,eqca,eqca->', q.weights, eps, eps)
        den += np.einsum('eq,eqca,eqca->', q.weights, G, G)
    if den <= 0.0:
        raise UndefinedQuotientError('|u|_H1 vanishes; the Korn quotient is undefined')
    return float(np.sqrt(num / den))


def global_grams(domain, dofmap=None):
    """Strain Gram and gradient Gram on the conforming Dirichlet-constrained space."""
    dofmap = dofmap or DofMap(domain)
    E_loc, H_loc = [], []
    for k, (g, sp) in enumerate(zip(domain.geometries, domain.spaces)):
        grams = PatchQuadrature(g, sp).gradient_grams()
        free = dofmap.free[k]
        z = np.zeros(len(free))
        E_loc.append(LocalSystem(strain_gram(grams)[free][:, free], z, dofmap.n_gamma[k]))
        H_loc.append(LocalSystem(seminorm_gram(grams)[free][:, free], z, dofmap.n_gamma[k]))
    E, _ = scatter_global(E_loc, dofmap)
    H, _ = scatter_global(H_loc, dofmap)
    return E, H, dofmap


def korn_global(domain):
    """Korn constant of the discrete space with clamped Dirichlet sides.

    Raises:
        linalg.DefinitenessError: the gradient Gram is singular (no Dirichlet sides).
        linalg.DenseSizeError: dimension above :data:`linalg.DENSE_CAP`.
    """
    E, H, dofmap = global_grams(domain)
    if E.shape[0] > linalg.DENSE_CAP:
        raise linalg.DenseSizeError('Korn eigenproblem of size %d exceeds cap %d'
                                    % (E.shape[0], linalg.DENSE_CAP))
    w, V = linalg.dense_sym_eig(E, H, vectors=True, subset=(0, 0))
    return KornEstimate(_alpha(w[0]), E.shape[0], 'dirichlet', V[:, 0])


def curl_functional(quad):
    """Vector ``c`` with ``c . v = int (d_x v_2 - d_y v_1)`` (full numbering)."""
    gx, gy = quad.grads
    n = quad.n
    c = np.zeros(2 * n)
    loc_x = np.einsum('eq,eqi->ei', quad.weights, gx)
    loc_y = np.einsum('eq,eqi->ei', quad.weights, gy)
    np.add.at(c, n + quad.dofs.ravel(), loc_x.ravel())
    np.add.at(c, quad.dofs.ravel(), -loc_y.ravel())
    return c


def translation_vectors(n):
    t1 = np.concatenate([np.ones(n), np.zeros(n)])
    t2 = np.concatenate([np.zeros(n), np.ones(n)])
    return t1, t2


def patch_grams(gmap, space):
    """``(E, H, c)``: strain Gram, gradient Gram and curl functional of one patch."""
    quad = PatchQuadrature(gmap, space)
    grams = quad.gradient_grams()
    return strain_gram(grams), seminorm_gram(grams), curl_functional(quad)


def korn_local_curlfree(gmap, space):
    """Korn constant of a floating patch on fields with vanishing mean curl.

    Translations lie in the kernel of both Grams and do not change the
    quotient; they are removed together with the curl constraint by
    restricting to the orthogonal complement of ``span{c, t1, t2}``.

    Raises:
        linalg.DenseSizeError: dimension above :data:`linalg.DENSE_CAP`.
    """
    n = space.size
    if 2 * n > linalg.DENSE_CAP:
        raise linalg.DenseSizeError('Korn eigenproblem of size %d exceeds cap %d'
                                    % (2 * n, linalg.DENSE_CAP))
    E, H, c = patch_grams(gmap, space)
    t1, t2 = translation_vectors(n)
    Z = scipy.linalg.null_space(np.vstack([c, t1, t2]))
    Er = Z.T @ (E @ Z)
    Hr = Z.T @ (H @ Z)
    w, V = linalg.dense_sym_eig(0.5 * (Er + Er.T), 0.5 * (Hr + Hr.T), vectors=True, subset=(0, 0))
    return KornEstimate(_alpha(w[0]), Z.shape[1], 'zero_mean_curl', Z @ V[:, 0])


def _alpha(theta):
    # roundoff can push the eigenvalue slightly outside [0, 1]
    return float(np.sqrt(min(max(theta, 0.0), 1.0)))
