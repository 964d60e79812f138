"""Univariate and tensor-product B-spline spaces.

Only open knot vectors on [0, 1] are supported. Basis functions are
evaluated with the Cox-de Boor recursion in the triangular form that
produces all ``p+1`` nonzero functions at a point at once.
"""
import numpy as np


class KnotVector:
    """An open knot vector on [0, 1] together with a spline degree.

    Args:
        degree (int): spline degree ``p >= 1``.
        knots (array_like): nondecreasing knots; first and last knot repeated
            exactly ``p+1`` times, interior multiplicity at most ``p``.
    """

    def __init__(self, degree, knots):
        p = int(degree)
        kv = np.asarray(knots, dtype=float)
        if p < 1:
            raise ValueError('degree must be at least 1')
        if kv.ndim != 1 or len(kv) < 2 * (p + 1):
            raise ValueError('knot vector too short for degree %d' % p)
        if np.any(np.diff(kv) < 0):
            raise ValueError('knots must be nondecreasing')
        if kv[0] != 0.0 or kv[-1] != 1.0:
            raise ValueError('knots must span [0, 1]')
        if np.count_nonzero(kv == 0.0) != p + 1 or np.count_nonzero(kv == 1.0) != p + 1:
            raise ValueError('knot vector is not %d-open' % p)
        _, mult = np.unique(kv[p + 1:-(p + 1)], return_counts=True)
        if len(mult) and mult.max() > p:
            raise ValueError('interior knot multiplicity exceeds the degree')
        kv.setflags(write=False)
        self.degree = p
        self.knots = kv

    def __repr__(self):
        return 'KnotVector(%d, %s)' % (self.degree, self.knots.tolist())

    def __eq__(self, other):
        return (isinstance(other, KnotVector) and self.degree == other.degree
                and np.array_equal(self.knots, other.knots))

    def __hash__(self):
        return hash((self.degree, self.knots.tobytes()))

    @property
    def numdofs(self):
        """Number of basis functions, ``N - p`` for ``N+1`` knots."""
        return len(self.knots) - self.degree - 1

    @property
    def breakpoints(self):
        return np.unique(self.knots)

    @property
    def numspans(self):
        return len(self.breakpoints) - 1

    def spans(self):
        """Nonzero knot span lengths."""
        return np.diff(self.breakpoints)

    def reversed(self):
        """Knot vector of the reflected parametrization ``t -> 1 - t``."""
        return KnotVector(self.degree, (1.0 - self.knots[::-1]) + 0.0)

    def findspan(self, x):
        """Index ``i`` with ``knots[i] <= x < knots[i+1]``; x = 1 maps to the last nonempty span."""
        x = np.asarray(x, dtype=float)
        if np.any((x < 0.0) | (x > 1.0)):
            raise ValueError('evaluation point outside [0, 1]')
        p = self.degree
        i = np.searchsorted(self.knots, x, side='right') - 1
        return np.clip(i, p, self.numdofs - 1)

    def refine(self):
        """Bisect every nonzero span."""
        bp = self.breakpoints
        mids = 0.5 * (bp[:-1] + bp[1:])
        return KnotVector(self.degree, np.sort(np.concatenate((self.knots, mids))))


def make_knots(degree, levels):
    """Open uniform knot vector with ``2**levels`` spans and simple interior knots."""
    if levels < 0:
        raise ValueError('levels must be nonnegative')
    n = 2 ** levels
    interior = np.arange(1, n) / n
    return KnotVector(degree, np.concatenate(([0.0] * (degree + 1), interior, [1.0] * (degree + 1))))


def _basis_at_span(kv, span, x, deriv):
    # NURBS-book style triangular table; returns values (and first derivatives)
    p = kv.degree
    t = kv.knots
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    ndu = np.zeros((p + 1, p + 1))
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = x - t[span + 1 - j]
        right[j] = t[span + j] - x
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            tmp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * tmp
            saved = left[j - r] * tmp
        ndu[j, j] = saved
    vals = ndu[:, p].copy()
    if deriv == 0:
        return vals
    # first derivative: p * (N_{i,p-1}/(t_{i+p}-t_i) - N_{i+1,p-1}/(t_{i+p+1}-t_{i+1}))
    lower = ndu[:p, p - 1]          # the p functions of degree p-1 at this span
    d = np.zeros(p + 1)
    for r in range(p + 1):
        i = span - p + r
        if r >= 1:
            d[r] += lower[r - 1] / (t[i + p] - t[i])
        if r < p:
            d[r] -= lower[r] / (t[i + p + 1] - t[i + 1])
    return p * d


def eval_basis(kv, x, deriv_order=0):
    """Nonzero basis functions (or their derivatives) at a single point.

    Returns:
        tuple: ``(first, values)`` where ``values[r]`` belongs to basis
        function ``first + r`` and ``len(values) == degree + 1``.
    """
    if deriv_order not in (0, 1):
        raise ValueError('only derivative orders 0 and 1 are supported')
    span = int(kv.findspan(x))
    return span - kv.degree, _basis_at_span(kv, span, float(x), deriv_order)


def eval_basis_many(kv, xs):
    """Vectorized helper: first indices, values and derivatives at many points.

    Returns:
        (first, vals, ders): ``first`` has shape (n,), ``vals`` and ``ders``
        have shape (n, p+1).
    """
    xs = np.asarray(xs, dtype=float).ravel()
    spans = kv.findspan(xs)
    p = kv.degree
    vals = np.empty((len(xs), p + 1))
    ders = np.empty((len(xs), p + 1))
    for n, (s, x) in enumerate(zip(spans, xs)):
        vals[n] = _basis_at_span(kv, s, x, 0)
        ders[n] = _basis_at_span(kv, s, x, 1)
    return spans - p, vals, ders


def collocation_matrix(kv, xs, deriv_order=0):
    """Dense matrix ``M[n, i] = B_i^{(d)}(xs[n])``."""
    first, vals, ders = eval_basis_many(kv, xs)
    M = np.zeros((len(first), kv.numdofs))
    src = vals if deriv_order == 0 else ders
    for n, f in enumerate(first):
        M[n, f:f + kv.degree + 1] = src[n]
    return M


def knot_insertion_matrix(kv_old, kv_new):
    """Prolongation P with ``B_old = B_new @ P`` for nested knot vectors.

    Boehm's algorithm applied knot by knot; coefficients transform as
    ``c_new = P @ c_old``.
    """
    if kv_old.degree != kv_new.degree:
        raise ValueError('degrees differ')
    p = kv_old.degree
    old = list(kv_old.knots)
    P = np.eye(kv_old.numdofs)
    remaining = list(kv_new.knots)
    for t in old:
        remaining.remove(t)
    for xi in remaining:
        k = np.searchsorted(old, xi, side='right') - 1
        n = len(old) - p - 1
        Q = np.zeros((n + 1, n))
        for i in range(n + 1):
            if i <= k - p:
                Q[i, i] = 1.0
            elif i >= k + 1:
                Q[i, i - 1] = 1.0
            else:
                a = (xi - old[i]) / (old[i + p] - old[i])
                Q[i, i] = a
                Q[i, i - 1] = 1.0 - a
        P = Q @ P
        old.insert(k + 1, xi)
    if not np.allclose(old, kv_new.knots, rtol=0, atol=0):
        raise ValueError('knot vectors are not nested')
    return P


class TensorSplineSpace:
    """Tensor product of two univariate spline spaces on the unit square.

    Scalar basis functions are numbered ``i * n2 + j`` where ``i`` runs
    along the first parameter direction.
    """

    def __init__(self, kv1, kv2):
        self.kvs = (kv1, kv2)

    def __repr__(self):
        return 'TensorSplineSpace(%r, %r)' % self.kvs

    def __eq__(self, other):
        return isinstance(other, TensorSplineSpace) and self.kvs == other.kvs

    def __hash__(self):
        return hash(self.kvs)

    @property
    def degree(self):
        return max(kv.degree for kv in self.kvs)

    @property
    def dims(self):
        return tuple(kv.numdofs for kv in self.kvs)

    @property
    def size(self):
        n1, n2 = self.dims
        return n1 * n2

    @property
    def h_max(self):
        return max(kv.spans().max() for kv in self.kvs)

    @property
    def h_min(self):
        return min(kv.spans().min() for kv in self.kvs)

    @property
    def quasi_uniformity(self):
        return self.h_max / self.h_min

    def refine(self):
        return TensorSplineSpace(*(kv.refine() for kv in self.kvs))

    def index(self, i, j):
        return i * self.dims[1] + j


def make_uniform_space(degree, levels):
    """Tensor space with ``2**levels`` uniform spans per direction."""
    if degree < 1:
        raise ValueError('degree must be at least 1')
    kv = make_knots(degree, levels)
    return TensorSplineSpace(kv, kv)


def uniform_refine(space):
    return space.refine()
