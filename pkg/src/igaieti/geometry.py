"""Patch geometry maps and multi-patch topology.

Sides of the parameter square are numbered

    0 = left (u=0), 1 = right (u=1), 2 = bottom (v=0), 3 = top (v=1)

and local corners ``0=(0,0), 1=(1,0), 2=(0,1), 3=(1,1)``.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from . import bspline
from .bspline import KnotVector, TensorSplineSpace

LEFT, RIGHT, BOTTOM, TOP = 0, 1, 2, 3
SIDE_NAMES = ('left', 'right', 'bottom', 'top')
CORNER_PARAMS = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0))
# corner -> the two sides meeting there
CORNER_SIDES = ((LEFT, BOTTOM), (RIGHT, BOTTOM), (LEFT, TOP), (RIGHT, TOP))
# side -> (start corner, end corner) in increasing side parameter
SIDE_CORNERS = ((0, 2), (1, 3), (0, 1), (2, 3))

BC_TAGS = ('dirichlet', 'neumann', 'neumann_load')

MATCH_TOL = 1e-10
REPORT_GRID = 33

GEOMETRY_FORMAT = 'igaieti-multipatch'
GEOMETRY_VERSION = 1


class AdmissibilityError(ValueError):
    """The patches do not form an admissible (T-junction free) decomposition."""


class MatchingError(ValueError):
    """Discretizations on the two sides of an interface do not match."""


def side_indices(space, side):
    """Scalar basis indices along a side, in increasing side parameter."""
    n1, n2 = space.dims
    if side == LEFT:
        return np.arange(n2)
    if side == RIGHT:
        return (n1 - 1) * n2 + np.arange(n2)
    if side == BOTTOM:
        return np.arange(n1) * n2
    if side == TOP:
        return np.arange(n1) * n2 + n2 - 1
    raise ValueError('invalid side %r' % side)


def corner_index(space, corner):
    n1, n2 = space.dims
    return (0, (n1 - 1) * n2, n2 - 1, n1 * n2 - 1)[corner]


def side_knots(space, side):
    """Knot vector of the trace space on a side."""
    return space.kvs[1] if side in (LEFT, RIGHT) else space.kvs[0]


def side_param(side, t):
    """Parameter-domain points of a side for side parameters ``t``."""
    t = np.asarray(t, dtype=float)
    c = np.full_like(t, 0.0 if side in (LEFT, BOTTOM) else 1.0)
    return (c, t) if side in (LEFT, RIGHT) else (t, c)


class GeometryMap:
    """Spline map from the unit square to a physical patch.

    Args:
        space (TensorSplineSpace): spline space of the map.
        control (ndarray): control net of shape ``(n1, n2, 2)``.
    """

    def __init__(self, space, control):
        control = np.asarray(control, dtype=float)
        if control.shape != space.dims + (2,):
            raise ValueError('control net shape %s does not match space %s'
                             % (control.shape, space.dims))
        control.setflags(write=False)
        self.space = space
        self.control = control

    def grid_eval(self, u, v):
        """Points and Jacobians on the tensor grid ``u x v``.

        Returns:
            (X, J): arrays of shape ``(len(u), len(v), 2)`` and
            ``(len(u), len(v), 2, 2)`` with ``J[..., a, b] = dG_a/dxhat_b``.
        """
        kv1, kv2 = self.space.kvs
        N1, D1 = (bspline.collocation_matrix(kv1, u, d) for d in (0, 1))
        N2, D2 = (bspline.collocation_matrix(kv2, v, d) for d in (0, 1))
        c = self.control
        X = np.einsum('ai,bj,ijc->abc', N1, N2, c)
        Ju = np.einsum('ai,bj,ijc->abc', D1, N2, c)
        Jv = np.einsum('ai,bj,ijc->abc', N1, D2, c)
        return X, np.stack((Ju, Jv), axis=-1)

    def __call__(self, u, v):
        X, _ = self.grid_eval(np.atleast_1d(u), np.atleast_1d(v))
        return X[0, 0]

    def jacobian(self, u, v):
        _, J = self.grid_eval(np.atleast_1d(u), np.atleast_1d(v))
        return J[0, 0]

    def side_net(self, side):
        """Control points along a side (the boundary curve's control polygon)."""
        c = self.control
        return {LEFT: c[0, :], RIGHT: c[-1, :], BOTTOM: c[:, 0], TOP: c[:, -1]}[side]

    def corner_point(self, corner):
        c = self.control
        return (c[0, 0], c[-1, 0], c[0, -1], c[-1, -1])[corner]

    def diameter(self):
        """Diameter of the control net; upper bound for the patch diameter."""
        pts = self.control.reshape(-1, 2)
        d = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    def scaled(self, s, shift=(0.0, 0.0)):
        return GeometryMap(self.space, s * self.control + np.asarray(shift))


def jacobian(gmap, xhat):
    return gmap.jacobian(xhat[0], xhat[1])


def bilinear_map(p00, p10, p01, p11):
    """Bilinear patch through four corner points."""
    space = bspline.make_uniform_space(1, 0)
    control = np.array([[p00, p01], [p10, p11]], dtype=float)
    return GeometryMap(space, control)


def rectangle_map(x0, x1, y0, y1):
    return bilinear_map((x0, y0), (x1, y0), (x0, y1), (x1, y1))


def quarter_annulus_map(r_in=1.0, r_out=2.0):
    """Polynomial (non-rational) quarter annulus: quadratic arcs in u, linear in v.

    The arcs only approximate circles; the map is used as a curved test patch.
    """
    kv_u = KnotVector(2, [0, 0, 0, 1, 1, 1])
    kv_v = KnotVector(1, [0, 0, 1, 1])
    arc = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    control = np.stack([arc * r_in, arc * r_out], axis=1)
    return GeometryMap(TensorSplineSpace(kv_u, kv_v), control)


@dataclass(frozen=True)
class Interface:
    """Shared edge between patch ``k`` (side ``side_k``) and patch ``l``.

    ``flipped`` is True when the two side parametrizations run in opposite
    directions.
    """
    k: int
    side_k: int
    l: int
    side_l: int
    flipped: bool


@dataclass(frozen=True)
class Corner:
    """Vertex shared by two or more patches, not on the Dirichlet boundary."""
    point: tuple
    members: tuple      # ((patch, local corner), ...)


@dataclass
class MultiPatchDomain:
    """Patches, their displacement spaces and the multi-patch topology.

    Attributes:
        geometries: list of :class:`GeometryMap`.
        spaces: displacement spaces, one per patch.
        bc: maps ``(patch, side)`` to a boundary tag for every boundary side.
        interfaces: shared edges, ordered by ``(k, side_k)`` with ``k < l``.
        corners: shared vertices off the Dirichlet boundary.
        dirichlet_vertices: ``(patch, local corner)`` pairs on the Dirichlet boundary.
    """
    geometries: list
    spaces: list
    bc: dict
    interfaces: list = field(default_factory=list)
    corners: list = field(default_factory=list)
    dirichlet_vertices: frozenset = frozenset()

    @property
    def num_patches(self):
        return len(self.geometries)

    def neighbors(self, k):
        """Patches sharing an edge with patch k."""
        out = set()
        for itf in self.interfaces:
            if itf.k == k:
                out.add(itf.l)
            elif itf.l == k:
                out.add(itf.k)
        return sorted(out)

    def corner_multiplicity(self):
        """Largest number of patches meeting at a corner (the neighbor constant)."""
        return max((len(c.members) for c in self.corners), default=0)

    def has_dirichlet(self):
        return any(tag == 'dirichlet' for tag in self.bc.values())

    def sides_with(self, tag):
        return sorted(ks for ks, t in self.bc.items() if t == tag)

    def diameter(self):
        pts = np.concatenate([g.control.reshape(-1, 2) for g in self.geometries])
        lo, hi = pts.min(0), pts.max(0)
        return float(np.hypot(*(hi - lo)))

    def discretize(self, degree, levels):
        """Same geometry and tags with uniform displacement spaces."""
        space = bspline.make_uniform_space(degree, levels)
        return build_topology(self.geometries, self.bc,
                              spaces=[space] * self.num_patches)


def _point_on_polygon(x, poly, tol):
    """True if x lies on the open polyline (excluding its end points)."""
    if min(np.linalg.norm(x - poly[0]), np.linalg.norm(x - poly[-1])) <= tol:
        return False
    for a, b in zip(poly[:-1], poly[1:]):
        ab = b - a
        t = np.dot(x - a, ab) / np.dot(ab, ab)
        if -tol <= t <= 1 + tol and np.linalg.norm(a + np.clip(t, 0, 1) * ab - x) <= tol:
            return True
    return False


def build_topology(geometries, bc_tags=None, spaces=None, tol=MATCH_TOL):
    """Detect interfaces and corners and verify admissibility and matching.

    Args:
        geometries: list of :class:`GeometryMap`.
        bc_tags: dict ``(patch, side) -> tag``; untagged boundary sides are Neumann.
        spaces: displacement spaces; defaults to the geometry spaces.

    Raises:
        AdmissibilityError: T-junctions or tags on interface sides.
        MatchingError: trace spaces differ across an interface.
    """
    bc_tags = dict(bc_tags or {})
    if spaces is None:
        spaces = [g.space for g in geometries]
    spaces = list(spaces)
    K = len(geometries)
    if len(spaces) != K:
        raise ValueError('need one displacement space per patch')
    for key, tag in bc_tags.items():
        if tag not in BC_TAGS:
            raise ValueError('unknown boundary tag %r' % tag)
        if not (0 <= key[0] < K and key[1] in (0, 1, 2, 3)):
            raise ValueError('invalid boundary key %r' % (key,))

    interfaces = []
    matched = set()
    for k in range(K):
        for sk in range(4):
            if (k, sk) in matched:
                continue
            net_k = geometries[k].side_net(sk)
            for l in range(k + 1, K):
                for sl in range(4):
                    if (l, sl) in matched:
                        continue
                    net_l = geometries[l].side_net(sl)
                    if net_k.shape != net_l.shape:
                        continue
                    if np.abs(net_k - net_l).max() <= tol:
                        flipped = False
                    elif np.abs(net_k - net_l[::-1]).max() <= tol:
                        flipped = True
                    else:
                        continue
                    interfaces.append(Interface(k, sk, l, sl, flipped))
                    matched.update({(k, sk), (l, sl)})
                    break
                else:
                    continue
                break

    for itf in interfaces:
        for key in ((itf.k, itf.side_k), (itf.l, itf.side_l)):
            if key in bc_tags:
                raise AdmissibilityError('interface side %r carries a boundary tag' % (key,))
        tk = side_knots(spaces[itf.k], itf.side_k)
        tl = side_knots(spaces[itf.l], itf.side_l)
        if itf.flipped:
            tl = tl.reversed()
        if tk != tl:
            raise MatchingError('trace spaces differ on interface %d/%d' % (itf.k, itf.l))

    # T-junctions: a patch vertex in the interior of another patch's side
    for k in range(K):
        for c in range(4):
            x = geometries[k].corner_point(c)
            for l in range(K):
                if l == k:
                    continue
                for s in range(4):
                    if _point_on_polygon(x, geometries[l].side_net(s), tol):
                        raise AdmissibilityError(
                            'T-junction: corner %d of patch %d lies inside side %s of patch %d'
                            % (c, k, SIDE_NAMES[s], l))

    bc = {}
    for k in range(K):
        for s in range(4):
            if (k, s) not in matched:
                bc[(k, s)] = bc_tags.get((k, s), 'neumann')

    # cluster vertices
    clusters = []
    for k in range(K):
        for c in range(4):
            x = geometries[k].corner_point(c)
            for cl in clusters:
                if np.linalg.norm(cl[0] - x) <= tol:
                    cl[1].append((k, c))
                    break
            else:
                clusters.append((x, [(k, c)]))

    dirichlet_vertices = set()
    corners = []
    for x, members in clusters:
        on_dirichlet = any(bc.get((k, s)) == 'dirichlet'
                           for k, c in members for s in CORNER_SIDES[c])
        if on_dirichlet:
            dirichlet_vertices.update(members)
        elif len({k for k, _ in members}) >= 2:
            corners.append(Corner(tuple(float(v) for v in x), tuple(sorted(members))))
    corners.sort(key=lambda c: c.members[0])

    return MultiPatchDomain(list(geometries), spaces, bc, interfaces, corners,
                            frozenset(dirichlet_vertices))


def make_cantilever(K):
    """K unit squares along the x axis, clamped at x = 0, loadable at x = K."""
    if K < 1:
        raise ValueError('K must be positive')
    geos = [rectangle_map(k, k + 1, 0.0, 1.0) for k in range(K)]
    bc = {(0, LEFT): 'dirichlet', (K - 1, RIGHT): 'neumann_load'}
    return build_topology(geos, bc)


def make_strip_grid(Kx, Ky, length):
    """Kx x Ky grid of congruent rectangles filling (0, length) x (0, 1).

    Clamped at x = 0; the far end (x = length) is tagged as load side.
    Patch ``(i, j)`` has index ``j * Kx + i``.
    """
    if Kx < 1 or Ky < 1:
        raise ValueError('Kx and Ky must be positive')
    xs = np.linspace(0.0, length, Kx + 1)
    ys = np.linspace(0.0, 1.0, Ky + 1)
    geos, bc = [], {}
    for j in range(Ky):
        for i in range(Kx):
            geos.append(rectangle_map(xs[i], xs[i + 1], ys[j], ys[j + 1]))
            k = j * Kx + i
            if i == 0:
                bc[(k, LEFT)] = 'dirichlet'
            if i == Kx - 1:
                bc[(k, RIGHT)] = 'neumann_load'
    return build_topology(geos, bc)


@dataclass
class GeometryReport:
    """Per-patch regularity constants sampled on a ``REPORT_GRID``-square grid."""
    H: np.ndarray
    grad_max: np.ndarray
    inv_grad_max: np.ndarray
    C2: np.ndarray
    h_hat: np.ndarray
    h: np.ndarray
    C3: np.ndarray
    C1: int

    @property
    def C2_max(self):
        return float(self.C2.max())


def geometry_report(domain, resolution=REPORT_GRID):
    t = np.linspace(0.0, 1.0, resolution)
    H, gmax, igmax, C2, hh, C3 = [], [], [], [], [], []
    for g, sp in zip(domain.geometries, domain.spaces):
        _, J = g.grid_eval(t, t)
        norms = np.linalg.norm(J, ord=2, axis=(-2, -1))
        inorms = np.linalg.norm(np.linalg.inv(J), ord=2, axis=(-2, -1))
        Hk = g.diameter()
        H.append(Hk)
        gmax.append(norms.max())
        igmax.append(inorms.max())
        C2.append(max(norms.max() / Hk, inorms.max() * Hk))
        hh.append(sp.h_max)
        C3.append(sp.quasi_uniformity)
    H = np.array(H)
    hh = np.array(hh)
    return GeometryReport(H, np.array(gmax), np.array(igmax), np.array(C2),
                          hh, H * hh, np.array(C3), domain.corner_multiplicity())


# ---------------------------------------------------------------------------
# geometry files

def _patch_to_json(g, space, tags):
    return {
        'degrees': [kv.degree for kv in g.space.kvs],
        'knots': [kv.knots.tolist() for kv in g.space.kvs],
        'control_points': g.control.reshape(-1, 2).tolist(),
        'boundary': tags,
    }


def write_geometry(path, domain):
    """Write the geometry and boundary tags of a domain as a versioned JSON file."""
    patches = []
    for k, g in enumerate(domain.geometries):
        tags = {SIDE_NAMES[s]: t for (kk, s), t in sorted(domain.bc.items()) if kk == k}
        patches.append(_patch_to_json(g, g.space, tags))
    doc = {'format': GEOMETRY_FORMAT, 'version': GEOMETRY_VERSION, 'patches': patches}
    with open(path, 'w') as fh:
        json.dump(doc, fh, indent=1)


def read_geometry(path):
    """Read a multi-patch geometry file and build its topology."""
    with open(path) as fh:
        doc = json.load(fh)
    return geometry_from_dict(doc)


def geometry_from_dict(doc):
    if doc.get('format') != GEOMETRY_FORMAT:
        raise ValueError('not a %s file' % GEOMETRY_FORMAT)
    if doc.get('version') != GEOMETRY_VERSION:
        raise ValueError('unsupported geometry file version %r' % doc.get('version'))
    geos, bc = [], {}
    for k, patch in enumerate(doc['patches']):
        kvs = [KnotVector(p, kn) for p, kn in zip(patch['degrees'], patch['knots'])]
        space = TensorSplineSpace(*kvs)
        ctrl = np.asarray(patch['control_points'], dtype=float).reshape(space.dims + (2,))
        geos.append(GeometryMap(space, ctrl))
        for name, tag in patch.get('boundary', {}).items():
            if name not in SIDE_NAMES:
                raise ValueError('unknown side name %r' % name)
            bc[(k, SIDE_NAMES.index(name))] = tag
    return build_topology(geos, bc)
