import json

import numpy as np
import pytest

from igaieti.bspline import make_uniform_space
from igaieti.geometry import (BOTTOM, LEFT, RIGHT, TOP, AdmissibilityError, GeometryMap,
                              MatchingError, bilinear_map, build_topology, geometry_from_dict,
                              geometry_report, jacobian, make_cantilever, make_strip_grid,
                              quarter_annulus_map, read_geometry, rectangle_map, side_param,
                              write_geometry)


def test_identity_jacobian():
    g = rectangle_map(0, 1, 0, 1)
    for xh in [(0, 0), (0.3, 0.7), (1, 1)]:
        assert np.allclose(jacobian(g, xh), np.eye(2))


def test_strip_patch_jacobian():
    dom = make_cantilever(4)
    for k, g in enumerate(dom.geometries):
        assert np.allclose(g(0.25, 0.5), [k + 0.25, 0.5])
        assert np.allclose(jacobian(g, (0.25, 0.5)), np.eye(2))


def test_quarter_annulus_jacobian_finite_differences():
    g = quarter_annulus_map(1.0, 2.0)
    h = 1e-6
    for u, v in np.random.default_rng(3).uniform(0.05, 0.95, (10, 2)):
        J = jacobian(g, (u, v))
        fd = np.column_stack([(g(u + h, v) - g(u - h, v)) / (2 * h),
                              (g(u, v + h) - g(u, v - h)) / (2 * h)])
        assert np.allclose(J, fd, atol=1e-6)


def test_control_net_shape_checked():
    with pytest.raises(ValueError):
        GeometryMap(make_uniform_space(1, 0), np.zeros((3, 2, 2)))


def test_two_squares():
    dom = build_topology([rectangle_map(0, 1, 0, 1), rectangle_map(1, 2, 0, 1)])
    assert len(dom.interfaces) == 1
    itf = dom.interfaces[0]
    assert (itf.k, itf.side_k, itf.l, itf.side_l, itf.flipped) == (0, RIGHT, 1, LEFT, False)
    assert len(dom.corners) == 2
    assert dom.neighbors(0) == [1]
    assert dom.neighbors(1) == [0]
    assert not dom.has_dirichlet()
    assert all(t == 'neumann' for t in dom.bc.values())
    assert len(dom.bc) == 6


def test_two_by_two_grid():
    dom = make_strip_grid(2, 2, 2.0)
    assert len(dom.interfaces) == 4
    full = [c for c in dom.corners if len(c.members) == 4]
    assert len(full) == 1
    assert np.allclose(full[0].point, (1.0, 0.5))
    assert dom.corner_multiplicity() == 4


def test_cantilever_five():
    dom = make_cantilever(5)
    assert dom.num_patches == 5
    assert len(dom.interfaces) == 4
    assert len(dom.corners) == 8
    assert all(c.point[0] > 0 for c in dom.corners)
    assert dom.sides_with('dirichlet') == [(0, LEFT)]
    assert dom.sides_with('neumann_load') == [(4, RIGHT)]
    assert set(dom.dirichlet_vertices) == {(0, 0), (0, 2)}


def test_cantilever_small():
    dom = make_cantilever(1)
    assert dom.num_patches == 1
    assert dom.sides_with('dirichlet') == [(0, LEFT)]
    assert not dom.interfaces and not dom.corners
    assert np.isclose(make_cantilever(3).diameter(), np.sqrt(10))
    with pytest.raises(ValueError):
        make_cantilever(0)


def test_strip_grid_counts():
    dom = make_strip_grid(4, 2, 4.0)
    assert dom.num_patches == 8
    assert len(dom.interfaces) == 10
    assert sum(len(c.members) == 4 for c in dom.corners) == 3
    unit = make_strip_grid(1, 1, 1.0)
    assert unit.num_patches == 1
    assert np.allclose(unit.geometries[0].control.reshape(-1, 2).max(0), [1, 1])
    # doubling Kx at fixed patch size doubles the length
    a, b = make_strip_grid(3, 1, 3.0), make_strip_grid(6, 1, 6.0)
    ext = lambda d: np.concatenate([g.control.reshape(-1, 2) for g in d.geometries])[:, 0].max()
    assert ext(b) == 2 * ext(a)
    with pytest.raises(ValueError):
        make_strip_grid(0, 1, 1.0)


def test_flipped_interface():
    a = rectangle_map(0, 1, 0, 1)
    # second patch parametrized so its left side runs downward
    b = bilinear_map((1, 1), (2, 1), (1, 0), (2, 0))
    dom = build_topology([a, b])
    assert len(dom.interfaces) == 1
    assert dom.interfaces[0].flipped


def _trace_points(dom, itf, t):
    gk, gl = dom.geometries[itf.k], dom.geometries[itf.l]
    tl = 1 - t if itf.flipped else t
    xk = np.array([gk(*(np.atleast_1d(c)[0] for c in side_param(itf.side_k, s))) for s in t])
    xl = np.array([gl(*(np.atleast_1d(c)[0] for c in side_param(itf.side_l, s))) for s in tl])
    return xk, xl


@pytest.mark.parametrize('dom', [make_strip_grid(3, 2, 3.0), make_cantilever(4),
                                 build_topology([rectangle_map(0, 1, 0, 1),
                                                 bilinear_map((1, 1), (2, 1), (1, 0), (2, 0))])])
def test_interface_traces_coincide(dom):
    t = np.random.default_rng(4).random(100)
    for itf in dom.interfaces:
        xk, xl = _trace_points(dom, itf, t)
        assert np.abs(xk - xl).max() <= 1e-10


def test_t_junction_rejected():
    geos = [rectangle_map(0, 1, 0, 2), rectangle_map(1, 2, 0, 1), rectangle_map(1, 2, 1, 2)]
    with pytest.raises(AdmissibilityError):
        build_topology(geos)


def test_tag_on_interface_rejected():
    with pytest.raises(AdmissibilityError):
        build_topology([rectangle_map(0, 1, 0, 1), rectangle_map(1, 2, 0, 1)],
                       {(0, RIGHT): 'dirichlet'})


def test_unknown_tag_rejected():
    with pytest.raises(ValueError):
        build_topology([rectangle_map(0, 1, 0, 1)], {(0, LEFT): 'robin'})


def test_mismatched_traces_rejected():
    dom = make_cantilever(2)
    with pytest.raises(MatchingError):
        build_topology(dom.geometries, dom.bc,
                       spaces=[make_uniform_space(2, 1), make_uniform_space(2, 2)])


def test_discretize_keeps_tags():
    dom = make_cantilever(3).discretize(3, 2)
    assert all(sp == make_uniform_space(3, 2) for sp in dom.spaces)
    assert dom.sides_with('dirichlet') == [(0, LEFT)]
    assert len(dom.corners) == 4


def test_report_cantilever():
    dom = make_cantilever(3).discretize(2, 2)
    rep = geometry_report(dom)
    assert np.allclose(rep.H, np.sqrt(2))
    assert np.allclose(rep.grad_max, 1.0)
    assert np.allclose(rep.inv_grad_max, 1.0)
    normalized = max((rep.grad_max / rep.H).max(), (rep.inv_grad_max * rep.H).max())
    assert rep.C2_max <= np.sqrt(2) * normalized
    assert np.allclose(rep.C2, np.sqrt(2))
    assert np.allclose(rep.h_hat, 0.25)
    assert np.allclose(rep.h, 0.25 * np.sqrt(2))
    assert np.allclose(rep.C3, 1.0)
    assert rep.C1 == 2


def test_report_curved_is_finite():
    g = quarter_annulus_map()
    rep = geometry_report(build_topology([g]))
    assert np.all(np.isfinite(rep.C2))
    assert rep.C1 == 0


def test_geometry_file_roundtrip(tmp_path):
    dom = make_strip_grid(3, 2, 3.0)
    path = tmp_path / 'strip.json'
    write_geometry(path, dom)
    doc = json.loads(path.read_text())
    assert doc['version'] == 1
    assert set(doc['patches'][0]) == {'degrees', 'knots', 'control_points', 'boundary'}
    back = read_geometry(path)
    assert back.bc == dom.bc
    assert back.interfaces == dom.interfaces
    assert back.corners == dom.corners
    for a, b in zip(back.geometries, dom.geometries):
        assert np.array_equal(a.control, b.control)


def test_geometry_file_rejects_unknown_version(tmp_path):
    dom = make_cantilever(2)
    path = tmp_path / 'c.json'
    write_geometry(path, dom)
    doc = json.loads(path.read_text())
    doc['version'] = 99
    with pytest.raises(ValueError, match='version'):
        geometry_from_dict(doc)
    doc['version'] = 1
    doc['format'] = 'other'
    with pytest.raises(ValueError):
        geometry_from_dict(doc)


def test_geometry_file_curved_patch(tmp_path):
    g = quarter_annulus_map()
    dom = build_topology([g], {(0, BOTTOM): 'dirichlet', (0, TOP): 'neumann_load'})
    write_geometry(tmp_path / 'a.json', dom)
    back = read_geometry(tmp_path / 'a.json')
    assert np.allclose(back.geometries[0](0.3, 0.6), g(0.3, 0.6))
    assert back.bc == dom.bc
