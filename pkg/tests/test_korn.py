import numpy as np
import pytest
import scipy.linalg

from igaieti import linalg
from igaieti.bspline import make_uniform_space
from igaieti.geometry import (bilinear_map, build_topology, make_cantilever, quarter_annulus_map,
                              rectangle_map)
from igaieti.korn import (UndefinedQuotientError, curl_functional, korn_global,
                          korn_local_curlfree, korn_quotient, patch_grams, translation_vectors)
from igaieti.assembly import PatchQuadrature, interpolate
from igaieti.studies import bending_field_grad


def const_grad(G):
    G = np.asarray(G, dtype=float)
    return lambda x, y: np.broadcast_to(G, np.shape(x) + (2, 2))


def test_bending_field_quotient():
    # |eps(v)|^2 = K, |v|_H1^2 = K + 8 K^3 on (0, K) x (0, 1)
    for K in (1, 2, 5):
        q = korn_quotient(bending_field_grad, make_cantilever(K))
        assert np.isclose(q, 1 / np.sqrt(1 + 8 * K * K), rtol=1e-12)
        assert q <= 1 / np.sqrt(1 + 2 * K * K)


def test_rigid_rotation_and_stretch():
    dom = make_cantilever(2)
    assert korn_quotient(const_grad([[0, -1], [1, 0]]), dom) == 0.0
    assert np.isclose(korn_quotient(const_grad([[1, 0], [0, 0]]), dom), 1.0)
    with pytest.raises(UndefinedQuotientError):
        korn_quotient(const_grad(np.zeros((2, 2))), dom)


def test_global_bounds_and_bending_field():
    for K in (1, 2, 3):
        dom = make_cantilever(K).discretize(2, 2)
        est = korn_global(dom)
        assert 0 < est.alpha <= 1
        assert est.constraint == 'dirichlet'
        assert est.inverse >= np.sqrt(1 + 2 * K * K)
        # the bending field lies in the space, so alpha cannot exceed its quotient
        assert est.alpha <= korn_quotient(bending_field_grad, dom) + 1e-12


def test_global_decreases_with_length():
    a1 = korn_global(make_cantilever(1).discretize(2, 2)).alpha
    a2 = korn_global(make_cantilever(2).discretize(2, 2)).alpha
    assert a2 < a1


def test_global_extremal_field_attains_alpha():
    from igaieti.korn import global_grams
    dom = make_cantilever(2).discretize(2, 1)
    est = korn_global(dom)
    E, H, _ = global_grams(dom)
    v = est.field
    assert np.isclose(np.sqrt((v @ E @ v) / (v @ H @ v)), est.alpha, rtol=1e-8)


def test_global_requires_dirichlet():
    dom = build_topology([rectangle_map(0, 1, 0, 1)]).discretize(2, 1)
    with pytest.raises(linalg.DefinitenessError):
        korn_global(dom)


def test_cap(monkeypatch):
    monkeypatch.setattr(linalg, 'DENSE_CAP', 10)
    with pytest.raises(linalg.DenseSizeError):
        korn_global(make_cantilever(2).discretize(2, 1))
    with pytest.raises(linalg.DenseSizeError):
        korn_local_curlfree(rectangle_map(0, 1, 0, 1), make_uniform_space(2, 1))


def penalty_oracle(gmap, space, rhos):
    """Minimize (E + rho c c^T, H) on the complement of translations, extrapolate rho -> inf."""
    E, H, c = patch_grams(gmap, space)
    E, H = E.toarray(), H.toarray()
    t1, t2 = translation_vectors(space.size)
    Z = scipy.linalg.null_space(np.vstack([t1, t2]))
    Hr = Z.T @ H @ Z
    cr = Z.T @ c
    scale = np.abs(E).max() / (cr @ cr)
    thetas = []
    for rho in rhos:
        Er = Z.T @ (E + rho * scale * np.outer(c, c)) @ Z
        thetas.append(scipy.linalg.eigh(Er, Hr, eigvals_only=True)[0])
    r1, r2 = rhos[-2], rhos[-1]
    t1_, t2_ = thetas[-2], thetas[-1]
    return np.sqrt((r2 * t2_ - r1 * t1_) / (r2 - r1)), thetas


def test_local_against_penalty_oracle():
    g, sp = rectangle_map(0, 1, 0, 1), make_uniform_space(2, 1)
    est = korn_local_curlfree(g, sp)
    ref, thetas = penalty_oracle(g, sp, [1e2, 1e3, 1e4, 1e5, 1e6])
    assert np.all(np.diff(thetas) >= -1e-12)          # penalty increases the minimum
    assert 0 < est.alpha <= 1
    assert abs(est.alpha - ref) <= 1e-6


def test_local_against_penalty_oracle_curved():
    g, sp = quarter_annulus_map(), make_uniform_space(2, 1)
    ref, _ = penalty_oracle(g, sp, [1e4, 1e5, 1e6])
    assert abs(korn_local_curlfree(g, sp).alpha - ref) <= 1e-6


def test_rotation_violates_curl_constraint():
    g = rectangle_map(0, 2, 0, 1)
    sp = make_uniform_space(2, 1)
    dom = build_topology([g], spaces=[sp])
    r = interpolate(dom, lambda x, y: np.stack([-y, x], -1))[0].ravel()
    c = curl_functional(PatchQuadrature(g, sp))
    assert np.isclose(c @ r, 2 * 2.0)
    est = korn_local_curlfree(g, sp)
    assert abs(c @ est.field) <= 1e-10 * np.linalg.norm(c) * np.linalg.norm(est.field)
    assert est.constraint == 'zero_mean_curl'


def test_local_decreases_with_stretching():
    sp = make_uniform_space(2, 1)
    alphas = [korn_local_curlfree(rectangle_map(0, L, 0, 1), sp).alpha for L in (1, 2, 4)]
    assert alphas[0] > alphas[1] > alphas[2]


@pytest.mark.parametrize('s', [0.01, 3.0, 250.0])
def test_scale_invariance(s):
    g = bilinear_map((0, 0), (2, 0.3), (0.2, 1), (1.7, 1.5))
    sp = make_uniform_space(2, 1)
    a = korn_local_curlfree(g, sp).alpha
    b = korn_local_curlfree(g.scaled(s, (5.0, -1.0)), sp).alpha
    assert abs(a - b) <= 1e-10
    dom = make_cantilever(2).discretize(2, 1)
    sdom = build_topology([gg.scaled(s) for gg in dom.geometries], dom.bc, dom.spaces)
    assert abs(korn_global(dom).alpha - korn_global(sdom).alpha) <= 1e-10


def test_monotone_under_refinement():
    g = quarter_annulus_map()
    coarse = korn_local_curlfree(g, make_uniform_space(2, 1)).alpha
    fine = korn_local_curlfree(g, make_uniform_space(2, 2)).alpha
    assert fine <= coarse + 1e-10
    dom = make_cantilever(2)
    assert korn_global(dom.discretize(2, 2)).alpha <= korn_global(dom.discretize(2, 1)).alpha + 1e-10


def test_linear_growth_in_length():
    Ks = np.array([2, 4, 6, 8])
    inv = np.array([korn_global(make_cantilever(K).discretize(2, 2)).inverse for K in Ks])
    slope = np.polyfit(Ks, inv, 1)[0]
    # the bending field forces alpha^-1 >= sqrt(1 + 8 K^2), i.e. slope at least about sqrt(8)
    assert np.sqrt(8) * 0.95 <= slope <= 3.5
    assert np.all(inv >= np.sqrt(1 + 8 * Ks ** 2))
