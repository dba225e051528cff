import numpy as np
import pytest

from chordflow import geometry as geo
from chordflow.geometry import (NormalSection, TrigPoly, build_hopf_link, build_K0,
                                circle, curve_from_modes, ellipsoid, perturb,
                                product, sphere, standing_circle, standing_torus)


def test_circle_eval_frame():
    c = circle(3)
    q, jac, hess = c.eval(0, np.array([0.0]))
    assert np.allclose(q[0], [1, 0, 0])
    assert np.allclose(jac[0, :, 0], [0, 1, 0])
    tan, nor = c.tangent_frame(0, np.array([[0.0]]))
    assert np.allclose(np.abs(tan[0]), [[0, 1, 0]])
    # normal space spanned by (1,0,0),(0,0,1)
    nn = nor[0]
    assert np.allclose(nn @ np.array([0, 1, 0.0]), 0)


def test_sphere_coverage_and_rank():
    s = sphere(3, ambient=9, radius=1.0, offsets=list(range(4)))
    assert s.min_immersion_rank(5) == 3
    assert s.frame_residuals(4) < 1e-10
    pts = s.sample_points(5)
    assert np.allclose(np.linalg.norm(pts[:, :4], axis=1), 1.0)
    assert np.allclose(pts[:, 4:], 0.0)


def test_torus_normalization():
    t = standing_torus(3)
    pts = t.sample_points(24)
    assert np.linalg.norm(pts, axis=1).max() <= 1 + 1e-9
    top = t.point(0, t.meta["top_chart_u"])
    assert np.allclose(top[0], [0, 0, 1])
    # height max unique at the top
    h = pts[:, -1]
    near = pts[h > 0.999]
    assert np.linalg.norm(near - np.array([0, 0, 1.0]), axis=1).max() < 0.08


def test_torus_normal_field_is_normal():
    t = standing_torus(5)
    from chordflow.jets import seed
    u = np.array([[0.3, 1.1], [2.0, 4.4]])
    fields = t.charts[0].normal_fields["all"](seed(u))
    _, jac, _ = t.eval(0, u)
    from chordflow.jets import stack
    nvec = stack(fields[0])[0]
    dot = np.einsum("bn,bnm->bm", nvec, jac)
    assert np.abs(dot).max() < 1e-12


def test_product_and_K0_build():
    k0 = build_K0(5, 2, standing_torus(3))
    assert k0.ambient_dim == 5 and k0.intrinsic_dim == 3
    assert k0.min_immersion_rank(4) == 3
    q, jac, _ = k0.eval(0, np.zeros((1, 3)))
    # block tangent structure of the product at the chart origin
    assert np.allclose(jac[0][:2, 1:], 0)
    assert np.allclose(jac[0][2:, 0], 0)
    from chordflow.algebra import betti_of, euler_characteristic
    assert euler_characteristic(betti_of(k0.betti_spec)) == 0


def test_K0_s3t2():
    k0 = build_K0(9, 4, standing_torus(5))
    assert k0.ambient_dim == 9 and k0.intrinsic_dim == 5
    assert k0.codim == 4
    pts = k0.sample_points(3)
    assert np.allclose(np.linalg.norm(pts[:, :4], axis=1), 1.0, atol=1e-9)


def test_K0_rejects_bad_M():
    bad = circle(3, center=[0, 0, 0.5], radius=1.0, axes=(0, 1))
    with pytest.raises(ValueError):
        build_K0(5, 2, bad)


def test_hopf_link():
    h = build_hopf_link()
    p1 = h.point(0, np.array([0.0]))
    assert np.allclose(p1[0], [1, 0, 0])
    d, _, _ = h.distance_to(np.zeros((1, 3)))
    assert d[0] < 1e-9  # p0=(0,0,0) on component 2
    # components disjoint
    a = h.point(0, np.linspace(0, 2 * np.pi, 60)[:, None])
    b = h.point(1, np.linspace(0, 2 * np.pi, 60)[:, None])
    gap = np.linalg.norm(a[:, None] - b[None, :], axis=-1).min()
    assert gap > 0.2


def test_perturb_zero_is_identity():
    c = circle(3)
    p = perturb(c, None)
    u = np.linspace(0, 2 * np.pi, 17)[:, None]
    assert np.allclose(c.point(0, u), p.point(0, u))


def test_perturb_radial_cos2():
    c = circle(3)
    sec = NormalSection({0: TrigPoly([((2,), 0.1, 0.0)])})
    p = perturb(c, sec, max_sup=0.5)
    q = p.point(0, np.array([[0.0], [np.pi / 2]]))
    assert np.allclose(q[0], [1.1, 0, 0])
    assert np.allclose(q[1], [0, 0.9, 0])
    assert p.frame_residuals(8) < 1e-10


def test_perturb_sup_norm_guard():
    c = circle(3)
    sec = NormalSection({0: TrigPoly([((1,), 0.9, 0.0)])})
    with pytest.raises(ValueError):
        perturb(c, sec, max_sup=0.5)


def test_perturbed_frame_against_fd():
    """Frames of a perturbed curve vs finite-difference tangents."""
    c = curve_from_modes(3, radial=[(2, 0.08, 0.3), (3, 0.05, 1.1)],
                         height=[(2, 0.06, 0.0)])
    u = np.array([[0.9]])
    tan, nor = c.tangent_frame(0, u)
    h = 1e-6
    qp = c.point(0, u + h)
    qm = c.point(0, u - h)
    t_fd = (qp - qm) / (2 * h)
    t_fd /= np.linalg.norm(t_fd)
    assert min(np.linalg.norm(tan[0, 0] - t_fd[0]), np.linalg.norm(tan[0, 0] + t_fd[0])) < 1e-9
    assert np.abs(nor[0] @ t_fd[0]).max() < 1e-9


def test_ellipsoid_distance():
    e = ellipsoid((1.0, 1.2, 1.5))
    d, _, _ = e.distance_to(np.array([[0.0, 0.0, 3.0]]))
    assert abs(d[0] - 1.5) < 1e-6


def test_shifted_K0_margin():
    k0 = build_K0(5, 2, standing_torus(3))
    ks = geo.shifted_K0(k0, 0.05)
    pts = ks.sample_points(6)
    assert np.linalg.norm(pts[:, :2], axis=1).min() > 1.049
