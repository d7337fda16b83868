import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarea_scatter.errors import ParameterError, SingularityError
from coarea_scatter.shape import (
    EllipseShape,
    PolygonShape,
    circle_shape,
    dt_r_dr,
    ellipse_shape,
    fiber_solve,
    polygon_shape,
    random_octagon,
    surface_sample,
)

TWO_PI = 2 * np.pi


def central(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


# -- ellipse --------------------------------------------------------------------


def test_ellipse_axes():
    e = ellipse_shape(5.0, 1.0)
    for alpha in (0.0, 0.7, 4.0):
        assert e.rho(alpha, alpha) == pytest.approx(5.0, rel=1e-15)
        assert e.rho(alpha + np.pi / 2, alpha) == pytest.approx(1.0, rel=1e-14)
    assert (e.r_min, e.r_max) == (1.0, 5.0)


def test_ellipse_rejects_degenerate_or_swapped_axes():
    for a, b in [(1.0, 5.0), (2.0, 2.0), (3.0, 0.0)]:
        with pytest.raises(ParameterError):
            ellipse_shape(a, b)


def test_ellipse_drho_dz_finite_difference():
    e = ellipse_shape(5.0, 1.0)
    alpha = 0.3
    th = alpha + np.pi / 4
    fd = central(lambda z: e.rho(th, z), alpha, 1e-6)
    assert e.drho_dz(th, alpha) == pytest.approx(fd, abs=1e-8)


@given(theta=st.floats(0, TWO_PI), z=st.floats(0, TWO_PI))
@settings(max_examples=100, deadline=None)
def test_ellipse_log_derivative_closed_form(theta, z):
    # |rho_theta / rho| = (a^2 - b^2) |sin 2t| / 2 over b^2 cos^2 t + a^2 sin^2 t
    a, b = 5.0, 1.0
    e = ellipse_shape(a, b)
    t = theta - z
    closed = 0.5 * (a * a - b * b) * np.sin(2 * t) / (b * b * np.cos(t) ** 2 + a * a * np.sin(t) ** 2)
    got = e.drho_dtheta(theta, z) / e.rho(theta, z)
    assert abs(abs(got) - abs(closed)) <= 1e-12 * max(1.0, abs(closed))
    fd = central(lambda x: e.rho(x, z), theta, 1e-6) / e.rho(theta, z)
    assert got == pytest.approx(fd, abs=1e-7)


def test_circle_shape_is_degenerate_ellipse():
    c = circle_shape(3.0)
    assert isinstance(c, EllipseShape) and c.is_circle and c.name == "circle"
    th = np.linspace(0, TWO_PI, 17)
    assert np.allclose(c.rho(th, 1.234), 3.0, rtol=1e-15)
    assert fiber_solve(c, 0.5, 3.0) == []


# -- polygons -------------------------------------------------------------------


def test_polygon_vertex_interpolation():
    oct_ = random_octagon(5.0, 4.0)
    for z in (-0.7, 0.0, 0.4, 1.0):
        R = oct_.vertex_radii(z)
        for q, th in enumerate(oct_.angles):
            assert oct_.rho(th, z) == pytest.approx(R[q], rel=1e-14)


def test_regular_octagon_apothem():
    shp = polygon_shape(lambda z: np.full(np.shape(z) + (8,), 2.0), np.arange(1, 9) * np.pi / 4)
    mid = (np.arange(1, 9) - 0.5) * np.pi / 4
    assert np.allclose(shp.rho(mid, 0.0), 2.0 * np.cos(np.pi / 8), rtol=1e-14)


def test_polygon_rejects_bad_input():
    radii = lambda z: np.ones(np.shape(z) + (4,))
    with pytest.raises(ParameterError):
        polygon_shape(radii, [0.5, 0.2, 2.0, 4.0])
    with pytest.raises(ParameterError):
        polygon_shape(lambda z: -np.ones(np.shape(z) + (4,)), [0.5, 2.0, 3.5, 5.0])
    with pytest.raises(ParameterError):
        random_octagon(4.0, 5.0)


def test_octagon_vertices():
    o = random_octagon(5.0, 4.0)
    assert np.allclose(o.vertex_radii(0.0), 5.0)
    R = o.vertex_radii(1.0)
    assert np.allclose(R[0::2], 9.0)  # q = 1, 3, 5, 7
    assert np.allclose(R[1::2], 5.0)
    even = o.angles[1::2]
    for z in (-0.9, 0.1, 0.8):
        assert np.allclose(o.drho_dz(even, z), 0.0, atol=1e-15)
    assert (o.r_min, o.r_max) == (1.0, 9.0)
    assert np.array_equal(o.stationary_vertices(), np.arange(1, 9) % 2 == 0)


@given(theta=st.floats(0.01, TWO_PI - 0.01), z=st.floats(-0.99, 0.99))
@settings(max_examples=150, deadline=None)
def test_octagon_s_over_drho_dz_finite_difference(theta, z):
    o = random_octagon(5.0, 4.0)
    if abs(np.mod(theta, np.pi / 4)) < 1e-3 or abs(np.mod(theta, np.pi / 4) - np.pi / 4) < 1e-3:
        return
    d = o.drho_dz(theta, z)
    fd = central(lambda x: o.rho(theta, x), z, 1e-6)
    assert d == pytest.approx(fd, rel=1e-7, abs=1e-9)
    if abs(d) > 1e-6:
        ref = o.metric_s(theta, z) / abs(fd)
        assert o.s_over_drho_dz(theta, z) == pytest.approx(ref, rel=1e-7)


@given(theta=st.floats(0.01, TWO_PI - 0.01), z=st.floats(-1, 1))
@settings(max_examples=150, deadline=None)
def test_polygon_metric_matches_drho_dtheta(theta, z):
    o = random_octagon(5.0, 4.0)
    r = o.rho(theta, z)
    fd = central(lambda x: o.rho(x, z), theta, 1e-7)
    if abs(np.mod(theta + 1e-6, np.pi / 4)) < 3e-6:
        return
    assert o.drho_dtheta(theta, z) == pytest.approx(fd, rel=1e-6, abs=1e-7)
    assert o.metric_s(theta, z) == pytest.approx(np.sqrt(1 + (o.drho_dtheta(theta, z) / r) ** 2), rel=1e-12)


def test_polygon_continuity_at_breakpoints():
    o = random_octagon(5.0, 4.0)
    eps = 1e-12
    for z in np.linspace(-1, 1, 9):
        R = o.vertex_radii(z)
        for q, th in enumerate(o.angles):
            left, right = o.rho(th - eps, z), o.rho(th + eps, z)
            assert left == pytest.approx(R[q], rel=1e-10)
            assert right == pytest.approx(R[q], rel=1e-10)


@pytest.mark.parametrize("make", [lambda: ellipse_shape(5.0, 1.0), lambda: random_octagon(5.0, 4.0)])
def test_radial_bounds(make):
    shp = make()
    rng = np.random.default_rng(11)
    th = rng.uniform(0, TWO_PI, 100_000)
    z = shp.param_lo + (shp.param_hi - shp.param_lo) * rng.uniform(size=th.size)
    r = shp.rho(th, z)
    assert np.all(r >= shp.r_min * (1 - 1e-14))
    assert np.all(r <= shp.r_max * (1 + 1e-14))


def test_generic_polygon_bounds_and_rho():
    # a random pentagon with smooth radii in z
    ang = np.array([0.3, 1.5, 2.9, 4.0, 5.3])
    radii = lambda z: 2.0 + 0.5 * np.sin(np.asarray(z)[..., None] + np.arange(5))
    p = PolygonShape(radii, ang)
    assert p.Q == 5
    assert p.r_min > 0 and p.r_max <= 2.5
    z = 0.37
    for q in range(5):
        assert p.rho(ang[q], z) == pytest.approx(radii(z)[q], rel=1e-13)


# -- surface samples ------------------------------------------------------------


def test_circle_surface_sample():
    c = circle_shape(3.0)
    th = np.linspace(0, TWO_PI, 13)
    ss = surface_sample(c, th, 0.4)
    assert np.allclose(ss.unit_outward_normal, np.stack([np.cos(th), np.sin(th)], axis=-1), atol=1e-15)
    assert np.allclose(ss.metric_s, 1.0)
    assert np.allclose(ss.line_element, 3.0)


def test_ellipse_axis_metric_is_one():
    e = ellipse_shape(5.0, 1.0)
    ss = surface_sample(e, 0.8, 0.8)
    assert ss.metric_s == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(ss.unit_outward_normal, [np.cos(0.8), np.sin(0.8)])


def test_polygon_segment_normal_from_vertices():
    o = random_octagon(5.0, 4.0)
    z = 0.35
    P = o.vertex_points(z)
    # the segment over (pi/4, pi/2) joins vertices 1 and 2
    edge = P[1] - P[0]
    n_ref = np.array([edge[1], -edge[0]]) / np.linalg.norm(edge)
    for th in (np.pi / 4 + 0.1, np.pi / 2 - 0.2):
        ss = surface_sample(o, th, z)
        assert np.allclose(ss.unit_outward_normal, n_ref, atol=1e-13)
        assert np.dot(ss.unit_outward_normal, edge) == pytest.approx(0.0, abs=1e-12)
        # the point lies on the edge
        cross = (ss.position[0] - P[0][0]) * edge[1] - (ss.position[1] - P[0][1]) * edge[0]
        assert cross == pytest.approx(0.0, abs=1e-12)


@given(theta=st.floats(0, TWO_PI), z=st.floats(0, TWO_PI))
@settings(max_examples=60, deadline=None)
def test_surface_sample_invariants(theta, z):
    e = ellipse_shape(5.0, 1.0)
    ss = surface_sample(e, theta, z)
    r = e.rho(theta, z)
    rt = e.drho_dtheta(theta, z)
    tangent = np.array([rt * np.cos(theta) - r * np.sin(theta), rt * np.sin(theta) + r * np.cos(theta)])
    assert np.dot(ss.unit_outward_normal, tangent) == pytest.approx(0.0, abs=1e-12)
    assert np.linalg.norm(ss.unit_outward_normal) == pytest.approx(1.0, abs=1e-15)
    assert ss.metric_s >= 1.0
    assert ss.line_element == pytest.approx(np.hypot(r, rt), rel=1e-15)
    assert np.dot(ss.unit_outward_normal, ss.position) > 0


# -- fibers ---------------------------------------------------------------------


def test_ellipse_intersection_angle_limits():
    e = ellipse_shape(5.0, 1.0)
    assert e.intersection_angle(1.0 + 1e-12) == pytest.approx(np.pi / 2, abs=1e-5)
    assert e.intersection_angle(5.0 - 1e-12) == pytest.approx(0.0, abs=1e-5)


@given(theta=st.floats(0, TWO_PI), r=st.floats(1.001, 4.999))
@settings(max_examples=100, deadline=None)
def test_ellipse_four_branches(theta, r):
    e = ellipse_shape(5.0, 1.0)
    br = fiber_solve(e, theta, r)
    assert len(br) == 4
    for b in br:
        assert abs(e.rho(theta, b.z) - r) <= 1e-12 * r
        assert b.density == pytest.approx(1 / TWO_PI)


def test_generic_fiber_solver_matches_closed_forms():
    e = ellipse_shape(5.0, 1.0)
    o = random_octagon(5.0, 4.0)
    rng = np.random.default_rng(5)
    for _ in range(30):
        th, r = rng.uniform(0, TWO_PI), rng.uniform(1.05, 4.95)
        closed = sorted(e.fiber_roots(th, r))
        generic = sorted(super(EllipseShape, e).fiber_roots(th, r))
        assert np.allclose(closed, generic, atol=1e-11)
    for _ in range(30):
        th, r = rng.uniform(0, TWO_PI), rng.uniform(1.05, 8.95)
        closed = o.fiber_roots(th, r)
        generic = super(type(o), o).fiber_roots(th, r)
        assert np.allclose(closed, generic, atol=1e-11)


def test_octagon_round_trip_residual():
    o = random_octagon(5.0, 4.0)
    rng = np.random.default_rng(2)
    th = rng.uniform(0, TWO_PI, 10_000)
    r = rng.uniform(o.r_min, o.r_max, 10_000)
    z = o.fiber_z(th, r)
    ok = ~np.isnan(z)
    assert ok.mean() > 0.3
    res = np.abs(o.rho(th[ok], z[ok]) - r[ok])
    assert np.all(res <= 1e-12 * r[ok])


def test_fiber_solve_empty_outside_band():
    o = random_octagon(5.0, 4.0)
    assert fiber_solve(o, 0.0, 0.5) == []
    assert fiber_solve(o, np.pi / 4 + 0.3, 8.99) == []
    assert fiber_solve(ellipse_shape(5.0, 1.0), 0.3, 5.5) == []


def _fd_fiber(shape, theta, r, z0, h):
    """d z_r / dr by following the branch nearest z0 at r +/- h."""

    def near(rr):
        zs = shape.fiber_roots(theta, rr)
        d = [abs(np.angle(np.exp(1j * (z - z0)))) if shape.periodic else abs(z - z0) for z in zs]
        z = zs[int(np.argmin(d))]
        return z0 + np.angle(np.exp(1j * (z - z0))) if shape.periodic else z

    return (near(r + h) - near(r - h)) / (2 * h)


@pytest.mark.parametrize("make,rlo,rhi", [
    (lambda: ellipse_shape(5.0, 1.0), 1.2, 4.8),
    (lambda: random_octagon(5.0, 4.0), 1.5, 8.5),
])
def test_implicit_function_identities(make, rlo, rhi):
    shp = make()
    rng = np.random.default_rng(9)
    checked = 0
    for _ in range(150):
        th, r = rng.uniform(0, TWO_PI), rng.uniform(rlo, rhi)
        for b in fiber_solve(shp, th, r):
            if abs(b.drho_dz) < 1e-2:
                continue
            dzdr = _fd_fiber(shp, th, r, b.z, 1e-5)
            dz = central(lambda x: shp.rho(th, x), b.z, 1e-5)
            assert dz * dzdr == pytest.approx(1.0, abs=1e-8 * max(1.0, abs(dz * dzdr)) + 1e-7)
            s = shp.metric_s(th, b.z)
            assert b.grad_z_magnitude == pytest.approx(s * abs(dzdr), rel=1e-7)
            checked += 1
    assert checked > 30


def test_dt_r_dr():
    a, b, r = 5.0, 1.0, 3.0
    e = ellipse_shape(a, b)
    fd = central(e.intersection_angle, r, 1e-6)
    assert dt_r_dr(a, b, r) == pytest.approx(fd, abs=1e-8)
    rs = np.linspace(1.01, 4.99, 50)
    assert np.all(dt_r_dr(a, b, rs) < 0)
    near = np.abs(dt_r_dr(a, b, a - np.array([1e-4, 1e-8, 1e-12])))
    assert np.all(np.diff(near) > 0) and near[-1] > 1e4
    for bad in (a, b, 6.0):
        with pytest.raises(SingularityError):
            dt_r_dr(a, b, bad)
