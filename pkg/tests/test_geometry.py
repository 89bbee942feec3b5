import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aerialterrain.errors import (
    BehindCamera,
    DegenerateMarker,
    FrameMismatch,
    InsufficientCoverage,
    NoGroundIntersection,
)
from aerialterrain.geometry import (
    AttitudeSample,
    CameraModel,
    Footprint,
    GeoRaster,
    GroundGrid,
    MarkerObservation,
    RigidTransform,
    aerial_gsd_and_heading,
    backproject_pixel,
    bev_resample,
    camera_from_ground,
    camera_mount,
    compose,
    extract_patch,
    ground_from_attitude,
    ground_pixel_footprint,
    project_ground_point,
    quat_from_axis_angle,
)

unit = st.floats(-1.0, 1.0, allow_nan=False)
angles = st.floats(-np.pi, np.pi, allow_nan=False)
coords = st.floats(-10.0, 10.0, allow_nan=False)


@st.composite
def transforms(draw, frames=("a", "b")):
    axis = np.array([draw(unit), draw(unit), draw(unit)])
    if np.linalg.norm(axis) < 1e-3:
        axis = np.array([0.0, 0.0, 1.0])
    q = quat_from_axis_angle(axis, draw(angles))
    t = [draw(coords), draw(coords), draw(coords)]
    return RigidTransform(q, t, frames[0], frames[1])


def assert_identity(t, tol=1e-9):
    np.testing.assert_allclose(t.as_vector(), [1, 0, 0, 0, 0, 0, 0], atol=tol)


def nadir_cam_from_ground(height):
    """Camera looking straight down from ``height``; image u along +x, v along -y."""
    ground_from_cam = np.array([[1.0, 0, 0], [0, -1.0, 0], [0, 0, -1.0]])
    return RigidTransform.from_matrix(ground_from_cam, [0, 0, height], "camera", "ground").inverse()


def level_cam_from_ground(height):
    """Forward camera with its optical axis parallel to the ground."""
    return camera_from_ground(AttitudeSample(0, 0, 0), 0.0, camera_mount(0, 0, height, 0.0))


# --------------------------------------------------------------------------- compose


def test_compose_identity_left():
    t = RigidTransform(quat_from_axis_angle([0, 1, 0], 0.3), [1, 2, 3], "a", "b")
    out = compose(RigidTransform.identity("b"), t)
    np.testing.assert_allclose(out.as_vector(), t.as_vector(), atol=1e-12)
    assert (out.from_frame, out.to_frame) == ("a", "b")


def test_compose_inverse_is_identity():
    t = RigidTransform(quat_from_axis_angle([1, 1, 0], 1.1), [0.5, -2, 3], "a", "b")
    assert_identity(compose(t, t.inverse()))
    assert_identity(compose(t.inverse(), t))


def test_compose_pure_translations():
    a = RigidTransform([1, 0, 0, 0], [1, 0, 0], "b", "c")
    b = RigidTransform([1, 0, 0, 0], [0, 2, 0], "a", "b")
    out = compose(a, b)
    np.testing.assert_allclose(out.translation, [1, 2, 0])
    assert (out.from_frame, out.to_frame) == ("a", "c")


def test_compose_mismatched_frames():
    a = RigidTransform([1, 0, 0, 0], [0, 0, 0], "x", "y")
    b = RigidTransform([1, 0, 0, 0], [0, 0, 0], "a", "b")
    with pytest.raises(FrameMismatch):
        compose(a, b)


def test_compose_matches_homogeneous_matrices():
    a = RigidTransform(quat_from_axis_angle([0, 0, 1], 0.7), [1, 0, 2], "b", "c")
    b = RigidTransform(quat_from_axis_angle([1, 0, 0], -0.4), [0, 3, 0], "a", "b")
    np.testing.assert_allclose(compose(a, b).as_homogeneous(), a.as_homogeneous() @ b.as_homogeneous(), atol=1e-12)


@given(transforms(("a", "b")), transforms(("b", "c")), transforms(("c", "d")))
def test_compose_associative(t1, t2, t3):
    left = compose(t3, compose(t2, t1))
    right = compose(compose(t3, t2), t1)
    np.testing.assert_allclose(left.as_vector(), right.as_vector(), atol=1e-9)


@given(transforms())
def test_quaternion_unit_norm_and_inverse(t):
    assert abs(np.linalg.norm(t.rotation) - 1.0) < 1e-9
    assert_identity(compose(t, t.inverse()))


# --------------------------------------------------------------------------- attitude chain


def test_ground_from_attitude_level():
    t = ground_from_attitude(AttitudeSample(0, 0, 0), 0.5)
    assert_identity(RigidTransform(t.rotation, [0, 0, 0], "robot", "robot"))
    np.testing.assert_allclose(t.translation, [0, 0, 0.5])


@pytest.mark.parametrize("p", [-0.4, 0.1, 0.6])
def test_ground_from_attitude_pitch_tilts_x_axis(p):
    t = ground_from_attitude(AttitudeSample(0, 0, p), 0.0)
    assert t.matrix[:, 0][2] == pytest.approx(-np.sin(p), abs=1e-12)


@pytest.mark.parametrize("r", [-0.4, 0.1, 0.6])
def test_ground_from_attitude_roll_tilts_y_axis(r):
    t = ground_from_attitude(AttitudeSample(0, r, 0), 0.0)
    assert t.matrix[:, 1][2] == pytest.approx(np.sin(r), abs=1e-12)


def test_attitude_rejects_inverted():
    with pytest.raises(ValueError):
        AttitudeSample(0, np.pi / 2, 0)


# --------------------------------------------------------------------------- projection


CAM = CameraModel(500, 500, 320, 240, 640, 480)


def test_project_principal_point():
    ident = RigidTransform.identity("ground", "camera")
    np.testing.assert_allclose(project_ground_point([0, 0, 1], ident, CAM), [320, 240])


def test_project_offset_point():
    ident = RigidTransform.identity("ground", "camera")
    np.testing.assert_allclose(project_ground_point([0.1, 0, 1], ident, CAM), [370, 240])


def test_project_behind_camera():
    ident = RigidTransform.identity("ground", "camera")
    with pytest.raises(BehindCamera):
        project_ground_point([0, 0, -1], ident, CAM)


@given(st.floats(1.0, 15.0), st.floats(-3.0, 3.0), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_project_backproject_round_trip(x, y, roll, pitch):
    calib_cam = CameraModel(400, 400, 320, 240, 640, 480)
    cfg = camera_from_ground(AttitudeSample(0, roll, pitch), 0.4, camera_mount(0.4, 0, 0.8, np.deg2rad(25)))
    uv = project_ground_point([x, y, 0.0], cfg, calib_cam)
    q = backproject_pixel(uv, cfg, calib_cam)
    np.testing.assert_allclose(q[:2], [x, y], atol=1e-6)
    assert abs(q[2]) < 1e-9


def test_backproject_above_horizon():
    cfg = level_cam_from_ground(1.0)
    with pytest.raises(NoGroundIntersection):
        backproject_pixel([320, 100], cfg, CAM)


# --------------------------------------------------------------------------- BEV


def checker(x, y, square=0.5):
    return np.where((np.floor(x / square) + np.floor(y / square)) % 2 == 0, 200.0, 50.0)


def test_bev_nadir_checkerboard_matches_analytic():
    h = 5.0
    cam = CameraModel(400, 400, 199.5, 199.5, 400, 400)
    cfg = nadir_cam_from_ground(h)
    uu, vv = np.meshgrid(np.arange(400.0), np.arange(400.0))
    img = checker((uu - cam.cx) / cam.fx * h, -(vv - cam.cy) / cam.fy * h)
    grid = GroundGrid((-2.0, -2.0), 0.05, 80, 80)
    raster, mask = bev_resample(img, cfg, cam, grid)
    assert mask.all()
    gx, gy = grid.cell_centers()
    truth = checker(gx, gy)
    pixel = h / cam.fx
    dist_to_edge = np.minimum(np.abs(gx / 0.5 - np.round(gx / 0.5)), np.abs(gy / 0.5 - np.round(gy / 0.5))) * 0.5
    away = dist_to_edge > 2 * pixel
    assert away.sum() > 0.5 * away.size
    assert np.max(np.abs(raster[away] - truth[away])) <= 1.0


def test_bev_cells_behind_camera_masked():
    cfg = level_cam_from_ground(1.0)
    grid = GroundGrid((-5.0, -1.0), 0.5, 20, 4)
    _, mask = bev_resample(np.zeros((480, 640)), cfg, CAM, grid)
    gx, _ = grid.cell_centers()
    assert not mask[gx < 0].any()


# --------------------------------------------------------------------------- pixel footprint


def along_oracle(f, h, cy, v):
    """Ground distance of the top and bottom edges of image row ``v`` for a level camera."""
    d = lambda row: f * h / (row - cy)  # noqa: E731
    return d(v - 0.5) - d(v + 0.5)


def test_footprint_level_camera_matches_oracle():
    cam = CameraModel(1000, 1000, 320, 240, 640, 2000)
    cfg = level_cam_from_ground(1.0)
    d = 10.0
    v = cam.cy + cam.fy * 1.0 / d
    along, cross = ground_pixel_footprint(cfg, cam, (cam.cx, v))
    assert along == pytest.approx(along_oracle(1000, 1.0, cam.cy, v), rel=1e-9)
    assert along == pytest.approx(d * d / (1000 * 1.0), rel=0.01)
    assert cross == pytest.approx(d / 1000, rel=1e-6)


def test_footprint_grows_quadratically():
    cam = CameraModel(1000, 1000, 320, 240, 640, 2000)
    cfg = level_cam_from_ground(1.0)
    a5, _ = ground_pixel_footprint(cfg, cam, (320, 240 + 1000 / 5.0))
    a10, _ = ground_pixel_footprint(cfg, cam, (320, 240 + 1000 / 10.0))
    assert a10 / a5 == pytest.approx(4.0, rel=0.05)


def test_footprint_nadir_uniform():
    cam = CameraModel(2732, 2732, 1000, 750, 2000, 1500)
    cfg = nadir_cam_from_ground(10.0)
    for px in [(1000, 750), (10, 10), (1990, 1400)]:
        along, cross = ground_pixel_footprint(cfg, cam, px)
        assert along == pytest.approx(0.00366, abs=5e-6)
        assert cross == pytest.approx(0.00366, abs=5e-6)


def test_footprint_above_horizon_raises():
    cfg = level_cam_from_ground(1.0)
    with pytest.raises(NoGroundIntersection):
        ground_pixel_footprint(cfg, CAM, (320, 200))


# --------------------------------------------------------------------------- marker


def square_marker(side, center=(500.0, 400.0), angle=0.0):
    """Corners clockwise from front-left for a marker whose front points along ``angle`` in the image."""
    h = side / 2
    # image frame: v points down, so "left" of a marker facing +u is -v
    local = np.array([[h, -h], [h, h], [-h, h], [-h, -h]])
    c, s = np.cos(angle), np.sin(angle)
    return local @ np.array([[c, s], [-s, c]]) + center


def test_marker_gsd_example():
    gsd, heading, center = aerial_gsd_and_heading(MarkerObservation(square_marker(100)))
    assert gsd == 1.4 / 400
    assert gsd == pytest.approx(0.0035, rel=1e-15)
    assert heading == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(center, [500, 400])


def test_marker_rotation_shifts_heading():
    _, h0, _ = aerial_gsd_and_heading(MarkerObservation(square_marker(80, angle=0.3)))
    _, h1, _ = aerial_gsd_and_heading(MarkerObservation(square_marker(80, angle=0.3 + np.pi / 2)))
    assert np.angle(np.exp(1j * (h1 - h0))) == pytest.approx(np.pi / 2, abs=1e-12)


def test_marker_degenerate():
    with pytest.raises(DegenerateMarker):
        aerial_gsd_and_heading(MarkerObservation(np.full((4, 2), 10.0)))


@given(st.floats(0.1, 10.0), st.floats(20.0, 300.0), angles)
def test_marker_scale_invariance(s, side, angle):
    corners = square_marker(side, angle=angle)
    g0, h0, _ = aerial_gsd_and_heading(MarkerObservation(corners))
    g1, h1, _ = aerial_gsd_and_heading(MarkerObservation(corners * s))
    assert g1 == pytest.approx(g0 / s, rel=1e-9)
    assert abs(np.angle(np.exp(1j * (h1 - h0)))) < 1e-9


# --------------------------------------------------------------------------- patches


def test_extract_constant_patch():
    ctx = GeoRaster(np.full((200, 200), 77.0), 0.02, (0.0, 0.0))
    patch, cov = extract_patch(ctx.image, ctx, Footprint(2.0, 2.0, 0.7, 1.5), 32)
    assert cov == 1.0
    np.testing.assert_allclose(patch, 77.0)


def test_extract_half_outside_rejected():
    ctx = GeoRaster(np.full((200, 200), 77.0), 0.02, (0.0, 0.0))
    with pytest.raises(InsufficientCoverage):
        extract_patch(ctx.image, ctx, Footprint(0.0, 2.0, 0.0, 1.5), 32)


def rotate_nearest_supersampled(src, ctx, theta, center, factor=8):
    """Independent oracle: S'(p) = S(c + R(theta)(p - c)) by nearest lookup, box-averaged over factor² subsamples."""
    h, w = src.shape
    out = np.zeros_like(src)
    offs = (np.arange(factor) + 0.5) / factor - 0.5
    c, s = np.cos(theta), np.sin(theta)
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    for dr in offs:
        for dc in offs:
            x, y = ctx.pixel_to_world(rows + dr, cols + dc)
            px, py = x - center[0], y - center[1]
            qx = center[0] + c * px - s * py
            qy = center[1] + s * px + c * py
            r, k = ctx.world_to_pixel(qx, qy)
            r = np.clip(np.rint(r).astype(int), 0, h - 1)
            k = np.clip(np.rint(k).astype(int), 0, w - 1)
            out += src[r, k]
    return out / factor**2


@pytest.mark.parametrize("theta", [0.4, 1.3, -2.2])
def test_extract_patch_rotation_equivariance(theta):
    n = 160
    gsd = 0.02
    rows, cols = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    src = 128 + 60 * np.sin(2 * np.pi * cols / 48.0) * np.cos(2 * np.pi * rows / 56.0)
    ctx = GeoRaster(src, gsd, (0.0, 0.0))
    center = (n * gsd / 2, n * gsd / 2)
    rotated = rotate_nearest_supersampled(src, ctx, theta, center)
    ctx_rot = GeoRaster(rotated, gsd, (0.0, 0.0))
    p_rot, _ = extract_patch(src, ctx, Footprint(center[0], center[1], theta, 1.5), 48)
    p_ref, _ = extract_patch(rotated, ctx_rot, Footprint(center[0], center[1], 0.0, 1.5), 48)
    assert np.max(np.abs(p_rot - p_ref)) <= 2.0


@given(st.floats(-np.pi, np.pi), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_extract_patch_translation_equivariance(yaw, dx, dy):
    n = 200
    gsd = 0.02
    rows, cols = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    src = 100 + 50 * np.sin(cols / 9.0) + 30 * np.cos(rows / 13.0)
    a = GeoRaster(src, gsd, (0.0, 0.0))
    b = GeoRaster(src, gsd, (dx, dy))
    pa, _ = extract_patch(src, a, Footprint(2.0, 2.0, yaw, 1.5), 32)
    pb, _ = extract_patch(src, b, Footprint(2.0 + dx, 2.0 + dy, yaw, 1.5), 32)
    np.testing.assert_allclose(pa, pb, atol=1e-6)


def test_camera_model_validation():
    with pytest.raises(ValueError):
        CameraModel(0, 1, 1, 1, 4, 4)
    with pytest.raises(ValueError):
        CameraModel(1, 1, 5, 1, 4, 4)
