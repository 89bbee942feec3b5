"""Frames, rigid transforms, pinhole projection, BEV resampling and aerial georeferencing.

Conventions
-----------
ground frame  : Z up, origin on the ground below the robot, X along the robot heading
robot frame   : X forward, Y left, Z up
camera frame  : Z forward (optical axis), X right, Y down
image pixels  : (u, v) = (column, row); pixel centres sit on integer coordinates

A ``RigidTransform`` with ``from_frame="a"`` and ``to_frame="b"`` maps point
coordinates expressed in ``a`` to coordinates expressed in ``b``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BehindCamera,
    DegenerateMarker,
    FrameMismatch,
    InsufficientCoverage,
    NoGroundIntersection,
)
from .kernels import bilinear_sample

MIN_DEPTH = 1e-6
DEFAULT_MARKER_PERIMETER = 1.4
DEFAULT_MIN_COVERAGE = 0.95


# --------------------------------------------------------------------------- quaternions

def quat_multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(m):
    """Rotation matrix to unit quaternion (w, x, y, z), Shepperd's method."""
    m = np.asarray(m, dtype=float)
    tr = np.trace(m)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    return q / np.linalg.norm(q)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def rot_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def wrap_angle(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


# --------------------------------------------------------------------------- transforms

@dataclass(frozen=True)
class RigidTransform:
    """SE(3) transform mapping ``from_frame`` coordinates into ``to_frame``."""

    rotation: np.ndarray
    translation: np.ndarray
    from_frame: str
    to_frame: str

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=float).reshape(4)
        norm = np.linalg.norm(q)
        if not np.isfinite(norm) or norm < 1e-12:
            raise ValueError("rotation quaternion must be non-zero and finite")
        q = q / norm
        if q[0] < 0:
            q = -q
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, frame_from="a", frame_to=None):
        return cls(np.array([1.0, 0, 0, 0]), np.zeros(3), frame_from, frame_to or frame_from)

    @classmethod
    def from_matrix(cls, rotation_matrix, translation, from_frame, to_frame):
        return cls(matrix_to_quat(rotation_matrix), translation, from_frame, to_frame)

    @property
    def matrix(self):
        return quat_to_matrix(self.rotation)

    def as_homogeneous(self):
        out = np.eye(4)
        out[:3, :3] = self.matrix
        out[:3, 3] = self.translation
        return out

    def apply(self, points):
        """Transform an (..., 3) array of points."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.matrix.T + self.translation

    def inverse(self):
        q = self.rotation * np.array([1.0, -1.0, -1.0, -1.0])
        t = -quat_to_matrix(q) @ self.translation
        return RigidTransform(q, t, self.to_frame, self.from_frame)

    def __matmul__(self, other):
        return compose(self, other)

    def as_vector(self):
        return np.concatenate([self.rotation, self.translation])


def compose(a, b):
    """``a ∘ b``: apply ``b`` first, then ``a``; ``a.from_frame`` must equal ``b.to_frame``."""
    if a.from_frame != b.to_frame:
        raise FrameMismatch(f"cannot compose {a.from_frame}->{a.to_frame} after {b.from_frame}->{b.to_frame}")
    q = quat_multiply(a.rotation, b.rotation)
    q = q / np.linalg.norm(q)
    t = a.matrix @ b.translation + a.translation
    return RigidTransform(q, t, b.from_frame, a.to_frame)


# --------------------------------------------------------------------------- domain types

@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def K(self):
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])


@dataclass(frozen=True)
class AttitudeSample:
    timestamp: float
    roll: float
    pitch: float

    def __post_init__(self):
        if abs(self.roll) >= np.pi / 2 or abs(self.pitch) >= np.pi / 2:
            raise ValueError("roll and pitch must stay within (-pi/2, pi/2)")


@dataclass(frozen=True)
class MarkerObservation:
    """Marker corners in aerial pixels, clockwise from the marker's front-left corner."""

    corners: np.ndarray
    known_perimeter: float = DEFAULT_MARKER_PERIMETER

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=float).reshape(4, 2)
        object.__setattr__(self, "corners", c)
        if self.known_perimeter <= 0:
            raise ValueError("known_perimeter must be positive")


@dataclass(frozen=True)
class GroundGrid:
    """Raster on the ground plane; cell (row, col) centre is
    ``(origin[0] + (col + 0.5) * cell_size, origin[1] + (row + 0.5) * cell_size)``."""

    origin: tuple
    cell_size: float
    width: int
    height: int

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must have at least one cell")

    @classmethod
    def forward(cls, length=12.0, half_width=6.0, cell_size=0.025):
        """Grid covering ``[0, length]`` ahead of the robot and ``±half_width`` laterally."""
        return cls((0.0, -half_width), cell_size, int(round(length / cell_size)), int(round(2 * half_width / cell_size)))

    def cell_centers(self):
        xs = self.origin[0] + (np.arange(self.width) + 0.5) * self.cell_size
        ys = self.origin[1] + (np.arange(self.height) + 0.5) * self.cell_size
        gx, gy = np.meshgrid(xs, ys)
        return gx, gy

    def ground_to_pixel(self, x, y):
        cols = (np.asarray(x) - self.origin[0]) / self.cell_size - 0.5
        rows = (np.asarray(y) - self.origin[1]) / self.cell_size - 0.5
        return rows, cols


# --------------------------------------------------------------------------- robot/camera chain

def ground_from_attitude(att, robot_height):
    """Robot -> ground transform from IMU roll/pitch; yaw is zero by construction."""
    rotation = rot_y(att.pitch) @ rot_x(att.roll)
    return RigidTransform.from_matrix(rotation, [0.0, 0.0, robot_height], "robot", "ground")


def camera_mount(x, y, z, pitch_down, yaw=0.0):
    """Camera -> robot extrinsic for a forward camera pitched down by ``pitch_down`` radians."""
    optical_to_robot = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
    rotation = rot_z(yaw) @ rot_y(pitch_down) @ optical_to_robot
    return RigidTransform.from_matrix(rotation, [x, y, z], "camera", "robot")


def camera_from_ground(att, robot_height, robot_from_camera):
    ground_from_robot = ground_from_attitude(att, robot_height)
    return compose(robot_from_camera.inverse(), ground_from_robot.inverse())


def world_from_ground(x, y, yaw):
    """Ground (robot heading) frame -> world frame, both Z-up on the same plane."""
    return RigidTransform.from_matrix(rot_z(yaw), [x, y, 0.0], "ground", "world")


# --------------------------------------------------------------------------- projection

def project_points(points, cam_from_ground, cam):
    """Vectorised pinhole projection; returns ``(uv, in_front)``."""
    pc = cam_from_ground.apply(points)
    z = pc[..., 2]
    in_front = z > MIN_DEPTH
    safe_z = np.where(in_front, z, 1.0)
    u = cam.fx * pc[..., 0] / safe_z + cam.cx
    v = cam.fy * pc[..., 1] / safe_z + cam.cy
    return np.stack([u, v], axis=-1), in_front


def project_ground_point(p_ground, cam_from_ground, cam):
    uv, ok = project_points(np.asarray(p_ground, dtype=float).reshape(1, 3), cam_from_ground, cam)
    if not ok[0]:
        raise BehindCamera(f"point {p_ground} has non-positive depth")
    return uv[0]


def backproject_to_ground(uv, cam_from_ground, cam):
    """Intersect pixel rays with the z=0 ground plane.

    Returns ``(points, hit)``; ``hit`` is false where the ray is parallel to or
    points away from the plane.
    """
    uv = np.asarray(uv, dtype=float)
    rays_cam = np.stack([(uv[..., 0] - cam.cx) / cam.fx, (uv[..., 1] - cam.cy) / cam.fy, np.ones(uv.shape[:-1])], axis=-1)
    ground_from_cam = cam_from_ground.inverse()
    origin = ground_from_cam.translation
    rays = rays_cam @ ground_from_cam.matrix.T
    dz = rays[..., 2]
    hit = dz < -1e-12
    s = np.where(hit, -origin[2] / np.where(hit, dz, -1.0), np.nan)
    hit &= s > 0
    pts = origin + s[..., None] * rays
    return pts, hit


def backproject_pixel(pixel, cam_from_ground, cam):
    pts, hit = backproject_to_ground(np.asarray(pixel, dtype=float).reshape(1, 2), cam_from_ground, cam)
    if not hit[0]:
        raise NoGroundIntersection(f"pixel {pixel} does not see the ground")
    return pts[0]


def pixel_footprints(cam_from_ground, cam, u, v):
    """Vectorised along-view and cross-view ground vectors of pixels.

    Returns ``(along, cross, hit)`` where ``along``/``cross`` are (..., 3)
    differences of back-projected edge midpoints.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    stack = lambda du, dv: np.stack([u + du, v + dv], axis=-1)  # noqa: E731
    top, h1 = backproject_to_ground(stack(0.0, -0.5), cam_from_ground, cam)
    bottom, h2 = backproject_to_ground(stack(0.0, 0.5), cam_from_ground, cam)
    left, h3 = backproject_to_ground(stack(-0.5, 0.0), cam_from_ground, cam)
    right, h4 = backproject_to_ground(stack(0.5, 0.0), cam_from_ground, cam)
    return top - bottom, right - left, h1 & h2 & h3 & h4


def ground_pixel_footprint(cam_from_ground, cam, pixel):
    """Ground extent (along-view, cross-view) in meters of one pixel."""
    along, cross, hit = pixel_footprints(cam_from_ground, cam, [pixel[0]], [pixel[1]])
    if not hit[0]:
        raise NoGroundIntersection(f"pixel {pixel} footprint leaves the ground plane")
    return float(np.linalg.norm(along[0])), float(np.linalg.norm(cross[0]))


# --------------------------------------------------------------------------- resampling

def sample_image(image, rows, cols):
    """Bilinear sampling of a 2-D or (H, W, C) image; returns ``(values, valid)``."""
    image = np.asarray(image)
    if image.ndim == 2:
        return bilinear_sample(image.astype(np.float64, copy=False), rows, cols)
    channels = []
    valid = None
    for ch in range(image.shape[2]):
        vals, valid = bilinear_sample(np.ascontiguousarray(image[..., ch], dtype=np.float64), rows, cols)
        channels.append(vals)
    return np.stack(channels, axis=-1), valid


def bev_resample(image, cam_from_ground, cam, grid):
    """Resample a camera image onto a ground grid under the flat-ground hypothesis."""
    gx, gy = grid.cell_centers()
    pts = np.stack([gx, gy, np.zeros_like(gx)], axis=-1)
    uv, in_front = project_points(pts, cam_from_ground, cam)
    vals, inside = sample_image(image, uv[..., 1], uv[..., 0])
    mask = in_front & inside
    if vals.ndim == 3:
        vals[~mask] = 0.0
    else:
        vals = np.where(mask, vals, 0.0)
    return vals, mask


# --------------------------------------------------------------------------- aerial georeferencing

def aerial_gsd_and_heading(m):
    """Ground sampling distance, robot heading (image frame) and marker centre from marker corners."""
    c = m.corners
    edges = np.roll(c, -1, axis=0) - c
    perimeter_px = float(np.sum(np.linalg.norm(edges, axis=1)))
    if perimeter_px < 4.0:
        raise DegenerateMarker(f"marker perimeter {perimeter_px:.2f} px is too small")
    gsd = m.known_perimeter / perimeter_px
    center = c.mean(axis=0)
    # corners: front-left, front-right, rear-right, rear-left
    rear_mid = 0.5 * (c[2] + c[3])
    direction = center - rear_mid
    heading = float(np.arctan2(direction[1], direction[0]))
    return gsd, heading, center


@dataclass(frozen=True)
class Footprint:
    """Oriented square on the ground in world coordinates."""

    x: float
    y: float
    yaw: float
    side: float

    def sample_points(self, resolution):
        """World (x, y) of the patch sample grid; row 0 is the front edge, column 0 the left edge."""
        if self.side <= 0:
            raise ValueError("footprint side must be positive")
        offs = self.side / 2.0 - (np.arange(resolution) + 0.5) * self.side / resolution
        fwd, left = np.meshgrid(offs, offs, indexing="ij")
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        wx = self.x + fwd * c - left * s
        wy = self.y + fwd * s + left * c
        return wx, wy

    def corners(self):
        h = self.side / 2.0
        local = np.array([[h, h], [h, -h], [-h, -h], [-h, h]])
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + [self.x, self.y]


@dataclass(frozen=True)
class BevContext:
    """BEV raster plus the world pose of the ground frame it was built in."""

    raster: np.ndarray
    mask: np.ndarray
    grid: GroundGrid
    robot_x: float
    robot_y: float
    robot_yaw: float

    def world_to_pixel(self, wx, wy):
        dx = np.asarray(wx) - self.robot_x
        dy = np.asarray(wy) - self.robot_y
        c, s = np.cos(self.robot_yaw), np.sin(self.robot_yaw)
        gx = c * dx + s * dy
        gy = -s * dx + c * dy
        return self.grid.ground_to_pixel(gx, gy)

    @property
    def image(self):
        return self.raster


@dataclass(frozen=True)
class AerialContext:
    """Aerial frame georeferenced by the robot's marker: gsd, image heading, marker centre and robot world pose."""

    image: np.ndarray
    gsd: float
    heading: float
    center: np.ndarray
    robot_x: float
    robot_y: float
    robot_yaw: float
    mask: np.ndarray = field(default=None)

    @classmethod
    def from_marker(cls, image, marker, robot_x, robot_y, robot_yaw):
        gsd, heading, center = aerial_gsd_and_heading(marker)
        return cls(image, gsd, heading, center, robot_x, robot_y, robot_yaw)

    def world_to_pixel(self, wx, wy):
        dx = np.asarray(wx) - self.robot_x
        dy = np.asarray(wy) - self.robot_y
        c, s = np.cos(self.robot_yaw), np.sin(self.robot_yaw)
        fwd = c * dx + s * dy
        left = -s * dx + c * dy
        ch, sh = np.cos(self.heading), np.sin(self.heading)
        # forward -> (cos h, sin h); left -> (sin h, -cos h) since image v points down
        u = self.center[0] + (fwd * ch + left * sh) / self.gsd
        v = self.center[1] + (fwd * sh - left * ch) / self.gsd
        return v, u


@dataclass(frozen=True)
class GeoRaster:
    """North-up orthoimage: ``origin`` is the world (x, y) of the lower-left image corner."""

    image: np.ndarray
    gsd: float
    origin: tuple
    mask: np.ndarray = field(default=None)

    @property
    def shape(self):
        return self.image.shape[:2]

    @property
    def extent(self):
        h, w = self.shape
        return w * self.gsd, h * self.gsd

    def world_to_pixel(self, wx, wy):
        h = self.shape[0]
        cols = (np.asarray(wx) - self.origin[0]) / self.gsd - 0.5
        rows = h - 0.5 - (np.asarray(wy) - self.origin[1]) / self.gsd
        return rows, cols

    def pixel_to_world(self, rows, cols):
        h = self.shape[0]
        x = self.origin[0] + (np.asarray(cols) + 0.5) * self.gsd
        y = self.origin[1] + (h - 0.5 - np.asarray(rows)) * self.gsd
        return x, y


def extract_patch(image, context, footprint, out_resolution, min_coverage=DEFAULT_MIN_COVERAGE):
    """Resample an oriented ground footprint into an ``out_resolution``² patch.

    ``context`` is any object with ``world_to_pixel(x, y) -> (rows, cols)`` and an
    optional ``mask`` (BEV validity). Returns ``(patch, coverage)``; raises
    ``InsufficientCoverage`` below ``min_coverage``. Missing samples are filled
    with the mean of the valid ones.
    """
    wx, wy = footprint.sample_points(out_resolution)
    rows, cols = context.world_to_pixel(wx, wy)
    vals, valid = sample_image(image, rows, cols)
    mask = getattr(context, "mask", None)
    if mask is not None:
        mvals, _ = bilinear_sample(np.asarray(mask, dtype=np.float64), rows, cols)
        valid &= mvals > 0.999
    coverage = float(valid.mean())
    if coverage < min_coverage:
        raise InsufficientCoverage(coverage, min_coverage)
    if not valid.all():
        fill = vals[valid].mean(axis=0)
        vals[~valid] = fill
    return vals, coverage


def footprint_inside(context, footprint, margin_px=0.0):
    """Cheap pre-check: are all four footprint corners inside the source raster?"""
    corners = footprint.corners()
    rows, cols = context.world_to_pixel(corners[:, 0], corners[:, 1])
    img = context.image if getattr(context, "image", None) is not None else context.raster
    h, w = np.asarray(img).shape[:2]
    return bool(np.all((rows >= -0.5 - margin_px) & (rows <= h - 0.5 + margin_px)
                       & (cols >= -0.5 - margin_px) & (cols <= w - 0.5 + margin_px)))
