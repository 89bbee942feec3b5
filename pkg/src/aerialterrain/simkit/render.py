"""Aerial (nadir, uniform GSD) and onboard FPV rendering of synthetic scenes."""

from dataclasses import dataclass

import numpy as np

from ..dataset import Frame
from ..geometry import (
    DEFAULT_MARKER_PERIMETER,
    AttitudeSample,
    CameraModel,
    GeoRaster,
    backproject_to_ground,
    camera_mount,
    compose,
    ground_from_attitude,
    pixel_footprints,
    world_from_ground,
)
from ..io import Calibration

SKY = 210.0
DEFAULT_FOCAL = 2732.0


def default_calibration(width=320, height=240, focal=260.0, pitch_deg=28.0, mount_height=0.8, robot_height=0.4):
    """Forward camera ``mount_height + robot_height`` above ground, pitched ``pitch_deg`` down."""
    cam = CameraModel(fx=focal, fy=focal, cx=(width - 1) / 2, cy=(height - 1) / 2, width=width, height=height)
    return Calibration(cam, camera_mount(0.4, 0.0, mount_height, np.deg2rad(pitch_deg)), robot_height=robot_height)


def _render_points(scene, wx, wy, gsd, occlusion, sub_offsets):
    """Box-filtered texture value over each pixel using 2x2 supersampling on a matching pyramid level."""
    level = int(max(np.floor(np.log2(max(gsd / scene.texture_res, 1.0))), 0))
    acc = np.zeros(np.shape(wx))
    for ox, oy in sub_offsets:
        acc += scene.sample(wx + ox, wy + oy, level, occlusion)
    return acc / len(sub_offsets)


def render_aerial(scene, altitude=10.0, gsd=None, region=None, occlusion=False, focal=DEFAULT_FOCAL):
    """North-up nadir orthoimage of ``region`` = (x0, y0, x1, y1) in meters.

    ``gsd`` defaults to ``altitude / focal`` (3.66 mm at 10 m with the default
    focal length). Occluder cells show their ground texture when ``occlusion``
    is set, their vegetation texture otherwise.
    """
    gsd = altitude / focal if gsd is None else gsd
    if gsd <= 0:
        raise ValueError("gsd must be positive")
    x0, y0, x1, y1 = region if region is not None else (0.0, 0.0, scene.width, scene.height)
    w = int(round((x1 - x0) / gsd))
    h = int(round((y1 - y0) / gsd))
    cols = np.arange(w)
    rows = np.arange(h)
    cc, rr = np.meshgrid(cols, rows)
    wx = x0 + (cc + 0.5) * gsd
    wy = y0 + (h - 0.5 - rr) * gsd
    q = gsd / 4
    img = _render_points(scene, wx, wy, gsd, occlusion, [(-q, -q), (q, -q), (-q, q), (q, q)])
    return GeoRaster(img, gsd, (x0, y0))


@dataclass(frozen=True)
class AerialView:
    """Rotated nadir view: pixel (u, v) -> world via centre, rotation and gsd."""

    center_x: float
    center_y: float
    rotation: float
    gsd: float
    width: int
    height: int

    def pixel_to_world(self, u, v):
        e = (np.asarray(u) - (self.width - 1) / 2) * self.gsd
        n = -(np.asarray(v) - (self.height - 1) / 2) * self.gsd
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        return self.center_x + c * e - s * n, self.center_y + s * e + c * n

    def world_to_pixel(self, x, y):
        dx = np.asarray(x) - self.center_x
        dy = np.asarray(y) - self.center_y
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        e = c * dx + s * dy
        n = -s * dx + c * dy
        return e / self.gsd + (self.width - 1) / 2, -n / self.gsd + (self.height - 1) / 2


def render_aerial_view(scene, view, occlusion=False):
    cc, rr = np.meshgrid(np.arange(view.width), np.arange(view.height))
    subs = []
    for du, dv in ((-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)):
        subs.append(view.pixel_to_world(cc + du, rr + dv))
    level = int(max(np.floor(np.log2(max(view.gsd / scene.texture_res, 1.0))), 0))
    acc = sum(scene.sample(x, y, level, occlusion) for x, y in subs)
    return acc / 4.0


def marker_corners(view, robot_x, robot_y, robot_yaw, perimeter=DEFAULT_MARKER_PERIMETER):
    """Pixel corners of the robot's square marker, clockwise from front-left."""
    h = perimeter / 8.0
    local = np.array([[h, h], [h, -h], [-h, -h], [-h, h]])
    c, s = np.cos(robot_yaw), np.sin(robot_yaw)
    wx = robot_x + local[:, 0] * c - local[:, 1] * s
    wy = robot_y + local[:, 0] * s + local[:, 1] * c
    u, v = view.world_to_pixel(wx, wy)
    return np.stack([u, v], axis=1)


def to_uint8(img, noise_std=0.0, rng=None):
    """Add Gaussian sensor noise and quantise to 8 bits, as a camera would."""
    img = np.asarray(img, dtype=float)
    if noise_std > 0:
        img = img + noise_std * rng.standard_normal(img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def simulate_aerial_frames(scene, trajectory, period=2.0, size_m=16.0, gsd=0.02, seed=0, occlusion=False,
                           hover_jitter=1.0, perimeter=DEFAULT_MARKER_PERIMETER, noise_std=2.0):
    """Drone frames hovering over the robot every ``period`` seconds, each with a random image rotation.

    Images are 8-bit with ``noise_std`` gray levels of sensor noise.
    """
    rng = np.random.default_rng(seed)
    n_px = int(round(size_m / gsd))
    frames = []
    times = np.arange(trajectory.t[0], trajectory.t[-1] + 1e-9, period)
    for k, t in enumerate(times):
        x, y, yaw = (float(a) for a in trajectory.pose_at(t))
        view = AerialView(x + hover_jitter * rng.uniform(-1, 1), y + hover_jitter * rng.uniform(-1, 1),
                          float(rng.uniform(-np.pi, np.pi)), gsd, n_px, n_px)
        img = to_uint8(render_aerial_view(scene, view, occlusion), noise_std, rng)
        frames.append(Frame(f"uav{k:05d}", float(t), "uav", None, marker_corners(view, x, y, yaw, perimeter), img))
    return frames


def world_from_camera_at(calib, x, y, yaw, roll=0.0, pitch=0.0):
    att = AttitudeSample(0.0, roll, pitch)
    ground = compose(ground_from_attitude(att, calib.robot_height), calib.robot_from_camera)
    return compose(world_from_ground(x, y, yaw), ground)


def render_fpv(scene, pose, calib=None, along_samples=8):
    """Perspective view of the scene's above-ground texture from the robot's camera.

    Each pixel averages ``along_samples`` x 2 texture samples spread over its
    ground footprint (back-projected pixel edges) on a pyramid level matched
    to the footprint, so distant ground blurs anisotropically along the view
    direction. Pixels that miss the ground get a constant sky value.
    ``pose`` is (x, y, yaw) or (x, y, yaw, roll, pitch).
    """
    calib = calib or default_calibration()
    x, y, yaw = pose[:3]
    roll, pitch = (pose[3], pose[4]) if len(pose) >= 5 else (0.0, 0.0)
    cam = calib.camera
    world_from_cam = world_from_camera_at(calib, x, y, yaw, roll, pitch)
    cam_from_world = world_from_cam.inverse()
    uu, vv = np.meshgrid(np.arange(cam.width, dtype=float), np.arange(cam.height, dtype=float))
    centre, hit = backproject_to_ground(np.stack([uu, vv], axis=-1), cam_from_world, cam)
    along, cross, fhit = pixel_footprints(cam_from_world, cam, uu, vv)
    hit &= fhit
    img = np.full(uu.shape, SKY)
    if not hit.any():
        return img
    c = centre[hit]
    a = along[hit][:, :2]
    b = cross[hit][:, :2]
    a_len = np.linalg.norm(a, axis=1)
    b_len = np.linalg.norm(b, axis=1)
    scale = np.maximum(b_len / 2.0, a_len / along_samples)
    level = np.clip(np.floor(np.log2(np.maximum(scale / scene.texture_res, 1.0))), 0, scene.n_levels - 1).astype(int)
    out = np.zeros(len(c))
    fa = np.repeat((np.arange(along_samples) + 0.5) / along_samples - 0.5, 2)
    fb = np.tile([-0.25, 0.25], along_samples)
    for lvl in np.unique(level):
        sel = level == lvl
        px = c[sel, 0:1] + a[sel, 0:1] * fa + b[sel, 0:1] * fb
        py = c[sel, 1:2] + a[sel, 1:2] * fa + b[sel, 1:2] * fb
        out[sel] = scene.sample(px, py, lvl, False).mean(axis=1)
    img[hit] = out
    return img


def simulate_fpv_frames(scene, trajectory, attitude=None, calib=None, period=0.5, t_start=None, t_end=None,
                        seed=0, noise_std=2.0):
    """Onboard 8-bit camera frames every ``period`` seconds along the trajectory."""
    calib = calib or default_calibration()
    rng = np.random.default_rng(seed)
    t0 = trajectory.t[0] if t_start is None else t_start
    t1 = trajectory.t[-1] if t_end is None else t_end
    frames = []
    for k, t in enumerate(np.arange(t0, t1 + 1e-9, period)):
        x, y, yaw = (float(a) for a in trajectory.pose_at(t))
        if attitude is not None:
            att = attitude.at(t)
            pose = (x, y, yaw, att.roll, att.pitch)
        else:
            pose = (x, y, yaw)
        frames.append(Frame(f"ugv{k:05d}", float(t), "ugv", None, None, to_uint8(render_fpv(scene, pose, calib), noise_std, rng)))
    return frames
