"""Simulated robot traverses: kinematics, IMU, battery power, wheel odometry and attitude."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from .. import io
from ..dataset import AttitudeTrack, Trajectory
from ..errors import PathOutOfScene

IMU_RATE = 100.0
POWER_RATE = 10.0
GNSS_RATE = 5.0
ODOM_RATE = 10.0
GRAVITY = 9.81
BASE_POWER = 200.0
BATTERY_VOLTAGE = 48.0
TRACK_WIDTH = 1.1
TURN_RATE = 0.6


@dataclass
class SensorBundle:
    """Column dicts matching the CSV files the pipeline ingests."""

    trajectory: dict
    imu: dict
    power: dict
    odometry: dict
    attitude: dict
    speed: float

    def trajectory_obj(self):
        return Trajectory.from_columns(self.trajectory)

    def attitude_track(self):
        return AttitudeTrack(self.attitude["t"], self.attitude["roll"], self.attitude["pitch"])

    def write(self, root):
        root = Path(root)
        io.write_csv(root / "trajectory.csv", self.trajectory)
        io.write_csv(root / "imu.csv", self.imu)
        io.write_csv(root / "power.csv", self.power)
        io.write_csv(root / "odometry.csv", self.odometry)
        io.write_csv(root / "attitude.csv", self.attitude)


class Kinematics:
    """Piecewise motion along a polyline: turn in place at each vertex, then drive straight."""

    def __init__(self, path, speed, turn_rate=TURN_RATE):
        pts = np.asarray(path, dtype=float)
        if len(pts) < 2:
            raise ValueError("path needs at least two points")
        self.phases = []  # (t0, t1, kind, x0, y0, yaw0, x1, y1, yaw1)
        t = 0.0
        yaw = float(np.arctan2(*(pts[1] - pts[0])[::-1]))
        for a, b in zip(pts[:-1], pts[1:]):
            d = b - a
            length = float(np.hypot(*d))
            if length <= 0:
                continue
            heading = float(np.arctan2(d[1], d[0]))
            turn = float((heading - yaw + np.pi) % (2 * np.pi) - np.pi)
            if abs(turn) > 1e-9:
                dur = abs(turn) / turn_rate
                self.phases.append((t, t + dur, "turn", a[0], a[1], yaw, a[0], a[1], yaw + turn))
                t += dur
            dur = length / speed
            self.phases.append((t, t + dur, "drive", a[0], a[1], heading, b[0], b[1], heading))
            t += dur
            yaw = heading
        self.duration = t
        self.speed = speed
        self.turn_rate = turn_rate
        self._t0 = np.array([p[0] for p in self.phases])

    def state(self, t):
        """Arrays x, y, yaw, v_left, v_right at times ``t``."""
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self._t0, t, side="right") - 1, 0, len(self.phases) - 1)
        x = np.empty_like(t)
        y = np.empty_like(t)
        yaw = np.empty_like(t)
        vl = np.empty_like(t)
        vr = np.empty_like(t)
        for idx in np.unique(k):
            sel = k == idx
            t0, t1, kind, x0, y0, a0, x1, y1, a1 = self.phases[idx]
            f = np.clip((t[sel] - t0) / (t1 - t0), 0.0, 1.0)
            x[sel] = x0 + f * (x1 - x0)
            y[sel] = y0 + f * (y1 - y0)
            yaw[sel] = a0 + f * (a1 - a0)
            if kind == "drive":
                vl[sel] = vr[sel] = self.speed
            else:
                w = self.turn_rate * np.sign(a1 - a0)
                vl[sel] = -w * TRACK_WIDTH / 2
                vr[sel] = w * TRACK_WIDTH / 2
        yaw = (yaw + np.pi) % (2 * np.pi) - np.pi
        return x, y, yaw, vl, vr


def band_noise(n, rate, low, high, rng, order=4):
    """Unit-variance Gaussian noise band-passed to [low, high] Hz."""
    if n == 0:
        return np.zeros(0)
    raw = rng.standard_normal(n + 400)
    sos = signal.butter(order, [low, min(high, 0.49 * rate)], btype="bandpass", fs=rate, output="sos")
    out = signal.sosfiltfilt(sos, raw)[200:-200]
    return out / out.std()


def lowpass_noise(n, rate, cutoff, rng):
    raw = rng.standard_normal(n + 400)
    sos = signal.butter(2, cutoff, btype="lowpass", fs=rate, output="sos")
    out = signal.sosfiltfilt(sos, raw)[200:-200]
    return out / out.std()


def simulate_traverse(scene, path, speed=1.5, seed=0, power_noise=5.0):
    """Drive ``path`` (world polyline) at ``speed`` and synthesise every sensor stream.

    ``a_z`` is gravity plus band-passed (1-30 Hz) noise scaled by the local
    roughness; roll/pitch rates are band-passed noise scaled by bumpiness;
    battery power is base load plus the class power draw plus noise.
    """
    pts = np.asarray(path, dtype=float)
    if not np.all(scene.contains(pts[:, 0], pts[:, 1])):
        raise PathOutOfScene("path leaves the scene")
    kin = Kinematics(pts, speed)
    rng = np.random.default_rng(seed)
    dur = kin.duration

    t_imu = np.arange(int(np.floor(dur * IMU_RATE)) + 1) / IMU_RATE
    x, y, yaw, _, _ = kin.state(t_imu)
    rough = scene.property_at("roughness", x, y)
    bump = scene.property_at("bumpiness", x, y)
    n = len(t_imu)
    az = GRAVITY + rough * band_noise(n, IMU_RATE, 1.0, 30.0, rng)
    wx = bump * band_noise(n, IMU_RATE, 0.5, 15.0, rng)
    wy = bump * band_noise(n, IMU_RATE, 0.5, 15.0, rng)
    ax = 0.05 * rng.standard_normal(n)
    ay = 0.05 * rng.standard_normal(n)
    wz = 0.01 * rng.standard_normal(n)
    roll = 0.1 * bump * lowpass_noise(n, IMU_RATE, 0.5, rng)
    pitch = 0.1 * bump * lowpass_noise(n, IMU_RATE, 0.5, rng)

    t_pow = np.arange(int(np.floor(dur * POWER_RATE)) + 1) / POWER_RATE
    px, py, _, _, _ = kin.state(t_pow)
    p = BASE_POWER + scene.property_at("power_draw", px, py) + power_noise * rng.standard_normal(len(t_pow))
    volt = BATTERY_VOLTAGE + 0.1 * rng.standard_normal(len(t_pow))
    cur = p / volt

    t_odo = np.arange(int(np.floor(dur * ODOM_RATE)) + 1) / ODOM_RATE
    _, _, _, vl, vr = kin.state(t_odo)
    vl = vl * (1 + 0.005 * rng.standard_normal(len(t_odo)))
    vr = vr * (1 + 0.005 * rng.standard_normal(len(t_odo)))

    t_gnss = np.arange(int(np.floor(dur * GNSS_RATE)) + 1) / GNSS_RATE
    if t_gnss[-1] < dur - 1e-9:
        t_gnss = np.append(t_gnss, dur)
    gx, gy, gyaw, _, _ = kin.state(t_gnss)

    return SensorBundle(
        trajectory={"t": t_gnss, "x": gx, "y": gy, "z": np.zeros_like(gx), "yaw": gyaw},
        imu={"t": t_imu, "ax": ax, "ay": ay, "az": az, "wx": wx, "wy": wy, "wz": wz},
        power={"t": t_pow, "current": cur, "voltage": volt},
        odometry={"t": t_odo, "v_left": vl, "v_right": vr},
        attitude={"t": t_imu, "roll": roll, "pitch": pitch},
        speed=speed,
    )


def lawnmower_path(x0, y0, x1, y1, lane_spacing, vertical=True):
    """Back-and-forth lanes covering a rectangle."""
    pts = []
    if vertical:
        xs = np.arange(x0, x1 + 1e-9, lane_spacing)
        for k, x in enumerate(xs):
            ys = (y0, y1) if k % 2 == 0 else (y1, y0)
            pts += [(x, ys[0]), (x, ys[1])]
    else:
        ys = np.arange(y0, y1 + 1e-9, lane_spacing)
        for k, y in enumerate(ys):
            xs = (x0, x1) if k % 2 == 0 else (x1, x0)
            pts += [(xs[0], y), (xs[1], y)]
    return np.array(pts)
