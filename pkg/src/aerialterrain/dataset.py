"""Points of interest, co-registered ground/aerial patches, labels, normalisation and folds."""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from .errors import DegenerateRange, InsufficientCoverage, NoViews, OutOfSupport, TooFewRecords
from .geometry import (
    AerialContext,
    AttitudeSample,
    BevContext,
    Footprint,
    GroundGrid,
    MarkerObservation,
    bev_resample,
    camera_from_ground,
    compose,
    extract_patch,
    footprint_inside,
    ground_from_attitude,
    world_from_ground,
    wrap_angle,
)
from .signals import METRIC_KINDS, label_at_pose

log = logging.getLogger(__name__)

SOURCES = ("ugv", "uav")
PROTOCOLS = {
    # name: (fold count, number of folds evaluated)
    "paper-90-10": (10, 5),
    "kfold-5": (5, 5),
}


# --------------------------------------------------------------------------- trajectory

def interp_angle(a0, a1, frac):
    """Shortest-arc interpolation between two angles."""
    return wrap_angle(a0 + frac * wrap_angle(np.asarray(a1) - a0))


@dataclass(frozen=True)
class TrajectorySample:
    timestamp: float
    position: tuple
    yaw: float
    speed_cmd: float = 0.0
    straight_flag: bool = True


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    yaw: np.ndarray

    def __post_init__(self):
        for name in ("t", "x", "y", "z", "yaw"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")

    @classmethod
    def from_columns(cls, cols):
        return cls(cols["t"], cols["x"], cols["y"], cols.get("z", np.zeros_like(cols["t"])), cols["yaw"])

    def to_columns(self):
        return {"t": self.t, "x": self.x, "y": self.y, "z": self.z, "yaw": self.yaw}

    def samples(self):
        return [TrajectorySample(float(t), (float(x), float(y), float(z)), float(a))
                for t, x, y, z, a in zip(self.t, self.x, self.y, self.z, self.yaw)]

    def pose_at(self, t):
        """Linearly interpolated (x, y, yaw) at time(s) ``t``; yaw on the circle."""
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 2)
        span = self.t[idx + 1] - self.t[idx]
        f = np.clip((t - self.t[idx]) / span, 0.0, 1.0)
        x = self.x[idx] + f * (self.x[idx + 1] - self.x[idx])
        y = self.y[idx] + f * (self.y[idx + 1] - self.y[idx])
        yaw = interp_angle(self.yaw[idx], self.yaw[idx + 1], f)
        return x, y, yaw

    def covers(self, t):
        return self.t[0] <= t <= self.t[-1]


@dataclass(frozen=True)
class PointOfInterest:
    id: int
    x: float
    y: float
    yaw: float
    timestamp: float
    arc_length: float

    @property
    def world_pose(self):
        return (self.x, self.y, self.yaw)


def filter_straight_segments(t, v_left, v_right, threshold=0.1, min_speed=0.1, eps=1e-9):
    """Time intervals where the wheel speeds agree within ``threshold`` and both exceed ``min_speed``.

    Interval bounds are the timestamps of the first and last qualifying
    sample of each run.
    """
    t = np.asarray(t, dtype=float)
    vl = np.asarray(v_left, dtype=float)
    vr = np.asarray(v_right, dtype=float)
    denom = np.maximum(np.maximum(np.abs(vl), np.abs(vr)), eps)
    ok = (np.abs(vl - vr) / denom < threshold) & (vl > min_speed) & (vr > min_speed)
    intervals = []
    start = None
    for i, flag in enumerate(ok):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            intervals.append((float(t[start]), float(t[i - 1])))
            start = None
    if start is not None:
        intervals.append((float(t[start]), float(t[-1])))
    return intervals


def sample_pois(traj, intervals, spacing=0.3, first_id=0):
    """Arc-length resampling of the trajectory at ``spacing`` meters inside each interval.

    Arc length restarts at every interval; the stored ``arc_length`` is measured
    from the trajectory start.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    seg = np.hypot(np.diff(traj.x), np.diff(traj.y))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    pois = []
    next_id = first_id
    for t0, t1 in intervals:
        t0 = max(t0, traj.t[0])
        t1 = min(t1, traj.t[-1])
        if t1 <= t0:
            continue
        inner = (traj.t > t0) & (traj.t < t1)
        ts = np.concatenate([[t0], traj.t[inner], [t1]])
        xs, ys, yaws = traj.pose_at(ts)
        s = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(xs), np.diff(ys)))])
        arc0 = float(np.interp(t0, traj.t, cum))
        n = int(np.floor(s[-1] / spacing + 1e-9)) + 1
        for k in range(n):
            target = k * spacing
            j = int(np.clip(np.searchsorted(s, target, side="right") - 1, 0, len(s) - 2))
            length = s[j + 1] - s[j]
            f = 0.0 if length <= 0 else min(max((target - s[j]) / length, 0.0), 1.0)
            pois.append(PointOfInterest(
                id=next_id,
                x=float(xs[j] + f * (xs[j + 1] - xs[j])),
                y=float(ys[j] + f * (ys[j + 1] - ys[j])),
                yaw=float(interp_angle(yaws[j], yaws[j + 1], f)),
                timestamp=float(ts[j] + f * (ts[j + 1] - ts[j])),
                arc_length=arc0 + target,
            ))
            next_id += 1
    return pois


# --------------------------------------------------------------------------- records

@dataclass
class View:
    source: str
    frame_id: str
    camera_distance: float
    patch: np.ndarray = field(repr=False)
    in_comparison: bool = True


@dataclass
class PatchRecord:
    poi_id: int
    timestamp: float
    x: float
    y: float
    yaw: float
    views: list
    labels: dict
    labels_norm: dict = field(default_factory=dict)
    tag: str = "all"

    def views_of(self, source):
        return [v for v in self.views if v.source == source]

    def comparison_views(self, source):
        return [v for v in self.views if v.source == source and v.in_comparison]


@dataclass(frozen=True)
class Frame:
    frame_id: str
    t: float
    source: str
    path: str = None
    marker_corners: np.ndarray = None
    image: np.ndarray = field(default=None, repr=False, compare=False)

    def load(self, root=None):
        if self.image is not None:
            return self.image
        p = Path(self.path)
        if root is not None and not p.is_absolute():
            p = Path(root) / p
        return io.read_png(p)


@dataclass(frozen=True)
class AttitudeTrack:
    t: np.ndarray
    roll: np.ndarray
    pitch: np.ndarray

    @classmethod
    def level(cls):
        return cls(np.array([0.0, 1.0]), np.zeros(2), np.zeros(2))

    def at(self, t):
        return AttitudeSample(float(t), float(np.interp(t, self.t, self.roll)), float(np.interp(t, self.t, self.pitch)))


@dataclass(frozen=True)
class ExtractionConfig:
    patch_side: float = 1.5
    resolution: int = 64
    max_distance: float = 5.0
    bev_length: float = 12.0
    bev_half_width: float = 6.0
    bev_cell: float = 0.025
    min_coverage: float = 0.95
    max_ugv_views: int = 0
    max_uav_views: int = 0

    @property
    def bev_grid(self):
        return GroundGrid.forward(self.bev_length, self.bev_half_width, self.bev_cell)


def camera_world_xy(calib, att, robot_x, robot_y, robot_yaw):
    world_from_camera = compose(world_from_ground(robot_x, robot_y, robot_yaw),
                                compose(ground_from_attitude(att, calib.robot_height), calib.robot_from_camera))
    return world_from_camera.translation[:2]


def _ugv_views(frame, image, pois, calib, traj, attitude, cfg):
    rx, ry, ryaw = (float(a) for a in traj.pose_at(frame.t))
    att = attitude.at(frame.t)
    cfg_grid = cfg.bev_grid
    cam_from_ground = camera_from_ground(att, calib.robot_height, calib.robot_from_camera)
    raster, mask = bev_resample(image, cam_from_ground, calib.camera, cfg_grid)
    ctx = BevContext(raster, mask, cfg_grid, rx, ry, ryaw)
    cam_xy = camera_world_xy(calib, att, rx, ry, ryaw)
    out = []
    half = cfg.patch_side / np.sqrt(2.0)
    c, s = np.cos(ryaw), np.sin(ryaw)
    for poi in pois:
        dx, dy = poi.x - rx, poi.y - ry
        fwd = c * dx + s * dy
        lat = -s * dx + c * dy
        if fwd < -half or fwd > cfg.bev_length + half or abs(lat) > cfg.bev_half_width + half:
            continue
        fp = Footprint(poi.x, poi.y, poi.yaw, cfg.patch_side)
        if not footprint_inside(ctx, fp):
            continue
        try:
            patch, _ = extract_patch(raster, ctx, fp, cfg.resolution, cfg.min_coverage)
        except InsufficientCoverage:
            continue
        dist = float(np.hypot(poi.x - cam_xy[0], poi.y - cam_xy[1]))
        out.append((poi.id, View("ugv", frame.frame_id, dist, patch, dist <= cfg.max_distance)))
    return out


def _uav_views(frame, image, pois, calib, traj, cfg):
    rx, ry, ryaw = (float(a) for a in traj.pose_at(frame.t))
    marker = MarkerObservation(frame.marker_corners, calib.marker_perimeter)
    ctx = AerialContext.from_marker(image, marker, rx, ry, ryaw)
    out = []
    for poi in pois:
        fp = Footprint(poi.x, poi.y, poi.yaw, cfg.patch_side)
        if not footprint_inside(ctx, fp):
            continue
        try:
            patch, _ = extract_patch(image, ctx, fp, cfg.resolution, cfg.min_coverage)
        except InsufficientCoverage:
            continue
        out.append((poi.id, View("uav", frame.frame_id, float("nan"), patch, True)))
    return out


def build_patch_records(pois, ugv_frames, uav_frames, calib, traj, labels, config=ExtractionConfig(),
                        attitude=None, tag_fn=None, frame_root=None):
    """Extract every visible view of every POI and attach the POI's labels.

    ``labels`` maps metric kind -> ``MetricSeries``. Per-view failures
    (unreadable frames, insufficient coverage, frames outside the trajectory)
    are logged and skipped. POIs whose timestamp falls outside the label
    support, or that end up with no views, produce no record.
    """
    attitude = attitude or AttitudeTrack.level()
    views = {p.id: [] for p in pois}

    def frames_in(frames):
        for fr in frames:
            if not traj.covers(fr.t):
                log.warning("frame %s at t=%.3f outside trajectory, skipped", fr.frame_id, fr.t)
                continue
            try:
                image = fr.load(frame_root)
            except Exception as exc:  # unreadable frames are skipped, never fatal
                log.warning("frame %s unreadable (%s), skipped", fr.frame_id, exc)
                continue
            yield fr, image

    for fr, image in frames_in(ugv_frames):
        for pid, view in _ugv_views(fr, image, pois, calib, traj, attitude, config):
            views[pid].append(view)
    for fr, image in frames_in(uav_frames):
        if fr.marker_corners is None:
            log.warning("aerial frame %s has no marker, skipped", fr.frame_id)
            continue
        for pid, view in _uav_views(fr, image, pois, calib, traj, config):
            views[pid].append(view)

    records = []
    for poi in pois:
        vs = _cap_views(views[poi.id], config)
        if not vs:
            continue
        try:
            lab = {k: label_at_pose(labels[k], poi.timestamp) for k in METRIC_KINDS}
        except OutOfSupport:
            log.debug("POI %d at t=%.3f outside label support", poi.id, poi.timestamp)
            continue
        tag = tag_fn(poi.x, poi.y) if tag_fn else "all"
        records.append(PatchRecord(poi.id, poi.timestamp, poi.x, poi.y, poi.yaw, vs, lab, {}, tag))
    return records


def _cap_views(vs, cfg):
    """Optionally keep only the closest UGV views and first aerial views."""
    ugv = sorted((v for v in vs if v.source == "ugv"), key=lambda v: (v.camera_distance, v.frame_id))
    uav = sorted((v for v in vs if v.source == "uav"), key=lambda v: v.frame_id)
    if cfg.max_ugv_views:
        ugv = ugv[: cfg.max_ugv_views]
    if cfg.max_uav_views:
        uav = uav[: cfg.max_uav_views]
    return ugv + uav


# --------------------------------------------------------------------------- labels and folds

def label_stats(records, kinds=METRIC_KINDS):
    """Per-metric (min, max) over ``records``."""
    stats = {}
    for k in kinds:
        vals = np.array([r.labels[k] for r in records], dtype=float)
        lo, hi = float(vals.min()), float(vals.max())
        if not hi > lo:
            raise DegenerateRange(f"{k}: all labels equal {lo}")
        stats[k] = (lo, hi)
    return stats


def normalize_value(x, lo, hi):
    return float(np.clip((x - lo) / (hi - lo), 0.0, 1.0))


def denormalize_value(y, lo, hi):
    return lo + y * (hi - lo)


def normalize_labels(records, stats=None, kinds=METRIC_KINDS):
    """Min-max normalise labels; stats come from ``records`` unless given.

    Returns ``(new_records, stats)``. Values outside the stats range are clamped.
    """
    if stats is None:
        stats = label_stats(records, kinds)
    out = []
    for r in records:
        norm = dict(r.labels_norm)
        for k in kinds:
            lo, hi = stats[k]
            if not hi > lo:
                raise DegenerateRange(f"{k}: degenerate range ({lo}, {hi})")
            norm[k] = normalize_value(r.labels[k], lo, hi)
        out.append(replace(r, labels_norm=norm))
    return out, stats


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    assignment: dict
    eval_folds: tuple = None
    protocol: str = "custom"

    def __post_init__(self):
        if self.eval_folds is None:
            object.__setattr__(self, "eval_folds", tuple(range(self.k)))

    def fold_of(self, poi_id):
        return self.assignment[poi_id]

    def members(self, fold):
        return sorted(pid for pid, f in self.assignment.items() if f == fold)

    def to_dict(self):
        return {"k": self.k, "protocol": self.protocol, "eval_folds": list(self.eval_folds),
                "assignment": {str(k): v for k, v in sorted(self.assignment.items())}}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["k"]), {int(k): int(v) for k, v in d["assignment"].items()},
                   tuple(d.get("eval_folds", range(int(d["k"])))), d.get("protocol", "custom"))


def make_folds(records, k=10, seed=0, eval_folds=None, protocol="custom"):
    """Seeded shuffle of POI ids followed by round-robin fold assignment."""
    ids = sorted(r.poi_id if hasattr(r, "poi_id") else int(r) for r in records)
    if k < 2:
        raise ValueError("k must be at least 2")
    if len(ids) < k:
        raise TooFewRecords(f"{len(ids)} records for {k} folds")
    order = np.random.default_rng(seed).permutation(len(ids))
    assignment = {ids[j]: pos % k for pos, j in enumerate(order)}
    return FoldAssignment(k, assignment, tuple(eval_folds) if eval_folds is not None else None, protocol)


def protocol_folds(records, protocol="paper-90-10", seed=0):
    """Folds for a named protocol.

    ``paper-90-10``: ten folds (90/10 train/validation), five of them evaluated.
    ``kfold-5``: plain five-fold cross-validation (80/20).
    """
    k, n_eval = PROTOCOLS[protocol]
    return make_folds(records, k, seed, tuple(range(n_eval)), protocol)


def sample_training_view(record, source, rng):
    """Uniformly pick one of the record's views from ``source``."""
    vs = record.views_of(source)
    if not vs:
        raise NoViews(f"POI {record.poi_id} has no {source} views")
    return vs[int(rng.integers(len(vs)))].patch


def evaluation_view(record, source, comparison_only=False):
    """Deterministic view for evaluation: the first by frame id."""
    vs = record.comparison_views(source) if comparison_only else record.views_of(source)
    if not vs:
        raise NoViews(f"POI {record.poi_id} has no {source} views")
    return min(vs, key=lambda v: v.frame_id)


# --------------------------------------------------------------------------- storage

MANIFEST_VERSION = 1


def save_records(records, root):
    """Write one directory per POI (``{source}_{frame_id}.png`` views) plus ``records.json``."""
    root = Path(root)
    entries = []
    for r in records:
        d = root / "patches" / str(r.poi_id)
        vs = []
        for v in r.views:
            rel = Path("patches") / str(r.poi_id) / f"{v.source}_{v.frame_id}.png"
            io.write_png(root / rel, v.patch)
            vs.append({"source": v.source, "frame_id": v.frame_id, "path": str(rel),
                       "camera_distance": None if not np.isfinite(v.camera_distance) else v.camera_distance,
                       "in_comparison": bool(v.in_comparison)})
        d.mkdir(parents=True, exist_ok=True)
        entries.append({"poi_id": r.poi_id, "timestamp": r.timestamp, "x": r.x, "y": r.y, "yaw": r.yaw,
                        "tag": r.tag, "labels": r.labels, "labels_norm": r.labels_norm, "views": vs})
    manifest = {"version": MANIFEST_VERSION, "records": entries}
    io.write_json(root / "records.json", manifest)
    return manifest


def validate_manifest(manifest):
    """Raise ``io.InputError`` when the manifest does not follow the records schema."""
    if not isinstance(manifest, dict) or manifest.get("version") != MANIFEST_VERSION:
        raise io.InputError("records.json: missing or unsupported version")
    recs = manifest.get("records")
    if not isinstance(recs, list):
        raise io.InputError("records.json: 'records' must be a list")
    for i, e in enumerate(recs):
        for key, typ in (("poi_id", int), ("timestamp", (int, float)), ("x", (int, float)), ("y", (int, float)),
                         ("yaw", (int, float)), ("labels", dict), ("views", list), ("tag", str)):
            if not isinstance(e.get(key), typ):
                raise io.InputError(f"records.json: record {i} field {key!r} missing or wrong type")
        if not e["views"]:
            raise io.InputError(f"records.json: record {i} has no views")
        for k in METRIC_KINDS:
            if not isinstance(e["labels"].get(k), (int, float)) or not np.isfinite(e["labels"][k]):
                raise io.InputError(f"records.json: record {i} label {k!r} missing or not finite")
        for v in e["views"]:
            if v.get("source") not in SOURCES or not isinstance(v.get("path"), str):
                raise io.InputError(f"records.json: record {i} has a malformed view")


def load_records(root):
    root = Path(root)
    manifest = io.read_json(root / "records.json")
    validate_manifest(manifest)
    records = []
    for e in manifest["records"]:
        vs = [View(v["source"], v["frame_id"],
                   float("nan") if v.get("camera_distance") is None else float(v["camera_distance"]),
                   io.read_png(root / v["path"]), bool(v.get("in_comparison", True)))
              for v in e["views"]]
        records.append(PatchRecord(int(e["poi_id"]), float(e["timestamp"]), float(e["x"]), float(e["y"]),
                                   float(e["yaw"]), vs, {k: float(e["labels"][k]) for k in METRIC_KINDS},
                                   {k: float(v) for k, v in e.get("labels_norm", {}).items()}, e["tag"]))
    return records
