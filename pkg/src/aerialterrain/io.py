"""File formats: headed CSVs, 8/16-bit PNG rasters, JSON/JSONL and the calibration file."""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import DEFAULT_MARKER_PERIMETER, CameraModel, RigidTransform


class InputError(ValueError):
    """Malformed input file; carries row-level diagnostics."""


def read_csv(path, required):
    """Read a headed numeric CSV into a dict of float arrays.

    Raises ``InputError`` naming the offending row when a value is missing or
    not a number.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: file not found")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise InputError(f"{path}: missing columns {missing}; header is {header}")
        cols = {name: [] for name in header}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            for name, cell in zip(header, row):
                try:
                    cols[name].append(float(cell))
                except ValueError:
                    raise InputError(f"{path}:{lineno}: column {name!r} has non-numeric value {cell!r}") from None
    out = {k: np.asarray(v, dtype=float) for k, v in cols.items()}
    for name, arr in out.items():
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0]) + 2
            raise InputError(f"{path}:{bad}: column {name!r} is not finite")
    t = out.get("t")
    if t is not None and len(t) > 1 and np.any(np.diff(t) <= 0):
        bad = int(np.flatnonzero(np.diff(t) <= 0)[0]) + 3
        raise InputError(f"{path}:{bad}: timestamps must be strictly increasing")
    return out


def write_csv(path, columns, fmt="%.9g"):
    """Write a dict of equal-length arrays as a headed CSV."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names]) if names else np.empty((0, 0))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in data:
            fh.write(",".join(fmt % v for v in row) + "\n")


def read_png(path):
    """Load an 8- or 16-bit PNG as a float64 array (gray: HxW, color: HxWx3)."""
    with Image.open(path) as im:
        im.load()
        if im.mode in ("I;16", "I;16B", "I"):
            return np.asarray(im, dtype=np.float64)
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        return np.asarray(im, dtype=np.float64)


def write_png(path, raster):
    """Write a float raster in gray levels [0, 255] as an 8-bit PNG."""
    arr = np.clip(np.rint(np.asarray(raster, dtype=float)), 0, 255).astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


def write_png16(path, raster):
    arr = np.asarray(raster)
    if arr.dtype != np.uint16:
        raise TypeError("16-bit PNG needs a uint16 array")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def read_jsonl(path):
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    return out


def write_jsonl(path, rows):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


@dataclass(frozen=True)
class Calibration:
    camera: CameraModel
    robot_from_camera: RigidTransform
    robot_height: float
    marker_perimeter: float = DEFAULT_MARKER_PERIMETER

    def to_dict(self):
        c = self.camera
        return {
            "camera": {"fx": c.fx, "fy": c.fy, "cx": c.cx, "cy": c.cy, "width": c.width, "height": c.height},
            "robot_from_camera": {
                "quaternion_wxyz": self.robot_from_camera.rotation.tolist(),
                "translation": self.robot_from_camera.translation.tolist(),
            },
            "robot_height": self.robot_height,
            "marker_perimeter": self.marker_perimeter,
        }

    @classmethod
    def from_dict(cls, d):
        allowed = {"camera", "robot_from_camera", "robot_height", "marker_perimeter"}
        unknown = set(d) - allowed
        if unknown:
            raise InputError(f"calibration: unknown keys {sorted(unknown)}")
        try:
            cam = CameraModel(**d["camera"])
            ext = d["robot_from_camera"]
            tf = RigidTransform(ext["quaternion_wxyz"], ext["translation"], "camera", "robot")
            return cls(cam, tf, float(d["robot_height"]), float(d.get("marker_perimeter", DEFAULT_MARKER_PERIMETER)))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"calibration: {exc}") from None


def load_calibration(path):
    return Calibration.from_dict(read_json(path))


def save_calibration(path, calib):
    write_json(path, calib.to_dict())
