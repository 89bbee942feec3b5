"""Cost maps from orthoimages: sliding-window tiles, batch prediction, per-cell averaging."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .errors import EmptyMap, InsufficientCoverage, SchemaMismatch
from .features import SCHEMA_ID, extract_features
from .geometry import DEFAULT_MIN_COVERAGE, Footprint, GeoRaster, extract_patch
from .predictor import forward

NODATA = 0
PNG_SCALE = 65534


@dataclass(frozen=True)
class SlidingWindowSpec:
    patch_side: float = 1.5
    stride: float = 0.75

    def __post_init__(self):
        if not 0 < self.stride <= self.patch_side:
            raise ValueError("stride must be in (0, patch_side]")


@dataclass
class CostMap:
    """Accumulated predictions on a regular grid.

    Cell ``(i, j)`` spans ``x in origin[0] + [j, j+1] * cell_size`` and
    ``y in origin[1] + [i, i+1] * cell_size`` (row index grows with y).
    """

    sums: np.ndarray
    counts: np.ndarray
    cell_size: float
    origin: tuple
    metric_kind: str = "m_z"

    def __post_init__(self):
        if self.sums.shape != self.counts.shape:
            raise ValueError("sums and counts must share a shape")

    @classmethod
    def empty(cls, shape, cell_size, origin, metric_kind="m_z"):
        return cls(np.zeros(shape), np.zeros(shape, dtype=np.int64), cell_size, tuple(origin), metric_kind)

    @property
    def shape(self):
        return self.sums.shape

    @property
    def observed(self):
        return self.counts > 0

    @property
    def values(self):
        """Mean prediction per cell; NaN where nothing was observed."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.sums / np.maximum(self.counts, 1), np.nan)

    def cell_center(self, i, j):
        return (self.origin[0] + (np.asarray(j) + 0.5) * self.cell_size,
                self.origin[1] + (np.asarray(i) + 0.5) * self.cell_size)

    def world_to_cell(self, x, y):
        j = int(np.floor((x - self.origin[0]) / self.cell_size))
        i = int(np.floor((y - self.origin[1]) / self.cell_size))
        return i, j

    def contains(self, i, j):
        return 0 <= i < self.shape[0] and 0 <= j < self.shape[1]

    def add(self, footprint_bounds, value):
        """Add ``value`` to every cell whose centre lies inside the axis-aligned bounds."""
        x0, y0, x1, y1 = footprint_bounds
        cs = self.cell_size
        j0 = max(int(np.ceil((x0 - self.origin[0]) / cs - 0.5 - 1e-9)), 0)
        j1 = min(int(np.floor((x1 - self.origin[0]) / cs - 0.5 + 1e-9)), self.shape[1] - 1)
        i0 = max(int(np.ceil((y0 - self.origin[1]) / cs - 0.5 - 1e-9)), 0)
        i1 = min(int(np.floor((y1 - self.origin[1]) / cs - 0.5 + 1e-9)), self.shape[0] - 1)
        if j1 < j0 or i1 < i0:
            return
        self.sums[i0:i1 + 1, j0:j1 + 1] += value
        self.counts[i0:i1 + 1, j0:j1 + 1] += 1


@dataclass(frozen=True)
class Tile:
    footprint: Footprint
    patch: np.ndarray

    @property
    def bounds(self):
        h = self.footprint.side / 2
        return (self.footprint.x - h, self.footprint.y - h, self.footprint.x + h, self.footprint.y + h)


def tile_count(extent, spec):
    if extent < spec.patch_side - 1e-9:
        return 0
    return int(np.floor((extent - spec.patch_side) / spec.stride + 1e-9)) + 1


def tile_image(ortho, spec=SlidingWindowSpec(), resolution=64, min_coverage=DEFAULT_MIN_COVERAGE):
    """Axis-aligned sliding-window patches over a north-up ``GeoRaster``.

    Footprint yaw is pi/2 so patch rows run north to south like the image.
    """
    width, height = ortho.extent
    nx, ny = tile_count(width, spec), tile_count(height, spec)
    tiles = []
    half = spec.patch_side / 2
    for iy in range(ny):
        cy = ortho.origin[1] + half + iy * spec.stride
        for ix in range(nx):
            cx = ortho.origin[0] + half + ix * spec.stride
            fp = Footprint(cx, cy, np.pi / 2, spec.patch_side)
            try:
                patch, _ = extract_patch(ortho.image, ortho, fp, resolution, min_coverage)
            except InsufficientCoverage:
                continue
            tiles.append(Tile(fp, patch))
    return tiles


def map_grid_for(ortho, cell_size=0.25):
    width, height = ortho.extent
    return (int(np.ceil(height / cell_size - 1e-9)), int(np.ceil(width / cell_size - 1e-9))), ortho.origin


def predict_map(tiles, model, shape, origin, cell_size=0.25, resolution=64, predictions=None):
    """Average tile predictions into a ``CostMap``.

    ``predictions`` may be supplied directly (one per tile) to skip the model.
    """
    if predictions is None:
        if model.schema_id != SCHEMA_ID:
            raise SchemaMismatch(f"model schema {model.schema_id} does not match extractor {SCHEMA_ID}")
        if tiles:
            feats = np.stack([extract_features(t.patch, resolution).values for t in tiles])
            predictions = forward(model, feats)
        else:
            predictions = np.empty(0)
    kind = getattr(model, "metric_kind", "m_z") if model is not None else "m_z"
    cmap = CostMap.empty(shape, cell_size, origin, kind)
    for tile, pred in zip(tiles, predictions):
        cmap.add(tile.bounds, float(pred))
    return cmap


def build_cost_map(ortho, model, spec=SlidingWindowSpec(), cell_size=0.25, resolution=64):
    tiles = tile_image(ortho, spec, resolution)
    shape, origin = map_grid_for(ortho, cell_size)
    return predict_map(tiles, model, shape, origin, cell_size, resolution)


def encode_values(values, observed):
    """Map values in [0, 1] to 1..65535; unobserved cells get ``NODATA`` (0)."""
    v = np.clip(np.nan_to_num(values, nan=0.0), 0.0, 1.0)
    code = (1 + np.rint(v * PNG_SCALE)).astype(np.uint16)
    code[~observed] = NODATA
    return code


def decode_values(code):
    code = np.asarray(code, dtype=float)
    return np.where(code == NODATA, np.nan, (code - 1) / PNG_SCALE)


def export_map(cmap, png_path, sidecar_path=None, csv_path=None):
    """16-bit PNG (north up) + JSON sidecar, optionally a CSV of cell centres and values."""
    if not cmap.observed.any():
        raise EmptyMap("cost map has no observed cell")
    code = encode_values(cmap.values, cmap.observed)
    io.write_png16(png_path, code[::-1])
    sidecar_path = sidecar_path or Path(png_path).with_suffix(".json")
    meta = {"origin": list(cmap.origin), "cell_size": cmap.cell_size, "metric_kind": cmap.metric_kind,
            "nodata": NODATA, "encoding": "value = (pixel - 1) / 65534", "row_order": "north-up",
            "shape": list(cmap.shape)}
    io.write_json(sidecar_path, meta)
    if csv_path:
        ii, jj = np.nonzero(cmap.observed)
        xs, ys = cmap.cell_center(ii, jj)
        io.write_csv(csv_path, {"x": xs, "y": ys, "value": cmap.values[ii, jj]})
    return meta


def import_map(png_path, sidecar_path=None):
    """Load an exported map; counts are 1 for observed cells."""
    sidecar_path = sidecar_path or Path(png_path).with_suffix(".json")
    meta = io.read_json(sidecar_path)
    code = io.read_png(png_path)[::-1]
    vals = decode_values(code)
    observed = ~np.isnan(vals)
    return CostMap(np.where(observed, vals, 0.0), observed.astype(np.int64), float(meta["cell_size"]),
                   tuple(meta["origin"]), meta.get("metric_kind", "m_z"))


def load_ortho(png_path, sidecar_path=None):
    sidecar_path = sidecar_path or Path(png_path).with_suffix(".json")
    meta = io.read_json(sidecar_path)
    return GeoRaster(io.read_png(png_path), float(meta["gsd"]), tuple(meta["origin"]))
