"""Distance, blur and occlusion ablations on synthetic scenes.

Each study returns a report dict (``rows`` plus summary fields) that
``write_report`` turns into CSV, JSON and a PNG plot.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage, stats

from .. import dataset, io, predictor
from ..dataset import ExtractionConfig
from ..geometry import AttitudeSample, camera_from_ground, ground_pixel_footprint, project_ground_point
from .pipeline import simulate_run
from .render import default_calibration
from .scene import CLASS_LIBRARY, TerrainClassSpec, generate_scene
from .traverse import lawnmower_path

log = logging.getLogger(__name__)

KINDS = ("distance", "blur", "occlusion")

# Same mean gray and contrast, different grain size: telling them apart needs fine detail.
GRAIN_CLASSES = (
    TerrainClassSpec("coarse", (130.0, 30.0, 2.0), roughness=0.3, bumpiness=0.03, power_draw=10.0),
    TerrainClassSpec("medium", (130.0, 30.0, 4.5), roughness=0.9, bumpiness=0.07, power_draw=40.0),
    TerrainClassSpec("fine", (130.0, 30.0, 9.0), roughness=1.6, bumpiness=0.12, power_draw=70.0),
    TerrainClassSpec("grit", (130.0, 30.0, 16.0), roughness=2.4, bumpiness=0.18, power_draw=100.0),
)

OCCLUSION_CLASSES = ("quarry", "moss", "grass_mud", "grass_rock")


@dataclass
class AblationConfig:
    seed: int = 0
    metric_kind: str = "m_z"
    scene_size: float = 30.0
    block_size: float = 8.0
    lane_spacing: float = 3.0
    n_lanes: int = 8
    protocol: str = "kfold-5"
    epochs: int = 80
    bins: tuple = tuple(range(1, 11))
    max_distance: float = 10.0
    comparison_distance: float = 5.0
    ugv_period: float = 0.5
    uav_period: float = 2.0
    max_uav_views: int = 2
    noise_std: float = 2.0
    # averaging over fold and training seeds damps the per-bin noise of a single split
    repeats: int = 3
    # a low-resolution onboard camera makes the far-field loss of detail visible within 10 m
    camera: dict = field(default_factory=lambda: {"width": 160, "height": 120, "focal": 130.0})
    classes: tuple = field(default=None)

    def calibration(self):
        return default_calibration(**self.camera)

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")

    def train_config(self, repeat=0):
        return predictor.TrainConfig(epochs=self.epochs, seed=self.seed + 1000 * repeat)

    def repeat_seeds(self):
        """Fold and training seeds of each repeat; the simulated scene is shared by all repeats."""
        return [self.seed + 1000 * k for k in range(self.repeats)]


def _path(cfg):
    margin = 2.0
    x1 = margin + cfg.lane_spacing * (cfg.n_lanes - 1)
    return lawnmower_path(margin, margin, x1, cfg.scene_size - margin, cfg.lane_spacing)


def _scene(cfg, default_classes):
    classes = cfg.classes or default_classes
    specs = [CLASS_LIBRARY[c] if isinstance(c, str) else c for c in classes]
    return generate_scene(specs, {"kind": "blocks", "size": cfg.block_size}, cfg.seed, cfg.scene_size,
                          cfg.scene_size)


def _fold_models(records, source, cfg, folds, cache, repeat=0):
    return predictor.train(records, source, cfg.metric_kind, folds, cfg.train_config(repeat), cache)


def _held_out_predictions(results, records, source, cfg, folds, cache, view_filter=None):
    """(record, view, normalised target, prediction) for every held-out view passing ``view_filter``."""
    by_fold = {r.fold: r.model for r in results}
    out = []
    for rec in records:
        f = folds.fold_of(rec.poi_id)
        model = by_fold.get(f)
        if model is None:
            continue
        lo, hi = model.label_stats
        target = dataset.normalize_value(rec.labels[cfg.metric_kind], lo, hi)
        for v in rec.views_of(source):
            if view_filter is None or view_filter(v):
                pred = float(predictor.forward(model, cache.get(rec, v)[None, :])[0])
                out.append((rec, v, target, pred))
    return out


def _with_views(records, keep):
    out = []
    for r in records:
        vs = [v for v in r.views if keep(v)]
        if vs:
            out.append(replace(r, views=vs))
    return out


def distance_ablation(cfg=AblationConfig()):
    """Train on onboard patches up to ``max_distance`` and report held-out RMSE per 1 m distance bin."""
    scene = _scene(cfg, GRAIN_CLASSES)
    run = simulate_run(scene, _path(cfg), cfg.seed, uav=False, ugv_period=cfg.ugv_period, calib=cfg.calibration(),
                       noise_std=cfg.noise_std)
    ext = ExtractionConfig(max_distance=cfg.comparison_distance)
    records = _with_views(run.records(ext), lambda v: v.source == "ugv" and v.camera_distance <= cfg.max_distance)
    cache = predictor.FeatureCache()
    per_bin = {b: [] for b in cfg.bins}
    counts = {b: 0 for b in cfg.bins}
    for k, seed in enumerate(cfg.repeat_seeds()):
        folds = dataset.protocol_folds(records, cfg.protocol, seed)
        results = _fold_models(records, "ugv", cfg, folds, cache, k)
        preds = _held_out_predictions(results, records, "ugv", cfg, folds, cache)
        for b in cfg.bins:
            sel = [(t, p) for _, v, t, p in preds if b - 1 <= v.camera_distance < b]
            counts[b] = len(sel)
            if sel:
                per_bin[b].append(predictor.rmse([p for _, p in sel], [t for t, _ in sel]))
    rows = [{"distance_m": float(b), "n": counts[b],
             "rmse": float(np.mean(per_bin[b])) if per_bin[b] else float("nan")} for b in cfg.bins]
    trend = [r for r in rows if r["distance_m"] >= 2 and r["n"] > 0]
    rho = float(stats.spearmanr([r["distance_m"] for r in trend], [r["rmse"] for r in trend])[0]) \
        if len(trend) > 2 else float("nan")
    return {"kind": "distance", "metric_kind": cfg.metric_kind, "n_records": len(records), "rows": rows,
            "spearman_2_10": rho, "x": "distance_m", "y": "rmse"}


def footprint_at_distance(calib, d):
    """(along, cross) ground extent in meters of the onboard pixel imaging the point ``d`` meters ahead of the camera."""
    att = AttitudeSample(0.0, 0.0, 0.0)
    cam_from_ground = camera_from_ground(att, calib.robot_height, calib.robot_from_camera)
    cam_xy = cam_from_ground.inverse().translation[:2]
    uv = project_ground_point(np.array([cam_xy[0] + d, cam_xy[1], 0.0]), cam_from_ground, calib.camera)
    return ground_pixel_footprint(cam_from_ground, calib.camera, uv)


def blur_sigmas(calib, d, patch_px):
    """Gaussian (vertical, horizontal) std in patch pixels equivalent to the onboard footprint at distance ``d``."""
    along, cross = footprint_at_distance(calib, d)
    return along / (2.0 * patch_px), cross / (2.0 * patch_px)


def blur_patch(patch, sigma_v, sigma_h):
    out = ndimage.gaussian_filter(np.asarray(patch, dtype=float), (sigma_v, sigma_h), mode="reflect")
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def blur_ablation(cfg=AblationConfig()):
    """Retrain and evaluate on aerial patches blurred like onboard patches at each simulated distance."""
    calib = cfg.calibration()
    scene = _scene(cfg, GRAIN_CLASSES)
    run = simulate_run(scene, _path(cfg), cfg.seed, ugv=False, uav_period=cfg.uav_period, noise_std=cfg.noise_std)
    ext = ExtractionConfig(max_uav_views=cfg.max_uav_views)
    records = run.records(ext)
    fold_sets = [dataset.protocol_folds(records, cfg.protocol, seed) for seed in cfg.repeat_seeds()]
    patch_px = ext.patch_side / ext.resolution
    rows = []
    for d in cfg.bins:
        sv, sh = blur_sigmas(calib, float(d), patch_px)
        blurred = [replace(r, views=[replace(v, patch=blur_patch(v.patch, sv, sh)) for v in r.views])
                   for r in records]
        cache = predictor.FeatureCache()
        scores = []
        for k, folds in enumerate(fold_sets):
            results = _fold_models(blurred, "uav", cfg, folds, cache, k)
            scores.append(predictor.evaluate(results, blurred, "uav", cfg.metric_kind, folds, cache)["mean_rmse"])
        rmse = float(np.mean(scores))
        rows.append({"distance_m": float(d), "sigma_v_px": sv, "sigma_h_px": sh, "rmse": rmse})
        log.info("blur %.0f m: sigma_v %.2f px, RMSE %.4f", d, sv, rmse)
    return {"kind": "blur", "metric_kind": cfg.metric_kind, "n_records": len(records), "rows": rows,
            "x": "distance_m", "y": "rmse"}


def occlusion_ablation(cfg=AblationConfig()):
    """Aerial (seeing under vegetation) vs onboard RMSE on occluder-class records."""
    scene = _scene(cfg, OCCLUSION_CLASSES)
    run = simulate_run(scene, _path(cfg), cfg.seed, occlusion=True, ugv_period=cfg.ugv_period, calib=cfg.calibration(),
                       uav_period=cfg.uav_period, noise_std=cfg.noise_std)
    ext = ExtractionConfig(max_distance=cfg.comparison_distance, max_uav_views=cfg.max_uav_views)
    records = [r for r in run.records(ext) if r.comparison_views("ugv") and r.views_of("uav")]
    records = _with_views(records, lambda v: v.source == "uav" or v.in_comparison)
    folds = dataset.protocol_folds(records, cfg.protocol, cfg.seed)
    occluder_tags = {c.name for c in scene.classes if c.occluder}
    out = {"kind": "occlusion", "metric_kind": cfg.metric_kind, "n_records": len(records), "rows": []}
    for source in ("uav", "ugv"):
        cache = predictor.FeatureCache()
        results = _fold_models(records, source, cfg, folds, cache)
        ev = predictor.evaluate(results, records, source, cfg.metric_kind, folds, cache)
        occ = [p for p in ev["predictions"] if p["tag"] in occluder_tags]
        occ_rmse = predictor.rmse([p["prediction"] for p in occ], [p["target"] for p in occ])
        out["rows"].append({"source": source, "rmse_all": ev["mean_rmse"], "rmse_occluder": occ_rmse,
                            "n_occluder": len(occ)})
    aerial, fpv = out["rows"][0]["rmse_occluder"], out["rows"][1]["rmse_occluder"]
    out["improvement"] = float((fpv - aerial) / fpv) if fpv > 0 else float("nan")
    out["x"], out["y"] = "source", "rmse_occluder"
    return out


def run_ablation(kind, config=None):
    config = config or AblationConfig()
    if kind == "distance":
        return distance_ablation(config)
    if kind == "blur":
        return blur_ablation(config)
    if kind == "occlusion":
        return occlusion_ablation(config)
    raise ValueError(f"unknown ablation {kind!r}; expected one of {KINDS}")


def write_report(report, out_dir):
    """CSV of rows, JSON of the full report and a PNG plot; returns the written paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"ablation_{report['kind']}"
    rows = report["rows"]
    cols = list(rows[0].keys())
    csv_path = out_dir / f"{stem}.csv"
    with open(csv_path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(str(r[c]) for c in cols) + "\n")
    json_path = out_dir / f"{stem}.json"
    io.write_json(json_path, report)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    xs = [r[report["x"]] for r in rows]
    ys = [r[report["y"]] for r in rows]
    if report["kind"] == "occlusion":
        ax.bar(xs, ys, color=["tab:blue", "tab:orange"])
    else:
        ax.plot(xs, ys, "o-")
        ax.set_xlabel("distance [m]" if report["kind"] == "distance" else "simulated distance [m]")
    ax.set_ylabel(f"RMSE ({report['metric_kind']})")
    ax.set_title(f"{report['kind']} ablation")
    fig.tight_layout()
    png_path = out_dir / f"{stem}.png"
    fig.savefig(png_path, dpi=100)
    plt.close(fig)
    return {"csv": str(csv_path), "json": str(json_path), "png": str(png_path)}
