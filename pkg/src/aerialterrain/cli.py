"""Command-line entry point: ``aerialterrain <command> [options]``.

Every command accepts ``--config file.json`` (unknown keys rejected) and
``--seed``; explicit flags override config values. Each command writes a
JSON report and prints a plain-text table. Exit codes: 0 success, 2 input
error, 3 no path or degenerate result. ``AERIALTERRAIN_LOG_LEVEL`` sets the
log level.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset, io, mapping, planner, predictor, signals
from .dataset import ExtractionConfig, Frame
from .errors import DegenerateRange, EmptyMap, NonFiniteLoss, NoPath, TerrainError, TooFewRecords

log = logging.getLogger("aerialterrain")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3

CONFIG_SECTIONS = {
    "seed": None,
    "window": signals.WindowSpec,
    "welch": signals.WelchConfig,
    "train": predictor.TrainConfig,
    "sliding_window": mapping.SlidingWindowSpec,
    "extraction": ExtractionConfig,
    "simulate": None,
    "ablation": None,
    "plan": None,
    "map": None,
}

SIMULATE_KEYS = {"classes", "layout", "size", "lanes", "lane_spacing", "speed", "uav_period", "uav_size", "uav_gsd",
                 "ugv_period", "occlusion", "ortho_gsd", "noise_std", "camera"}
PLAN_KEYS = {"mode", "threshold", "connectivity"}
MAP_KEYS = {"cell_size", "resolution"}

SCENE_PRESETS = {
    "two-class": {"classes": ["quarry", "gravel"], "layout": {"kind": "halves"}},
    "five-class": {"classes": ["quarry", "trail", "moss", "gravel", "grass_mud"], "layout": {"kind": "blocks", "size": 6.0}},
    "vegetation": {"classes": ["quarry", "moss", "grass_mud", "grass_rock"], "layout": {"kind": "blocks", "size": 8.0}},
    "strip": {"classes": ["quarry", "gravel", "trail"],
              "layout": {"kind": "strip", "y0": 9.0, "y1": 11.0, "gap_x0": 14.0, "gap_x1": 17.0}},
}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------- config

def load_config(path):
    """Read and validate a pipeline config; unknown keys raise ``ConfigError``."""
    if path is None:
        return {}
    try:
        cfg = io.read_json(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path}: top level must be an object")
    unknown = set(cfg) - set(CONFIG_SECTIONS)
    if unknown:
        raise ConfigError(f"config {path}: unknown keys {sorted(unknown)}")
    for name, cls in CONFIG_SECTIONS.items():
        if name not in cfg or cls is None:
            continue
        fields = {f.name for f in dataclasses.fields(cls)}
        bad = set(cfg[name]) - fields
        if bad:
            raise ConfigError(f"config {path}: unknown keys in {name!r}: {sorted(bad)}")
    for name, allowed in (("simulate", SIMULATE_KEYS), ("plan", PLAN_KEYS), ("map", MAP_KEYS)):
        bad = set(cfg.get(name, {})) - allowed
        if bad:
            raise ConfigError(f"config {path}: unknown keys in {name!r}: {sorted(bad)}")
    if "ablation" in cfg:
        from .simkit.ablation import AblationConfig

        bad = set(cfg["ablation"]) - {f.name for f in dataclasses.fields(AblationConfig)}
        if bad:
            raise ConfigError(f"config {path}: unknown keys in 'ablation': {sorted(bad)}")
    return cfg


def section(cfg, name, cls, **overrides):
    """Build a config dataclass from a section plus non-None flag overrides."""
    values = dict(cfg.get(name, {}))
    for k, v in values.items():
        if isinstance(v, list):
            values[k] = tuple(v)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def resolve_seed(args, cfg):
    if args.seed is not None:
        return args.seed
    return int(cfg.get("seed", 0))


# --------------------------------------------------------------------------- reporting

def format_table(header, rows):
    cells = [[str(h) for h in header]] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _fmt(v):
    if isinstance(v, float):
        return "nan" if not np.isfinite(v) else f"{v:.4f}"
    return str(v)


def emit(report, path, header, rows):
    io.write_json(path, report)
    print(format_table(header, rows))
    print(f"report: {path}")


# --------------------------------------------------------------------------- commands

def cmd_simulate(args, cfg):
    from .simkit import render_aerial, simulate_aerial_frames, simulate_fpv_frames
    from .simkit.pipeline import labels_from_bundle  # noqa: F401  (keeps CLI and library in lockstep)
    from .simkit.render import default_calibration
    from .simkit.scene import generate_scene
    from .simkit.traverse import lawnmower_path, simulate_traverse

    sim = dict(SCENE_PRESETS[args.scene])
    sim.update(cfg.get("simulate", {}))
    for key in ("size", "lanes", "lane_spacing"):
        if getattr(args, key) is not None:
            sim[key] = getattr(args, key)
    seed = resolve_seed(args, cfg)
    size = float(sim.get("size", 20.0))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scene = generate_scene(sim["classes"], sim["layout"], seed, size, size)
    lanes = int(sim.get("lanes", 4))
    spacing = float(sim.get("lane_spacing", 3.0))
    margin = 2.0
    if margin + spacing * (lanes - 1) > size - margin:
        raise ConfigError(f"{lanes} lanes at {spacing} m do not fit a {size} m scene")
    path = lawnmower_path(margin, margin, margin + spacing * (lanes - 1), size - margin, spacing)
    s_trav, s_uav, s_ugv = np.random.SeedSequence(seed).generate_state(3)
    bundle = simulate_traverse(scene, path, float(sim.get("speed", 1.5)), seed=int(s_trav))
    bundle.write(out)
    calib = default_calibration(**sim.get("camera", {}))
    io.save_calibration(out / "calibration.json", calib)
    traj = bundle.trajectory_obj()
    noise = float(sim.get("noise_std", 2.0))
    frames = simulate_aerial_frames(scene, traj, float(sim.get("uav_period", 2.0)), float(sim.get("uav_size", 16.0)),
                                    float(sim.get("uav_gsd", 0.02)), int(s_uav), bool(sim.get("occlusion", False)),
                                    noise_std=noise)
    frames += simulate_fpv_frames(scene, traj, bundle.attitude_track(), calib, float(sim.get("ugv_period", 0.5)),
                                  seed=int(s_ugv), noise_std=noise)
    rows = []
    for fr in frames:
        rel = f"frames/{fr.frame_id}.png"
        io.write_png(out / rel, fr.image)
        row = {"frame_id": fr.frame_id, "path": rel, "t": fr.t, "source": fr.source}
        if fr.marker_corners is not None:
            row["marker_corners"] = np.asarray(fr.marker_corners).tolist()
        rows.append(row)
    io.write_jsonl(out / "frames.jsonl", rows)
    ortho = render_aerial(scene, gsd=float(sim.get("ortho_gsd", 0.02)), occlusion=bool(sim.get("occlusion", False)))
    io.write_png(out / "ortho.png", ortho.image)
    io.write_json(out / "ortho.json", {"gsd": ortho.gsd, "origin": list(ortho.origin), "row_order": "north-up"})
    io.write_png(out / "terrain.png", scene.class_map[::-1].astype(np.uint8))
    io.write_json(out / "terrain.json", {"classes": [c.name for c in scene.classes], "cell_size": scene.class_cell,
                                         "origin": [0.0, 0.0], "row_order": "north-up",
                                         "roughness": [c.roughness for c in scene.classes],
                                         "bumpiness": [c.bumpiness for c in scene.classes],
                                         "power_draw": [c.power_draw for c in scene.classes]})
    report = {"command": "simulate", "seed": seed, "scene": args.scene, "size_m": size,
              "duration_s": float(traj.t[-1]), "path": path.tolist(),
              "n_uav_frames": sum(f.source == "uav" for f in frames),
              "n_ugv_frames": sum(f.source == "ugv" for f in frames)}
    emit(report, out / "simulate_report.json", ["item", "value"],
         [["scene", args.scene], ["duration_s", report["duration_s"]], ["uav frames", report["n_uav_frames"]],
          ["ugv frames", report["n_ugv_frames"]]])
    return EXIT_OK


def compute_labels_from_dir(data, cfg):
    data = Path(data)
    imu = io.read_csv(data / "imu.csv", ["t", "az", "wx", "wy"])
    pw = io.read_csv(data / "power.csv", ["t", "current", "voltage"])
    spec = section(cfg, "window", signals.WindowSpec)
    welch = section(cfg, "welch", signals.WelchConfig)
    return signals.compute_labels(imu["t"], imu["az"], np.stack([imu["wx"], imu["wy"]], axis=1), pw["t"],
                                  pw["current"], pw["voltage"], spec, welch)


def cmd_gen_labels(args, cfg):
    labels = compute_labels_from_dir(args.data, cfg)
    out = Path(args.out) if args.out else Path(args.data) / "labels.csv"
    io.write_csv(out, {"t": labels.timestamps, **{k: v.values for k, v in labels.items()}})
    rows = []
    summary = {}
    for k, v in labels.items():
        summary[k] = {"min": float(v.values.min()), "mean": float(v.values.mean()), "max": float(v.values.max())}
        rows.append([k, summary[k]["min"], summary[k]["mean"], summary[k]["max"]])
    report = {"command": "gen-labels", "n": int(len(labels.timestamps)), "summary": summary, "output": str(out)}
    emit(report, out.with_name("labels_report.json"), ["metric", "min", "mean", "max"], rows)
    return EXIT_OK


def read_labels(path):
    cols = io.read_csv(path, ["t", *signals.METRIC_KINDS])
    return {k: signals.MetricSeries(cols["t"], cols[k], k) for k in signals.METRIC_KINDS}


def read_frames(path):
    frames = []
    for i, row in enumerate(io.read_jsonl(path), start=1):
        try:
            src = row["source"]
            if src not in dataset.SOURCES:
                raise ValueError(f"unknown source {src!r}")
            corners = np.asarray(row["marker_corners"], dtype=float) if "marker_corners" in row else None
            if corners is not None and corners.shape != (4, 2):
                raise ValueError("marker_corners must be 4 (u, v) pairs")
            frames.append(Frame(str(row.get("frame_id", Path(row["path"]).stem)), float(row["t"]), src,
                                row["path"], corners))
        except (KeyError, TypeError, ValueError) as exc:
            raise io.InputError(f"{path}:{i}: {exc}") from None
    return frames


def terrain_tagger(data):
    meta_path = Path(data) / "terrain.json"
    if not meta_path.exists():
        return None
    meta = io.read_json(meta_path)
    classes = io.read_png(Path(data) / "terrain.png")[::-1].astype(int)
    cs, (ox, oy) = float(meta["cell_size"]), meta["origin"]
    names = meta["classes"]

    def tag(x, y):
        i = int(np.clip((y - oy) // cs, 0, classes.shape[0] - 1))
        j = int(np.clip((x - ox) // cs, 0, classes.shape[1] - 1))
        return names[classes[i, j]]

    return tag


def cmd_extract(args, cfg):
    data = Path(args.data)
    traj = dataset.Trajectory.from_columns(io.read_csv(data / "trajectory.csv", ["t", "x", "y", "yaw"]))
    odo = io.read_csv(data / "odometry.csv", ["t", "v_left", "v_right"])
    calib = io.load_calibration(data / "calibration.json")
    att_path = data / "attitude.csv"
    attitude = None
    if att_path.exists():
        a = io.read_csv(att_path, ["t", "roll", "pitch"])
        attitude = dataset.AttitudeTrack(a["t"], a["roll"], a["pitch"])
    labels = read_labels(Path(args.labels) if args.labels else data / "labels.csv")
    frames = read_frames(data / "frames.jsonl")
    ext = section(cfg, "extraction", ExtractionConfig)
    intervals = dataset.filter_straight_segments(odo["t"], odo["v_left"], odo["v_right"])
    pois = dataset.sample_pois(traj, intervals, args.spacing)
    records = dataset.build_patch_records(pois, [f for f in frames if f.source == "ugv"],
                                          [f for f in frames if f.source == "uav"], calib, traj, labels, ext,
                                          attitude, terrain_tagger(data), data)
    out = Path(args.out)
    manifest = dataset.save_records(records, out)
    dataset.validate_manifest(manifest)
    n_uav = sum(len(r.views_of("uav")) for r in records)
    n_ugv = sum(len(r.views_of("ugv")) for r in records)
    report = {"command": "extract", "n_intervals": len(intervals), "n_pois": len(pois), "n_records": len(records),
              "n_uav_views": n_uav, "n_ugv_views": n_ugv,
              "n_ugv_comparison_views": sum(len(r.comparison_views("ugv")) for r in records)}
    emit(report, out / "extract_report.json", ["item", "value"],
         [["straight intervals", len(intervals)], ["POIs", len(pois)], ["records", len(records)],
          ["uav views", n_uav], ["ugv views", n_ugv]])
    return EXIT_OK


def _metrics(arg):
    return list(signals.METRIC_KINDS) if arg == "all" else [arg]


def _sources(arg):
    return list(dataset.SOURCES) if arg == "both" else [arg]


def _usable(records, source, comparison_only):
    return [r for r in records if (r.comparison_views(source) if comparison_only else r.views_of(source))]


def cmd_train(args, cfg):
    root = Path(args.records)
    records = dataset.load_records(root)
    seed = resolve_seed(args, cfg)
    tcfg = section(cfg, "train", predictor.TrainConfig, seed=seed, epochs=args.epochs)
    if args.profile != "default":
        tcfg = dataclasses.replace(predictor.CONFIG_PROFILES[args.profile], seed=seed,
                                   epochs=args.epochs if args.epochs is not None else tcfg.epochs)
    folds = dataset.protocol_folds(records, args.protocol, seed)
    io.write_json(root / "folds.json", folds.to_dict())
    out = Path(args.out) if args.out else root / "models"
    rows = []
    report = {"command": "train", "protocol": args.protocol, "seed": seed, "train_config": dataclasses.asdict(tcfg),
              "models": []}
    for source in _sources(args.source):
        comparison = source == "ugv" and not args.all_views
        usable = _usable(records, source, comparison)
        cache = predictor.FeatureCache()
        for kind in _metrics(args.metric):
            results = predictor.train(usable, source, kind, folds, tcfg, cache, comparison)
            if args.final:
                results.append(predictor.train_final(usable, source, kind, tcfg, cache, comparison))
            for res in results:
                name = f"{source}_{kind}_fold{res.fold}.json" if res.fold >= 0 else f"{source}_{kind}.json"
                predictor.save_model(out / name, res.model)
                report["models"].append({"file": name, "source": source, "metric_kind": kind, "fold": res.fold,
                                         "n_train": res.n_train, "curve": res.curve})
                rows.append([name, res.n_train, res.curve[0], res.curve[-1]])
    emit(report, out / "train_report.json", ["model", "n_train", "loss_start", "loss_end"], rows)
    return EXIT_OK


def table_one(results):
    """Rows per terrain tag (plus the mean), columns per metric and viewpoint, as in a Table-I style layout."""
    tags = sorted({t for by_kind in results.values() for ev in by_kind.values() for t in ev["per_tag"]})
    header = ["terrain"] + [f"{k}:{s}" for k in signals.METRIC_KINDS for s in dataset.SOURCES]
    rows = []
    for tag in tags + ["mean"]:
        row = [tag]
        for k in signals.METRIC_KINDS:
            for s in dataset.SOURCES:
                ev = results.get(s, {}).get(k)
                if ev is None:
                    row.append(float("nan"))
                elif tag == "mean":
                    row.append(ev["mean_rmse"])
                else:
                    row.append(ev["per_tag"].get(tag, float("nan")))
        rows.append(row)
    return header, rows


def cmd_eval(args, cfg):
    root = Path(args.records)
    records = dataset.load_records(root)
    folds = dataset.FoldAssignment.from_dict(io.read_json(Path(args.folds) if args.folds else root / "folds.json"))
    model_dir = Path(args.models) if args.models else root / "models"
    results = {}
    for source in _sources(args.source):
        comparison = source == "ugv" and not args.all_views
        cache = predictor.FeatureCache()
        for kind in _metrics(args.metric):
            fold_results = []
            for f in folds.eval_folds:
                p = model_dir / f"{source}_{kind}_fold{f}.json"
                if not p.exists():
                    raise io.InputError(f"missing model {p}")
                fold_results.append(predictor.FoldResult(f, predictor.load_model(p)))
            ev = predictor.evaluate(fold_results, records, source, kind, folds, cache, comparison)
            results.setdefault(source, {})[kind] = ev
    header, rows = table_one(results)
    report = {"command": "eval", "protocol": folds.protocol, "k": folds.k, "eval_folds": list(folds.eval_folds),
              "label_space": "min-max normalised per training split",
              "results": {s: {k: {kk: vv for kk, vv in ev.items() if kk != "predictions"} for k, ev in by.items()}
                          for s, by in results.items()},
              "table": {"header": header, "rows": rows}}
    out = Path(args.out) if args.out else root / "eval_report.json"
    emit(report, out, header, rows)
    return EXIT_OK


def cmd_map(args, cfg):
    ortho = mapping.load_ortho(args.ortho)
    model = predictor.load_model(args.model)
    mcfg = cfg.get("map", {})
    cell = args.cell_size if args.cell_size is not None else float(mcfg.get("cell_size", 0.25))
    resolution = int(mcfg.get("resolution", 64))
    spec = section(cfg, "sliding_window", mapping.SlidingWindowSpec)
    cmap = mapping.build_cost_map(ortho, model, spec, cell, resolution)
    out = Path(args.out)
    meta = mapping.export_map(cmap, out, out.with_suffix(".json"), out.with_suffix(".csv"))
    vals = cmap.values[cmap.observed]
    report = {"command": "map", "shape": list(cmap.shape), "cell_size": cell, "metric_kind": cmap.metric_kind,
              "observed_fraction": float(cmap.observed.mean()), "min": float(vals.min()), "mean": float(vals.mean()),
              "max": float(vals.max()), "sidecar": meta}
    emit(report, out.with_name(out.stem + "_report.json"), ["item", "value"],
         [["cells", f"{cmap.shape[0]}x{cmap.shape[1]}"], ["observed", report["observed_fraction"]],
          ["mean value", report["mean"]], ["max value", report["max"]]])
    return EXIT_OK


def _point(text):
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from None
    return (x, y)


def plot_plan(cmap, plans, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x0, y0 = cmap.origin
    h, w = cmap.shape
    fig, ax = plt.subplots(figsize=(6, 6 * h / max(w, 1)))
    im = ax.imshow(cmap.values, origin="lower", cmap="viridis", vmin=0, vmax=1,
                   extent=(x0, x0 + w * cmap.cell_size, y0, y0 + h * cmap.cell_size))
    for p, style in zip(plans, ("r-", "w--")):
        xy = np.array(p.waypoints)
        ax.plot(xy[:, 0], xy[:, 1], style, lw=2, label=p.mode)
    ax.legend(loc="upper right")
    fig.colorbar(im, ax=ax, label=cmap.metric_kind)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def cmd_plan(args, cfg):
    pcfg = cfg.get("plan", {})
    mode = args.mode or pcfg.get("mode", planner.METRIC_OPTIMAL)
    threshold = args.threshold if args.threshold is not None else float(pcfg.get("threshold", 0.8))
    conn = args.connectivity if args.connectivity is not None else int(pcfg.get("connectivity", 8))
    cmap = mapping.import_map(args.map)
    req = planner.PlanRequest(args.start, args.goal, mode, threshold, conn)
    plan = planner.plan(cmap, req)
    cum = planner.cumulative_costs(plan, cmap, weighted=mode == planner.METRIC_OPTIMAL)
    xy = np.array(plan.waypoints)
    out = Path(args.out)
    io.write_csv(out, {"x": xy[:, 0], "y": xy[:, 1], "cumulative_cost": cum})
    metrics = planner.path_metrics(plan, cmap)
    plans = [plan]
    if args.overlay:
        other = planner.SHORTEST_FEASIBLE if mode == planner.METRIC_OPTIMAL else planner.METRIC_OPTIMAL
        try:
            plans.append(planner.plan(cmap, planner.PlanRequest(args.start, args.goal, other, threshold, conn)))
        except NoPath:
            pass
        plot_plan(cmap, plans, args.overlay)
    report = {"command": "plan", "mode": mode, "threshold": threshold, "connectivity": conn,
              "start": list(args.start), "goal": list(args.goal), "total_cost": plan.total_cost,
              "n_waypoints": len(plan.waypoints), **metrics}
    emit(report, out.with_name(out.stem + "_report.json"), ["item", "value"],
         [["mode", mode], ["waypoints", len(plan.waypoints)], ["length_m", metrics["length"]],
          ["total_cost", plan.total_cost], ["mean_cost", metrics["mean_cost"]], ["max_cost", metrics["max_cost"]]])
    return EXIT_OK


def cmd_ablate(args, cfg):
    from .simkit.ablation import AblationConfig, run_ablation, write_report

    values = dict(cfg.get("ablation", {}))
    values["seed"] = resolve_seed(args, cfg)
    for k, v in values.items():
        if isinstance(v, list):
            values[k] = tuple(v)
    report = run_ablation(args.kind, AblationConfig(**values))
    paths = write_report(report, args.out)
    rows = [[r[c] for c in report["rows"][0]] for r in report["rows"]]
    print(format_table(list(report["rows"][0]), rows))
    for k in ("spearman_2_10", "improvement"):
        if k in report:
            print(f"{k}: {report[k]:.4f}")
    print(f"report: {paths['json']}")
    return EXIT_OK


# --------------------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="aerialterrain", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON pipeline config")
        sp.add_argument("--seed", type=int)
        sp.set_defaults(func=fn)
        return sp

    sp = add("simulate", cmd_simulate, "synthesise a scene, traverse logs and camera frames")
    sp.add_argument("--out", required=True)
    sp.add_argument("--scene", choices=sorted(SCENE_PRESETS), default="two-class")
    sp.add_argument("--size", type=float)
    sp.add_argument("--lanes", type=int)
    sp.add_argument("--lane-spacing", dest="lane_spacing", type=float)

    sp = add("gen-labels", cmd_gen_labels, "compute M_z, M_omega and M_p from imu.csv and power.csv")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out")

    sp = add("extract", cmd_extract, "sample POIs and extract ground and aerial patches")
    sp.add_argument("--data", required=True)
    sp.add_argument("--labels")
    sp.add_argument("--out", required=True)
    sp.add_argument("--spacing", type=float, default=0.3)

    sp = add("train", cmd_train, "train one regressor per evaluated fold")
    sp.add_argument("--records", required=True)
    sp.add_argument("--source", choices=["uav", "ugv", "both"], default="uav")
    sp.add_argument("--metric", choices=[*signals.METRIC_KINDS, "all"], default="all")
    sp.add_argument("--protocol", choices=sorted(dataset.PROTOCOLS), default="paper-90-10")
    sp.add_argument("--profile", choices=sorted(predictor.CONFIG_PROFILES), default="default")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--final", action="store_true", help="also train a model on every record")
    sp.add_argument("--all-views", action="store_true", help="use ugv views beyond the comparison distance")
    sp.add_argument("--out")

    sp = add("eval", cmd_eval, "held-out RMSE per fold and per terrain")
    sp.add_argument("--records", required=True)
    sp.add_argument("--models")
    sp.add_argument("--folds")
    sp.add_argument("--source", choices=["uav", "ugv", "both"], default="both")
    sp.add_argument("--metric", choices=[*signals.METRIC_KINDS, "all"], default="all")
    sp.add_argument("--all-views", action="store_true")
    sp.add_argument("--out")

    sp = add("map", cmd_map, "cost map from an orthoimage")
    sp.add_argument("--ortho", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--cell-size", dest="cell_size", type=float)

    sp = add("plan", cmd_plan, "plan a path over an exported cost map")
    sp.add_argument("--map", required=True)
    sp.add_argument("--start", type=_point, required=True)
    sp.add_argument("--goal", type=_point, required=True)
    sp.add_argument("--mode", choices=[planner.METRIC_OPTIMAL, planner.SHORTEST_FEASIBLE])
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--connectivity", type=int, choices=[4, 8])
    sp.add_argument("--out", required=True)
    sp.add_argument("--overlay")

    sp = add("ablate", cmd_ablate, "distance, blur or occlusion ablation on synthetic data")
    sp.add_argument("kind", choices=["distance", "blur", "occlusion"])
    sp.add_argument("--out", required=True)
    return p


def main(argv=None):
    logging.basicConfig(level=os.environ.get("AERIALTERRAIN_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (NoPath, EmptyMap, DegenerateRange, TooFewRecords, NonFiniteLoss) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (io.InputError, ConfigError, TerrainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
