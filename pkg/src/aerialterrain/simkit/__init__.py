"""Synthetic scenes, traverses, renderings and ablation studies with known ground truth."""

from .render import (AerialView, default_calibration, render_aerial, render_aerial_view, render_fpv,
                     simulate_aerial_frames, simulate_fpv_frames)
from .scene import CLASS_LIBRARY, Scene, TerrainClassSpec, generate_scene, layout_class_map
from .traverse import SensorBundle, lawnmower_path, simulate_traverse

__all__ = [
    "AerialView", "CLASS_LIBRARY", "Scene", "SensorBundle", "TerrainClassSpec", "default_calibration",
    "generate_scene", "lawnmower_path", "layout_class_map", "render_aerial", "render_aerial_view", "render_fpv",
    "simulate_aerial_frames", "simulate_fpv_frames", "simulate_traverse",
]
