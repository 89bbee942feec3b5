"""Synthetic terrain scenes: class layouts, value-noise textures and ground-truth fields."""

from dataclasses import dataclass, field

import numpy as np

from ..kernels import bilinear_sample


@dataclass(frozen=True)
class TerrainClassSpec:
    """Appearance and proprioceptive response of one terrain class.

    ``texture_params`` is (base gray, noise amplitude, spatial frequency in
    cycles per meter). Occluder classes (tall-vegetation analogues) show
    ``occluder_params`` from above-ground viewpoints and ``texture_params`` as
    their hidden ground texture.
    """

    name: str
    texture_params: tuple
    roughness: float
    bumpiness: float
    power_draw: float
    occluder: bool = False
    occluder_params: tuple = (85.0, 30.0, 7.0)

    def __post_init__(self):
        if min(self.roughness, self.bumpiness) < 0:
            raise ValueError("roughness and bumpiness must be non-negative")
        if self.texture_params[2] <= 0 or self.occluder_params[2] <= 0:
            raise ValueError("texture frequencies must be positive")


CLASS_LIBRARY = {
    "quarry": TerrainClassSpec("quarry", (150.0, 14.0, 0.8), roughness=0.25, bumpiness=0.03, power_draw=10.0),
    "trail": TerrainClassSpec("trail", (140.0, 22.0, 3.0), roughness=0.8, bumpiness=0.07, power_draw=35.0),
    "moss": TerrainClassSpec("moss", (120.0, 26.0, 5.5), roughness=1.4, bumpiness=0.11, power_draw=60.0),
    "gravel": TerrainClassSpec("gravel", (135.0, 40.0, 11.0), roughness=2.4, bumpiness=0.18, power_draw=90.0),
    "grass_mud": TerrainClassSpec("grass_mud", (105.0, 16.0, 1.5), roughness=0.4, bumpiness=0.05, power_draw=110.0,
                                  occluder=True),
    "grass_rock": TerrainClassSpec("grass_rock", (160.0, 42.0, 9.0), roughness=2.2, bumpiness=0.17, power_draw=40.0,
                                   occluder=True),
}


def _catmull_rom_matrix(n_out, cell, n_lattice):
    """Rows hold Catmull-Rom weights mapping lattice values to ``n_out`` samples spaced 1/cell apart."""
    pos = np.arange(n_out) / cell + 1.0
    i0 = np.floor(pos).astype(int)
    t = pos - i0
    w = np.stack([
        0.5 * (-t ** 3 + 2 * t ** 2 - t),
        0.5 * (3 * t ** 3 - 5 * t ** 2 + 2),
        0.5 * (-3 * t ** 3 + 4 * t ** 2 + t),
        0.5 * (t ** 3 - t ** 2),
    ], axis=1)
    m = np.zeros((n_out, n_lattice))
    rows = np.arange(n_out)
    for k in range(4):
        np.add.at(m, (rows, np.clip(i0 - 1 + k, 0, n_lattice - 1)), w[:, k])
    return m


def value_noise(shape, feature_px, rng, octaves=3, persistence=0.5):
    """Fractal value noise: random lattices interpolated with Catmull-Rom splines, summed over octaves.

    The result is rescaled to zero mean and unit standard deviation.
    """
    h, w = shape
    out = np.zeros(shape)
    amp = 1.0
    size = float(feature_px)
    for _ in range(octaves):
        cell = max(size, 1.0)
        lh = int(np.ceil(h / cell)) + 4
        lw = int(np.ceil(w / cell)) + 4
        lattice = rng.standard_normal((lh, lw))
        out += amp * (_catmull_rom_matrix(h, cell, lh) @ lattice @ _catmull_rom_matrix(w, cell, lw).T)
        amp *= persistence
        size /= 2.0
    std = out.std()
    return (out - out.mean()) / (std if std > 0 else 1.0)


def _class_texture(spec_params, shape, res, rng):
    base, amp, freq = spec_params
    feature_px = 1.0 / (freq * res)
    return base + amp * value_noise(shape, feature_px, rng)


@dataclass
class Scene:
    """Scene of ``width`` x ``height`` meters; arrays are indexed (row, col) with row growing along +y.

    ``texture`` is what an above-ground camera sees (occluders included);
    ``ground_texture`` replaces occluder cells with their hidden ground.
    """

    classes: list
    class_map: np.ndarray
    class_cell: float
    texture: np.ndarray
    ground_texture: np.ndarray
    texture_res: float
    seed: int
    _pyramids: dict = field(default_factory=dict, repr=False)

    @property
    def width(self):
        return self.class_map.shape[1] * self.class_cell

    @property
    def height(self):
        return self.class_map.shape[0] * self.class_cell

    def contains(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        return (x >= 0) & (x <= self.width) & (y >= 0) & (y <= self.height)

    def class_at(self, x, y):
        j = np.clip((np.asarray(x) / self.class_cell).astype(int), 0, self.class_map.shape[1] - 1)
        i = np.clip((np.asarray(y) / self.class_cell).astype(int), 0, self.class_map.shape[0] - 1)
        return self.class_map[i, j]

    def field(self, attr):
        """Ground-truth per-cell field (``roughness``, ``bumpiness``, ``power_draw``)."""
        lut = np.array([getattr(c, attr) for c in self.classes])
        return lut[self.class_map]

    def property_at(self, attr, x, y):
        lut = np.array([getattr(c, attr) for c in self.classes])
        return lut[self.class_at(x, y)]

    def tag_at(self, x, y):
        return self.classes[int(self.class_at(x, y))].name

    def occluder_mask_cells(self):
        lut = np.array([c.occluder for c in self.classes])
        return lut[self.class_map]

    def pyramid(self, occlusion=False):
        """Box-filtered mip pyramid of the texture seen from above (``occlusion`` selects the hidden ground)."""
        key = bool(occlusion)
        if key not in self._pyramids:
            base = self.ground_texture if occlusion else self.texture
            levels = [np.ascontiguousarray(base, dtype=np.float64)]
            while min(levels[-1].shape) >= 16:
                a = levels[-1]
                h2, w2 = a.shape[0] // 2, a.shape[1] // 2
                levels.append(np.ascontiguousarray(a[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2).mean(axis=(1, 3))))
            self._pyramids[key] = levels
        return self._pyramids[key]

    def sample(self, x, y, level=0, occlusion=False, fill=128.0):
        """Bilinear texture lookup at world points on a given pyramid level."""
        levels = self.pyramid(occlusion)
        level = int(min(max(level, 0), len(levels) - 1))
        res = self.texture_res * 2 ** level
        img = levels[level]
        # level-k texel centres sit at (i + 0.5) * res in world units
        vals, valid = bilinear_sample(img, np.asarray(y) / res - 0.5, np.asarray(x) / res - 0.5)
        return np.where(valid, vals, fill)

    @property
    def n_levels(self):
        return len(self.pyramid(False))


def layout_class_map(layout, shape, n_classes, rng, cell):
    """Class ids per cell for a layout description.

    Layouts: ``{"kind": "halves"}`` (left/right), ``{"kind": "stripes", "width": m}``
    (vertical bands cycling through classes), ``{"kind": "blocks", "size": m}``
    (seeded random class per block), ``{"kind": "voronoi", "sites": n}`` and
    ``{"kind": "strip", "y0": m, "y1": m, "gap_x0": m, "gap_x1": m}`` (class 0
    background, class 1 horizontal strip with a class-0 gap; class 2, when
    present, fills the gap).
    """
    h, w = shape
    kind = layout.get("kind", "halves")
    ys = (np.arange(h) + 0.5) * cell
    xs = (np.arange(w) + 0.5) * cell
    xx, yy = np.meshgrid(xs, ys)
    if kind == "halves":
        cm = np.zeros(shape, dtype=np.int64)
        cm[:, w // 2:] = 1 % n_classes
        return cm
    if kind == "stripes":
        width = float(layout.get("width", 6.0))
        order = layout.get("order", list(range(n_classes)))
        idx = (xx // width).astype(int) % len(order)
        return np.asarray(order)[idx]
    if kind == "blocks":
        size = float(layout.get("size", 5.0))
        bi = (yy // size).astype(int)
        bj = (xx // size).astype(int)
        table = rng.integers(0, n_classes, size=(bi.max() + 1, bj.max() + 1))
        return table[bi, bj]
    if kind == "voronoi":
        n = int(layout.get("sites", 4 * n_classes))
        sites = rng.uniform([0, 0], [w * cell, h * cell], size=(n, 2))
        labels = np.arange(n) % n_classes
        d = (xx[..., None] - sites[:, 0]) ** 2 + (yy[..., None] - sites[:, 1]) ** 2
        return labels[np.argmin(d, axis=-1)]
    if kind == "strip":
        cm = np.zeros(shape, dtype=np.int64)
        in_strip = (yy >= layout["y0"]) & (yy < layout["y1"])
        cm[in_strip] = 1
        gap = in_strip & (xx >= layout["gap_x0"]) & (xx < layout["gap_x1"])
        cm[gap] = 2 if n_classes > 2 else 0
        return cm
    raise ValueError(f"unknown layout {kind!r}")


def generate_scene(specs, layout, seed=0, width=40.0, height=40.0, class_cell=0.25, texture_res=0.02):
    """Deterministic scene from class specs and a layout (see ``layout_class_map``)."""
    specs = [CLASS_LIBRARY[s] if isinstance(s, str) else s for s in specs]
    root = np.random.SeedSequence(seed)
    layout_seq, *class_seqs = root.spawn(1 + len(specs) + 1)
    occ_seq = class_seqs.pop()
    shape = (int(round(height / class_cell)), int(round(width / class_cell)))
    cm = layout_class_map(layout, shape, len(specs), np.random.default_rng(layout_seq), class_cell)
    tshape = (int(round(height / texture_res)), int(round(width / texture_res)))
    ti = np.minimum(((np.arange(tshape[0]) + 0.5) * texture_res / class_cell).astype(int), shape[0] - 1)
    tj = np.minimum(((np.arange(tshape[1]) + 0.5) * texture_res / class_cell).astype(int), shape[1] - 1)
    cm_tex = cm[np.ix_(ti, tj)]
    texture = np.zeros(tshape, dtype=np.float32)
    ground = np.zeros(tshape, dtype=np.float32)
    occluder_cache = {}
    for cid, (spec, seq) in enumerate(zip(specs, class_seqs)):
        sel = cm_tex == cid
        if not sel.any():
            continue
        tex = _class_texture(spec.texture_params, tshape, texture_res, np.random.default_rng(seq))
        ground[sel] = tex[sel]
        if spec.occluder:
            key = tuple(spec.occluder_params)
            if key not in occluder_cache:
                # one shared field per occluder look, so neighbouring occluder classes are indistinguishable
                occ_rng = np.random.default_rng([occ_seq.entropy, *(int(round(v * 1000)) for v in key)])
                occluder_cache[key] = _class_texture(key, tshape, texture_res, occ_rng)
            texture[sel] = occluder_cache[key][sel]
        else:
            texture[sel] = tex[sel]
    np.clip(texture, 0, 255, out=texture)
    np.clip(ground, 0, 255, out=ground)
    return Scene(specs, cm, class_cell, texture, ground, texture_res, seed)
