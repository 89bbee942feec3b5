"""Hand-crafted texture descriptor used in place of a CNN backbone.

Layout of the 54-dimensional vector (gray levels scaled to [0, 1]):

==========  ====  =====================================================
index       size  feature
==========  ====  =====================================================
0-8         9     per-channel mean, std, skew proxy (mean|x-mu|^3)^(1/3)
9-24        16    gray-level histogram, 16 bins over [0, 1], sums to 1
25-26       2     gradient magnitude mean, std (full resolution)
27-34       8     gradient orientation histogram, full resolution
35-36       2     gradient magnitude mean, std (half resolution)
37-44       8     gradient orientation histogram, half resolution
45-48       4     Laplacian-pyramid band energies, levels 0-3
49-51       3     band anisotropy (ex - ey) / (ex + ey), levels 0-2
52-53       2     mean row variance, mean column variance
==========  ====  =====================================================

Orientation histograms are unsigned (angles mod pi), magnitude weighted,
with bin 0 centred on horizontal gradients. Gray patches are replicated to
three channels for the channel statistics.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import BadPatchShape

SCHEMA_ID = "texture-v1-54"
FEATURE_LENGTH = 54
DEFAULT_RESOLUTION = 64
N_HIST = 16
N_ORIENT = 8
N_LEVELS = 4


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    schema_id: str = SCHEMA_ID

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (FEATURE_LENGTH,) or not np.all(np.isfinite(v)):
            raise ValueError("feature vector must be finite with the schema length")
        object.__setattr__(self, "values", v)


def _gray(patch):
    return patch if patch.ndim == 2 else patch.mean(axis=2)


def _orientation_hist(img):
    gy, gx = np.gradient(img)
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    width = np.pi / N_ORIENT
    bins = np.floor((theta + width / 2) / width).astype(int) % N_ORIENT
    hist = np.bincount(bins.ravel(), weights=mag.ravel(), minlength=N_ORIENT)
    total = hist.sum()
    if total > 0:
        hist = hist / total
    return np.concatenate([[mag.mean(), mag.std()], hist])


def _band_stats(img):
    energies = []
    aniso = []
    level = img
    for lvl in range(N_LEVELS):
        blurred = ndimage.gaussian_filter(level, 1.0, mode="reflect")
        band = level - blurred
        energies.append(np.log1p(1e3 * np.mean(band ** 2)))
        if lvl < N_LEVELS - 1:
            ex = np.mean(np.diff(band, axis=1) ** 2)
            ey = np.mean(np.diff(band, axis=0) ** 2)
            aniso.append((ex - ey) / (ex + ey) if ex + ey > 1e-12 else 0.0)
        level = blurred[::2, ::2]
    return energies, aniso


def extract_features(patch, resolution=DEFAULT_RESOLUTION):
    """Deterministic 54-value texture descriptor of a square patch in gray levels [0, 255]."""
    patch = np.asarray(patch, dtype=float)
    if patch.ndim not in (2, 3) or patch.shape[0] != resolution or patch.shape[1] != resolution:
        raise BadPatchShape(f"expected {resolution}x{resolution} patch, got {patch.shape}")
    if patch.ndim == 3 and patch.shape[2] not in (1, 3):
        raise BadPatchShape(f"unsupported channel count {patch.shape[2]}")
    x = patch / 255.0
    chans = [x] * 3 if x.ndim == 2 else [x[..., c] for c in range(x.shape[2])] * (3 if x.shape[2] == 1 else 1)
    stats = []
    for ch in chans:
        mu = ch.mean()
        stats += [mu, ch.std(), np.cbrt(np.mean(np.abs(ch - mu) ** 3))]
    g = _gray(x)
    hist = np.histogram(np.clip(g, 0.0, 1.0), bins=N_HIST, range=(0.0, 1.0))[0] / g.size
    grad_full = _orientation_hist(g)
    half = g.reshape(resolution // 2, 2, resolution // 2, 2).mean(axis=(1, 3)) if resolution % 2 == 0 else g[::2, ::2]
    grad_half = _orientation_hist(half)
    energies, aniso = _band_stats(g)
    profiles = [g.var(axis=1).mean(), g.var(axis=0).mean()]
    vec = np.concatenate([stats, hist, grad_full, grad_half, energies, aniso, profiles])
    return FeatureVector(vec)


def feature_matrix(patches, resolution=DEFAULT_RESOLUTION):
    return np.stack([extract_features(p, resolution).values for p in patches]) if len(patches) else np.empty((0, FEATURE_LENGTH))
