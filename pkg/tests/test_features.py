import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aerialterrain.errors import BadPatchShape
from aerialterrain.features import FEATURE_LENGTH, SCHEMA_ID, FeatureVector, extract_features, feature_matrix

STATS = slice(0, 9)
HIST = slice(9, 25)
GRAD_FULL = slice(25, 27)
ORIENT_FULL = slice(27, 35)
GRAD_HALF = slice(35, 37)
ORIENT_HALF = slice(37, 45)
BANDS = slice(45, 49)
PROFILES = slice(52, 54)


def test_constant_patch():
    f = extract_features(np.full((64, 64), 100.0)).values
    assert f.shape == (FEATURE_LENGTH,)
    np.testing.assert_allclose(f[[1, 4, 7]], 0.0, atol=1e-12)
    np.testing.assert_allclose(f[GRAD_FULL], 0.0, atol=1e-12)
    np.testing.assert_allclose(f[GRAD_HALF], 0.0, atol=1e-12)
    np.testing.assert_allclose(f[BANDS], 0.0, atol=1e-12)
    np.testing.assert_allclose(f[PROFILES], 0.0, atol=1e-12)
    hist = f[HIST]
    assert np.count_nonzero(hist) == 1 and hist.sum() == pytest.approx(1.0)


@given(st.integers(0, 2**32 - 1))
def test_rotation_keeps_histogram(seed):
    patch = np.random.default_rng(seed).integers(0, 256, (64, 64)).astype(float)
    a = extract_features(patch).values
    b = extract_features(np.rot90(patch)).values
    np.testing.assert_allclose(a[HIST], b[HIST], atol=1e-12)
    np.testing.assert_allclose(a[STATS], b[STATS], atol=1e-12)


def test_vertical_stripes_have_horizontal_gradients():
    cols = np.arange(64)
    patch = np.tile(128 + 80 * np.sin(2 * np.pi * cols / 8.0), (64, 1))
    orient = extract_features(patch).values[ORIENT_FULL]
    # analytic gradient of a vertical stripe pattern points along x: orientation bin 0
    assert orient[0] > 0.99
    assert orient.sum() == pytest.approx(1.0)


def test_bad_shape():
    with pytest.raises(BadPatchShape):
        extract_features(np.zeros((32, 64)))
    with pytest.raises(BadPatchShape):
        extract_features(np.zeros((64, 64, 2)))


def test_color_patch_supported():
    rgb = np.random.default_rng(0).integers(0, 256, (64, 64, 3)).astype(float)
    f = extract_features(rgb)
    assert f.schema_id == SCHEMA_ID and np.all(np.isfinite(f.values))


def test_gray_equals_replicated_color():
    g = np.random.default_rng(1).integers(0, 256, (64, 64)).astype(float)
    np.testing.assert_allclose(extract_features(g).values, extract_features(np.dstack([g] * 3)).values, atol=1e-12)


def test_blur_lowers_fine_band_energy():
    from scipy import ndimage

    patch = np.random.default_rng(2).integers(0, 256, (64, 64)).astype(float)
    sharp = extract_features(patch).values[45]
    soft = extract_features(ndimage.gaussian_filter(patch, 2.0)).values[45]
    assert soft < sharp


def test_feature_matrix_and_vector_validation():
    assert feature_matrix([]).shape == (0, FEATURE_LENGTH)
    m = feature_matrix([np.zeros((64, 64)), np.ones((64, 64))])
    assert m.shape == (2, FEATURE_LENGTH)
    with pytest.raises(ValueError):
        FeatureVector(np.zeros(10))
    with pytest.raises(ValueError):
        FeatureVector(np.full(FEATURE_LENGTH, np.nan))


def test_other_resolution():
    f = extract_features(np.random.default_rng(3).random((256, 256)) * 255, resolution=256)
    assert f.values.shape == (FEATURE_LENGTH,)
