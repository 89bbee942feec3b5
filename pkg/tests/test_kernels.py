import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aerialterrain import _kernels_py, kernels

ckernels = pytest.importorskip("aerialterrain._ckernels")


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@given(st.integers(0, 2**32 - 1))
def test_bilinear_backends_agree(seed):
    r = np.random.default_rng(seed)
    h, w = r.integers(1, 20, size=2)
    img = r.random((h, w)) * 255
    rows = r.uniform(-2, h + 1, size=(7, 11))
    cols = r.uniform(-2, w + 1, size=(7, 11))
    rows[0, 0] = np.nan
    a, va = _kernels_py.bilinear_sample(img, rows, cols)
    b, vb = ckernels.bilinear_sample(img, rows, cols)
    np.testing.assert_array_equal(va, vb)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    assert a.shape == rows.shape


def test_bilinear_examples():
    img = np.array([[0.0, 10.0], [20.0, 30.0]])
    for impl in (_kernels_py, ckernels):
        v, ok = impl.bilinear_sample(img, np.array([0.0, 0.5, 1.0, 5.0]), np.array([0.0, 0.5, 1.0, 0.0]))
        np.testing.assert_allclose(v[:3], [0.0, 15.0, 30.0])
        assert ok.tolist() == [True, True, True, False]


@given(st.integers(0, 2**32 - 1), st.sampled_from([4, 8]), st.booleans())
def test_dijkstra_backends_agree(seed, connectivity, weighted):
    r = np.random.default_rng(seed)
    h, w = r.integers(1, 12, size=2)
    if h * w < 2:
        return
    cost = r.random((h, w))
    ok = (r.random((h, w)) > 0.25).astype(np.uint8)
    s, g = r.choice(h * w, 2, replace=False)
    ok.flat[s] = ok.flat[g] = 1
    pa, ca = _kernels_py.dijkstra_grid(cost, ok, int(s), int(g), connectivity, weighted)
    pb, cb = ckernels.dijkstra_grid(cost, ok, int(s), int(g), connectivity, weighted)
    assert pa == pb
    assert ca == pytest.approx(cb, abs=1e-12) or (np.isinf(ca) and np.isinf(cb))
    if pa:
        assert pa[0] == s and pa[-1] == g


def test_dijkstra_large_grid_grows_heap():
    cost = np.random.default_rng(0).random((120, 120))
    ok = np.ones_like(cost, dtype=np.uint8)
    pa, ca = _kernels_py.dijkstra_grid(cost, ok, 0, cost.size - 1)
    pb, cb = ckernels.dijkstra_grid(cost, ok, 0, cost.size - 1)
    assert pa == pb and ca == pytest.approx(cb, abs=1e-9)
