import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aerialterrain.dataset import PatchRecord, View, make_folds
from aerialterrain.errors import NonFiniteLoss, SchemaMismatch
from aerialterrain.features import FeatureVector
from aerialterrain.predictor import (
    CONFIG_PROFILES,
    FeatureCache,
    RegressorModel,
    TrainConfig,
    evaluate,
    finite_difference_check,
    fit,
    forward,
    init_model,
    load_model,
    loss_and_gradients,
    rmse,
    save_model,
    train,
    train_final,
)


def small_model(seed, n_features=5, hidden=(4, 3)):
    r = np.random.default_rng(seed)
    m = init_model(n_features, hidden, seed=seed, feature_mean=r.normal(size=n_features),
                   feature_std=r.uniform(0.5, 2.0, n_features))
    for b in m.biases:
        b[:] = r.normal(scale=0.3, size=b.shape)
    return m


def zero_model(n_features=4):
    m = init_model(n_features, (3, 2))
    for p in m.params:
        p[:] = 0.0
    return m


# --------------------------------------------------------------------------- forward


def test_zero_model_predicts_half():
    np.testing.assert_array_equal(forward(zero_model(), np.random.default_rng(0).normal(size=(5, 4))), 0.5)


def test_large_final_bias_saturates():
    m = zero_model()
    m.biases[-1][:] = 1e6
    y = forward(m, np.zeros((1, 4)))[0]
    assert y < 1.0 and y == pytest.approx(1.0)


def test_forward_matches_matrix_arithmetic():
    m = RegressorModel(
        np.array([1.0, -1.0]), np.array([2.0, 0.5]),
        [np.array([[1.0, -2.0], [0.5, 0.25], [-1.0, 1.0]]), np.array([[1.0, -1.0, 2.0], [0.0, 3.0, -0.5]]),
         np.array([[0.7, -0.2]])],
        [np.array([0.1, -0.1, 0.0]), np.array([0.2, 0.0]), np.array([-0.3])])
    x = np.array([3.0, 1.0])
    z = (x - [1.0, -1.0]) / [2.0, 0.5]  # (1, 4)
    h1 = np.maximum([1 * z[0] - 2 * z[1] + 0.1, 0.5 * z[0] + 0.25 * z[1] - 0.1, -z[0] + z[1]], 0)
    h2 = np.maximum([h1[0] - h1[1] + 2 * h1[2] + 0.2, 3 * h1[1] - 0.5 * h1[2]], 0)
    out = 1 / (1 + np.exp(-(0.7 * h2[0] - 0.2 * h2[1] - 0.3)))
    assert forward(m, x[None, :])[0] == pytest.approx(out, rel=1e-12)


@given(st.lists(st.floats(-1e300, 1e300), min_size=4, max_size=4), st.integers(0, 1000))
def test_forward_strictly_inside_unit_interval(x, seed):
    m = small_model(seed, n_features=4)
    y = forward(m, np.array([x]))[0]
    assert 0.0 < y < 1.0


def test_schema_mismatch():
    m = small_model(0)
    with pytest.raises(SchemaMismatch):
        forward(m, np.zeros((1, 7)))
    with pytest.raises(SchemaMismatch):
        forward(init_model(54), FeatureVector(np.zeros(54), schema_id="other"))


# --------------------------------------------------------------------------- gradients


@pytest.mark.parametrize("seed", range(10))
def test_gradient_check(seed):
    m = small_model(seed)
    r = np.random.default_rng(100 + seed)
    x = r.normal(size=(6, 5))
    y = r.random(6)
    assert finite_difference_check(m, x, y, 1e-5, l2=0.01) < 1e-4


def test_gradient_zero_at_perfect_prediction():
    m = small_model(3)
    x = np.random.default_rng(0).normal(size=(4, 5))
    y = forward(m, x)
    loss, grads = loss_and_gradients(m, x, y)
    assert loss == pytest.approx(0.0, abs=1e-20)
    assert max(np.abs(g).max() for g in grads) < 1e-8
    assert finite_difference_check(m, x, y) == 0.0


def test_gradient_check_catches_sign_flip():
    def mutant(model, features, targets, l2):
        loss, grads = loss_and_gradients(model, features, targets, l2)
        grads[2] = -grads[2]
        return loss, grads

    m = small_model(1)
    r = np.random.default_rng(1)
    x, y = r.normal(size=(6, 5)), r.random(6)
    assert finite_difference_check(m, x, y, gradient_fn=mutant) > 0.1


def test_epsilon_range():
    with pytest.raises(ValueError):
        finite_difference_check(small_model(0), np.zeros((1, 5)), [0.5], epsilon=1e-2)


# --------------------------------------------------------------------------- training


def toy_features(n=40, seed=0):
    """Two constant-texture classes as one-view feature matrices."""
    from aerialterrain.features import extract_features

    r = np.random.default_rng(seed)
    feats, y = [], []
    for i in range(n):
        gray = 60.0 if i % 2 == 0 else 190.0
        patch = np.clip(gray + r.normal(0, 1.0, (64, 64)), 0, 255)
        feats.append(extract_features(patch).values[None, :])
        y.append(0.1 if i % 2 == 0 else 0.9)
    return feats, np.array(y)


def test_toy_set_learnable():
    feats, y = toy_features()
    model, curve = fit(feats, y, TrainConfig(epochs=200, batch_size=8))
    pred = forward(model, np.concatenate(feats))
    assert rmse(pred, y) < 0.05
    assert curve[-1] < curve[0]


def test_zero_epochs_is_initialisation():
    feats, y = toy_features(10)
    model, curve = fit(feats, y, TrainConfig(epochs=0))
    assert len(curve) == 1
    untrained, _ = fit(feats, y, TrainConfig(epochs=0))
    for a, b in zip(model.params, untrained.params):
        np.testing.assert_array_equal(a, b)
    assert curve[0] == pytest.approx(rmse(forward(model, np.concatenate(feats)), y) ** 2)


def test_training_deterministic():
    feats, y = toy_features(20)
    m1, c1 = fit(feats, y, TrainConfig(epochs=15, seed=4))
    m2, c2 = fit(feats, y, TrainConfig(epochs=15, seed=4))
    assert c1 == c2
    for a, b in zip(m1.params, m2.params):
        assert np.array_equal(a, b)
    m3, _ = fit(feats, y, TrainConfig(epochs=15, seed=5))
    assert not np.array_equal(m1.params[0], m3.params[0])


def test_single_layer_full_batch_loss_non_increasing():
    r = np.random.default_rng(3)
    x = r.normal(size=(50, 6))
    y = 1 / (1 + np.exp(-(x @ r.normal(size=6))))
    feats = [row[None, :] for row in x]
    cfg = TrainConfig(epochs=200, batch_size=50, hidden=(), optimizer="sgd", learning_rate=0.5, l2=0.0)
    _, curve = fit(feats, y, cfg)
    assert np.all(np.diff(curve) <= 1e-6)
    assert curve[-1] < 0.5 * curve[0]


def test_non_finite_loss_aborts():
    feats, y = toy_features(6)
    y = y.copy()
    y[0] = np.nan
    with pytest.raises(NonFiniteLoss):
        fit(feats, y, TrainConfig(epochs=1))


def test_config_profiles():
    assert CONFIG_PROFILES["paper-defaults"].batch_size == 256
    assert CONFIG_PROFILES["paper-defaults"].learning_rate == 5e-5
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)


# --------------------------------------------------------------------------- evaluation


def texture_records(n=30, seed=0):
    r = np.random.default_rng(seed)
    recs = []
    for i in range(n):
        rough = i % 3
        views = [View("uav", f"uav{j:05d}", float("nan"),
                      np.clip(128 + (10 + 30 * rough) * r.standard_normal((64, 64)), 0, 255)) for j in range(2)]
        recs.append(PatchRecord(i, float(i), 0.0, 0.0, 0.0, views,
                                {"m_z": rough + 0.1 * r.random(), "m_omega": 1.0, "m_p": 1.0}, {},
                                ["smooth", "medium", "rough"][rough]))
    return recs


def test_train_evaluate_held_out():
    recs = texture_records()
    folds = make_folds(recs, 5, 0)
    cache = FeatureCache()
    results = train(recs, "uav", "m_z", folds, TrainConfig(epochs=60), cache)
    assert [r.fold for r in results] == [0, 1, 2, 3, 4]
    for res in results:
        assert res.n_train == 24
    ev = evaluate(results, recs, "uav", "m_z", folds, cache)
    assert ev["n"] == 30
    for row in ev["predictions"]:
        assert row["fold"] == folds.fold_of(row["poi_id"])
    assert set(ev["per_tag"]) == {"smooth", "medium", "rough"}
    assert ev["mean_rmse"] < 0.2


def test_evaluate_rejects_wrong_fold_model():
    recs = texture_records(10)
    folds = make_folds(recs, 2, 0)
    results = train(recs, "uav", "m_z", folds, TrainConfig(epochs=1))
    results[0].model.fold = 1
    with pytest.raises(AssertionError):
        evaluate(results, recs, "uav", "m_z", folds)


def test_train_final_uses_all_records():
    recs = texture_records(9)
    res = train_final(recs, "uav", "m_z", TrainConfig(epochs=2))
    assert res.fold == -1 and res.n_train == 9


def test_rmse_examples():
    y = np.random.default_rng(0).random(20_000)
    assert rmse(y, y) == 0.0
    assert rmse(np.full_like(y, 0.5), y) == pytest.approx(1 / np.sqrt(12), abs=0.01)
    assert rmse(y + 0.1, y) == pytest.approx(0.1, abs=1e-12)
    assert np.isnan(rmse([], []))


def test_model_json_round_trip(tmp_path):
    m = small_model(7)
    m.label_stats = (1.5, 3.0)
    save_model(tmp_path / "m.json", m)
    back = load_model(tmp_path / "m.json")
    x = np.random.default_rng(0).normal(size=(3, 5))
    np.testing.assert_array_equal(forward(m, x), forward(back, x))
    assert back.label_stats == (1.5, 3.0)


def test_layer_shapes_validated():
    with pytest.raises(ValueError):
        RegressorModel(np.zeros(3), np.ones(3), [np.zeros((2, 4)), np.zeros((1, 2))], [np.zeros(2), np.zeros(1)])
