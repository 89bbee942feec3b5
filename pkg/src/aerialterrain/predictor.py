"""Patch regressor: standardised texture features -> 3-layer MLP -> sigmoid.

Training uses mean squared error on min-max normalised labels, mini-batch
Adam, and one randomly drawn view per record per epoch.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import io
from .dataset import evaluation_view, normalize_value
from .errors import DegenerateRange, NoViews, NonFiniteLoss, SchemaMismatch
from .features import FEATURE_LENGTH, SCHEMA_ID, extract_features

log = logging.getLogger(__name__)

_TINY = np.finfo(float).tiny
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-3
    epochs: int = 150
    seed: int = 0
    l2: float = 1e-4
    hidden: tuple = (64, 32)
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


PAPER_DEFAULTS = TrainConfig(batch_size=256, learning_rate=5e-5)
CONFIG_PROFILES = {"default": TrainConfig(), "paper-defaults": PAPER_DEFAULTS}


@dataclass
class RegressorModel:
    feature_mean: np.ndarray
    feature_std: np.ndarray
    weights: list
    biases: list
    metric_kind: str = "m_z"
    schema_id: str = SCHEMA_ID
    label_stats: tuple = (0.0, 1.0)
    fold: int = -1
    hidden_activation: str = "relu"
    output_activation: str = "sigmoid"

    def __post_init__(self):
        prev = len(self.feature_mean)
        for w, b in zip(self.weights, self.biases):
            if w.shape[1] != prev or b.shape != (w.shape[0],):
                raise ValueError("layer shapes do not chain")
            prev = w.shape[0]
        if prev != 1:
            raise ValueError("last layer must have one output")

    @property
    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self):
        return RegressorModel(self.feature_mean.copy(), self.feature_std.copy(), [w.copy() for w in self.weights],
                              [b.copy() for b in self.biases], self.metric_kind, self.schema_id, self.label_stats,
                              self.fold, self.hidden_activation, self.output_activation)

    def to_dict(self):
        return {
            "schema_id": self.schema_id,
            "metric_kind": self.metric_kind,
            "fold": self.fold,
            "label_stats": list(self.label_stats),
            "activation": {"hidden": self.hidden_activation, "output": self.output_activation},
            "feature_stats": {"mean": self.feature_mean.tolist(), "std": self.feature_std.tolist()},
            "layers": [{"shape": list(w.shape), "weights": w.ravel().tolist(), "bias": b.tolist()}
                       for w, b in zip(self.weights, self.biases)],
        }

    @classmethod
    def from_dict(cls, d):
        ws = [np.asarray(layer["weights"], dtype=float).reshape(layer["shape"]) for layer in d["layers"]]
        bs = [np.asarray(layer["bias"], dtype=float) for layer in d["layers"]]
        return cls(np.asarray(d["feature_stats"]["mean"], dtype=float), np.asarray(d["feature_stats"]["std"], dtype=float),
                   ws, bs, d["metric_kind"], d["schema_id"], tuple(d.get("label_stats", (0.0, 1.0))), int(d.get("fold", -1)))


def save_model(path, model):
    io.write_json(path, model.to_dict())


def load_model(path):
    return RegressorModel.from_dict(io.read_json(path))


def init_model(n_features, hidden=(64, 32), seed=0, feature_mean=None, feature_std=None, metric_kind="m_z"):
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    sizes = [n_features, *hidden, 1]
    ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        ws.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    mean = np.zeros(n_features) if feature_mean is None else np.asarray(feature_mean, dtype=float)
    std = np.ones(n_features) if feature_std is None else np.asarray(feature_std, dtype=float)
    return RegressorModel(mean, std, ws, bs, metric_kind)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _forward_cache(model, features):
    x = (np.atleast_2d(features) - model.feature_mean) / model.feature_std
    acts = [x]
    pre = []
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = sigmoid(z) if i == last else np.maximum(z, 0.0)
        acts.append(a)
    return acts, pre


def forward(model, features):
    """Predictions in (0, 1) for a (n, F) feature matrix or a ``FeatureVector``."""
    if hasattr(features, "schema_id"):
        if features.schema_id != model.schema_id:
            raise SchemaMismatch(f"features {features.schema_id} vs model {model.schema_id}")
        features = features.values
    features = np.asarray(features, dtype=float)
    if features.shape[-1] != len(model.feature_mean):
        raise SchemaMismatch(f"expected {len(model.feature_mean)} features, got {features.shape[-1]}")
    acts, _ = _forward_cache(model, features)
    # keep predictions strictly inside (0, 1) even when the sigmoid saturates in float64
    return np.clip(acts[-1][:, 0], _TINY, 1.0 - _EPS)


def loss_and_gradients(model, features, targets, l2=0.0):
    """Mean squared error (plus ``l2/2 * sum(W^2)``) and its gradients by backpropagation.

    Gradients are returned in ``model.params`` order (W1, b1, W2, b2, ...).
    """
    targets = np.asarray(targets, dtype=float).reshape(-1)
    acts, pre = _forward_cache(model, features)
    y = acts[-1][:, 0]
    n = len(targets)
    err = y - targets
    loss = float(np.mean(err ** 2)) + 0.5 * l2 * sum(float(np.sum(w * w)) for w in model.weights)
    delta = (2.0 / n) * err[:, None] * y[:, None] * (1.0 - y[:, None])
    grads = [None] * (2 * len(model.weights))
    for i in range(len(model.weights) - 1, -1, -1):
        grads[2 * i] = delta.T @ acts[i] + l2 * model.weights[i]
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * (pre[i - 1] > 0)
    return loss, grads


def finite_difference_check(model, features, targets, epsilon=1e-5, l2=0.0, gradient_fn=None):
    """Largest relative error between analytic and central-difference gradients.

    ``gradient_fn(model, features, targets, l2) -> (loss, grads)`` defaults to
    ``loss_and_gradients``; pass a different one to check a mutant.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-7, 1e-3]")
    gradient_fn = gradient_fn or loss_and_gradients
    _, grads = gradient_fn(model, features, targets, l2)
    worst = 0.0
    for p, g in zip(model.params, grads):
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for j in range(flat.size):
            old = flat[j]
            flat[j] = old + epsilon
            up, _ = loss_and_gradients(model, features, targets, l2)
            flat[j] = old - epsilon
            down, _ = loss_and_gradients(model, features, targets, l2)
            flat[j] = old
            num = (up - down) / (2 * epsilon)
            scale = max(abs(num), abs(gflat[j]))
            if scale < 1e-8:
                continue
            worst = max(worst, abs(num - gflat[j]) / scale)
    return worst


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, params, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


# --------------------------------------------------------------------------- training / evaluation

class FeatureCache:
    """Features per (poi_id, source, frame_id), computed once."""

    def __init__(self, resolution=64):
        self.resolution = resolution
        self._store = {}

    def get(self, record, view):
        key = (record.poi_id, view.source, view.frame_id)
        f = self._store.get(key)
        if f is None:
            f = extract_features(view.patch, self.resolution).values
            self._store[key] = f
        return f

    def record_matrix(self, record, source):
        return np.stack([self.get(record, v) for v in record.views_of(source)])


@dataclass
class FoldResult:
    fold: int
    model: RegressorModel
    curve: list = field(default_factory=list)
    n_train: int = 0


def _standardisation(mats):
    allf = np.concatenate(mats, axis=0)
    mean = allf.mean(axis=0)
    std = allf.std(axis=0)
    std[std < 1e-8] = 1.0
    return mean, std


def fit(features_per_record, targets, cfg=TrainConfig(), metric_kind="m_z", rng_key=0):
    """Train one model; ``features_per_record[i]`` holds every view's features of record ``i``.

    Returns ``(model, curve)``; the curve holds the MSE on each record's first
    view before training and after every epoch.
    """
    targets = np.asarray(targets, dtype=float)
    mean, std = _standardisation(features_per_record)
    model = init_model(FEATURE_LENGTH if not features_per_record else features_per_record[0].shape[1], cfg.hidden,
                       seed=np.random.SeedSequence([cfg.seed, rng_key]).generate_state(1)[0],
                       feature_mean=mean, feature_std=std, metric_kind=metric_kind)
    rng = np.random.default_rng([cfg.seed, rng_key, 1])
    params = model.params
    opt = Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps) if cfg.optimizer == "adam" \
        else SGD(params, cfg.learning_rate)
    fixed = np.stack([f[0] for f in features_per_record])
    curve = [loss_and_gradients(model, fixed, targets)[0]]
    n = len(targets)
    for epoch in range(cfg.epochs):
        picks = np.stack([f[int(rng.integers(len(f)))] for f in features_per_record])
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_gradients(model, picks[idx], targets[idx], cfg.l2)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss} at epoch {epoch}, batch starting {start}; "
                                    f"max |W| = {max(float(np.abs(w).max()) for w in model.weights):.3g}")
            opt.step(params, grads)
        curve.append(loss_and_gradients(model, fixed, targets)[0])
    return model, curve


def _fit_records(train_recs, source, metric_kind, cfg, cache, comparison_only, fold):
    for r in train_recs:
        vs = r.comparison_views(source) if comparison_only else r.views_of(source)
        if not vs:
            raise NoViews(f"training record {r.poi_id} has no {source} views")
    lo = min(r.labels[metric_kind] for r in train_recs)
    hi = max(r.labels[metric_kind] for r in train_recs)
    if not hi > lo:
        raise DegenerateRange(f"{metric_kind}: constant labels in training split of fold {fold}")
    y = np.array([normalize_value(r.labels[metric_kind], lo, hi) for r in train_recs])
    feats = []
    for r in train_recs:
        vs = r.comparison_views(source) if comparison_only else r.views_of(source)
        feats.append(np.stack([cache.get(r, v) for v in vs]))
    model, curve = fit(feats, y, cfg, metric_kind, rng_key=fold if fold >= 0 else 1_000_003)
    model.label_stats = (lo, hi)
    model.fold = fold
    log.info("fold %d: %d training records, final loss %.5f", fold, len(train_recs), curve[-1])
    return FoldResult(fold, model, curve, len(train_recs))


def train(records, source, metric_kind, folds, cfg=TrainConfig(), cache=None, comparison_only=False):
    """One model per evaluated fold, each trained on the records outside that fold.

    Labels are min-max normalised with the statistics of each training split.
    """
    cache = cache or FeatureCache()
    return [_fit_records([r for r in records if folds.fold_of(r.poi_id) != fold], source, metric_kind, cfg, cache,
                         comparison_only, fold)
            for fold in folds.eval_folds]


def train_final(records, source, metric_kind, cfg=TrainConfig(), cache=None, comparison_only=False):
    """A single model trained on every record (fold -1), for map building."""
    return _fit_records(list(records), source, metric_kind, cfg, cache or FeatureCache(), comparison_only, -1)


def predict_patches(model, patches, resolution=64):
    feats = np.stack([extract_features(p, resolution).values for p in patches])
    return forward(model, feats)


def rmse(pred, target):
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    return float(np.sqrt(np.mean((pred - target) ** 2))) if len(pred) else float("nan")


def evaluate(results, records, source, metric_kind, folds, cache=None, comparison_only=False):
    """Held-out RMSE on normalised labels: per fold, mean over folds, and per terrain tag."""
    cache = cache or FeatureCache()
    by_fold = {res.fold: res.model for res in results}
    rows = []
    for r in records:
        f = folds.fold_of(r.poi_id)
        if f not in by_fold:
            continue
        model = by_fold[f]
        if model.fold != f:
            raise AssertionError("evaluation must use the model that held the record out")
        try:
            view = evaluation_view(r, source, comparison_only)
        except NoViews:
            continue
        lo, hi = model.label_stats
        target = normalize_value(r.labels[metric_kind], lo, hi)
        pred = float(forward(model, cache.get(r, view)[None, :])[0])
        rows.append({"poi_id": r.poi_id, "fold": f, "tag": r.tag, "target": target, "prediction": pred})
    per_fold = {}
    for f in sorted(by_fold):
        sel = [row for row in rows if row["fold"] == f]
        per_fold[f] = rmse([s["prediction"] for s in sel], [s["target"] for s in sel])
    per_tag = {}
    for tag in sorted({row["tag"] for row in rows}):
        sel = [row for row in rows if row["tag"] == tag]
        per_tag[tag] = rmse([s["prediction"] for s in sel], [s["target"] for s in sel])
    finite = [v for v in per_fold.values() if np.isfinite(v)]
    return {
        "source": source,
        "metric_kind": metric_kind,
        "per_fold": per_fold,
        "mean_rmse": float(np.mean(finite)) if finite else float("nan"),
        "per_tag": per_tag,
        "n": len(rows),
        "predictions": rows,
    }
