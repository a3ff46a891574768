"""Residual-network classifier: architecture, training, scene inference.

Two fixed architectures are provided:

* small - stem conv (8 filters), one array of two residual units (8
  filters), one array of one downsampling unit (16 filters), dense head;
  8 weight layers in total.
* large - stem conv (16 filters), three arrays of two residual units
  (16/32/64 filters, downsampling on the second and third), dense head;
  14 weight layers.

Inputs are causal windows of the feature matrix, laid out (N, time,
feature, 1). Training minimizes class-weighted cross-entropy with Adam and
is deterministic given its seed.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .features import FeatureMatrix
from .nn import (Adam, Conv2d, Dense, ResidualUnit, Sequential, checkpoint,
                 softmax, weight_layer_count, weighted_cross_entropy_logits)

N_CLASSES = 3


class ModelError(ValueError):
    pass


@dataclass
class ArraySpec:
    n_units: int
    filters: int
    downsample: bool = False


@dataclass
class NetworkSpec:
    variant: str
    input_window: int
    n_features: int
    stem_filters: int
    arrays: list[ArraySpec]
    keep_prob: float = 0.6
    n_classes: int = N_CLASSES

    @classmethod
    def small(cls, input_window: int, n_features: int,
              keep_prob: float = 0.6) -> "NetworkSpec":
        return cls(variant="small", input_window=input_window,
                   n_features=n_features, stem_filters=8,
                   arrays=[ArraySpec(2, 8), ArraySpec(1, 16, downsample=True)],
                   keep_prob=keep_prob)

    @classmethod
    def large(cls, input_window: int, n_features: int,
              keep_prob: float = 0.6) -> "NetworkSpec":
        return cls(variant="large", input_window=input_window,
                   n_features=n_features, stem_filters=16,
                   arrays=[ArraySpec(2, 16), ArraySpec(2, 32, downsample=True),
                           ArraySpec(2, 64, downsample=True)],
                   keep_prob=keep_prob)

    @classmethod
    def of(cls, variant: str, input_window: int, n_features: int,
           keep_prob: float = 0.6) -> "NetworkSpec":
        if variant == "small":
            return cls.small(input_window, n_features, keep_prob)
        if variant == "large":
            return cls.large(input_window, n_features, keep_prob)
        raise ModelError(f"unknown variant {variant!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkSpec":
        doc = dict(doc)
        doc["arrays"] = [ArraySpec(**a) for a in doc["arrays"]]
        return cls(**doc)


def _ceil_half(v: int) -> int:
    return -(-v // 2)


class StartNet:
    """Built network plus the metadata inference needs.

    `feature_columns`, `feature_mean`, `feature_std` and `class_weights`
    are attached by `train`; a freshly built net carries identity
    normalization.
    """

    def __init__(self, spec: NetworkSpec, seed: int = 0):
        n_down = sum(a.downsample for a in spec.arrays)
        min_window = 2 ** n_down
        if spec.input_window < min_window:
            raise ModelError(
                f"input window {spec.input_window} too small for "
                f"{n_down} halvings; minimum is {min_window}")
        rng = np.random.default_rng(seed)
        layers = [Conv2d(1, spec.stem_filters, kernel=3, stride=1, rng=rng)]
        h, w = spec.input_window, spec.n_features
        channels = spec.stem_filters
        for arr in spec.arrays:
            for u in range(arr.n_units):
                stride = 2 if (arr.downsample and u == 0) else 1
                layers.append(ResidualUnit(channels, arr.filters, stride,
                                           spec.keep_prob, rng))
                channels = arr.filters
                if stride == 2:
                    h, w = _ceil_half(h), _ceil_half(w)
        self.feature_shape = (h, w, channels)
        layers.append(Dense(h * w * channels, spec.n_classes, rng=rng))
        self.net = Sequential(layers)
        self.spec = spec
        self.seed = seed
        self.feature_columns: list[str] = []
        self.feature_mean = np.zeros(spec.n_features)
        self.feature_std = np.ones(spec.n_features)
        self.class_weights = np.ones(spec.n_classes)
        self.config_digest = ""

    # -- forward / backward -------------------------------------------------

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        """Logits for a batch of windows (N, window, n_features, 1)."""
        expected = (self.spec.input_window, self.spec.n_features, 1)
        if x.shape[1:] != expected:
            raise ModelError(
                f"expected input (N, {expected[0]}, {expected[1]}, 1), got "
                f"{x.shape}")
        return self.net.forward(x, train=train, rng=rng)

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        return self.net.backward(dlogits)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.forward(x, train=False))

    def cast(self, dtype) -> "StartNet":
        """Convert parameters/state to `dtype` (e.g. for faster inference)."""
        self.net.cast(np.dtype(dtype))
        return self

    @property
    def param_dtype(self) -> np.dtype:
        return next(iter(self.param_dict().values())).dtype

    @property
    def weight_layers(self) -> int:
        return weight_layer_count(self.net)

    def conv_filter_sequence(self) -> list[int]:
        """Output-channel count of each non-shortcut conv, in order."""
        out = []
        for layer in self.net.layers:
            if isinstance(layer, Conv2d):
                out.append(layer.out_channels)
            elif isinstance(layer, ResidualUnit):
                out.extend(sub.out_channels for sub in layer.branch.layers
                           if isinstance(sub, Conv2d))
        return out

    def param_dict(self):
        return self.net.param_dict()

    def grad_dict(self):
        return self.net.grad_dict()

    def state_dict(self):
        return self.net.state_dict()

    # -- checkpointing -------------------------------------------------------

    def _array_manifest(self, optimizer: Adam | None) -> list:
        arrays = list(self.param_dict().items())
        arrays += list(self.state_dict().items())
        arrays += [("feature_mean", self.feature_mean),
                   ("feature_std", self.feature_std),
                   ("class_weights", self.class_weights)]
        if optimizer is not None:
            arrays += optimizer.state_arrays()
        return arrays

    def save(self, path, optimizer: Adam | None = None) -> None:
        arch = {"spec": self.spec.to_dict(),
                "feature_columns": self.feature_columns,
                "config_digest": self.config_digest}
        checkpoint.save(path, arch, self._array_manifest(optimizer),
                        self.seed)

    def dump_bytes(self, optimizer: Adam | None = None) -> bytes:
        arch = {"spec": self.spec.to_dict(),
                "feature_columns": self.feature_columns,
                "config_digest": self.config_digest}
        return checkpoint.dump_bytes(arch, self._array_manifest(optimizer),
                                     self.seed)

    @classmethod
    def load(cls, path) -> "StartNet":
        arch, arrays, seed = checkpoint.load(path)
        return cls._restore(arch, arrays, seed)

    @classmethod
    def load_bytes(cls, blob: bytes) -> "StartNet":
        arch, arrays, seed = checkpoint.load_bytes(blob)
        return cls._restore(arch, arrays, seed)

    @classmethod
    def _restore(cls, arch, arrays, seed) -> "StartNet":
        net = cls(NetworkSpec.from_dict(arch["spec"]), seed=seed)
        net.feature_columns = list(arch["feature_columns"])
        net.config_digest = arch.get("config_digest", "")
        targets = dict(net.param_dict())
        targets.update(net.state_dict())
        for name, arr in arrays.items():
            if name.startswith("adam."):
                continue
            if name in ("feature_mean", "feature_std", "class_weights"):
                setattr(net, name, arr)
                continue
            if name not in targets:
                raise checkpoint.CheckpointError(
                    f"checkpoint array {name!r} has no target")
            targets[name][...] = arr
        return net


def build(spec: NetworkSpec, seed: int = 0) -> StartNet:
    return StartNet(spec, seed=seed)


# -- training ------------------------------------------------------------------


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    lr_decay: float = 1.0             # per-epoch multiplicative decay
    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 10
    max_windows_per_class: int = 2000
    max_val_windows: int = 3000
    use_class_weights: bool = True
    # "float32" trains in single precision (several times faster on one
    # core); checkpoints are always written back in double precision
    dtype: str = "float64"

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


def _window_index(scene_lengths: list[int], window: int) -> np.ndarray:
    """(scene, t) pairs for every causal window that fits."""
    pairs = []
    for si, n in enumerate(scene_lengths):
        if n >= window:
            ts = np.arange(window - 1, n)
            pairs.append(np.column_stack([np.full(len(ts), si), ts]))
    if not pairs:
        raise ModelError("no scene long enough for the input window")
    return np.concatenate(pairs)


def _gather_windows(arrays: list[np.ndarray], pairs: np.ndarray,
                    window: int, dtype=np.float64) -> np.ndarray:
    out = np.empty((len(pairs), window, arrays[0].shape[1], 1), dtype=dtype)
    for i, (si, t) in enumerate(pairs):
        out[i, :, :, 0] = arrays[si][t - window + 1:t + 1]
    return out


def _macro_f1(pred: np.ndarray, true: np.ndarray, n_classes: int) -> float:
    f1s = []
    for c in range(n_classes):
        tp = np.sum((pred == c) & (true == c))
        fp = np.sum((pred == c) & (true != c))
        fn = np.sum((pred != c) & (true == c))
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(f1s))


def train(spec: NetworkSpec,
          train_data: list[tuple[FeatureMatrix, np.ndarray]],
          val_data: list[tuple[FeatureMatrix, np.ndarray]],
          config: TrainConfig | None = None,
          seed: int = 0) -> tuple[StartNet, list[dict]]:
    """Train a network; returns the best-validation checkpointed net + log.

    `train_data` / `val_data` are per-scene (features, per-step labels).
    Deterministic given (spec, data, config, seed).
    """
    config = config or TrainConfig()
    if not train_data:
        raise ModelError("empty training fold")
    if not val_data:
        raise ModelError("empty validation fold")
    columns = train_data[0][0].names
    for fm, _ in train_data + val_data:
        if fm.names != columns:
            raise ModelError("inconsistent feature columns across scenes")
    if len(columns) != spec.n_features:
        raise ModelError(
            f"spec expects {spec.n_features} features, data has "
            f"{len(columns)}")

    if config.dtype not in ("float64", "float32"):
        raise ModelError(f"unsupported training dtype {config.dtype!r}")
    dtype = np.dtype(config.dtype)

    rng = np.random.default_rng(seed)
    net = StartNet(spec, seed=seed)
    net.feature_columns = list(columns)
    net.config_digest = config.digest()
    net.net.cast(dtype)

    all_rows = np.vstack([fm.values for fm, _ in train_data])
    net.feature_mean = all_rows.mean(axis=0)
    std = all_rows.std(axis=0)
    net.feature_std = np.where(std > 0, std, 1.0)

    tr_arrays = [(fm.values - net.feature_mean) / net.feature_std
                 for fm, _ in train_data]
    va_arrays = [(fm.values - net.feature_mean) / net.feature_std
                 for fm, _ in val_data]
    tr_labels = [np.asarray(lab) for _, lab in train_data]
    va_labels = [np.asarray(lab) for _, lab in val_data]

    window = spec.input_window
    tr_pairs = _window_index([len(a) for a in tr_arrays], window)
    tr_y = np.array([tr_labels[si][t] for si, t in tr_pairs])

    # per-class cap on training windows to bound epoch cost
    keep_idx = []
    for c in range(spec.n_classes):
        idx_c = np.flatnonzero(tr_y == c)
        if len(idx_c) > config.max_windows_per_class:
            idx_c = rng.choice(idx_c, config.max_windows_per_class,
                               replace=False)
        keep_idx.append(idx_c)
    keep_idx = np.sort(np.concatenate(keep_idx))
    tr_pairs, tr_y = tr_pairs[keep_idx], tr_y[keep_idx]

    # inverse-frequency class weights from the windows actually trained on
    # (after the cap), mean 1 over present classes
    counts = np.bincount(tr_y, minlength=spec.n_classes).astype(float)
    if config.use_class_weights:
        inv = np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 0.0)
        weights = inv / inv[counts > 0].mean() if np.any(counts > 0) else inv
        net.class_weights = weights
    else:
        net.class_weights = np.ones(spec.n_classes)

    va_pairs = _window_index([len(a) for a in va_arrays], window)
    va_y = np.array([va_labels[si][t] for si, t in va_pairs])
    if len(va_pairs) > config.max_val_windows:
        vi = np.sort(rng.choice(len(va_pairs), config.max_val_windows,
                                replace=False))
        va_pairs, va_y = va_pairs[vi], va_y[vi]
    va_x = _gather_windows(va_arrays, va_pairs, window, dtype)

    optimizer = Adam(net.param_dict(), lr=config.learning_rate)
    log: list[dict] = []
    best_f1 = -1.0
    best_params = None
    best_state = None
    since_best = 0

    for epoch in range(config.max_epochs):
        optimizer.lr = config.learning_rate * config.lr_decay ** epoch
        order = rng.permutation(len(tr_pairs))
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            if len(batch) < 2:  # batch norm needs >= 2 samples
                continue
            x = _gather_windows(tr_arrays, tr_pairs[batch], window, dtype)
            logits = net.forward(x, train=True, rng=rng)
            loss, dlogits = weighted_cross_entropy_logits(
                logits, tr_y[batch], net.class_weights)
            net.backward(dlogits.astype(dtype, copy=False))
            optimizer.step(net.grad_dict())
            losses.append(loss)

        val_pred = np.empty(len(va_x), dtype=int)
        for start in range(0, len(va_x), 512):
            val_pred[start:start + 512] = np.argmax(
                net.forward(va_x[start:start + 512], train=False), axis=1)
        val_f1 = _macro_f1(val_pred, va_y, spec.n_classes)
        log.append({"epoch": epoch, "train_loss": float(np.mean(losses)),
                    "val_f1": val_f1})

        if val_f1 > best_f1:
            best_f1 = val_f1
            best_params = {k: v.copy() for k, v in net.param_dict().items()}
            best_state = {k: v.copy() for k, v in net.state_dict().items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break

    if best_params is not None:
        for k, v in net.param_dict().items():
            v[...] = best_params[k]
        for k, v in net.state_dict().items():
            v[...] = best_state[k]
    net.net.cast(np.float64)
    return net, log


def predict_scene(net: StartNet, features: FeatureMatrix,
                  batch_size: int = 512,
                  early_stop=None) -> np.ndarray:
    """Per-time-step class probabilities (T, 3) for one scene.

    Steps earlier than input_window - 1 emit the waiting prior (1, 0, 0).

    `early_stop`, if given, is called with the probabilities computed so
    far after each batch; a truthy return stops inference. Remaining steps
    keep the waiting prior, so use it only when downstream consumers (such
    as a first-crossing detector) are insensitive to the tail.
    """
    if features.names != net.feature_columns:
        missing = sorted(set(net.feature_columns) - set(features.names))
        extra = sorted(set(features.names) - set(net.feature_columns))
        raise ModelError(
            f"feature columns do not match checkpoint "
            f"(missing: {missing}, extra: {extra})")
    window = net.spec.input_window
    values = (features.values - net.feature_mean) / net.feature_std
    n = len(values)
    probs = np.zeros((n, net.spec.n_classes))
    probs[:, 0] = 1.0
    if n < window:
        return probs
    views = sliding_window_view(values, window, axis=0)  # (n-w+1, F, w)
    windows = np.ascontiguousarray(
        views.transpose(0, 2, 1)).astype(
        net.param_dtype, copy=False)[..., None]  # (n-w+1, w, F, 1)
    for start in range(0, len(windows), batch_size):
        chunk = windows[start:start + batch_size]
        probs[window - 1 + start:window - 1 + start + len(chunk)] = \
            net.predict_proba(chunk)
        if early_stop is not None and \
                early_stop(probs[:window - 1 + start + len(chunk)]):
            break
    return probs
