"""Filter-style feature selection ensemble.

Four complementary selectors each rank the columns of a feature matrix
against per-time-step class labels and keep their top k (default 10):

* MIFS   - greedy mutual information with a beta-weighted redundancy term,
* mRMR   - greedy mutual information with mean-redundancy penalty,
* elastic net - multinomial logistic regression with L1+L2 penalty, ranked
  by absolute weight,
* gradient-boosted trees - shallow regression trees on softmax residuals,
  ranked by accumulated split gain.

The de-duplicated union of the four lists is the feature set handed to the
classifier. Selection is recomputed per cross-validation fold on training
rows only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import FeatureMatrix


class SelectionError(ValueError):
    pass


@dataclass
class SelectionConfig:
    k: int = 10
    mi_bins: int = 16
    mifs_beta: float = 0.5
    enet_alpha: float = 0.01
    enet_l1_ratio: float = 0.5
    enet_max_iter: int = 4000
    enet_tol: float = 1e-6
    gbt_trees: int = 50
    gbt_depth: int = 2
    gbt_learning_rate: float = 0.1
    gbt_bins: int = 32
    max_rows: int = 20000


@dataclass
class SelectionReport:
    per_selector: dict[str, list[tuple[str, float]]]
    union: list[str]
    fold_id: int = 0

    def to_json(self) -> str:
        doc = {"fold_id": self.fold_id,
               "per_selector": {name: [[col, score] for col, score in lst]
                                for name, lst in self.per_selector.items()},
               "union": self.union}
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "SelectionReport":
        doc = json.loads(Path(path).read_text())
        return cls(per_selector={name: [(col, float(score))
                                        for col, score in lst]
                                 for name, lst in doc["per_selector"].items()},
                   union=list(doc["union"]),
                   fold_id=int(doc["fold_id"]))


# -- mutual information -----------------------------------------------------

def equal_frequency_codes(x: np.ndarray, bins: int) -> np.ndarray:
    """Quantile-bin a column; identical values always share a bin."""
    edges = np.quantile(x, np.linspace(0.0, 1.0, bins + 1)[1:-1])
    return np.searchsorted(edges, x, side="right")


def _discrete_mi(cx: np.ndarray, cy: np.ndarray,
                 nx: int, ny: int) -> float:
    """Plug-in MI (nats) of two discrete code vectors."""
    n = len(cx)
    joint = np.bincount(cx * ny + cy, minlength=nx * ny).reshape(nx, ny)
    p = joint / n
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    mi = float(np.sum(p[nz] * np.log(p[nz] / (px @ py)[nz])))
    return max(mi, 0.0)


def mutual_information(x: np.ndarray, y: np.ndarray, bins: int = 16) -> float:
    """MI between a numeric column and class labels, in nats.

    The column is discretized into equal-frequency bins; MI is the plug-in
    estimate on the discrete joint. A constant column yields 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if not np.all(np.isfinite(x)):
        raise SelectionError("column contains NaN/Inf")
    classes, cy = np.unique(y, return_inverse=True)
    if len(classes) < 2:
        raise SelectionError("need at least 2 classes for MI")
    cx = equal_frequency_codes(x, bins)
    return _discrete_mi(cx, cy, bins, len(classes))


# -- greedy MI selectors -----------------------------------------------------

def _greedy_mi_select(features: FeatureMatrix, labels: np.ndarray, k: int,
                      bins: int, redundancy) -> list[tuple[str, float]]:
    """Greedy forward selection maximizing MI(f; y) - redundancy penalty.

    `redundancy(red_sum, n_selected)` maps the accumulated sum of pairwise
    MI against the selected set to the penalty value.
    """
    names = features.names
    n_cols = len(names)
    k = min(k, n_cols)
    classes, cy = np.unique(labels, return_inverse=True)
    if len(classes) < 2:
        raise SelectionError("need at least 2 classes")
    codes = np.stack([equal_frequency_codes(features.values[:, j], bins)
                      for j in range(n_cols)], axis=1)
    relevance = np.array([_discrete_mi(codes[:, j], cy, bins, len(classes))
                          for j in range(n_cols)])

    selected: list[tuple[str, float]] = []
    remaining = set(range(n_cols))
    red_sum = np.zeros(n_cols)
    while len(selected) < k:
        n_sel = len(selected)
        best = min(remaining,
                   key=lambda j: (-(relevance[j]
                                    - redundancy(red_sum[j], n_sel)),
                                  names[j]))
        score = relevance[best] - redundancy(red_sum[best], n_sel)
        selected.append((names[best], float(score)))
        remaining.discard(best)
        for j in remaining:
            red_sum[j] += _discrete_mi(codes[:, j], codes[:, best],
                                       bins, bins)
    return selected


def select_mifs(features: FeatureMatrix, labels: np.ndarray, k: int = 10,
                beta: float = 0.5, bins: int = 16) -> list[tuple[str, float]]:
    """MIFS: greedy argmax of MI(f; y) - beta * sum_s MI(f; s)."""
    return _greedy_mi_select(features, labels, k, bins,
                             lambda red, n: beta * red)


def select_mrmr(features: FeatureMatrix, labels: np.ndarray, k: int = 10,
                bins: int = 16) -> list[tuple[str, float]]:
    """mRMR: greedy argmax of MI(f; y) - mean_s MI(f; s)."""
    return _greedy_mi_select(features, labels, k, bins,
                             lambda red, n: red / n if n else 0.0)


# -- elastic-net logistic regression ------------------------------------------

def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _spectral_norm_sq(x: np.ndarray, iters: int = 60) -> float:
    v = np.ones(x.shape[1]) / np.sqrt(x.shape[1])
    for _ in range(iters):
        u = x @ v
        v = x.T @ u
        nv = np.linalg.norm(v)
        if nv == 0:
            return 0.0
        v /= nv
    return float(np.linalg.norm(x @ v) ** 2)


def select_elasticnet(features: FeatureMatrix, labels: np.ndarray,
                      k: int = 10, alpha: float = 0.01,
                      l1_ratio: float = 0.5, max_iter: int = 4000,
                      tol: float = 1e-6) -> list[tuple[str, float]]:
    """Rank columns by weight magnitude of an elastic-net multinomial fit.

    Columns are standardized internally; the intercept is unpenalized.
    Optimized by FISTA (proximal gradient with momentum and adaptive
    restart) to relative-objective tolerance `tol`.
    """
    x = features.values
    names = features.names
    classes, cy = np.unique(labels, return_inverse=True)
    if len(classes) < 2:
        raise SelectionError("need at least 2 classes")
    n, d = x.shape
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd_safe = np.where(sd > 0, sd, 1.0)
    xs = (x - mu) / sd_safe
    xb = np.hstack([xs, np.ones((n, 1))])  # intercept column last
    y1h = np.eye(len(classes))[cy]

    lam1 = alpha * l1_ratio
    lam2 = alpha * (1.0 - l1_ratio)
    lips = 0.5 * _spectral_norm_sq(xb) / n + lam2
    step = 1.0 / lips

    def objective(w):
        z = xb @ w
        z = z - z.max(axis=1, keepdims=True)
        nll = -np.mean(np.sum(y1h * (z - np.log(np.sum(np.exp(z), axis=1,
                                                       keepdims=True))),
                              axis=1))
        return (nll + lam1 * np.abs(w[:-1]).sum()
                + 0.5 * lam2 * np.sum(w[:-1] ** 2))

    w = np.zeros((d + 1, len(classes)))
    zv = w.copy()
    tm = 1.0
    obj = objective(w)
    converged = False
    for _ in range(max_iter):
        p = _softmax(xb @ zv)
        grad = xb.T @ (p - y1h) / n
        grad[:-1] += lam2 * zv[:-1]
        w_new = zv - step * grad
        w_new[:-1] = np.sign(w_new[:-1]) * np.maximum(
            np.abs(w_new[:-1]) - step * lam1, 0.0)
        obj_new = objective(w_new)
        if obj_new > obj:  # adaptive restart: drop momentum
            tm = 1.0
            zv = w.copy()
            obj_prev = obj
        else:
            tm_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tm * tm))
            zv = w_new + (tm - 1.0) / tm_new * (w_new - w)
            tm = tm_new
            obj_prev, obj, w = obj, obj_new, w_new
            if abs(obj_prev - obj) / max(1.0, abs(obj)) < tol:
                converged = True
                break
    if not converged:
        raise SelectionError(
            f"elastic net did not converge within {max_iter} iterations "
            f"(last objective change "
            f"{abs(obj_prev - obj) / max(1.0, abs(obj)):.3e})")

    importance = np.abs(w[:-1]).max(axis=1)
    order = sorted(range(d), key=lambda j: (-importance[j], names[j]))
    return [(names[j], float(importance[j])) for j in order[:min(k, d)]]


# -- gradient-boosted trees ----------------------------------------------------

def _hist_sums(codes: np.ndarray, weights: np.ndarray, bins: int) -> np.ndarray:
    """Per-feature, per-bin sums of `weights`; codes is (rows, features)."""
    rows, n_feat = codes.shape
    flat = codes + np.arange(n_feat) * bins
    return np.bincount(flat.ravel(),
                       weights=np.repeat(weights, n_feat),
                       minlength=n_feat * bins).reshape(n_feat, bins)


def select_gbt(features: FeatureMatrix, labels: np.ndarray, k: int = 10,
               n_trees: int = 50, depth: int = 2,
               learning_rate: float = 0.1, bins: int = 32,
               seed: int = 0) -> list[tuple[str, float]]:
    """Rank columns by total split gain of boosted shallow regression trees.

    One tree per class per round is fit to the softmax residuals, with
    histogram split finding over equal-frequency bins, L2 leaf penalty 1.
    Deterministic given inputs (no row or column subsampling).
    """
    if n_trees < 1:
        raise SelectionError("no trees fitted (n_trees must be >= 1)")
    x = features.values
    names = features.names
    classes, cy = np.unique(labels, return_inverse=True)
    if len(classes) < 2:
        raise SelectionError("need at least 2 classes")
    n, d = x.shape
    n_classes = len(classes)
    codes = np.stack([equal_frequency_codes(x[:, j], bins)
                      for j in range(d)], axis=1).astype(np.int64)
    y1h = np.eye(n_classes)[cy]
    lam = 1.0
    logits = np.zeros((n, n_classes))
    gain_total = np.zeros(d)

    def best_split(idx, g, h):
        """Return (gain, feature, bin_threshold) or None."""
        hg = _hist_sums(codes[idx], g[idx], bins)
        hh = _hist_sums(codes[idx], h[idx], bins)
        gl = np.cumsum(hg, axis=1)[:, :-1]
        hl = np.cumsum(hh, axis=1)[:, :-1]
        gt, ht = hg.sum(axis=1, keepdims=True), hh.sum(axis=1, keepdims=True)
        gr, hr = gt - gl, ht - hl
        gain = 0.5 * (gl ** 2 / (hl + lam) + gr ** 2 / (hr + lam)
                      - gt ** 2 / (ht + lam))
        valid = (hl > 0) & (hr > 0)
        gain = np.where(valid, gain, -np.inf)
        j, b = np.unravel_index(np.argmax(gain), gain.shape)
        if not np.isfinite(gain[j, b]) or gain[j, b] <= 1e-12:
            return None
        return float(gain[j, b]), int(j), int(b)

    def grow(idx, g, h, level, output):
        split = best_split(idx, g, h) if level < depth else None
        if split is None:
            gs, hs = g[idx].sum(), h[idx].sum()
            output[idx] += -learning_rate * gs / (hs + lam)
            return
        gain, j, b = split
        gain_total[j] += gain
        left = idx[codes[idx, j] <= b]
        right = idx[codes[idx, j] > b]
        grow(left, g, h, level + 1, output)
        grow(right, g, h, level + 1, output)

    all_idx = np.arange(n)
    for _ in range(n_trees):
        p = _softmax(logits)
        for c in range(n_classes):
            g = p[:, c] - y1h[:, c]
            h = p[:, c] * (1.0 - p[:, c]) + 1e-12
            update = np.zeros(n)
            grow(all_idx, g, h, 0, update)
            logits[:, c] += update

    order = sorted(range(d), key=lambda j: (-gain_total[j], names[j]))
    return [(names[j], float(gain_total[j])) for j in order[:min(k, d)]]


# -- ensemble ------------------------------------------------------------------

def union_select(per_selector: dict[str, list[tuple[str, float]]],
                 fold_id: int = 0) -> SelectionReport:
    """Order-stable de-duplicated union of the per-selector rankings."""
    if not per_selector:
        raise SelectionError("need at least one selector report")
    union: list[str] = []
    seen: set[str] = set()
    for ranking in per_selector.values():
        for col, _score in ranking:
            if col not in seen:
                seen.add(col)
                union.append(col)
    return SelectionReport(per_selector=per_selector, union=union,
                           fold_id=fold_id)


def run_selection(features: FeatureMatrix, labels: np.ndarray,
                  config: SelectionConfig | None = None, fold_id: int = 0,
                  seed: int = 0) -> SelectionReport:
    """Run all four selectors and build their union report.

    Rows are deterministically subsampled to `config.max_rows` before
    selection to bound runtime.
    """
    config = config or SelectionConfig()
    labels = np.asarray(labels)
    if len(labels) != len(features):
        raise SelectionError("labels/features row mismatch")
    if len(features) > config.max_rows:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(len(features), config.max_rows,
                                 replace=False))
        features = FeatureMatrix(columns=features.columns,
                                 values=features.values[idx])
        labels = labels[idx]
    per_selector = {
        "mifs": select_mifs(features, labels, k=config.k,
                            beta=config.mifs_beta, bins=config.mi_bins),
        "mrmr": select_mrmr(features, labels, k=config.k,
                            bins=config.mi_bins),
        "elasticnet": select_elasticnet(
            features, labels, k=config.k, alpha=config.enet_alpha,
            l1_ratio=config.enet_l1_ratio, max_iter=config.enet_max_iter,
            tol=config.enet_tol),
        "gbt": select_gbt(features, labels, k=config.k,
                          n_trees=config.gbt_trees, depth=config.gbt_depth,
                          learning_rate=config.gbt_learning_rate,
                          bins=config.gbt_bins, seed=seed),
    }
    return union_select(per_selector, fold_id=fold_id)
