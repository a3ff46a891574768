"""Class-weighted cross-entropy, from logits (stable) or from probabilities."""

from __future__ import annotations

import numpy as np

PROB_CLAMP = 1e-12

# counts clamped-probability events across calls; exposed for diagnostics
clamp_warnings = 0


def weighted_cross_entropy_logits(
        logits: np.ndarray, labels: np.ndarray,
        class_weights: np.ndarray) -> tuple[float, np.ndarray]:
    """Weighted cross-entropy via log-softmax; returns (loss, dloss/dlogits).

    loss = -(1/N) sum_i w_{y_i} log p_{i, y_i}.
    """
    labels = np.asarray(labels)
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsumexp
    w = np.asarray(class_weights, dtype=float)[labels]
    loss = -float(np.sum(w * logp[np.arange(n), labels])) / n
    p = np.exp(logp)
    dlogits = p * w[:, None]
    dlogits[np.arange(n), labels] -= w
    return loss, dlogits / n


def weighted_cross_entropy(probs: np.ndarray, labels: np.ndarray,
                           class_weights: np.ndarray) -> float:
    """Weighted cross-entropy on already-softmaxed probabilities.

    Rows must sum to 1 within 1e-6. Zero probability at the true label is
    clamped at 1e-12 and counted in `clamp_warnings`.
    """
    global clamp_warnings
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels)
    sums = probs.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        i = int(np.argmax(np.abs(sums - 1.0)))
        raise ValueError(f"probability row {i} sums to {sums[i]}, not 1")
    n = probs.shape[0]
    p_true = probs[np.arange(n), labels]
    n_clamped = int(np.sum(p_true < PROB_CLAMP))
    if n_clamped:
        clamp_warnings += n_clamped
        p_true = np.maximum(p_true, PROB_CLAMP)
    w = np.asarray(class_weights, dtype=float)[labels]
    return -float(np.sum(w * np.log(p_true))) / n
