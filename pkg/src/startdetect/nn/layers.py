"""Layers with exact reverse-mode gradients, NHWC layout, float64.

Every layer caches what its backward pass needs during forward; backward
returns dL/dx and stores parameter gradients in `self.grads`.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    pass


class Layer:
    """Base: parameterless layers only need forward/backward."""

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def param_dict(self) -> dict[str, np.ndarray]:
        return {}

    def grad_dict(self) -> dict[str, np.ndarray]:
        return {}

    def state_dict(self) -> dict[str, np.ndarray]:
        return {}

    def cast(self, dtype) -> None:
        """Convert parameters and running state to the given float dtype."""
        return None


def _same_padding(size: int, kernel: int, stride: int) -> tuple[int, int, int]:
    """(out_size, pad_before, pad_after) for ceil(size/stride) output."""
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return out, total // 2, total - total // 2


class Conv2d(Layer):
    """2D cross-correlation with zero 'same' padding.

    Weights are (kh, kw, c_in, c_out); He-normal initialized (fan-in).
    """

    def __init__(self, in_channels: int, out_channels: int, kernel: int = 3,
                 stride: int = 1, rng: np.random.Generator | None = None):
        if kernel % 2 != 1:
            raise ShapeError(f"kernel must be odd, got {kernel}")
        if stride not in (1, 2):
            raise ShapeError(f"stride must be 1 or 2, got {stride}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        rng = rng or np.random.default_rng(0)
        fan_in = kernel * kernel * in_channels
        self.w = rng.normal(0.0, np.sqrt(2.0 / fan_in),
                            size=(kernel, kernel, in_channels, out_channels))
        self.b = np.zeros(out_channels)
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x, train=False, rng=None):
        if x.ndim != 4 or x.shape[3] != self.in_channels:
            raise ShapeError(
                f"conv2d expects input (N,H,W,{self.in_channels}), got "
                f"{x.shape}")
        n, h, w_in, _ = x.shape
        k, s = self.kernel, self.stride
        h_out, pt, pb = _same_padding(h, k, s)
        w_out, pl, pr = _same_padding(w_in, k, s)
        xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
        # one GEMM per kernel tap over the whole padded tensor; avoids
        # materializing a k*k-times-larger im2col matrix
        y = np.empty((n, h_out, w_out, self.out_channels), dtype=x.dtype)
        y[...] = self.b
        flat = xp.reshape(-1, self.in_channels)
        hp, wp = xp.shape[1], xp.shape[2]
        for i in range(k):
            for j in range(k):
                z = (flat @ self.w[i, j].astype(x.dtype, copy=False)
                     ).reshape(n, hp, wp, self.out_channels)
                y += z[:, i:i + s * h_out:s, j:j + s * w_out:s, :]
        self._cache = (xp, x.shape, (pt, pl), (h_out, w_out))
        return y

    def backward(self, dout):
        xp, x_shape, (pt, pl), (h_out, w_out) = self._cache
        n, h, w_in, c_in = x_shape
        k, s = self.kernel, self.stride
        dy2 = dout.reshape(n * h_out * w_out, self.out_channels)
        dw = np.empty_like(self.w)
        dxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                xs = xp[:, i:i + s * h_out:s, j:j + s * w_out:s, :]
                dw[i, j] = np.tensordot(xs, dout,
                                        axes=([0, 1, 2], [0, 1, 2]))
                u = (dy2 @ self.w[i, j].T.astype(dout.dtype, copy=False)
                     ).reshape(n, h_out, w_out, c_in)
                dxp[:, i:i + s * h_out:s, j:j + s * w_out:s, :] += u
        self.grads = {"w": dw, "b": dy2.sum(axis=0)}
        return dxp[:, pt:pt + h, pl:pl + w_in, :]

    def param_dict(self):
        return {"w": self.w, "b": self.b}

    def grad_dict(self):
        return self.grads

    def cast(self, dtype):
        self.w = self.w.astype(dtype)
        self.b = self.b.astype(dtype)


class BatchNorm(Layer):
    """Per-channel batch normalization over (N, H, W).

    Train mode normalizes by mini-batch statistics and updates running
    statistics with the given momentum; infer mode uses the running
    statistics.
    """

    def __init__(self, channels: int, momentum: float = 0.99,
                 eps: float = 1e-5):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(channels)
        self.beta = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x, train=False, rng=None):
        if x.shape[-1] != self.channels:
            raise ShapeError(
                f"batchnorm expects {self.channels} channels, got {x.shape}")
        axes = tuple(range(x.ndim - 1))
        if train:
            if x.shape[0] < 2:
                raise ShapeError(
                    "batchnorm train mode requires batch size >= 2")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean[...] = (self.momentum * self.running_mean
                                      + (1 - self.momentum) * mean)
            self.running_var[...] = (self.momentum * self.running_var
                                     + (1 - self.momentum) * var)
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, axes, train)
        return xhat * self.gamma + self.beta

    def backward(self, dout):
        xhat, inv_std, axes, train = self._cache
        self.grads = {
            "gamma": (dout * xhat).sum(axis=axes),
            "beta": dout.sum(axis=axes),
        }
        if not train:
            return dout * self.gamma * inv_std
        m = np.prod([dout.shape[a] for a in axes])
        dxhat = dout * self.gamma
        return (inv_std / m) * (
            m * dxhat - dxhat.sum(axis=axes)
            - xhat * (dxhat * xhat).sum(axis=axes))

    def param_dict(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grad_dict(self):
        return self.grads

    def state_dict(self):
        return {"running_mean": self.running_mean,
                "running_var": self.running_var}

    def cast(self, dtype):
        self.gamma = self.gamma.astype(dtype)
        self.beta = self.beta.astype(dtype)
        self.running_mean = self.running_mean.astype(dtype)
        self.running_var = self.running_var.astype(dtype)


class Relu(Layer):
    def forward(self, x, train=False, rng=None):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout):
        return dout * self._mask


class SpatialDropout(Layer):
    """Dropout of whole feature maps: one Bernoulli draw per (sample, channel).

    Inverted scaling: survivors are multiplied by 1/keep_prob at train time,
    so inference is the identity.
    """

    def __init__(self, keep_prob: float):
        if not 0.0 < keep_prob <= 1.0:
            raise ShapeError(f"keep_prob must be in (0, 1], got {keep_prob}")
        self.keep_prob = keep_prob
        self._mask = None

    def forward(self, x, train=False, rng=None):
        if not train or self.keep_prob == 1.0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("spatial dropout in train mode needs an rng")
        shape = (x.shape[0],) + (1,) * (x.ndim - 2) + (x.shape[-1],)
        keep = rng.random(shape) < self.keep_prob
        self._mask = keep.astype(x.dtype) / self.keep_prob
        return x * self._mask

    def backward(self, dout):
        if self._mask is None:
            return dout
        return dout * self._mask


class Dense(Layer):
    """Fully connected layer on the flattened input."""

    def __init__(self, in_features: int, units: int,
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.in_features = in_features
        self.units = units
        self.w = rng.normal(0.0, np.sqrt(2.0 / in_features),
                            size=(in_features, units))
        self.b = np.zeros(units)
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x, train=False, rng=None):
        xf = x.reshape(x.shape[0], -1)
        if xf.shape[1] != self.in_features:
            raise ShapeError(
                f"dense expects {self.in_features} inputs, got {xf.shape[1]} "
                f"(input shape {x.shape})")
        self._cache = (xf, x.shape)
        return xf @ self.w + self.b

    def backward(self, dout):
        xf, x_shape = self._cache
        self.grads = {"w": xf.T @ dout, "b": dout.sum(axis=0)}
        return (dout @ self.w.T).reshape(x_shape)

    def param_dict(self):
        return {"w": self.w, "b": self.b}

    def grad_dict(self):
        return self.grads

    def cast(self, dtype):
        self.w = self.w.astype(dtype)
        self.b = self.b.astype(dtype)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
