"""Layer composition: sequential stacks and residual units.

A residual unit computes H(x) = F(x) + shortcut(x), where F is two blocks
of [batch norm -> ReLU -> spatial dropout -> conv] and the shortcut is the
identity, or a strided 1x1 projection conv when the shapes differ.
"""

from __future__ import annotations

import numpy as np

from .layers import BatchNorm, Conv2d, Dense, Layer, Relu, SpatialDropout


class Sequential(Layer):
    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def forward(self, x, train=False, rng=None):
        for layer in self.layers:
            x = layer.forward(x, train=train, rng=rng)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def param_dict(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.param_dict().items():
                out[f"{i}.{name}"] = arr
        return out

    def grad_dict(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.grad_dict().items():
                out[f"{i}.{name}"] = arr
        return out

    def state_dict(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.state_dict().items():
                out[f"{i}.{name}"] = arr
        return out

    def cast(self, dtype):
        for layer in self.layers:
            layer.cast(dtype)


class ResidualUnit(Layer):
    """Two pre-activation conv blocks plus an identity/projection shortcut."""

    def __init__(self, in_channels: int, out_channels: int, stride: int,
                 keep_prob: float, rng: np.random.Generator):
        self.branch = Sequential([
            BatchNorm(in_channels),
            Relu(),
            SpatialDropout(keep_prob),
            Conv2d(in_channels, out_channels, kernel=3, stride=stride,
                   rng=rng),
            BatchNorm(out_channels),
            Relu(),
            SpatialDropout(keep_prob),
            Conv2d(out_channels, out_channels, kernel=3, stride=1, rng=rng),
        ])
        if stride != 1 or in_channels != out_channels:
            self.shortcut: Conv2d | None = Conv2d(
                in_channels, out_channels, kernel=1, stride=stride, rng=rng)
        else:
            self.shortcut = None

    def forward(self, x, train=False, rng=None):
        fx = self.branch.forward(x, train=train, rng=rng)
        sx = self.shortcut.forward(x, train=train, rng=rng) \
            if self.shortcut else x
        if fx.shape != sx.shape:
            raise ValueError(
                f"residual branch shape {fx.shape} != shortcut shape "
                f"{sx.shape}")
        return fx + sx

    def backward(self, dout):
        dx = self.branch.backward(dout)
        dx = dx + (self.shortcut.backward(dout) if self.shortcut else dout)
        return dx

    def _subs(self):
        subs = [("branch", self.branch)]
        if self.shortcut:
            subs.append(("shortcut", self.shortcut))
        return subs

    def param_dict(self):
        return {f"{tag}.{n}": a for tag, sub in self._subs()
                for n, a in sub.param_dict().items()}

    def grad_dict(self):
        return {f"{tag}.{n}": a for tag, sub in self._subs()
                for n, a in sub.grad_dict().items()}

    def state_dict(self):
        return {f"{tag}.{n}": a for tag, sub in self._subs()
                for n, a in sub.state_dict().items()}

    def cast(self, dtype):
        for _, sub in self._subs():
            sub.cast(dtype)


def weight_layer_count(net: Layer) -> int:
    """Convs and dense layers, excluding projection shortcuts."""

    def count(layer: Layer) -> int:
        if isinstance(layer, (Conv2d, Dense)):
            return 1
        if isinstance(layer, Sequential):
            return sum(count(sub) for sub in layer.layers)
        if isinstance(layer, ResidualUnit):
            return count(layer.branch)
        return 0

    return count(net)
