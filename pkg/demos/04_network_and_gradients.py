"""The residual networks, and why their gradients can be trusted.

Both detection networks are built from scratch on numpy: conv 3x3 ->
batch norm -> relu stacks wrapped into pre-activation residual units with
spatial dropout, ending in a dense softmax head.

* small: stem conv + 3 residual units, 8 weight layers, filters 8 -> 16
* large: stem conv + 6 residual units, 14 weight layers, 16 -> 32 -> 64

Every backward pass is hand-derived, so this demo spot-checks a few
parameters against central finite differences of the training loss.
"""

import numpy as np

from startdetect.model import NetworkSpec, build
from startdetect.nn import weighted_cross_entropy_logits

for variant in ("small", "large"):
    net = build(NetworkSpec.of(variant, input_window=50, n_features=19))
    print(f"{variant:>5}: {net.weight_layers} weight layers, "
          f"conv filters {net.conv_filter_sequence()}")
print()

# Finite-difference spot check on a tiny instance of the small net.
rng = np.random.default_rng(7)
net = build(NetworkSpec.small(8, 5, keep_prob=0.8), seed=1).net
x = rng.normal(size=(2, 8, 5, 1))
labels = np.array([0, 2])
w = np.ones(3)
mask_rng = lambda: np.random.default_rng(42)  # frozen dropout mask


def loss():
    logits = net.forward(x, train=True, rng=mask_rng())
    return weighted_cross_entropy_logits(logits, labels, w)[0]


net.forward(x, train=True, rng=mask_rng())
_, dlogits = weighted_cross_entropy_logits(
    net.forward(x, train=True, rng=mask_rng()), labels, w)
net.backward(dlogits)

h = 1e-5
params, grads = net.param_dict(), net.grad_dict()
print(f"{'parameter':<22} {'numeric':>12} {'analytic':>12} {'rel err':>9}")
for name in list(params)[:6]:
    flat, gflat = params[name].reshape(-1), grads[name].reshape(-1)
    i = int(rng.integers(flat.size))
    orig = flat[i]
    flat[i] = orig + h
    fp = loss()
    flat[i] = orig - h
    fm = loss()
    flat[i] = orig
    num = (fp - fm) / (2 * h)
    err = abs(num - gflat[i]) / max(abs(num), abs(gflat[i]), 1e-3)
    print(f"{name:<22} {num:12.6f} {gflat[i]:12.6f} {err:9.2e}")
