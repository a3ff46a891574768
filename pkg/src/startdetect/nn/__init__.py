from .layers import (BatchNorm, Conv2d, Dense, Layer, Relu, ShapeError,
                     SpatialDropout, softmax)
from .losses import weighted_cross_entropy, weighted_cross_entropy_logits
from .network import ResidualUnit, Sequential, weight_layer_count
from .optim import Adam, adam_step
from . import checkpoint

__all__ = [
    "BatchNorm", "Conv2d", "Dense", "Layer", "Relu", "ShapeError",
    "SpatialDropout", "softmax", "weighted_cross_entropy",
    "weighted_cross_entropy_logits", "ResidualUnit", "Sequential",
    "weight_layer_count", "Adam", "adam_step", "checkpoint",
]
