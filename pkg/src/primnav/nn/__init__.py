from .layers import Conv2d, Dense, LSTMCell, apply_dropout, relu, relu_grad, sigmoid
from .losses import weighted_bce
from .optim import Adam, adam_update

__all__ = [
    "Adam",
    "Conv2d",
    "Dense",
    "LSTMCell",
    "adam_update",
    "apply_dropout",
    "relu",
    "relu_grad",
    "sigmoid",
    "weighted_bce",
]
