import dataclasses
import typing as t

import numpy as np

from ..error import DataError, NumericError
from ..typedef.array import Activation, FloatArray

__all__ = [
    "ACTIVATIONS",
    "DenseLayer",
    "activate",
    "activation_derivative",
]

ACTIVATIONS: t.Tuple[Activation, ...] = ("relu", "sigmoid", "identity")


def activate(kind: Activation, z: FloatArray) -> FloatArray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    elif kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))
    elif kind == "identity":
        return z
    else:
        raise DataError(f"unknown activation {kind!r}")


def activation_derivative(kind: Activation, z: FloatArray, a: FloatArray) -> FloatArray:
    """Derivative of the activation at pre-activation `z`, given `a = activate(z)`.

    The ReLU derivative at exactly zero is taken as zero.
    """
    if kind == "relu":
        return (z > 0).astype(np.float64)
    elif kind == "sigmoid":
        return a * (1.0 - a)
    elif kind == "identity":
        return np.ones_like(z)
    else:
        raise DataError(f"unknown activation {kind!r}")


@dataclasses.dataclass(eq=False)
class DenseLayer:
    """Affine map `activation(W x + b)` with `W` of shape `(out, in)`."""
    weights: FloatArray
    biases: FloatArray
    activation: Activation = "relu"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64).reshape(-1)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise DataError(f"layer shapes disagree: weights {self.weights.shape}, biases {self.biases.shape}")
        if self.activation not in ACTIVATIONS:
            raise DataError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise NumericError("layer parameters must be finite")

    @property
    def fan_in(self) -> int:
        return self.weights.shape[1]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[0]
