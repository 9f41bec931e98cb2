import dataclasses
import typing as t

import numpy as np

from ..error import DataError, NumericError
from ..features import FEATURE_DIM, Normalizer, extract_batch
from ..typedef.array import Activation, ArrayLike, FloatArray
from .layer import DenseLayer, activate, activation_derivative

if t.TYPE_CHECKING:
    from ..dsp import Segment

__all__ = [
    "N_FORMANTS",
    "Architecture",
    "Mlp",
    "CoreModel",
    "ForwardCache",
    "identity_normalizer",
    "mlp_init",
    "forward",
    "backward",
]

N_FORMANTS = 4


@dataclasses.dataclass(frozen=True)
class Architecture:
    """Layer sizes `(in, h1, ..., out)` and one activation per layer."""
    sizes: t.Tuple[int, ...]
    activations: t.Tuple[Activation, ...]

    def __post_init__(self):
        if len(self.sizes) < 2 or any(s < 1 for s in self.sizes):
            raise DataError(f"invalid layer sizes {self.sizes}")
        if len(self.activations) != len(self.sizes) - 1:
            raise DataError(f"{len(self.sizes) - 1} layers need as many activations, got {len(self.activations)}")

    @staticmethod
    def core(hidden: t.Sequence[int] = (1024, 512, 256), n_inputs: int = FEATURE_DIM) -> "Architecture":
        """ReLU hidden layers and a linear 4-formant output.

        Examples:
            ```python
            arch = Architecture.core()
            assert arch.sizes == (350, 1024, 512, 256, 4)
            ```
        """
        sizes = (n_inputs,) + tuple(hidden) + (N_FORMANTS,)
        return Architecture(sizes, ("relu",) * len(hidden) + ("identity",))


@dataclasses.dataclass(eq=False)
class Mlp:
    """A stack of dense layers."""
    layers: t.List[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise DataError("a network needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.fan_out != nxt.fan_in:
                raise DataError(f"layer output {prev.fan_out} does not feed layer input {nxt.fan_in}")

    @property
    def architecture(self) -> Architecture:
        sizes = (self.layers[0].fan_in,) + tuple(layer.fan_out for layer in self.layers)
        return Architecture(sizes, tuple(layer.activation for layer in self.layers))

    def parameters(self) -> t.List[FloatArray]:
        """Parameters in declared order `W1, b1, W2, b2, ...`."""
        params: t.List[FloatArray] = []
        for layer in self.layers:
            params.extend((layer.weights, layer.biases))
        return params

    def set_parameters(self, params: t.Sequence[FloatArray]) -> None:
        if len(params) != 2 * len(self.layers):
            raise DataError(f"expected {2 * len(self.layers)} parameter arrays, got {len(params)}")
        for layer, weights, biases in zip(self.layers, params[0::2], params[1::2]):
            if weights.shape != layer.weights.shape or biases.shape != layer.biases.shape:
                raise DataError("parameter shapes do not match the architecture")
            layer.weights = weights
            layer.biases = biases

    def copy(self) -> "Mlp":
        return dataclasses.replace(self, layers=[
            DenseLayer(layer.weights.copy(), layer.biases.copy(), layer.activation) for layer in self.layers
        ])


@dataclasses.dataclass(eq=False)
class CoreModel(Mlp):
    """The core formant network together with the normalizer of its training corpus.

    Network outputs are formants in kHz; `estimate_hz` converts back to Hz.
    """
    normalizer: Normalizer = dataclasses.field(default_factory=lambda: identity_normalizer(FEATURE_DIM))
    provenance: t.Dict[str, t.Any] = dataclasses.field(default_factory=dict)
    label: str = "core"

    def __post_init__(self):
        super().__post_init__()
        if self.layers[-1].fan_out != N_FORMANTS:
            raise DataError(f"core network must output {N_FORMANTS} formants, got {self.layers[-1].fan_out}")
        if self.layers[0].fan_in != self.normalizer.dim:
            raise DataError(f"network input {self.layers[0].fan_in} does not match normalizer size {self.normalizer.dim}")

    def predict_units(self, c: ArrayLike) -> FloatArray:
        """Raw outputs `f` for already normalized features."""
        return forward(self, c)[0]

    def estimate_features_hz(self, raw_features: ArrayLike) -> FloatArray:
        return self.normalizer.units_to_hz(self.predict_units(self.normalizer.apply(raw_features)))

    def estimate_hz(self, segments: t.Sequence["Segment"]) -> FloatArray:
        return self.estimate_features_hz(extract_batch(segments))

    def copy(self) -> "CoreModel":
        clone = super().copy()
        return dataclasses.replace(self, layers=clone.layers, provenance=dict(self.provenance))


@dataclasses.dataclass(frozen=True)
class ForwardCache:
    """Per-layer inputs, pre-activations and activations of one forward pass."""
    inputs: t.Tuple[FloatArray, ...]
    pre: t.Tuple[FloatArray, ...]
    post: t.Tuple[FloatArray, ...]
    single: bool


def identity_normalizer(dim: int) -> Normalizer:
    return Normalizer(np.zeros(dim), np.ones(dim))


def mlp_init(architecture: Architecture, seed: int, normalizer: t.Optional[Normalizer] = None) -> CoreModel:
    """He-uniform weights (bound `sqrt(6 / fan_in)`), zero biases.

    The draw is fully determined by `seed`.

    Examples:
        ```python
        a = mlp_init(Architecture.core((8,)), seed=1)
        b = mlp_init(Architecture.core((8,)), seed=1)
        assert all((p == q).all() for p, q in zip(a.parameters(), b.parameters()))
        ```
    """
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, activation in zip(architecture.sizes, architecture.sizes[1:], architecture.activations):
        bound = np.sqrt(6.0 / fan_in)
        layers.append(DenseLayer(rng.uniform(-bound, bound, size=(fan_out, fan_in)), np.zeros(fan_out), activation))
    if normalizer is None:
        normalizer = identity_normalizer(architecture.sizes[0])
    return CoreModel(layers, normalizer)


def forward(model: Mlp, x: ArrayLike) -> t.Tuple[FloatArray, ForwardCache]:
    """Evaluate the network on one input vector or a batch of row vectors.

    Raises:
        NumericError: The input is not finite.
        DataError: The input width does not match the first layer.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = np.atleast_2d(x)
    if a.shape[1] != model.layers[0].fan_in:
        raise DataError(f"network expects {model.layers[0].fan_in} inputs, got {a.shape[1]}")
    if not np.all(np.isfinite(a)):
        raise NumericError("network input contains non-finite values")
    inputs, pre, post = [], [], []
    for layer in model.layers:
        inputs.append(a)
        z = a @ layer.weights.T + layer.biases
        a = activate(layer.activation, z)
        pre.append(z)
        post.append(a)
    out = a[0] if single else a
    return out, ForwardCache(tuple(inputs), tuple(pre), tuple(post), single)


def backward(model: Mlp, cache: ForwardCache, d_out: ArrayLike) -> t.List[FloatArray]:
    """Exact gradients of `sum(d_out * f)` with respect to every parameter.

    Gradients come back in the order of `Mlp.parameters()`; batch rows are summed.

    Raises:
        NumericError: `d_out` does not match the cached output shape.
    """
    delta = np.atleast_2d(np.asarray(d_out, dtype=np.float64))
    if delta.shape != cache.post[-1].shape:
        raise NumericError(f"output gradient shape {delta.shape} does not match output {cache.post[-1].shape}")
    grads: t.List[FloatArray] = []
    for index in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[index]
        dz = delta * activation_derivative(layer.activation, cache.pre[index], cache.post[index])
        grads.append(dz.sum(axis=0))
        grads.append(dz.T @ cache.inputs[index])
        delta = dz @ layer.weights
    grads.reverse()
    return grads
