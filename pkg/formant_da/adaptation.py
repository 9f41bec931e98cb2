"""The domain-adaptation head.

The selection neuron reads the same normalized features `c` as the core:

    s(c) = sigmoid(w_s . c + b_s)

and the adapted estimate remaps the core outputs `f`:

    g_i = sum_j W_ij f_j + b_i + v_i s(c)

`identity_init` sets `W = I` and every other parameter to zero, so a fresh
adapter reproduces the core exactly.
"""
import dataclasses
import typing as t

import numpy as np

from .error import NumericError
from .features import FEATURE_DIM, extract_batch
from .nn.model import N_FORMANTS, CoreModel, ForwardCache
from .nn.model import forward as core_forward
from .typedef.array import ArrayLike, FloatArray

if t.TYPE_CHECKING:
    from .dsp import Segment

__all__ = [
    "GATE_CLAMP",
    "AdaptationLayer",
    "AdapterGradients",
    "DaModel",
    "DaForward",
    "selection_gate",
    "adapted_estimate",
    "identity_init",
    "adapter_backward",
]

GATE_CLAMP = 500.0
_GATE_CEILING = np.nextafter(1.0, 0.0)


@dataclasses.dataclass(eq=False)
class AdaptationLayer:
    """Parameters of the selection neuron and the output remap."""
    w_s: FloatArray
    b_s: float
    W: FloatArray
    b: FloatArray
    v: FloatArray

    def __post_init__(self):
        self.w_s = np.asarray(self.w_s, dtype=np.float64).reshape(-1)
        self.b_s = float(self.b_s)
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        self.v = np.asarray(self.v, dtype=np.float64).reshape(-1)
        if self.W.shape != (N_FORMANTS, N_FORMANTS) or self.b.shape != (N_FORMANTS,) or self.v.shape != (N_FORMANTS,):
            raise NumericError(f"adapter shapes W {self.W.shape}, b {self.b.shape}, v {self.v.shape} are not 4x4, 4, 4")
        if not all(np.all(np.isfinite(p)) for p in self.parameters()):
            raise NumericError("adapter parameters must be finite")

    @property
    def feature_dim(self) -> int:
        return self.w_s.size

    def parameters(self) -> t.List[FloatArray]:
        """Parameters in declared order `W, b, v, w_s, b_s` (`b_s` as a length-1 array)."""
        return [self.W, self.b, self.v, self.w_s, np.array([self.b_s])]

    def set_parameters(self, params: t.Sequence[FloatArray]) -> None:
        W, b, v, w_s, b_s = params
        if W.shape != self.W.shape or b.shape != self.b.shape or v.shape != self.v.shape or w_s.shape != self.w_s.shape:
            raise NumericError("adapter parameter shapes do not match")
        self.W, self.b, self.v, self.w_s = W, b, v, w_s
        self.b_s = float(np.asarray(b_s).reshape(-1)[0])

    def copy(self) -> "AdaptationLayer":
        return AdaptationLayer(self.w_s.copy(), self.b_s, self.W.copy(), self.b.copy(), self.v.copy())


@dataclasses.dataclass(frozen=True, eq=False)
class AdapterGradients:
    W: FloatArray
    b: FloatArray
    v: FloatArray
    w_s: FloatArray
    b_s: float
    f: FloatArray
    """Gradient with respect to the core outputs; the two-step trainer discards it."""

    def as_list(self) -> t.List[FloatArray]:
        """Gradients in the order of `AdaptationLayer.parameters()`."""
        return [self.W, self.b, self.v, self.w_s, np.array([self.b_s])]


def selection_gate(c: ArrayLike, layer: AdaptationLayer) -> FloatArray:
    """`s(c) = sigmoid(w_s . c + b_s)`, strictly inside `(0, 1)`.

    The logit is clamped to `[-500, 500]` and the result kept below 1.0, which
    `sigmoid(500)` would otherwise round to. Accepts one vector (returns a 0-d
    array) or a batch of rows.

    Examples:
        ```python
        layer = identity_init()
        assert float(selection_gate(np.ones(350), layer)) == 0.5
        ```
    """
    z = np.asarray(c, dtype=np.float64) @ layer.w_s + layer.b_s
    s = 1.0 / (1.0 + np.exp(-np.clip(z, -GATE_CLAMP, GATE_CLAMP)))
    return np.minimum(s, _GATE_CEILING)


def adapted_estimate(f: ArrayLike, c: ArrayLike, layer: AdaptationLayer) -> FloatArray:
    """`g_i = sum_j W_ij f_j + b_i + v_i s(c)` for one example or a batch."""
    f = np.asarray(f, dtype=np.float64)
    s = selection_gate(c, layer)
    return _remap(f, s, layer)


def _remap(f: FloatArray, s: FloatArray, layer: AdaptationLayer) -> FloatArray:
    return f @ layer.W.T + layer.b + np.multiply.outer(s, layer.v)


def identity_init(feature_dim: int = FEATURE_DIM) -> AdaptationLayer:
    """`W = I`, everything else zero: the adapted estimate equals the core output."""
    return AdaptationLayer(
        w_s=np.zeros(feature_dim),
        b_s=0.0,
        W=np.eye(N_FORMANTS),
        b=np.zeros(N_FORMANTS),
        v=np.zeros(N_FORMANTS),
    )


def adapter_backward(f: ArrayLike, c: ArrayLike, s: ArrayLike, d_g: ArrayLike, layer: AdaptationLayer) -> AdapterGradients:
    """Exact gradients of `sum(d_g * g)` for the adapter parameters and for `f`.

    Batch rows are summed, matching `nn.backward`.

    Raises:
        NumericError: The shapes of `f`, `c`, `s` and `d_g` disagree.
    """
    f2 = np.atleast_2d(np.asarray(f, dtype=np.float64))
    c2 = np.atleast_2d(np.asarray(c, dtype=np.float64))
    s1 = np.atleast_1d(np.asarray(s, dtype=np.float64))
    dg = np.atleast_2d(np.asarray(d_g, dtype=np.float64))
    n = f2.shape[0]
    if dg.shape != f2.shape or c2.shape != (n, layer.feature_dim) or s1.shape != (n,):
        raise NumericError(f"adapter backward shapes disagree: f {f2.shape}, c {c2.shape}, s {s1.shape}, d_g {dg.shape}")
    dz = (dg @ layer.v) * s1 * (1.0 - s1)
    df = dg @ layer.W
    return AdapterGradients(
        W=dg.T @ f2,
        b=dg.sum(axis=0),
        v=dg.T @ s1,
        w_s=dz @ c2,
        b_s=float(dz.sum()),
        f=df[0] if np.ndim(f) == 1 else df,
    )


@dataclasses.dataclass(frozen=True)
class DaForward:
    g: FloatArray
    f: FloatArray
    s: FloatArray
    core_cache: ForwardCache


@dataclasses.dataclass(eq=False)
class DaModel:
    """Core network plus adaptation head; both consume the core's normalizer."""
    core: CoreModel
    adapter: AdaptationLayer
    provenance: t.Dict[str, t.Any] = dataclasses.field(default_factory=dict)
    label: str = "domain-adaptation"

    def __post_init__(self):
        if self.adapter.feature_dim != self.core.normalizer.dim:
            raise NumericError(f"adapter reads {self.adapter.feature_dim} features, core reads {self.core.normalizer.dim}")

    def forward(self, c: ArrayLike) -> DaForward:
        """Adapted estimate `g`, core estimate `f` and gate `s` for normalized features."""
        f, cache = core_forward(self.core, c)
        s = selection_gate(c, self.adapter)
        return DaForward(_remap(f, s, self.adapter), f, s, cache)

    def estimate_features_hz(self, raw_features: ArrayLike) -> FloatArray:
        c = self.core.normalizer.apply(raw_features)
        return self.core.normalizer.units_to_hz(self.forward(c).g)

    def estimate_hz(self, segments: t.Sequence["Segment"]) -> FloatArray:
        return self.estimate_features_hz(extract_batch(segments))

    def gate(self, segments: t.Sequence["Segment"]) -> FloatArray:
        """Selection-neuron activations for a list of segments."""
        c = self.core.normalizer.apply(extract_batch(segments))
        return np.atleast_1d(selection_gate(c, self.adapter))
