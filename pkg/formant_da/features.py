"""The 350-dimensional feature vector and its normalization.

Layout, frozen across save/load:

| indices | content |
|---|---|
| 0..299 | LPC cepstra c1..c30 for orders 8, 9, ..., 17 (order-major) |
| 300..349 | first 50 DCT coefficients of the quasi pitch-synchronous log spectrum |
"""
import dataclasses
import logging
import typing as t

import numpy as np
from monad_std.iter import siter

from . import dsp
from .error import DataError, NumericError
from .typedef.array import ArrayLike, FloatArray
from .utils.parallel import ordered_map

__all__ = [
    "LPC_ORDERS",
    "N_CEPSTRA",
    "N_DCT",
    "FEATURE_DIM",
    "TARGET_SCALE",
    "FeatureVector",
    "Normalizer",
    "extract_features",
    "extract_batch",
    "fit_normalizer",
    "apply_normalizer",
    "invert_normalizer",
]

logger = logging.getLogger(__name__)

LPC_ORDERS = tuple(range(8, 18))
N_CEPSTRA = 30
N_DCT = 50
FEATURE_DIM = len(LPC_ORDERS) * N_CEPSTRA + N_DCT
TARGET_SCALE = 1e-3
STD_FLOOR = 1e-8


@dataclasses.dataclass(frozen=True, eq=False)
class FeatureVector:
    """The input `c` of both the core network and the selection neuron."""
    values: FloatArray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.size != FEATURE_DIM:
            raise DataError(f"feature vector must have {FEATURE_DIM} values, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise NumericError("feature vector contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def cepstra(self) -> FloatArray:
        """The LPC block as a `(10, 30)` matrix, one row per model order."""
        return self.values[:len(LPC_ORDERS) * N_CEPSTRA].reshape(len(LPC_ORDERS), N_CEPSTRA)

    @property
    def spectral(self) -> FloatArray:
        """The 50 DCT coefficients of the pitch-synchronous spectrum."""
        return self.values[len(LPC_ORDERS) * N_CEPSTRA:]


@dataclasses.dataclass(frozen=True, eq=False)
class Normalizer:
    """Per-dimension z-scoring of features plus the Hz-to-kHz target scale.

    Statistics come from the core training corpus and are never refit later.
    """
    feature_mean: FloatArray
    feature_std: FloatArray
    target_scale: float = TARGET_SCALE

    def __post_init__(self):
        mean = np.asarray(self.feature_mean, dtype=np.float64).reshape(-1)
        std = np.asarray(self.feature_std, dtype=np.float64).reshape(-1)
        if mean.shape != std.shape:
            raise DataError(f"normalizer mean and std differ in length: {mean.size} vs {std.size}")
        if not np.all(std > 0):
            raise DataError("normalizer standard deviations must be strictly positive")
        object.__setattr__(self, "feature_mean", mean)
        object.__setattr__(self, "feature_std", std)

    @property
    def dim(self) -> int:
        return self.feature_mean.size

    def apply(self, x: ArrayLike) -> FloatArray:
        """Normalize one vector or a batch of row vectors."""
        return (np.asarray(x, dtype=np.float64) - self.feature_mean) / self.feature_std

    def invert(self, z: ArrayLike) -> FloatArray:
        return np.asarray(z, dtype=np.float64) * self.feature_std + self.feature_mean

    def targets_to_units(self, hz: ArrayLike) -> FloatArray:
        return np.asarray(hz, dtype=np.float64) * self.target_scale

    def units_to_hz(self, units: ArrayLike) -> FloatArray:
        return np.asarray(units, dtype=np.float64) / self.target_scale


def extract_features(seg: dsp.Segment) -> FeatureVector:
    """Assemble the feature vector of one segment.

    Raises:
        DataError: The segment is too short for pitch analysis.
        NumericError: The segment is silent or the LPC recursion is unstable.

    Examples:
        ```python
        vector = extract_features(segment)
        assert vector.values.size == 350
        ```
    """
    models = dsp.lpc_analysis(seg.samples, LPC_ORDERS)
    cepstra = [dsp.lpc_to_cepstrum(model, N_CEPSTRA) for model in models]
    period = dsp.estimate_median_pitch(seg)
    spectrum = dsp.pitch_sync_spectrum(seg, period)
    spectral = dsp.dct_ii(spectrum.values, N_DCT)
    return FeatureVector(np.concatenate(cepstra + [spectral]))


def extract_batch(segments: t.Sequence[dsp.Segment], threads: t.Optional[int] = None) -> FloatArray:
    """Feature matrix of shape `(n, 350)`, rows in segment order.

    Extraction runs on a thread pool capped by `FORMANT_DA_THREADS`. Every failing
    segment is logged; the first failure is then raised.
    """
    results = ordered_map(extract_features, segments, threads)
    vectors, errors = siter(results).partition_result()
    if errors:
        for index, result in enumerate(results):
            result.inspect_err(lambda e, i=index: logger.warning("feature extraction failed for segment %d: %s", i, e))
        raise errors[0]
    if not vectors:
        return np.zeros((0, FEATURE_DIM), dtype=np.float64)
    return np.stack([v.values for v in vectors])


def fit_normalizer(vectors: t.Union[t.Sequence[FeatureVector], FloatArray]) -> Normalizer:
    """Population mean and standard deviation per dimension, std floored at `1e-8`.

    Raises:
        DataError: No vectors were given.
    """
    matrix = _as_matrix(vectors)
    if matrix.shape[0] == 0:
        raise DataError("cannot fit a normalizer on an empty collection")
    mean = matrix.mean(axis=0)
    std = np.sqrt(((matrix - mean) ** 2).mean(axis=0))
    return Normalizer(mean, np.maximum(std, STD_FLOOR))


def apply_normalizer(n: Normalizer, v: FeatureVector) -> FeatureVector:
    """`(v - mean) / std`, elementwise."""
    return FeatureVector(n.apply(v.values))


def invert_normalizer(n: Normalizer, v: FeatureVector) -> FeatureVector:
    """Inverse of `apply_normalizer`."""
    return FeatureVector(n.invert(v.values))


def _as_matrix(vectors: t.Union[t.Sequence[FeatureVector], FloatArray]) -> FloatArray:
    if isinstance(vectors, np.ndarray):
        return np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if len(vectors) == 0:
        return np.zeros((0, FEATURE_DIM), dtype=np.float64)
    return np.stack([v.values for v in vectors])
