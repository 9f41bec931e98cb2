import typing as t

import numpy as np
from monad_std import Option

from formant_da.adaptation import AdaptationLayer
from formant_da.features import FEATURE_DIM
from formant_da.nn import Architecture, CoreModel, forward, mlp_init

TINY_HIDDEN = (16, 8)


def tiny_core(seed: int = 0, n_inputs: int = FEATURE_DIM) -> CoreModel:
    return mlp_init(Architecture.core(TINY_HIDDEN, n_inputs), seed)


def random_adapter(rng: np.random.Generator, feature_dim: int = FEATURE_DIM) -> AdaptationLayer:
    return AdaptationLayer(
        w_s=rng.normal(0.0, 0.05, feature_dim),
        b_s=float(rng.normal()),
        W=np.eye(4) + rng.normal(0.0, 0.1, (4, 4)),
        b=rng.normal(0.0, 0.1, 4),
        v=rng.normal(0.0, 1.0, 4),
    )


def _objective(model: CoreModel, x: np.ndarray, d_out: np.ndarray) -> t.Tuple[float, t.List[np.ndarray]]:
    out, cache = forward(model, x)
    return float(np.sum(d_out * out)), [pre > 0 for pre in cache.pre]


def core_finite_difference(
        model: CoreModel,
        x: np.ndarray,
        d_out: np.ndarray,
        param: int,
        index: t.Tuple[int, ...],
        eps: float = 1e-5,
) -> Option[float]:
    """Central difference of `sum(d_out * f)` along one parameter entry.

    The network is piecewise linear, so the difference is exact unless the
    perturbation flips a ReLU; that case yields `Option.none()`.
    """
    target = model.parameters()[param]
    original = target[index]
    target[index] = original + eps
    plus, plus_pattern = _objective(model, x, d_out)
    target[index] = original - eps
    minus, minus_pattern = _objective(model, x, d_out)
    target[index] = original
    if any((p != m).any() for p, m in zip(plus_pattern, minus_pattern)):
        return Option.none()
    return Option.some(float((plus - minus) / (2.0 * eps)))


def relative_error(numeric: float, analytic: float, floor: float) -> float:
    return abs(numeric - analytic) / max(abs(numeric), abs(analytic), floor)
