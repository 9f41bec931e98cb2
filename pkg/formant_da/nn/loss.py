import typing as t

import numpy as np

from ..error import DataError
from ..typedef.array import ArrayLike, BoolArray, FloatArray, LossKind

__all__ = [
    "loss_and_grad",
]


def loss_and_grad(pred: ArrayLike, target: ArrayLike, mask: ArrayLike, kind: LossKind = "mae") -> t.Tuple[float, FloatArray]:
    """Masked MAE or MSE and its gradient with respect to `pred`.

    For a single example the loss is the mean over masked-in components. For a
    batch (rows) it is the mean of the per-example losses, so the gradient carries
    the `1/n` factor. Masked-out components contribute neither loss nor gradient,
    and the MAE subgradient at zero error is zero.

    Raises:
        DataError: Some example has no masked-in component, or shapes disagree.

    Examples:
        ```python
        loss, grad = loss_and_grad([0.51, 1.48, 0, 0], [0.5, 1.5, 0, 0], [1, 1, 0, 0])
        assert abs(loss - 0.015) < 1e-12
        assert np.allclose(grad, [0.5, -0.5, 0.0, 0.0])
        ```
    """
    p = np.asarray(pred, dtype=np.float64)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    y = np.atleast_2d(np.asarray(target, dtype=np.float64))
    m: BoolArray = np.atleast_2d(np.asarray(mask, dtype=np.bool_))
    if p.shape != y.shape or p.shape != m.shape:
        raise DataError(f"prediction {p.shape}, target {y.shape} and mask {m.shape} shapes disagree")
    counts = m.sum(axis=1)
    if np.any(counts == 0):
        raise DataError("every example needs at least one masked-in formant")

    diff = np.where(m, p - np.where(m, y, 0.0), 0.0)
    weight = 1.0 / (counts[:, None] * p.shape[0])
    if kind == "mae":
        loss = float(np.sum(np.abs(diff) * weight))
        grad = np.sign(diff) * weight
    elif kind == "mse":
        loss = float(np.sum(diff * diff * weight))
        grad = 2.0 * diff * weight
    else:
        raise DataError(f"unknown loss {kind!r}")
    return loss, (grad[0] if single else grad)
