import typing as t
import typing_extensions as te

import numpy as np
import numpy.typing as npt

FloatArray: te.TypeAlias = npt.NDArray[np.float64]
"""Double precision array. Every numeric routine in the package works on these."""

BoolArray: te.TypeAlias = npt.NDArray[np.bool_]
"""Boolean array, used for formant masks and freeze masks."""

ArrayLike: te.TypeAlias = t.Union[FloatArray, t.Sequence[float]]
"""Anything `numpy.asarray` turns into a float vector."""

Activation: te.TypeAlias = t.Literal["relu", "sigmoid", "identity"]
"""Activation function of a dense layer."""

LossKind: te.TypeAlias = t.Literal["mae", "mse"]
"""Training loss."""
