import dataclasses
import typing as t

import numpy as np

from ..error import NumericError
from ..typedef.array import FloatArray

__all__ = [
    "FreezeMask",
    "AdamState",
    "adam_init",
    "optimizer_step",
]

FreezeMask = t.Optional[t.Sequence[t.Union[bool, np.ndarray]]]
"""Per-parameter freeze flags. `True` (or a `True` element) keeps the value bitwise unchanged."""


@dataclasses.dataclass(frozen=True, eq=False)
class AdamState:
    """First and second moment accumulators, mirroring the parameter shapes."""
    m: t.Tuple[FloatArray, ...]
    v: t.Tuple[FloatArray, ...]
    step: int = 0
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: t.Sequence[FloatArray], learning_rate: float = 1e-4) -> AdamState:
    return AdamState(
        tuple(np.zeros_like(p) for p in params),
        tuple(np.zeros_like(p) for p in params),
        learning_rate=learning_rate,
    )


def optimizer_step(
        params: t.Sequence[FloatArray],
        grads: t.Sequence[FloatArray],
        state: AdamState,
        freeze_mask: FreezeMask = None,
) -> t.Tuple[t.List[FloatArray], AdamState]:
    """One Adam update with bias-corrected moments.

    Frozen parameters are returned as the very same arrays, so they stay bitwise
    identical; their moments are not touched either.

    Raises:
        NumericError: The parameter, gradient, state or mask shapes disagree.

    Examples:
        ```python
        state = adam_init([np.zeros(1)], learning_rate=1e-3)
        new, state = optimizer_step([np.zeros(1)], [np.ones(1)], state)
        assert abs(new[0][0] + 1e-3) < 1e-10
        ```
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise NumericError(f"{len(params)} parameters, {len(grads)} gradients and {len(state.m)} moment slots")
    masks = [False] * len(params) if freeze_mask is None else list(freeze_mask)
    if len(masks) != len(params):
        raise NumericError(f"freeze mask covers {len(masks)} of {len(params)} parameters")

    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** step
    correction2 = 1.0 - b2 ** step
    new_params, new_m, new_v = [], [], []
    for p, g, m, v, frozen in zip(params, grads, state.m, state.v, masks):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape or m.shape != p.shape:
            raise NumericError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        if isinstance(frozen, (bool, np.bool_)) and frozen:
            new_params.append(p)
            new_m.append(m)
            new_v.append(v)
            continue
        m_next = b1 * m + (1.0 - b1) * g
        v_next = b2 * v + (1.0 - b2) * g * g
        update = state.learning_rate * (m_next / correction1) / (np.sqrt(v_next / correction2) + state.eps)
        if isinstance(frozen, np.ndarray):
            if frozen.shape != p.shape:
                raise NumericError(f"freeze mask shape {frozen.shape} does not match parameter shape {p.shape}")
            new_params.append(np.where(frozen, p, p - update))
            new_m.append(np.where(frozen, m, m_next))
            new_v.append(np.where(frozen, v, v_next))
        else:
            new_params.append(p - update)
            new_m.append(m_next)
            new_v.append(v_next)
    return new_params, dataclasses.replace(state, m=tuple(new_m), v=tuple(new_v), step=step)
