from .config import TrainConfig
from .layer import DenseLayer, ACTIVATIONS
from .model import N_FORMANTS, Architecture, Mlp, CoreModel, ForwardCache, mlp_init, forward, backward
from .loss import loss_and_grad
from .optim import AdamState, adam_init, optimizer_step


__all__ = [
    "TrainConfig",
    "DenseLayer",
    "ACTIVATIONS",
    "N_FORMANTS",
    "Architecture",
    "Mlp",
    "CoreModel",
    "ForwardCache",
    "mlp_init",
    "forward",
    "backward",
    "loss_and_grad",
    "AdamState",
    "adam_init",
    "optimizer_step",
]
