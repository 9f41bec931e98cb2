import dataclasses
import typing as t

from monad_std import Option

from ..error import UsageError
from ..typedef.array import LossKind

__all__ = [
    "TrainConfig",
]


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters shared by the three training regimes.

    Early stopping is off unless `patience` is set; it then holds out
    `validation_fraction` of the pooled examples and keeps the best epoch.
    """
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-4
    seed: int = 0
    freeze_core: bool = False
    loss: LossKind = "mae"
    hidden_sizes: t.Tuple[int, ...] = (1024, 512, 256)
    patience: Option[int] = dataclasses.field(default_factory=Option.none)
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 1:
            raise UsageError(f"epochs must be at least 1, got {self.epochs}")
        if self.batch_size < 1:
            raise UsageError(f"batch size must be at least 1, got {self.batch_size}")
        if not self.learning_rate >= 0:
            raise UsageError(f"learning rate must be non-negative, got {self.learning_rate}")
        if self.loss not in ("mae", "mse"):
            raise UsageError(f"loss must be 'mae' or 'mse', got {self.loss!r}")
        if any(size < 1 for size in self.hidden_sizes):
            raise UsageError(f"hidden layer sizes must be positive, got {self.hidden_sizes}")
        if self.patience.is_some_and(lambda p: p < 1):
            raise UsageError(f"patience must be at least 1, got {self.patience.unwrap()}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise UsageError(f"validation fraction must lie in (0, 1), got {self.validation_fraction}")

    def to_dict(self) -> t.Dict[str, t.Any]:
        """JSON-friendly echo stored in model provenance."""
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "freeze_core": self.freeze_core,
            "loss": self.loss,
            "hidden_sizes": list(self.hidden_sizes),
            "patience": self.patience.to_nullable(),
            "validation_fraction": self.validation_fraction,
        }
