"""The three training regimes.

- `train_core`: fit the normalizer and the core network on one corpus, or on several pooled.
- `train_adaptation`: freeze the core, start the adapter at identity, and train
  only the adapter on the pooled corpora.
- `train_joint`: train a freshly initialized core and an identity adapter
  together on the pooled corpora.

Corpora are pooled by concatenation and shuffled globally every epoch with a
generator seeded from `TrainConfig.seed`, so every regime is deterministic for a
fixed seed and manifest order.
"""
import dataclasses
import logging
import typing as t

import numpy as np
from monad_std import Option
from tqdm import tqdm

from .adaptation import DaModel, adapter_backward, identity_init
from .dataio import read_wav
from .dsp import Segment, preprocess
from .error import DataError
from .features import Normalizer, extract_batch, fit_normalizer
from .manifest import Manifest, split_manifest
from .nn.config import TrainConfig
from .nn.loss import loss_and_grad
from .nn.model import Architecture, CoreModel, backward, forward, mlp_init
from .nn.optim import FreezeMask, adam_init, optimizer_step
from .typedef.array import BoolArray, FloatArray, LossKind

__all__ = [
    "TrainingSet",
    "slice_span",
    "load_segments",
    "build_training_set",
    "train_core",
    "train_adaptation",
    "train_joint",
    "split_manifest",
]

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True, eq=False)
class TrainingSet:
    """Raw (unnormalized) features with targets in Hz and their mask."""
    features: FloatArray
    targets_hz: FloatArray
    mask: BoolArray

    def __len__(self) -> int:
        return self.features.shape[0]

    def normalized(self, normalizer: Normalizer) -> t.Tuple[FloatArray, FloatArray]:
        """Network inputs and kHz targets; masked-out targets become 0."""
        units = normalizer.targets_to_units(np.where(self.mask, self.targets_hz, 0.0))
        return normalizer.apply(self.features), units


def slice_span(samples: FloatArray, rate: int, start_s: float, end_s: Option[float], source: t.Any = "audio") -> FloatArray:
    """Samples between `start_s` and `end_s` (the end of the audio when absent).

    Raises:
        DataError: The span is empty or lies outside the audio.
    """
    lo = int(round(start_s * rate))
    hi = min(end_s.map_or(samples.size, lambda e: int(round(e * rate))), samples.size)
    if lo < 0 or hi <= lo:
        raise DataError(f"{source}: span [{start_s}, {end_s.map_or('end', str)}] s lies outside the audio")
    return samples[lo:hi]


def load_segments(manifest: Manifest) -> t.List[Segment]:
    """Read, slice and preprocess every entry of a manifest.

    Each file is read once; spans are cut at the file's own rate before
    resampling.

    Raises:
        DataError: A file is unreadable or a span lies outside its file.
    """
    audio: t.Dict[str, t.Tuple[FloatArray, int]] = {}
    segments = []
    for entry in manifest.entries:
        path = manifest.resolve(entry)
        key = str(path)
        if key not in audio:
            audio[key] = read_wav(path)
        samples, rate = audio[key]
        span = slice_span(samples, rate, entry.start_s, Option.some(entry.end_s), path)
        label = Option.some(entry.domain) if entry.domain else Option.none()
        segments.append(preprocess(span, rate, label, Option.some(entry.targets)))
    return segments


def build_training_set(manifests: t.Sequence[Manifest], threads: t.Optional[int] = None) -> TrainingSet:
    """Pool the manifests in order and extract their features.

    Raises:
        DataError: No entries at all, or an entry without any reference formant.
    """
    entries = [(m, e) for m in manifests for e in m.entries]
    if not entries:
        raise DataError("no training entries: every manifest is empty")
    for m, entry in entries:
        if not entry.targets.mask.any():
            raise DataError(f"{m.name}: entry {entry.path} has every formant masked out")
    segments = [s for m in manifests for s in load_segments(m)]
    features = extract_batch(segments, threads)
    return TrainingSet(
        features,
        np.stack([e.targets.values for _, e in entries]),
        np.stack([e.targets.mask for _, e in entries]),
    )


class _Objective(t.Protocol):
    def parameters(self) -> t.List[FloatArray]: ...

    def set_parameters(self, params: t.Sequence[FloatArray]) -> None: ...

    def loss(self, x: FloatArray, y: FloatArray, mask: BoolArray, kind: LossKind) -> float: ...

    def loss_and_grads(self, x: FloatArray, y: FloatArray, mask: BoolArray, kind: LossKind) -> t.Tuple[float, t.List[FloatArray]]: ...


class _CoreObjective:
    def __init__(self, model: CoreModel):
        self.model = model

    def parameters(self) -> t.List[FloatArray]:
        return self.model.parameters()

    def set_parameters(self, params: t.Sequence[FloatArray]) -> None:
        self.model.set_parameters(params)

    def loss(self, x, y, mask, kind):
        return loss_and_grad(forward(self.model, x)[0], y, mask, kind)[0]

    def loss_and_grads(self, x, y, mask, kind):
        f, cache = forward(self.model, x)
        loss, d_f = loss_and_grad(f, y, mask, kind)
        return loss, backward(self.model, cache, d_f)


class _DaObjective:
    """Core parameters first, then the adapter's; a frozen core gets zero gradients."""

    def __init__(self, model: DaModel, train_core: bool):
        self.model = model
        self.train_core = train_core
        self._n_core = len(model.core.parameters())
        self._zeros = [] if train_core else [np.zeros_like(p) for p in model.core.parameters()]

    def parameters(self) -> t.List[FloatArray]:
        return self.model.core.parameters() + self.model.adapter.parameters()

    def set_parameters(self, params: t.Sequence[FloatArray]) -> None:
        if self.train_core:
            self.model.core.set_parameters(params[:self._n_core])
        self.model.adapter.set_parameters(params[self._n_core:])

    def freeze_mask(self) -> FreezeMask:
        return [not self.train_core] * self._n_core + [False] * len(self.model.adapter.parameters())

    def loss(self, x, y, mask, kind):
        return loss_and_grad(self.model.forward(x).g, y, mask, kind)[0]

    def loss_and_grads(self, x, y, mask, kind):
        out = self.model.forward(x)
        loss, d_g = loss_and_grad(out.g, y, mask, kind)
        adapter_grads = adapter_backward(out.f, x, out.s, d_g, self.model.adapter)
        if self.train_core:
            core_grads = backward(self.model.core, out.core_cache, adapter_grads.f)
        else:
            core_grads = self._zeros
        return loss, core_grads + adapter_grads.as_list()


@dataclasses.dataclass(frozen=True)
class _FitSummary:
    epochs_run: int
    final_loss: float
    best_epoch: int

    def to_dict(self) -> t.Dict[str, t.Any]:
        return dataclasses.asdict(self)


def _holdout(n: int, cfg: TrainConfig, rng: np.random.Generator) -> t.Tuple[np.ndarray, np.ndarray]:
    if cfg.patience.is_none():
        return np.arange(n), np.arange(0)
    n_val = max(1, int(round(n * cfg.validation_fraction)))
    if n_val >= n:
        raise DataError(f"{n} examples are too few for a held-out fraction of {cfg.validation_fraction}")
    order = rng.permutation(n)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def _fit(
        objective: _Objective,
        x: FloatArray,
        y: FloatArray,
        mask: BoolArray,
        cfg: TrainConfig,
        freeze_mask: FreezeMask,
        desc: str,
) -> _FitSummary:
    rng = np.random.default_rng(cfg.seed)
    train_index, val_index = _holdout(x.shape[0], cfg, rng)
    state = adam_init(objective.parameters(), cfg.learning_rate)
    best_loss, best_epoch, best_params = np.inf, 0, None
    train_loss = np.nan
    epochs_run = 0
    show_progress = logger.isEnabledFor(logging.DEBUG)

    for epoch in range(1, cfg.epochs + 1):
        order = train_index[rng.permutation(train_index.size)]
        total = 0.0
        starts = range(0, order.size, cfg.batch_size)
        for start in tqdm(starts, desc=f"{desc} epoch {epoch}", disable=not show_progress, leave=False):
            batch = order[start:start + cfg.batch_size]
            loss, grads = objective.loss_and_grads(x[batch], y[batch], mask[batch], cfg.loss)
            params, state = optimizer_step(objective.parameters(), grads, state, freeze_mask)
            objective.set_parameters(params)
            total += loss * batch.size
        train_loss = total / order.size
        epochs_run = epoch

        if cfg.patience.is_none():
            logger.info("%s epoch %d/%d: train loss %.6f", desc, epoch, cfg.epochs, train_loss)
            continue
        val_loss = objective.loss(x[val_index], y[val_index], mask[val_index], cfg.loss)
        logger.info("%s epoch %d/%d: train loss %.6f, held-out loss %.6f", desc, epoch, cfg.epochs, train_loss, val_loss)
        if val_loss < best_loss:
            best_loss, best_epoch = val_loss, epoch
            best_params = [p.copy() for p in objective.parameters()]
        elif epoch - best_epoch >= cfg.patience.unwrap():
            logger.info("%s: no held-out improvement for %d epochs, stopping", desc, epoch - best_epoch)
            break

    if best_params is not None:
        objective.set_parameters(best_params)
    return _FitSummary(epochs_run, float(train_loss), best_epoch if best_params is not None else epochs_run)


def _require_manifests(manifests: t.Sequence[Manifest]) -> None:
    if not manifests:
        raise DataError("at least one manifest is required")


def _provenance(regime: str, manifests: t.Sequence[Manifest], n: int, cfg: TrainConfig, summary: _FitSummary) -> t.Dict[str, t.Any]:
    return {
        "regime": regime,
        "manifests": [m.name for m in manifests],
        "examples": n,
        "config": cfg.to_dict(),
        "fit": summary.to_dict(),
    }


def train_core(
        manifests: t.Union[Manifest, t.Sequence[Manifest]],
        cfg: TrainConfig = TrainConfig(),
        threads: t.Optional[int] = None,
) -> CoreModel:
    """Step one: fit the normalizer and train the core network.

    Several manifests are pooled like `train_joint` pools them, giving a plain
    core trained on every corpus at once; the normalizer is fit on the pool.

    Raises:
        DataError: No manifest, no entries, unreadable audio, or an entry with no
            reference formant.
    """
    pool = [manifests] if isinstance(manifests, Manifest) else list(manifests)
    _require_manifests(pool)
    for m in pool:
        if len(m) == 0:
            raise DataError(f"manifest {m.name!r} is empty")
    data = build_training_set(pool, threads)
    normalizer = fit_normalizer(data.features)
    model = mlp_init(Architecture.core(cfg.hidden_sizes, normalizer.dim), cfg.seed, normalizer)
    x, y = data.normalized(normalizer)
    logger.info("training core network on %d examples from %s", len(data), ", ".join(repr(m.name) for m in pool))
    summary = _fit(_CoreObjective(model), x, y, data.mask, cfg, None, "core")
    model.provenance = _provenance("core", pool, len(data), cfg, summary)
    return model


def train_adaptation(
        core: CoreModel,
        manifests: t.Sequence[Manifest],
        cfg: TrainConfig = TrainConfig(freeze_core=True),
        threads: t.Optional[int] = None,
) -> DaModel:
    """Step two: train an identity-initialized adapter over a frozen copy of `core`.

    The core's normalizer is reused as is. The returned model's core is
    bitwise identical to `core`, which is left untouched.

    Raises:
        DataError: The manifest list is empty or holds no entries.
    """
    _require_manifests(manifests)
    if not cfg.freeze_core:
        logger.info("adaptation training always freezes the core")
        cfg = dataclasses.replace(cfg, freeze_core=True)
    data = build_training_set(manifests, threads)
    model = DaModel(core.copy(), identity_init(core.normalizer.dim))
    x, y = data.normalized(core.normalizer)
    logger.info("training adapter on %d pooled examples from %d manifests", len(data), len(manifests))
    objective = _DaObjective(model, train_core=False)
    summary = _fit(objective, x, y, data.mask, cfg, objective.freeze_mask(), "adapter")
    model.provenance = _provenance("two-step", manifests, len(data), cfg, summary)
    return model


def train_joint(manifests: t.Sequence[Manifest], cfg: TrainConfig = TrainConfig(), threads: t.Optional[int] = None) -> DaModel:
    """Train a He-initialized core and an identity adapter together on the pooled data.

    The normalizer is fit on the pooled features.

    Raises:
        DataError: The manifest list is empty or holds no entries.
    """
    _require_manifests(manifests)
    if cfg.freeze_core:
        logger.info("joint training ignores freeze_core")
        cfg = dataclasses.replace(cfg, freeze_core=False)
    data = build_training_set(manifests, threads)
    normalizer = fit_normalizer(data.features)
    core = mlp_init(Architecture.core(cfg.hidden_sizes, normalizer.dim), cfg.seed, normalizer)
    model = DaModel(core, identity_init(normalizer.dim))
    x, y = data.normalized(normalizer)
    logger.info("joint training on %d pooled examples from %d manifests", len(data), len(manifests))
    objective = _DaObjective(model, train_core=True)
    summary = _fit(objective, x, y, data.mask, cfg, objective.freeze_mask(), "joint")
    model.provenance = _provenance("joint", manifests, len(data), cfg, summary)
    return model


