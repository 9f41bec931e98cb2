"""Persistence for audio, manifests and models.

Every writer goes through `atomic_write_bytes`: data lands in a temporary file in
the target directory and is renamed into place, so a failure never leaves a
partial artifact behind.

Model file layout (all integers and doubles little-endian):

| field | encoding |
|---|---|
| magic | `b"FDA1"` |
| format version | u32 |
| kind | u8, 0 = core, 1 = core + adapter |
| layer count | u32 |
| per layer | u32 fan-in, u32 fan-out, u8 activation code |
| target scale | f64 |
| feature mean, feature std | f64 x fan-in each |
| core provenance | u32 byte length + UTF-8 JSON |
| adapter provenance (kind 1) | u32 byte length + UTF-8 JSON |
| parameter count | u64 |
| parameters | f64 x count: core `W1, b1, ...` row-major, then `W, b, v, w_s, b_s` |
"""
import csv
import io
import json
import logging
import os
import pathlib
import struct
import tempfile
import typing as t

import numpy as np
import scipy.io.wavfile
from monad_std import Option

from .adaptation import AdaptationLayer, DaModel
from .dsp import FormantTargets
from .error import DataError
from .features import Normalizer
from .manifest import Manifest, ManifestEntry
from .nn.layer import DenseLayer
from .nn.model import N_FORMANTS, CoreModel
from .typedef.array import ArrayLike, FloatArray

__all__ = [
    "MANIFEST_HEADER",
    "MODEL_MAGIC",
    "MODEL_VERSION",
    "atomic_write_bytes",
    "atomic_write_text",
    "read_wav",
    "write_wav",
    "encode_wav",
    "load_manifest",
    "save_manifest",
    "manifest_to_csv",
    "serialize_model",
    "deserialize_model",
    "save_model",
    "load_model",
]

logger = logging.getLogger(__name__)

PathLike = t.Union[str, "os.PathLike[str]"]
AnyModel = t.Union[CoreModel, DaModel]

MANIFEST_HEADER = ("path", "start_s", "end_s", "f1", "f2", "f3", "f4", "domain")

MODEL_MAGIC = b"FDA1"
MODEL_VERSION = 1
_KIND_CORE = 0
_KIND_DA = 1
_ACTIVATION_CODES = {"relu": 0, "sigmoid": 1, "identity": 2}
_ACTIVATION_NAMES = {code: name for name, code in _ACTIVATION_CODES.items()}

PCM_SCALE = 32768.0


def atomic_write_bytes(path: PathLike, data: bytes) -> None:
    """Write `data` to `path` through a temporary file and an atomic rename.

    Raises:
        DataError: The target directory is not writable.
    """
    target = pathlib.Path(path)
    directory = target.parent if str(target.parent) else pathlib.Path(".")
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=directory)
    except OSError as e:
        raise DataError(f"cannot write {target}: {e.strerror or e}") from None
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, target)
    except OSError as e:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise DataError(f"cannot write {target}: {e.strerror or e}") from None


def atomic_write_text(path: PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


########
# WAV #
########

def read_wav(path: PathLike) -> t.Tuple[FloatArray, int]:
    """Read a 16-bit PCM mono WAV file, scaled by `1/32768`.

    Raises:
        DataError: The file is missing, not 16-bit PCM, or has several channels.
    """
    target = pathlib.Path(path)
    if not target.is_file():
        raise DataError(f"audio file not found: {target}")
    try:
        rate, data = scipy.io.wavfile.read(target)
    except (ValueError, OSError) as e:
        raise DataError(f"cannot read {target}: {e}") from None
    if data.dtype != np.int16:
        raise DataError(f"{target}: unsupported encoding {data.dtype}, expected 16-bit PCM")
    if data.ndim != 1:
        raise DataError(f"{target}: expected mono audio, found {data.shape[1]} channels")
    return data.astype(np.float64) / PCM_SCALE, int(rate)


def encode_wav(samples: ArrayLike, rate: int) -> bytes:
    """16-bit PCM mono WAV bytes with round-half-away-from-zero quantization.

    Raises:
        DataError: A sample lies outside `[-1, 1]` or the rate is not positive.
    """
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if rate <= 0:
        raise DataError(f"sample rate must be positive, got {rate}")
    if x.size and (not np.all(np.isfinite(x)) or np.max(np.abs(x)) > 1.0):
        raise DataError("WAV samples must be finite and lie in [-1, 1]")
    scaled = x * PCM_SCALE
    quantized = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    pcm = np.clip(quantized, -PCM_SCALE, PCM_SCALE - 1).astype(np.int16)
    buffer = io.BytesIO()
    scipy.io.wavfile.write(buffer, rate, pcm)
    return buffer.getvalue()


def write_wav(path: PathLike, samples: ArrayLike, rate: int) -> None:
    """Write samples as a 16-bit PCM mono WAV file."""
    atomic_write_bytes(path, encode_wav(samples, rate))


############
# Manifest #
############

def load_manifest(path: PathLike) -> Manifest:
    """Parse a manifest CSV.

    The header must read `path,start_s,end_s,f1,f2,f3,f4,domain`. An empty
    formant cell masks that formant out, so rows with only F1 and
    F2 load with mask `(1, 1, 0, 0)`. The trailing `domain` cell may be left
    out entirely; the domain is then empty.

    Raises:
        DataError: The file is missing, the header is wrong, or a row is malformed
            (the message names the line).
    """
    target = pathlib.Path(path)
    try:
        text = target.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read manifest {target}: {e.strerror or e}") from None
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(cell.strip() for cell in header) != MANIFEST_HEADER:
        raise DataError(f"{target}: line 1: expected header {','.join(MANIFEST_HEADER)}")
    entries = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        entries.append(_parse_row(row, target, line))
    logger.debug("loaded %d manifest entries from %s", len(entries), target)
    return Manifest(tuple(entries), target.stem, target.parent)


def _parse_row(row: t.List[str], source: pathlib.Path, line: int) -> ManifestEntry:
    n_cells = len(MANIFEST_HEADER)
    if len(row) == n_cells - 1:
        row = row + [""]
    if len(row) != n_cells:
        raise DataError(f"{source}: line {line}: expected {n_cells - 1} or {n_cells} cells, got {len(row)}")
    path, start, end, f1, f2, f3, f4, domain = (cell.strip() for cell in row)
    try:
        if not path:
            raise DataError("empty audio path")
        formants = [Option.from_nullable(cell or None).map(float) for cell in (f1, f2, f3, f4)]
        return ManifestEntry(path, float(start), float(end), FormantTargets.from_options(formants), domain)
    except ValueError as e:
        raise DataError(f"{source}: line {line}: {e}") from None
    except DataError as e:
        raise DataError(f"{source}: line {line}: {e.msg}") from None


def _format_formant(value: Option[float]) -> str:
    return value.map_or("", lambda v: f"{v:.2f}")


def manifest_to_csv(m: Manifest) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(MANIFEST_HEADER)
    for entry in m.entries:
        writer.writerow(
            [entry.path, repr(float(entry.start_s)), repr(float(entry.end_s))]
            + [_format_formant(entry.formant(i)) for i in range(N_FORMANTS)]
            + [entry.domain]
        )
    return buffer.getvalue()


def save_manifest(m: Manifest, path: PathLike) -> None:
    """Write a manifest CSV; formants are written in Hz with 2 decimals."""
    atomic_write_text(path, manifest_to_csv(m))


#########
# Model #
#########

def _dump_json(obj: t.Dict[str, t.Any]) -> bytes:
    data = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack("<I", len(data)) + data


def serialize_model(model: AnyModel) -> bytes:
    """Exact binary image of a core or domain-adaptation model."""
    core = model.core if isinstance(model, DaModel) else model
    kind = _KIND_DA if isinstance(model, DaModel) else _KIND_CORE
    parts = [struct.pack("<4sIB", MODEL_MAGIC, MODEL_VERSION, kind), struct.pack("<I", len(core.layers))]
    for layer in core.layers:
        parts.append(struct.pack("<IIB", layer.fan_in, layer.fan_out, _ACTIVATION_CODES[layer.activation]))
    normalizer = core.normalizer
    parts.append(struct.pack("<d", normalizer.target_scale))
    parts.append(normalizer.feature_mean.astype("<f8").tobytes())
    parts.append(normalizer.feature_std.astype("<f8").tobytes())
    parts.append(_dump_json(core.provenance))
    params = core.parameters()
    if isinstance(model, DaModel):
        parts.append(_dump_json(model.provenance))
        params = params + model.adapter.parameters()
    flat = np.concatenate([np.asarray(p, dtype=np.float64).reshape(-1) for p in params])
    parts.append(struct.pack("<Q", flat.size))
    parts.append(flat.astype("<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise DataError("model file is truncated")
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str) -> t.Tuple[t.Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def doubles(self, n: int) -> FloatArray:
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)

    def json(self) -> t.Dict[str, t.Any]:
        (length,) = self.unpack("<I")
        try:
            return json.loads(self.take(length).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise DataError(f"model provenance is not valid JSON: {e}") from None


def deserialize_model(data: bytes) -> AnyModel:
    """Inverse of `serialize_model`.

    Raises:
        DataError: Wrong magic or version, truncation, trailing bytes, or a
            parameter count that disagrees with the architecture.
    """
    reader = _Reader(data)
    magic, version, kind = reader.unpack("<4sIB")
    if magic != MODEL_MAGIC:
        raise DataError(f"not a model file (magic {magic!r})")
    if version != MODEL_VERSION:
        raise DataError(f"model format version {version} is not supported (expected {MODEL_VERSION})")
    if kind not in (_KIND_CORE, _KIND_DA):
        raise DataError(f"unknown model kind {kind}")
    (n_layers,) = reader.unpack("<I")
    if n_layers < 1:
        raise DataError("model declares no layers")
    shapes = []
    for _ in range(n_layers):
        fan_in, fan_out, code = reader.unpack("<IIB")
        if code not in _ACTIVATION_NAMES:
            raise DataError(f"unknown activation code {code}")
        shapes.append((fan_in, fan_out, _ACTIVATION_NAMES[code]))
    dim = shapes[0][0]
    (target_scale,) = reader.unpack("<d")
    mean = reader.doubles(dim)
    std = reader.doubles(dim)
    core_provenance = reader.json()
    da_provenance = reader.json() if kind == _KIND_DA else {}

    expected = sum(fan_out * fan_in + fan_out for fan_in, fan_out, _ in shapes)
    if kind == _KIND_DA:
        expected += N_FORMANTS * N_FORMANTS + 2 * N_FORMANTS + dim + 1
    (count,) = reader.unpack("<Q")
    if count != expected:
        raise DataError(f"parameter count mismatch: file declares {count}, architecture needs {expected}")
    flat = reader.doubles(count)
    if reader.offset != len(data):
        raise DataError(f"{len(data) - reader.offset} unexpected trailing bytes in model file")

    offset = 0

    def take(n: int) -> FloatArray:
        nonlocal offset
        chunk = flat[offset:offset + n].copy()
        offset += n
        return chunk

    layers = []
    for fan_in, fan_out, activation in shapes:
        weights = take(fan_in * fan_out).reshape(fan_out, fan_in)
        layers.append(DenseLayer(weights, take(fan_out), activation))
    core = CoreModel(layers, Normalizer(mean, std, target_scale), core_provenance)
    if kind == _KIND_CORE:
        return core
    W = take(N_FORMANTS * N_FORMANTS).reshape(N_FORMANTS, N_FORMANTS)
    b = take(N_FORMANTS)
    v = take(N_FORMANTS)
    w_s = take(dim)
    b_s = float(take(1)[0])
    return DaModel(core, AdaptationLayer(w_s, b_s, W, b, v), da_provenance)


def save_model(model: AnyModel, path: PathLike) -> None:
    atomic_write_bytes(path, serialize_model(model))
    logger.debug("saved %s model to %s", model.label, path)


def load_model(path: PathLike) -> AnyModel:
    """Load a model written by `save_model`.

    Raises:
        DataError: The file is missing or fails any format check.
    """
    target = pathlib.Path(path)
    try:
        data = target.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read model {target}: {e.strerror or e}") from None
    return deserialize_model(data)
