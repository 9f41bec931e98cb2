"""Source-filter vowel synthesis with exact formant ground truth.

An impulse train at the fundamental excites a cascade of four second-order
all-pole resonators. The ground truth of every synthesized vowel is the
*specified* pole frequencies; the small shift of spectral peaks away from
closely spaced poles is a known bias, absorbed by evaluation tolerances.
"""
import dataclasses
import json
import logging
import pathlib
import typing as t

import numpy as np
import scipy.signal
from monad_std import Option

from .dataio import save_manifest, write_wav
from .dsp import SAMPLE_RATE, FormantTargets, Segment
from .error import DataError, UsageError
from .manifest import Manifest, ManifestEntry
from .typedef.array import ArrayLike, FloatArray

__all__ = [
    "MIN_SEPARATION_HZ",
    "VowelSpec",
    "DomainSpec",
    "BUILTIN_DOMAINS",
    "builtin_domain",
    "resolve_domain",
    "make_source",
    "resonator_coefficients",
    "resonator_cascade",
    "synthesize_vowel",
    "sample_domain",
    "generate_corpus",
]

logger = logging.getLogger(__name__)

F0_LIMITS = (60.0, 400.0)
BANDWIDTH_LIMITS = (20.0, 500.0)
FORMANT_CEILING = 7600.0
MIN_SEPARATION_HZ = 150.0
MAX_ATTEMPTS = 1000
MANIFEST_NAME = "manifest.csv"

Range = t.Tuple[float, float]


@dataclasses.dataclass(frozen=True)
class VowelSpec:
    """Synthesis parameters of one vowel."""
    f0: float
    formants: t.Tuple[float, float, float, float]
    bandwidths: t.Tuple[float, float, float, float]
    duration: float = 0.3
    noise_snr_db: Option[float] = dataclasses.field(default_factory=Option.none)

    def __post_init__(self):
        object.__setattr__(self, "formants", tuple(float(f) for f in self.formants))
        object.__setattr__(self, "bandwidths", tuple(float(b) for b in self.bandwidths))
        if not F0_LIMITS[0] <= self.f0 <= F0_LIMITS[1]:
            raise DataError(f"f0 {self.f0} Hz outside {F0_LIMITS}")
        if len(self.formants) != 4 or len(self.bandwidths) != 4:
            raise DataError("a vowel needs exactly 4 formants and 4 bandwidths")
        if any(not 0 < f < FORMANT_CEILING for f in self.formants):
            raise DataError(f"formants {self.formants} must lie in (0, {FORMANT_CEILING}) Hz")
        if any(b <= a for a, b in zip(self.formants, self.formants[1:])):
            raise DataError(f"formants {self.formants} must be strictly increasing")
        if any(not BANDWIDTH_LIMITS[0] <= b <= BANDWIDTH_LIMITS[1] for b in self.bandwidths):
            raise DataError(f"bandwidths {self.bandwidths} must lie in {BANDWIDTH_LIMITS} Hz")
        if not self.duration > 0:
            raise DataError(f"duration must be positive, got {self.duration}")

    @property
    def targets(self) -> FormantTargets:
        return FormantTargets(np.array(self.formants), np.ones(4, dtype=np.bool_))


@dataclasses.dataclass(frozen=True)
class DomainSpec:
    """Uniform sampling ranges describing one synthetic speaker domain."""
    name: str
    f0_range: Range
    formant_ranges: t.Tuple[Range, Range, Range, Range]
    bandwidth_ranges: t.Tuple[Range, Range, Range, Range]
    duration: float = 0.3
    noise_snr_db: Option[float] = dataclasses.field(default_factory=Option.none)

    def __post_init__(self):
        object.__setattr__(self, "f0_range", _as_range(self.f0_range))
        object.__setattr__(self, "formant_ranges", tuple(_as_range(r) for r in self.formant_ranges))
        object.__setattr__(self, "bandwidth_ranges", tuple(_as_range(r) for r in self.bandwidth_ranges))
        if not self.name:
            raise UsageError("a domain needs a name")
        if len(self.formant_ranges) != 4 or len(self.bandwidth_ranges) != 4:
            raise UsageError(f"domain {self.name!r} needs 4 formant ranges and 4 bandwidth ranges")
        for lo, hi in (self.f0_range,) + self.formant_ranges + self.bandwidth_ranges:
            if lo > hi:
                raise UsageError(f"domain {self.name!r} has an empty range ({lo}, {hi})")
        if self.f0_range[0] < F0_LIMITS[0] or self.f0_range[1] > F0_LIMITS[1]:
            raise UsageError(f"domain {self.name!r}: f0 range must lie within {F0_LIMITS}")
        if any(lo <= 0 or hi >= FORMANT_CEILING for lo, hi in self.formant_ranges):
            raise UsageError(f"domain {self.name!r}: formant ranges must lie within (0, {FORMANT_CEILING})")
        if any(lo < BANDWIDTH_LIMITS[0] or hi > BANDWIDTH_LIMITS[1] for lo, hi in self.bandwidth_ranges):
            raise UsageError(f"domain {self.name!r}: bandwidth ranges must lie within {BANDWIDTH_LIMITS}")
        lowest = self.formant_ranges[0][0]
        for lo, hi in self.formant_ranges[1:]:
            lowest = max(lo, lowest + MIN_SEPARATION_HZ)
            if lowest > hi:
                raise UsageError(f"domain {self.name!r}: formant ranges cannot keep {MIN_SEPARATION_HZ} Hz separation")
        if not self.duration > 0:
            raise UsageError(f"domain {self.name!r}: duration must be positive")

    @staticmethod
    def from_dict(raw: t.Mapping[str, t.Any]) -> "DomainSpec":
        try:
            return DomainSpec(
                name=str(raw["name"]),
                f0_range=tuple(raw["f0_range"]),
                formant_ranges=tuple(tuple(r) for r in raw["formant_ranges"]),
                bandwidth_ranges=tuple(tuple(r) for r in raw["bandwidth_ranges"]),
                duration=float(raw.get("duration", 0.3)),
                noise_snr_db=Option.from_nullable(raw.get("noise_snr_db")).map(float),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise UsageError(f"invalid domain description: {e}") from None

    @staticmethod
    def from_json(path: t.Union[str, pathlib.Path]) -> "DomainSpec":
        """Read a domain from a JSON file with the field names of this class.

        Raises:
            DataError: The file cannot be read or parsed.
            UsageError: The description is incomplete or inconsistent.
        """
        try:
            raw = json.loads(pathlib.Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(f"cannot read domain file {path}: {e}") from None
        if not isinstance(raw, dict):
            raise UsageError(f"domain file {path} must hold a JSON object")
        return DomainSpec.from_dict(raw)


def _as_range(r: t.Sequence[float]) -> Range:
    lo, hi = r
    return float(lo), float(hi)


BUILTIN_DOMAINS: t.Dict[str, DomainSpec] = {
    "adult_male": DomainSpec(
        name="adult_male",
        f0_range=(80.0, 160.0),
        formant_ranges=((260.0, 860.0), (850.0, 2300.0), (1900.0, 3200.0), (3200.0, 4200.0)),
        bandwidth_ranges=((50.0, 110.0), (60.0, 130.0), (80.0, 180.0), (100.0, 250.0)),
    ),
    "adult_female": DomainSpec(
        name="adult_female",
        f0_range=(150.0, 280.0),
        formant_ranges=((300.0, 1000.0), (1000.0, 2800.0), (2300.0, 3600.0), (3600.0, 4800.0)),
        bandwidth_ranges=((60.0, 130.0), (70.0, 150.0), (100.0, 200.0), (120.0, 280.0)),
    ),
    "child": DomainSpec(
        name="child",
        f0_range=(200.0, 400.0),
        formant_ranges=((380.0, 1200.0), (1200.0, 3200.0), (2800.0, 4300.0), (4000.0, 5500.0)),
        bandwidth_ranges=((70.0, 150.0), (90.0, 180.0), (120.0, 250.0), (150.0, 300.0)),
    ),
}


def builtin_domain(name: str) -> DomainSpec:
    """One of `adult_male`, `adult_female`, `child`.

    Raises:
        UsageError: Unknown name.
    """
    try:
        return BUILTIN_DOMAINS[name]
    except KeyError:
        raise UsageError(f"unknown domain {name!r}, expected one of {sorted(BUILTIN_DOMAINS)} or a JSON file") from None


def resolve_domain(name_or_path: str) -> DomainSpec:
    """A built-in domain by name, or a domain read from a JSON file."""
    if name_or_path in BUILTIN_DOMAINS:
        return BUILTIN_DOMAINS[name_or_path]
    if name_or_path.endswith(".json"):
        return DomainSpec.from_json(name_or_path)
    return builtin_domain(name_or_path)


def make_source(f0: float, duration: float, rate: int = SAMPLE_RATE) -> FloatArray:
    """Unit impulse train with period `round(rate / f0)` samples.

    Raises:
        DataError: The duration yields no samples.

    Examples:
        ```python
        source = make_source(100.0, 0.1, 16000)
        assert np.flatnonzero(source).tolist() == list(range(0, 1600, 160))
        ```
    """
    n = int(round(duration * rate))
    if n <= 0:
        raise DataError(f"duration {duration} s gives an empty source")
    period = max(int(round(rate / f0)), 1)
    source = np.zeros(n, dtype=np.float64)
    source[::period] = 1.0
    return source


def resonator_coefficients(frequency: float, bandwidth: float, rate: int = SAMPLE_RATE) -> t.Tuple[FloatArray, FloatArray]:
    """`(b, a)` of one all-pole section `1 / (1 - 2 r cos(theta) z^-1 + r^2 z^-2)`."""
    r = np.exp(-np.pi * bandwidth / rate)
    theta = 2.0 * np.pi * frequency / rate
    return np.array([1.0]), np.array([1.0, -2.0 * r * np.cos(theta), r * r])


def resonator_cascade(source: ArrayLike, spec: VowelSpec, rate: int = SAMPLE_RATE) -> FloatArray:
    """Filter `source` through the four formant resonators and peak-normalize."""
    y = np.asarray(source, dtype=np.float64)
    for frequency, bandwidth in zip(spec.formants, spec.bandwidths):
        b, a = resonator_coefficients(frequency, bandwidth, rate)
        y = scipy.signal.lfilter(b, a, y)
    return _peak_normalize(y)


def _peak_normalize(y: FloatArray) -> FloatArray:
    peak = np.max(np.abs(y)) if y.size else 0.0
    return y / peak if peak > 0 else y


def synthesize_vowel(
        spec: VowelSpec,
        rate: int = SAMPLE_RATE,
        rng: t.Optional[np.random.Generator] = None,
        domain_label: Option[str] = Option.none(),
) -> Segment:
    """Synthesize one vowel, adding white noise at `spec.noise_snr_db` when set.

    The result carries the specified formants as its targets.
    """
    y = resonator_cascade(make_source(spec.f0, spec.duration, rate), spec, rate)
    if spec.noise_snr_db.is_some():
        generator = rng if rng is not None else np.random.default_rng(0)
        noise_power = np.mean(y * y) / 10.0 ** (spec.noise_snr_db.unwrap() / 10.0)
        y = _peak_normalize(y + np.sqrt(noise_power) * generator.standard_normal(y.size))
    return Segment(y, rate, domain_label, Option.some(spec.targets))


def sample_domain(d: DomainSpec, rng: np.random.Generator) -> VowelSpec:
    """Draw a vowel uniformly from a domain's ranges.

    Values are rounded to 0.01 Hz so they survive the manifest's 2-decimal
    format. Formant draws are rejected until they are strictly increasing with at
    least 150 Hz between neighbours.

    Raises:
        UsageError: No valid draw within 1000 attempts.
    """
    for _ in range(MAX_ATTEMPTS):
        f0 = round(float(rng.uniform(*d.f0_range)), 2)
        formants = [round(float(rng.uniform(lo, hi)), 2) for lo, hi in d.formant_ranges]
        bandwidths = [round(float(rng.uniform(lo, hi)), 2) for lo, hi in d.bandwidth_ranges]
        if all(b - a >= MIN_SEPARATION_HZ for a, b in zip(formants, formants[1:])):
            return VowelSpec(f0, tuple(formants), tuple(bandwidths), d.duration, d.noise_snr_db)
    raise UsageError(f"domain {d.name!r}: no valid formant draw after {MAX_ATTEMPTS} attempts")


def generate_corpus(d: DomainSpec, n: int, seed: int, out_dir: t.Union[str, pathlib.Path], rate: int = SAMPLE_RATE) -> Manifest:
    """Write `n` synthetic vowels and their manifest (`manifest.csv`) into `out_dir`.

    Audio paths in the manifest are relative to `out_dir`, so two corpora built
    from the same `(d, n, seed)` have identical manifests wherever they live.

    Raises:
        UsageError: `n < 1`.
        DataError: The directory cannot be written.
    """
    if n < 1:
        raise UsageError(f"corpus size must be at least 1, got {n}")
    root = pathlib.Path(out_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(f"cannot create {root}: {e.strerror or e}") from None
    rng = np.random.default_rng(seed)
    entries = []
    for index in range(n):
        spec = sample_domain(d, rng)
        segment = synthesize_vowel(spec, rate, rng, Option.some(d.name))
        filename = f"{d.name}_{index:05d}.wav"
        write_wav(root / filename, segment.samples, rate)
        entries.append(ManifestEntry(filename, 0.0, segment.samples.size / rate, spec.targets, d.name))
    manifest = Manifest(tuple(entries), d.name, root)
    save_manifest(manifest, root / MANIFEST_NAME)
    logger.debug("generated %d %s vowels in %s", n, d.name, root)
    return manifest
