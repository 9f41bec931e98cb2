"""Deterministic DSP primitives for the feature front end.

Every function here is pure: identical inputs give bitwise-identical outputs,
and nothing keeps state between calls.

Conventions used throughout:

- the analysis rate is 16 kHz; `preprocess` brings other rates there;
- the LPC inverse filter is `A(z) = 1 + sum_k a_k z^-k`;
- LPC analysis runs on the whole segment after pre-emphasis and a Hamming
  window, while pitch estimation and the pitch-synchronous spectrum use the
  raw (preprocessed) samples;
- the pitch-synchronous spectrum accepts periods of 16 to 512 samples: one
  period must fit a single 512-point transform.
"""
import dataclasses
import logging
import typing as t
from fractions import Fraction

import numpy as np
import scipy.fft
import scipy.signal
from monad_std import Option

from .error import DataError, NumericError
from .typedef.array import ArrayLike, BoolArray, FloatArray

__all__ = [
    "SAMPLE_RATE",
    "SUPPORTED_RATES",
    "SPECTRUM_SIZE",
    "SPECTRUM_BINS",
    "FormantTargets",
    "Segment",
    "LpcModel",
    "LogSpectrum",
    "preprocess",
    "pre_emphasis",
    "lpc_front_end",
    "autocorrelation",
    "levinson_durbin",
    "lpc_analysis",
    "lpc_to_cepstrum",
    "estimate_median_pitch",
    "pitch_sync_spectrum",
    "dct_ii",
]

logger = logging.getLogger(__name__)

SAMPLE_RATE = 16000
SUPPORTED_RATES = (8000, 11025, 16000, 22050, 44100, 48000)

PRE_EMPHASIS = 0.97
REFLECTION_LIMIT = 1.0 + 1e-9

PITCH_FRAME_S = 0.030
PITCH_HOP_S = 0.010
PITCH_MIN_HZ = 60.0
PITCH_MAX_HZ = 400.0
VOICING_THRESHOLD = 0.3
FALLBACK_PITCH_HZ = 100.0

SPECTRUM_SIZE = 512
SPECTRUM_BINS = SPECTRUM_SIZE // 2 + 1
MIN_PERIOD = 16
LOG_FLOOR = 1e-10


@dataclasses.dataclass(frozen=True, eq=False)
class FormantTargets:
    """Reference formants F1..F4 in Hz with a present/absent mask.

    Absent formants hold `nan` in `values`. Present formants are positive and
    strictly increasing.
    """
    values: FloatArray
    mask: BoolArray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        mask = np.asarray(self.mask, dtype=np.bool_).reshape(-1)
        if values.shape != (4,) or mask.shape != (4,):
            raise DataError(f"formant targets need 4 values and 4 mask flags, got {values.size} and {mask.size}")
        present = values[mask]
        if np.any(~np.isfinite(present)) or np.any(present <= 0):
            raise DataError(f"present formants must be finite and positive: {present.tolist()}")
        if np.any(np.diff(present) <= 0):
            raise DataError(f"present formants must be strictly increasing: {present.tolist()}")
        values = np.where(mask, values, np.nan)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @staticmethod
    def from_options(formants: t.Sequence[Option[float]]) -> "FormantTargets":
        """Build targets from four optional values.

        Examples:
            ```python
            targets = FormantTargets.from_options([Option.some(500.0), Option.some(1500.0), Option.none(), Option.none()])
            assert targets.mask.tolist() == [True, True, False, False]
            ```
        """
        if len(formants) != 4:
            raise DataError(f"expected 4 formant slots, got {len(formants)}")
        return FormantTargets(
            np.array([f.unwrap_or(np.nan) for f in formants], dtype=np.float64),
            np.array([f.is_some() for f in formants], dtype=np.bool_),
        )

    def get(self, index: int) -> Option[float]:
        """Formant `index` (0-based) in Hz, or `Option.none()` when masked out."""
        if self.mask[index]:
            return Option.some(float(self.values[index]))
        return Option.none()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FormantTargets):
            return NotImplemented
        return bool(np.array_equal(self.mask, other.mask)
                    and np.array_equal(self.values[self.mask], other.values[other.mask]))


@dataclasses.dataclass(frozen=True, eq=False)
class Segment:
    """A mono audio span that is treated as stationary."""
    samples: FloatArray
    sample_rate: int
    domain_label: Option[str] = dataclasses.field(default_factory=Option.none)
    targets: Option[FormantTargets] = dataclasses.field(default_factory=Option.none)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if samples.size == 0:
            raise DataError("segment has no samples")
        if int(self.sample_rate) <= 0:
            raise DataError(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def with_samples(self, samples: ArrayLike) -> "Segment":
        """A copy of this segment holding other samples."""
        return dataclasses.replace(self, samples=np.asarray(samples, dtype=np.float64))


@dataclasses.dataclass(frozen=True, eq=False)
class LpcModel:
    """All-pole model `gain / A(z)` with `A(z) = 1 + sum_k a_k z^-k`."""
    order: int
    coefficients: FloatArray
    gain: float

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=np.float64).reshape(-1)
        if self.order < 1 or coefficients.size != self.order:
            raise DataError(f"LPC order {self.order} does not match {coefficients.size} coefficients")
        if not self.gain >= 0:
            raise NumericError(f"LPC gain must be non-negative, got {self.gain}")
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def polynomial(self) -> FloatArray:
        """The full inverse filter `[1, a_1, ..., a_p]`."""
        return np.concatenate(([1.0], self.coefficients))


@dataclasses.dataclass(frozen=True, eq=False)
class LogSpectrum:
    """Natural-log magnitude spectrum on 257 uniform bins from 0 to Nyquist."""
    values: FloatArray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.size != SPECTRUM_BINS:
            raise DataError(f"log spectrum must have {SPECTRUM_BINS} bins, got {values.size}")
        object.__setattr__(self, "values", values)

    def bin_hz(self, sample_rate: int = SAMPLE_RATE) -> FloatArray:
        """Centre frequency of every bin."""
        return np.arange(SPECTRUM_BINS) * sample_rate / SPECTRUM_SIZE


def preprocess(
        raw: ArrayLike,
        rate: int,
        domain_label: Option[str] = Option.none(),
        targets: Option[FormantTargets] = Option.none(),
) -> Segment:
    """Bring raw audio to the analysis format.

    The signal is resampled to 16 kHz with a windowed-sinc polyphase filter,
    its mean is removed and it is scaled to a peak magnitude of 1 (all-zero
    input stays all-zero).

    Args:
        raw: Mono samples, nominally in `[-1, 1]`.
        rate: Sample rate of `raw`; one of `SUPPORTED_RATES`.
        domain_label: Optional domain tag carried by the segment.
        targets: Optional reference formants carried by the segment.

    Raises:
        DataError: The input is empty or the rate is unsupported.

    Examples:
        ```python
        seg = preprocess(np.full(800, 0.5), 16000)
        assert not seg.samples.any()
        assert preprocess(np.ones(100), 8000).samples.size == 200
        ```
    """
    x = np.asarray(raw, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise DataError("cannot preprocess an empty signal")
    if rate not in SUPPORTED_RATES:
        raise DataError(f"unsupported sample rate {rate} Hz, expected one of {SUPPORTED_RATES}")
    if rate != SAMPLE_RATE:
        ratio = Fraction(SAMPLE_RATE, rate)
        x = scipy.signal.resample_poly(x, ratio.numerator, ratio.denominator)
    x = x - np.mean(x)
    peak = np.max(np.abs(x))
    if peak > 0:
        x = x / peak
    return Segment(x, SAMPLE_RATE, domain_label, targets)


def pre_emphasis(x: ArrayLike, coefficient: float = PRE_EMPHASIS) -> FloatArray:
    """First-order high-pass `y[n] = x[n] - coefficient * x[n-1]`."""
    x = np.asarray(x, dtype=np.float64)
    return np.concatenate((x[:1], x[1:] - coefficient * x[:-1]))


def lpc_front_end(samples: ArrayLike) -> FloatArray:
    """Pre-emphasis followed by a Hamming window over the whole span."""
    x = pre_emphasis(samples)
    return x * np.hamming(x.size)


def autocorrelation(frame: ArrayLike, max_lag: int) -> FloatArray:
    """Biased, unnormalized autocorrelation `r_k = sum_n x_n x_{n+k}` for `k = 0..max_lag`.

    Raises:
        DataError: `max_lag` is negative or not shorter than the frame.

    Examples:
        ```python
        assert autocorrelation([1.0, 0.0, 0.0, 0.0], 2).tolist() == [1.0, 0.0, 0.0]
        ```
    """
    x = np.asarray(frame, dtype=np.float64).reshape(-1)
    n = x.size
    if max_lag < 0 or max_lag >= n:
        raise DataError(f"max lag {max_lag} must lie in [0, {n})")
    return np.array([np.dot(x[:n - k], x[k:]) for k in range(max_lag + 1)], dtype=np.float64)


def levinson_durbin(r: ArrayLike, p: int) -> LpcModel:
    """Solve the Yule-Walker equations of order `p` by the Levinson-Durbin recursion.

    Args:
        r: Autocorrelation `r_0..r_m` with `m >= p`.
        p: Model order.

    Returns:
        The LPC model; `gain` is the final prediction-error power.

    Raises:
        DataError: `p` is out of range for `r`.
        NumericError: `r_0 <= 0` (silent frame) or a reflection coefficient
            reaches magnitude `1 + 1e-9`.

    Examples:
        ```python
        model = levinson_durbin([1.0, 0.0, 0.0, 0.0, 0.0], 4)
        assert model.coefficients.tolist() == [0.0] * 4 and model.gain == 1.0
        ```
    """
    r = np.asarray(r, dtype=np.float64).reshape(-1)
    if p < 1 or p > r.size - 1:
        raise DataError(f"LPC order {p} needs at least {p + 1} autocorrelation values, got {r.size}")
    if not r[0] > 0:
        raise NumericError("silent frame: zero-lag autocorrelation is not positive")
    a = np.zeros(p, dtype=np.float64)
    err = float(r[0])
    for i in range(p):
        if err <= 0:
            raise NumericError(f"prediction error vanished at order {i}")
        acc = r[i + 1] + np.dot(a[:i], r[i:0:-1])
        k = -acc / err
        if abs(k) >= REFLECTION_LIMIT:
            raise NumericError(f"unstable recursion: reflection coefficient {k:.12g} at order {i + 1}")
        a[:i] = a[:i] + k * a[:i][::-1]
        a[i] = k
        err = max(err * (1.0 - k * k), 0.0)
    return LpcModel(p, a, err)


def lpc_analysis(samples: ArrayLike, orders: t.Iterable[int]) -> t.List[LpcModel]:
    """LPC models of several orders on the pre-emphasized, Hamming-windowed span.

    The autocorrelation is computed once up to the largest order.
    """
    orders = list(orders)
    r = autocorrelation(lpc_front_end(samples), max(orders))
    return [levinson_durbin(r, p) for p in orders]


def lpc_to_cepstrum(model: LpcModel, n: int = 30) -> FloatArray:
    """LPC cepstrum `c_1..c_n` by the Atal recursion.

    The gain term `c_0` is not part of the output.

    Examples:
        ```python
        model = LpcModel(1, np.array([-0.9]), 1.0)
        assert abs(lpc_to_cepstrum(model, 1)[0] - 0.9) < 1e-15
        ```
    """
    if n < 1:
        raise DataError(f"cepstrum length must be at least 1, got {n}")
    a = model.coefficients
    p = model.order
    c = np.zeros(n + 1, dtype=np.float64)
    for m in range(1, n + 1):
        acc = 0.0
        for k in range(max(1, m - p), m):
            acc += k * c[k] * a[m - k - 1]
        c[m] = (-a[m - 1] if m <= p else 0.0) - acc / m
    return c[1:]


def estimate_median_pitch(seg: Segment) -> int:
    """Median pitch period of a segment, in samples.

    The segment is cut into 30 ms frames with a 10 ms hop. Each frame's period is
    the lag maximizing the normalized autocorrelation between 60 Hz and 400 Hz;
    frames whose peak stays below 0.3 are unvoiced and skipped. With no voiced
    frame the 100 Hz period is returned.

    Raises:
        DataError: The segment is shorter than one 30 ms frame.

    Examples:
        ```python
        train = np.zeros(8000)
        train[::160] = 1.0
        assert estimate_median_pitch(Segment(train, 16000)) == 160
        ```
    """
    rate = seg.sample_rate
    frame_len = int(round(PITCH_FRAME_S * rate))
    hop = int(round(PITCH_HOP_S * rate))
    lo = int(round(rate / PITCH_MAX_HZ))
    hi = min(int(round(rate / PITCH_MIN_HZ)), frame_len - 1)
    fallback = int(round(rate / FALLBACK_PITCH_HZ))
    x = seg.samples
    if x.size < frame_len:
        raise DataError(f"segment of {x.size} samples is shorter than one {frame_len}-sample pitch frame")

    periods = []
    for start in range(0, x.size - frame_len + 1, hop):
        r = autocorrelation(x[start:start + frame_len], hi)
        if r[0] <= 0:
            continue
        normalized = r[lo:hi + 1] / r[0]
        best = int(np.argmax(normalized))
        if normalized[best] < VOICING_THRESHOLD:
            continue
        periods.append(lo + best)

    if not periods:
        logger.debug("no voiced frame found, falling back to %d samples", fallback)
        return fallback
    return int(np.floor(np.median(periods) + 0.5))


def pitch_sync_spectrum(seg: Segment, period: int) -> LogSpectrum:
    """Quasi pitch-synchronous log spectrum.

    Non-overlapping frames of exactly `period` samples tile the segment (a partial
    last frame is dropped). Each frame is zero-padded to 512 points and
    transformed; the magnitude spectra are averaged and log-compressed with a
    floor of `1e-10`.

    Raises:
        DataError: `period` is below 16 or above 512, or the segment is shorter
            than one period.
    """
    if period < MIN_PERIOD or period > SPECTRUM_SIZE:
        raise DataError(f"pitch period must lie in [{MIN_PERIOD}, {SPECTRUM_SIZE}], got {period}")
    n_frames = seg.samples.size // period
    if n_frames == 0:
        raise DataError(f"segment of {seg.samples.size} samples is shorter than one period of {period}")
    frames = seg.samples[:n_frames * period].reshape(n_frames, period)
    magnitude = np.abs(scipy.fft.rfft(frames, n=SPECTRUM_SIZE, axis=1)).mean(axis=0)
    return LogSpectrum(np.log(np.maximum(magnitude, LOG_FLOOR)))


def dct_ii(x: ArrayLike, n_out: int) -> FloatArray:
    """Orthonormal DCT-II, truncated to the first `n_out` coefficients.

    Examples:
        ```python
        coefficients = dct_ii(np.ones(257), 3)
        assert abs(coefficients[0] - np.sqrt(257)) < 1e-12
        ```
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if n_out < 1 or n_out > x.size:
        raise DataError(f"cannot take {n_out} DCT coefficients of a length-{x.size} vector")
    return scipy.fft.dct(x, type=2, norm="ortho")[:n_out]
