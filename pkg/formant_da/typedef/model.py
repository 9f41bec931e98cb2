import typing as t

from .array import FloatArray

if t.TYPE_CHECKING:
    from ..dsp import Segment


@t.runtime_checkable
class FormantEstimator(t.Protocol):
    """Anything that maps segments to formant estimates in Hz.

    `estimate_hz` returns an `(n, 4)` array. Absent estimates are `nan`.
    """
    label: str

    def estimate_hz(self, segments: t.Sequence["Segment"]) -> FloatArray: ...
