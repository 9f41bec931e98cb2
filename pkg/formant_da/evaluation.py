"""Evaluation: MAE reports, selection-neuron histograms and the LPC-root baseline.

Reports and histograms are plain data with CSV exporters; `render_table` lays
several reports out as a dataset x method table of F1..F3 errors.
"""
import csv
import dataclasses
import io
import logging
import math
import typing as t

import numpy as np
from monad_std import Option, Result

from . import dsp
from .adaptation import DaModel
from .error import DataError
from .manifest import Manifest
from .nn.model import N_FORMANTS
from .training import load_segments
from .typedef.array import FloatArray
from .typedef.model import FormantEstimator

__all__ = [
    "EVALUATED_FORMANTS",
    "N_BUCKETS",
    "EvalCell",
    "EvalReport",
    "GateHistogram",
    "LpcRootBaseline",
    "mae_report",
    "render_table",
    "reports_to_csv",
    "s_histogram",
    "gate_concentration",
    "lpc_root_baseline",
]

logger = logging.getLogger(__name__)

EVALUATED_FORMANTS = 3
"""F4 is predicted and reported, but only F1..F3 count as evaluative."""
N_BUCKETS = 10

BASELINE_ORDER = 12
BASELINE_MIN_HZ = 90.0
BASELINE_MAX_HZ = 4000.0
BASELINE_MAX_BANDWIDTH_HZ = 400.0

REPORT_HEADER = ("method", "domain", "formant", "mae_hz", "count", "evaluative")
HISTOGRAM_HEADER = ("bucket_lo", "bucket_hi", "count")


@dataclasses.dataclass(frozen=True)
class EvalCell:
    domain: str
    formant: int
    """1-based formant number."""
    mae_hz: float
    count: int

    @property
    def evaluative(self) -> bool:
        return self.formant <= EVALUATED_FORMANTS


@dataclasses.dataclass(frozen=True)
class EvalReport:
    """Per-domain, per-formant mean absolute error of one method.

    Only cells with at least one evaluated segment are present.
    """
    method: str
    cells: t.Tuple[EvalCell, ...]

    def domains(self) -> t.List[str]:
        return list(dict.fromkeys(cell.domain for cell in self.cells))

    def cell(self, domain: str, formant: int) -> Option[EvalCell]:
        for c in self.cells:
            if c.domain == domain and c.formant == formant:
                return Option.some(c)
        return Option.none()

    def mae(self, domain: str, formant: int) -> Option[float]:
        return self.cell(domain, formant).map(lambda c: c.mae_hz)

    def to_csv_rows(self) -> t.List[t.List[str]]:
        """Rows under `REPORT_HEADER`, MAE with 2 decimals."""
        return [
            [self.method, c.domain, f"F{c.formant}", f"{c.mae_hz:.2f}", str(c.count), str(c.evaluative).lower()]
            for c in self.cells
        ]


def reports_to_csv(reports: t.Sequence[EvalReport]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for report in reports:
        writer.writerows(report.to_csv_rows())
    return buffer.getvalue()


def mae_report(
        model: FormantEstimator,
        manifest: Manifest,
        formants: t.Optional[t.Sequence[int]] = None,
) -> EvalReport:
    """MAE in Hz of `model` on `manifest`, per domain and formant.

    A segment counts towards formant `i` when its target `i` is present and the
    model produced an estimate (the baseline may not). Sums are exact
    (`math.fsum`), so the report does not depend on the manifest order.

    Args:
        model: Anything with `label` and `estimate_hz`.
        manifest: Labelled segments.
        formants: 1-based formant numbers; by default every formant with at least
            one present target.

    Raises:
        DataError: The manifest is empty, or a requested formant has no present
            target.
    """
    if len(manifest) == 0:
        raise DataError(f"manifest {manifest.name!r} is empty")
    targets = np.stack([e.targets.values for e in manifest.entries])
    mask = np.stack([e.targets.mask for e in manifest.entries])
    if formants is None:
        selected = [i + 1 for i in range(N_FORMANTS) if mask[:, i].any()]
        if not selected:
            raise DataError(f"manifest {manifest.name!r} has no reference formant at all")
    else:
        selected = sorted(set(formants))
        for number in selected:
            if not 1 <= number <= N_FORMANTS:
                raise DataError(f"formant number must lie in 1..{N_FORMANTS}, got {number}")
            if not mask[:, number - 1].any():
                raise DataError(f"manifest {manifest.name!r} has no reference F{number}")

    predictions = model.estimate_hz(load_segments(manifest))
    domains = np.array([e.domain for e in manifest.entries], dtype=object)
    cells = []
    for domain in sorted(set(domains.tolist())):
        in_domain = domains == domain
        for number in selected:
            i = number - 1
            valid = in_domain & mask[:, i] & np.isfinite(predictions[:, i])
            count = int(valid.sum())
            if count == 0:
                continue
            errors = np.abs(predictions[valid, i] - targets[valid, i])
            cells.append(EvalCell(domain, number, math.fsum(errors.tolist()) / count, count))
    logger.debug("%s on %s: %d report cells", model.label, manifest.name, len(cells))
    return EvalReport(model.label, tuple(cells))


def render_table(reports: t.Sequence[EvalReport], dataset_header: str = "dataset") -> str:
    """Aligned text table with one row per (domain, method) and columns F1..F3.

    Missing cells print as `-`.

    Examples:
        ```python
        report = EvalReport("DA", (EvalCell("Studio", 1, 50.0, 10), EvalCell("Studio", 2, 86.0, 10)))
        print(render_table([report]))
        # dataset  method  F1    F2    F3
        # Studio   DA      50.0  86.0  -
        ```
    """
    header = [dataset_header, "method"] + [f"F{i}" for i in range(1, EVALUATED_FORMANTS + 1)]
    rows = [header]
    domains = list(dict.fromkeys(d for report in reports for d in report.domains()))
    for domain in domains:
        for report in reports:
            if domain not in report.domains():
                continue
            rows.append([domain, report.method] + [
                report.mae(domain, i).map_or("-", lambda v: f"{v:.1f}")
                for i in range(1, EVALUATED_FORMANTS + 1)
            ])
    widths = [max(len(row[col]) for row in rows) for col in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        for row in rows
    ) + "\n"


@dataclasses.dataclass(frozen=True)
class GateHistogram:
    """Counts of selection-neuron activations in 10 buckets of width 0.1 over `[0, 1)`."""
    domain: str
    counts: t.Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if len(self.counts) != N_BUCKETS or any(c < 0 for c in self.counts):
            raise DataError(f"a gate histogram needs {N_BUCKETS} non-negative counts")

    @staticmethod
    def from_activations(domain: str, s: t.Iterable[float]) -> "GateHistogram":
        """Bucket `i` holds `i/10 <= s < (i+1)/10`."""
        index = np.clip(np.floor(np.asarray(list(s), dtype=np.float64) * N_BUCKETS), 0, N_BUCKETS - 1).astype(int)
        return GateHistogram(domain, tuple(np.bincount(index, minlength=N_BUCKETS).tolist()))

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def occupied_buckets(self) -> int:
        return sum(1 for c in self.counts if c > 0)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(HISTOGRAM_HEADER)
        for i, count in enumerate(self.counts):
            writer.writerow([f"{i / N_BUCKETS:.1f}", f"{(i + 1) / N_BUCKETS:.1f}", count])
        return buffer.getvalue()


def s_histogram(da: DaModel, manifest: Manifest) -> GateHistogram:
    """Histogram of `s(c)` over the segments of a manifest, labelled with its name.

    Raises:
        DataError: The manifest is empty.
    """
    if len(manifest) == 0:
        raise DataError(f"manifest {manifest.name!r} is empty")
    return GateHistogram.from_activations(manifest.name, da.gate(load_segments(manifest)).tolist())


def gate_concentration(hist: GateHistogram, width: int = 3) -> float:
    """Largest share of the activations falling into `width` adjacent buckets.

    Raises:
        DataError: The histogram is empty.
    """
    if hist.total == 0:
        raise DataError(f"histogram {hist.domain!r} is empty")
    window = max(sum(hist.counts[i:i + width]) for i in range(N_BUCKETS - width + 1))
    return window / hist.total


def _qualifying_roots(seg: dsp.Segment) -> t.List[float]:
    model = dsp.lpc_analysis(seg.samples, [BASELINE_ORDER])[0]
    roots = np.roots(model.polynomial)
    roots = roots[roots.imag > 0]
    frequencies = np.angle(roots) * seg.sample_rate / (2.0 * np.pi)
    bandwidths = -np.log(np.abs(roots)) * seg.sample_rate / np.pi
    keep = (frequencies >= BASELINE_MIN_HZ) & (frequencies <= BASELINE_MAX_HZ) & (bandwidths < BASELINE_MAX_BANDWIDTH_HZ)
    return sorted(float(f) for f in frequencies[keep])


def lpc_root_baseline(seg: dsp.Segment) -> t.Tuple[Option[float], Option[float], Option[float]]:
    """Classical formant picker: roots of an order-12 LPC polynomial.

    Roots in the upper half plane between 90 and 4000 Hz with a bandwidth below
    400 Hz are sorted; the lowest three become F1..F3. Missing slots, and every
    slot when the analysis fails, are `Option.none()`.

    Examples:
        ```python
        f1, f2, f3 = lpc_root_baseline(segment)
        print(f1.map_or("absent", str))
        ```
    """
    found = (
        Result.catch_from(_qualifying_roots, seg)
        .inspect_err(lambda e: logger.debug("baseline analysis failed: %s", e))
        .unwrap_or([])
    )
    increasing: t.List[float] = []
    for f in found:
        if not increasing or f > increasing[-1]:
            increasing.append(f)
    slots = [Option.some(f) for f in increasing[:EVALUATED_FORMANTS]]
    slots += [Option.none()] * (EVALUATED_FORMANTS - len(slots))
    return slots[0], slots[1], slots[2]


@dataclasses.dataclass(frozen=True)
class LpcRootBaseline:
    """`lpc_root_baseline` as a `FormantEstimator`; F4 and missing slots are `nan`."""
    label: str = "lpc-root baseline"

    def estimate_hz(self, segments: t.Sequence[dsp.Segment]) -> FloatArray:
        out = np.full((len(segments), N_FORMANTS), np.nan)
        for row, seg in enumerate(segments):
            for i, slot in enumerate(lpc_root_baseline(seg)):
                out[row, i] = slot.unwrap_or(np.nan)
        return out
