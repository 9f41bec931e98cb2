import dataclasses
import os
import pathlib
import typing as t

import numpy as np
from monad_std import Option

from .dsp import FormantTargets
from .error import DataError

__all__ = [
    "ManifestEntry",
    "Manifest",
    "split_manifest",
]


@dataclasses.dataclass(frozen=True)
class ManifestEntry:
    """One labelled segment: an audio file span with reference formants."""
    path: str
    start_s: float
    end_s: float
    targets: FormantTargets
    domain: str

    def __post_init__(self):
        if not self.end_s > self.start_s:
            raise DataError(f"segment end {self.end_s} must lie after its start {self.start_s}")
        if self.start_s < 0:
            raise DataError(f"segment start must not be negative, got {self.start_s}")

    def formant(self, index: int) -> Option[float]:
        return self.targets.get(index)


@dataclasses.dataclass(frozen=True, eq=False)
class Manifest:
    """A named list of labelled segments.

    Relative audio paths resolve against `root`, the manifest's directory.
    """
    entries: t.Tuple[ManifestEntry, ...]
    name: str = "manifest"
    root: pathlib.Path = dataclasses.field(default_factory=pathlib.Path)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "root", pathlib.Path(self.root))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> t.Iterator[ManifestEntry]:
        return iter(self.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Manifest):
            return NotImplemented
        return self.entries == other.entries

    def resolve(self, entry: ManifestEntry) -> pathlib.Path:
        path = pathlib.Path(entry.path)
        return path if path.is_absolute() else self.root / path

    def with_entries(self, entries: t.Iterable[ManifestEntry], name: t.Optional[str] = None) -> "Manifest":
        return Manifest(tuple(entries), self.name if name is None else name, self.root)

    def rebased(self, root: t.Union[str, pathlib.Path]) -> "Manifest":
        """The same entries with relative paths rewritten to resolve against `root`."""
        new_root = pathlib.Path(root)
        entries = []
        for entry in self.entries:
            path = pathlib.Path(entry.path)
            if not path.is_absolute():
                path = pathlib.Path(os.path.relpath(self.root / path, new_root))
            entries.append(dataclasses.replace(entry, path=path.as_posix()))
        return Manifest(tuple(entries), self.name, new_root)

    def domains(self) -> t.List[str]:
        """Domain labels in order of first appearance."""
        return list(dict.fromkeys(entry.domain for entry in self.entries))

    def by_domain(self) -> t.Dict[str, "Manifest"]:
        """One sub-manifest per domain label, named after the label."""
        return {
            domain: self.with_entries((e for e in self.entries if e.domain == domain), name=domain)
            for domain in self.domains()
        }


def split_manifest(m: Manifest, test_fraction: float, seed: int) -> t.Tuple[Manifest, Manifest]:
    """Disjoint train/test split with a seeded permutation.

    Both halves keep the original entry order.

    Raises:
        DataError: The fraction is outside `(0, 1)` or one half would be empty.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test fraction must lie in (0, 1), got {test_fraction}")
    n_test = int(round(len(m) * test_fraction))
    if n_test == 0 or n_test == len(m):
        raise DataError(f"cannot split {len(m)} entries with test fraction {test_fraction}")
    order = np.random.default_rng(seed).permutation(len(m))
    test_index = set(order[:n_test].tolist())
    train = [e for i, e in enumerate(m.entries) if i not in test_index]
    test = [e for i, e in enumerate(m.entries) if i in test_index]
    return m.with_entries(train, f"{m.name}-train"), m.with_entries(test, f"{m.name}-test")
