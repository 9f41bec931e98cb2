import pathlib
import unittest

import numpy as np
from monad_std import Option

from formant_da.dsp import FormantTargets
from formant_da.error import DataError
from formant_da.manifest import *


def _entry(path: str, domain: str, f1: float = 500.0) -> ManifestEntry:
    targets = FormantTargets.from_options([Option.some(f1), Option.some(1500.0), Option.none(), Option.none()])
    return ManifestEntry(path, 0.0, 0.3, targets, domain)


class EntryTest(unittest.TestCase):
    def test_formant_lookup(self):
        entry = _entry("a.wav", "studio")
        self.assertEqual(entry.formant(0), Option.some(500.0))
        self.assertTrue(entry.formant(3).is_none())

    def test_invalid_span(self):
        targets = FormantTargets(np.array([500.0, 1500.0, 2500.0, 3500.0]), np.ones(4, bool))
        with self.assertRaises(DataError):
            ManifestEntry("a.wav", 0.3, 0.3, targets, "studio")
        with self.assertRaises(DataError):
            ManifestEntry("a.wav", -0.1, 0.3, targets, "studio")


class ManifestTest(unittest.TestCase):
    def setUp(self):
        self.manifest = Manifest(
            [_entry(f"{i}.wav", "studio" if i % 3 else "field", 400.0 + i) for i in range(10)],
            "corpus",
            pathlib.Path("/data/corpus"),
        )

    def test_resolve(self):
        self.assertEqual(self.manifest.resolve(self.manifest.entries[2]), pathlib.Path("/data/corpus/2.wav"))
        absolute = _entry("/audio/x.wav", "studio")
        self.assertEqual(self.manifest.resolve(absolute), pathlib.Path("/audio/x.wav"))

    def test_by_domain(self):
        parts = self.manifest.by_domain()
        self.assertEqual(list(parts), ["field", "studio"])
        self.assertEqual(len(parts["field"]), 4)
        self.assertEqual(len(parts["studio"]), 6)
        self.assertEqual(parts["studio"].name, "studio")
        self.assertEqual(parts["studio"].root, self.manifest.root)

    def test_rebased(self):
        moved = Manifest([_entry("2.wav", "studio"), _entry("/abs/y.wav", "studio")], "m", pathlib.Path("/data/corpus"))
        rebased = moved.rebased("/data/splits")
        self.assertEqual(rebased.entries[0].path, "../corpus/2.wav")
        self.assertEqual(rebased.entries[1].path, "/abs/y.wav")
        self.assertEqual(rebased.resolve(rebased.entries[0]).resolve(), pathlib.Path("/data/corpus/2.wav").resolve())

    def test_split_is_disjoint_and_seeded(self):
        train, test = split_manifest(self.manifest, 0.3, seed=5)
        self.assertEqual(len(test), 3)
        self.assertEqual(len(train), 7)
        paths = [e.path for e in train] + [e.path for e in test]
        self.assertEqual(sorted(paths), sorted(e.path for e in self.manifest))
        self.assertEqual((train.name, test.name), ("corpus-train", "corpus-test"))
        again_train, again_test = split_manifest(self.manifest, 0.3, seed=5)
        self.assertEqual(again_test, test)
        self.assertEqual(again_train, train)

    def test_split_keeps_order(self):
        train, _ = split_manifest(self.manifest, 0.5, seed=1)
        order = [int(e.path.split(".")[0]) for e in train]
        self.assertEqual(order, sorted(order))

    def test_split_errors(self):
        with self.assertRaises(DataError):
            split_manifest(self.manifest, 0.0, seed=0)
        with self.assertRaises(DataError):
            split_manifest(self.manifest, 1.0, seed=0)
        with self.assertRaises(DataError):
            split_manifest(self.manifest.with_entries(self.manifest.entries[:1]), 0.5, seed=0)


if __name__ == '__main__':
    unittest.main()
