"""End-to-end experiment on synthetic corpora.

Slow: trains full-size networks on thousands of vowels. Set
`FORMANT_DA_ACCEPTANCE=1` to run it.
"""
import os
import pathlib
import tempfile
import unittest

import numpy as np

from formant_da.dataio import serialize_model
from formant_da.evaluation import (
    LpcRootBaseline, gate_concentration, lpc_root_baseline, mae_report, reports_to_csv, s_histogram,
)
from formant_da.features import FEATURE_DIM, extract_features
from formant_da.manifest import split_manifest
from formant_da.nn import TrainConfig
from formant_da.synth import builtin_domain, generate_corpus, sample_domain, synthesize_vowel
from formant_da.training import train_adaptation, train_core, train_joint

from .testutil import signals

SEED = 42
CORPUS_SIZE = 2500
TEST_FRACTION = 0.2

ENABLED = os.environ.get("FORMANT_DA_ACCEPTANCE") == "1"


@unittest.skipUnless(ENABLED, "set FORMANT_DA_ACCEPTANCE=1 to run the acceptance experiment")
class FeatureSweepTest(unittest.TestCase):
    def test_feature_length(self):
        rng = np.random.default_rng(SEED)
        for name in ("adult_male", "adult_female", "child"):
            domain = builtin_domain(name)
            for _ in range(334):
                seg = synthesize_vowel(sample_domain(domain, rng))
                self.assertEqual(extract_features(seg).values.shape, (FEATURE_DIM,))


@unittest.skipUnless(ENABLED, "set FORMANT_DA_ACCEPTANCE=1 to run the acceptance experiment")
class BaselineSweepTest(unittest.TestCase):
    def test_well_separated_vowels(self):
        rng = np.random.default_rng(SEED)
        domain = builtin_domain("adult_male")
        checked = 0
        while checked < 100:
            spec = sample_domain(domain, rng)
            if min(b - a for a, b in zip(spec.formants, spec.formants[1:])) < 400.0 or spec.formants[0] < 400.0:
                continue
            found = lpc_root_baseline(signals.vowel(spec.formants, spec.bandwidths, spec.f0))
            for slot, expected in zip(found, spec.formants):
                self.assertTrue(slot.is_some(), spec)
                self.assertLess(abs(slot.unwrap() - expected), 30.0, spec)
            checked += 1


def _pipeline(root: pathlib.Path):
    male = generate_corpus(builtin_domain("adult_male"), CORPUS_SIZE, SEED, root / "adult_male")
    child = generate_corpus(builtin_domain("child"), CORPUS_SIZE, SEED + 1, root / "child")
    male_train, male_test = split_manifest(male, TEST_FRACTION, SEED)
    child_train, child_test = split_manifest(child, TEST_FRACTION, SEED)
    core = train_core(male_train, TrainConfig(seed=SEED))
    da = train_adaptation(core, [male_train, child_train], TrainConfig(seed=SEED, freeze_core=True))
    joint = train_joint([male_train, child_train], TrainConfig(seed=SEED))
    return {
        "core": core,
        "da": da,
        "joint": joint,
        "male_test": male_test,
        "child_test": child_test,
    }


@unittest.skipUnless(ENABLED, "set FORMANT_DA_ACCEPTANCE=1 to run the acceptance experiment")
class ExperimentTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls._tmp = tempfile.TemporaryDirectory()
        cls.run = _pipeline(pathlib.Path(cls._tmp.name) / "first")
        cls.core_before = serialize_model(cls.run["core"])
        male_test, child_test = cls.run["male_test"], cls.run["child_test"]
        cls.reports = {
            (name, test.name): mae_report(cls.run[name], test)
            for name in ("core", "da", "joint")
            for test in (male_test, child_test)
        }
        cls.baseline = mae_report(LpcRootBaseline(), male_test)

    @classmethod
    def tearDownClass(cls):
        cls._tmp.cleanup()

    def _mae(self, model: str, test: str, formant: int) -> float:
        domain = {"male_test": "adult_male", "child_test": "child"}[test]
        return self.reports[(model, self.run[test].name)].mae(domain, formant).unwrap()

    def test_single_domain_learning(self):
        for formant, limit in ((1, 60.0), (2, 120.0), (3, 160.0)):
            self.assertLessEqual(self._mae("core", "male_test", formant), limit)

    def test_adaptation_improves_new_domain(self):
        for formant in (1, 2):
            self.assertLessEqual(self._mae("da", "child_test", formant), 0.7 * self._mae("core", "child_test", formant))
        for formant in (1, 2, 3):
            self.assertLessEqual(self._mae("da", "male_test", formant), 1.15 * self._mae("core", "male_test", formant))

    def test_core_stays_frozen(self):
        self.assertEqual(serialize_model(self.run["da"].core), self.core_before)

    def test_two_step_beats_joint(self):
        for formant in (1, 2, 3):
            self.assertLess(self._mae("da", "male_test", formant), self._mae("joint", "male_test", formant))

    def test_gate_concentration(self):
        male = s_histogram(self.run["da"], self.run["male_test"])
        child = s_histogram(self.run["da"], self.run["child_test"])
        self.assertGreaterEqual(gate_concentration(male), 0.7)
        self.assertGreaterEqual(child.occupied_buckets, male.occupied_buckets)

    def test_beats_baseline(self):
        for formant in (1, 2):
            self.assertLess(self._mae("da", "male_test", formant), self.baseline.mae("adult_male", formant).unwrap())

    def test_reproducible(self):
        with tempfile.TemporaryDirectory() as tmp:
            again = _pipeline(pathlib.Path(tmp))
            for name in ("core", "da", "joint"):
                self.assertEqual(serialize_model(again[name]), serialize_model(self.run[name]), name)
            for name in ("core", "da", "joint"):
                first = reports_to_csv([self.reports[(name, self.run["child_test"].name)]])
                second = reports_to_csv([mae_report(again[name], again["child_test"])])
                self.assertEqual(first, second)


if __name__ == '__main__':
    unittest.main()
