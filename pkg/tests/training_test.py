import dataclasses
import pathlib
import tempfile
import unittest

import numpy as np
from monad_std import Option

from formant_da.adaptation import DaModel
from formant_da.dataio import serialize_model, write_wav
from formant_da.dsp import FormantTargets
from formant_da.error import DataError
from formant_da.features import fit_normalizer
from formant_da.manifest import Manifest, ManifestEntry
from formant_da.nn import Architecture, TrainConfig, mlp_init
from formant_da.synth import builtin_domain, generate_corpus
from formant_da.training import *

from .testutil import nets

TINY = TrainConfig(epochs=2, batch_size=4, learning_rate=1e-3, hidden_sizes=nets.TINY_HIDDEN, seed=3)


class _CorpusCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls._tmp = tempfile.TemporaryDirectory()
        root = pathlib.Path(cls._tmp.name)
        (root / "male").mkdir()
        (root / "child").mkdir()
        cls.male = generate_corpus(builtin_domain("adult_male"), 6, seed=1, out_dir=root / "male")
        cls.child = generate_corpus(builtin_domain("child"), 5, seed=2, out_dir=root / "child")

    @classmethod
    def tearDownClass(cls):
        cls._tmp.cleanup()


class SliceSpanTest(unittest.TestCase):
    def test_slice(self):
        samples = np.arange(100, dtype=np.float64)
        np.testing.assert_array_equal(slice_span(samples, 10, 2.0, Option.some(3.0)), np.arange(20, 30))
        np.testing.assert_array_equal(slice_span(samples, 10, 9.5, Option.none()), np.arange(95, 100))
        self.assertEqual(slice_span(samples, 10, 9.0, Option.some(20.0)).size, 10)

    def test_outside(self):
        samples = np.zeros(100)
        with self.assertRaises(DataError):
            slice_span(samples, 10, 10.0, Option.none())
        with self.assertRaises(DataError):
            slice_span(samples, 10, 12.0, Option.some(13.0))


class TrainingSetTest(_CorpusCase):
    def test_build(self):
        data = build_training_set([self.male, self.child])
        self.assertEqual(len(data), 11)
        self.assertEqual(data.features.shape, (11, 350))
        self.assertTrue(data.mask.all())
        np.testing.assert_array_equal(data.targets_hz[0], self.male.entries[0].targets.values)
        np.testing.assert_array_equal(data.targets_hz[6], self.child.entries[0].targets.values)

    def test_load_segments(self):
        segments = load_segments(self.child)
        self.assertEqual(len(segments), 5)
        self.assertEqual(segments[0].sample_rate, 16000)
        self.assertEqual(segments[0].domain_label, Option.some("child"))

    def test_empty(self):
        with self.assertRaises(DataError):
            build_training_set([])
        with self.assertRaises(DataError):
            build_training_set([self.male.with_entries([])])

    def test_fully_masked_entry(self):
        targets = FormantTargets(np.full(4, np.nan), np.zeros(4, bool))
        entry = dataclasses.replace(self.male.entries[0], targets=targets)
        with self.assertRaises(DataError):
            build_training_set([self.male.with_entries([entry])])

    def test_missing_audio(self):
        entry = dataclasses.replace(self.male.entries[0], path="missing.wav")
        with self.assertRaises(DataError):
            build_training_set([self.male.with_entries([entry])])

    def test_span_outside_audio(self):
        entry = dataclasses.replace(self.male.entries[0], start_s=5.0, end_s=5.3)
        with self.assertRaises(DataError):
            build_training_set([self.male.with_entries([entry])])


class TrainCoreTest(_CorpusCase):
    def test_zero_learning_rate_keeps_initialization(self):
        cfg = dataclasses.replace(TINY, learning_rate=0.0)
        model = train_core(self.male.with_entries(self.male.entries[:1]), cfg)
        init = mlp_init(Architecture.core(nets.TINY_HIDDEN), cfg.seed)
        for p, q in zip(model.parameters(), init.parameters()):
            np.testing.assert_array_equal(p, q)

    def test_deterministic(self):
        a = train_core(self.male, TINY)
        b = train_core(self.male, TINY)
        self.assertEqual(serialize_model(a), serialize_model(b))
        c = train_core(self.male, dataclasses.replace(TINY, seed=4))
        self.assertNotEqual(serialize_model(a), serialize_model(c))

    def test_provenance(self):
        model = train_core(self.male, TINY)
        self.assertEqual(model.provenance["regime"], "core")
        self.assertEqual(model.provenance["examples"], 6)
        self.assertEqual(model.provenance["manifests"], ["adult_male"])
        self.assertEqual(model.provenance["fit"]["epochs_run"], 2)
        self.assertEqual(model.normalizer.dim, 350)

    def test_early_stopping(self):
        cfg = dataclasses.replace(TINY, epochs=30, learning_rate=0.0, patience=Option.some(2), validation_fraction=0.2)
        model = train_core(self.male, cfg)
        fit = model.provenance["fit"]
        self.assertEqual(fit["best_epoch"], 1)
        self.assertEqual(fit["epochs_run"], 3)

    def test_empty_manifest(self):
        with self.assertRaises(DataError):
            train_core(self.male.with_entries([]), TINY)
        with self.assertRaises(DataError):
            train_core([], TINY)
        with self.assertRaises(DataError):
            train_core([self.male, self.child.with_entries([])], TINY)

    def test_pooled_corpora(self):
        model = train_core([self.male, self.child], TINY)
        self.assertEqual(model.provenance["manifests"], ["adult_male", "child"])
        self.assertEqual(model.provenance["examples"], 11)
        pooled = fit_normalizer(build_training_set([self.male, self.child]).features)
        np.testing.assert_array_equal(model.normalizer.feature_mean, pooled.feature_mean)
        np.testing.assert_array_equal(model.normalizer.feature_std, pooled.feature_std)
        self.assertNotEqual(serialize_model(model), serialize_model(train_core(self.male, TINY)))

    def test_single_manifest_list(self):
        self.assertEqual(serialize_model(train_core([self.male], TINY)), serialize_model(train_core(self.male, TINY)))


class TrainAdaptationTest(_CorpusCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.core = train_core(cls.male, TINY)

    def test_core_stays_frozen(self):
        before = serialize_model(self.core)
        da = train_adaptation(self.core, [self.male, self.child], dataclasses.replace(TINY, freeze_core=True))
        self.assertIsInstance(da, DaModel)
        self.assertEqual(serialize_model(self.core), before)
        self.assertEqual(serialize_model(da.core), before)
        self.assertEqual(da.provenance["regime"], "two-step")
        self.assertEqual(da.provenance["examples"], 11)

    def test_freeze_is_forced(self):
        before = serialize_model(self.core)
        da = train_adaptation(self.core, [self.child], dataclasses.replace(TINY, freeze_core=False))
        self.assertEqual(serialize_model(da.core), before)
        self.assertTrue(da.provenance["config"]["freeze_core"])

    def test_zero_learning_rate_reproduces_core(self):
        da = train_adaptation(self.core, [self.child], dataclasses.replace(TINY, learning_rate=0.0))
        segments = load_segments(self.child)
        np.testing.assert_array_equal(da.estimate_hz(segments), self.core.estimate_hz(segments))

    def test_adapter_moves(self):
        da = train_adaptation(self.core, [self.child], TINY)
        self.assertTrue(da.adapter.W.any())
        self.assertFalse(np.array_equal(da.adapter.W, np.eye(4)))

    def test_deterministic(self):
        a = train_adaptation(self.core, [self.male, self.child], TINY)
        b = train_adaptation(self.core, [self.male, self.child], TINY)
        self.assertEqual(serialize_model(a), serialize_model(b))

    def test_no_manifests(self):
        with self.assertRaises(DataError):
            train_adaptation(self.core, [], TINY)


class TrainJointTest(_CorpusCase):
    def test_deterministic(self):
        a = train_joint([self.male, self.child], TINY)
        b = train_joint([self.male, self.child], TINY)
        self.assertEqual(serialize_model(a), serialize_model(b))
        self.assertEqual(a.provenance["regime"], "joint")

    def test_core_is_trained(self):
        model = train_joint([self.male, self.child], TINY)
        init = mlp_init(Architecture.core(nets.TINY_HIDDEN), TINY.seed)
        self.assertFalse(np.array_equal(model.core.parameters()[0], init.parameters()[0]))

    def test_single_domain(self):
        model = train_joint([self.child], TINY)
        self.assertEqual(model.provenance["examples"], 5)
        self.assertFalse(model.provenance["config"]["freeze_core"])

    def test_no_manifests(self):
        with self.assertRaises(DataError):
            train_joint([], TINY)


class AudioReuseTest(unittest.TestCase):
    def test_spans_of_one_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = pathlib.Path(tmp)
            rng = np.random.default_rng(0)
            write_wav(root / "long.wav", rng.uniform(-0.5, 0.5, 16000), 16000)
            targets = FormantTargets(np.array([500.0, 1500.0, 2500.0, 3500.0]), np.ones(4, bool))
            manifest = Manifest(
                [ManifestEntry("long.wav", 0.0, 0.3, targets, "x"), ManifestEntry("long.wav", 0.5, 0.8, targets, "x")],
                "spans",
                root,
            )
            segments = load_segments(manifest)
            self.assertEqual(len(segments), 2)
            self.assertFalse(np.array_equal(segments[0].samples, segments[1].samples))


if __name__ == '__main__':
    unittest.main()
