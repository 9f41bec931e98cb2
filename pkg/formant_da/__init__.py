import logging

from .error import FormantError, UsageError, DataError, NumericError
from .dsp import Segment, FormantTargets, preprocess
from .features import FeatureVector, Normalizer, extract_features
from .nn import TrainConfig, CoreModel
from .adaptation import AdaptationLayer, DaModel
from .manifest import Manifest, ManifestEntry
from . import prelude

logging.getLogger(__name__).addHandler(logging.NullHandler())


__all__ = [
    "FormantError",
    "UsageError",
    "DataError",
    "NumericError",
    "Segment",
    "FormantTargets",
    "preprocess",
    "FeatureVector",
    "Normalizer",
    "extract_features",
    "TrainConfig",
    "CoreModel",
    "AdaptationLayer",
    "DaModel",
    "Manifest",
    "ManifestEntry",
    "prelude",
]
