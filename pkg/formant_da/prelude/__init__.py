from monad_std import Option, Ok, Err, Result

from formant_da.dsp import Segment, preprocess
from formant_da.features import extract_features, extract_batch
from formant_da.nn import TrainConfig
from formant_da.adaptation import DaModel
from formant_da.dataio import load_manifest, save_manifest, load_model, save_model, read_wav, write_wav
from formant_da.synth import builtin_domain, generate_corpus
from formant_da.training import train_core, train_adaptation, train_joint, split_manifest
from formant_da.evaluation import mae_report, s_histogram, render_table, LpcRootBaseline


__all__ = [
    "Option",
    "Ok",
    "Err",
    "Result",
    "Segment",
    "preprocess",
    "extract_features",
    "extract_batch",
    "TrainConfig",
    "DaModel",
    "load_manifest",
    "save_manifest",
    "load_model",
    "save_model",
    "read_wav",
    "write_wav",
    "builtin_domain",
    "generate_corpus",
    "train_core",
    "train_adaptation",
    "train_joint",
    "split_manifest",
    "mae_report",
    "s_histogram",
    "render_table",
    "LpcRootBaseline",
]
