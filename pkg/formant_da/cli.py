"""The `formant-da` command line.

Every subcommand validates its flags and `FORMANT_DA_THREADS` before touching
the filesystem and writes its artifacts atomically. Failures print one line to stderr and exit with

| code | meaning |
|---|---|
| 0 | success |
| 2 | usage error |
| 3 | data error |
| 4 | numeric failure |

A full two-domain experiment:

```sh
formant-da --seed 42 synth --domain adult_male --count 2500 --out corpus/male
formant-da --seed 42 synth --domain child --count 2500 --out corpus/child
formant-da --seed 42 split --manifest corpus/male/manifest.csv --test-fraction 0.2 \\
    --out-train corpus/male/train.csv --out-test corpus/male/test.csv
formant-da --seed 42 split --manifest corpus/child/manifest.csv --test-fraction 0.2 \\
    --out-train corpus/child/train.csv --out-test corpus/child/test.csv
formant-da --seed 42 train-core --manifest corpus/male/train.csv --out core.fda
formant-da --seed 42 train-adapt --core core.fda --manifest corpus/male/train.csv \\
    --manifest corpus/child/train.csv --out da.fda
formant-da evaluate --model da.fda --manifest corpus/child/test.csv --out report.csv
formant-da s-hist --model da.fda --manifest corpus/male/test.csv --out hist.csv
```
"""
import argparse
import dataclasses
import logging
import pathlib
import sys
import typing as t

from monad_std import Option

from . import dataio, evaluation, synth, training
from .adaptation import DaModel
from .dsp import preprocess
from .error import FormantError, UsageError
from .features import extract_batch
from .nn.config import TrainConfig
from .nn.model import N_FORMANTS, CoreModel
from .utils.parallel import thread_count

__all__ = [
    "EXIT_CODES",
    "CliConfig",
    "build_parser",
    "run",
    "main",
]

logger = logging.getLogger(__name__)

PROG = "formant-da"
EXIT_CODES = {"Usage": 2, "Data": 3, "Numeric": 4}


@dataclasses.dataclass(frozen=True)
class CliConfig:
    """The parsed command line, echoed into model provenance."""
    command: str
    seed: int
    verbose: bool
    options: t.Dict[str, t.Any]

    @staticmethod
    def from_namespace(ns: argparse.Namespace) -> "CliConfig":
        options = {k: v for k, v in sorted(vars(ns).items()) if k not in ("command", "seed", "verbose", "handler")}
        return CliConfig(ns.command, ns.seed, ns.verbose, options)

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {"command": self.command, "seed": self.seed, "options": self.options}

    def train_config(self, freeze_core: bool = False) -> TrainConfig:
        """Training hyperparameters from the flags; `UsageError` on invalid values."""
        return TrainConfig(
            epochs=self.options["epochs"],
            batch_size=self.options["batch"],
            learning_rate=self.options["lr"],
            seed=self.seed,
            freeze_core=freeze_core,
            loss=self.options["loss"],
            patience=Option.from_nullable(self.options["patience"]),
        )


def _positive_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _non_negative_float(raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {raw!r}") from None
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {raw!r}")
    return value


def _fraction(raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {raw!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"expected a fraction in (0, 1), got {raw!r}")
    return value


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    defaults = TrainConfig()
    parser.add_argument("--epochs", type=_positive_int, default=defaults.epochs)
    parser.add_argument("--lr", type=_non_negative_float, default=defaults.learning_rate)
    parser.add_argument("--batch", type=_positive_int, default=defaults.batch_size)
    parser.add_argument("--loss", choices=("mae", "mse"), default=defaults.loss)
    parser.add_argument("--patience", type=_positive_int, default=None,
                        help="stop after this many epochs without held-out improvement")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for every random draw")
    common.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS, help="debug logging and progress bars")

    parser = argparse.ArgumentParser(prog=PROG, description="Domain-adaptive formant estimation.", parents=[common])
    parser.set_defaults(seed=0, verbose=False)
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("synth", parents=[common], help="synthesize a vowel corpus and its manifest")
    p.add_argument("--domain", required=True, help=f"one of {', '.join(sorted(synth.BUILTIN_DOMAINS))}, or a JSON file")
    p.add_argument("--count", type=_positive_int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_synth)

    p = commands.add_parser("split", parents=[common], help="split a manifest into disjoint train and test parts")
    p.add_argument("--manifest", required=True)
    p.add_argument("--test-fraction", type=_fraction, required=True)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(handler=_split)

    p = commands.add_parser("train-core", parents=[common], help="train the core network; repeat --manifest to pool corpora")
    p.add_argument("--manifest", action="append", required=True)
    p.add_argument("--out", required=True)
    _add_training_flags(p)
    p.set_defaults(handler=_train_core)

    p = commands.add_parser("train-adapt", parents=[common], help="train an adapter over a frozen core")
    p.add_argument("--core", required=True)
    p.add_argument("--manifest", action="append", required=True)
    p.add_argument("--out", required=True)
    _add_training_flags(p)
    p.set_defaults(handler=_train_adapt)

    p = commands.add_parser("train-joint", parents=[common], help="train core and adapter together")
    p.add_argument("--manifest", action="append", required=True)
    p.add_argument("--out", required=True)
    _add_training_flags(p)
    p.set_defaults(handler=_train_joint)

    p = commands.add_parser("estimate", parents=[common], help="estimate the formants of one audio span")
    p.add_argument("--model", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--start", type=_non_negative_float, default=0.0)
    p.add_argument("--end", type=_non_negative_float, default=None)
    p.set_defaults(handler=_estimate)

    p = commands.add_parser("evaluate", parents=[common], help="MAE report of a model and the LPC-root baseline")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_evaluate)

    p = commands.add_parser("s-hist", parents=[common], help="histogram of selection-neuron activations")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_s_hist)
    return parser


def _synth(cfg: CliConfig) -> None:
    domain = synth.resolve_domain(cfg.options["domain"])
    synth.generate_corpus(domain, cfg.options["count"], cfg.seed, cfg.options["out"])


def _split(cfg: CliConfig) -> None:
    manifest = dataio.load_manifest(cfg.options["manifest"])
    train, test = training.split_manifest(manifest, cfg.options["test_fraction"], cfg.seed)
    for part, out in ((train, cfg.options["out_train"]), (test, cfg.options["out_test"])):
        target = pathlib.Path(out)
        dataio.save_manifest(part.rebased(target.parent), target)


def _train_core(cfg: CliConfig) -> None:
    train_cfg = cfg.train_config()
    manifests = [dataio.load_manifest(path) for path in cfg.options["manifest"]]
    model = training.train_core(manifests, train_cfg)
    model.provenance["cli"] = cfg.to_dict()
    dataio.save_model(model, cfg.options["out"])


def _train_adapt(cfg: CliConfig) -> None:
    train_cfg = cfg.train_config(freeze_core=True)
    core = dataio.load_model(cfg.options["core"])
    if isinstance(core, DaModel):
        raise UsageError(f"{cfg.options['core']} holds a domain-adaptation model, expected a core model")
    manifests = [dataio.load_manifest(path) for path in cfg.options["manifest"]]
    model = training.train_adaptation(core, manifests, train_cfg)
    model.provenance["cli"] = cfg.to_dict()
    dataio.save_model(model, cfg.options["out"])


def _train_joint(cfg: CliConfig) -> None:
    train_cfg = cfg.train_config()
    manifests = [dataio.load_manifest(path) for path in cfg.options["manifest"]]
    model = training.train_joint(manifests, train_cfg)
    model.provenance["cli"] = cfg.to_dict()
    dataio.save_model(model, cfg.options["out"])


def _format_row(name: str, hz: t.Sequence[float], s: Option[float]) -> str:
    return ",".join([name] + [f"{v:.2f}" for v in hz] + [s.map_or("", lambda v: f"{v:.6f}")])


def _estimate(cfg: CliConfig) -> None:
    model = dataio.load_model(cfg.options["model"])
    samples, rate = dataio.read_wav(cfg.options["wav"])
    span = training.slice_span(samples, rate, cfg.options["start"], Option.from_nullable(cfg.options["end"]), cfg.options["wav"])
    features = extract_batch([preprocess(span, rate)], threads=1)
    lines = ["estimate," + ",".join(f"f{i}_hz" for i in range(1, N_FORMANTS + 1)) + ",s"]
    if isinstance(model, DaModel):
        out = model.forward(model.core.normalizer.apply(features))
        to_hz = model.core.normalizer.units_to_hz
        lines.append(_format_row("core", to_hz(out.f)[0], Option.none()))
        lines.append(_format_row("adapted", to_hz(out.g)[0], Option.some(float(out.s[0]))))
    else:
        lines.append(_format_row("core", model.estimate_features_hz(features)[0], Option.none()))
    sys.stdout.write("\n".join(lines) + "\n")


def _evaluate(cfg: CliConfig) -> None:
    model = dataio.load_model(cfg.options["model"])
    manifest = dataio.load_manifest(cfg.options["manifest"])
    estimators: t.List[t.Any] = [model]
    if isinstance(model, DaModel):
        estimators.append(model.core)
    estimators.append(evaluation.LpcRootBaseline())
    reports = [evaluation.mae_report(estimator, manifest) for estimator in estimators]
    dataio.atomic_write_text(cfg.options["out"], evaluation.reports_to_csv(reports))
    sys.stdout.write(evaluation.render_table(reports))


def _s_hist(cfg: CliConfig) -> None:
    model = dataio.load_model(cfg.options["model"])
    if isinstance(model, CoreModel):
        raise UsageError(f"{cfg.options['model']} holds a core model; s-hist needs a domain-adaptation model")
    manifest = dataio.load_manifest(cfg.options["manifest"])
    hist = evaluation.s_histogram(model, manifest)
    dataio.atomic_write_text(cfg.options["out"], hist.to_csv())
    logger.info("%s: %d occupied buckets, concentration %.3f",
                hist.domain, hist.occupied_buckets, evaluation.gate_concentration(hist))


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def run(argv: t.Optional[t.Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code.

    Examples:
        ```python
        assert run(["estimate", "--model", "missing.fda", "--wav", "missing.wav"]) == 3
        ```
    """
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code is None else int(e.code)
    cfg = CliConfig.from_namespace(ns)
    _configure_logging(cfg.verbose)
    try:
        thread_count()
        ns.handler(cfg)
    except FormantError as e:
        print(f"{PROG}: {e}", file=sys.stderr)
        return EXIT_CODES[e.error_type]
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))

