"""Command line entry point: ``python -m crossgcca {generate,train,evaluate,sweep}``.

Exit codes: 0 success, 1 usage error, 2 some sweep cells failed.
"""

import argparse
import csv
import json
import logging
from pathlib import Path
import sys
from types import SimpleNamespace

import numpy as np

from . import experiment as ex
from .errors import InvalidInputError
from .evaluation import MetricsRecord
from .synthgen import LabeledMultiviewDataset, SynthConfig, export_dataset, generate, load_dataset
from .trainer import TrainConfig

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2

log = logging.getLogger("crossgcca")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for partial failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _add_synth_args(p):
    p.add_argument("--data-seed", type=int, default=0, help="seed of the synthetic dataset")
    p.add_argument("--power-ratio-db", type=float, default=-18.0, help="common/private power ratio in dB")
    p.add_argument("--split-sizes", type=_ints, default=(3000, 1500, 1500), help="train,val,test sizes")


def _synth(args, seed=None):
    return SynthConfig(power_ratio_db=args.power_ratio_db, split_sizes=args.split_sizes,
                       seed=args.data_seed if seed is None else seed)


def _add_train_args(p):
    d = TrainConfig()
    p.add_argument("--outer-iterations", type=int, default=d.outer_iterations)
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--weight-decay", type=float, default=d.weight_decay)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--latent-dim", type=int, default=d.latent_dim)
    p.add_argument("--validation-target", choices=("local", "shared"), default=d.validation_target)
    p.add_argument("--scaling", choices=("zscore", "global", "none"), default=d.scaling)


def _train_config(args, **extra):
    return TrainConfig(outer_iterations=args.outer_iterations, learning_rate=args.learning_rate,
                       weight_decay=args.weight_decay, batch_size=args.batch_size, latent_dim=args.latent_dim,
                       validation_target=args.validation_target, scaling=args.scaling, **extra)


def build_parser():
    parser = _Parser(prog="crossgcca", description="Deep multiview GCCA experiments on synthetic data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic multiview dataset as CSV files")
    p.add_argument("--seed", type=int, required=True, help="dataset seed")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--power-ratio-db", type=float, default=-18.0)
    p.add_argument("--split-sizes", type=_ints, default=(3000, 1500, 1500))

    p = sub.add_parser("train", help="train one model and write a checkpoint directory")
    p.add_argument("--method", choices=ex.ALL_METHODS, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="trade-off weight (required for dccae and proposed)")
    p.add_argument("--seed", type=int, required=True, help="network initialization seed")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--data-dir", help="dataset written by 'generate' (default: generate in memory)")
    _add_synth_args(p)
    _add_train_args(p)

    p = sub.add_parser("evaluate", help="score a checkpoint on the test split and export embeddings")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--seed", type=int, default=0, help="seed for k-means restarts")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--data-dir")
    p.add_argument("--svm-c", type=float, default=1.0)
    _add_synth_args(p)

    p = sub.add_parser("sweep", help="methods x lambdas x seeds, with aggregate tables")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--manifest", help="replay the sweep recorded in this manifest.json")
    p.add_argument("--methods", default=",".join(ex.ALL_METHODS))
    p.add_argument("--lambdas", type=_floats, default=ex.DEFAULT_LAMBDAS)
    p.add_argument("--seeds-per-cell", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="first initialization seed")
    p.add_argument("--eval-seed", type=int, default=0)
    p.add_argument("--svm-c", type=float, default=1.0)
    p.add_argument("--workers", type=int, default=1)
    _add_synth_args(p)
    _add_train_args(p)
    return parser


def _load_data(args):
    if getattr(args, "data_dir", None):
        splits = load_dataset(args.data_dir)
        return {name: LabeledMultiviewDataset(views, labels, None, None) for name, (views, labels) in splits.items()}
    return generate(_synth(args)).splits()


def cmd_generate(args):
    splits = generate(SynthConfig(power_ratio_db=args.power_ratio_db, split_sizes=args.split_sizes, seed=args.seed))
    path = export_dataset(splits, args.output_dir)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_train(args):
    if args.method in ("dccae", "proposed") and args.lam is None:
        raise UsageError(f"--lambda is required for method {args.method}")
    splits = _load_data(args)
    data = SimpleNamespace(**splits)
    model, rows = ex.fit_cell(args.method, args.lam, args.seed, data, _train_config(args))
    out = Path(args.output_dir)
    ex.save_model(model, out, method=args.method)
    if rows:
        ex.write_run_log(rows, out / "run_log.csv")
    print(f"wrote checkpoint to {out}")
    return EXIT_OK


def cmd_evaluate(args):
    model = ex.load_model(args.model_dir)
    splits = _load_data(args)
    meta = json.loads((Path(args.model_dir) / "model.json").read_text())
    cfg = meta.get("config", {})
    method = meta.get("method", cfg.get("method", meta["kind"]))
    lam = cfg.get("lam") if method not in ex.LAMBDA_FREE and meta["kind"] == "deep" else None
    n_classes = int(max(np.max(splits["train"].labels), np.max(splits["test"].labels))) + 1
    data = SimpleNamespace(**splits)
    rec = ex.score_model(model, data, n_classes, args.seed, method, lam, cfg.get("seed", 0),
                         args.svm_c)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_metrics(rec, out / "metrics.csv")
    ex.export_embeddings(model, splits["test"].views, splits["test"].labels, out / "embeddings.csv")
    print(",".join(ex.RESULT_HEADER))
    print(",".join(ex.record_row(rec)))
    return EXIT_OK


def _write_metrics(rec: MetricsRecord, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ex.RESULT_HEADER)
        w.writerow(ex.record_row(rec))


def cmd_sweep(args):
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text())
        config = ex.ExperimentConfig.from_manifest(manifest, args.output_dir, workers=args.workers)
    else:
        methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
        config = ex.ExperimentConfig(synth=_synth(args), train=_train_config(args), methods=methods,
                                     lambdas=args.lambdas, seeds_per_cell=args.seeds_per_cell, base_seed=args.seed,
                                     eval_seed=args.eval_seed, svm_c=args.svm_c, output_dir=args.output_dir,
                                     workers=args.workers)

    def progress(result):
        cell, rec, _, err = result
        status = "FAILED" if err else f"acc={rec.acc:.3f} nmi={rec.nmi:.3f}"
        log.info("%s lambda=%s seed=%d %s", cell[0], ex.fmt_lambda(cell[1]), cell[2], status)

    records, failures = ex.run_experiment(config, progress=progress)
    print(f"{len(records)} cells done, {len(failures)} failed; results in {config.output_dir}")
    return EXIT_PARTIAL if failures else EXIT_OK


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "evaluate": cmd_evaluate, "sweep": cmd_sweep}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInputError, FileNotFoundError) as exc:
        print(f"crossgcca: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
