"""Sweep harness: methods x lambdas x seeds on one synthetic dataset.

Every cell trains one model, embeds the test split and scores it. Results
are written as fixed-precision CSV files plus a JSON manifest from which the
whole sweep can be replayed. Apart from the ``seconds`` column of the
run logs, every file is a deterministic function of the manifest.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
import csv
import json
from pathlib import Path
import traceback

import numpy as np

from . import nn
from .evaluation import embed, evaluate_embeddings
from .errors import InvalidInputError
from .linear_cca import LinearProjections, cca_two_view, maxvar_gcca
from .synthgen import SynthConfig, generate
from .trainer import Standardizer, TrainConfig, TrainedModel, train

ALL_METHODS = ("linear-cca", "maxvar", "dgcca", "dccae", "proposed")
LINEAR_METHODS = ("linear-cca", "maxvar")
LAMBDA_FREE = ("linear-cca", "maxvar", "dgcca")
DEFAULT_LAMBDAS = (0.1, 0.3, 0.5, 0.7, 0.9)
METRICS = ("acc", "nmi", "ari", "cla_acc", "corr_coef")
RESULT_HEADER = ("method", "lambda") + ("seed",) + METRICS
MANIFEST_FORMAT = "crossgcca-sweep/1"


@dataclass
class ExperimentConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    methods: tuple = ALL_METHODS
    lambdas: tuple = DEFAULT_LAMBDAS
    seeds_per_cell: int = 10
    base_seed: int = 0
    eval_seed: int = 0
    svm_c: float = 1.0
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        self.methods = tuple(self.methods)
        self.lambdas = tuple(float(x) for x in self.lambdas)
        if not self.methods or not self.lambdas:
            raise InvalidInputError("methods and lambdas must be nonempty")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise InvalidInputError(f"unknown methods: {sorted(unknown)}")
        if any(not 0.0 <= lam <= 1.0 for lam in self.lambdas):
            raise InvalidInputError("lambdas must lie in [0, 1]")
        if self.seeds_per_cell < 1:
            raise InvalidInputError("seeds_per_cell must be positive")

    @property
    def seeds(self):
        return tuple(range(self.base_seed, self.base_seed + self.seeds_per_cell))

    def cells(self):
        """All (method, lambda, seed) cells; lambda is None for lambda-free methods."""
        out = []
        for method in self.methods:
            lams = (None,) if method in LAMBDA_FREE else self.lambdas
            for lam in lams:
                for seed in self.seeds:
                    out.append((method, lam, seed))
        return out

    def to_manifest(self):
        d = {
            "format": MANIFEST_FORMAT,
            "synth": self.synth.to_dict(),
            "train": _train_dict(self.train),
            "methods": list(self.methods),
            "lambdas": list(self.lambdas),
            "seeds_per_cell": self.seeds_per_cell,
            "base_seed": self.base_seed,
            "seeds": list(self.seeds),
            "eval_seed": self.eval_seed,
            "svm_c": self.svm_c,
        }
        return d

    @classmethod
    def from_manifest(cls, manifest, output_dir, workers=1):
        if manifest.get("format") != MANIFEST_FORMAT:
            raise InvalidInputError("not a sweep manifest")
        synth = SynthConfig(**manifest["synth"])
        train_cfg = _train_from_dict(manifest["train"])
        return cls(synth=synth, train=train_cfg, methods=manifest["methods"], lambdas=manifest["lambdas"],
                   seeds_per_cell=manifest["seeds_per_cell"], base_seed=manifest["base_seed"],
                   eval_seed=manifest["eval_seed"], svm_c=manifest["svm_c"], output_dir=str(output_dir),
                   workers=workers)


def _train_dict(cfg):
    d = asdict(cfg)
    d["hidden"] = list(d["hidden"])
    return d


def _train_from_dict(d):
    names = {f.name for f in fields(TrainConfig)}
    d = {k: v for k, v in d.items() if k in names}
    if "hidden" in d:
        d["hidden"] = tuple(d["hidden"])
    return TrainConfig(**d)


def fmt(x):
    return f"{x:.6f}"


def fmt_lambda(lam):
    return "NA" if lam is None else f"{lam:g}"


@lru_cache(maxsize=4)
def cached_dataset(synth):
    return generate(synth)


# ---------------------------------------------------------------- models

def fit_linear(method, train_views, latent_dim):
    if method == "linear-cca":
        if len(train_views) != 2:
            raise InvalidInputError("linear-cca needs exactly two views")
        return cca_two_view(train_views[0], train_views[1], latent_dim)
    return maxvar_gcca(train_views, latent_dim)


def encode_views(model, views):
    """Per-view embeddings for either a deep model or linear projections."""
    if isinstance(model, LinearProjections):
        return model.transform(views)
    return model.encode(views)


def save_model(model, directory, method=None):
    """Write a model checkpoint directory.

    Deep models: ``encoder_{k}.bin`` / ``decoder_{k}.bin`` in the nn binary
    format, ``standardizer.json`` and ``model.json``. Linear models:
    ``projections.npz`` and ``model.json``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if isinstance(model, LinearProjections):
        arrays = {"g": model.g, "canonical_correlations": model.canonical_correlations}
        for k, (q, mu) in enumerate(zip(model.q, model.means)):
            arrays[f"q_{k}"] = q
            arrays[f"mean_{k}"] = mu
        np.savez(directory / "projections.npz", **arrays)
        meta = {"kind": "linear", "n_views": len(model.q)}
    else:
        for k, (f, w) in enumerate(zip(model.encoders, model.decoders)):
            nn.save_mlp(f, directory / f"encoder_{k}.bin")
            nn.save_mlp(w, directory / f"decoder_{k}.bin")
        stats = {"means": [m.tolist() for m in model.standardizer.means],
                 "scales": [s.tolist() for s in model.standardizer.scales]}
        (directory / "standardizer.json").write_text(json.dumps(stats) + "\n")
        meta = {"kind": "deep", "n_views": len(model.encoders), "config": _train_dict(model.config),
                "normalizers": list(model.normalizers), "best_iteration": model.best_iteration,
                "best_validation_objective": model.best_validation_objective}
    if method is not None:
        meta["method"] = method
    (directory / "model.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return directory


def load_model(directory):
    directory = Path(directory)
    meta = json.loads((directory / "model.json").read_text())
    kk = meta["n_views"]
    if meta["kind"] == "linear":
        z = np.load(directory / "projections.npz")
        return LinearProjections([z[f"q_{k}"] for k in range(kk)], z["g"], z["canonical_correlations"],
                                 [z[f"mean_{k}"] for k in range(kk)])
    stats = json.loads((directory / "standardizer.json").read_text())
    scaler = Standardizer([np.array(m) for m in stats["means"]], [np.array(s) for s in stats["scales"]])
    encoders = [nn.load_mlp(directory / f"encoder_{k}.bin") for k in range(kk)]
    decoders = [nn.load_mlp(directory / f"decoder_{k}.bin") for k in range(kk)]
    return TrainedModel(encoders, decoders, _train_from_dict(meta["config"]), scaler,
                        tuple(meta["normalizers"]), meta["best_validation_objective"], meta["best_iteration"])


def export_embeddings(model, views, labels, path):
    """CSV of view-averaged embeddings: header ``dim_0..dim_{F-1},label``, full precision."""
    z = embed(encode_views(model, views))
    labels = np.asarray(labels)
    if labels.shape[0] != z.shape[0]:
        raise InvalidInputError("labels and embeddings have different lengths")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"dim_{i}" for i in range(z.shape[1])] + ["label"])
        for row, lbl in zip(z, labels):
            w.writerow([repr(float(v)) for v in row] + [int(lbl)])
    return path


def read_embeddings(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, :-1], data[:, -1].astype(np.int64)


def history_rows(model):
    """Run-log rows ``(iteration, split, objective, r, l_or_q, seconds)``."""
    rows = []
    for h in model.history:
        rows.append((h.iteration, "train", h.train_objective, h.train_r, h.train_rec, h.seconds))
        rows.append((h.iteration, "val", h.val_objective, h.val_r, h.val_rec, h.seconds))
    return rows


def write_run_log(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "split", "objective", "r", "l_or_q", "seconds"])
        for it, split, obj, r, rec, sec in rows:
            w.writerow([it, split, fmt(obj), fmt(r), "NA" if np.isnan(rec) else fmt(rec), f"{sec:.3f}"])


# ---------------------------------------------------------------- cells

def fit_cell(method, lam, seed, data, train_cfg):
    """Train one model; returns ``(model, run-log rows)``."""
    if method in LINEAR_METHODS:
        return fit_linear(method, data.train.views, train_cfg.latent_dim), []
    overrides = {**_train_dict(train_cfg), "method": method, "seed": seed,
                 "lam": 0.0 if lam is None else lam}
    overrides["hidden"] = tuple(overrides["hidden"])
    model = train(data.train.views, data.val.views, TrainConfig(**overrides))
    return model, history_rows(model)


def score_model(model, data, n_clusters, eval_seed, method, lam, seed, svm_c):
    train_emb = embed(encode_views(model, data.train.views))
    test_views = encode_views(model, data.test.views)
    return evaluate_embeddings(train_emb, data.train.labels, embed(test_views), data.test.labels, test_views,
                               n_clusters, np.random.default_rng(eval_seed), method=method, lam=lam,
                               seed=seed, svm_c=svm_c)


def run_cell(cell, config):
    method, lam, seed = cell
    data = cached_dataset(config.synth)
    model, log_rows = fit_cell(method, lam, seed, data, config.train)
    record = score_model(model, data, config.synth.n_classes, config.eval_seed, method, lam, seed, config.svm_c)
    return record, log_rows


def _safe_cell(args):
    cell, config = args
    try:
        record, rows = run_cell(cell, config)
        return cell, record, rows, None
    except Exception as exc:  # noqa: BLE001 - a failed cell is recorded and the sweep continues
        return cell, None, [], f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}"


def _sort_key(method, lam, seed):
    return (ALL_METHODS.index(method), -1.0 if lam is None else lam, seed)


def record_row(rec):
    return [rec.method, fmt_lambda(rec.lam), str(rec.seed)] + [fmt(getattr(rec, m)) for m in METRICS]


def aggregate(records):
    """``{(method, lam): {metric: (mean, std)}}`` with population std over the rounded per-cell values."""
    groups = {}
    for rec in sorted(records, key=lambda r: _sort_key(r.method, r.lam, r.seed)):
        groups.setdefault((rec.method, rec.lam), []).append(rec)
    out = {}
    for key, recs in groups.items():
        # work from the printed 6-decimal values so the aggregate file is a pure function of results.csv
        cols = {m: [float(fmt(getattr(r, m))) for r in recs] for m in METRICS}
        out[key] = {m: (float(np.mean(v)), float(np.std(v))) for m, v in cols.items()}
    return out


def write_results(records, failures, config, out_dir):
    out = Path(out_dir)
    records = sorted(records, key=lambda r: _sort_key(r.method, r.lam, r.seed))
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for rec in records:
            w.writerow(record_row(rec))

    agg = aggregate(records)
    keys = sorted(agg, key=lambda k: _sort_key(k[0], k[1], 0))
    with open(out / "aggregate.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "lambda", "metric", "mean", "std", "n"])
        for key in keys:
            n = sum(1 for r in records if (r.method, r.lam) == key)
            for m in METRICS:
                mean, std = agg[key][m]
                w.writerow([key[0], fmt_lambda(key[1]), m, fmt(mean), fmt(std), n])

    with open(out / "correlation.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "lambda", "corr_mean", "corr_std"])
        for key in keys:
            mean, std = agg[key]["corr_coef"]
            w.writerow([key[0], fmt_lambda(key[1]), fmt(mean), fmt(std)])

    (out / "tables.md").write_text(render_tables(agg, config))

    with open(out / "failures.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "lambda", "seed", "error"])
        for (method, lam, seed), err in sorted(failures, key=lambda f: _sort_key(*f[0])):
            w.writerow([method, fmt_lambda(lam), seed, err.splitlines()[0]])
    return agg


def render_tables(agg, config):
    """One markdown table per metric: methods as rows, lambdas as columns."""
    titles = {"acc": "Clustering accuracy (ACC)", "nmi": "NMI", "ari": "ARI",
              "cla_acc": "Linear-SVM accuracy (CLA-ACC)", "corr_coef": "Test correlation coefficient"}
    lams = config.lambdas
    lines = []
    for m in METRICS:
        lines.append(f"### {titles[m]}\n")
        lines.append("| method | no λ | " + " | ".join(f"λ={lam:g}" for lam in lams) + " |")
        lines.append("|---" * (len(lams) + 2) + "|")
        for method in config.methods:
            cells = []
            if method in LAMBDA_FREE:
                v = agg.get((method, None))
                cells.append("—" if v is None else f"{v[m][0]:.2f}±{v[m][1]:.2f}")
                cells += [""] * len(lams)
            else:
                cells.append("")
                for lam in lams:
                    v = agg.get((method, lam))
                    cells.append("failed" if v is None else f"{v[m][0]:.2f}±{v[m][1]:.2f}")
            lines.append(f"| {method} | " + " | ".join(cells) + " |")
        lines.append("")
    return "\n".join(lines)


def run_experiment(config, progress=None):
    """Run every cell of the sweep and write all result files.

    Returns ``(records, failures)``; ``failures`` lists ``(cell, message)``.
    """
    out = Path(config.output_dir)
    (out / "logs").mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(config.to_manifest(), indent=2, sort_keys=True) + "\n")
    jobs = [(cell, config) for cell in config.cells()]
    records, failures = [], []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_safe_cell, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_safe_cell(job))
            if progress is not None:
                progress(results[-1])
    for cell, record, rows, err in results:
        method, lam, seed = cell
        if err is not None:
            failures.append((cell, err))
            continue
        records.append(record)
        if rows:
            write_run_log(rows, out / "logs" / f"{method}_lam{fmt_lambda(lam)}_seed{seed}.csv")
    write_results(records, failures, config, out)
    return records, failures


def read_results(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
