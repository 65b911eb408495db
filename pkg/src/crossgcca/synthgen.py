"""Synthetic multiview data with a categorical shared factor and strong private noise.

A label Z is drawn from a categorical distribution and one-hot encoded as the
shared vector g. Each view k gets a private vector c_k drawn from the Gaussian
component selected by Z (conditionally independent across views given Z),
rescaled to a fixed common/private power ratio. Finally x_k = v_k([g; c_k])
where v_k is a frozen random ReLU network.
"""

from dataclasses import asdict, dataclass, field
import json
from pathlib import Path

import numpy as np

from . import nn
from .errors import InvalidInputError


@dataclass(frozen=True)
class SynthConfig:
    class_probabilities: tuple = (0.1, 0.2, 0.3, 0.4)
    private_dims: tuple = (4, 4)
    view_dims: tuple = (64, 64)
    hidden: tuple = (32, 32, 32)
    activated_hidden: int | None = 2
    power_ratio_db: float = -18.0
    private_means_scale: float = 0.0
    split_sizes: tuple = (3000, 1500, 1500)
    seed: int = 0

    def __post_init__(self):
        p = np.asarray(self.class_probabilities, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise InvalidInputError("class probabilities must form a simplex")
        if len(self.private_dims) != len(self.view_dims) or len(self.view_dims) < 1:
            raise InvalidInputError("private_dims and view_dims need one entry per view")
        if min(self.private_dims) <= 0 or min(self.view_dims) <= 0 or min(self.split_sizes) < 0:
            raise InvalidInputError("dimensions must be positive")
        for name in ("class_probabilities", "private_dims", "view_dims", "hidden", "split_sizes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def n_classes(self):
        return len(self.class_probabilities)

    @property
    def n_views(self):
        return len(self.view_dims)

    def to_dict(self):
        return asdict(self)


@dataclass
class LabeledMultiviewDataset:
    views: list
    labels: np.ndarray
    latent_g: np.ndarray
    latent_c: list

    def __len__(self):
        return self.labels.shape[0]


@dataclass
class SyntheticSplits:
    train: LabeledMultiviewDataset
    val: LabeledMultiviewDataset
    test: LabeledMultiviewDataset
    generators: list
    config: SynthConfig = field(repr=False)

    def splits(self):
        return {"train": self.train, "val": self.val, "test": self.test}


def mixture_components(config, rng):
    """Per (view, class) mean vector and covariance ``A A^T + 0.1 I``."""
    comps = []
    for dim in config.private_dims:
        per_class = []
        for _ in range(config.n_classes):
            a = rng.standard_normal((dim, dim))
            mean = config.private_means_scale * rng.standard_normal(dim)
            per_class.append((mean, a @ a.T + 0.1 * np.eye(dim)))
        comps.append(per_class)
    return comps


def sample_latents(config, rng, n, components=None):
    """Draw ``n`` labels, their one-hot codes and the per-view private vectors."""
    if components is None:
        components = mixture_components(config, rng)
    labels = rng.choice(config.n_classes, size=n, p=np.asarray(config.class_probabilities))
    g = np.eye(config.n_classes)[labels]
    cs = []
    for k, dim in enumerate(config.private_dims):
        c = np.zeros((n, dim))
        for z, (mean, cov) in enumerate(components[k]):
            rows = np.flatnonzero(labels == z)
            if rows.size:
                chol = np.linalg.cholesky(cov)
                c[rows] = mean + rng.standard_normal((rows.size, dim)) @ chol.T
        cs.append(c)
    return labels, g, cs


def mean_power(x):
    return float(np.mean(np.sum(np.asarray(x) ** 2, axis=1)))


def apply_power_ratio(g, cs, ratio_db):
    """Rescale each private block so that power(g) / power(c_k) equals 10^(ratio_db/10).

    ``ratio_db = inf`` disables the private components (they become zero).
    """
    p_g = mean_power(g)
    if p_g <= 0:
        raise InvalidInputError("shared component has zero power")
    if np.isposinf(ratio_db):
        return g, [np.zeros_like(c) for c in cs]
    target = 10.0 ** (ratio_db / 10.0)
    scaled = []
    for c in cs:
        p_c = mean_power(c)
        if p_c <= 0:
            raise InvalidInputError("private component has zero power")
        scaled.append(c * np.sqrt(p_g / (p_c * target)))
    return g, scaled


def make_generators(config, rng):
    gens = []
    for dim, out in zip(config.private_dims, config.view_dims):
        spec = nn.MlpSpec((config.n_classes + dim, *config.hidden, out), config.activated_hidden)
        gens.append(nn.init_mlp(spec, rng, scheme="standard-normal"))
    return gens


def generate(config=None):
    """Build train/val/test splits that share one set of generator networks."""
    config = config or SynthConfig()
    rng = np.random.default_rng(config.seed)
    components = mixture_components(config, rng)
    generators = make_generators(config, rng)
    n_total = sum(config.split_sizes)
    labels, g, cs = sample_latents(config, rng, n_total, components)
    g, cs = apply_power_ratio(g, cs, config.power_ratio_db)
    views = [gen(np.hstack([g, c])) for gen, c in zip(generators, cs)]

    bounds = np.cumsum((0,) + config.split_sizes)
    parts = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        parts.append(LabeledMultiviewDataset([v[lo:hi] for v in views], labels[lo:hi], g[lo:hi],
                                             [c[lo:hi] for c in cs]))
    return SyntheticSplits(*parts, generators=generators, config=config)


def export_dataset(splits, out_dir):
    """Write one CSV per view per split, a labels CSV per split and a JSON manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name, ds in splits.splits().items():
        for k, x in enumerate(ds.views):
            path = out / f"{name}_view{k}.csv"
            np.savetxt(path, x, delimiter=",", fmt="%.17g")
            files.append(path.name)
        path = out / f"{name}_labels.csv"
        np.savetxt(path, ds.labels, fmt="%d")
        files.append(path.name)
    manifest = {"kind": "synthetic-multiview", "config": splits.config.to_dict(), "files": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out / "manifest.json"


def load_dataset(data_dir):
    """Read splits written by ``export_dataset``; returns ``{split: (views, labels)}``."""
    data_dir = Path(data_dir)
    manifest = json.loads((data_dir / "manifest.json").read_text())
    n_views = len(manifest["config"]["view_dims"])
    out = {}
    for name in ("train", "val", "test"):
        views = [np.loadtxt(data_dir / f"{name}_view{k}.csv", delimiter=",", ndmin=2) for k in range(n_views)]
        labels = np.loadtxt(data_dir / f"{name}_labels.csv", dtype=np.int64, ndmin=1)
        out[name] = (views, labels)
    return out
