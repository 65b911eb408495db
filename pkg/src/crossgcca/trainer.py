"""Alternating training of deep multiview encoders against an orthonormal shared target.

Each outer iteration first solves for the shared target in closed form (an
orthogonal Procrustes problem on the summed, centered encodings), then runs
one shuffled epoch of minibatch AdamW updates on every encoder and decoder.
"""

from dataclasses import dataclass, field
import logging
import time
import warnings

import numpy as np

from . import nn
from .errors import DegenerateTargetWarning, InvalidInputError, NonFiniteError
from .numerics import RANK_TOL, complete_orthonormal, thin_svd
from .objectives import ObjectiveSpec, evaluate_objective, view_normalizers

log = logging.getLogger(__name__)

TARGET_TOL = 1e-8
SCALERS = {"zscore": "fit", "global": "fit_global", "none": "identity"}


@dataclass
class SharedTarget:
    """Shared-factor realizations ``g`` (M x F) with ``g.T @ g = M I`` and zero column means."""

    g: np.ndarray
    degenerate: bool = False

    def check(self, tol=TARGET_TOL):
        m, f = self.g.shape
        gram_err = np.max(np.abs(self.g.T @ self.g / m - np.eye(f)))
        mean_err = np.max(np.abs(self.g.mean(axis=0)))
        if gram_err > tol or mean_err > 1e-10 * max(1.0, np.sqrt(f)):
            raise AssertionError(f"shared target off the constraint set: gram {gram_err:.2e}, mean {mean_err:.2e}")


def update_shared_target(encodings):
    """Closed-form minimizer of sum_k ||f_k - G||^2 over centered G with G^T G = M I.

    Equivalent to maximizing trace(G^T Ybar) where Ybar is the column-centered
    sum of encodings; the answer is sqrt(M) U V^T from the thin SVD of Ybar.
    """
    y = np.sum([np.asarray(z, dtype=np.float64) for z in encodings], axis=0)
    m, f = y.shape
    if m <= f:
        raise InvalidInputError("need more samples than target dimensions")
    ybar = y - y.mean(axis=0)
    svd = thin_svd(ybar)
    s = svd.singular_values
    good = s > RANK_TOL * max(s[0], np.finfo(float).tiny)
    u = svd.u
    degenerate = not np.all(good)
    if degenerate:
        warnings.warn(f"summed encodings have rank {int(good.sum())} < F={f}", DegenerateTargetWarning,
                      stacklevel=2)
        # completed columns must stay orthogonal to the all-ones vector to keep G centered
        ones = np.full((m, 1), 1.0 / np.sqrt(m))
        u = complete_orthonormal(u[:, good], f - int(good.sum()), avoid=ones)
    g = np.sqrt(m) * (u @ svd.v.T)
    # the SVD route leaves ~1e-16 of column mean from rounding; remove it exactly
    g -= g.mean(axis=0)
    return SharedTarget(g, degenerate)


@dataclass
class TrainConfig:
    method: str = "proposed"
    lam: float = 0.1
    outer_iterations: int = 40
    learning_rate: float = 1e-3
    weight_decay: float = 1e-3
    batch_size: int = 100
    seed: int = 0
    latent_dim: int = 4
    hidden: tuple = (32, 32, 32)
    activated_hidden: int | None = None
    normalize_r: bool = False
    validation_target: str = "local"
    scaling: str = "zscore"
    check_invariants: bool = True

    def __post_init__(self):
        if self.scaling not in SCALERS:
            raise InvalidInputError(f"scaling must be one of {sorted(SCALERS)}")
        if self.validation_target not in ("local", "shared"):
            raise InvalidInputError("validation_target must be 'local' or 'shared'")
        if self.batch_size < 1 or self.outer_iterations < 0:
            raise InvalidInputError("batch_size must be positive and outer_iterations non-negative")


@dataclass
class Standardizer:
    means: list
    scales: list

    @classmethod
    def fit(cls, views):
        means = [x.mean(axis=0) for x in views]
        scales = []
        for x in views:
            sd = x.std(axis=0)
            scales.append(np.where(sd > 0, sd, 1.0))
        return cls(means, scales)

    @classmethod
    def fit_global(cls, views):
        """Center each view and divide by one scalar so the mean squared entry is 1."""
        means = [x.mean(axis=0) for x in views]
        scales = []
        for x, mu in zip(views, means):
            rms = np.sqrt(np.mean((x - mu) ** 2))
            scales.append(np.full(x.shape[1], rms if rms > 0 else 1.0))
        return cls(means, scales)

    @classmethod
    def identity(cls, views):
        return cls([np.zeros(x.shape[1]) for x in views], [np.ones(x.shape[1]) for x in views])

    def __call__(self, views):
        return [(np.asarray(x, dtype=np.float64) - mu) / sd for x, mu, sd in zip(views, self.means, self.scales)]


@dataclass
class HistoryEntry:
    iteration: int
    train_objective: float
    train_r: float
    train_rec: float
    val_objective: float
    val_r: float
    val_rec: float
    seconds: float


@dataclass
class TrainedModel:
    encoders: list
    decoders: list
    config: TrainConfig
    standardizer: Standardizer
    normalizers: tuple
    best_validation_objective: float = float("inf")
    best_iteration: int = -1
    history: list = field(default_factory=list)
    target: SharedTarget | None = None

    def encode(self, views):
        """Per-view encodings of raw (unstandardized) views."""
        return [f(x) for f, x in zip(self.encoders, self.standardizer(views))]


def network_specs(input_dims, config):
    enc = [nn.MlpSpec((d, *config.hidden, config.latent_dim), config.activated_hidden) for d in input_dims]
    dec = [nn.MlpSpec((config.latent_dim, *config.hidden, d), config.activated_hidden) for d in input_dims]
    return enc, dec


def _objective_spec(config, normalizers):
    return ObjectiveSpec(config.method, config.lam if config.method != "dgcca" else 0.0, normalizers,
                         config.normalize_r)


def full_objective(spec, views, encoders, decoders, g=None):
    """Objective on a whole split. Without ``g`` the split's own Procrustes target is used."""
    if g is None:
        g = update_shared_target([f(x) for f, x in zip(encoders, views)]).g
    loss, _, _ = evaluate_objective(spec, views, encoders, decoders, g)
    rec = loss.l_value if spec.method == "dccae" else loss.q_value
    return loss.total, loss.r_value, rec


def train(train_views, val_views, config, log_stream=None):
    """Run the alternating optimizer and return the early-stopped model.

    ``log_stream``, when given, is a callable receiving each ``HistoryEntry``
    as soon as it is recorded.
    """
    kk = len(train_views)
    if kk < 2 or len(val_views) != kk:
        raise InvalidInputError("need at least two views in both train and validation splits")
    m = train_views[0].shape[0]
    if any(x.shape[0] != m for x in train_views):
        raise InvalidInputError("training views are not row-aligned")
    if val_views[0].shape[0] == 0:
        raise InvalidInputError("validation split is empty")
    if config.batch_size > m:
        raise InvalidInputError(f"batch_size {config.batch_size} exceeds training size {m}")

    scaler = getattr(Standardizer, SCALERS[config.scaling])(train_views)
    xs = scaler(train_views)
    vs = scaler(val_views)
    normalizers = view_normalizers(xs)
    spec = _objective_spec(config, normalizers)

    init_seq, shuffle_seq = np.random.SeedSequence(config.seed).spawn(2)
    init_rng = np.random.default_rng(init_seq)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    enc_specs, dec_specs = network_specs([x.shape[1] for x in xs], config)
    encoders = [nn.init_mlp(s, init_rng) for s in enc_specs]
    decoders = [nn.init_mlp(s, init_rng) for s in dec_specs]
    enc_states = [nn.adam_state(f, config.learning_rate, config.weight_decay) for f in encoders]
    dec_states = [nn.adam_state(w, config.learning_rate, config.weight_decay) for w in decoders]

    model = TrainedModel([f.copy() for f in encoders], [w.copy() for w in decoders], config, scaler, normalizers)
    n_batches = m // config.batch_size
    target = None
    for it in range(config.outer_iterations):
        start = time.perf_counter()
        target = update_shared_target([f(x) for f, x in zip(encoders, xs)])
        if config.check_invariants:
            target.check()
        perm = shuffle_rng.permutation(m)
        for bi in range(n_batches):
            idx = perm[bi * config.batch_size:(bi + 1) * config.batch_size]
            try:
                _, enc_grads, dec_grads = evaluate_objective(
                    spec, [x[idx] for x in xs], encoders, decoders, target.g[idx])
                for f, gr, st in zip(encoders, enc_grads, enc_states):
                    nn.adamw_step(f, gr, st)
                if dec_grads is not None:
                    for w, gr, st in zip(decoders, dec_grads, dec_states):
                        nn.adamw_step(w, gr, st)
            except NonFiniteError as exc:
                raise NonFiniteError(f"non-finite loss at outer iteration {it}, batch {bi}: {exc}") from exc

        train_obj, train_r, train_rec = full_objective(spec, xs, encoders, decoders, target.g)
        val_g = None
        if config.validation_target == "shared":
            val_g = _shared_val_target(target.g, encoders, xs, vs)
        val_obj, val_r, val_rec = full_objective(spec, vs, encoders, decoders, val_g)
        entry = HistoryEntry(it, train_obj, train_r, train_rec, val_obj, val_r, val_rec,
                             time.perf_counter() - start)
        model.history.append(entry)
        if log_stream is not None:
            log_stream(entry)
        log.debug("iter %d train %.6f val %.6f", it, train_obj, val_obj)
        if val_obj < model.best_validation_objective:
            model.best_validation_objective = val_obj
            model.best_iteration = it
            model.encoders = [f.copy() for f in encoders]
            model.decoders = [w.copy() for w in decoders]
    model.target = target
    return model


def _shared_val_target(train_g, encoders, xs, vs):
    """Validation target taken from the training target's linear relation to the encodings.

    Validation rows have no training-target rows, so G is mapped through the
    least-squares fit of the training target onto the summed training
    encodings, then re-projected onto the constraint set.
    """
    y_tr = np.sum([f(x) for f, x in zip(encoders, xs)], axis=0)
    mu = y_tr.mean(axis=0)
    coef, *_ = np.linalg.lstsq(y_tr - mu, train_g, rcond=None)
    y_val = np.sum([f(x) for f, x in zip(encoders, vs)], axis=0)
    return update_shared_target([(y_val - mu) @ coef]).g


def per_iteration_cost(m, f, batch, param_counts):
    """Dominant operation count of one outer iteration: M F^2 + |B| sum_k d_k."""
    if min(m, f, batch) <= 0 or any(d <= 0 for d in param_counts):
        raise InvalidInputError("all inputs must be positive")
    return m * f * f + batch * sum(param_counts)
