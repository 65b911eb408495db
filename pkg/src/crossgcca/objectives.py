"""Loss terms for the deep multiview objectives and their weighted combination.

All terms are batch means. Each term returns its value together with the
gradient w.r.t. every encoding it touched and, for the reconstruction terms,
the parameter gradients of the decoders it ran.

* ``r_term``: sum_k mean ||f_k - g||^2 (distance of each encoding to the shared target)
* ``l_term``: sum_k mean ||x_k - w_k(f_k)||^2 / n_k (self-reconstruction)
* ``q_term``: 1/(K-1) sum_k sum_{j != k} mean ||x_k - w_k(f_j)||^2 / n_k (cross-reconstruction)
"""

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import InvalidInputError, NonFiniteError

METHODS = ("dgcca", "dccae", "proposed")


@dataclass(frozen=True)
class ObjectiveSpec:
    method: str
    lam: float
    normalizers: tuple
    normalize_r: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(f"unknown method {self.method!r}")
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidInputError("lambda must lie in [0, 1]")
        if any(n <= 0 for n in self.normalizers):
            raise InvalidInputError("normalizers must be positive")

    @property
    def uses_decoders(self):
        return self.method != "dgcca"


@dataclass
class TermResult:
    value: float
    encoding_grads: list
    decoder_grads: list | None = None


@dataclass
class LossBreakdown:
    r_value: float
    l_value: float
    q_value: float
    total: float
    encoding_grads: list
    decoder_grads: list | None


def view_normalizers(views):
    """Mean squared row norm of each view; used to turn MSEs into relative MSEs."""
    out = []
    for x in views:
        n = float(np.mean(np.sum(np.asarray(x) ** 2, axis=1)))
        if n <= 0:
            raise InvalidInputError("a view has zero power")
        out.append(n)
    return tuple(out)


def r_term(encodings, g_batch, normalizers=None):
    g_batch = np.asarray(g_batch)
    value = 0.0
    grads = []
    for k, z in enumerate(encodings):
        if z.shape != g_batch.shape:
            raise InvalidInputError(f"encoding {k} has shape {z.shape}, target has {g_batch.shape}")
        b = z.shape[0]
        scale = 1.0 if normalizers is None else 1.0 / normalizers[k]
        diff = z - g_batch
        value += scale * np.sum(diff * diff) / b
        grads.append((2.0 * scale / b) * diff)
    return TermResult(float(value), grads)


def _reconstruction(x, decoder, code, scale):
    """Return (value, grad wrt code, decoder grads) for scale * mean ||x - decoder(code)||^2."""
    out, tape = nn.forward(decoder, code)
    if out.shape != x.shape:
        raise InvalidInputError(f"decoder output {out.shape} does not match view {x.shape}")
    diff = out - x
    b = x.shape[0]
    value = scale * np.sum(diff * diff) / b
    pgrads, gcode = nn.backward(decoder, tape, (2.0 * scale / b) * diff)
    return value, gcode, pgrads


def l_term(views, encodings, decoders, normalizers):
    value = 0.0
    enc_grads, dec_grads = [], []
    for x, z, dec, n in zip(views, encodings, decoders, normalizers):
        v, gz, gp = _reconstruction(np.asarray(x), dec, z, 1.0 / n)
        value += v
        enc_grads.append(gz)
        dec_grads.append(gp)
    return TermResult(float(value), enc_grads, dec_grads)


def q_term(views, encodings, decoders, normalizers):
    """Cross-reconstruction: decoder k rebuilds view k from every other view's encoding."""
    kk = len(views)
    if kk < 2:
        raise InvalidInputError("cross-reconstruction needs at least two views")
    value = 0.0
    enc_grads = [np.zeros_like(z) for z in encodings]
    dec_grads = [nn.zero_gradients(d) for d in decoders]
    for k in range(kk):
        x = np.asarray(views[k])
        scale = 1.0 / (normalizers[k] * (kk - 1))
        for j in range(kk):
            if j == k:
                continue
            v, gz, gp = _reconstruction(x, decoders[k], encodings[j], scale)
            value += v
            enc_grads[j] += gz
            dec_grads[k] = dec_grads[k] + gp
    return TermResult(float(value), enc_grads, dec_grads)


def compose(spec, r, l=None, q=None):
    """Weight the individual terms into the training objective of ``spec.method``.

    dgcca: R. dccae: (1-lam) R + lam L. proposed: (1-lam) R + lam Q.
    """
    if spec.method == "dgcca":
        total = r.value
        enc = list(r.encoding_grads)
        dec = None
    else:
        other = l if spec.method == "dccae" else q
        if other is None:
            raise InvalidInputError(f"{spec.method} needs its reconstruction term")
        a, b = 1.0 - spec.lam, spec.lam
        total = a * r.value + b * other.value
        enc = [a * gr + b * go for gr, go in zip(r.encoding_grads, other.encoding_grads)]
        dec = [g.scaled(b) for g in other.decoder_grads]
    if not np.isfinite(total):
        raise NonFiniteError("objective is not finite")
    return LossBreakdown(
        r_value=r.value,
        l_value=l.value if l is not None else float("nan"),
        q_value=q.value if q is not None else float("nan"),
        total=float(total),
        encoding_grads=enc,
        decoder_grads=dec,
    )


def evaluate_objective(spec, views, encoders, decoders, g):
    """Full forward/backward of the training objective on one batch.

    Returns the ``LossBreakdown`` plus the parameter gradients of every
    encoder and (when used) decoder.
    """
    encodings, tapes = zip(*(nn.forward(f, x) for f, x in zip(encoders, views)))
    r = r_term(encodings, g, spec.normalizers if spec.normalize_r else None)
    l = q = None
    if spec.method == "dccae":
        l = l_term(views, encodings, decoders, spec.normalizers)
    elif spec.method == "proposed":
        q = q_term(views, encodings, decoders, spec.normalizers)
    loss = compose(spec, r, l, q)
    enc_param_grads = [nn.backward(f, tape, gz)[0] for f, tape, gz in zip(encoders, tapes, loss.encoding_grads)]
    return loss, enc_param_grads, loss.decoder_grads
