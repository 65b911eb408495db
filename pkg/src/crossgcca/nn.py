"""Fully connected ReLU networks with hand-written backprop and AdamW.

One ``Mlp`` type covers the trainable encoders and decoders as well as the
frozen random generators used to synthesize views.

Checkpoint layout (``save_mlp`` / ``load_mlp``), all little-endian::

    8 bytes   magic b"XGMLP001"
    uint32    number of widths n
    uint32    number of activated hidden layers (0xFFFFFFFF = all)
    uint32*n  layer widths, input first
    float64   per layer l = 1..n-1: weights (out x in, row-major) then bias (out)
"""

from dataclasses import dataclass, field
import itertools
from pathlib import Path
import struct

import numpy as np

from .errors import ContractViolationError, InvalidInputError, NonFiniteError

MAGIC = b"XGMLP001"
_ALL = 0xFFFFFFFF
_ids = itertools.count()


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths (input, hidden..., output).

    ``activated_hidden`` limits how many hidden layers get a ReLU, counted
    from the input side; ``None`` activates them all. The output layer is
    always affine.
    """

    widths: tuple
    activated_hidden: int | None = None

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2 or min(widths) <= 0:
            raise InvalidInputError(f"invalid layer widths {self.widths}")
        object.__setattr__(self, "widths", widths)

    @property
    def n_layers(self):
        return len(self.widths) - 1

    def is_activated(self, layer):
        if layer >= self.n_layers - 1:
            return False
        return self.activated_hidden is None or layer < self.activated_hidden


@dataclass
class Mlp:
    spec: MlpSpec
    weights: list
    biases: list
    version: int = 0
    uid: int = field(default_factory=lambda: next(_ids))

    @property
    def param_count(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self):
        return Mlp(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat_params(self):
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def set_flat_params(self, flat):
        pos = 0
        for w, b in zip(self.weights, self.biases):
            w[...] = flat[pos:pos + w.size].reshape(w.shape)
            pos += w.size
            b[...] = flat[pos:pos + b.size]
            pos += b.size
        self.version += 1

    def __call__(self, x):
        return forward(self, x)[0]


@dataclass
class Tape:
    uid: int
    version: int
    inputs: list
    preacts: list


@dataclass
class Gradients:
    weights: list
    biases: list

    def flat(self):
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def __add__(self, other):
        return Gradients([a + b for a, b in zip(self.weights, other.weights)],
                         [a + b for a, b in zip(self.biases, other.biases)])

    def scaled(self, factor):
        return Gradients([factor * w for w in self.weights], [factor * b for b in self.biases])


def zero_gradients(mlp):
    return Gradients([np.zeros_like(w) for w in mlp.weights], [np.zeros_like(b) for b in mlp.biases])


def init_mlp(spec, rng, scheme="he-uniform"):
    """Draw parameters for ``spec``.

    ``he-uniform`` draws weights from U(-sqrt(6/fan_in), sqrt(6/fan_in)) with
    zero biases. ``standard-normal`` draws every weight and bias from N(0, 1),
    which is how the random view generators are built.
    """
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.widths[:-1], spec.widths[1:]):
        if scheme == "he-uniform":
            bound = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        elif scheme == "standard-normal":
            weights.append(rng.standard_normal((fan_out, fan_in)))
            biases.append(rng.standard_normal(fan_out))
        else:
            raise InvalidInputError(f"unknown init scheme {scheme!r}")
    return Mlp(spec, weights, biases)


def forward(mlp, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != mlp.spec.widths[0]:
        raise InvalidInputError(f"expected input of width {mlp.spec.widths[0]}, got shape {x.shape}")
    inputs, preacts = [], []
    h = x
    for layer, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        inputs.append(h)
        z = h @ w.T + b
        preacts.append(z)
        h = np.maximum(z, 0.0) if mlp.spec.is_activated(layer) else z
    if not np.all(np.isfinite(h)):
        raise NonFiniteError("non-finite network output")
    return h, Tape(mlp.uid, mlp.version, inputs, preacts)


def backward(mlp, tape, grad_y):
    """Backpropagate ``grad_y`` (dLoss/dOutput) through the network.

    Returns ``(Gradients, grad_x)``.
    """
    if tape.uid != mlp.uid or tape.version != mlp.version:
        raise ContractViolationError("tape was recorded on a different network or parameter version")
    delta = np.asarray(grad_y, dtype=np.float64)
    if delta.shape != tape.preacts[-1].shape:
        raise InvalidInputError(f"grad_y shape {delta.shape} != output shape {tape.preacts[-1].shape}")
    n = mlp.spec.n_layers
    gw, gb = [None] * n, [None] * n
    for layer in range(n - 1, -1, -1):
        if mlp.spec.is_activated(layer):
            delta = delta * (tape.preacts[layer] > 0)
        gw[layer] = delta.T @ tape.inputs[layer]
        gb[layer] = delta.sum(axis=0)
        delta = delta @ mlp.weights[layer]
    return Gradients(gw, gb), delta


@dataclass
class AdamState:
    first_moment: Gradients
    second_moment: Gradients
    learning_rate: float = 1e-3
    weight_decay: float = 1e-3
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_state(mlp, learning_rate=1e-3, weight_decay=1e-3):
    if learning_rate <= 0 or weight_decay < 0:
        raise InvalidInputError("learning_rate must be positive and weight_decay non-negative")
    return AdamState(zero_gradients(mlp), zero_gradients(mlp), learning_rate, weight_decay)


def adamw_step(mlp, grads, state):
    """One decoupled-weight-decay Adam update, applied in place.

    Weight decay touches weight matrices only, never biases.
    """
    for g in itertools.chain(grads.weights, grads.biases):
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    lr, wd = state.learning_rate, state.weight_decay
    params = [(mlp.weights, grads.weights, state.first_moment.weights, state.second_moment.weights, True),
              (mlp.biases, grads.biases, state.first_moment.biases, state.second_moment.biases, False)]
    for ps, gs, ms, vs, decay in params:
        for p, g, m, v in zip(ps, gs, ms, vs):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            step = (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
            if decay:
                step = step + wd * p
            p -= lr * step
    mlp.version += 1
    return mlp, state


def save_mlp(mlp, path):
    spec = mlp.spec
    act = _ALL if spec.activated_hidden is None else spec.activated_hidden
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(f"<II{len(spec.widths)}I", len(spec.widths), act, *spec.widths))
        for w, b in zip(mlp.weights, mlp.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_mlp(path):
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise InvalidInputError(f"{path} is not an MLP checkpoint")
    n, act = struct.unpack_from("<II", data, 8)
    widths = struct.unpack_from(f"<{n}I", data, 16)
    spec = MlpSpec(widths, None if act == _ALL else act)
    pos = 16 + 4 * n
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w = np.frombuffer(data, "<f8", fan_out * fan_in, pos).reshape(fan_out, fan_in)
        pos += 8 * w.size
        b = np.frombuffer(data, "<f8", fan_out, pos)
        pos += 8 * b.size
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    if pos != len(data):
        raise InvalidInputError(f"{path}: trailing bytes in checkpoint")
    return Mlp(spec, weights, biases)
