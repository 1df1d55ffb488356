"""Encoder and prediction-head MLPs, SGD with momentum, EMA teacher update.

The desk-scale encoder is an MLP ending in row-wise L2 normalization, so
its outputs can feed cosine-similarity losses directly (no projection
layer). The student additionally owns a small prediction head; the teacher
is a non-trainable copy of the student encoder updated only by EMA.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ContractError, ShapeError
from .tensor import Tensor


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths for an MLP: input, hidden..., embedding dim.

    Rectified-linear activations sit between layers, none after the last.
    With ``final_normalize`` every output row is scaled to unit L2 norm.
    """

    layer_widths: tuple[int, ...]
    final_normalize: bool = False

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ContractError("MlpSpec: need at least input and output widths")
        if any(w < 1 for w in widths):
            raise ContractError(f"MlpSpec: widths must be positive, got {widths}")
        if widths[-1] < 2:
            raise ContractError("MlpSpec: embedding dim must be at least 2")

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def output_dim(self) -> int:
        return self.layer_widths[-1]


class MlpParams:
    """Weights and biases of one MLP, each a leaf tensor."""

    def __init__(self, spec: MlpSpec, weights: list[Tensor], biases: list[Tensor],
                 trainable: bool = True):
        self.spec = spec
        self.weights = weights
        self.biases = biases
        self.trainable = trainable

    def parameters(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self, trainable: bool) -> "MlpParams":
        """Deep copy; non-trainable copies keep permanent zero grad buffers."""
        make = Tensor.parameter if trainable else Tensor.frozen
        ws = [make(w.data) for w in self.weights]
        bs = [make(b.data) for b in self.biases]
        return MlpParams(self.spec, ws, bs, trainable)

    def detached(self) -> "MlpParams":
        """Lightweight view sharing buffers but building no graph."""
        ws = [Tensor(w.data) for w in self.weights]
        bs = [Tensor(b.data) for b in self.biases]
        return MlpParams(self.spec, ws, bs, trainable=False)


def init_params(spec: MlpSpec, seed, trainable: bool = True) -> MlpParams:
    """Initialise an MLP: weights uniform in +-1/sqrt(fan_in), biases zero.

    Deterministic for a given seed; the seed may be an int or a sequence
    of ints (a numpy SeedSequence entropy list).
    """
    rng = np.random.default_rng(seed)
    make = Tensor.parameter if trainable else Tensor.frozen
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        limit = 1.0 / math.sqrt(fan_in)
        weights.append(make(rng.uniform(-limit, limit, size=(fan_in, fan_out))))
        biases.append(make(np.zeros(fan_out)))
    return MlpParams(spec, weights, biases, trainable)


def mlp_forward(params: MlpParams, x: Tensor) -> Tensor:
    """Run a [b, d_in] batch through the MLP.

    Builds a differentiation graph only when the parameters (or input)
    are trainable, so teacher-side passes stay constant by construction.
    """
    if x.data.ndim != 2:
        raise ShapeError(f"mlp_forward: need a [batch, features] input, got {x.data.shape}")
    if x.data.shape[1] != params.spec.input_dim:
        raise ShapeError(
            f"mlp_forward: input width {x.data.shape[1]} does not match "
            f"spec width {params.spec.input_dim}"
        )
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = T.add(T.matmul(h, w), b)
        if i != last:
            h = T.relu(h)
    if params.spec.final_normalize:
        h = T.l2_normalize(h)
    return h


@dataclass
class SgdState:
    """SGD-with-momentum state: one velocity buffer per parameter."""

    lr: float
    momentum: float = 0.9
    weight_decay: float = 1e-4
    velocities: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.lr < 0:
            raise ContractError("SgdState: lr must be non-negative")

    @staticmethod
    def for_params(params: list[Tensor], lr: float, momentum: float = 0.9,
                   weight_decay: float = 1e-4) -> "SgdState":
        state = SgdState(lr=lr, momentum=momentum, weight_decay=weight_decay)
        state.velocities = [np.zeros_like(p.data) for p in params]
        return state


def sgd_step(params: list[Tensor], grads: list[np.ndarray] | None, state: SgdState) -> None:
    """In-place update: v <- momentum*v + (grad + wd*theta); theta <- theta - lr*v.

    ``grads=None`` reads each parameter's own grad buffer. Teacher
    (non-trainable) parameters are rejected.
    """
    if grads is None:
        grads = [p.grad for p in params]
    if len(grads) != len(params) or len(state.velocities) != len(params):
        raise ShapeError("sgd_step: params, grads and velocities must align")
    for p, g, v in zip(params, grads, state.velocities):
        if not p.requires_grad:
            raise ContractError("sgd_step: refusing to update a non-trainable (teacher) parameter")
        if g is None or g.shape != p.data.shape or v.shape != p.data.shape:
            raise ShapeError(f"sgd_step: buffer shape mismatch for parameter {p.data.shape}")
        v *= state.momentum
        v += g + state.weight_decay * p.data
        p.data -= state.lr * v


class ModelPair:
    """Student encoder + predictor and the EMA teacher encoder.

    The teacher shares the student encoder's architecture, is created as
    an exact copy at step 0, and is permanently non-trainable; only
    :func:`ema_update` may move it.
    """

    def __init__(self, student_encoder: MlpParams, student_predictor: MlpParams,
                 teacher_encoder: MlpParams, momentum: float):
        if not 0.0 <= momentum <= 1.0:
            raise ContractError(f"ModelPair: momentum must lie in [0, 1], got {momentum}")
        if teacher_encoder.spec != student_encoder.spec:
            raise ContractError("ModelPair: teacher and student encoder shapes differ")
        if teacher_encoder.trainable:
            raise ContractError("ModelPair: teacher must be non-trainable")
        if student_predictor.spec.input_dim != student_encoder.spec.output_dim:
            raise ShapeError("ModelPair: predictor input must match encoder embedding dim")
        self.student_encoder = student_encoder
        self.student_predictor = student_predictor
        self.teacher_encoder = teacher_encoder
        self.momentum = float(momentum)

    @staticmethod
    def create(encoder_spec: MlpSpec, predictor_spec: MlpSpec, momentum: float,
               seed: int) -> "ModelPair":
        encoder = init_params(encoder_spec, [seed, 0])
        predictor = init_params(predictor_spec, [seed, 1])
        teacher = encoder.copy(trainable=False)
        return ModelPair(encoder, predictor, teacher, momentum)

    def student_parameters(self) -> list[Tensor]:
        return self.student_encoder.parameters() + self.student_predictor.parameters()


def ema_update(pair: ModelPair) -> None:
    """theta_t <- m * theta_t + (1 - m) * theta_s, elementwise, in place.

    m = 1 leaves the teacher bitwise untouched (frozen-teacher mode);
    m = 0 copies the student bitwise.
    """
    m = pair.momentum
    if m == 1.0:
        return
    for t, s in zip(pair.teacher_encoder.parameters(), pair.student_encoder.parameters()):
        if m == 0.0:
            t.data[...] = s.data
        else:
            t.data[...] = m * t.data + (1.0 - m) * s.data


def default_encoder_spec(input_dim: int) -> MlpSpec:
    """Desk-scale encoder: [input, 256, 128, 64] ending in L2 normalization."""
    return MlpSpec((input_dim, 256, 128, 64), final_normalize=True)


def default_predictor_spec(embed_dim: int, hidden: int = 64) -> MlpSpec:
    """Student prediction head: one hidden layer, output matching the embedding."""
    return MlpSpec((embed_dim, hidden, embed_dim), final_normalize=False)
