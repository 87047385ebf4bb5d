"""Shallow ReLU networks: parameters, forward/backward passes, Adam, LR schedule.

All arithmetic is float64. A network with widths ``d_0..d_D`` applies
``ReLU(W_j h + b_j)`` for the hidden layers and a plain affine map at the
output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._kernels import backend as _kern
from .errors import DimensionError, DivergenceError

FULL = "full"


@dataclass(frozen=True)
class MlpSpec:
    widths: tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2:
            raise ValueError("an MLP needs at least input and output widths (D >= 1)")
        if any(w < 1 for w in widths):
            raise ValueError(f"all widths must be >= 1, got {widths}")
        object.__setattr__(self, "widths", widths)

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    @property
    def n_params(self) -> int:
        w = self.widths
        return sum(w[j + 1] * w[j] + w[j + 1] for j in range(self.depth))

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    def widths_array(self) -> np.ndarray:
        return np.asarray(self.widths, dtype=np.int64)


class MlpParams:
    """Weights and biases of one network, stored in a single flat buffer.

    ``weights[j]`` and ``biases[j]`` are views into ``flat`` so optimizers
    can update everything at once.
    """

    def __init__(self, spec: MlpSpec, flat: np.ndarray | None = None):
        self.spec = spec
        if flat is None:
            flat = np.zeros(spec.n_params)
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (spec.n_params,):
            raise DimensionError(
                f"flat buffer has shape {flat.shape}, expected ({spec.n_params},)")
        self.flat = flat
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        off = 0
        w = spec.widths
        for j in range(spec.depth):
            din, dout = w[j], w[j + 1]
            self.weights.append(flat[off:off + dout * din].reshape(dout, din))
            off += dout * din
            self.biases.append(flat[off:off + dout])
            off += dout

    @classmethod
    def from_arrays(cls, weights: Sequence, biases: Sequence) -> "MlpParams":
        weights = [np.atleast_2d(np.asarray(W, dtype=np.float64)) for W in weights]
        biases = [np.atleast_1d(np.asarray(b, dtype=np.float64)) for b in biases]
        if len(weights) != len(biases) or not weights:
            raise DimensionError("need one bias vector per weight matrix")
        widths = [weights[0].shape[1]] + [W.shape[0] for W in weights]
        spec = MlpSpec(tuple(widths))
        params = cls(spec)
        for j, (W, b) in enumerate(zip(weights, biases)):
            if W.shape != params.weights[j].shape or b.shape != params.biases[j].shape:
                raise DimensionError(f"layer {j + 1}: shapes {W.shape}, {b.shape} do not chain")
            params.weights[j][...] = W
            params.biases[j][...] = b
        return params

    def copy(self) -> "MlpParams":
        return MlpParams(self.spec, self.flat.copy())

    def zeros_like(self) -> "MlpParams":
        return MlpParams(self.spec)

    def __repr__(self):
        return f"MlpParams(widths={self.spec.widths})"


@dataclass(frozen=True)
class ForwardTrace:
    hidden: list[np.ndarray]
    output: np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    t_max: float
    t_min: float
    epochs: int
    batch_size: int | str = FULL
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not (self.t_min > 0 and self.t_min <= self.t_max):
            raise ValueError(f"need 0 < t_min <= t_max, got t_min={self.t_min}, t_max={self.t_max}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError(f"epochs must be a positive integer, got {self.epochs}")
        if self.batch_size != FULL and (int(self.batch_size) != self.batch_size
                                        or self.batch_size < 1):
            raise ValueError(f"batch_size must be 'full' or a positive integer, got {self.batch_size!r}")

    @property
    def decay_rate(self) -> float:
        return math.log(self.t_max / self.t_min) / self.epochs


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def fresh(cls, params: MlpParams) -> "AdamState":
        return cls(np.zeros_like(params.flat), np.zeros_like(params.flat), 0)

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.step)


def xavier_init(spec: MlpSpec, seed: int | np.random.Generator) -> MlpParams:
    """Glorot-uniform weights, zero biases.

    ``W_j ~ U[-L, L]`` with ``L = sqrt(6 / (d_{j-1} + d_j))``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    params = MlpParams(spec)
    for W in params.weights:
        dout, din = W.shape
        limit = math.sqrt(6.0 / (din + dout))
        W[...] = rng.uniform(-limit, limit, size=W.shape)
    return params


def make_rng(*seed: int) -> np.random.Generator:
    """The run PRNG: PCG64 seeded through ``SeedSequence(seed)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(seed))))


def _as_batch(x, dim: int, name: str) -> np.ndarray:
    X = np.asarray(x, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1) if dim != 1 or X.size == 1 else X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != dim:
        raise DimensionError(f"{name} must have {dim} columns, got shape {np.shape(x)}")
    return np.ascontiguousarray(X)


def forward(spec: MlpSpec, params: MlpParams, x) -> ForwardTrace:
    """Evaluate one input vector, recording every hidden activation."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != spec.input_dim:
        raise DimensionError(f"input must be a vector of length {spec.input_dim}, got shape {x.shape}")
    hidden = []
    h = x
    for W, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.maximum(W @ h + b, 0.0)
        hidden.append(h)
    out = params.weights[-1] @ h + params.biases[-1]
    return ForwardTrace(hidden, out)


def predict(params: MlpParams, X) -> np.ndarray:
    """Batched network output, shape ``(n, d_D)``."""
    X = _as_batch(X, params.spec.input_dim, "inputs")
    return _kern.forward(params.flat, params.spec.widths_array(), X)


def last_hidden(params: MlpParams, X) -> np.ndarray:
    """Batched activations of the last hidden layer (the input for D == 1)."""
    X = _as_batch(X, params.spec.input_dim, "inputs")
    return _kern.last_hidden(params.flat, params.spec.widths_array(), X)


def mse_loss(preds, targets) -> float:
    """``(1/2N) sum ||y - y_hat||^2``."""
    P = np.asarray(preds, dtype=np.float64)
    T = np.asarray(targets, dtype=np.float64)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    if T.ndim == 1:
        T = T.reshape(-1, 1)
    if P.shape != T.shape:
        raise DimensionError(f"prediction shape {P.shape} != target shape {T.shape}")
    if P.shape[0] == 0:
        raise ValueError("mse_loss needs at least one sample")
    R = T - P
    return 0.5 * float(np.sum(R * R)) / P.shape[0]


def backward(spec: MlpSpec, params: MlpParams, inputs, targets) -> tuple[MlpParams, float]:
    """Exact gradient of :func:`mse_loss` over a batch, plus the loss value."""
    X = _as_batch(inputs, spec.input_dim, "inputs")
    Y = _as_batch(targets, spec.output_dim, "targets")
    if X.shape[0] != Y.shape[0]:
        raise DimensionError(f"{X.shape[0]} inputs but {Y.shape[0]} targets")
    if X.shape[0] == 0:
        raise ValueError("backward needs at least one sample")
    value, grad = _kern.loss_grad(params.flat, spec.widths_array(), X, Y)
    if not (math.isfinite(value) and np.all(np.isfinite(grad))):
        raise DivergenceError(f"non-finite loss or gradient (loss={value})")
    return MlpParams(spec, grad), float(value)


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
              ) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update. Inputs are not modified."""
    new = params.copy()
    st = state.copy()
    st.step += 1
    _kern.adam_update(new.flat, grads.flat, st.m, st.v, st.step, lr, beta1, beta2, eps)
    if not np.all(np.isfinite(new.flat)):
        raise DivergenceError(f"non-finite parameters after Adam step {st.step}")
    return new, st


def lr_at_epoch(cfg: TrainConfig, k: int) -> float:
    """Exponentially decayed learning rate ``t_max * exp(-gamma k)``."""
    if not 0 <= k <= cfg.epochs:
        raise ValueError(f"epoch index {k} outside [0, {cfg.epochs}]")
    if k == cfg.epochs:
        return cfg.t_min
    return cfg.t_max * math.exp(-cfg.decay_rate * k)


def batch_slices(n: int, batch_size: int | str, rng: np.random.Generator):
    """Index arrays for one epoch; shuffled once per epoch unless full-batch."""
    if batch_size == FULL or batch_size >= n:
        return [None]
    perm = rng.permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]


@dataclass
class FitResult:
    params: MlpParams
    best_epoch: int
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)


def fit(spec: MlpSpec, X, Y, cfg: TrainConfig, rng: np.random.Generator,
        X_val=None, Y_val=None, on_epoch=None) -> FitResult:
    """Train a freshly Xavier-initialised network by Adam over ``cfg.epochs``.

    Returns the snapshot with the lowest validation loss (training loss when
    no validation data is given). ``train_loss[k]`` is the sample-weighted
    mean of the minibatch losses in epoch ``k``. ``on_epoch`` is
    called as ``on_epoch(k, params, lr, train_loss, val_loss)`` after each
    epoch with the live parameters.
    """
    X = _as_batch(X, spec.input_dim, "inputs")
    Y = _as_batch(Y, spec.output_dim, "targets")
    if X.shape[0] != Y.shape[0] or X.shape[0] == 0:
        raise DimensionError(f"{X.shape[0]} inputs vs {Y.shape[0]} targets")
    has_val = X_val is not None and len(X_val) > 0
    if has_val:
        X_val = _as_batch(X_val, spec.input_dim, "validation inputs")
        Y_val = _as_batch(Y_val, spec.output_dim, "validation targets")

    widths = spec.widths_array()
    params = xavier_init(spec, rng)
    flat = params.flat
    m = np.zeros_like(flat)
    v = np.zeros_like(flat)
    step = 0
    n = X.shape[0]
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps

    result = FitResult(params=params.copy(), best_epoch=-1)
    best = math.inf
    for k in range(cfg.epochs):
        lr = lr_at_epoch(cfg, k)
        total = 0.0
        for idx in batch_slices(n, cfg.batch_size, rng):
            if idx is None:
                xb, yb = X, Y
            else:
                xb, yb = X[idx], Y[idx]
            value, grad = _kern.loss_grad(flat, widths, xb, yb)
            if not math.isfinite(value):
                raise DivergenceError(f"non-finite training loss at epoch {k}")
            step += 1
            _kern.adam_update(flat, grad, m, v, step, lr, b1, b2, eps)
            total += value * xb.shape[0]
        if not np.all(np.isfinite(flat)):
            raise DivergenceError(f"non-finite parameters after epoch {k}")
        train_loss = total / n
        val_loss = _kern.loss(flat, widths, X_val, Y_val) if has_val else train_loss
        if not math.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {k}")
        result.train_loss.append(train_loss)
        result.val_loss.append(float(val_loss))
        result.lr.append(lr)
        if val_loss < best:
            best = val_loss
            result.best_epoch = k
            result.params.flat[...] = flat
        if on_epoch is not None:
            on_epoch(k, params, lr, train_loss, float(val_loss))
    return result
