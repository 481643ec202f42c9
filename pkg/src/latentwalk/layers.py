"""Network building blocks: dense, batch-norm, activation, dropout.

Layers own their parameters as `Tensor`s and expose `params()` for the
optimizer. Batch-norm keeps running statistics outside the autodiff graph;
they change only when the caller explicitly asks (the training loop does,
samplers never do).
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import ContractViolation, ShapeMismatchError
from .rng import Rng
from . import tensor as T
from .tensor import Tensor


class DenseLayer:
    """Affine map y = x W^T + b with weights of shape (out, in)."""

    def __init__(self, in_dim: int, out_dim: int, rng: Rng):
        if in_dim < 1 or out_dim < 1:
            raise ContractViolation(f"dense dims must be >= 1, got {in_dim}x{out_dim}")
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        w = (2.0 * rng.uniform((out_dim, in_dim)) - 1.0) * limit
        self.weights = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)
        self.in_dim = in_dim
        self.out_dim = out_dim

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.data.shape[1] != self.in_dim:
            raise ShapeMismatchError(
                f"dense layer expects (n, {self.in_dim}), got {x.data.shape}"
            )
        return T.matmul(x, _transpose(self.weights)) + self.bias

    def params(self) -> list[Tensor]:
        return [self.weights, self.bias]


def _transpose(w: Tensor) -> Tensor:
    # A view-free transpose built as its own graph node.
    out = w.data.T.copy()

    def bw(g):
        return [(w, g.T.copy())]

    return T._make(out, (w,), bw)


_ACTIVATION_KINDS = ("relu", "leaky_relu", "sigmoid", "tanh")


class Activation:
    """Elementwise nonlinearity applied by primitive name."""

    def __init__(self, kind: str, slope: float = 0.2):
        if kind not in _ACTIVATION_KINDS:
            raise ContractViolation(
                f"unknown activation {kind!r}; expected one of {_ACTIVATION_KINDS}"
            )
        self.kind = kind
        self.slope = slope

    def __call__(self, x: Tensor) -> Tensor:
        if self.kind == "leaky_relu":
            return T.leaky_relu(x, self.slope)
        return T.apply_primitive(self.kind, x)

    def params(self) -> list[Tensor]:
        return []


class BatchNormLayer:
    """Per-feature normalization with learnable scale and shift.

    mode 'train' normalizes by minibatch statistics, 'eval' by the stored
    running statistics. Running statistics move only when `update_running`
    is passed (one EMA step per call, biased batch variance).
    """

    def __init__(self, dim: int, momentum: float = 0.1, eps: float = 1e-8):
        if not (0.0 < momentum < 1.0):
            raise ContractViolation(f"momentum must be in (0,1), got {momentum}")
        self.dim = dim
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self.mode = "train"

    def __call__(self, x: Tensor, update_running: bool = False) -> Tensor:
        if x.data.ndim != 2 or x.data.shape[1] != self.dim:
            raise ShapeMismatchError(
                f"batch norm expects (n, {self.dim}), got {x.data.shape}"
            )
        if self.mode == "train":
            mu = T.tmean(x, axis=0)                       # (1, dim)
            centered = x - mu
            var = T.tmean(centered * centered, axis=0)    # biased, (1, dim)
            inv_std = T.exp(T.scale(T.log(var + self.eps), -0.5))
            x_hat = centered * inv_std
            if update_running:
                m = self.momentum
                self.running_mean = (1 - m) * self.running_mean + m * mu.data[0]
                self.running_var = (1 - m) * self.running_var + m * var.data[0]
        else:
            inv = 1.0 / np.sqrt(self.running_var + self.eps)
            x_hat = (x - Tensor(self.running_mean)) * Tensor(inv)
        return x_hat * self.gamma + self.beta

    def params(self) -> list[Tensor]:
        return [self.gamma, self.beta]


class Dropout:
    """Inverted dropout; identity unless explicitly activated with an rng."""

    def __init__(self, p: float = 0.5):
        if not (0.0 <= p < 1.0):
            raise ContractViolation(f"dropout probability must be in [0,1), got {p}")
        self.p = p

    def __call__(self, x: Tensor, rng: Optional[Rng] = None,
                 active: bool = False) -> Tensor:
        if not active or self.p == 0.0:
            return x
        if rng is None:
            raise ContractViolation("active dropout requires an rng")
        mask = (rng.uniform(x.data.shape) >= self.p) / (1.0 - self.p)
        return x * Tensor(mask)

    def params(self) -> list[Tensor]:
        return []
