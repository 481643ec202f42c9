"""The model family: VAE and AAE encoders, shared decoder shape, adversary.

A `GenerativeAutoencoder` owns three layer stacks:

  encoder   data_dim -> hidden -> ... -> head (2*latent_dim for VAE: mean and
            log-sigma halves; latent_dim for AAE: the latent itself)
  decoder   latent_dim -> hidden -> ... -> data_dim, sigmoid top
  adversary latent_dim -> ... -> 1 (AAE only), leaky-ReLU + dropout, no norm

Construction enforces the support conditions the sampling chain relies on:
an AAE encoder head must see at least latent_dim input features (a complete
or overcomplete basis — with fewer, the encoder cannot reach every latent
direction and the chain loses support), and the VAE sigma is produced as
exp(log-sigma) so it is strictly positive for any finite head output.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ShapeMismatchError
from .layers import Activation, BatchNormLayer, DenseLayer, Dropout
from .rng import Rng
from . import tensor as T
from .tensor import Tensor, no_grad

VARIANTS = ("vae", "aae")

# Decoder outputs are nudged off exact 0/1 (float rounding at extreme
# pre-activations) so cross-entropy stays inside its domain.
_OUT_FLOOR = 1e-300
_OUT_CEIL = float(np.nextafter(1.0, 0.0))

# The stochastic encoder's variance head starts out predicting a constant
# sigma of 0.5: its weights are shrunk so the init-time spread of log-sigma
# (which would otherwise put sigma anywhere in ~[0.2, 5] depending on seed)
# collapses onto the bias.  A freshly built model then encodes with a
# contraction instead of a seed-lottery between contraction and blow-up.
_SIGMA_HEAD_WEIGHT_SCALE = 0.01
_SIGMA_HEAD_INIT = 0.5


@dataclass(frozen=True)
class PriorSpec:
    """Isotropic unit Gaussian over the latent space."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ContractViolation(f"prior dim must be >= 1, got {self.dim}")


class GenerativeAutoencoder:
    """One trained artifact: parameters plus the variant/denoising flags."""

    def __init__(self, variant: str, data_dim: int, latent_dim: int,
                 hidden_dims: tuple[int, ...] = (64, 64),
                 adversary_dims: tuple[int, ...] = (64, 64),
                 denoising: bool = False, corruption_variance: float = 0.25,
                 init_seed: int = 0):
        variant = variant.lower()
        if variant not in VARIANTS:
            raise ContractViolation(f"unknown variant {variant!r}")
        if data_dim < 1 or latent_dim < 1:
            raise ContractViolation("data_dim and latent_dim must be >= 1")
        if not hidden_dims:
            raise ContractViolation("at least one hidden layer is required")
        if corruption_variance < 0 or not np.isfinite(corruption_variance):
            raise ContractViolation(
                f"corruption variance must be finite and >= 0, got {corruption_variance}"
            )
        head_in = hidden_dims[-1]
        if variant == "aae" and head_in < latent_dim:
            raise ContractViolation(
                f"AAE encoder head sees {head_in} features but latent_dim is "
                f"{latent_dim}; the deterministic encoder needs a complete or "
                f"overcomplete basis (width >= latent_dim) to keep full support"
            )

        self.variant = variant
        self.data_dim = data_dim
        self.latent_dim = latent_dim
        self.hidden_dims = tuple(hidden_dims)
        self.adversary_dims = tuple(adversary_dims)
        self.denoising = bool(denoising)
        self.corruption_variance = float(corruption_variance)
        self.init_seed = int(init_seed)
        self.prior = PriorSpec(latent_dim)

        rng = Rng(init_seed).derive("init")
        head_out = 2 * latent_dim if variant == "vae" else latent_dim
        self.encoder = _mlp(rng, data_dim, hidden_dims, head_out, norm=True)
        if variant == "vae":
            head = self.encoder[-1]
            head.weights.data[latent_dim:, :] *= _SIGMA_HEAD_WEIGHT_SCALE
            head.bias.data[latent_dim:] = np.log(_SIGMA_HEAD_INIT)
        self.decoder = _mlp(rng, latent_dim, hidden_dims, data_dim, norm=True)
        if variant == "aae":
            self.adversary = _adversary(rng, latent_dim, adversary_dims)
        else:
            self.adversary = None

    # -- parameter access -----------------------------------------------------

    def encoder_params(self) -> list[Tensor]:
        return [p for layer in self.encoder for p in layer.params()]

    def decoder_params(self) -> list[Tensor]:
        return [p for layer in self.decoder for p in layer.params()]

    def adversary_params(self) -> list[Tensor]:
        if self.adversary is None:
            return []
        return [p for layer in self.adversary for p in layer.params()]

    def all_params(self) -> list[Tensor]:
        return self.encoder_params() + self.decoder_params() + self.adversary_params()

    def norm_layers(self) -> list[BatchNormLayer]:
        return [l for stack in (self.encoder, self.decoder)
                for l in stack if isinstance(l, BatchNormLayer)]

    def fingerprint(self) -> str:
        """SHA-256 over all parameters and running statistics."""
        h = hashlib.sha256()
        for p in self.all_params():
            h.update(np.ascontiguousarray(p.data, dtype=np.float64).tobytes())
        for bn in self.norm_layers():
            h.update(np.ascontiguousarray(bn.running_mean, dtype=np.float64).tobytes())
            h.update(np.ascontiguousarray(bn.running_var, dtype=np.float64).tobytes())
        return h.hexdigest()

    # -- forward passes ---------------------------------------------------------

    def _run(self, stack, x: Tensor, rng: Rng | None = None,
             dropout_active: bool = False, update_running: bool = False) -> Tensor:
        for layer in stack:
            if isinstance(layer, BatchNormLayer):
                x = layer(x, update_running=update_running)
            elif isinstance(layer, Dropout):
                x = layer(x, rng=rng, active=dropout_active)
            else:
                x = layer(x)
        return x

    def encoder_head(self, x: Tensor, update_running: bool = False) -> Tensor:
        if x.data.ndim != 2 or x.data.shape[1] != self.data_dim:
            raise ShapeMismatchError(
                f"encoder expects (n, {self.data_dim}), got {x.data.shape}"
            )
        return self._run(self.encoder, x, update_running=update_running)

    # -- sampling protocol (numpy in, numpy out, no graph) ----------------------

    def chain_encode(self, x: np.ndarray, rng: Rng) -> np.ndarray:
        """Encoder draw for chain transitions: stochastic for VAE, not for AAE."""
        with no_grad():
            if self.variant == "vae":
                z, _, _ = encode_vae(self, Tensor(x), rng)
            else:
                z = encode_aae(self, Tensor(x))
            return z.data

    def chain_decode(self, z: np.ndarray, rng: Rng) -> np.ndarray:
        """Decoder mean for chain transitions; rng accepted for protocol parity."""
        with no_grad():
            return decode(self, Tensor(z)).data


def _mlp(rng: Rng, in_dim: int, hidden: tuple[int, ...], out_dim: int,
         norm: bool) -> list:
    stack: list = []
    prev = in_dim
    for h in hidden:
        stack.append(DenseLayer(prev, h, rng))
        if norm:
            stack.append(BatchNormLayer(h))
        stack.append(Activation("relu"))
        prev = h
    stack.append(DenseLayer(prev, out_dim, rng))
    return stack


def _adversary(rng: Rng, in_dim: int, hidden: tuple[int, ...]) -> list:
    stack: list = []
    prev = in_dim
    for h in hidden:
        stack.append(DenseLayer(prev, h, rng))
        stack.append(Activation("leaky_relu", 0.2))
        stack.append(Dropout(0.5))
        prev = h
    stack.append(DenseLayer(prev, 1, rng))
    stack.append(Activation("sigmoid"))
    return stack


# -- module-level operations ----------------------------------------------------


def encode_vae(model: GenerativeAutoencoder, x: Tensor, rng: Rng,
               update_running: bool = False) -> tuple[Tensor, Tensor, Tensor]:
    """Stochastic encoding z = mu + eps (.) sigma, eps ~ N(0, I).

    Returns (z, mu, sigma); sigma = exp(half of the head output) > 0 strictly.
    """
    if model.variant != "vae":
        raise ContractViolation(f"encode_vae on a {model.variant!r} model")
    head = model.encoder_head(x, update_running=update_running)
    b = model.latent_dim
    mu = T.tslice(head, 0, b, axis=1)
    log_sigma = T.tslice(head, b, 2 * b, axis=1)
    sigma = T.exp(log_sigma)
    eps = Tensor(rng.normal(mu.data.shape))
    z = mu + eps * sigma
    return z, mu, sigma


def encode_aae(model: GenerativeAutoencoder, x: Tensor,
               update_running: bool = False) -> Tensor:
    """Deterministic encoding (the AAE posterior is a point mass)."""
    if model.variant != "aae":
        raise ContractViolation(f"encode_aae on a {model.variant!r} model")
    return model.encoder_head(x, update_running=update_running)


def encode_mean(model: GenerativeAutoencoder, x: Tensor) -> Tensor:
    """Noise-free encoding: the VAE posterior mean, or the AAE output."""
    head = model.encoder_head(x)
    if model.variant == "vae":
        return T.tslice(head, 0, model.latent_dim, axis=1)
    return head


def decode(model: GenerativeAutoencoder, z: Tensor,
           update_running: bool = False) -> Tensor:
    """Decoder mean in (0,1)^data_dim per row; deterministic."""
    if z.data.ndim != 2 or z.data.shape[1] != model.latent_dim:
        raise ShapeMismatchError(
            f"decoder expects (n, {model.latent_dim}), got {z.data.shape}"
        )
    y = T.sigmoid(model._run(model.decoder, z, update_running=update_running))
    np.clip(y.data, _OUT_FLOOR, _OUT_CEIL, out=y.data)
    return y


def adversary_score(model: GenerativeAutoencoder, z: Tensor,
                    rng: Rng | None = None, train: bool = False) -> Tensor:
    """Probability in (0,1) that each latent row came from the prior."""
    if model.adversary is None:
        raise ContractViolation("model has no adversary")
    if z.data.ndim != 2 or z.data.shape[1] != model.latent_dim:
        raise ShapeMismatchError(
            f"adversary expects (n, {model.latent_dim}), got {z.data.shape}"
        )
    if train and rng is None:
        raise ContractViolation("train-mode adversary needs an rng for dropout")
    return model._run(model.adversary, z, rng=rng, dropout_active=train)


def set_norm_mode(model: GenerativeAutoencoder, mode: str) -> None:
    """Switch every normalization layer between minibatch and running stats."""
    if mode not in ("train", "eval"):
        raise ContractViolation(f"norm mode must be 'train' or 'eval', got {mode!r}")
    for bn in model.norm_layers():
        bn.mode = mode
