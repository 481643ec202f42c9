"""Training losses and epoch loops for all four model variants.

The variants share one reconstruction term; the prior term differs:

  vae / dvae   closed-form KL from the diagonal-Gaussian posterior to N(0, I)
  aae / daae   adversarial two-player losses on latent codes

Denoising variants encode a corrupted input but always reconstruct the clean
target, so zero corruption variance collapses them onto their plain
counterparts draw for draw.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ContractViolation, DomainError
from .models import (GenerativeAutoencoder, adversary_score, decode,
                     encode_aae, encode_vae)
from .optim import Adam
from .rng import Rng
from . import tensor as T
from .tensor import Tensor, no_grad

RECONSTRUCTION_LOSSES = ("cross_entropy", "squared_error")


@dataclass(frozen=True)
class CorruptionSpec:
    """Isotropic additive Gaussian corruption in data space."""

    variance: float = 0.25

    def __post_init__(self):
        if not np.isfinite(self.variance) or self.variance < 0:
            raise ContractViolation(
                f"corruption variance must be finite and >= 0, got {self.variance}"
            )


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    alpha: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    denoising: bool = False
    corruption: CorruptionSpec = field(default_factory=CorruptionSpec)
    reconstruction_loss: str = "cross_entropy"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ContractViolation("epochs and batch_size must be positive")
        if self.reconstruction_loss not in RECONSTRUCTION_LOSSES:
            raise ContractViolation(
                f"reconstruction_loss must be one of {RECONSTRUCTION_LOSSES}, "
                f"got {self.reconstruction_loss!r}"
            )


def corrupt(x: np.ndarray, spec: CorruptionSpec, rng: Rng) -> np.ndarray:
    """x + N(0, variance*I), unclipped; variance 0 returns x without drawing."""
    if spec.variance == 0.0:
        return x
    return x + np.sqrt(spec.variance) * rng.normal(x.shape)


def recon_cross_entropy(x: Tensor, x_hat: Tensor) -> Tensor:
    """-sum_coords [x log x_hat + (1-x) log(1-x_hat)], averaged over the batch."""
    if x.data.shape != x_hat.data.shape:
        raise ContractViolation(
            f"shape mismatch {x.data.shape} vs {x_hat.data.shape}"
        )
    if np.any(x.data < 0.0) or np.any(x.data > 1.0):
        raise ContractViolation("cross-entropy targets must lie in [0,1]")
    if np.any(x_hat.data <= 0.0) or np.any(x_hat.data >= 1.0):
        raise DomainError("cross-entropy predictions must lie strictly in (0,1)")
    term = x * T.log(x_hat) + (1.0 - x) * T.log(1.0 - x_hat)
    return T.scale(T.tmean(T.tsum(term, axis=1)), -1.0)


def recon_squared_error(x: Tensor, x_hat: Tensor) -> Tensor:
    """Half the squared Euclidean distance per row, averaged over the batch."""
    if x.data.shape != x_hat.data.shape:
        raise ContractViolation(
            f"shape mismatch {x.data.shape} vs {x_hat.data.shape}"
        )
    d = x_hat - x
    return T.scale(T.tmean(T.tsum(d * d, axis=1)), 0.5)


def kl_prior_gaussian(mu: Tensor, sigma: Tensor) -> Tensor:
    """KL from N(mu, diag sigma^2) to N(0, I): half of mu^2 + sigma^2 - log sigma^2 - 1,
    summed over latent dims and averaged over the batch."""
    if np.any(sigma.data <= 0.0):
        raise ContractViolation("sigma must be strictly positive")
    term = mu * mu + sigma * sigma - T.scale(T.log(sigma), 2.0) - 1.0
    return T.scale(T.tmean(T.tsum(term, axis=1)), 0.5)


def adversarial_losses(d_real: Tensor, d_fake: Tensor) -> tuple[Tensor, Tensor]:
    """Two-player losses from adversary scores (non-saturating generator form).

    disc_loss = -mean log d_real - mean log(1 - d_fake)
    gen_loss  = -mean log d_fake
    """
    for name, s in (("d_real", d_real), ("d_fake", d_fake)):
        if np.any(s.data <= 0.0) or np.any(s.data >= 1.0):
            raise DomainError(f"{name} scores must lie strictly in (0,1)")
    disc = T.scale(T.tmean(T.log(d_real)) + T.tmean(T.log(1.0 - d_fake)), -1.0)
    gen = T.scale(T.tmean(T.log(d_fake)), -1.0)
    return disc, gen


@dataclass
class EpochStats:
    """Per-epoch mean losses; fields not applicable to the variant are None."""

    epoch: int
    recon_loss: float
    prior_loss: Optional[float] = None
    disc_loss: Optional[float] = None
    gen_loss: Optional[float] = None


@dataclass
class TrainState:
    """Optimizer state carried across epochs of one training run."""

    rng: Rng
    opt_recon: Adam
    opt_disc: Optional[Adam] = None
    opt_gen: Optional[Adam] = None


def init_train_state(model: GenerativeAutoencoder, cfg: TrainConfig) -> TrainState:
    adam_kw = dict(alpha=cfg.alpha, beta1=cfg.beta1, beta2=cfg.beta2,
                   epsilon=cfg.epsilon)
    rng = Rng(cfg.seed).derive("train")
    recon_params = model.encoder_params() + model.decoder_params()
    state = TrainState(rng=rng, opt_recon=Adam(recon_params, **adam_kw))
    if model.variant == "aae":
        state.opt_disc = Adam(model.adversary_params(), **adam_kw)
        state.opt_gen = Adam(model.encoder_params(), **adam_kw)
    return state


def _reconstruction_fn(cfg: TrainConfig):
    return recon_cross_entropy if cfg.reconstruction_loss == "cross_entropy" \
        else recon_squared_error


def train_epoch(model: GenerativeAutoencoder, dataset, cfg: TrainConfig,
                rng: Rng | None = None, state: TrainState | None = None,
                epoch: int = 1) -> EpochStats:
    """One pass over the data: one (VAE) or three (AAE) update steps per batch.

    Denoising variants encode corrupt(x) but reconstruct against the clean x.
    A partial trailing batch is dropped so every update sees batch_size rows.
    """
    samples = np.asarray(getattr(dataset, "samples", dataset), dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise ContractViolation("dataset must be a non-empty (n, a) array")
    if model.denoising != cfg.denoising:
        raise ContractViolation(
            f"model denoising={model.denoising} but config denoising={cfg.denoising}"
        )
    n = samples.shape[0]
    if cfg.batch_size > n:
        raise ContractViolation(f"batch_size {cfg.batch_size} exceeds dataset size {n}")
    if state is None:
        state = init_train_state(model, cfg)
    if rng is None:
        rng = state.rng
    loss_fn = _reconstruction_fn(cfg)

    order = rng.permutation(n)
    n_batches = n // cfg.batch_size
    sums = np.zeros(4)
    for bi in range(n_batches):
        idx = order[bi * cfg.batch_size:(bi + 1) * cfg.batch_size]
        x_clean = samples[idx]
        x_in = corrupt(x_clean, cfg.corruption, rng) if cfg.denoising else x_clean
        target = Tensor(x_clean)

        if model.variant == "vae":
            z, mu, sigma = encode_vae(model, Tensor(x_in), rng, update_running=True)
            x_hat = decode(model, z, update_running=True)
            recon = loss_fn(target, x_hat)
            prior = kl_prior_gaussian(mu, sigma)
            total = recon + prior
            state.opt_recon.zero_grad()
            total.backward()
            state.opt_recon.step()
            sums += (recon.item(), prior.item(), 0.0, 0.0)
        else:
            # (i) reconstruction on encoder + decoder
            z = encode_aae(model, Tensor(x_in), update_running=True)
            x_hat = decode(model, z, update_running=True)
            recon = loss_fn(target, x_hat)
            state.opt_recon.zero_grad()
            recon.backward()
            state.opt_recon.step()
            # (ii) adversary on prior draws vs detached codes
            with no_grad():
                z_fake = encode_aae(model, Tensor(x_in)).data
            z_real = rng.normal((cfg.batch_size, model.latent_dim))
            d_real = adversary_score(model, Tensor(z_real), rng=rng, train=True)
            d_fake = adversary_score(model, Tensor(z_fake), rng=rng, train=True)
            disc, _ = adversarial_losses(d_real, d_fake)
            state.opt_disc.zero_grad()
            disc.backward()
            state.opt_disc.step()
            # (iii) encoder against the updated adversary
            z_gen = encode_aae(model, Tensor(x_in))
            d_gen = adversary_score(model, z_gen, rng=rng, train=True)
            gen = T.scale(T.tmean(T.log(d_gen)), -1.0)
            state.opt_gen.zero_grad()
            gen.backward()
            state.opt_gen.step()
            sums += (recon.item(), 0.0, disc.item(), gen.item())

    means = sums / n_batches
    if model.variant == "vae":
        return EpochStats(epoch, float(means[0]), prior_loss=float(means[1]))
    return EpochStats(epoch, float(means[0]),
                      disc_loss=float(means[2]), gen_loss=float(means[3]))


def train_model(model: GenerativeAutoencoder, dataset, cfg: TrainConfig,
                log_path: str | Path | None = None) -> list[EpochStats]:
    """Full training run; returns one EpochStats per epoch and optionally logs them."""
    state = init_train_state(model, cfg)
    stats = [train_epoch(model, dataset, cfg, state=state, epoch=e)
             for e in range(1, cfg.epochs + 1)]
    if log_path is not None:
        write_loss_log(log_path, stats)
    return stats


def write_loss_log(path: str | Path, stats: list[EpochStats]) -> None:
    """Comma-separated epoch log; inapplicable loss fields stay empty."""

    def fmt(v: Optional[float]) -> str:
        return "" if v is None else f"{v:.17g}"

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "recon_loss", "prior_loss", "disc_loss", "gen_loss"])
        for s in stats:
            writer.writerow([s.epoch, fmt(s.recon_loss), fmt(s.prior_loss),
                             fmt(s.disc_loss), fmt(s.gen_loss)])
