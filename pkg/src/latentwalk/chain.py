"""Latent-space Markov chains: prior sampling, slerp, and transition kernels.

A chain alternates decode and encode: x_{t+1} is the decoder's mean output at
z_t, and z_{t+1} is the encoder's draw at x_{t+1} (stochastic for a VAE,
deterministic for an AAE). The denoising kernel inserts additive Gaussian
corruption between the two, and reduces to the plain kernel draw for draw at
zero variance.

Models are duck-typed: anything with `latent_dim`, `data_dim`,
`chain_decode(z, rng)` and `chain_encode(x, rng)` can be driven, which is how
the closed-form linear-Gaussian verifier plugs in.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractViolation, DegenerateGeometryError
from .models import PriorSpec
from .objectives import CorruptionSpec, corrupt
from .rng import Rng

_ANGLE_TOL = 1e-6
_CHAIN_RE = re.compile(r"^chain\((\d+)\)$")


@dataclass
class LatentBatch:
    """n latent rows plus a note of where they came from."""

    values: np.ndarray
    provenance: str = "prior"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or 0 in self.values.shape:
            raise ContractViolation(
                f"latent batch must be a non-empty 2-d (n, b) array, "
                f"got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ContractViolation("latent batch contains non-finite values")

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass
class ChainStep:
    """One transition: decoded batch, optional corrupted batch, next latents."""

    x: np.ndarray
    x_tilde: Optional[np.ndarray]
    z: LatentBatch


@dataclass
class ChainTrace:
    """A recorded chain of length T with its starting batch and run settings."""

    z0: LatentBatch
    steps: list[ChainStep] = field(default_factory=list)
    denoising: bool = False
    norm_mode: str = "n/a"

    def __len__(self) -> int:
        return len(self.steps)

    def latents(self) -> list[np.ndarray]:
        """Latent values per step, index 0 being the starting batch (T+1 entries).

        Returns copies so callers cannot disturb the recorded trace.
        """
        return [self.z0.values.copy()] + [s.z.values.copy() for s in self.steps]


def sample_prior(n: int, prior: PriorSpec, rng: Rng) -> LatentBatch:
    """n independent draws from the isotropic unit Gaussian prior."""
    if n < 1:
        raise ContractViolation(f"need n >= 1 prior draws, got {n}")
    return LatentBatch(rng.normal((n, prior.dim)), provenance="prior")


def slerp(z1: np.ndarray, z2: np.ndarray, t: float) -> np.ndarray:
    """Spherical interpolation sin((1-t)O)/sin(O) z1 + sin(tO)/sin(O) z2.

    O is the angle between z1 and z2. Nearly parallel inputs fall back to
    linear interpolation; nearly antipodal ones have no unique great-circle
    path and are rejected.
    """
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    if z1.shape != z2.shape or z1.ndim != 1:
        raise ContractViolation(
            f"slerp needs two equal-length vectors, got {z1.shape} and {z2.shape}"
        )
    if not (0.0 <= t <= 1.0):
        raise ContractViolation(f"t must lie in [0,1], got {t}")
    n1 = np.linalg.norm(z1)
    n2 = np.linalg.norm(z2)
    if n1 == 0.0 or n2 == 0.0:
        raise ContractViolation("slerp endpoints must be nonzero")
    cos_omega = np.clip(np.dot(z1, z2) / (n1 * n2), -1.0, 1.0)
    omega = np.arccos(cos_omega)
    if omega < _ANGLE_TOL:
        return (1.0 - t) * z1 + t * z2
    if omega > np.pi - _ANGLE_TOL:
        raise DegenerateGeometryError(
            f"slerp endpoints are antipodal (angle {omega:.8f})"
        )
    s = np.sin(omega)
    return (np.sin((1.0 - t) * omega) / s) * z1 + (np.sin(t * omega) / s) * z2


def interpolation_grid(corners, rows: int, cols: int) -> LatentBatch:
    """rows x cols slerp grid; corners are [top-left, top-right, bottom-left,
    bottom-right] and are reproduced exactly in the corner cells.

    Each row interpolates between the two edge vectors obtained by
    interpolating down the left and right edges.
    """
    corners = np.asarray(corners, dtype=np.float64)
    if corners.shape[0] != 4 or corners.ndim != 2:
        raise ContractViolation(f"need 4 corner vectors, got shape {corners.shape}")
    if rows < 2 or cols < 2:
        raise ContractViolation(f"grid must be at least 2x2, got {rows}x{cols}")
    tl, tr, bl, br = corners
    cells = np.empty((rows * cols, corners.shape[1]))
    for i in range(rows):
        u = i / (rows - 1)
        left = slerp(tl, bl, u)
        right = slerp(tr, br, u)
        for j in range(cols):
            v = j / (cols - 1)
            cells[i * cols + j] = slerp(left, right, v)
    return LatentBatch(cells, provenance="interpolated")


def _next_index(z: LatentBatch) -> int:
    m = _CHAIN_RE.match(z.provenance)
    return int(m.group(1)) + 1 if m else 1


def transition_step(model, z_t: LatentBatch, rng: Rng) -> tuple[np.ndarray, LatentBatch]:
    """One application of the plain kernel: decode z_t, re-encode the output."""
    if z_t.values.shape[1] != model.latent_dim:
        raise ContractViolation(
            f"latent dim {z_t.values.shape[1]} does not match model "
            f"latent_dim {model.latent_dim}"
        )
    x = model.chain_decode(z_t.values, rng)
    z_next = model.chain_encode(x, rng)
    return x, LatentBatch(z_next, provenance=f"chain({_next_index(z_t)})")


def denoising_transition_step(model, z_t: LatentBatch, spec: CorruptionSpec,
                              rng: Rng) -> tuple[np.ndarray, np.ndarray, LatentBatch]:
    """Denoising kernel: decode, corrupt the output, re-encode the corruption."""
    if z_t.values.shape[1] != model.latent_dim:
        raise ContractViolation(
            f"latent dim {z_t.values.shape[1]} does not match model "
            f"latent_dim {model.latent_dim}"
        )
    x = model.chain_decode(z_t.values, rng)
    x_tilde = corrupt(x, spec, rng)
    z_next = model.chain_encode(x_tilde, rng)
    return x, x_tilde, LatentBatch(z_next, provenance=f"chain({_next_index(z_t)})")


def _model_norm_mode(model) -> str:
    layers = getattr(model, "norm_layers", None)
    if layers is None:
        return "n/a"
    modes = {bn.mode for bn in layers()}
    return modes.pop() if len(modes) == 1 else "mixed"


def run_chain(model, z0: LatentBatch, steps: int, denoising: bool = False,
              spec: CorruptionSpec | None = None, rng: Rng | None = None) -> ChainTrace:
    """Run `steps` transitions from z0 and record every intermediate batch.

    Model parameters are read-only throughout; steps=0 returns an empty trace
    that still carries z0.
    """
    if steps < 0:
        raise ContractViolation(f"steps must be >= 0, got {steps}")
    if denoising and spec is None:
        raise ContractViolation("denoising chains need a CorruptionSpec")
    if rng is None:
        raise ContractViolation("run_chain needs an rng")
    trace = ChainTrace(z0=z0, denoising=denoising, norm_mode=_model_norm_mode(model))
    z = z0
    for _ in range(steps):
        if denoising:
            x, x_tilde, z = denoising_transition_step(model, z, spec, rng)
            trace.steps.append(ChainStep(x=x, x_tilde=x_tilde, z=z))
        else:
            x, z = transition_step(model, z, rng)
            trace.steps.append(ChainStep(x=x, x_tilde=None, z=z))
    return trace
