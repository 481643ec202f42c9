"""Datasets, image grids, checkpoints, array dumps, and run configuration.

One binary container format (magic ``GAEC``, version byte, JSON descriptor,
little-endian float64 payload, CRC-32 trailer) backs both model checkpoints
and trace/array dumps, so round-trips are bit-exact and corruption is caught
by checksum rather than by downstream weirdness.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chain import ChainTrace
from .errors import (CheckpointError, ChecksumError, ConfigError,
                     ContractViolation, IdxFormatError, VersionError)
from .layers import BatchNormLayer, DenseLayer
from .models import GenerativeAutoencoder
from .objectives import (RECONSTRUCTION_LOSSES, CorruptionSpec, TrainConfig)
from .rng import Rng

_MAGIC = b"GAEC"
_VERSION = 1
_IDX_UBYTE = 0x08


# -- datasets ---------------------------------------------------------------------


@dataclass
class Dataset:
    """Rows of [0,1]-valued samples plus provenance."""

    samples: np.ndarray
    split: str = "train"
    source: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[0] < 1:
            raise ContractViolation(
                f"dataset must be a non-empty (n, a) array, got {self.samples.shape}"
            )
        if not np.all(np.isfinite(self.samples)):
            raise ContractViolation("dataset contains non-finite values")
        if np.any(self.samples < 0.0) or np.any(self.samples > 1.0):
            raise ContractViolation("dataset values must lie in [0,1]")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def gen_gaussian_mixture(n: int, k: int = 8, radius: float = 1.0,
                         std: float = 0.05, seed: int = 0,
                         split: str = "train") -> Dataset:
    """2-D mixture with components evenly spaced on a circle.

    Membership is balanced (counts differ by at most one) and the layout is
    affinely rescaled into [0.05, 0.95]^2; stray tail samples are clipped into
    [0,1].
    """
    if n < 1 or k < 1:
        raise ContractViolation("n and k must be >= 1")
    if std <= 0 or radius < 0:
        raise ContractViolation("std must be > 0 and radius >= 0")
    angles = 2.0 * np.pi * np.arange(k) / k
    means = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    rng = Rng(seed).derive(f"mixture-{split}")
    members = np.arange(n) % k
    raw = means[members] + std * rng.normal((n, 2))
    half_extent = radius + 4.0 * std
    mapped = 0.5 + 0.45 * raw / half_extent
    np.clip(mapped, 0.0, 1.0, out=mapped)
    return Dataset(mapped, split=split,
                   source=f"mixture(k={k}, radius={radius}, std={std}, "
                          f"n={n}, seed={seed})")


def load_idx(path: str | Path) -> Dataset:
    """Parse a big-endian IDX file of unsigned bytes into rows scaled to [0,1]."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 4:
        raise IdxFormatError("file too short for a magic number", 0)
    if blob[0] != 0 or blob[1] != 0:
        raise IdxFormatError(f"bad magic prefix {blob[0]:#04x}{blob[1]:02x}", 0)
    type_code, ndim = blob[2], blob[3]
    if type_code != _IDX_UBYTE:
        raise IdxFormatError(f"unsupported type code {type_code:#04x}", 2)
    if ndim < 1:
        raise IdxFormatError("dimension count must be >= 1", 3)
    header_len = 4 + 4 * ndim
    if len(blob) < header_len:
        raise IdxFormatError("header truncated before dimension sizes", len(blob))
    dims = struct.unpack(f">{ndim}I", blob[4:header_len])
    expected = int(np.prod(dims, dtype=np.int64))
    actual = len(blob) - header_len
    if actual < expected:
        raise IdxFormatError(
            f"payload truncated: expected {expected} bytes, found {actual}",
            len(blob))
    if actual > expected:
        raise IdxFormatError(
            f"trailing data: expected {expected} payload bytes, found {actual}",
            header_len + expected)
    data = np.frombuffer(blob, dtype=np.uint8, offset=header_len)
    n = dims[0]
    per_row = expected // n if n else 0
    samples = data.astype(np.float64).reshape(n, max(per_row, 1)) / 255.0
    name = path.name.lower()
    split = "test" if ("t10k" in name or "test" in name) else "train"
    return Dataset(samples, split=split, source=str(path))


# -- image grids --------------------------------------------------------------------


def write_image_grid(path: str | Path, images: np.ndarray, rows: int, cols: int,
                     height: int, width: int) -> None:
    """Render rows*cols images into one 8-bit binary PGM (P5) file.

    Values are clamped to [0,1] and rounded to bytes; cells are separated by
    2-pixel gutters at intensity 128, which also fills unused trailing cells.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 2 or images.shape[0] > rows * cols:
        raise ContractViolation(
            f"need at most {rows * cols} images as 2-d rows, got {images.shape}"
        )
    if images.shape[1] != height * width:
        raise ContractViolation(
            f"each image row must hold {height}x{width}={height * width} values, "
            f"got {images.shape[1]}"
        )
    if rows < 1 or cols < 1:
        raise ContractViolation("grid must be at least 1x1")
    as_bytes = np.floor(np.clip(images, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    sep = 2
    grid_h = rows * height + (rows - 1) * sep
    grid_w = cols * width + (cols - 1) * sep
    canvas = np.full((grid_h, grid_w), 128, dtype=np.uint8)
    for i in range(min(images.shape[0], rows * cols)):
        r, c = divmod(i, cols)
        top = r * (height + sep)
        left = c * (width + sep)
        canvas[top:top + height, left:left + width] = \
            as_bytes[i].reshape(height, width)
    header = f"P5\n{grid_w} {grid_h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + canvas.tobytes())


# -- binary container (checkpoints and array dumps) -----------------------------------


def _write_container(path: str | Path, header: dict,
                     arrays: list[np.ndarray]) -> None:
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                       for a in arrays)
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(bytes([_VERSION]))
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


def _read_container(path: str | Path) -> tuple[dict, list[np.ndarray]]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"{path}: cannot read container ({exc})") from exc
    if len(blob) < 9 or blob[:4] != _MAGIC:
        raise CheckpointError(f"{path}: not a recognized container file")
    version = blob[4]
    if version != _VERSION:
        raise VersionError(f"{path}: unknown format version {version}")
    (head_len,) = struct.unpack("<I", blob[5:9])
    head_end = 9 + head_len
    if len(blob) < head_end + 8:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob[9:head_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable descriptor ({exc})") from None
    (payload_len,) = struct.unpack("<Q", blob[head_end:head_end + 8])
    payload_end = head_end + 8 + payload_len
    if len(blob) < payload_end + 4:
        raise CheckpointError(f"{path}: truncated payload")
    payload = blob[head_end + 8:payload_end]
    (crc,) = struct.unpack("<I", blob[payload_end:payload_end + 4])
    if zlib.crc32(payload) != crc:
        raise ChecksumError(f"{path}: payload checksum mismatch")
    arrays = []
    offset = 0
    for spec in header.get("tensors", []):
        shape = tuple(spec["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f8", count=count,
                            offset=offset).reshape(shape)
        arrays.append(arr.astype(np.float64))
        offset += count * 8
    if offset != len(payload):
        raise CheckpointError(
            f"{path}: payload length {len(payload)} does not match descriptor "
            f"({offset} bytes expected)")
    return header, arrays


def save_arrays(path: str | Path, named: dict[str, np.ndarray],
                extra: dict | None = None) -> None:
    """Dump named float arrays; order preserved, metadata in `extra`."""
    header = {
        "kind": "arrays",
        "tensors": [{"name": k, "shape": list(np.asarray(v).shape)}
                    for k, v in named.items()],
        "extra": extra or {},
    }
    _write_container(path, header, [np.asarray(v) for v in named.values()])


def load_arrays(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    header, arrays = _read_container(path)
    if header.get("kind") != "arrays":
        raise CheckpointError(f"{path}: container is not an array dump")
    named = {spec["name"]: arr
             for spec, arr in zip(header["tensors"], arrays)}
    return named, header.get("extra", {})


def export_trace(trace: ChainTrace, path: str | Path) -> None:
    """Persist a chain trace: z0 plus per-step decoded/corrupted/latent arrays."""
    named: dict[str, np.ndarray] = {"z0": trace.z0.values}
    for i, step in enumerate(trace.steps, start=1):
        named[f"step{i:04d}.x"] = step.x
        if step.x_tilde is not None:
            named[f"step{i:04d}.x_tilde"] = step.x_tilde
        named[f"step{i:04d}.z"] = step.z.values
    save_arrays(path, named, extra={
        "denoising": trace.denoising,
        "norm_mode": trace.norm_mode,
        "steps": len(trace.steps),
    })


# -- checkpoints ---------------------------------------------------------------------


def _named_model_arrays(model: GenerativeAutoencoder):
    """Deterministic walk over every parameter and running statistic."""
    stacks = [("encoder", model.encoder), ("decoder", model.decoder)]
    if model.adversary is not None:
        stacks.append(("adversary", model.adversary))
    for stack_name, stack in stacks:
        for i, layer in enumerate(stack):
            prefix = f"{stack_name}.{i}"
            if isinstance(layer, DenseLayer):
                yield f"{prefix}.weights", layer.weights.data
                yield f"{prefix}.bias", layer.bias.data
            elif isinstance(layer, BatchNormLayer):
                yield f"{prefix}.gamma", layer.gamma.data
                yield f"{prefix}.beta", layer.beta.data
                yield f"{prefix}.running_mean", layer.running_mean
                yield f"{prefix}.running_var", layer.running_var


def save_checkpoint(model: GenerativeAutoencoder, path: str | Path,
                    train_config: TrainConfig | None = None,
                    data_shape: tuple[int, int] | None = None) -> None:
    """Write the model (architecture, parameters, running stats) plus optional
    training-config echo and source image shape."""
    named = list(_named_model_arrays(model))
    cfg_echo = None
    if train_config is not None:
        cfg_echo = {
            "epochs": train_config.epochs,
            "batch_size": train_config.batch_size,
            "alpha": train_config.alpha,
            "beta1": train_config.beta1,
            "beta2": train_config.beta2,
            "epsilon": train_config.epsilon,
            "seed": train_config.seed,
            "denoising": train_config.denoising,
            "corruption_variance": train_config.corruption.variance,
            "reconstruction_loss": train_config.reconstruction_loss,
        }
    header = {
        "kind": "model",
        "model": {
            "variant": model.variant,
            "data_dim": model.data_dim,
            "latent_dim": model.latent_dim,
            "hidden_dims": list(model.hidden_dims),
            "adversary_dims": list(model.adversary_dims),
            "denoising": model.denoising,
            "corruption_variance": model.corruption_variance,
            "init_seed": model.init_seed,
        },
        "tensors": [{"name": n, "shape": list(a.shape)} for n, a in named],
        "train_config": cfg_echo,
        "data_shape": list(data_shape) if data_shape is not None else None,
    }
    _write_container(path, header, [a for _, a in named])


def read_checkpoint_header(path: str | Path) -> dict:
    header, _ = _read_container(path)
    if header.get("kind") != "model":
        raise CheckpointError(f"{path}: container is not a model checkpoint")
    return header


def load_checkpoint(path: str | Path) -> GenerativeAutoencoder:
    """Reconstruct the model; every parameter and running stat is bit-exact."""
    header, arrays = _read_container(path)
    if header.get("kind") != "model":
        raise CheckpointError(f"{path}: container is not a model checkpoint")
    try:
        m = header["model"]
        model = GenerativeAutoencoder(
            variant=m["variant"], data_dim=m["data_dim"],
            latent_dim=m["latent_dim"], hidden_dims=tuple(m["hidden_dims"]),
            adversary_dims=tuple(m["adversary_dims"]), denoising=m["denoising"],
            corruption_variance=m["corruption_variance"],
            init_seed=m["init_seed"])
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: malformed model descriptor ({exc})") from None
    named = list(_named_model_arrays(model))
    specs = header.get("tensors", [])
    if len(named) != len(specs) or len(named) != len(arrays):
        raise CheckpointError(
            f"{path}: descriptor lists {len(specs)} tensors, "
            f"model expects {len(named)}")
    for (name, target), spec, arr in zip(named, specs, arrays):
        if spec["name"] != name or tuple(spec["shape"]) != target.shape:
            raise CheckpointError(
                f"{path}: tensor {spec['name']} does not match "
                f"expected {name} with shape {target.shape}")
        target[...] = arr
    return model


# -- run configuration ----------------------------------------------------------------

VARIANT_NAMES = ("vae", "dvae", "aae", "daae")


def resolve_variant(name: str) -> tuple[str, bool]:
    """Map a CLI variant name to (base model family, denoising flag)."""
    name = name.lower()
    if name not in VARIANT_NAMES:
        raise ContractViolation(
            f"variant must be one of {VARIANT_NAMES}, got {name!r}")
    return {"vae": ("vae", False), "dvae": ("vae", True),
            "aae": ("aae", False), "daae": ("aae", True)}[name]


@dataclass
class RunOptions:
    """Workflow-level settings that are not part of the training objective."""

    variant: str = "vae"
    latent_dim: int | None = None
    hidden_dims: tuple[int, ...] = (64, 64)
    adversary_dims: tuple[int, ...] = (64, 64)
    dataset: str = "mixture"
    dataset_test: str | None = None
    mixture_components: int = 8
    mixture_radius: float = 1.0
    mixture_std: float = 0.05
    train_size: int = 4096
    test_size: int = 1024
    chains: int = 500
    steps: tuple[int, ...] = (0, 1, 5, 10)
    bn_mode: str = "train"
    precision: str = "double"


def _parse_int(v: str) -> int:
    return int(v, 10)


def _parse_float(v: str) -> float:
    out = float(v)
    if not np.isfinite(out):
        raise ValueError("non-finite value")
    return out


def _parse_int_list(v: str) -> tuple[int, ...]:
    items = tuple(int(p.strip(), 10) for p in v.split(",") if p.strip())
    if not items:
        raise ValueError("empty list")
    return items


def _parse_choice(options):
    def parse(v: str) -> str:
        v = v.lower()
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return v
    return parse


_CONFIG_KEYS = {
    # training objective
    "epochs": _parse_int,
    "batch_size": _parse_int,
    "alpha": _parse_float,
    "beta1": _parse_float,
    "beta2": _parse_float,
    "epsilon": _parse_float,
    "seed": _parse_int,
    "corruption_variance": _parse_float,
    "reconstruction_loss": _parse_choice(RECONSTRUCTION_LOSSES),
    # run options
    "variant": _parse_choice(VARIANT_NAMES),
    "latent_dim": _parse_int,
    "hidden_dims": _parse_int_list,
    "adversary_dims": _parse_int_list,
    "dataset": str,
    "dataset_test": str,
    "mixture_components": _parse_int,
    "mixture_radius": _parse_float,
    "mixture_std": _parse_float,
    "train_size": _parse_int,
    "test_size": _parse_int,
    "chains": _parse_int,
    "steps": _parse_int_list,
    "bn_mode": _parse_choice(("train", "eval")),
    "precision": _parse_choice(("double", "single")),
}

_TRAIN_KEYS = ("epochs", "batch_size", "alpha", "beta1", "beta2", "epsilon",
               "seed", "reconstruction_loss")


def parse_config(source: str | Path) -> tuple[TrainConfig, RunOptions]:
    """Parse `key = value` config text (a path to it, or the text itself).

    Omitted keys keep their defaults (20 epochs; Adam 2e-4/0.5/0.999;
    corruption variance 0.25). Unknown keys and bad values raise with the
    1-based line number.
    """
    if isinstance(source, Path):
        text = source.read_text()
    elif source.strip() and "=" not in source and "\n" not in source:
        p = Path(source)
        if not p.is_file():
            raise ConfigError(f"config file not found: {source!r}", 0)
        text = p.read_text()
    else:
        text = source

    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected `key = value`", lineno)
        key, _, val = line.partition("=")
        key = key.strip().lower()
        val = val.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        try:
            values[key] = _CONFIG_KEYS[key](val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno) from None

    variant = values.get("variant", "vae")
    _, denoising = resolve_variant(variant)
    cfg = TrainConfig(
        denoising=denoising,
        corruption=CorruptionSpec(values.get("corruption_variance", 0.25)),
        **{k: values[k] for k in _TRAIN_KEYS if k in values},
    )
    opts = RunOptions(variant=variant)
    for key in ("latent_dim", "hidden_dims", "adversary_dims", "dataset",
                "dataset_test", "mixture_components", "mixture_radius",
                "mixture_std", "train_size", "test_size", "chains", "steps",
                "bn_mode", "precision"):
        if key in values:
            setattr(opts, key, values[key])
    return cfg, opts
