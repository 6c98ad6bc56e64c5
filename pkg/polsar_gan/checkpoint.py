"""
Checkpoints
===========
CVG1 container of named tensors:

    "CVG1"  u32 count
    count x ( u16 name_len | utf-8 name | u8 dtype (0 f32, 1 f64) | u8 rank
              | rank x u32 dims | row-major little-endian payload )

A model checkpoint stores every network parameter (G.*, D.*), the CBN ring
buffers (*.ring), both Adam states (adam_g.*, adam_d.*), the normalization
statistics (norm.*) and the training config (config.*).
"""

import logging
import struct
from dataclasses import fields
from pathlib import Path
from typing import Dict

import numpy as np

from .data import N_CHANNELS, NormalizationStats
from .errors import (
    BadMagicError,
    CheckpointError,
    ConfigError,
    ShapeMismatchError,
    TruncatedFileError,
)
from .gan import AdamState, Network, PolsarGan, TrainingConfig

logger = logging.getLogger(__name__)

MAGIC      = b"CVG1"
DTYPE_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_TAG_OF    = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}

_MODE_CODES  = {"semisup": 0, "supervised": 1}
_DTYPE_CODES = {"float32": 0, "float64": 1}


# ==============================================================================
# TENSOR CONTAINER
# ==============================================================================

def encode_tensors(tensors: Dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.dtype not in _TAG_OF:
            arr = arr.astype(np.float64)
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise CheckpointError(f"tensor name of {len(raw)} bytes is too long")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<BB", _TAG_OF[arr.dtype], arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype(DTYPE_TAGS[_TAG_OF[arr.dtype]]).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf, self.path, self.pos = buf, path, 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.buf):
            raise TruncatedFileError(
                f"{self.path}: checkpoint ends at byte {len(self.buf)}, needed {end}",
                expected=end, actual=len(self.buf),
            )
        chunk, self.pos = self.buf[self.pos:end], end
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_tensors(buf: bytes, path="<bytes>") -> Dict[str, np.ndarray]:
    r = _Reader(buf, path)
    magic = r.take(4)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: expected magic {MAGIC!r}, found {magic!r}")
    (count,) = r.unpack("<I")

    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (n,) = r.unpack("<H")
        try:
            name = r.take(n).decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(f"{path}: tensor name is not valid utf-8") from e
        tag, rank = r.unpack("<BB")
        if tag not in DTYPE_TAGS:
            raise CheckpointError(f"{path}: tensor {name!r} has unknown dtype tag {tag}")
        dims  = r.unpack(f"<{rank}I")
        dtype = DTYPE_TAGS[tag]
        size  = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
        arr   = np.frombuffer(r.take(size), dtype=dtype).reshape(dims)
        if name in tensors:
            raise CheckpointError(f"{path}: duplicate tensor {name!r}")
        tensors[name] = arr.astype(dtype.newbyteorder("="))
    if r.pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - r.pos} trailing bytes after {count} tensors")
    return tensors


def write_tensors(tensors: Dict[str, np.ndarray], path) -> None:
    Path(path).write_bytes(encode_tensors(tensors))


def read_tensors(path) -> Dict[str, np.ndarray]:
    return decode_tensors(Path(path).read_bytes(), path)


# ==============================================================================
# MODEL CHECKPOINTS
# ==============================================================================

def _config_tensors(config: TrainingConfig) -> Dict[str, np.ndarray]:
    out = {}
    for f in fields(config):
        value = getattr(config, f.name)
        if f.name == "mode":
            value = _MODE_CODES[value]
        elif f.name == "dtype":
            value = _DTYPE_CODES[value]
        elif value is None:
            value = 0
        out[f"config.{f.name}"] = np.asarray(value, dtype=np.float64)
    return out


def _scalar(t: Dict[str, np.ndarray], key: str) -> float:
    if key not in t:
        raise CheckpointError(f"checkpoint lacks {key}")
    arr = t[key]
    if arr.size != 1 or not np.isfinite(arr).all():
        raise CheckpointError(f"{key} must be one finite number, got shape {arr.shape}")
    return float(arr.ravel()[0])


def _integer(t: Dict[str, np.ndarray], key: str) -> int:
    value = _scalar(t, key)
    if value != int(value):
        raise CheckpointError(f"{key} must be an integer, got {value!r}")
    return int(value)


def _code(t: Dict[str, np.ndarray], key: str, codes: Dict[str, int]) -> str:
    names = {v: k for k, v in codes.items()}
    value = _integer(t, key)
    if value not in names:
        raise CheckpointError(f"{key} = {value} is not one of {sorted(names)}")
    return names[value]


def _config_from_tensors(t: Dict[str, np.ndarray]) -> TrainingConfig:
    kw = {}
    for f in fields(TrainingConfig):
        key = f"config.{f.name}"
        if f.name in ("g_channels", "d_channels"):
            if key not in t:
                raise CheckpointError(f"checkpoint lacks {key}")
            v = t[key].ravel()
            if not np.isfinite(v).all() or np.any(v != np.round(v)):
                raise CheckpointError(f"{key} must hold integer widths, got {v.tolist()}")
            kw[f.name] = tuple(int(c) for c in v)
        elif f.name == "mode":
            kw[f.name] = _code(t, key, _MODE_CODES)
        elif f.name == "dtype":
            kw[f.name] = _code(t, key, _DTYPE_CODES)
        elif f.name == "patch_stride":
            kw[f.name] = _integer(t, key) or None
        elif f.type in (int, "int"):
            kw[f.name] = _integer(t, key)
        else:
            kw[f.name] = _scalar(t, key)
    try:
        return TrainingConfig(**kw)
    except ConfigError as e:
        raise CheckpointError(f"checkpoint config is invalid: {e}") from e


def _adam_tensors(prefix: str, state: AdamState) -> Dict[str, np.ndarray]:
    out = {f"{prefix}.step": np.asarray(state.step, dtype=np.float64)}
    out.update({f"{prefix}.m.{k}": v for k, v in state.m.items()})
    out.update({f"{prefix}.v.{k}": v for k, v in state.v.items()})
    return out


def _restore_adam(prefix: str, state: AdamState, net: Network,
                  t: Dict[str, np.ndarray]) -> None:
    state.step = _integer(t, f"{prefix}.step") if f"{prefix}.step" in t else 0
    params = net.named_parameters()
    for key, arr in t.items():
        for moment, target in ((".m.", state.m), (".v.", state.v)):
            if not key.startswith(prefix + moment):
                continue
            name = key[len(prefix) + len(moment):]
            if name not in params or arr.shape != params[name].shape:
                raise CheckpointError(f"{key} does not match a parameter of the model")
            target[name] = arr.astype(np.float64)


def _restore_network(prefix: str, net: Network, t: Dict[str, np.ndarray]) -> None:
    for name, param in net.named_parameters().items():
        key = f"{prefix}.{name}"
        if key not in t:
            raise CheckpointError(f"checkpoint lacks parameter {key}")
        if t[key].shape != param.shape:
            raise CheckpointError(
                f"parameter {key} is {t[key].shape} in the file, {param.shape} in the model"
            )
        np.copyto(param, t[key], casting="unsafe")
    buffers = {}
    for name in net.named_buffers():
        key = f"{prefix}.{name}"
        if key not in t:
            raise CheckpointError(f"checkpoint lacks buffer {key}")
        buffers[name] = t[key]
    try:
        net.load_buffers(buffers)
    except ShapeMismatchError as e:
        raise CheckpointError(f"{prefix} buffers: {e}") from e


def model_tensors(model: PolsarGan) -> Dict[str, np.ndarray]:
    out = _config_tensors(model.config)
    out["norm.mean"]    = model.norm.mean
    out["norm.std"]     = model.norm.std
    out["norm.epsilon"] = np.asarray(model.norm.epsilon, dtype=np.float64)
    for prefix, net in (("D", model.discriminator), ("G", model.generator)):
        if net is None:
            continue
        out.update({f"{prefix}.{k}": v for k, v in net.named_parameters().items()})
        out.update({f"{prefix}.{k}": v for k, v in net.named_buffers().items()})
    out.update(_adam_tensors("adam_d", model.adam_d))
    if model.adam_g is not None:
        out.update(_adam_tensors("adam_g", model.adam_g))
    return out


def save_checkpoint(model: PolsarGan, path) -> None:
    write_tensors(model_tensors(model), path)
    logger.info(f"[checkpoint] wrote {path}")


def load_checkpoint(path) -> PolsarGan:
    """
    Rebuild a model from a CVG1 file.

    Raises
    ------
    BadMagicError, TruncatedFileError, CheckpointError
    """
    t      = read_tensors(path)
    config = _config_from_tensors(t)
    for key in ("norm.mean", "norm.std"):
        if key not in t:
            raise CheckpointError(f"{path}: checkpoint lacks {key}")
        if t[key].shape != (N_CHANNELS, 2):
            raise CheckpointError(f"{path}: {key} is {t[key].shape}, expected ({N_CHANNELS}, 2)")
    epsilon = _scalar(t, "norm.epsilon") if "norm.epsilon" in t else 1e-8
    norm = NormalizationStats(t["norm.mean"].astype(np.float64),
                              t["norm.std"].astype(np.float64), epsilon)

    # initial weights are overwritten below; the rng only fixes shapes
    model = PolsarGan.build(config, norm, np.random.default_rng(0))
    _restore_network("D", model.discriminator, t)
    _restore_adam("adam_d", model.adam_d, model.discriminator, t)
    if model.generator is not None:
        _restore_network("G", model.generator, t)
        _restore_adam("adam_g", model.adam_g, model.generator, t)
    return model
