"""Bit-exact checkpoint persistence.

File layout: 8-byte magic "LOSSLAND", u32 little-endian format version,
u32 little-endian header length, UTF-8 JSON header (epoch, architecture,
schedule state, rng seeds, config digest, parameter count), then the raw
parameter payload as little-endian IEEE-754 binary64. Writes go through a
temp file and an atomic rename.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .core import ParamVector
from .net import MlpSpec

MAGIC = b"LOSSLAND"
VERSION = 1


class CheckpointFormatError(ValueError):
    """The file is not a readable checkpoint."""


class UnsupportedVersionError(CheckpointFormatError):
    pass


class TruncatedCheckpointError(CheckpointFormatError):
    pass


@dataclass(frozen=True)
class Checkpoint:
    epoch: int
    params: ParamVector
    spec: MlpSpec
    schedule_state: dict = field(default_factory=dict)
    rng_seeds: dict = field(default_factory=dict)
    config_digest: str = ""


def _spec_to_dict(spec: MlpSpec) -> dict:
    return {
        "layer_sizes": list(spec.layer_sizes),
        "activation": spec.activation,
        "init_scale_multiplier": spec.init_scale_multiplier,
    }


def _spec_from_dict(d: dict) -> MlpSpec:
    return MlpSpec(
        layer_sizes=tuple(d["layer_sizes"]),
        activation=d["activation"],
        init_scale_multiplier=d["init_scale_multiplier"],
    )


def save(ckpt: Checkpoint, path: str) -> None:
    """Write the checkpoint atomically; payload round-trips bit-exactly."""
    params = np.ascontiguousarray(ckpt.params, dtype="<f8")
    header = {
        "epoch": ckpt.epoch,
        "spec": _spec_to_dict(ckpt.spec),
        "schedule_state": ckpt.schedule_state,
        "rng_seeds": ckpt.rng_seeds,
        "config_digest": ckpt.config_digest,
        "d": int(params.shape[0]),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".ckpt.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", VERSION))
            fh.write(struct.pack("<I", len(header_bytes)))
            fh.write(header_bytes)
            fh.write(params.tobytes())
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise OSError(f"failed writing checkpoint to {path}: {exc}") from exc


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedCheckpointError(f"truncated checkpoint: expected {n} bytes for {what}, got {len(data)}")
    return data


def load(path: str) -> Checkpoint:
    """Read a checkpoint written by save, validating magic, version, and length."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, len(MAGIC), "magic")
        if magic != MAGIC:
            raise CheckpointFormatError(f"bad magic bytes {magic!r}; not a checkpoint file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != VERSION:
            raise UnsupportedVersionError(f"unsupported checkpoint version {version}, expected {VERSION}")
        (header_len,) = struct.unpack("<I", _read_exact(fh, 4, "header length"))
        header_bytes = _read_exact(fh, header_len, "header")
        try:
            header = json.loads(header_bytes.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointFormatError(f"unreadable header: {exc}") from exc
        d = int(header["d"])
        payload = fh.read()
    if len(payload) != 8 * d:
        raise CheckpointFormatError(
            f"declared {d} parameters ({8 * d} bytes) but payload holds {len(payload)} bytes")
    params = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    spec = _spec_from_dict(header["spec"])
    if spec.param_count != d:
        raise CheckpointFormatError(
            f"architecture expects {spec.param_count} parameters, header declares {d}")
    return Checkpoint(
        epoch=int(header["epoch"]),
        params=params,
        spec=spec,
        schedule_state=header.get("schedule_state", {}),
        rng_seeds=header.get("rng_seeds", {}),
        config_digest=header.get("config_digest", ""),
    )
