"""Model checkpoint serialization.

Layout: 4-byte magic ``VLC1``, a little-endian uint32 giving the length of a
UTF-8 JSON header, the header itself, then all parameter tensors as one
little-endian float32 payload.  The header records the model config, the
target normalization, and for every tensor its shape and byte offset into
the payload, so a file is self-describing and can be inspected without
loading the weights.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import CheckpointError, ConfigMismatchError
from .model import ModelConfig, ModelParams, TargetNorm, tensor_shapes

MAGIC = b"VLC1"


def save_checkpoint(params: ModelParams, path: Union[str, Path]) -> None:
    """Write params to ``path``; weights are stored as float32."""
    path = Path(path)
    tensors = {}
    offset = 0
    chunks = []
    for name in tensor_shapes(params.config):
        arr = np.ascontiguousarray(params.tensors[name], dtype="<f4")
        tensors[name] = {"shape": list(arr.shape), "offset": offset}
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "config": params.config.to_dict(),
        "target_norm": params.target_norm.to_dict(),
        "tensors": tensors,
        "payload_bytes": offset,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for chunk in chunks:
            fh.write(chunk)


def _read_header(fh) -> dict:
    magic = fh.read(4)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}, not a checkpoint file")
    raw_len = fh.read(4)
    if len(raw_len) != 4:
        raise CheckpointError("truncated checkpoint header")
    (header_len,) = struct.unpack("<I", raw_len)
    blob = fh.read(header_len)
    if len(blob) != header_len:
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    for key in ("config", "target_norm", "tensors", "payload_bytes"):
        if key not in header:
            raise CheckpointError(f"checkpoint header missing key {key!r}")
    return header


def read_header(path: Union[str, Path]) -> dict:
    """Parse and validate the JSON header without reading the payload."""
    with open(path, "rb") as fh:
        return _read_header(fh)


def load_checkpoint(path: Union[str, Path],
                    expect_config: Optional[ModelConfig] = None) -> ModelParams:
    """Load a checkpoint; raises on truncation, corruption, or a config that
    does not match ``expect_config``."""
    path = Path(path)
    with open(path, "rb") as fh:
        header = _read_header(fh)
        payload = fh.read()
    try:
        config = ModelConfig.from_dict(header["config"])
        target_norm = TargetNorm.from_dict(header["target_norm"])
    except (TypeError, ValueError, KeyError) as exc:
        raise CheckpointError(f"invalid checkpoint header fields: {exc}") from exc
    if expect_config is not None and config != expect_config:
        raise ConfigMismatchError(
            f"checkpoint config {config.to_dict()} does not match "
            f"expected {expect_config.to_dict()}")

    expected = tensor_shapes(config)
    recorded = header["tensors"]
    if set(recorded) != set(expected):
        raise CheckpointError("checkpoint tensor names do not match the config")
    if len(payload) != header["payload_bytes"]:
        raise CheckpointError(
            f"payload is {len(payload)} bytes, header says {header['payload_bytes']}")

    tensors = {}
    for name, shape in expected.items():
        meta = recorded[name]
        if tuple(meta["shape"]) != shape:
            raise CheckpointError(f"tensor {name} has shape {meta['shape']}, "
                                  f"expected {list(shape)}")
        count = int(np.prod(shape)) if shape else 1
        start = meta["offset"]
        end = start + 4 * count
        if end > len(payload):
            raise CheckpointError(f"payload too short for tensor {name}")
        arr = np.frombuffer(payload[start:end], dtype="<f4").reshape(shape)
        tensors[name] = arr.astype(np.float64)
    return ModelParams(config, tensors, target_norm)
