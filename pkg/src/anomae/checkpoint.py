"""Bit-exact model serialization.

Little-endian binary layout::

    magic "AECN" | u32 version (=1) | u32 json length | config+metadata JSON
    | u32 parameter count
    | per parameter: u16 name length | name UTF-8 | u8 rank | rank x u32 dims
                     | raw float32 payload
    | u32 CRC32 of everything prior

The JSON document is ``{"config": {...}, "metadata": {...}}`` with sorted
keys, so identical models serialize to identical bytes.
"""

from __future__ import annotations

import json
import os
import struct
import zlib

import numpy as np

from .errors import (BadMagicError, ChecksumError, CheckpointError,
                     PayloadLengthError, TrailingBytesError, UnsupportedVersionError)
from .model import AutoencoderModel, ModelConfig, expected_param_shapes

MAGIC = b"AECN"
VERSION = 1


def checkpoint_bytes(model: AutoencoderModel, metadata: dict | None = None) -> bytes:
    """Serialize a model; metadata defaults to the model's own."""
    meta = dict(model.metadata if metadata is None else metadata)
    meta.setdefault("seed", model.config.seed)
    doc = json.dumps({"config": model.config.to_dict(), "metadata": meta},
                     sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(doc)), doc,
             struct.pack("<I", len(model.params))]
    for name, arr in model.params.items():
        payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        name_b = name.encode("utf-8")
        parts.append(struct.pack("<H", len(name_b)))
        parts.append(name_b)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(payload)
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_checkpoint(model: AutoencoderModel, path, metadata: dict | None = None) -> None:
    """Write the checkpoint atomically (temp file, then rename)."""
    data = checkpoint_bytes(model, metadata)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise PayloadLengthError(
                f"truncated reading {what}: expected {self.pos + n} bytes, file has {len(self.data)}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def load_checkpoint_bytes(data: bytes) -> AutoencoderModel:
    """Parse checkpoint bytes back into a model (parameters bit-exact)."""
    cur = _Cursor(data)
    if cur.take(4, "magic") != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    version = cur.u32("version")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported checkpoint version {version}, expected {VERSION}")
    doc_len = cur.u32("config length")
    try:
        doc = json.loads(cur.take(doc_len, "config JSON").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"malformed config JSON: {exc}") from exc
    if not isinstance(doc, dict) or "config" not in doc:
        raise CheckpointError("config JSON missing 'config' section")
    cfg_dict = dict(doc["config"])
    if "encoder_channels" in cfg_dict:
        cfg_dict["encoder_channels"] = tuple(cfg_dict["encoder_channels"])
    config = ModelConfig.from_dict(cfg_dict)

    n_params = cur.u32("parameter count")
    params = {}
    for i in range(n_params):
        name_len = cur.u16(f"param {i} name length")
        name = cur.take(name_len, f"param {i} name").decode("utf-8")
        rank = cur.u8(f"param {name!r} rank")
        dims = struct.unpack(f"<{rank}I", cur.take(4 * rank, f"param {name!r} dims"))
        count = int(np.prod(dims)) if rank else 1
        raw = cur.take(4 * count, f"param {name!r} payload")
        params[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    stored_crc = cur.u32("checksum")
    if cur.pos != len(data):
        raise TrailingBytesError(f"{len(data) - cur.pos} trailing bytes after checkpoint payload")
    if zlib.crc32(data[:cur.pos - 4]) != stored_crc:
        raise ChecksumError("checkpoint CRC32 mismatch")

    expected = expected_param_shapes(config)
    if list(params) != list(expected) or any(params[k].shape != expected[k] for k in params):
        raise CheckpointError("stored parameters do not match the shapes implied by the config")
    return AutoencoderModel(config=config, params=params, metadata=dict(doc.get("metadata", {})))


def load_checkpoint(path) -> AutoencoderModel:
    with open(path, "rb") as fh:
        return load_checkpoint_bytes(fh.read())
