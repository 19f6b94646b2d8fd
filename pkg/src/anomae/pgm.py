"""Binary PGM (P5) reading and writing.

The only image format the toolkit speaks: 8-bit grayscale, maxval <= 255.
Parsing follows the PNM rules — header tokens separated by whitespace,
``#`` comments allowed up to the raster, exactly one whitespace byte
between the maxval and the payload. Pixels are scaled by 1/maxval into
[0, 1] on load, realizing the pipeline's normalisation step.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import PgmParseError, ValidationError
from .ops import F32, Tensor

_WS = b" \t\r\n\v\f"


def _skip_ws_and_comments(data: bytes, pos: int) -> int:
    while pos < len(data):
        if data[pos:pos + 1] in (b"#",):
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise PgmParseError("unterminated comment", pos)
            pos = nl + 1
        elif data[pos:pos + 1] in _WS:
            pos += 1
        else:
            break
    return pos


def _read_int(data: bytes, pos: int, what: str) -> tuple[int, int]:
    pos = _skip_ws_and_comments(data, pos)
    start = pos
    while pos < len(data) and data[pos:pos + 1].isdigit():
        pos += 1
    if pos == start:
        raise PgmParseError(f"expected integer for {what}", start)
    return int(data[start:pos]), pos


def load_pgm(data: bytes) -> Tensor:
    """Parse P5 bytes into a [1, H, W] float32 tensor with values in [0, 1]."""
    if data[:2] != b"P5":
        raise PgmParseError(f"bad magic {data[:2]!r}, expected b'P5'", 0)
    width, pos = _read_int(data, 2, "width")
    height, pos = _read_int(data, pos, "height")
    maxval, pos = _read_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise PgmParseError(f"image dimensions {width}x{height} must be positive", 2)
    if maxval < 1 or maxval > 255:
        raise PgmParseError(f"maxval {maxval} outside [1, 255]", pos)
    if pos >= len(data) or data[pos:pos + 1] not in _WS:
        raise PgmParseError("expected single whitespace byte after maxval", pos)
    pos += 1
    need = width * height
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise PgmParseError(
            f"payload truncated: need {need} bytes, have {len(payload)}", pos + len(payload))
    # true division so a full-scale sample maps to exactly 1.0
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(F32) / F32(maxval)
    return np.ascontiguousarray(pixels.reshape(1, height, width))


def encode_pgm(img: Tensor) -> bytes:
    """Encode a [1, H, W] (or [H, W]) tensor with values in [0, 1] as P5 bytes.

    Quantization is round-half-up to 8 bits, so a load/save round trip moves
    each pixel by at most 1/510.
    """
    arr = np.asarray(img)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise ValidationError(f"expected [1,H,W] or [H,W] image, got shape {np.asarray(img).shape}")
    if arr.size == 0:
        raise ValidationError("cannot encode an empty image")
    if float(arr.min()) < 0.0 or float(arr.max()) > 1.0:
        raise ValidationError(
            f"pixels outside [0, 1]: min {float(arr.min())}, max {float(arr.max())}")
    q = np.floor(arr.astype(np.float64) * 255.0 + 0.5).clip(0, 255).astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    return header + q.tobytes()


def save_pgm(img: Tensor, path) -> None:
    """Write an image as a P5 file (atomically: temp file, then rename)."""
    payload = encode_pgm(img)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def load_pgm_file(path) -> Tensor:
    with open(path, "rb") as fh:
        return load_pgm(fh.read())
