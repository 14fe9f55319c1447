"""Image file I/O: the lossless ``SGLCRAW1`` format plus 8/16-bit PNG.

Raw layout (all little-endian)::

    8 bytes   magic b"SGLCRAW1"
    3 x u32   height, width, channels
    H*W*C     float32 samples, row-major, channels interleaved
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO

import cv2
import numpy as np

from .image import as_image

MAGIC = b"SGLCRAW1"
_HEADER = struct.Struct("<8sIII")


def encode_raw(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.ndim == 2:
        img = img[:, :, None]
    h, w, c = img.shape
    payload = np.ascontiguousarray(img, dtype="<f4").tobytes()
    return _HEADER.pack(MAGIC, h, w, c) + payload


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            raise EOFError(f"stream ended with {remaining} of {n} bytes unread")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_raw_stream(stream: BinaryIO) -> np.ndarray:
    magic, h, w, c = _HEADER.unpack(_read_exact(stream, _HEADER.size))
    if magic != MAGIC:
        raise ValueError(f"bad raw magic {magic!r}")
    if h < 1 or w < 1 or c < 1:
        raise ValueError(f"bad raw dimensions {h}x{w}x{c}")
    data = _read_exact(stream, h * w * c * 4)
    return np.frombuffer(data, dtype="<f4").astype(np.float32).reshape(h, w, c)


def write_raw_stream(stream: BinaryIO, img: np.ndarray):
    stream.write(encode_raw(img))


def decode_raw(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise ValueError("raw blob shorter than its header")
    magic, h, w, c = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError(f"bad raw magic {magic!r}")
    expected = _HEADER.size + h * w * c * 4
    if len(blob) != expected:
        raise ValueError(f"raw payload is {len(blob) - _HEADER.size} bytes, header implies {expected - _HEADER.size}")
    return np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).astype(np.float32).reshape(h, w, c)


def read_raw(path) -> np.ndarray:
    return decode_raw(Path(path).read_bytes())


def write_raw(path, img: np.ndarray):
    Path(path).write_bytes(encode_raw(img))


def is_raw(path) -> bool:
    with open(path, "rb") as f:
        return f.read(len(MAGIC)) == MAGIC


def load_image(path) -> np.ndarray:
    """Read a raw file or an 8/16-bit PNG as a float32 ``H x W x C`` buffer."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image: {path}")
    if is_raw(path):
        return read_raw(path)
    data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if data is None:
        raise ValueError(f"cannot decode image {path}")
    if data.dtype not in (np.uint8, np.uint16):
        raise ValueError(f"unsupported sample type {data.dtype} in {path}")
    if data.ndim == 3:
        if data.shape[2] == 4:
            raise ValueError(f"{path} has an alpha channel; only gray and RGB are supported")
        data = cv2.cvtColor(data, cv2.COLOR_BGR2RGB)
    return as_image(data, name=str(path))


def save_image(path, img: np.ndarray, bits: int = 16):
    """Write ``img`` as raw (``.raw``) or PNG, quantized to ``bits`` per sample."""
    path = Path(path)
    if path.suffix.lower() != ".png":
        write_raw(path, img)
        return
    if bits not in (8, 16):
        raise ValueError("PNG output supports 8 or 16 bits")
    img = np.asarray(img)
    if img.ndim == 3 and img.shape[2] not in (1, 3):
        raise ValueError(f"cannot write {img.shape[2]}-channel PNG")
    dtype = np.uint8 if bits == 8 else np.uint16
    scale = float(np.iinfo(dtype).max)
    q = np.rint(np.clip(img, 0.0, 1.0) * scale).astype(dtype)
    if q.ndim == 3 and q.shape[2] == 3:
        q = cv2.cvtColor(q, cv2.COLOR_RGB2BGR)
    elif q.ndim == 3:
        q = q[:, :, 0]
    if not cv2.imwrite(str(path), q):
        raise OSError(f"failed to write {path}")
