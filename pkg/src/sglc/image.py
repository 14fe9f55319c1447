"""Image buffers, padding and small raster helpers shared by every stage.

An image buffer is a plain ``numpy`` array of shape ``(H, W, C)`` holding
``float32`` samples in ``[0, 1]``, row-major with interleaved channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PAD_MODES = ("edge", "reflect")


@dataclass(frozen=True)
class PadSpec:
    """Amount of padding added to the bottom and right of an image."""

    right: int = 0
    bottom: int = 0
    mode: str = "edge"

    @property
    def is_zero(self) -> bool:
        return self.right == 0 and self.bottom == 0


def as_image(img, *, name: str = "image") -> np.ndarray:
    """Validate ``img`` and return it as a contiguous ``(H, W, C)`` float32 array.

    2-D inputs are promoted to one channel. Integer arrays are scaled by
    ``2**bits - 1``.
    """
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"{name} must be HxW or HxWxC, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
        raise ValueError(f"{name} is empty: shape {arr.shape}")
    if np.issubdtype(arr.dtype, np.integer):
        arr = arr.astype(np.float32) / np.float32(np.iinfo(arr.dtype).max)
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite samples")
    return arr


def padded_size(n: int, multiple: int) -> int:
    """Smallest multiple of ``multiple`` that is >= ``n``."""
    if multiple < 1:
        raise ValueError(f"patch side must be >= 1, got {multiple}")
    if n % multiple == 0:
        return n
    return (n // multiple + 1) * multiple


def pad_to_multiple(img: np.ndarray, G: int, mode: str = "edge") -> tuple[np.ndarray, PadSpec]:
    """Pad bottom/right so both sides become multiples of ``G``.

    The original pixels stay anchored at the top-left corner. When nothing
    needs padding the input array itself is returned with a zero spec.
    """
    if G < 1:
        raise ValueError(f"patch side must be >= 1, got {G}")
    if mode not in PAD_MODES:
        raise ValueError(f"unknown padding mode {mode!r}; expected one of {PAD_MODES}")
    img = as_image(img)
    h, w = img.shape[:2]
    spec = PadSpec(right=padded_size(w, G) - w, bottom=padded_size(h, G) - h, mode=mode)
    if spec.is_zero:
        return img, spec
    return pad_with(img, spec), spec


def pad_with(img: np.ndarray, spec: PadSpec) -> np.ndarray:
    """Apply an existing ``PadSpec`` to an array with any channel count."""
    if spec.is_zero:
        return img
    arr = np.asarray(img)
    widths = [(0, spec.bottom), (0, spec.right)] + [(0, 0)] * (arr.ndim - 2)
    return np.ascontiguousarray(np.pad(arr, widths, mode=spec.mode))


def unpad(img: np.ndarray, spec: PadSpec) -> np.ndarray:
    h, w = img.shape[:2]
    if spec.bottom < 0 or spec.right < 0:
        raise ValueError(f"negative padding in {spec}")
    if spec.bottom >= h or spec.right >= w:
        raise ValueError(f"pad spec {spec} is larger than the {h}x{w} image")
    if spec.is_zero:
        return img
    return np.ascontiguousarray(img[: h - spec.bottom, : w - spec.right])


def clamp01(img: np.ndarray) -> np.ndarray:
    return np.clip(img, 0.0, 1.0).astype(img.dtype, copy=False)
