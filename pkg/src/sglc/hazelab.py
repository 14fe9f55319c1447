"""Synthetic haze and self-supervised corruption generators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import as_image


@dataclass(frozen=True)
class HazeField:
    """Scattering coefficient, scene depth and atmospheric light.

    ``atmospheric_light`` is a scalar, a per-channel vector, or an ``H x W x C``
    map for spatially varying light.
    """

    beta: float
    depth: np.ndarray
    atmospheric_light: float | np.ndarray = 1.0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        d = np.asarray(self.depth)
        if d.size and d.min() < 0:
            raise ValueError("depth must be >= 0")
        a = np.asarray(self.atmospheric_light)
        if a.min() < 0 or a.max() > 1:
            raise ValueError("atmospheric light must lie in [0, 1]")


def _depth_2d(depth, dims) -> np.ndarray:
    d = np.asarray(depth, dtype=np.float64)
    if d.ndim == 3 and d.shape[2] == 1:
        d = d[:, :, 0]
    if d.ndim == 0:
        return np.full(dims, float(d))
    if d.shape != tuple(dims):
        raise ValueError(f"depth map is {d.shape}, expected {tuple(dims)}")
    return d


def transmission(field: HazeField, dims, t_min: float | None = None) -> np.ndarray:
    """Transmission map ``exp(-beta * depth)`` as an ``H x W x 1`` image.

    ``t_min`` optionally floors the map so later inversion stays well conditioned.
    """
    t = np.exp(-field.beta * _depth_2d(field.depth, dims))
    if t_min is not None:
        t = np.maximum(t, t_min)
    return t.astype(np.float32)[:, :, None]


def _light(a, shape) -> np.ndarray:
    a = np.asarray(a, dtype=np.float32)
    if a.ndim == 3 and a.shape != shape:
        raise ValueError(f"atmospheric light map is {a.shape}, image is {shape}")
    if a.ndim == 1 and a.shape[0] != shape[2]:
        raise ValueError(f"{a.shape[0]} light values for {shape[2]} channels")
    return a


def synthesize_haze(clean, field: HazeField, t_min: float | None = None, t: np.ndarray | None = None) -> np.ndarray:
    """Hazy image ``t * clean + (1 - t) * A``.

    ``t`` may be passed to reuse a precomputed transmission map.
    """
    clean = as_image(clean, name="clean image")
    if t is None:
        t = transmission(field, clean.shape[:2], t_min)
    else:
        t = np.asarray(t, dtype=np.float32)
        if t.ndim == 2:
            t = t[:, :, None]
        if t.shape[:2] != clean.shape[:2]:
            raise ValueError(f"transmission is {t.shape}, image is {clean.shape}")
    a = _light(field.atmospheric_light, clean.shape)
    return (t * clean + (1.0 - t) * a).astype(np.float32)


def smooth_depth_map(dims, seed: int = 0, octaves: int = 4) -> np.ndarray:
    """Seeded multi-octave value noise scaled to ``[0, 1]``.

    Octave ``o`` bilinearly interpolates a ``(2**(o+1) + 1)``-point lattice of
    uniform random values across the image and is weighted by ``0.5**o``.
    With ``octaves=0`` the map is constant zero.
    """
    h, w = dims
    if h < 8 or w < 8:
        raise ValueError(f"depth map needs at least 8x8 pixels, got {h}x{w}")
    if octaves < 0:
        raise ValueError("octaves must be >= 0")
    rng = np.random.default_rng(seed)
    field = np.zeros((h, w))
    ys = np.linspace(0.0, 1.0, h)
    xs = np.linspace(0.0, 1.0, w)
    for o in range(octaves):
        cells = 2 ** (o + 1)
        lattice = rng.uniform(0.0, 1.0, size=(cells + 1, cells + 1))
        fy, fx = ys * cells, xs * cells
        iy = np.minimum(fy.astype(int), cells - 1)
        ix = np.minimum(fx.astype(int), cells - 1)
        ty, tx = (fy - iy)[:, None], (fx - ix)[None, :]
        v00 = lattice[iy][:, ix]
        v01 = lattice[iy][:, ix + 1]
        v10 = lattice[iy + 1][:, ix]
        v11 = lattice[iy + 1][:, ix + 1]
        top = v00 * (1 - tx) + v01 * tx
        bottom = v10 * (1 - tx) + v11 * tx
        field += 0.5**o * (top * (1 - ty) + bottom * ty)
    lo, hi = field.min(), field.max()
    if hi - lo <= 0:
        return np.zeros((h, w), dtype=np.float32)
    return ((field - lo) / (hi - lo)).astype(np.float32)


@dataclass(frozen=True)
class CorruptionSpec:
    square_count: int = 8
    side_range: tuple[int, int] = (8, 32)
    fill: float = 1.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.side_range
        if self.square_count < 0:
            raise ValueError("square_count must be >= 0")
        if lo < 1 or hi < lo:
            raise ValueError(f"invalid side range {self.side_range}")
        if not 0.0 <= self.fill <= 1.0:
            raise ValueError("fill must lie in [0, 1]")


def corrupt_white_squares(clean, spec: CorruptionSpec) -> tuple[np.ndarray, np.ndarray]:
    """Paint seeded filled squares; returns the corrupted image and a 0/1 mask."""
    clean = as_image(clean, name="clean image")
    h, w = clean.shape[:2]
    lo, hi = spec.side_range
    if spec.square_count and hi >= min(h, w):
        raise ValueError(f"square side up to {hi} does not fit a {h}x{w} image")
    out = clean.copy()
    mask = np.zeros((h, w, 1), dtype=np.float32)
    rng = np.random.default_rng(spec.seed)
    for _ in range(spec.square_count):
        side = int(rng.integers(lo, hi + 1))
        y = int(rng.integers(0, h - side + 1))
        x = int(rng.integers(0, w - side + 1))
        out[y : y + side, x : x + side] = spec.fill
        mask[y : y + side, x : x + side] = 1.0
    return out, mask
