"""Contiguous window tiling and the naive paste-back reconstruction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class WindowTileSet:
    tile_side: int
    rows: int
    cols: int
    tiles: list[np.ndarray]

    def position(self, index: int) -> tuple[int, int]:
        """(row, col) of tile ``index`` in row-major order."""
        return divmod(index, self.cols)


def window_tile(img: np.ndarray, G: int, row: int, col: int) -> np.ndarray:
    return np.ascontiguousarray(img[row * G : (row + 1) * G, col * G : (col + 1) * G])


def window_extract(img: np.ndarray, G: int) -> WindowTileSet:
    if G < 1:
        raise ValueError(f"tile side must be >= 1, got {G}")
    h, w = img.shape[:2]
    if h % G or w % G:
        raise ValueError(f"{h}x{w} image is not divisible by tile side {G}")
    rows, cols = h // G, w // G
    tiles = [window_tile(img, G, r, c) for r in range(rows) for c in range(cols)]
    return WindowTileSet(G, rows, cols, tiles)


def window_reconstruct_naive(tile_set: WindowTileSet) -> np.ndarray:
    G = tile_set.tile_side
    if len(tile_set.tiles) != tile_set.rows * tile_set.cols:
        raise ValueError(
            f"expected {tile_set.rows * tile_set.cols} tiles, got {len(tile_set.tiles)}"
        )
    first = np.asarray(tile_set.tiles[0])
    trailing = first.shape[2:]
    out = np.zeros((tile_set.rows * G, tile_set.cols * G) + trailing, dtype=first.dtype)
    for i, tile in enumerate(tile_set.tiles):
        if tile.shape != (G, G) + trailing:
            raise ValueError(f"tile {tile_set.position(i)} has shape {tile.shape}")
        r, c = tile_set.position(i)
        out[r * G : (r + 1) * G, c * G : (c + 1) * G] = tile
    return out
