"""Grid patching and its exact reverse reconstruction.

Every grid patch is a strided subsample of the whole (padded) image: patch
``l`` picks pixels ``x = i_o + i_p * n_w`` and ``y = j_o + j_p * n_h`` where
``i_o = l mod n_w`` and ``j_o = l div n_w``. Each patch therefore spans the
entire scene at reduced resolution, and the N patches tile the pixel set
without overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import padded_size


@dataclass(frozen=True)
class GridLayout:
    G: int
    n_h: int
    n_w: int

    def __post_init__(self):
        if self.G < 1 or self.n_h < 1 or self.n_w < 1:
            raise ValueError(f"invalid grid layout {self}")

    @classmethod
    def for_size(cls, height: int, width: int, G: int) -> GridLayout:
        """Layout for an unpadded ``height x width`` image and patch side ``G``."""
        return cls(G=G, n_h=padded_size(height, G) // G, n_w=padded_size(width, G) // G)

    @property
    def N(self) -> int:
        return self.n_h * self.n_w

    @property
    def padded_height(self) -> int:
        return self.n_h * self.G

    @property
    def padded_width(self) -> int:
        return self.n_w * self.G

    def offsets(self, l: int) -> tuple[int, int]:
        """(horizontal, vertical) offset of patch ``l``."""
        if not 0 <= l < self.N:
            raise IndexError(f"patch index {l} outside [0, {self.N})")
        return l % self.n_w, l // self.n_w

    def source_coords(self, l: int) -> tuple[np.ndarray, np.ndarray]:
        """Source ``(y, x)`` index arrays, each ``G x G``, for patch ``l``."""
        i_o, j_o = self.offsets(l)
        steps = np.arange(self.G)
        ys = j_o + steps * self.n_h
        xs = i_o + steps * self.n_w
        return np.meshgrid(ys, xs, indexing="ij")


@dataclass
class GridPatchSet:
    layout: GridLayout
    patches: list[np.ndarray]

    def __len__(self):
        return len(self.patches)


def _check_dims(img: np.ndarray, layout: GridLayout):
    if img.shape[:2] != (layout.padded_height, layout.padded_width):
        raise ValueError(
            f"image is {img.shape[0]}x{img.shape[1]} but layout expects "
            f"{layout.padded_height}x{layout.padded_width}"
        )


def grid_patch(img: np.ndarray, layout: GridLayout, l: int) -> np.ndarray:
    """Copy out grid patch ``l``; works for any trailing channel shape."""
    _check_dims(img, layout)
    i_o, j_o = layout.offsets(l)
    return np.ascontiguousarray(img[j_o :: layout.n_h, i_o :: layout.n_w])


def grid_extract(img: np.ndarray, layout: GridLayout) -> GridPatchSet:
    _check_dims(img, layout)
    return GridPatchSet(layout, [grid_patch(img, layout, l) for l in range(layout.N)])


def grid_reconstruct(patch_set: GridPatchSet) -> np.ndarray:
    layout = patch_set.layout
    patches = patch_set.patches
    if len(patches) != layout.N:
        raise ValueError(f"expected {layout.N} patches, got {len(patches)}")
    first = np.asarray(patches[0])
    trailing = first.shape[2:]
    for l, p in enumerate(patches):
        if p.shape[:2] != (layout.G, layout.G) or p.shape[2:] != trailing:
            raise ValueError(
                f"grid patch {l} has shape {p.shape}, expected {(layout.G, layout.G) + trailing}"
            )
    out = np.zeros((layout.padded_height, layout.padded_width) + trailing, dtype=first.dtype)
    for l, p in enumerate(patches):
        i_o, j_o = layout.offsets(l)
        out[j_o :: layout.n_h, i_o :: layout.n_w] = p
    return out
