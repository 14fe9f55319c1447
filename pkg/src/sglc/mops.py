"""Multiple Overlapping Patches Smoother (MOPS).

Tiles the image at 50% overlap, weights every tile prediction with a
second-order spline window, normalizes by the accumulated weights, and
averages the result over the dihedral (rotation/mirror) variants of the
input.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .parallel import ordered_map
from .restorers import PatchSite, Restorer, check_patch_side, run_restorer


@lru_cache(maxsize=32)
def _spline_profile(G: int, normalize: bool) -> np.ndarray:
    t = np.arange(G, dtype=np.float64) / G
    tri = 1.0 - np.abs(2.0 * t - 1.0)
    outer = (t < 0.25) | (t >= 0.75)
    w = np.where(outer, (2.0 * tri) ** 2 / 2.0, 1.0 - (2.0 * (1.0 - tri)) ** 2 / 2.0)
    if normalize:
        w = w / w.mean()
    w.setflags(write=False)
    return w


def spline_window_1d(G: int, normalize: bool = True) -> np.ndarray:
    """Second-order spline window of length ``G``.

    Rises as ``8 t**2`` over the first quarter, follows ``1 - 2 (2t - 1)**2``
    over the central half and mirrors back down. Two copies shifted by
    ``G/2`` sum to one before normalization; with ``normalize`` the profile is
    divided by its mean.
    """
    if G < 4 or G % 4:
        raise ValueError(f"window side must be a positive multiple of 4, got {G}")
    return _spline_profile(G, normalize)


def spline_window_2d(G: int) -> np.ndarray:
    w = spline_window_1d(G)
    return np.outer(w, w)


@dataclass(frozen=True)
class DihedralTransform:
    """Optional left-right mirror followed by ``rotation`` counter-clockwise quarter turns."""

    rotation: int = 0
    mirrored: bool = False

    def __post_init__(self):
        if self.rotation not in (0, 1, 2, 3):
            raise ValueError(f"rotation must be 0..3 quarter turns, got {self.rotation}")

    def apply(self, img: np.ndarray) -> np.ndarray:
        out = img[:, ::-1] if self.mirrored else img
        return np.ascontiguousarray(np.rot90(out, self.rotation, axes=(0, 1)))

    def invert(self, img: np.ndarray) -> np.ndarray:
        return self.inverse().apply(img)

    def inverse(self) -> DihedralTransform:
        if self.mirrored:
            return self
        return DihedralTransform((-self.rotation) % 4, False)

    def compose(self, inner: DihedralTransform) -> DihedralTransform:
        """Transform equal to applying ``inner`` first, then ``self``."""
        # mirror conjugates a rotation into its inverse
        turn = -inner.rotation if self.mirrored else inner.rotation
        return DihedralTransform((self.rotation + turn) % 4, self.mirrored != inner.mirrored)

    def __str__(self):
        return f"rot{90 * self.rotation}{'+mirror' if self.mirrored else ''}"


IDENTITY = DihedralTransform()
ALL_TRANSFORMS = tuple(DihedralTransform(r, m) for m in (False, True) for r in range(4))


def _reflect_margins(h: int, w: int, half: int) -> list[tuple[int, int]]:
    # extra bottom/right rows keep the padded extent on the half-stride lattice
    return [(half, half + (-h) % half), (half, half + (-w) % half)]


def _pad_reflect(img: np.ndarray, margins: list[tuple[int, int]]) -> np.ndarray:
    widths = margins + [(0, 0)] * (img.ndim - 2)
    return np.pad(img, widths, mode="reflect")


def _tile_origins(padded: int, G: int, half: int) -> range:
    return range(0, padded - G + 1, half)


def mops_blend(
    img: np.ndarray,
    restorer: Restorer,
    G: int | None = None,
    use_dihedral: bool = True,
    *,
    workers: int | None = None,
    site_cut=None,
) -> np.ndarray:
    """Blend overlapping restored tiles of ``img`` into a seamless output.

    Parameters
    ----------
    img : ndarray
        ``H x W x C`` input.
    restorer : Restorer
        Applied to every ``G x G`` tile.
    G : int, optional
        Tile side; defaults to ``restorer.patch_side``.
    use_dihedral : bool
        Average over all 8 rotations/mirrorings instead of the identity only.
    workers : int, optional
        Thread count for tile restoration. Does not affect the result.
    site_cut : callable, optional
        Maps a full-resolution side-channel array into ``img``'s frame; used
        to build the :class:`PatchSite` handed to the restorer.
    """
    if G is None:
        G = restorer.patch_side
    if G is None:
        raise ValueError("tile side G is required when the restorer accepts any size")
    check_patch_side(restorer, G, "MOPS restorer")
    weights = spline_window_2d(G)
    half = G // 2
    h, w = img.shape[:2]
    if h < half or w < half:
        raise ValueError(f"{h}x{w} image is smaller than half a {G} tile")
    base_cut = site_cut if site_cut is not None else (lambda a: a)

    transforms = ALL_TRANSFORMS if use_dihedral else (IDENTITY,)
    total = np.zeros(img.shape, dtype=np.float64)
    for tf in transforms:
        view = tf.apply(img)
        vh, vw = view.shape[:2]
        margins = _reflect_margins(vh, vw, half)
        padded = _pad_reflect(view, margins)
        origins = [
            (y, x)
            for y in _tile_origins(padded.shape[0], G, half)
            for x in _tile_origins(padded.shape[1], G, half)
        ]

        def restore_at(origin, tf=tf, padded=padded, margins=margins):
            y, x = origin

            def cut(full, y=y, x=x):
                return _pad_reflect(tf.apply(base_cut(full)), margins)[y : y + G, x : x + G]

            site = PatchSite(f"MOPS {tf} tile at (y={y - half}, x={x - half})", cut)
            tile = np.ascontiguousarray(padded[y : y + G, x : x + G])
            return run_restorer(restorer, tile, site)

        preds = ordered_map(restore_at, origins, workers)

        acc = np.zeros(padded.shape, dtype=np.float64)
        wacc = np.zeros(padded.shape[:2], dtype=np.float64)
        for (y, x), pred in zip(origins, preds):
            acc[y : y + G, x : x + G] += pred * weights[:, :, None]
            wacc[y : y + G, x : x + G] += weights
        inner = (slice(half, half + vh), slice(half, half + vw))
        blended = acc[inner] / wacc[inner][:, :, None]
        total += tf.invert(blended)

    return (total / len(transforms)).astype(np.float32)
