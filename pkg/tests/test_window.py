import numpy as np
import pytest

from sglc.metrics import seam_metric
from sglc.restorers import border_damage_restorer
from sglc.window import WindowTileSet, window_extract, window_reconstruct_naive
from conftest import smooth_rgb


@pytest.mark.parametrize("shape, G, count", [((2048, 2048), 1024, 4), ((4096, 6144), 1024, 24), ((64, 64), 64, 1)])
def test_tile_counts(shape, G, count):
    img = np.zeros(shape + (1,), dtype=np.float32)
    assert len(window_extract(img, G).tiles) == count


def test_tile_contents_and_round_trip(rng):
    img = rng.random((96, 160, 3), dtype=np.float32)
    tiles = window_extract(img, 32)
    assert (tiles.rows, tiles.cols) == (3, 5)
    assert np.array_equal(tiles.tiles[7], img[32:64, 64:96])
    assert np.array_equal(window_reconstruct_naive(tiles), img)


def test_single_tile_identity(rng):
    img = rng.random((32, 32, 1), dtype=np.float32)
    tiles = window_extract(img, 32)
    assert np.array_equal(tiles.tiles[0], img)
    assert np.array_equal(window_reconstruct_naive(tiles), img)


def test_coverage_is_exact():
    tiles = window_extract(np.zeros((48, 80, 1), np.float32), 16)
    ones = WindowTileSet(16, tiles.rows, tiles.cols, [np.ones_like(t) for t in tiles.tiles])
    assert (window_reconstruct_naive(ones) == 1).all()


def test_damaged_tiles_leave_seams():
    img = smooth_rgb(128, 192, seed=5)
    damage = border_damage_restorer(2, 0.0)
    tiles = window_extract(img, 64)
    stitched = window_reconstruct_naive(
        WindowTileSet(64, tiles.rows, tiles.cols, [damage.restore(t) for t in tiles.tiles])
    )
    # the discontinuity sits right at x = G
    jump = np.abs(stitched[10:-10, 61] - stitched[10:-10, 62]).mean()
    assert jump > 0.1
    assert seam_metric(stitched, 64) > seam_metric(img, 64)


def test_errors():
    with pytest.raises(ValueError):
        window_extract(np.zeros((30, 32, 1), np.float32), 16)
    with pytest.raises(ValueError):
        window_reconstruct_naive(WindowTileSet(16, 2, 2, [np.zeros((16, 16, 1), np.float32)]))
