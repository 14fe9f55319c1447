import math

import numpy as np
import pytest
from skimage.metrics import structural_similarity

from conftest import smooth_rgb
from sglc.metrics import QualityReport, evaluate, psnr, seam_metric, ssim
from sglc.window import WindowTileSet, window_extract, window_reconstruct_naive
from sglc.restorers import border_damage_restorer


def test_psnr_fixtures():
    zeros, ones = np.zeros((16, 16, 3)), np.ones((16, 16, 3))
    assert psnr(zeros, ones) == 0.0
    assert psnr(zeros, np.full((16, 16, 3), 0.1)) == pytest.approx(20.0, abs=1e-9)
    assert psnr(ones, ones) == math.inf


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4, 3)), np.zeros((4, 4, 1)))


def test_ssim_identity(rng):
    img = rng.random((40, 50, 3))
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)


def test_ssim_anticorrelated():
    img = (np.indices((32, 32)).sum(axis=0) % 2).astype(float)[:, :, None]
    assert ssim(img, 1.0 - img) < 0


def test_ssim_constant_closed_form():
    c1, c2 = 0.3, 0.7
    a, b = np.full((20, 20, 1), c1), np.full((20, 20, 1), c2)
    C1 = 1e-4
    expect = (2 * c1 * c2 + C1) / (c1**2 + c2**2 + C1)
    assert ssim(a, b) == pytest.approx(expect, abs=1e-9)


def test_ssim_matches_skimage(rng):
    a = smooth_rgb(64, 80, 2).astype(np.float64)
    b = np.clip(a + 0.05 * rng.standard_normal(a.shape), 0, 1)
    ref = structural_similarity(
        a, b, gaussian_weights=True, sigma=1.5, use_sample_covariance=False, data_range=1.0, channel_axis=2
    )
    # skimage averages over positions it crops by the window radius; our positions are exactly the valid ones
    assert ssim(a, b) == pytest.approx(ref, abs=1e-6)


def test_ssim_rejects_tiny():
    with pytest.raises(ValueError):
        ssim(np.zeros((8, 8, 1)), np.zeros((8, 8, 1)))


def test_seam_flat_and_ramp():
    assert seam_metric(np.full((128, 128, 1), 0.4), 32) == 1.0
    y, x = np.mgrid[0:128, 0:192]
    ramp = (0.002 * x + 0.001 * y)[:, :, None]
    # texture period divides G/2 so seam and baseline lines see the same phase
    ramp = ramp + 0.01 * np.sin(2 * np.pi * x / 8.0)[:, :, None]
    assert abs(seam_metric(ramp, 32) - 1.0) <= 0.05


def test_seam_detects_naive_damage():
    img = smooth_rgb(128, 192, 5)
    tiles = window_extract(img, 32)
    damage = border_damage_restorer(2, 0.0)
    stitched = window_reconstruct_naive(
        WindowTileSet(32, tiles.rows, tiles.cols, [damage.restore(t) for t in tiles.tiles])
    )
    assert seam_metric(stitched, 32) > 2.0
    assert seam_metric(stitched, 32) > 10 * seam_metric(img, 32)


def test_seam_needs_two_tiles():
    with pytest.raises(ValueError):
        seam_metric(np.zeros((60, 120, 1)), 32)


def test_report_record_round_trip():
    r = QualityReport(psnr_db=math.inf, ssim=0.98765, seam=1.25, wall_time_s=0.5)
    text = r.to_record()
    assert text.splitlines()[0] == "psnr_db=inf"
    assert [line.split("=")[0] for line in text.splitlines()] == ["psnr_db", "ssim", "seam", "wall_time_s"]
    assert QualityReport.from_record(text) == r
    with pytest.raises(ValueError):
        QualityReport.from_record("psnr_db=1\n")


def test_evaluate_small_image_has_nan_seam(rng):
    img = rng.random((32, 32, 3))
    rep = evaluate(img, img, tile_side=64)
    assert rep.psnr_db == math.inf and rep.ssim == pytest.approx(1.0)
    assert math.isnan(rep.seam) and math.isnan(rep.wall_time_s)
