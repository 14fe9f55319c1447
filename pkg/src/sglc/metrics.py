"""Image quality metrics: PSNR, SSIM and a tile-seam statistic."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
SEAM_FLOOR = 1e-6


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    return a, b


def psnr(a, b) -> float:
    """PSNR in dB for peak value 1.0; ``inf`` for identical images."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_taps(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    n = len(taps)
    h, w = x.shape
    rows = sum(taps[i] * x[i : h - n + 1 + i] for i in range(n))
    return sum(taps[i] * rows[:, i : w - n + 1 + i] for i in range(n))


def ssim(a, b) -> float:
    """Mean SSIM, 11x11 Gaussian window (sigma 1.5), data range 1.

    Statistics are evaluated only where the window lies fully inside the
    image; channels are scored separately and averaged.
    """
    a, b = _pair(a, b)
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs sides >= {SSIM_WINDOW}, got {a.shape[0]}x{a.shape[1]}")
    taps = _gaussian_taps()
    scores = []
    for c in range(a.shape[2]):
        x, y = a[:, :, c], b[:, :, c]
        mx, my = _filter_valid(x, taps), _filter_valid(y, taps)
        sxx = _filter_valid(x * x, taps) - mx * mx
        syy = _filter_valid(y * y, taps) - my * my
        sxy = _filter_valid(x * y, taps) - mx * my
        num = (2 * mx * my + SSIM_C1) * (2 * sxy + SSIM_C2)
        den = (mx * mx + my * my + SSIM_C1) * (sxx + syy + SSIM_C2)
        scores.append(float(np.mean(num / den)))
    return float(np.mean(scores))


def _band_second_differences(img: np.ndarray, lines: list[int], band: int, axis: int) -> list[np.ndarray]:
    """|second differences| along ``axis`` in a band straddling each line.

    A line at ``p`` separates samples ``p - 1`` and ``p``; the band covers
    centres ``p - band .. p + band - 1``.
    """
    n = img.shape[axis]
    out = []
    for p in lines:
        centres = np.arange(p - band, p + band)
        if centres[0] < 1 or centres[-1] > n - 2:
            continue
        mid = np.take(img, centres, axis=axis)
        prev = np.take(img, centres - 1, axis=axis)
        nxt = np.take(img, centres + 1, axis=axis)
        out.append(np.abs(nxt - 2.0 * mid + prev).ravel())
    return out


def seam_metric(img, G: int, band: int | None = None) -> float:
    """Tile-boundary discontinuity relative to an interior baseline.

    Mean absolute second difference in thin bands across every grid line at
    multiples of ``G``, divided by the same statistic on lines offset by
    ``G/2``; each orientation is averaged separately, then the two are
    averaged. Both means get a ``1e-6`` floor, so seam-free
    images score about 1 and a flat image scores exactly 1.
    """
    if G < 2:
        raise ValueError("tile side must be >= 2")
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    h, w = img.shape[:2]
    if h < 2 * G or w < 2 * G:
        raise ValueError(f"seam metric needs at least {2 * G}x{2 * G} pixels, got {h}x{w}")
    if band is None:
        band = max(1, min(3, G // 4))
    half = G // 2
    seam, base = [], []
    for axis, n in ((1, w), (0, h)):
        # each orientation is averaged on its own so the different line counts
        # of seam and baseline lines do not reweight the two directions
        s = _band_second_differences(img, list(range(G, n, G)), band, axis)
        b = _band_second_differences(img, list(range(half, n, G)), band, axis)
        if s and b:
            seam.append(float(np.mean(np.concatenate(s))))
            base.append(float(np.mean(np.concatenate(b))))
    num = float(np.mean(seam)) if seam else 0.0
    den = float(np.mean(base)) if base else 0.0
    return (num + SEAM_FLOOR) / (den + SEAM_FLOOR)


@dataclass
class QualityReport:
    psnr_db: float
    ssim: float
    seam: float
    wall_time_s: float

    def to_record(self) -> str:
        """``key=value`` lines in a fixed field order."""
        return "".join(f"{f.name}={float(getattr(self, f.name))!r}\n" for f in fields(self))

    @classmethod
    def from_record(cls, text: str) -> QualityReport:
        values = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"malformed record line {line!r}")
            values[key.strip()] = float(value)
        missing = [f.name for f in fields(cls) if f.name not in values]
        if missing:
            raise ValueError(f"record is missing {', '.join(missing)}")
        return cls(**{f.name: values[f.name] for f in fields(cls)})

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(clean, restored, tile_side: int = 64, wall_time_s: float = math.nan) -> QualityReport:
    """Bundle PSNR, SSIM and the seam statistic.

    The seam entry is ``nan`` when the image is smaller than two tiles.
    """
    _pair(clean, restored)
    h, w = np.shape(restored)[:2]
    seam = seam_metric(restored, tile_side) if min(h, w) >= 2 * tile_side else math.nan
    return QualityReport(psnr(clean, restored), ssim(clean, restored), seam, wall_time_s)
