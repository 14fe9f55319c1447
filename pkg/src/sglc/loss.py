"""Laplacian-pyramid Charbonnier loss and its analytic gradient.

The loss is ``sqrt(mse(I, P) + sum_k mse(Pi_k(I), Pi_k(P)) + eps**2)`` where
``Pi_k`` runs over every band-pass level and the low-pass residual. All
pyramid maps are linear, so the gradient uses their exact transposes.
Computation is in float64 regardless of input dtype.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BINOMIAL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
MIN_COARSE_SIDE = 4


@dataclass(frozen=True)
class LossParams:
    epsilon: float = 1e-3
    pyramid_levels: int = 4

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")


@dataclass
class LaplacianPyramid:
    levels: list[np.ndarray]  # band-pass L_0 .. L_{K-1}
    residual: np.ndarray  # low-pass G_K

    @property
    def bands(self) -> list[np.ndarray]:
        """All components compared by the loss: band-pass levels then the residual."""
        return self.levels + [self.residual]


def charbonnier(x, eps: float = 1e-3):
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    return np.sqrt(np.square(x) + eps * eps)


# --- separable linear operators and their transposes -------------------------

def _blur_axis(x: np.ndarray, axis: int, scale: float = 1.0) -> np.ndarray:
    n = x.shape[axis]
    widths = [(0, 0)] * x.ndim
    widths[axis] = (2, 2)
    xp = np.pad(x, widths, mode="edge")
    out = np.zeros(x.shape, dtype=np.float64)
    for j, k in enumerate(BINOMIAL):
        out += (scale * k) * np.take(xp, np.arange(j, j + n), axis=axis)
    return out


def _blur_axis_T(y: np.ndarray, axis: int, scale: float = 1.0) -> np.ndarray:
    n = y.shape[axis]
    shape = list(y.shape)
    shape[axis] = n + 4
    up = np.zeros(shape, dtype=np.float64)
    for j, k in enumerate(BINOMIAL):
        idx = [slice(None)] * y.ndim
        idx[axis] = slice(j, j + n)
        up[tuple(idx)] += (scale * k) * y
    # fold the replicated border back onto the edge samples
    core = np.take(up, np.arange(2, n + 2), axis=axis)
    first = [slice(None)] * y.ndim
    last = [slice(None)] * y.ndim
    first[axis] = slice(0, 1)
    last[axis] = slice(n - 1, n)
    core[tuple(first)] += np.take(up, [0], axis=axis) + np.take(up, [1], axis=axis)
    core[tuple(last)] += np.take(up, [n + 2], axis=axis) + np.take(up, [n + 3], axis=axis)
    return core


def blur(x: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Separable 5-tap binomial blur with edge-replicate borders."""
    return _blur_axis(_blur_axis(x, 0, scale), 1, scale)


def blur_T(y: np.ndarray, scale: float = 1.0) -> np.ndarray:
    return _blur_axis_T(_blur_axis_T(y, 1, scale), 0, scale)


def decimate(x: np.ndarray) -> np.ndarray:
    return x[::2, ::2]


def decimate_T(y: np.ndarray, shape: tuple) -> np.ndarray:
    out = np.zeros(shape, dtype=np.float64)
    out[::2, ::2] = y
    return out


def _upsample_axis(c: np.ndarray, n: int) -> np.ndarray:
    # fine sample i mixes coarse samples j with |2j - i| <= 2, taps 2*BINOMIAL,
    # coarse indices clamped so constants survive at both borders
    cp = np.concatenate([c[:1], c, c[-1:]], axis=0)
    even = (cp[:-2] + 6.0 * cp[1:-1] + cp[2:]) / 8.0
    odd = (cp[1:-1] + cp[2:]) / 2.0
    out = np.empty((2 * c.shape[0],) + c.shape[1:], dtype=np.float64)
    out[0::2] = even
    out[1::2] = odd
    return out[:n]


def _upsample_axis_T(y: np.ndarray, m: int) -> np.ndarray:
    full = np.zeros((2 * m,) + y.shape[1:], dtype=np.float64)
    full[: y.shape[0]] = y
    ye, yo = full[0::2], full[1::2]
    t = np.zeros((m + 2,) + y.shape[1:], dtype=np.float64)
    t[:-2] += ye / 8.0
    t[1:-1] += 6.0 * ye / 8.0 + yo / 2.0
    t[2:] += ye / 8.0 + yo / 2.0
    out = t[1:-1].copy()
    out[0] += t[0]
    out[-1] += t[-1]
    return out


def upsample(x: np.ndarray, shape: tuple) -> np.ndarray:
    """Interpolate to ``shape``: zero insertion followed by the doubled kernel.

    The border is handled by replicating the coarse samples, so constant
    images upsample to the same constant.
    """
    x = np.asarray(x, dtype=np.float64)
    rows = _upsample_axis(x, shape[0])
    return np.moveaxis(_upsample_axis(np.moveaxis(rows, 1, 0), shape[1]), 0, 1)


def upsample_T(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    m0, m1 = math.ceil(y.shape[0] / 2), math.ceil(y.shape[1] / 2)
    cols = np.moveaxis(_upsample_axis_T(np.moveaxis(y, 1, 0), m1), 0, 1)
    return _upsample_axis_T(cols, m0)


def reduce(x: np.ndarray) -> np.ndarray:
    return decimate(blur(x))


def reduce_T(y: np.ndarray, shape: tuple) -> np.ndarray:
    return blur_T(decimate_T(y, shape))


# --- pyramid -----------------------------------------------------------------

def max_levels(height: int, width: int) -> int:
    """Deepest pyramid whose coarsest level keeps both sides >= 4."""
    k = 0
    h, w = height, width
    while math.ceil(h / 2) >= MIN_COARSE_SIDE and math.ceil(w / 2) >= MIN_COARSE_SIDE:
        h, w = math.ceil(h / 2), math.ceil(w / 2)
        k += 1
    return k


def _check_levels(shape: tuple, K: int):
    if K < 1:
        raise ValueError("pyramid needs at least one level")
    deepest = max_levels(shape[0], shape[1])
    if K > deepest:
        raise ValueError(
            f"{shape[0]}x{shape[1]} image supports at most {deepest} pyramid levels, asked for {K}"
        )


def pyramid_build(img, K: int = 4) -> LaplacianPyramid:
    g = np.asarray(img, dtype=np.float64)
    _check_levels(g.shape, K)
    levels = []
    for _ in range(K):
        coarse = reduce(g)
        levels.append(g - upsample(coarse, g.shape))
        g = coarse
    return LaplacianPyramid(levels, g)


def pyramid_collapse(pyr: LaplacianPyramid) -> np.ndarray:
    g = pyr.residual
    for band in reversed(pyr.levels):
        g = band + upsample(g, band.shape)
    return g


def pyramid_adjoint(bands: list[np.ndarray], shape: tuple) -> np.ndarray:
    """Transpose of ``x -> pyramid_build(x).bands`` applied to ``bands``.

    ``bands`` holds cotangents for ``L_0 .. L_{K-1}`` followed by ``G_K``;
    ``shape`` is the source image shape.
    """
    *levels, coarse = [np.asarray(b, dtype=np.float64) for b in bands]
    shapes = [tuple(shape)]
    for _ in levels[:-1]:
        prev = shapes[-1]
        shapes.append((math.ceil(prev[0] / 2), math.ceil(prev[1] / 2)) + tuple(prev[2:]))
    cot = coarse
    for k in reversed(range(len(levels))):
        cot = cot - upsample_T(levels[k])
        cot = levels[k] + reduce_T(cot, shapes[k])
    return cot


# --- loss --------------------------------------------------------------------

def _pair(truth, pred):
    a = np.asarray(truth, dtype=np.float64)
    b = np.asarray(pred, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: truth {a.shape} vs prediction {b.shape}")
    return a, b


def _inner(diff: np.ndarray, params: LossParams) -> tuple[float, LaplacianPyramid]:
    pyr = pyramid_build(diff, params.pyramid_levels)
    s = np.mean(diff * diff) + sum(np.mean(b * b) for b in pyr.bands)
    return float(s) + params.epsilon**2, pyr


def loss_eval(truth, pred, params: LossParams = LossParams()) -> float:
    a, b = _pair(truth, pred)
    # pyramid is linear: Pi(pred) - Pi(truth) == Pi(pred - truth)
    s, _ = _inner(b - a, params)
    return math.sqrt(s)


def loss_grad(truth, pred, params: LossParams = LossParams()) -> np.ndarray:
    """Gradient of :func:`loss_eval` with respect to ``pred``."""
    a, b = _pair(truth, pred)
    diff = b - a
    s, pyr = _inner(diff, params)
    value = math.sqrt(s)
    cot = [band / band.size for band in pyr.bands]
    g = diff / diff.size + pyramid_adjoint(cot, diff.shape)
    return g / value
