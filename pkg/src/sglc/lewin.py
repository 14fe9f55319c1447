"""Forward pass of a single LeWin transformer block at toy scale.

``out = X' + LFF(LN(X'))`` with ``X' = x + NW-MSA(LN(x))``. All arithmetic
runs in float64 and feature maps are ``h x w x C`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from functools import lru_cache

import numpy as np
from scipy.special import erf

LN_EPS = 1e-5


@dataclass(frozen=True)
class LeWinConfig:
    channels: int = 8
    window: int = 8
    heads: int = 2
    ffn_ratio: int = 4
    seed: int = 0
    activation: str = "gelu"  # "identity" gives exact algebraic fixtures in tests

    def __post_init__(self):
        if self.channels < 1 or self.heads < 1 or self.window < 1 or self.ffn_ratio < 1:
            raise ValueError(f"invalid LeWin config {self}")
        if self.channels % self.heads:
            raise ValueError(f"channels {self.channels} not divisible by heads {self.heads}")
        if self.activation not in ("gelu", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def head_dim(self) -> int:
        return self.channels // self.heads

    @property
    def hidden(self) -> int:
        return self.channels * self.ffn_ratio


@dataclass(frozen=True)
class LeWinWeights:
    ln1_gamma: np.ndarray
    ln1_beta: np.ndarray
    wq: np.ndarray  # C x C, head k owns columns k*d_k:(k+1)*d_k
    wk: np.ndarray
    wv: np.ndarray
    bias_table: np.ndarray  # heads x (2m-1)**2
    ln2_gamma: np.ndarray
    ln2_beta: np.ndarray
    w1: np.ndarray  # C x hidden
    b1: np.ndarray
    dw: np.ndarray  # 3 x 3 x hidden
    dw_bias: np.ndarray
    w2: np.ndarray  # hidden x C
    b2: np.ndarray

    def zeroed(self) -> LeWinWeights:
        """Every learned parameter set to zero, LayerNorm scales included."""
        return replace(self, **{f.name: np.zeros_like(getattr(self, f.name)) for f in fields(self)})


def init_weights(cfg: LeWinConfig) -> LeWinWeights:
    """Deterministic weights for ``cfg``.

    A ``numpy.random.default_rng(cfg.seed)`` (PCG64) generator draws
    ``uniform(-0.1, 0.1)`` arrays in this order: wq, wk, wv, bias_table, w1,
    b1, dw, dw_bias, w2, b2. LayerNorm scales start at one, shifts at zero.
    """
    rng = np.random.default_rng(cfg.seed)
    C, Hd, m = cfg.channels, cfg.hidden, cfg.window

    def draw(*shape):
        return rng.uniform(-0.1, 0.1, size=shape)

    wq, wk, wv = draw(C, C), draw(C, C), draw(C, C)
    bias_table = draw(cfg.heads, (2 * m - 1) ** 2)
    w1, b1 = draw(C, Hd), draw(Hd)
    dw, dw_bias = draw(3, 3, Hd), draw(Hd)
    w2, b2 = draw(Hd, C), draw(C)
    return LeWinWeights(
        ln1_gamma=np.ones(C), ln1_beta=np.zeros(C),
        wq=wq, wk=wk, wv=wv, bias_table=bias_table,
        ln2_gamma=np.ones(C), ln2_beta=np.zeros(C),
        w1=w1, b1=b1, dw=dw, dw_bias=dw_bias, w2=w2, b2=b2,
    )


def _activation(cfg: LeWinConfig):
    if cfg.activation == "identity":
        return lambda v: v
    return gelu


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def layer_norm(x: np.ndarray, gamma=None, beta=None, eps: float = LN_EPS) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    y = (x - mu) / np.sqrt(var + eps)
    if gamma is not None:
        y = y * gamma
    if beta is not None:
        y = y + beta
    return y


def window_partition(x: np.ndarray, m: int) -> np.ndarray:
    """Split ``h x w x C`` into ``n x m x m x C`` windows, row-major."""
    h, w = x.shape[:2]
    if m < 1 or h % m or w % m:
        raise ValueError(f"{h}x{w} feature map is not divisible by window {m}")
    c = x.shape[2:]
    blocks = x.reshape((h // m, m, w // m, m) + c).swapaxes(1, 2)
    return np.ascontiguousarray(blocks.reshape((-1, m, m) + c))


def window_reverse(windows: np.ndarray, m: int, h: int, w: int) -> np.ndarray:
    if windows.shape[0] != (h // m) * (w // m):
        raise ValueError(f"{windows.shape[0]} windows cannot tile a {h}x{w} map with side {m}")
    c = windows.shape[3:]
    blocks = windows.reshape((h // m, w // m, m, m) + c).swapaxes(1, 2)
    return np.ascontiguousarray(blocks.reshape((h, w) + c))


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def attention(Q: np.ndarray, K: np.ndarray, V: np.ndarray, B=None, d_k: float | None = None) -> np.ndarray:
    """``softmax(Q K^T / sqrt(d_k) + B) V`` over the last two axes."""
    if Q.shape[-1] != K.shape[-1]:
        raise ValueError(f"query width {Q.shape[-1]} != key width {K.shape[-1]}")
    if K.shape[-2] != V.shape[-2]:
        raise ValueError(f"{K.shape[-2]} keys but {V.shape[-2]} values")
    d_k = Q.shape[-1] if d_k is None else d_k
    logits = Q @ np.swapaxes(K, -1, -2) / np.sqrt(d_k)
    if B is not None:
        if np.ndim(B) and np.shape(B)[-2:] != logits.shape[-2:]:
            raise ValueError(f"bias shape {np.shape(B)} does not match logits {logits.shape}")
        logits = logits + B
    return softmax(logits) @ V


@lru_cache(maxsize=16)
def relative_position_index(m: int) -> np.ndarray:
    """``m*m x m*m`` indices into a ``(2m-1)**2`` bias table.

    Token pair ``(i, j)`` at relative offset ``(dy, dx)`` reads entry
    ``(dy + m - 1) * (2m - 1) + (dx + m - 1)``.
    """
    ys, xs = np.divmod(np.arange(m * m), m)
    dy = ys[:, None] - ys[None, :] + m - 1
    dx = xs[:, None] - xs[None, :] + m - 1
    idx = dy * (2 * m - 1) + dx
    idx.setflags(write=False)
    return idx


def _check(x: np.ndarray, cfg: LeWinConfig):
    if x.ndim != 3 or x.shape[2] != cfg.channels:
        raise ValueError(f"expected an h x w x {cfg.channels} feature map, got {x.shape}")
    if x.shape[0] % cfg.window or x.shape[1] % cfg.window:
        raise ValueError(f"{x.shape[0]}x{x.shape[1]} map not divisible by window {cfg.window}")


def nwmsa_forward(x: np.ndarray, cfg: LeWinConfig, weights: LeWinWeights | None = None) -> np.ndarray:
    """Multi-head self-attention inside non-overlapping ``m x m`` windows."""
    _check(x, cfg)
    weights = weights if weights is not None else init_weights(cfg)
    h, w, C = x.shape
    m, k, d = cfg.window, cfg.heads, cfg.head_dim
    tokens = window_partition(np.asarray(x, dtype=np.float64), m).reshape(-1, m * m, C)

    def heads(proj):
        # n x T x C -> n x k x T x d
        return (tokens @ proj).reshape(tokens.shape[0], m * m, k, d).transpose(0, 2, 1, 3)

    q, kk, v = heads(weights.wq), heads(weights.wk), heads(weights.wv)
    bias = weights.bias_table[:, relative_position_index(m)]  # k x T x T
    y = attention(q, kk, v, bias[None], d)
    y = y.transpose(0, 2, 1, 3).reshape(-1, m, m, C)
    return window_reverse(y, m, h, w)


def depthwise_conv3x3(x: np.ndarray, kernel: np.ndarray, bias=None) -> np.ndarray:
    """Per-channel 3x3 correlation with edge-replicate borders."""
    h, w = x.shape[:2]
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="edge")
    out = np.zeros(x.shape, dtype=np.float64)
    for dy in range(3):
        for dx in range(3):
            out += xp[dy : dy + h, dx : dx + w] * kernel[dy, dx]
    if bias is not None:
        out += bias
    return out


def lff_forward(x: np.ndarray, cfg: LeWinConfig, weights: LeWinWeights | None = None) -> np.ndarray:
    """Locally-enhanced feed-forward: expand, GELU, depth-wise 3x3, GELU, project back."""
    _check(x, cfg)
    weights = weights if weights is not None else init_weights(cfg)
    act = _activation(cfg)
    hidden = act(np.asarray(x, dtype=np.float64) @ weights.w1 + weights.b1)
    hidden = act(depthwise_conv3x3(hidden, weights.dw, weights.dw_bias))
    return hidden @ weights.w2 + weights.b2


def lewin_forward(x: np.ndarray, cfg: LeWinConfig, weights: LeWinWeights | None = None) -> np.ndarray:
    _check(x, cfg)
    weights = weights if weights is not None else init_weights(cfg)
    x = np.asarray(x, dtype=np.float64)
    mid = x + nwmsa_forward(layer_norm(x, weights.ln1_gamma, weights.ln1_beta), cfg, weights)
    return mid + lff_forward(layer_norm(mid, weights.ln2_gamma, weights.ln2_beta), cfg, weights)
