"""Slow, obviously-correct reference implementations used only by tests.

Nothing here imports the code under test's internals: the pyramid is built
from explicit dense matrices and attention from per-token loops.
"""

from __future__ import annotations

import math

import numpy as np

KERNEL = [1 / 16, 4 / 16, 6 / 16, 4 / 16, 1 / 16]


def blur_matrix(n: int, scale: float = 1.0) -> np.ndarray:
    """n x n matrix of the 5-tap binomial blur with clamped (replicated) borders."""
    M = np.zeros((n, n))
    for i in range(n):
        for j, k in enumerate(KERNEL):
            src = min(max(i + j - 2, 0), n - 1)
            M[i, src] += scale * k
    return M


def decimate_matrix(n: int) -> np.ndarray:
    m = math.ceil(n / 2)
    D = np.zeros((m, n))
    for i in range(m):
        D[i, 2 * i] = 1.0
    return D


def upsample_matrix(n: int) -> np.ndarray:
    """n x ceil(n/2) interpolation matrix.

    Fine sample i takes 2*KERNEL[2j - i + 2] from coarse sample j, with j
    clamped into range (the coarse signal is replicated past its ends).
    """
    m = math.ceil(n / 2)
    M = np.zeros((n, m))
    for i in range(n):
        for j in range(-2, m + 2):
            t = 2 * j - i + 2
            if 0 <= t <= 4:
                M[i, min(max(j, 0), m - 1)] += 2 * KERNEL[t]
    return M


def apply_separable(A: np.ndarray, B: np.ndarray, img: np.ndarray) -> np.ndarray:
    """Apply A along rows (axis 0) and B along columns (axis 1), per channel."""
    return np.einsum("ij,jk...,lk->il...", A, img, B)


def dense_pyramid(img: np.ndarray, K: int) -> list[np.ndarray]:
    """Band-pass levels followed by the low-pass residual."""
    g = np.asarray(img, dtype=np.float64)
    bands = []
    for _ in range(K):
        h, w = g.shape[:2]
        Rh = decimate_matrix(h) @ blur_matrix(h)
        Rw = decimate_matrix(w) @ blur_matrix(w)
        coarse = apply_separable(Rh, Rw, g)
        up = apply_separable(upsample_matrix(h), upsample_matrix(w), coarse)
        bands.append(g - up)
        g = coarse
    bands.append(g)
    return bands


def dense_pyramid_operator(h: int, w: int, K: int) -> np.ndarray:
    """Full matrix of the single-channel pyramid map, bands stacked row-wise."""
    cols = []
    for idx in range(h * w):
        e = np.zeros((h, w))
        e.flat[idx] = 1.0
        cols.append(np.concatenate([b.ravel() for b in dense_pyramid(e, K)]))
    return np.stack(cols, axis=1)


def oracle_loss(truth, pred, eps: float, K: int) -> float:
    a = np.asarray(truth, dtype=np.float64)
    b = np.asarray(pred, dtype=np.float64)
    s = np.mean((a - b) ** 2)
    for ba, bb in zip(dense_pyramid(a, K), dense_pyramid(b, K)):
        s += np.mean((ba - bb) ** 2)
    return math.sqrt(s + eps**2)


def dense_attention(Q, K, V, B=None, d_k=None):
    """Token-by-token softmax attention."""
    Q, K, V = (np.asarray(a, dtype=np.float64) for a in (Q, K, V))
    d_k = Q.shape[1] if d_k is None else d_k
    out = np.zeros((Q.shape[0], V.shape[1]))
    for i in range(Q.shape[0]):
        logits = np.array([Q[i] @ K[j] / math.sqrt(d_k) for j in range(K.shape[0])])
        if B is not None:
            logits = logits + B[i]
        p = np.exp(logits - logits.max())
        p /= p.sum()
        out[i] = p @ V
    return out


def layer_norm_loop(x, gamma, beta, eps=1e-5):
    out = np.zeros_like(x, dtype=np.float64)
    for (i, j), _ in np.ndenumerate(x[:, :, 0]):
        v = x[i, j].astype(np.float64)
        mu = v.mean()
        var = ((v - mu) ** 2).mean()
        out[i, j] = (v - mu) / math.sqrt(var + eps) * gamma + beta
    return out


def gelu_exact(v):
    return 0.5 * v * (1.0 + np.vectorize(math.erf)(v / math.sqrt(2.0)))


def dense_block(x, w, identity_act=False):
    """One LeWin block where the attention window covers the whole map.

    ``w`` is any object with the block's weight attributes; a single head
    with zero position bias is assumed.
    """
    act = (lambda v: v) if identity_act else gelu_exact
    h, wd, C = x.shape
    x = x.astype(np.float64)
    t = layer_norm_loop(x, w.ln1_gamma, w.ln1_beta).reshape(-1, C)
    att = dense_attention(t @ w.wq, t @ w.wk, t @ w.wv).reshape(h, wd, C)
    mid = x + att
    t2 = layer_norm_loop(mid, w.ln2_gamma, w.ln2_beta)
    hid = act(t2 @ w.w1 + w.b1)
    conv = np.zeros_like(hid)
    for i in range(h):
        for j in range(wd):
            acc = np.array(w.dw_bias, dtype=np.float64)
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    yy = min(max(i + dy, 0), h - 1)
                    xx = min(max(j + dx, 0), wd - 1)
                    acc = acc + hid[yy, xx] * w.dw[dy + 1, dx + 1]
            conv[i, j] = acc
    return mid + act(conv) @ w.w2 + w.b2
