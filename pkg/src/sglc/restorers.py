"""Patch restorers: the pluggable patch -> patch transforms used as DM and EM.

A restorer is any object with a ``patch_side`` attribute (``None`` when it
accepts any size) and a ``restore(patch, site=None)`` method returning an
array of the same shape. ``site`` describes where the patch was cut from so
restorers that need side-channel data (the haze oracle needs transmission)
can cut their own maps with the identical index map.
"""

from __future__ import annotations

import subprocess
import threading
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .image import clamp01


class RestorerError(RuntimeError):
    """A restorer failed on a specific patch or tile."""


@dataclass(frozen=True)
class PatchSite:
    """Provenance of a patch: a label for diagnostics plus a cutter.

    ``extract(full)`` applies to ``full`` (an array with the same height and
    width as the pipeline input, any channel count) exactly the padding,
    transforms and indexing that produced the patch.
    """

    label: str
    cut: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def extract(self, full: np.ndarray) -> np.ndarray:
        return self.cut(full)


class Restorer(Protocol):
    patch_side: int | None

    def restore(self, patch: np.ndarray, site: PatchSite | None = None) -> np.ndarray: ...


def run_restorer(restorer: Restorer, patch: np.ndarray, site: PatchSite | None = None) -> np.ndarray:
    """Call ``restorer`` and enforce the shape contract, tagging failures with the site."""
    where = site.label if site is not None else "patch"
    try:
        out = restorer.restore(patch, site)
    except RestorerError as exc:
        raise RestorerError(f"{where}: {exc}") from exc
    except Exception as exc:
        raise RestorerError(f"{where}: {type(exc).__name__}: {exc}") from exc
    out = np.asarray(out)
    if out.shape != patch.shape:
        raise RestorerError(f"{where}: restorer returned shape {out.shape}, expected {patch.shape}")
    if not np.isfinite(out).all():
        raise RestorerError(f"{where}: restorer returned non-finite samples")
    return np.ascontiguousarray(out, dtype=np.float32)


def check_patch_side(restorer: Restorer, G: int, role: str = "restorer"):
    side = getattr(restorer, "patch_side", None)
    if side is not None and side != G:
        raise ValueError(f"{role} expects {side}x{side} patches but the pipeline uses {G}")


class IdentityRestorer:
    patch_side = None

    def restore(self, patch, site=None):
        return patch


def identity_restorer() -> IdentityRestorer:
    return IdentityRestorer()


@dataclass(frozen=True)
class HazeOracleParams:
    """Ground-truth haze parameters in full-image coordinates.

    ``transmission`` is ``H x W`` (or ``H x W x 1``), or a scalar for a
    uniform medium. ``atmospheric_light`` is a scalar, a per-channel vector,
    or a per-pixel ``H x W x C`` map.
    """

    transmission: np.ndarray
    atmospheric_light: np.ndarray
    t_min: float = 0.1


class HazeOracleRestorer:
    """Inverts the scattering model with the known transmission and light."""

    patch_side = None

    def __init__(self, params: HazeOracleParams):
        t = np.asarray(params.transmission, dtype=np.float32)
        if t.ndim == 2:
            t = t[:, :, None]
        if t.ndim not in (0, 3) or (t.ndim == 3 and t.shape[2] != 1):
            raise ValueError(f"transmission must be a scalar or HxW map, got shape {t.shape}")
        if params.t_min <= 0:
            raise ValueError("t_min must be positive")
        if t.min() < params.t_min:
            raise ValueError(f"transmission {float(t.min()):.4g} is below t_min={params.t_min}")
        if t.max() > 1.0:
            raise ValueError("transmission must not exceed 1")
        a = np.asarray(params.atmospheric_light, dtype=np.float32)
        if a.ndim not in (0, 1, 3):
            raise ValueError(f"atmospheric light must be scalar, per-channel or HxWxC, got {a.shape}")
        if a.min() < 0 or a.max() > 1:
            raise ValueError("atmospheric light must lie in [0, 1]")
        self.transmission = t
        self.light = a
        self.t_min = params.t_min

    def _local(self, arr: np.ndarray, site: PatchSite | None, what: str) -> np.ndarray:
        if arr.ndim < 3:
            return arr
        if site is None:
            raise ValueError(f"per-pixel {what} needs a patch site to locate the patch")
        return site.extract(arr)

    def restore(self, patch, site=None):
        t = self._local(self.transmission, site, "transmission")
        a = self._local(self.light, site, "atmospheric light")
        clean = (patch - (1.0 - t) * a) / t
        return clamp01(clean.astype(np.float32))


def haze_oracle_restorer(params: HazeOracleParams) -> HazeOracleRestorer:
    return HazeOracleRestorer(params)


class BorderDamageRestorer:
    """Overwrites a frame of ``width`` pixels, mimicking tile-border vignetting."""

    patch_side = None

    def __init__(self, width: int, value: float = 0.0):
        if width < 0:
            raise ValueError("border width must be >= 0")
        self.width = width
        self.value = value

    def restore(self, patch, site=None):
        w = self.width
        if 2 * w >= min(patch.shape[:2]):
            raise ValueError(f"border width {w} too large for a {patch.shape[0]}x{patch.shape[1]} patch")
        out = patch.copy()
        if w:
            out[:w] = self.value
            out[-w:] = self.value
            out[:, :w] = self.value
            out[:, -w:] = self.value
        return out


def border_damage_restorer(width: int, value: float = 0.0) -> BorderDamageRestorer:
    return BorderDamageRestorer(width, value)


class LeWinRestorer:
    """A single seeded LeWin block applied to a patch.

    When the patch channel count differs from the block width, a seeded
    linear embedding maps pixels into feature space and its pseudo-inverse
    maps back, so an all-zero block still acts as the identity.
    """

    def __init__(self, config, patch_side: int | None = None, channels: int = 3, weights=None):
        from . import lewin

        self.config = config
        self.patch_side = patch_side
        self.channels = channels
        if patch_side is not None and patch_side % config.window:
            raise ValueError(f"patch side {patch_side} is not divisible by window {config.window}")
        self.weights = weights if weights is not None else lewin.init_weights(config)
        if channels == config.channels:
            self.embed = None
            self.unembed = None
        else:
            rng = np.random.default_rng([config.seed, 1])
            self.embed = rng.uniform(-1.0, 1.0, size=(channels, config.channels))
            self.unembed = np.linalg.pinv(self.embed)
        self._forward = lewin.lewin_forward

    def restore(self, patch, site=None):
        h, w, c = patch.shape
        m = self.config.window
        if h % m or w % m:
            raise ValueError(f"{h}x{w} patch is not divisible by window {m}")
        if c != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {c}")
        x = patch.astype(np.float64)
        if self.embed is not None:
            x = x @ self.embed
        y = self._forward(x, self.config, self.weights).astype(np.float64)
        if self.unembed is not None:
            y = y @ self.unembed
        return clamp01(y.astype(np.float32))


def lewin_restorer(config, patch_side: int | None = None, channels: int = 3) -> LeWinRestorer:
    return LeWinRestorer(config, patch_side=patch_side, channels=channels)


class ExternalProcessRestorer:
    """Restores patches by exchanging raw-format frames with a child process.

    One request is a raw image written to the child's stdin; one response is
    a raw image of identical shape read from its stdout. Calls are serialized
    so the alternation stays strict when the pipeline dispatches from
    several threads.
    """

    def __init__(self, command: Sequence[str], patch_side: int | None = None):
        self.command = list(command)
        self.patch_side = patch_side
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        return self._proc

    def restore(self, patch, site=None):
        from .rawio import read_raw_stream, write_raw_stream

        with self._lock:
            proc = self._ensure_started()
            try:
                write_raw_stream(proc.stdin, patch)
                proc.stdin.flush()
                out = read_raw_stream(proc.stdout)
            except (BrokenPipeError, EOFError, ValueError) as exc:
                raise RestorerError(f"external restorer {self.command[0]!r} failed: {exc}") from exc
        if out.shape != patch.shape:
            raise RestorerError(f"external restorer returned {out.shape}, expected {patch.shape}")
        return out

    def close(self):
        with self._lock:
            if self._proc is not None:
                if self._proc.stdin:
                    self._proc.stdin.close()
                try:
                    self._proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
                    self._proc.wait()
                if self._proc.stdout:
                    self._proc.stdout.close()
                self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
