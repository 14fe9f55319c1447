"""SGLC inference: global features generator then local features enhancer.

``run_gfg`` pads, grid-patches, restores every patch with the dehazing
model and reassembles. ``run_lfe`` pads again and restores contiguous tiles
with the enhancer, either stitched naively or blended by MOPS. ``run_sglc``
chains the two in either order.
"""

from __future__ import annotations

import shlex
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .grid import GridLayout, grid_patch, grid_reconstruct, GridPatchSet
from .image import as_image, pad_to_multiple, pad_with, unpad
from .lewin import LeWinConfig
from .mops import mops_blend
from .parallel import ordered_map
from .restorers import (
    ExternalProcessRestorer,
    HazeOracleParams,
    PatchSite,
    Restorer,
    border_damage_restorer,
    check_patch_side,
    haze_oracle_restorer,
    identity_restorer,
    lewin_restorer,
    run_restorer,
)
from .window import WindowTileSet, window_reconstruct_naive, window_tile

ORDERS = ("sglc", "inv_sglc")


class ConfigError(ValueError):
    pass


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


@dataclass
class PipelineConfig:
    grid_patch_side: int = 1024
    window_patch_side: int | None = None
    use_mops: bool = True
    use_dihedral: bool = True
    dm: str = "identity"
    em: str = "identity"
    order: str = "sglc"
    pad_mode: str = "edge"

    def __post_init__(self):
        if self.window_patch_side is None:
            self.window_patch_side = self.grid_patch_side
        for name in ("grid_patch_side", "window_patch_side"):
            side = getattr(self, name)
            if not isinstance(side, int) or side < 4 or side % 4:
                raise ConfigError(f"{name} must be a positive multiple of 4, got {side!r}")
        if self.order not in ORDERS:
            raise ConfigError(f"order must be one of {ORDERS}, got {self.order!r}")
        if self.pad_mode not in ("edge", "reflect"):
            raise ConfigError(f"pad_mode must be edge or reflect, got {self.pad_mode!r}")

    @classmethod
    def from_mapping(cls, values: dict) -> PipelineConfig:
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if not isinstance(raw, str):
                kwargs[key] = raw
            elif key in ("grid_patch_side", "window_patch_side"):
                try:
                    kwargs[key] = int(raw)
                except ValueError:
                    raise ConfigError(f"{key} must be an integer, got {raw!r}") from None
            elif key in ("use_mops", "use_dihedral"):
                kwargs[key] = _parse_bool(raw)
            else:
                kwargs[key] = raw.strip()
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text: str) -> PipelineConfig:
        return cls.from_mapping(parse_key_values(text))

    @classmethod
    def from_file(cls, path) -> PipelineConfig:
        return cls.from_text(Path(path).read_text())

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in asdict(self).items())


def parse_key_values(text: str) -> dict[str, str]:
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"line {n}: expected key=value, got {line!r}")
        values[key.strip()] = value.strip()
    return values


def build_restorer(selector: str, patch_side: int, haze: HazeOracleParams | None = None) -> Restorer:
    """Instantiate a restorer from a selector string.

    Selectors: ``identity``, ``haze-oracle``, ``border-damage[:width[,value]]``,
    ``lewin[:seed]`` and ``external:<command line>``.
    """
    name, _, arg = selector.strip().partition(":")
    if name == "identity":
        return identity_restorer()
    if name == "haze-oracle":
        if haze is None:
            raise ConfigError("haze-oracle needs transmission and atmospheric light")
        return haze_oracle_restorer(haze)
    if name == "border-damage":
        parts = [p for p in arg.split(",") if p.strip()] if arg else []
        try:
            width = int(parts[0]) if parts else 2
            value = float(parts[1]) if len(parts) > 1 else 0.0
        except ValueError:
            raise ConfigError(f"bad border-damage arguments {arg!r}") from None
        if 2 * width >= patch_side:
            raise ConfigError(f"border width {width} too large for {patch_side} patches")
        return border_damage_restorer(width, value)
    if name == "lewin":
        try:
            seed = int(arg) if arg else 0
        except ValueError:
            raise ConfigError(f"bad lewin seed {arg!r}") from None
        window = 8 if patch_side % 8 == 0 else 4
        return lewin_restorer(LeWinConfig(channels=8, window=window, heads=2, seed=seed), patch_side)
    if name == "external":
        if not arg.strip():
            raise ConfigError("external restorer needs a command")
        return ExternalProcessRestorer(shlex.split(arg), patch_side)
    raise ConfigError(f"unknown restorer selector {selector!r}")


def _check_same_dims(before: np.ndarray, after: np.ndarray, stage: str):
    if before.shape != after.shape:
        raise RuntimeError(f"{stage} changed image shape {before.shape} -> {after.shape}")


def run_gfg(img, dm: Restorer, G: int, *, workers: int | None = None, pad_mode: str = "edge") -> np.ndarray:
    """Grid patching -> DM on every patch -> reverse grid reconstruction -> unpad."""
    img = as_image(img)
    check_patch_side(dm, G, "DM")
    padded, spec = pad_to_multiple(img, G, pad_mode)
    layout = GridLayout.for_size(img.shape[0], img.shape[1], G)

    def restore(l):
        site = PatchSite(f"grid patch {l}", lambda full, l=l: grid_patch(pad_with(full, spec), layout, l))
        return run_restorer(dm, grid_patch(padded, layout, l), site)

    patches = ordered_map(restore, range(layout.N), workers)
    out = unpad(grid_reconstruct(GridPatchSet(layout, patches)), spec)
    _check_same_dims(img, out, "GFG")
    return out


def run_lfe(
    img,
    em: Restorer,
    G: int,
    use_mops: bool = True,
    use_dihedral: bool = True,
    *,
    workers: int | None = None,
    pad_mode: str = "edge",
) -> np.ndarray:
    """Second padding -> window tiles -> EM -> MOPS or naive stitch -> unpad."""
    img = as_image(img)
    check_patch_side(em, G, "EM")
    padded, spec = pad_to_multiple(img, G, pad_mode)
    if use_mops:
        blended = mops_blend(
            padded, em, G, use_dihedral, workers=workers, site_cut=lambda full: pad_with(full, spec)
        )
    else:
        rows, cols = padded.shape[0] // G, padded.shape[1] // G

        def restore(index):
            r, c = divmod(index, cols)
            site = PatchSite(
                f"window tile (row={r}, col={c})",
                lambda full, r=r, c=c: window_tile(pad_with(full, spec), G, r, c),
            )
            return run_restorer(em, window_tile(padded, G, r, c), site)

        tiles = ordered_map(restore, range(rows * cols), workers)
        blended = window_reconstruct_naive(WindowTileSet(G, rows, cols, tiles))
    out = unpad(blended, spec)
    _check_same_dims(img, out, "LFE")
    return out


def run_sglc(
    img,
    cfg: PipelineConfig,
    dm: Restorer | None = None,
    em: Restorer | None = None,
    *,
    haze: HazeOracleParams | None = None,
    workers: int | None = None,
) -> np.ndarray:
    """Full pipeline in ``cfg.order``; restorers default to ``cfg.dm``/``cfg.em``."""
    img = as_image(img)
    G, Gw = cfg.grid_patch_side, cfg.window_patch_side
    built = []
    if dm is None:
        dm = build_restorer(cfg.dm, G, haze)
        built.append(dm)
    if em is None:
        em = build_restorer(cfg.em, Gw, haze)
        built.append(em)

    def gfg(x):
        return run_gfg(x, dm, G, workers=workers, pad_mode=cfg.pad_mode)

    def lfe(x):
        return run_lfe(x, em, Gw, cfg.use_mops, cfg.use_dihedral, workers=workers, pad_mode=cfg.pad_mode)

    stages = (gfg, lfe) if cfg.order == "sglc" else (lfe, gfg)
    out = img
    try:
        for stage in stages:
            out = stage(out)
    finally:
        for r in built:
            if hasattr(r, "close"):
                r.close()
    return out
