"""Command-line entry point: ``sglc <verb> ...``.

Exit codes: 0 success, 1 I/O failure, 2 invalid configuration or inputs,
3 restorer failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import rawio
from .grid import GridLayout, GridPatchSet, grid_extract, grid_reconstruct
from .hazelab import CorruptionSpec, HazeField, corrupt_white_squares, smooth_depth_map, synthesize_haze, transmission
from .image import PadSpec, pad_to_multiple, unpad
from .metrics import evaluate
from .pipeline import ConfigError, PipelineConfig, build_restorer, parse_key_values, run_gfg, run_sglc
from .restorers import HazeOracleParams, HazeOracleRestorer, RestorerError
from .window import WindowTileSet, window_extract, window_reconstruct_naive

log = logging.getLogger("sglc")

EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_RESTORER = 3

_SIDECAR_T = ".transmission.raw"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def transmission_sidecar(path) -> Path:
    """Where ``synth`` stores the transmission map for hazy image ``path``."""
    path = Path(path)
    return path.with_name(path.stem + _SIDECAR_T)


def _load(path) -> np.ndarray:
    try:
        return rawio.load_image(path)
    except FileNotFoundError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    except (OSError, ValueError, EOFError) as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc


def _save(path, img, bits: int = 16):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        rawio.save_image(path, img, bits)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from exc


def _parse_light(text: str) -> np.ndarray:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"bad atmospheric light {text!r}", EXIT_CONFIG) from None
    if not values or any(not 0.0 <= v <= 1.0 for v in values):
        raise CliError(f"atmospheric light must be values in [0, 1], got {text!r}", EXIT_CONFIG)
    return np.asarray(values[0] if len(values) == 1 else values, dtype=np.float32)


# --- pipeline configuration ---------------------------------------------------

def _add_pipeline_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value pipeline configuration file")
    p.add_argument("--grid-side", type=int, dest="grid_patch_side")
    p.add_argument("--window-side", type=int, dest="window_patch_side")
    p.add_argument("--mops", dest="use_mops", action="store_true", default=None)
    p.add_argument("--no-mops", dest="use_mops", action="store_false")
    p.add_argument("--dihedral", dest="use_dihedral", action="store_true", default=None)
    p.add_argument("--no-dihedral", dest="use_dihedral", action="store_false")
    p.add_argument("--dm", help="restorer selector for the global stage")
    p.add_argument("--em", help="restorer selector for the local stage")
    p.add_argument("--order", choices=("sglc", "inv_sglc"))
    p.add_argument("--pad-mode", choices=("edge", "reflect"), dest="pad_mode")
    p.add_argument("--threads", type=int, help="worker threads (default: $SGLC_THREADS or 1)")


def _pipeline_config(args) -> PipelineConfig:
    values: dict = {}
    if args.config:
        try:
            values.update(parse_key_values(Path(args.config).read_text()))
        except OSError as exc:
            raise CliError(f"cannot read config {args.config}: {exc}", EXIT_CONFIG) from exc
        except ConfigError as exc:
            raise CliError(f"invalid config {args.config}: {exc}", EXIT_CONFIG) from exc
    for key in ("grid_patch_side", "window_patch_side", "use_mops", "use_dihedral", "dm", "em", "order", "pad_mode"):
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    # window side follows the grid side unless given explicitly
    if "window_patch_side" not in values and "grid_patch_side" in values:
        values["window_patch_side"] = values["grid_patch_side"]
    try:
        return PipelineConfig.from_mapping(values)
    except (ConfigError, TypeError) as exc:
        raise CliError(f"invalid config: {exc}", EXIT_CONFIG) from exc


def _workers(args) -> int | None:
    if args.threads is not None and args.threads < 1:
        raise CliError("--threads must be >= 1", EXIT_CONFIG)
    return args.threads


def _uses_oracle(cfg: PipelineConfig) -> bool:
    return any(sel.split(":")[0] == "haze-oracle" for sel in (cfg.dm, cfg.em))


def _haze_params(t_path, light: str, shape) -> HazeOracleParams:
    t = _load(t_path)
    if t.shape[:2] != shape[:2]:
        raise CliError(f"transmission {t_path} is {t.shape[0]}x{t.shape[1]}, image is {shape[0]}x{shape[1]}", EXIT_CONFIG)
    try:
        params = HazeOracleParams(transmission=t, atmospheric_light=_parse_light(light))
        HazeOracleRestorer(params)
    except ValueError as exc:
        raise CliError(f"invalid haze parameters: {exc}", EXIT_CONFIG) from exc
    return params


def _run_pipeline(img, cfg, haze, workers):
    try:
        return run_sglc(img, cfg, haze=haze, workers=workers)
    except ConfigError as exc:
        raise CliError(f"invalid config: {exc}", EXIT_CONFIG) from exc
    except RestorerError as exc:
        raise CliError(f"restorer failed: {exc}", EXIT_RESTORER) from exc


# --- verbs --------------------------------------------------------------------

def cmd_dehaze(args) -> int:
    cfg = _pipeline_config(args)
    workers = _workers(args)
    img = _load(args.input)
    haze = None
    if _uses_oracle(cfg):
        t_path = args.transmission or transmission_sidecar(args.input)
        haze = _haze_params(t_path, args.light, img.shape)
    truth = _load(args.truth) if args.truth else None
    if truth is not None and truth.shape != img.shape:
        raise CliError(f"ground truth {args.truth} has shape {truth.shape}, input is {img.shape}", EXIT_CONFIG)
    start = time.perf_counter()
    out = _run_pipeline(img, cfg, haze, workers)
    elapsed = time.perf_counter() - start
    log.info("%s on %dx%d in %.2fs", cfg.order, img.shape[0], img.shape[1], elapsed)
    _save(args.output, out, args.bits)
    if truth is not None:
        report = evaluate(truth, out, cfg.window_patch_side, elapsed)
        sys.stdout.write(report.to_record())
    return 0


def _depth_from(source: str, dims, seed: int, octaves: int) -> np.ndarray:
    if source == "noise":
        return smooth_depth_map(dims, seed=seed, octaves=octaves)
    if source.startswith("constant:"):
        try:
            value = float(source.split(":", 1)[1])
        except ValueError:
            raise CliError(f"bad depth source {source!r}", EXIT_CONFIG) from None
        if value < 0:
            raise CliError("depth must be >= 0", EXIT_CONFIG)
        return np.full(dims, value, dtype=np.float32)
    depth = _load(source)
    if depth.shape[:2] != tuple(dims):
        raise CliError(f"depth map {source} is {depth.shape[:2]}, image is {tuple(dims)}", EXIT_CONFIG)
    return depth[:, :, 0]


def cmd_synth(args) -> int:
    clean = _load(args.clean)
    depth = _depth_from(args.depth, clean.shape[:2], args.seed, args.octaves)
    light = _parse_light(args.light)
    try:
        field = HazeField(beta=args.beta, depth=depth, atmospheric_light=light)
        t = transmission(field, clean.shape[:2], args.t_min)
        hazy = synthesize_haze(clean, field, t=t)
    except ValueError as exc:
        raise CliError(f"invalid haze parameters: {exc}", EXIT_CONFIG) from exc
    _save(args.output, hazy, args.bits)
    _save(transmission_sidecar(args.output), t)
    return 0


def cmd_corrupt(args) -> int:
    clean = _load(args.clean)
    lo = args.side_min if args.side_min is not None else args.side
    hi = args.side_max if args.side_max is not None else args.side
    if lo is None:
        lo, hi = 8, 32
    elif hi is None:
        hi = lo
    try:
        spec = CorruptionSpec(square_count=args.count, side_range=(lo, hi), fill=args.fill, seed=args.seed)
        out, mask = corrupt_white_squares(clean, spec)
    except ValueError as exc:
        raise CliError(f"invalid corruption spec: {exc}", EXIT_CONFIG) from exc
    out_path = Path(args.output)
    mask_path = Path(args.mask) if args.mask else out_path.with_name(out_path.stem + ".mask" + out_path.suffix)
    _save(out_path, out, args.bits)
    _save(mask_path, mask, args.bits)
    return 0


def _image_files(directory: Path) -> dict[str, Path]:
    files = {}
    for p in sorted(directory.iterdir()):
        if not p.is_file() or p.name.endswith(_SIDECAR_T):
            continue
        if p.suffix.lower() in (".raw", ".png"):
            files[p.stem] = p
    return files


def cmd_export_lfe_dataset(args) -> int:
    cfg = _pipeline_config(args)
    workers = _workers(args)
    hazy_dir, clean_dir, out_dir = Path(args.hazy_dir), Path(args.clean_dir), Path(args.output_dir)
    for d in (hazy_dir, clean_dir):
        if not d.is_dir():
            raise CliError(f"not a directory: {d}", EXIT_IO)
    hazy, clean = _image_files(hazy_dir), _image_files(clean_dir)
    unmatched = sorted(set(hazy) ^ set(clean))
    if unmatched:
        raise CliError(f"unmatched pairs: {', '.join(unmatched)}", EXIT_CONFIG)
    G = cfg.window_patch_side
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["stem\trow\tcol\tprediction\tclean\n"]
    for stem in sorted(hazy):
        h_img, c_img = _load(hazy[stem]), _load(clean[stem])
        if h_img.shape != c_img.shape:
            raise CliError(f"{stem}: hazy {h_img.shape} and clean {c_img.shape} differ", EXIT_CONFIG)
        haze = None
        if _uses_oracle(cfg):
            haze = _haze_params(transmission_sidecar(hazy[stem]), args.light, h_img.shape)
        try:
            dm = build_restorer(cfg.dm, cfg.grid_patch_side, haze)
        except ConfigError as exc:
            raise CliError(f"invalid config: {exc}", EXIT_CONFIG) from exc
        try:
            pred = run_gfg(h_img, dm, cfg.grid_patch_side, workers=workers, pad_mode=cfg.pad_mode)
        except RestorerError as exc:
            raise CliError(f"{stem}: restorer failed: {exc}", EXIT_RESTORER) from exc
        finally:
            if hasattr(dm, "close"):
                dm.close()
        pred_tiles = window_extract(pad_to_multiple(pred, G, cfg.pad_mode)[0], G)
        clean_tiles = window_extract(pad_to_multiple(c_img, G, cfg.pad_mode)[0], G)
        for i, (p, c) in enumerate(zip(pred_tiles.tiles, clean_tiles.tiles)):
            r, col = pred_tiles.position(i)
            p_name = f"{stem}_r{r:03d}_c{col:03d}_pred.raw"
            c_name = f"{stem}_r{r:03d}_c{col:03d}_clean.raw"
            _save(out_dir / p_name, p)
            _save(out_dir / c_name, c)
            lines.append(f"{stem}\t{r}\t{col}\t{p_name}\t{c_name}\n")
    (out_dir / "manifest.tsv").write_text("".join(lines))
    return 0


def cmd_metrics(args) -> int:
    a, b = _load(args.a), _load(args.b)
    if a.shape != b.shape:
        raise CliError(f"shape mismatch: {a.shape} vs {b.shape}", EXIT_CONFIG)
    try:
        report = evaluate(a, b, args.tile)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    sys.stdout.write(report.to_record())
    return 0


def _write_layout(path: Path, values: dict):
    path.write_text("".join(f"{k}={v}\n" for k, v in values.items()))


def _read_layout(path: Path) -> dict[str, str]:
    try:
        return parse_key_values(path.read_text())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc


def cmd_grid(args) -> int:
    if args.action == "extract":
        img = _load(args.source)
        try:
            padded, spec = pad_to_multiple(img, args.side, args.pad_mode)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from exc
        layout = GridLayout.for_size(img.shape[0], img.shape[1], args.side)
        out = Path(args.dest)
        out.mkdir(parents=True, exist_ok=True)
        for l, patch in enumerate(grid_extract(padded, layout).patches):
            _save(out / f"patch_{l:05d}.raw", patch)
        _write_layout(out / "layout.txt", {"G": layout.G, "n_h": layout.n_h, "n_w": layout.n_w,
                                            "pad_right": spec.right, "pad_bottom": spec.bottom})
        return 0
    src = Path(args.source)
    meta = _read_layout(src / "layout.txt")
    try:
        layout = GridLayout(int(meta["G"]), int(meta["n_h"]), int(meta["n_w"]))
        spec = PadSpec(int(meta["pad_right"]), int(meta["pad_bottom"]))
    except (KeyError, ValueError) as exc:
        raise CliError(f"invalid layout file: {exc}", EXIT_CONFIG) from exc
    patches = [_load(src / f"patch_{l:05d}.raw") for l in range(layout.N)]
    try:
        img = unpad(grid_reconstruct(GridPatchSet(layout, patches)), spec)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    _save(args.dest, img)
    return 0


def cmd_window(args) -> int:
    if args.action == "extract":
        img = _load(args.source)
        try:
            padded, spec = pad_to_multiple(img, args.side, args.pad_mode)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from exc
        tiles = window_extract(padded, args.side)
        out = Path(args.dest)
        out.mkdir(parents=True, exist_ok=True)
        for i, tile in enumerate(tiles.tiles):
            r, c = tiles.position(i)
            _save(out / f"tile_r{r:03d}_c{c:03d}.raw", tile)
        _write_layout(out / "layout.txt", {"G": args.side, "rows": tiles.rows, "cols": tiles.cols,
                                            "pad_right": spec.right, "pad_bottom": spec.bottom})
        return 0
    src = Path(args.source)
    meta = _read_layout(src / "layout.txt")
    try:
        G, rows, cols = int(meta["G"]), int(meta["rows"]), int(meta["cols"])
        spec = PadSpec(int(meta["pad_right"]), int(meta["pad_bottom"]))
    except (KeyError, ValueError) as exc:
        raise CliError(f"invalid layout file: {exc}", EXIT_CONFIG) from exc
    tiles = [_load(src / f"tile_r{r:03d}_c{c:03d}.raw") for r in range(rows) for c in range(cols)]
    try:
        img = unpad(window_reconstruct_naive(WindowTileSet(G, rows, cols, tiles)), spec)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    _save(args.dest, img)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sglc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("dehaze", help="run the SGLC pipeline on one image")
    p.add_argument("input")
    p.add_argument("output")
    _add_pipeline_flags(p)
    p.add_argument("--transmission", help="transmission map for haze-oracle (default: input sidecar)")
    p.add_argument("--light", default="1.0", help="atmospheric light for haze-oracle, e.g. 1.0 or 0.9,0.9,1.0")
    p.add_argument("--truth", help="ground truth image; prints a quality report")
    p.add_argument("--bits", type=int, default=16, choices=(8, 16), help="PNG output depth")
    p.set_defaults(func=cmd_dehaze)

    p = sub.add_parser("synth", help="synthesize haze on a clean image")
    p.add_argument("clean")
    p.add_argument("output")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--light", default="1.0")
    p.add_argument("--depth", default="noise", help="noise | constant:<value> | path to a depth image")
    p.add_argument("--octaves", type=int, default=4)
    p.add_argument("--t-min", type=float, default=0.1, dest="t_min")
    p.add_argument("--bits", type=int, default=16, choices=(8, 16))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("corrupt", help="paint seeded white squares for self-supervised pairs")
    p.add_argument("clean")
    p.add_argument("output")
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--side", type=int, help="fixed square side")
    p.add_argument("--side-min", type=int, dest="side_min")
    p.add_argument("--side-max", type=int, dest="side_max")
    p.add_argument("--fill", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mask", help="mask output path (default: <output>.mask<ext>)")
    p.add_argument("--bits", type=int, default=16, choices=(8, 16))
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("export-lfe-dataset", help="write GFG-prediction/clean window tile pairs")
    p.add_argument("hazy_dir")
    p.add_argument("clean_dir")
    p.add_argument("output_dir")
    _add_pipeline_flags(p)
    p.add_argument("--light", default="1.0")
    p.set_defaults(func=cmd_export_lfe_dataset)

    p = sub.add_parser("metrics", help="print PSNR/SSIM/seam for an image pair")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tile", type=int, default=64, help="tile side for the seam statistic")
    p.set_defaults(func=cmd_metrics)

    for verb, func in (("grid", cmd_grid), ("window", cmd_window)):
        p = sub.add_parser(verb, help=f"{verb} patch extract/reconstruct (debugging)")
        p.add_argument("action", choices=("extract", "reconstruct"))
        p.add_argument("source", help="image (extract) or patch directory (reconstruct)")
        p.add_argument("dest", help="patch directory (extract) or image (reconstruct)")
        p.add_argument("--side", type=int, default=64)
        p.add_argument("--pad-mode", choices=("edge", "reflect"), default="edge", dest="pad_mode")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"sglc {args.verb}: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        # parameter errors the verbs do not map themselves
        print(f"sglc {args.verb}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
