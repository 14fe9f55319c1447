"""Tiled global/local dehazing pipeline with grid patching and MOPS blending."""

from .grid import GridLayout, GridPatchSet, grid_extract, grid_reconstruct
from .hazelab import (
    CorruptionSpec,
    HazeField,
    corrupt_white_squares,
    smooth_depth_map,
    synthesize_haze,
    transmission,
)
from .image import PadSpec, as_image, clamp01, pad_to_multiple, unpad
from .lewin import LeWinConfig, lewin_forward, lff_forward, nwmsa_forward
from .loss import LaplacianPyramid, LossParams, charbonnier, loss_eval, loss_grad, pyramid_build, pyramid_collapse
from .metrics import QualityReport, evaluate, psnr, seam_metric, ssim
from .mops import ALL_TRANSFORMS, DihedralTransform, mops_blend, spline_window_1d, spline_window_2d
from .pipeline import PipelineConfig, build_restorer, run_gfg, run_lfe, run_sglc
from .restorers import (
    ExternalProcessRestorer,
    HazeOracleParams,
    PatchSite,
    Restorer,
    RestorerError,
    border_damage_restorer,
    haze_oracle_restorer,
    identity_restorer,
    lewin_restorer,
)
from .window import WindowTileSet, window_extract, window_reconstruct_naive

__version__ = "0.1.0"
