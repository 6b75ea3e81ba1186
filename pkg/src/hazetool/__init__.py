"""Noise-aware single image dehazing toolkit."""

from .airlight import estimate_airlight
from .bilateral import (BilateralGridModel, ModelConfig, TrainConfig,
                        estimate_t_learned, slice_grid, train)
from .image import load_image, luminance, resize, save_image
from .losses import GaussianKernel, color_loss, gaussian_blur, restoration_loss, total_loss
from .metrics import psnr, ssim
from .recovery import (RecoveryParams, gate, noise_amplification_map,
                       recover_classic, recover_fused)
from .synthesis import add_noise, apply_haze, t_from_depth
from .transmission import dark_channel, estimate_t_prior
from .wgif import LayerPair, WgifParams, decompose, edge_weight, wgif_filter

__version__ = "0.1.0"
