"""Gaussian splatting: forward rendering, losses, analytic gradients."""

from .gaussians import GaussianSet, logit_to_opacity, opacity_to_logit
from .image_io import read_png, read_ppm, to_uint8, write_png, write_ppm
from .losses import loss_rgb, loss_seg
from .projection import prepare_splats, screen_covariance, world_covariance
from .rasterizer import ALL_PARAMS, GaussianGrads, RenderedImage, backward, render

__all__ = [
    "ALL_PARAMS",
    "GaussianGrads",
    "GaussianSet",
    "RenderedImage",
    "backward",
    "logit_to_opacity",
    "loss_rgb",
    "loss_seg",
    "opacity_to_logit",
    "prepare_splats",
    "read_png",
    "read_ppm",
    "render",
    "screen_covariance",
    "to_uint8",
    "world_covariance",
    "write_png",
    "write_ppm",
]
