"""Raster image model and similarity metrics (SSIM / PSNR / MSE).

Pixels are normalized floats in [0, 1]; PSNR uses peak 1.0 and SSIM uses
an 8x8 uniform window at stride 1 with K1=0.01, K2=0.03 over a dynamic
range of 1.0, grayscale via the 0.299/0.587/0.114 luma weights. All
constants are pinned so results are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, InputError, TooSmallError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 1.0


@dataclass(frozen=True)
class RasterImage:
    """Decoded pixel grid: (height, width, channels) float64 array in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        p = self.pixels
        if p.ndim != 3 or p.shape[2] not in (1, 3):
            raise InputError(f"pixels must have shape (h, w, 1|3), got {p.shape}")
        if p.dtype != np.float64:
            raise InputError(f"pixels must be float64, got {p.dtype}")
        if p.size and (float(p.min()) < 0.0 or float(p.max()) > 1.0):
            raise InputError("pixel values must lie in [0, 1]")

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def channels(self) -> int:
        return int(self.pixels.shape[2])

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RasterImage":
        a = np.array(arr, dtype=np.float64)  # own copy: images are immutable
        if a.ndim == 2:
            a = a[:, :, np.newaxis]
        a.setflags(write=False)
        return cls(a)

    @classmethod
    def load_png(cls, path: str | Path) -> "RasterImage":
        """Load an 8-bit PNG and normalize to [0, 1] floats."""
        from PIL import Image

        with Image.open(path) as img:
            if (img.format or "").upper() != "PNG":
                raise InputError(f"{path}: only PNG images are supported, got {img.format}")
            if img.mode == "L":
                converted = img
            else:
                converted = img.convert("RGB")
            arr = np.asarray(converted, dtype=np.float64) / 255.0
        return cls.from_array(arr)

    def to_gray(self) -> "RasterImage":
        if self.channels == 1:
            return self
        r, g, b = LUMA_WEIGHTS
        gray = r * self.pixels[:, :, 0] + g * self.pixels[:, :, 1] + b * self.pixels[:, :, 2]
        return RasterImage(np.clip(gray, 0.0, 1.0)[:, :, np.newaxis])


def _check_dims(a: RasterImage, b: RasterImage) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatchError(
            f"image shapes differ: {a.pixels.shape} vs {b.pixels.shape}"
        )


def mse(a: RasterImage, b: RasterImage) -> float:
    """Mean squared per-pixel difference over all channels."""
    _check_dims(a, b)
    diff = a.pixels - b.pixels
    return float(np.mean(diff * diff))


def psnr(a: RasterImage, b: RasterImage) -> float:
    """Peak signal-to-noise ratio in dB (peak 1.0); +inf for identical images."""
    m = mse(a, b)
    if m == 0.0:
        return math.inf
    return 10.0 * math.log10((DYNAMIC_RANGE * DYNAMIC_RANGE) / m)


def ssim(a: RasterImage, b: RasterImage) -> float:
    """Mean local structural similarity over 8x8 uniform windows, stride 1.

    Color inputs are converted to grayscale first. Window statistics are
    population moments (divide by 64); the map is averaged in row-major
    order so results do not depend on threading.
    """
    ga = a.to_gray().pixels[:, :, 0]
    gb = b.to_gray().pixels[:, :, 0]
    if ga.shape != gb.shape:
        raise DimensionMismatchError(f"image shapes differ: {ga.shape} vs {gb.shape}")
    h, w = ga.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise TooSmallError(
            f"image {w}x{h} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2

    wa = np.lib.stride_tricks.sliding_window_view(ga, (SSIM_WINDOW, SSIM_WINDOW))
    wb = np.lib.stride_tricks.sliding_window_view(gb, (SSIM_WINDOW, SSIM_WINDOW))
    mu_a = wa.mean(axis=(-1, -2))
    mu_b = wb.mean(axis=(-1, -2))
    var_a = (wa * wa).mean(axis=(-1, -2)) - mu_a * mu_a
    var_b = (wb * wb).mean(axis=(-1, -2)) - mu_b * mu_b
    cov = (wa * wb).mean(axis=(-1, -2)) - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class SimilarityReport:
    """The metric triple for one reference/render pair."""

    ssim: float
    psnr: float
    mse: float

    @property
    def psnr_infinite(self) -> bool:
        return math.isinf(self.psnr)

    def to_json_dict(self) -> dict:
        return {
            "ssim": self.ssim,
            "psnr": None if self.psnr_infinite else self.psnr,
            "psnr_infinite": self.psnr_infinite,
            "mse": self.mse,
        }


def compare_images(a: RasterImage, b: RasterImage, *, warnings: list[str] | None = None) -> SimilarityReport:
    """Compute the full similarity report for two images.

    Mixed-channel pairs are compared in grayscale (with a warning).
    """
    if a.channels != b.channels:
        if warnings is not None:
            warnings.append("channel counts differ; comparing in grayscale")
        a = a.to_gray()
        b = b.to_gray()
    return SimilarityReport(ssim=ssim(a, b), psnr=psnr(a, b), mse=mse(a, b))
