"""Image- and sinogram-space quality measures.

PSNR uses peak = max(truth); the same convention everywhere so that method
orderings are comparable. S-PSNR forward-projects a reconstruction over the
reference sinogram's geometry and scores it in sinogram space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .projector import Sinogram, forward_project

__all__ = ["QualityReport", "psnr", "ssim", "s_psnr", "quality_report"]

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


@dataclass
class QualityReport:
    psnr_db: float
    ssim: float
    s_psnr_db: float | None = None


def _peak_mse_psnr(peak: float, mse: float) -> float:
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def psnr(recon: np.ndarray, truth: np.ndarray) -> float:
    """10*log10(peak^2 / MSE) with peak = max(truth); +inf if identical."""
    recon = np.asarray(recon, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if recon.shape != truth.shape:
        raise ValueError(f"shape mismatch {recon.shape} vs {truth.shape}")
    peak = float(truth.max())
    if peak <= 0.0 and not np.any(truth):
        raise ValueError("truth image is all zero; PSNR peak undefined")
    mse = float(np.mean((recon - truth) ** 2))
    return _peak_mse_psnr(peak, mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def _window_means(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # full-window ("valid") positions only, no edge padding
    from numpy.lib.stride_tricks import sliding_window_view

    win = sliding_window_view(img, kernel.shape)
    return np.tensordot(win, kernel, axes=([2, 3], [0, 1]))


def ssim(recon: np.ndarray, truth: np.ndarray, data_range: float | None = None) -> float:
    """Mean local SSIM over 11x11 Gaussian windows (sigma 1.5, K1/K2 0.01/0.03).

    The dynamic range L defaults to max(truth) - min(truth); pass an explicit
    ``data_range`` (e.g. computed from both images) for a symmetric score.
    """
    recon = np.asarray(recon, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if recon.shape != truth.shape:
        raise ValueError(f"shape mismatch {recon.shape} vs {truth.shape}")
    if min(recon.shape) < _SSIM_WINDOW:
        raise ValueError(f"images must be at least {_SSIM_WINDOW} pixels per side")
    if data_range is None:
        data_range = float(truth.max() - truth.min())
    if data_range <= 0.0:
        raise ValueError("degenerate dynamic range; truth is constant")

    kernel = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    mu_x = _window_means(recon, kernel)
    mu_y = _window_means(truth, kernel)
    xx = _window_means(recon * recon, kernel) - mu_x**2
    yy = _window_means(truth * truth, kernel) - mu_y**2
    xy = _window_means(recon * truth, kernel) - mu_x * mu_y
    c1 = (_SSIM_K1 * data_range) ** 2
    c2 = (_SSIM_K2 * data_range) ** 2
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def s_psnr(recon: np.ndarray, truth_full_sino: Sinogram) -> float:
    """PSNR in sinogram space: forward-project recon, compare to the full sinogram."""
    projected = forward_project(recon, truth_full_sino.geometry)
    peak = float(truth_full_sino.data.max())
    if peak <= 0.0 and not np.any(truth_full_sino.data):
        raise ValueError("truth sinogram is all zero; S-PSNR peak undefined")
    mse = float(np.mean((projected.data - truth_full_sino.data) ** 2))
    return _peak_mse_psnr(peak, mse)


def quality_report(
    recon: np.ndarray,
    truth: np.ndarray,
    truth_full_sino: Sinogram | None = None,
) -> QualityReport:
    return QualityReport(
        psnr_db=psnr(recon, truth),
        ssim=ssim(recon, truth),
        s_psnr_db=None if truth_full_sino is None else s_psnr(recon, truth_full_sino),
    )
