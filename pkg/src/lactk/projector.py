"""Discrete x-ray transform and its exact algebraic adjoint.

Discretization is Joseph-style interpolated ray marching: for each
(view, bin) the ray ``x*cos(t) + y*sin(t) = r`` is sampled at unit steps
along the dominant grid axis, linearly interpolating across the other
axis, and the accumulated samples are scaled by the per-step path length
``1 / max(|cos t|, |sin t|)``. The back projector scatters with the same
indices and weights, so ``back_project`` is the exact transpose of
``forward_project`` by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .geometry import ParallelGeometry

__all__ = ["Sinogram", "ViewRange", "forward_project", "back_project", "restrict_views"]


@dataclass
class Sinogram:
    """View-by-bin matrix of line integrals with its acquisition geometry."""

    data: np.ndarray
    geometry: ParallelGeometry

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        expected = (self.geometry.n_views, self.geometry.n_bins)
        if self.data.shape != expected:
            raise ValueError(
                f"sinogram shape {self.data.shape} does not match geometry {expected}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("sinogram contains non-finite values")

    @property
    def n_views(self) -> int:
        return self.geometry.n_views

    @property
    def n_bins(self) -> int:
        return self.geometry.n_bins


@dataclass(frozen=True)
class ViewRange:
    """Inclusive range of view indices."""

    first_view: int
    last_view: int

    def __post_init__(self):
        if not 0 <= self.first_view <= self.last_view:
            raise ValueError(f"bad view range [{self.first_view}, {self.last_view}]")


@lru_cache(maxsize=16)
def _view_tables(geometry: ParallelGeometry, nx: int, ny: int):
    """Per-view sampling tables shared by the forward and back projectors.

    For each view: (drive_x, i0, w0, w1, step) where ``i0`` indexes the lower
    interpolation neighbor on the non-driving axis for every (driving index,
    bin) pair, ``w0``/``w1`` are the interpolation weights with out-of-grid
    contributions zeroed, and ``step`` is the path length per driving step.
    """
    cx = (nx - 1) / 2.0
    cy = (ny - 1) / 2.0
    r = geometry.bin_offsets
    tables = []
    for theta in geometry.angles_rad:
        c, s = np.cos(theta), np.sin(theta)
        drive_x = abs(s) >= abs(c)
        if drive_x:
            # ray direction is (-sin, cos); |sin| >= |cos| means x advances
            # fastest, solve y for each pixel column
            xs = np.arange(nx) - cx
            pos = (r[None, :] - xs[:, None] * c) / s + cy
            n_other = ny
            step = 1.0 / abs(s)
        else:
            ys = np.arange(ny) - cy
            pos = (r[None, :] - ys[:, None] * s) / c + cx
            n_other = nx
            step = 1.0 / abs(c)
        i0 = np.floor(pos).astype(np.int64)
        frac = pos - i0
        w0 = (1.0 - frac) * ((i0 >= 0) & (i0 <= n_other - 1))
        w1 = frac * ((i0 + 1 >= 0) & (i0 + 1 <= n_other - 1))
        i0c = np.clip(i0, 0, n_other - 1)
        i1c = np.clip(i0 + 1, 0, n_other - 1)
        tables.append((drive_x, i0c, i1c, w0, w1, step))
    return tables


def _check_support(geometry: ParallelGeometry, nx: int, ny: int):
    if not geometry.supports(nx, ny):
        from .geometry import required_bins

        raise ValueError(
            f"geometry has {geometry.n_bins} bins but a {nx}x{ny} image needs "
            f">= {required_bins(nx, ny, geometry.bin_spacing)}"
        )


def _project(image: np.ndarray, geometry: ParallelGeometry) -> np.ndarray:
    nx, ny = image.shape
    out = np.empty((geometry.n_views, geometry.n_bins), dtype=np.float64)
    tables = _view_tables(geometry, nx, ny)
    kx = np.arange(nx)[:, None]
    ky = np.arange(ny)[:, None]
    for i, (drive_x, i0, i1, w0, w1, step) in enumerate(tables):
        if drive_x:
            vals = image[kx, i0] * w0 + image[kx, i1] * w1
        else:
            vals = image[i0, ky] * w0 + image[i1, ky] * w1
        out[i] = step * vals.sum(axis=0)
    return out


def _backproject(sino: np.ndarray, geometry: ParallelGeometry, nx: int, ny: int) -> np.ndarray:
    out = np.zeros(nx * ny, dtype=np.float64)
    tables = _view_tables(geometry, nx, ny)
    kx = np.arange(nx)[:, None]
    ky = np.arange(ny)[:, None]
    # fixed accumulation order over views keeps results thread-count independent
    for i, (drive_x, i0, i1, w0, w1, step) in enumerate(tables):
        contrib = step * sino[i][None, :]
        if drive_x:
            flat0 = (kx * ny + i0).ravel()
            flat1 = (kx * ny + i1).ravel()
        else:
            flat0 = (i0 * ny + ky).ravel()
            flat1 = (i1 * ny + ky).ravel()
        out += np.bincount(flat0, weights=(w0 * contrib).ravel(), minlength=nx * ny)
        out += np.bincount(flat1, weights=(w1 * contrib).ravel(), minlength=nx * ny)
    return out.reshape(nx, ny)


def forward_project(image: np.ndarray, geometry: ParallelGeometry) -> Sinogram:
    """Line integrals of ``image`` over every (view, bin) of ``geometry``.

    Linear in the image; entry (i, j) approximates the integral along
    ``x*cos(theta_i) + y*sin(theta_i) = r_j``.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"image must be 2D, got shape {image.shape}")
    _check_support(geometry, *image.shape)
    return Sinogram(_project(image, geometry), geometry)


def back_project(sinogram: Sinogram, nx: int, ny: int) -> np.ndarray:
    """Exact algebraic transpose of :func:`forward_project`.

    For all images X and sinograms s: <forward_project(X), s> == <X,
    back_project(s)> up to floating round-off.
    """
    _check_support(sinogram.geometry, nx, ny)
    return _backproject(sinogram.data, sinogram.geometry, nx, ny)


def restrict_views(sinogram: Sinogram, view_range: ViewRange) -> Sinogram:
    """Keep rows [first_view .. last_view] with a correspondingly truncated geometry."""
    geom = sinogram.geometry
    if view_range.last_view >= geom.n_views:
        raise ValueError(
            f"view range [{view_range.first_view}, {view_range.last_view}] exceeds "
            f"{geom.n_views} views"
        )
    sub = replace(
        geom,
        n_views=view_range.last_view - view_range.first_view + 1,
        angle_start_deg=geom.angle_start_deg
        + view_range.first_view * geom.angle_step_deg,
    )
    rows = sinogram.data[view_range.first_view : view_range.last_view + 1].copy()
    return Sinogram(rows, sub)
