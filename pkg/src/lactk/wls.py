"""Weighted least squares reconstruction, solved matrix-free.

Minimizes (S - A*Y)^T W (S - A*Y) with diagonal weights W_ii = exp(-S_i) by
conjugate gradient on the normal equations A^T W A Y = A^T W S, starting
from zero, with no regularization or non-negativity projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .projector import Sinogram, _backproject, _check_support, _project

__all__ = ["WlsConfig", "WlsResult", "wls_weights", "wls_reconstruct"]


@dataclass(frozen=True)
class WlsConfig:
    max_iters: int = 50
    rel_tol: float = 1e-6
    record_history: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError(f"rel_tol must be in (0, 1), got {self.rel_tol}")


@dataclass
class WlsResult:
    image: np.ndarray
    iterations_used: int
    residual_history: list[float] = field(default_factory=list)


def wls_weights(sinogram: Sinogram) -> np.ndarray:
    """Diagonal weights exp(-S_i), one per sinogram element, all in (0, 1]."""
    return np.exp(-sinogram.data)


def wls_reconstruct(
    sinogram: Sinogram,
    nx: int,
    ny: int,
    config: WlsConfig | None = None,
    weights: np.ndarray | None = None,
) -> WlsResult:
    """Conjugate gradient on the weighted normal equations from zero init.

    Stops when the normal-equation residual drops below rel_tol relative to
    its initial value, or after max_iters. ``weights`` overrides the default
    exp(-S) diagonal (used e.g. to keep W fixed while scaling S).
    """
    if config is None:
        config = WlsConfig()
    geom = sinogram.geometry
    _check_support(geom, nx, ny)
    w = wls_weights(sinogram) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != sinogram.data.shape:
        raise ValueError(f"weights shape {w.shape} != sinogram shape {sinogram.data.shape}")

    def normal_op(img):
        return _backproject(w * _project(img, geom), geom, nx, ny)

    b = _backproject(w * sinogram.data, geom, nx, ny)
    b_norm = float(np.linalg.norm(b))
    x = np.zeros((nx, ny), dtype=np.float64)
    history = [b_norm] if config.record_history else []
    if b_norm == 0.0:
        return WlsResult(x, 0, history)

    r = b.copy()
    p = r.copy()
    rs = float(np.dot(r.ravel(), r.ravel()))
    iterations = 0
    for k in range(config.max_iters):
        q = normal_op(p)
        pq = float(np.dot(p.ravel(), q.ravel()))
        if not np.isfinite(pq) or pq <= 0.0:
            raise FloatingPointError(
                f"CG breakdown at iteration {k}: curvature {pq!r} is not positive"
            )
        alpha = rs / pq
        x += alpha * p
        r -= alpha * q
        rs_new = float(np.dot(r.ravel(), r.ravel()))
        if not np.isfinite(rs_new):
            raise FloatingPointError(f"non-finite residual at iteration {k}")
        iterations = k + 1
        if config.record_history:
            history.append(float(np.sqrt(rs_new)))
        if np.sqrt(rs_new) <= config.rel_tol * b_norm:
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    return WlsResult(x, iterations, history)
