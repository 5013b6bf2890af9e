"""Limited-angle CT toolkit: projection, analytic and iterative
reconstruction, neural sinogram completion, and reconstruction confidence."""

from .geometry import (
    ParallelGeometry,
    PhantomSpec,
    desk_geometry,
    gen_dataset,
    gen_phantom,
    make_geometry,
)
from .projector import Sinogram, ViewRange, back_project, forward_project, restrict_views
from .fbp import fbp_reconstruct, ramp_filter
from .wls import WlsConfig, WlsResult, wls_reconstruct, wls_weights

__all__ = [
    "ParallelGeometry",
    "PhantomSpec",
    "Sinogram",
    "ViewRange",
    "WlsConfig",
    "WlsResult",
    "back_project",
    "desk_geometry",
    "fbp_reconstruct",
    "forward_project",
    "gen_dataset",
    "gen_phantom",
    "make_geometry",
    "ramp_filter",
    "restrict_views",
    "wls_reconstruct",
    "wls_weights",
]

__version__ = "0.1.0"
