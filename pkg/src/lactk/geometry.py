"""Parallel-beam acquisition geometry and synthetic phantom generation.

Conventions used throughout the toolkit:

* images are 2D float arrays of linear attenuation coefficients (LAC),
  indexed ``image[ix, iy]``, pixel side = 1 length unit, origin at the
  grid center (the rotation axis),
* view ``i`` is at angle ``angle_start_deg + i * angle_step_deg``,
* detector bin ``j`` is at signed offset ``(j - detector_center) *
  bin_spacing`` from the rotation axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ParallelGeometry",
    "PhantomShape",
    "PhantomSpec",
    "make_geometry",
    "required_bins",
    "sample_shapes",
    "gen_phantom",
    "gen_dataset",
]


@dataclass(frozen=True)
class ParallelGeometry:
    """Angular sampling and detector layout of a parallel-beam scan."""

    n_views: int
    angle_start_deg: float
    angle_step_deg: float
    n_bins: int
    bin_spacing: float = 1.0
    detector_center: float = field(default=math.nan)

    def __post_init__(self):
        if self.n_views < 1:
            raise ValueError(f"n_views must be >= 1, got {self.n_views}")
        if self.n_bins < 1:
            raise ValueError(f"n_bins must be >= 1, got {self.n_bins}")
        if self.angle_step_deg <= 0:
            raise ValueError(f"angle_step_deg must be > 0, got {self.angle_step_deg}")
        if self.bin_spacing <= 0:
            raise ValueError(f"bin_spacing must be > 0, got {self.bin_spacing}")
        last = self.angle_start_deg + (self.n_views - 1) * self.angle_step_deg
        if last >= 180.0:
            raise ValueError(
                f"last view at {last:g} deg >= 180 deg; views would repeat modulo 180"
            )
        if math.isnan(self.detector_center):
            object.__setattr__(self, "detector_center", (self.n_bins - 1) / 2.0)

    @property
    def angles_deg(self) -> np.ndarray:
        return self.angle_start_deg + self.angle_step_deg * np.arange(self.n_views)

    @property
    def angles_rad(self) -> np.ndarray:
        return np.deg2rad(self.angles_deg)

    @property
    def bin_offsets(self) -> np.ndarray:
        """Signed detector coordinates r_j, in pixel-side units."""
        return (np.arange(self.n_bins) - self.detector_center) * self.bin_spacing

    def supports(self, nx: int, ny: int) -> bool:
        """Whether the detector covers the circumscribed circle of nx-by-ny images."""
        return self.n_bins >= required_bins(nx, ny, self.bin_spacing)

    def prefix(self, n_views: int) -> "ParallelGeometry":
        """Geometry restricted to the first ``n_views`` views."""
        if not 1 <= n_views <= self.n_views:
            raise ValueError(f"prefix length {n_views} out of range [1, {self.n_views}]")
        return replace(self, n_views=n_views)

    def is_prefix_of(self, other: "ParallelGeometry") -> bool:
        return (
            self.n_views <= other.n_views
            and self.angle_start_deg == other.angle_start_deg
            and self.angle_step_deg == other.angle_step_deg
            and self.n_bins == other.n_bins
            and self.bin_spacing == other.bin_spacing
            and self.detector_center == other.detector_center
        )


def required_bins(nx: int, ny: int, bin_spacing: float = 1.0) -> int:
    """Minimum detector bin count for full support of an nx-by-ny image."""
    return math.ceil(math.sqrt(2.0) * max(nx, ny) / bin_spacing)


def make_geometry(
    n_views: int,
    angle_start_deg: float,
    angle_step_deg: float,
    n_bins: int,
    bin_spacing: float = 1.0,
    detector_center: float | None = None,
) -> ParallelGeometry:
    """Validated constructor; view i sits at angle_start_deg + i * angle_step_deg."""
    return ParallelGeometry(
        n_views=int(n_views),
        angle_start_deg=float(angle_start_deg),
        angle_step_deg=float(angle_step_deg),
        n_bins=int(n_bins),
        bin_spacing=float(bin_spacing),
        detector_center=math.nan if detector_center is None else float(detector_center),
    )


def desk_geometry() -> ParallelGeometry:
    """Default desk-scale geometry: 180 views at 1 deg over [0, 180), 93 bins.

    Sized for 64x64 images (93 >= ceil(64 * sqrt(2)) = 91); the full set is
    exactly double the 90-view limited set.
    """
    return make_geometry(180, 0.0, 1.0, 93, 1.0)


@dataclass(frozen=True)
class PhantomShape:
    """One rasterizable primitive; ``a``/``b`` are semi-axes (ellipse) or
    half-extents (rectangle) before rotation by ``angle_rad``."""

    kind: str  # "ellipse" | "rectangle"
    cx: float
    cy: float
    a: float
    b: float
    angle_rad: float
    amplitude: float


@dataclass(frozen=True)
class PhantomSpec:
    """Sampling ranges for random multi-shape phantoms.

    All shapes are constrained to the inscribed circle of the target image so
    every ray leaving the detector range carries zero signal. Amplitudes are
    per-shape LAC values; overlapping shapes add.
    """

    seed: int
    n_shapes: tuple[int, int] = (3, 6)
    kinds: tuple[str, ...] = ("ellipse", "rectangle")
    lac_range: tuple[float, float] = (0.015, 0.045)
    size_range: tuple[float, float] = (0.08, 0.26)  # fraction of min(nx, ny)

    def __post_init__(self):
        lo, hi = self.n_shapes
        if lo < 0 or hi < lo:
            raise ValueError(f"bad shape count range {self.n_shapes}")
        if not all(k in ("ellipse", "rectangle") for k in self.kinds):
            raise ValueError(f"unknown shape kind in {self.kinds}")
        if self.lac_range[0] <= 0 or self.lac_range[1] < self.lac_range[0]:
            raise ValueError(f"bad LAC range {self.lac_range}")


def sample_shapes(spec: PhantomSpec, nx: int, ny: int) -> list[PhantomShape]:
    """Draw the shape list for one phantom, deterministically from spec.seed."""
    if nx < 8 or ny < 8:
        raise ValueError(f"image side must be >= 8, got {nx}x{ny}")
    rng = np.random.default_rng(spec.seed)
    n = int(rng.integers(spec.n_shapes[0], spec.n_shapes[1] + 1))
    side = min(nx, ny)
    r_in = side / 2.0 - 1.0
    shapes = []
    for _ in range(n):
        kind = spec.kinds[int(rng.integers(len(spec.kinds)))]
        a = float(rng.uniform(*spec.size_range)) * side
        b = float(rng.uniform(*spec.size_range)) * side
        # circumradius bounds the rotated footprint; keeps the shape inside
        # the inscribed circle for any rotation
        reach = math.hypot(a, b) if kind == "rectangle" else max(a, b)
        reach = min(reach, r_in)
        c_max = r_in - reach
        rho = math.sqrt(float(rng.uniform(0.0, 1.0))) * max(c_max, 0.0)
        phi = float(rng.uniform(0.0, 2.0 * math.pi))
        shapes.append(
            PhantomShape(
                kind=kind,
                cx=rho * math.cos(phi),
                cy=rho * math.sin(phi),
                a=a,
                b=b,
                angle_rad=float(rng.uniform(0.0, math.pi)),
                amplitude=float(rng.uniform(*spec.lac_range)),
            )
        )
    return shapes


def rasterize_shapes(shapes: list[PhantomShape], nx: int, ny: int) -> np.ndarray:
    """Pixel-center inside-test rasterization; overlapping shapes sum."""
    xs = np.arange(nx) - (nx - 1) / 2.0
    ys = np.arange(ny) - (ny - 1) / 2.0
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    img = np.zeros((nx, ny), dtype=np.float64)
    for sh in shapes:
        c, s = math.cos(sh.angle_rad), math.sin(sh.angle_rad)
        u = (gx - sh.cx) * c + (gy - sh.cy) * s
        v = -(gx - sh.cx) * s + (gy - sh.cy) * c
        if sh.kind == "ellipse":
            inside = (u / sh.a) ** 2 + (v / sh.b) ** 2 <= 1.0
        else:
            inside = (np.abs(u) <= sh.a) & (np.abs(v) <= sh.b)
        img[inside] += sh.amplitude
    return img


def gen_phantom(spec: PhantomSpec, nx: int, ny: int) -> np.ndarray:
    """Generate one random phantom image, deterministic for a fixed seed."""
    return rasterize_shapes(sample_shapes(spec, nx, ny), nx, ny)


def _derive_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def gen_dataset(n_samples, seed, geometry, nx, ny, spec: PhantomSpec | None = None):
    """Generate (image, full-view sinogram) pairs.

    Per-sample seeds derive from (seed, index), so the dataset is reproducible
    and individual samples are independent of n_samples. Each sinogram is
    exactly forward_project(image, geometry).
    """
    from .projector import forward_project

    if spec is None:
        spec = PhantomSpec(seed=0)
    pairs = []
    for i in range(n_samples):
        sample_spec = replace(spec, seed=_derive_seed(seed, i))
        image = gen_phantom(sample_spec, nx, ny)
        pairs.append((image, forward_project(image, geometry)))
    return pairs
