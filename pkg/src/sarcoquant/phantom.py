"""Synthetic elliptical-ring phantom with a closed-form area.

The phantom mimics a single annotated CT study: a muscle-density ring
(ellipse minus a concentric inner ellipse) on one transverse slice,
fat-like interior, air background. Because the true area is
pi * (a*b - (a-t)*(b-t)), the whole measurement chain can be validated
against an analytic value instead of trusting its own output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .baseline_seg import SegParams
from .volume import HU_RANGE, CtVolume, MaskVolume


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int] = (160, 128, 5)
    spacing: tuple[float, float, float] = (1.0, 1.0, 5.0)
    outer_a_mm: float = 60.0
    outer_b_mm: float = 40.0
    ring_mm: float = 10.0
    muscle_hu: float = 50.0
    interior_hu: float = -100.0
    background_hu: float = -1000.0
    annotated_slice: int = 2
    noise_sd: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be positive, got {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if not (self.outer_a_mm > self.ring_mm > 0 and self.outer_b_mm > self.ring_mm):
            raise ValueError("ring thickness must be positive and below both semi-axes")
        if not 0 <= self.annotated_slice < self.dims[2]:
            raise ValueError(
                f"annotated slice {self.annotated_slice} outside 0..{self.dims[2] - 1}"
            )
        if self.noise_sd < 0:
            raise ValueError("noise sd must be non-negative")
        window = SegParams().muscle_window
        if not window.lo <= self.muscle_hu <= window.hi:
            raise ValueError(
                f"muscle_hu {self.muscle_hu} outside the baseline muscle window "
                f"[{window.lo}, {window.hi}]"
            )
        for name, value in (("interior_hu", self.interior_hu), ("background_hu", self.background_hu)):
            if window.lo <= value <= window.hi:
                raise ValueError(f"{name} {value} must lie outside the muscle window")

    @property
    def analytic_area_cm2(self) -> float:
        a, b, t = self.outer_a_mm, self.outer_b_mm, self.ring_mm
        return math.pi * (a * b - (a - t) * (b - t)) / 100.0


def generate(spec: PhantomSpec = PhantomSpec()) -> tuple[CtVolume, MaskVolume, float]:
    """Rasterize the phantom; returns (image, mask, analytic area in cm^2).

    A pixel belongs to a region when its centre does, so the rasterized
    mask area converges to the analytic one as spacing shrinks. Noise is
    Gaussian, seeded, and applied to the image only; the mask stays exact.
    """
    nx, ny, nz = spec.dims
    sx, sy, sz = spec.spacing
    # voxel-centre coordinates relative to the grid centre, in mm
    x = (np.arange(nx) - (nx - 1) / 2.0) * sx
    y = (np.arange(ny) - (ny - 1) / 2.0) * sy
    xx, yy = np.meshgrid(x, y, indexing="ij")

    def inside(a: float, b: float) -> np.ndarray:
        return (xx / a) ** 2 + (yy / b) ** 2 <= 1.0

    outer = inside(spec.outer_a_mm, spec.outer_b_mm)
    inner = inside(spec.outer_a_mm - spec.ring_mm, spec.outer_b_mm - spec.ring_mm)
    ring = outer & ~inner

    ct = np.full(spec.dims, spec.background_hu, dtype=np.float32)
    ct[:, :, spec.annotated_slice][inner] = spec.interior_hu
    ct[:, :, spec.annotated_slice][ring] = spec.muscle_hu

    labels = np.zeros(spec.dims, dtype=np.uint8)
    labels[:, :, spec.annotated_slice][ring] = 1

    if spec.noise_sd > 0:
        rng = np.random.default_rng(spec.seed)
        noisy = ct.astype(np.float64) + rng.normal(0.0, spec.noise_sd, spec.dims)
        # scanners store a bounded HU range; clip the tails like they do
        ct = np.clip(noisy, HU_RANGE[0], HU_RANGE[1]).astype(np.float32)

    affine = np.diag([sx, sy, sz, 1.0])
    affine[:3, 3] = [-(n - 1) / 2.0 * s for n, s in zip(spec.dims, spec.spacing)]

    image = CtVolume(ct, affine, source_id="phantom")
    mask = MaskVolume(labels, affine.copy(), source_id="phantom")
    return image, mask, spec.analytic_area_cm2
