"""Shared extracellular-transport types: medium parameters and sampled fields."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GridError

DEGRADATION_CONVENTIONS = ("alpha_scaled", "paper_literal")


@dataclass
class ChannelParams:
    """Physical parameters of the extracellular transport medium.

    The medium slows free diffusion by per-axis tortuosity (effective
    diffusivity D / tortuosity^2), carries bulk flow ``velocity_um_s``, and
    removes vesicles by first-order extracellular binding and, optionally, a
    finite half-life. Injection is a separable Gaussian source centered at
    ``source_center_um`` with per-axis widths ``source_sigma_um``.

    ``degradation_convention`` selects how the binding sink enters the
    equations: ``"alpha_scaled"`` divides the rate by the accessible volume
    fraction (the form the transport PDE is written in, default so the
    analytic and grid solvers solve the same equation); ``"paper_literal"``
    applies the bare rate, matching the bare exponential decay of the
    closed-form solution. Cross-solver comparisons must match conventions.
    """

    diffusion_um2_s: float = 1.0
    tortuosity: tuple[float, float, float] = (1.1, 1.4, 1.7)
    velocity_um_s: tuple[float, float, float] = (0.0, 0.0, 0.0)
    volume_fraction: float = 0.6
    binding_rate_per_s: float = 0.2
    half_life_s: Optional[float] = None
    source_center_um: tuple[float, float, float] = (0.0, 0.0, 20.0)
    source_sigma_um: tuple[float, float, float] = (7.0, 7.0, 7.0)
    degradation_convention: str = "alpha_scaled"

    def __post_init__(self) -> None:
        self.tortuosity = tuple(float(v) for v in self.tortuosity)
        self.velocity_um_s = tuple(float(v) for v in self.velocity_um_s)
        self.source_center_um = tuple(float(v) for v in self.source_center_um)
        self.source_sigma_um = tuple(float(v) for v in self.source_sigma_um)
        if not self.diffusion_um2_s > 0:
            raise ValueError("ChannelParams.diffusion_um2_s must be > 0")
        if len(self.tortuosity) != 3 or any(t < 1.0 for t in self.tortuosity):
            raise ValueError("ChannelParams.tortuosity needs three components >= 1")
        if len(self.velocity_um_s) != 3:
            raise ValueError("ChannelParams.velocity_um_s needs three components")
        if not 0.0 < self.volume_fraction <= 1.0:
            raise ValueError("ChannelParams.volume_fraction must be in (0, 1]")
        if self.binding_rate_per_s < 0:
            raise ValueError("ChannelParams.binding_rate_per_s must be >= 0")
        if self.half_life_s is not None and not self.half_life_s > 0:
            raise ValueError("ChannelParams.half_life_s must be > 0 or None")
        if len(self.source_center_um) != 3:
            raise ValueError("ChannelParams.source_center_um needs three components")
        if len(self.source_sigma_um) != 3 or any(s <= 0 for s in self.source_sigma_um):
            raise ValueError("ChannelParams.source_sigma_um needs three positive components")
        if self.degradation_convention not in DEGRADATION_CONVENTIONS:
            raise ValueError(
                f"ChannelParams.degradation_convention must be one of {DEGRADATION_CONVENTIONS}"
            )

    def axis_diffusivities(self) -> np.ndarray:
        """Effective per-axis diffusivities D / tortuosity^2 (um^2/s)."""
        lam = np.asarray(self.tortuosity)
        return self.diffusion_um2_s / lam**2

    def binding_decay_per_s(self) -> float:
        """First-order binding sink coefficient under the selected convention."""
        if self.degradation_convention == "alpha_scaled":
            return self.binding_rate_per_s / self.volume_fraction
        return self.binding_rate_per_s

    def half_life_decay_scale_s(self) -> Optional[float]:
        """Exponential time scale of the half-life clock, half_life / ln 2."""
        if self.half_life_s is None:
            return None
        return self.half_life_s / np.log(2.0)


def trilinear_weights(coords: np.ndarray, value: float) -> tuple[int, float]:
    """Index of the left bracketing node and the weight of the right node."""
    if value < coords[0] or value > coords[-1]:
        raise GridError(f"point coordinate {value} outside grid [{coords[0]}, {coords[-1]}]")
    idx = int(np.searchsorted(coords, value, side="right")) - 1
    idx = min(max(idx, 0), coords.size - 2)
    frac = (value - coords[idx]) / (coords[idx + 1] - coords[idx])
    return idx, float(frac)


@dataclass
class ConcentrationField:
    """Scalar concentration samples C(t, x, y, z) on a structured grid (uM)."""

    x_um: np.ndarray
    y_um: np.ndarray
    z_um: np.ndarray
    times_s: np.ndarray
    values_um: np.ndarray  # shape (nt, nx, ny, nz)
    provenance: str = "analytic"  # "analytic" | "grid"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.x_um = np.asarray(self.x_um, dtype=float)
        self.y_um = np.asarray(self.y_um, dtype=float)
        self.z_um = np.asarray(self.z_um, dtype=float)
        self.times_s = np.asarray(self.times_s, dtype=float)
        self.values_um = np.asarray(self.values_um, dtype=float)
        expected = (self.times_s.size, self.x_um.size, self.y_um.size, self.z_um.size)
        if self.values_um.shape != expected:
            raise ValueError(f"ConcentrationField values shape {self.values_um.shape} != {expected}")
        if not np.all(np.isfinite(self.values_um)):
            raise ValueError("ConcentrationField values must be finite")

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.x_um, self.y_um, self.z_um

    def grids_match(self, other: "ConcentrationField") -> bool:
        return (
            self.values_um.shape == other.values_um.shape
            and all(np.allclose(a, b) for a, b in zip(self.axes, other.axes))
            and np.allclose(self.times_s, other.times_s)
        )

    def probe_series(self, points) -> np.ndarray:
        """Trilinear interpolation at each (x, y, z) point; shape (npoints, ntimes)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty((points.shape[0], self.times_s.size))
        for p, (px, py, pz) in enumerate(points):
            ix, fx = trilinear_weights(self.x_um, px)
            iy, fy = trilinear_weights(self.y_um, py)
            iz, fz = trilinear_weights(self.z_um, pz)
            block = self.values_um[:, ix : ix + 2, iy : iy + 2, iz : iz + 2]
            wx = np.array([1.0 - fx, fx])
            wy = np.array([1.0 - fy, fy])
            wz = np.array([1.0 - fz, fz])
            weights = wx[:, None, None] * wy[None, :, None] * wz[None, None, :]
            out[p] = np.tensordot(block, weights, axes=([1, 2, 3], [0, 1, 2]))
        return out
