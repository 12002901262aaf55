"""Gaussian kernels and smoothed random displacement fields.

Grid conventions used throughout the package: every pixel grid is a numpy
array indexed ``[y, x]`` in row-major order, with ``width = arr.shape[1]``
and ``height = arr.shape[0]``. A displacement field stores per-pixel
offsets in pixels: ``dx`` shifts along x (columns), ``dy`` along y (rows).

A field is built in two steps: raw per-pixel noise drawn uniformly from
``[-alpha, alpha]`` (realized as ``alpha * (2u - 1)`` with ``u`` uniform on
``[0, 1)``), then smoothed with a normalized discrete Gaussian kernel using
zero padding at the borders. Because the kernel is normalized and positive,
every smoothed component stays inside ``[-alpha, alpha]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .errors import InvalidParameterError

__all__ = [
    "DeformationParams",
    "GaussianKernel",
    "DisplacementField",
    "round_half_away",
    "kernel_radius",
    "build_gaussian_kernel",
    "convolve_separable",
    "generate_displacement_field",
]


def round_half_away(v):
    """Round to the nearest integer with ties going away from zero.

    Works on scalars and arrays; returns floats with integral values.
    """
    return np.trunc(v + np.copysign(0.5, v))


@dataclass(frozen=True)
class DeformationParams:
    """One (alpha, sigma) pair: displacement magnitude and smoothness, in pixels."""

    alpha: float
    sigma: float

    def __post_init__(self):
        if not self.alpha >= 0:
            raise InvalidParameterError(f"alpha must be >= 0, got {self.alpha}")
        if not self.sigma > 0:
            raise InvalidParameterError(f"sigma must be > 0, got {self.sigma}")


def kernel_radius(sigma: float) -> int:
    """Half-size of the Gaussian kernel for a given sigma.

    The full kernel size is ``2 * radius + 1``; the radius is ``3 * sigma``
    rounded to the nearest integer (ties away from zero), never below 1.
    """
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be > 0, got {sigma}")
    return max(1, int(round_half_away(3.0 * sigma)))


@dataclass(frozen=True)
class GaussianKernel:
    """Normalized discrete Gaussian kernel on the integer lattice [-r, r]^2.

    ``weights`` sums to 1, is strictly positive, peaks at the center, and is
    symmetric under reflection and transposition. ``axis_weights`` is the
    normalized 1-D factor whose outer product equals ``weights``; smoothing
    uses it for two-pass separable convolution.
    """

    sigma: float
    radius: int
    weights: np.ndarray
    axis_weights: np.ndarray

    @property
    def size(self) -> int:
        return 2 * self.radius + 1


def build_gaussian_kernel(sigma: float) -> GaussianKernel:
    """Evaluate the Gaussian density on [-r, r]^2 and renormalize to sum 1.

    The constant prefactor of the continuous density cancels under
    renormalization and is not computed.
    """
    radius = kernel_radius(sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    axis = np.exp(-(offsets**2) / (2.0 * float(sigma) ** 2))
    axis /= axis.sum()
    return GaussianKernel(
        sigma=float(sigma),
        radius=radius,
        weights=np.outer(axis, axis),
        axis_weights=axis,
    )


def convolve_separable(grid: np.ndarray, kernel: GaussianKernel) -> np.ndarray:
    """Zero-padded 2-D Gaussian smoothing as two 1-D passes.

    Equivalent to direct 2-D convolution with ``kernel.weights`` under zero
    padding; the kernel is symmetric, so convolution and correlation agree.
    """
    tmp = convolve1d(grid, kernel.axis_weights, axis=0, mode="constant", cval=0.0)
    return convolve1d(tmp, kernel.axis_weights, axis=1, mode="constant", cval=0.0)


@dataclass(frozen=True)
class DisplacementField:
    """Per-pixel offset grids ``dx``/``dy`` of shape (height, width).

    For generated fields every component lies in ``[-alpha, alpha]``.
    """

    dx: np.ndarray
    dy: np.ndarray
    params: DeformationParams

    def __post_init__(self):
        if self.dx.ndim != 2 or self.dx.shape != self.dy.shape:
            raise InvalidParameterError(
                f"dx/dy must be 2-D grids of equal shape, got {self.dx.shape} and {self.dy.shape}"
            )

    @property
    def width(self) -> int:
        return self.dx.shape[1]

    @property
    def height(self) -> int:
        return self.dx.shape[0]


def generate_displacement_field(
    w: int, h: int, params: DeformationParams, rng: np.random.Generator
) -> DisplacementField:
    """Draw uniform noise in [-alpha, alpha] per pixel and smooth it.

    Consumes exactly ``2 * w * h`` uniform draws from ``rng``: the full dx
    noise grid in row-major order, then the full dy grid. Keeping the draw
    order fixed makes seeds portable across implementations of the smoothing.
    """
    if w < 1 or h < 1:
        raise InvalidParameterError(f"field dimensions must be >= 1, got {w}x{h}")
    kernel = build_gaussian_kernel(params.sigma)
    noise_x = params.alpha * (2.0 * rng.random((h, w)) - 1.0)
    noise_y = params.alpha * (2.0 * rng.random((h, w)) - 1.0)
    return DisplacementField(
        dx=convolve_separable(noise_x, kernel),
        dy=convolve_separable(noise_y, kernel),
        params=params,
    )
