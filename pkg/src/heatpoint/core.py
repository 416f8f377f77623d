"""Coordinate spaces, heatmap containers, and Gaussian distance-map encoding.

A landmark lives on an image of side S pixels; its heatmap lives on a grid
that is ``downsample`` times smaller along each axis.  Pixel centers sit at
integer positions, ``x`` indexes columns and ``y`` indexes rows, and mapping
between the two spaces is a pure scaling (no half-pixel shift):

    heatmap = image / downsample

Encoding writes, for every heatmap pixel ``p``, the value of an isotropic
Gaussian centred on the (scaled) landmark ``c``:

    value(p) = amplitude * exp(-||p - c||^2 / (2 * sigma^2))

with unit ``amplitude`` by default, so a pixel value encodes its distance to
the true continuous landmark position.  The *unbiased* mode keeps ``c`` at
its exact sub-pixel location; the *biased* mode first rounds ``c`` to the
nearest grid node (ties away from zero), which is what discretizing ground
truth during training does, and is the source of quantization error studied
by the benchmark.  Gaussians whose support crosses the border are clipped,
never renormalized, so interior pixel values stay exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidConfigError, InvalidInputError


class Space(str, Enum):
    """Coordinate space a point is expressed in."""

    IMAGE = "image"
    HEATMAP = "heatmap"


class EncodingMode(str, Enum):
    """Whether the Gaussian center keeps its sub-pixel position."""

    UNBIASED = "unbiased"
    BIASED = "biased"


class OffGridWarning(UserWarning):
    """Emitted when an encoded center lies more than 3 sigma outside the grid."""


@dataclass(frozen=True)
class Coordinate:
    """A 2-D point tagged with the space it lives in (x = column, y = row)."""

    x: float
    y: float
    space: Space = Space.IMAGE

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidInputError(f"coordinate components must be finite, got ({self.x}, {self.y})")
        if not isinstance(self.space, Space):
            raise InvalidInputError(f"unknown coordinate space: {self.space!r}")


@dataclass(frozen=True)
class LandmarkSet:
    """An ordered collection of landmarks, all in the same space."""

    landmarks: tuple[Coordinate, ...]

    def __post_init__(self):
        landmarks = tuple(self.landmarks)
        object.__setattr__(self, "landmarks", landmarks)
        spaces = {c.space for c in landmarks}
        if len(spaces) > 1:
            raise InvalidInputError("all landmarks in a set must share one coordinate space")

    @property
    def count(self) -> int:
        return len(self.landmarks)

    @property
    def space(self) -> Space:
        return self.landmarks[0].space if self.landmarks else Space.IMAGE


@dataclass(frozen=True)
class EncodingConfig:
    """Parameters of the Gaussian distance-map encoder.

    downsample: image pixels per heatmap pixel (the resolution ratio), >= 1.
    sigma: Gaussian standard deviation in heatmap pixels, > 0.
    mode: unbiased keeps the exact center, biased rounds it to the grid.
    amplitude: peak value; decoding distance inversion assumes 1.0.
    """

    downsample: float = 4.0
    sigma: float = 1.5
    mode: EncodingMode = EncodingMode.UNBIASED
    amplitude: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.downsample) and self.downsample >= 1.0):
            raise InvalidConfigError(f"downsample must be a finite value >= 1, got {self.downsample}")
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise InvalidConfigError(f"sigma must be a finite value > 0, got {self.sigma}")
        if not isinstance(self.mode, EncodingMode):
            raise InvalidConfigError(f"unknown encoding mode: {self.mode!r}")
        if not (math.isfinite(self.amplitude) and self.amplitude > 0.0):
            raise InvalidConfigError(f"amplitude must be a finite value > 0, got {self.amplitude}")


class Heatmap:
    """A single landmark's response grid.

    Wraps a read-only float64 array of shape (height, width) with all entries
    finite.  ``landmark_index`` records which landmark of a set the map
    belongs to.  The array is adopted and frozen, not copied.
    """

    __slots__ = ("values", "landmark_index")

    def __init__(self, values, landmark_index: int = 0):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInputError(f"heatmap values must be a non-empty 2-D grid, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise InvalidInputError("heatmap values must all be finite")
        if not isinstance(landmark_index, int) or landmark_index < 0:
            raise InvalidInputError(f"landmark_index must be a non-negative integer, got {landmark_index!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "landmark_index", landmark_index)

    def __setattr__(self, name, value):
        raise AttributeError("Heatmap is immutable")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def __repr__(self) -> str:
        return f"Heatmap({self.height}x{self.width}, landmark_index={self.landmark_index})"


def to_heatmap_space(beta: Coordinate, downsample: float) -> Coordinate:
    """Scale an image-space point onto the heatmap grid (pure division)."""
    if beta.space is not Space.IMAGE:
        raise InvalidInputError("to_heatmap_space expects an image-space coordinate")
    if not (math.isfinite(downsample) and downsample >= 1.0):
        raise InvalidInputError(f"downsample must be a finite value >= 1, got {downsample}")
    return Coordinate(beta.x / downsample, beta.y / downsample, Space.HEATMAP)


def _round_half_away(v: float) -> float:
    return math.copysign(math.floor(abs(v) + 0.5), v)


def quantize(beta: Coordinate) -> Coordinate:
    """Round both components to the nearest grid node, ties away from zero.

    This is the rounding a discretized training target applies; the returned
    point differs from the input by at most 0.5 per axis.
    """
    return Coordinate(_round_half_away(beta.x), _round_half_away(beta.y), beta.space)


def encode(
    beta: Coordinate,
    config: EncodingConfig,
    width: int,
    height: int,
    landmark_index: int = 0,
) -> Heatmap:
    """Render the Gaussian distance map for one image-space landmark.

    The center is scaled into heatmap space and, in biased mode, quantized to
    the grid before evaluation.  Centers more than 3 sigma outside the grid
    still encode (the map is then near-flat) but emit an OffGridWarning.
    """
    if beta.space is not Space.IMAGE:
        raise InvalidInputError("encode expects an image-space coordinate")
    if not isinstance(width, int) or not isinstance(height, int) or width < 2 or height < 2:
        raise InvalidInputError(f"heatmap dimensions must be integers >= 2, got {width}x{height}")

    center = to_heatmap_space(beta, config.downsample)
    if config.mode is EncodingMode.BIASED:
        center = quantize(center)
    cx, cy = center.x, center.y

    reach = 3.0 * config.sigma
    if cx < -reach or cx > (width - 1) + reach or cy < -reach or cy > (height - 1) + reach:
        warnings.warn(
            f"encoded center ({cx:g}, {cy:g}) lies more than 3 sigma outside a {width}x{height} grid",
            OffGridWarning,
            stacklevel=2,
        )

    dx2 = (np.arange(width, dtype=np.float64) - cx) ** 2
    dy2 = (np.arange(height, dtype=np.float64) - cy) ** 2
    values = config.amplitude * np.exp(-(dy2[:, None] + dx2[None, :]) / (2.0 * config.sigma**2))
    return Heatmap(values, landmark_index=landmark_index)
