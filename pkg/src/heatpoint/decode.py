"""Sub-pixel decoders for Gaussian distance maps.

Four schemes recover a landmark from one heatmap, from coarsest to exact:

* one-hot: the argmax pixel, integer resolution.
* two-hot: argmax shifted a quarter pixel toward the second-highest pixel.
* distribution-aware: a Newton step on the log response around the argmax,
  exact for clean interior Gaussians but confined to a 3x3 neighborhood.
* multilateration: invert pixel values into true-range distances and solve
  the resulting circle intersection by linear least squares, exact at any
  resolution because pixel values carry the continuous center, not the grid.

All decoders consume a ``Heatmap`` and produce a ``DecodeResult`` whose
``beta_hat`` is in heatmap space; ``to_image_space`` scales it back.  Argmax
ties resolve to the smallest row, then the smallest column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import gaussian_filter

from .core import Coordinate, Heatmap, Space
from .errors import (
    BoundaryPeakError,
    CollinearAnchorError,
    FlatHeatmapError,
    InvalidConfigError,
    InvalidInputError,
    SingularSystemError,
)

# Determinant threshold for the 2x2 normal equations, relative to the
# Frobenius norm of X^T X; below it the anchor geometry cannot fix a point.
_SINGULAR_RTOL = 1e-12


class Decoder(str, Enum):
    """Decoding scheme selector.  Enum order is the reporting order."""

    ONE_HOT = "one-hot"
    TWO_HOT = "two-hot"
    DISTRIBUTION_AWARE = "distribution-aware"
    MULTILATERATION = "multilateration"


@dataclass(frozen=True)
class DecodeConfig:
    """Shared decoder parameters.

    kernel_size: side k of the anchor sampling window, >= 2.
    anchor_count: anchors drawn from the window, 3 <= n <= k*k.
    sigma: Gaussian width assumed by distance inversion and the smoothing blur.
    smoothing: blur the map (peak rescaled back) before the Newton refinement.
    value_floor: clamp applied to pixel values before taking logarithms.
    two_hot_toward_second: shift the quarter-pixel offset toward the second
        maximum (the standard form); False flips the sign.
    """

    decoder: Decoder = Decoder.MULTILATERATION
    kernel_size: int = 2
    anchor_count: int = 4
    sigma: float = 1.5
    smoothing: bool = False
    value_floor: float = 1e-9
    two_hot_toward_second: bool = True

    def __post_init__(self):
        if not isinstance(self.decoder, Decoder):
            raise InvalidConfigError(f"unknown decoder: {self.decoder!r}")
        if not isinstance(self.kernel_size, int) or self.kernel_size < 2:
            raise InvalidConfigError(f"kernel_size must be an integer >= 2, got {self.kernel_size!r}")
        if not isinstance(self.anchor_count, int) or self.anchor_count < 3:
            raise InvalidConfigError(f"anchor_count must be an integer >= 3, got {self.anchor_count!r}")
        if self.anchor_count > self.kernel_size**2:
            raise InvalidConfigError(
                f"anchor_count {self.anchor_count} exceeds the {self.kernel_size}x{self.kernel_size} window"
            )
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise InvalidConfigError(f"sigma must be a finite value > 0, got {self.sigma}")
        if not (0.0 < self.value_floor < 1.0):
            raise InvalidConfigError(f"value_floor must lie in (0, 1), got {self.value_floor}")


@dataclass(frozen=True)
class AnchorSet:
    """Anchor pixels with their inverted distances to the landmark.

    Positions are grid indices (xs = columns, ys = rows).  Construction checks
    only counts and finiteness; geometric degeneracy (collinear or duplicated
    anchors) is the producer's job to avoid and surfaces as a singular system
    during the solve, so synthetic degenerate sets remain constructible.
    """

    xs: tuple[int, ...]
    ys: tuple[int, ...]
    distances: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.xs) == len(self.ys) == len(self.distances)):
            raise InvalidInputError("anchor coordinate and distance counts must match")
        if len(self.xs) < 3:
            raise InvalidInputError(f"multilateration needs at least 3 anchors, got {len(self.xs)}")
        if not all(math.isfinite(d) and d >= 0.0 for d in self.distances):
            raise InvalidInputError("anchor distances must be finite and non-negative")

    @property
    def count(self) -> int:
        return len(self.xs)


@dataclass(frozen=True)
class DecodeResult:
    """Outcome of one decode.

    beta_hat: recovered landmark, heatmap space.
    max_loc: argmax pixel (x, y).
    second_loc: second-highest pixel when the scheme used one.
    anchors_used: the anchor set behind a multilateration estimate.
    condition: conditioning of the linear solve (0 when no solve happened,
        inf when a fallback fired).
    fallback: name of the scheme that actually produced beta_hat when the
        requested one had to fall back, else None.
    """

    beta_hat: Coordinate
    max_loc: tuple[int, int]
    second_loc: tuple[int, int] | None = None
    anchors_used: AnchorSet | None = None
    condition: float = 0.0
    fallback: str | None = None


def _argmax(values: np.ndarray) -> tuple[int, int]:
    """Argmax as (x, y); row-major scan gives smallest row then column on ties."""
    iy, ix = divmod(int(np.argmax(values)), values.shape[1])
    return ix, iy


def _require_signal(values: np.ndarray) -> None:
    if values.max() == values.min():
        raise FlatHeatmapError("heatmap is flat: maximum equals minimum, no peak to decode")


def decode_one_hot(h: Heatmap) -> DecodeResult:
    """Return the argmax pixel.  Quantization error is up to half a pixel per axis."""
    values = h.values
    _require_signal(values)
    ix, iy = _argmax(values)
    return DecodeResult(Coordinate(float(ix), float(iy), Space.HEATMAP), (ix, iy))


def decode_two_hot(h: Heatmap, toward_second: bool = True) -> DecodeResult:
    """Shift the argmax a quarter pixel along the direction of the second maximum."""
    values = h.values
    if values.size < 2:
        raise InvalidInputError("two-hot decoding needs at least two pixels")
    _require_signal(values)
    ix, iy = _argmax(values)
    masked = values.copy()
    masked[iy, ix] = -np.inf
    sx, sy = _argmax(masked)
    dx, dy = sx - ix, sy - iy
    norm = math.hypot(dx, dy)
    sign = 0.25 if toward_second else -0.25
    beta = Coordinate(ix + sign * dx / norm, iy + sign * dy / norm, Space.HEATMAP)
    return DecodeResult(beta, (ix, iy), second_loc=(sx, sy))


def _symmetric_condition(axx: float, axy: float, ayy: float) -> float:
    """Eigenvalue magnitude ratio of a symmetric 2x2 matrix."""
    half_trace = 0.5 * (axx + ayy)
    disc = math.hypot(0.5 * (axx - ayy), axy)
    lo, hi = abs(half_trace - disc), abs(half_trace + disc)
    if lo > hi:
        lo, hi = hi, lo
    return hi / lo if lo > 0.0 else math.inf


def decode_distribution_aware(h: Heatmap, config: DecodeConfig) -> DecodeResult:
    """Newton refinement of the argmax on the log response.

    For a Gaussian, log values are an exact quadratic, so one step
    beta = m - H^-1 g with central-difference gradient g and Hessian H over
    the 3x3 neighborhood recovers an interior center exactly.  The argmax
    must be interior (BoundaryPeakError otherwise); when H is not negative
    definite the estimate falls back to the argmax pixel with condition inf.
    """
    values = h.values
    _require_signal(values)
    if config.smoothing:
        blurred = gaussian_filter(values, sigma=config.sigma, mode="constant")
        peak = blurred.max()
        if peak > 0.0:
            values = blurred * (values.max() / peak)
    ix, iy = _argmax(values)
    if ix < 1 or iy < 1 or ix > h.width - 2 or iy > h.height - 2:
        raise BoundaryPeakError(
            f"argmax ({ix}, {iy}) sits on the border of a {h.width}x{h.height} map; "
            "the 3x3 refinement window does not fit"
        )

    logs = np.log(np.clip(values[iy - 1 : iy + 2, ix - 1 : ix + 2], config.value_floor, None))
    gx = 0.5 * (logs[1, 2] - logs[1, 0])
    gy = 0.5 * (logs[2, 1] - logs[0, 1])
    hxx = logs[1, 2] - 2.0 * logs[1, 1] + logs[1, 0]
    hyy = logs[2, 1] - 2.0 * logs[1, 1] + logs[0, 1]
    hxy = 0.25 * (logs[2, 2] - logs[2, 0] - logs[0, 2] + logs[0, 0])
    det = hxx * hyy - hxy * hxy
    if not (hxx < 0.0 and det > 0.0):
        # Not a local quadratic peak; the step would diverge, keep the argmax.
        return DecodeResult(
            Coordinate(float(ix), float(iy), Space.HEATMAP),
            (ix, iy),
            condition=math.inf,
            fallback=Decoder.ONE_HOT.value,
        )
    step_x = (hyy * gx - hxy * gy) / det
    step_y = (hxx * gy - hxy * gx) / det
    beta = Coordinate(ix - step_x, iy - step_y, Space.HEATMAP)
    return DecodeResult(beta, (ix, iy), condition=_symmetric_condition(hxx, hxy, hyy))


def invert_distance(value, sigma: float, value_floor: float = 1e-9):
    """Invert a Gaussian response into the distance to the landmark.

    d = sigma * sqrt(-2 * ln(v)) with v clamped into [value_floor, 1].  Exact
    for any pixel of a unit-peak encode, which is what makes multilateration
    decode without quantization error.  Accepts scalars or arrays.
    """
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise InvalidInputError(f"sigma must be a finite value > 0, got {sigma}")
    if not (0.0 < value_floor < 1.0):
        raise InvalidInputError(f"value_floor must lie in (0, 1), got {value_floor}")
    v = np.clip(value, value_floor, 1.0)
    d = sigma * np.sqrt(-2.0 * np.log(v))
    return float(d) if np.ndim(value) == 0 else d


def _rank_check_det(xs: np.ndarray, ys: np.ndarray) -> tuple[float, float]:
    """Determinant and Frobenius norm of X^T X for rows (x_n - x_i, y_n - y_i)."""
    rx = xs[-1] - xs[:-1]
    ry = ys[-1] - ys[:-1]
    axx = float(rx @ rx)
    axy = float(rx @ ry)
    ayy = float(ry @ ry)
    det = axx * ayy - axy * axy
    fro = math.sqrt(axx * axx + 2.0 * axy * axy + ayy * ayy)
    return det, fro


def sample_anchors(h: Heatmap, config: DecodeConfig) -> AnchorSet:
    """Pick anchors from the brightest k x k window and invert their distances.

    The window with the largest value sum wins (ties: smallest row, then
    column); within it the anchor_count brightest pixels are taken with the
    same tie order.  Collinear picks raise CollinearAnchorError; a window
    with no positive response raises FlatHeatmapError.
    """
    values = h.values
    k = config.kernel_size
    if k > min(h.width, h.height):
        raise InvalidInputError(f"kernel_size {k} does not fit a {h.width}x{h.height} map")

    sums = sliding_window_view(values, (k, k)).sum(axis=(2, 3))
    wy, wx = divmod(int(np.argmax(sums)), sums.shape[1])
    window = values[wy : wy + k, wx : wx + k]
    if window.max() <= 0.0:
        raise FlatHeatmapError("brightest window has no positive response to invert")

    ranked = sorted(
        ((-window[j, i], wy + j, wx + i) for j in range(k) for i in range(k))
    )[: config.anchor_count]
    ys = tuple(r[1] for r in ranked)
    xs = tuple(r[2] for r in ranked)
    det, fro = _rank_check_det(np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64))
    if fro == 0.0 or abs(det) < _SINGULAR_RTOL * fro:
        raise CollinearAnchorError(f"the {len(xs)} sampled anchors are collinear")

    distances = invert_distance(window, config.sigma, config.value_floor)
    ds = tuple(float(distances[y - wy, x - wx]) for x, y in zip(xs, ys))
    return AnchorSet(xs, ys, ds)


def _multilaterate(anchors: AnchorSet) -> tuple[Coordinate, float]:
    xs = np.asarray(anchors.xs, dtype=np.float64)
    ys = np.asarray(anchors.ys, dtype=np.float64)
    ds = np.asarray(anchors.distances, dtype=np.float64)

    rx = xs[-1] - xs[:-1]
    ry = ys[-1] - ys[:-1]
    rhs = 0.5 * (
        ds[:-1] ** 2 - ds[-1] ** 2 + xs[-1] ** 2 + ys[-1] ** 2 - xs[:-1] ** 2 - ys[:-1] ** 2
    )

    axx = float(rx @ rx)
    axy = float(rx @ ry)
    ayy = float(ry @ ry)
    bx = float(rx @ rhs)
    by = float(ry @ rhs)
    det = axx * ayy - axy * axy
    fro = math.sqrt(axx * axx + 2.0 * axy * axy + ayy * ayy)
    if fro == 0.0 or abs(det) < _SINGULAR_RTOL * fro:
        raise SingularSystemError(
            "normal equations are singular (collinear or duplicated anchors slipped through)"
        )
    px = (ayy * bx - axy * by) / det
    py = (axx * by - axy * bx) / det
    return Coordinate(px, py, Space.HEATMAP), _symmetric_condition(axx, axy, ayy)


def multilaterate(anchors: AnchorSet) -> Coordinate:
    """Solve the true-range system for the point at the given anchor distances.

    Each anchor contributes ||p - a_i|| = d_i.  Subtracting the last anchor's
    squared equation from the others cancels ||p||^2 and leaves the linear
    system X p = Y with rows X_i = (x_n - x_i, y_n - y_i) and
    Y_i = (d_i^2 - d_n^2 + x_n^2 + y_n^2 - x_i^2 - y_i^2) / 2, solved through
    the 2x2 normal equations (X^T X) p = X^T Y.  With exact distances the
    residual is zero and p is the landmark itself.
    """
    beta, _ = _multilaterate(anchors)
    return beta


def decode_multilateration(h: Heatmap, config: DecodeConfig) -> DecodeResult:
    """Anchor sampling plus the least-squares solve, with a degeneracy ladder.

    A collinear or singular anchor geometry is retried once with a window one
    pixel larger (same anchor count); if that also degenerates, the estimate
    falls back to two-hot with condition inf and the fallback recorded.
    """
    values = h.values
    _require_signal(values)
    ix, iy = _argmax(values)

    configs = [config]
    if config.kernel_size + 1 <= min(h.width, h.height):
        configs.append(replace(config, kernel_size=config.kernel_size + 1))
    for attempt in configs:
        try:
            anchors = sample_anchors(h, attempt)
            beta, condition = _multilaterate(anchors)
        except (CollinearAnchorError, SingularSystemError):
            continue
        return DecodeResult(beta, (ix, iy), anchors_used=anchors, condition=condition)

    result = decode_two_hot(h, toward_second=config.two_hot_toward_second)
    return replace(result, condition=math.inf, fallback=Decoder.TWO_HOT.value)


def decode(h: Heatmap, config: DecodeConfig) -> DecodeResult:
    """Dispatch to the configured decoder.

    The distribution-aware scheme gets one documented safety net here: a
    boundary argmax (where its 3x3 window cannot fit) falls back to one-hot
    with the fallback recorded, so batch evaluations keep a comparable
    estimate instead of a hard error.
    """
    if config.decoder is Decoder.ONE_HOT:
        return decode_one_hot(h)
    if config.decoder is Decoder.TWO_HOT:
        return decode_two_hot(h, toward_second=config.two_hot_toward_second)
    if config.decoder is Decoder.DISTRIBUTION_AWARE:
        try:
            return decode_distribution_aware(h, config)
        except BoundaryPeakError:
            result = decode_one_hot(h)
            return replace(result, condition=math.inf, fallback=Decoder.ONE_HOT.value)
    return decode_multilateration(h, config)


def to_image_space(result, downsample: float) -> Coordinate:
    """Scale a heatmap-space estimate back to image pixels (pure multiplication).

    Accepts a DecodeResult or a bare heatmap-space Coordinate.
    """
    beta = result.beta_hat if isinstance(result, DecodeResult) else result
    if not isinstance(beta, Coordinate) or beta.space is not Space.HEATMAP:
        raise InvalidInputError("to_image_space expects a heatmap-space estimate")
    if not (math.isfinite(downsample) and downsample >= 1.0):
        raise InvalidInputError(f"downsample must be a finite value >= 1, got {downsample}")
    return Coordinate(beta.x * downsample, beta.y * downsample, Space.IMAGE)
