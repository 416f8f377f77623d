"""Quantization-error benchmark and the anchor kernel-size sweep.

The benchmark draws random continuous landmarks on a synthetic image, encodes
each one at several heatmap resolutions, decodes with each scheme, and
reports NME per (decoder, resolution).  Landmarks are uniform over the image
minus a border margin of 3 sigma heatmap pixels when the map is wide enough
(6 sigma < side), clamped to half a pixel otherwise so that tiny maps keep a
usable sampling region.  At the clamped sizes the scaled center can round to
a border pixel, so decoders that need an interior argmax show their fallback
behavior there; multilateration does not care, its anchors stay valid.

Everything is deterministic for a given seed: each resolution derives its
own child stream from (seed, resolution), every sample's error lands in a
preallocated slot indexed by sample number, and reductions run in fixed
index order.  Worker threads only change who fills the slots, never the
result, so reports are byte-identical across worker counts.

The sweep varies the anchor window size k (using all k*k window pixels as
anchors) for the multilateration decoder.  Clean encodes decode exactly at
every k, which would make the sweep a table of zeros; real predictors emit
imperfect blobs, so the sweep simulates that with a widened blob
(blob_scale * sigma encoded, sigma assumed by the decoder) plus additive
Gaussian pixel noise.  Under that model small windows win: wide windows
reach into boundary-clipped, noise-dominated pixels whose inverted distances
are inconsistent, and the miscalibration error grows with anchor spread.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Coordinate, EncodingConfig, EncodingMode, Heatmap, Space, encode
from .decode import DecodeConfig, Decoder, decode, to_image_space
from .errors import HeatpointError, InvalidConfigError
from .metrics import AggregateTable, EvalConfig, EvalReport, aggregate

_ALL_DECODERS = tuple(Decoder)


def interior_margin(resolution: int, sigma: float) -> float:
    """Sampling margin from the border, in heatmap pixels."""
    return 3.0 * sigma if 6.0 * sigma < resolution else 0.5


@dataclass(frozen=True)
class BenchConfig:
    """Benchmark parameters; defaults reproduce the headline experiment."""

    resolutions: tuple[int, ...] = (64, 32, 16, 8, 4)
    decoders: tuple[Decoder, ...] = _ALL_DECODERS
    encoding_mode: EncodingMode = EncodingMode.UNBIASED
    samples: int = 10000
    seed: int = 0
    sigma: float = 1.5
    kernel_size: int = 2
    anchor_count: int = 4
    normalization: EvalConfig = field(default_factory=EvalConfig)
    image_side: float = 256.0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "resolutions", tuple(int(r) for r in self.resolutions))
        object.__setattr__(self, "decoders", tuple(Decoder(d) for d in self.decoders))
        if not self.resolutions or any(r < 2 for r in self.resolutions):
            raise InvalidConfigError(f"resolutions must be integers >= 2, got {self.resolutions}")
        if not self.decoders:
            raise InvalidConfigError("at least one decoder is required")
        if len(set(self.decoders)) != len(self.decoders):
            raise InvalidConfigError("decoders must be unique")
        if not isinstance(self.samples, int) or self.samples < 1:
            raise InvalidConfigError(f"samples must be a positive integer, got {self.samples!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise InvalidConfigError(f"workers must be a positive integer, got {self.workers!r}")
        if not (math.isfinite(self.image_side) and self.image_side > 0):
            raise InvalidConfigError(f"image_side must be a finite value > 0, got {self.image_side}")
        if not isinstance(self.encoding_mode, EncodingMode):
            raise InvalidConfigError(f"unknown encoding mode: {self.encoding_mode!r}")
        # Validates sigma / kernel / anchor constraints once, up front.
        self.decode_config(Decoder.MULTILATERATION)

    def decode_config(self, decoder: Decoder) -> DecodeConfig:
        return DecodeConfig(
            decoder=decoder,
            kernel_size=self.kernel_size,
            anchor_count=self.anchor_count,
            sigma=self.sigma,
        )


@dataclass(frozen=True)
class BenchCell:
    decoder: Decoder
    resolution: int
    report: EvalReport
    mean_decode_us: float


@dataclass(frozen=True)
class BenchResult:
    config: BenchConfig
    cells: tuple[BenchCell, ...]
    table: AggregateTable
    wall_time: float


def _draw_points(seed: int, resolution: int, samples: int, sigma: float, image_side: float) -> np.ndarray:
    """Image-space landmark positions for one resolution, from (seed, resolution)."""
    rng = np.random.default_rng([seed, resolution])
    margin = interior_margin(resolution, sigma) * (image_side / resolution)
    return rng.uniform(margin, image_side - margin, size=(samples, 2))


def run_bench(config: BenchConfig) -> BenchResult:
    started = time.perf_counter()
    cells = []
    for resolution in config.resolutions:
        downsample = config.image_side / resolution
        points_image = _draw_points(
            config.seed, resolution, config.samples, config.sigma, config.image_side
        )
        enc = EncodingConfig(downsample=downsample, sigma=config.sigma, mode=config.encoding_mode)
        decode_configs = {d: config.decode_config(d) for d in config.decoders}

        errors = {d: np.full(config.samples, np.nan) for d in config.decoders}
        chunk_bounds = np.linspace(0, config.samples, config.workers + 1).astype(int)
        chunk_times = [dict.fromkeys(config.decoders, 0.0) for _ in range(config.workers)]

        def run_chunk(chunk_id: int, lo: int, hi: int):
            times = chunk_times[chunk_id]
            for i in range(lo, hi):
                u, v = points_image[i]
                h = encode(Coordinate(float(u), float(v), Space.IMAGE), enc, resolution, resolution)
                for d in config.decoders:
                    t0 = time.perf_counter()
                    try:
                        result = decode(h, decode_configs[d])
                    except HeatpointError:
                        times[d] += time.perf_counter() - t0
                        continue
                    times[d] += time.perf_counter() - t0
                    pred = to_image_space(result, downsample)
                    errors[d][i] = math.hypot(pred.x - u, pred.y - v)

        if config.workers == 1:
            run_chunk(0, 0, config.samples)
        else:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                futures = [
                    pool.submit(run_chunk, c, int(chunk_bounds[c]), int(chunk_bounds[c + 1]))
                    for c in range(config.workers)
                ]
                for f in futures:
                    f.result()

        d_norm = config.normalization.resolve_d(
            image_size=(config.image_side, config.image_side), heatmap_width=float(resolution)
        )
        for d in config.decoders:
            errs = errors[d]
            ok = errs[~np.isnan(errs)]
            nme_mean = float(np.mean(ok) / d_norm) if ok.size else 0.0
            total_time = sum(chunk_times[c][d] for c in range(config.workers))
            report = EvalReport(
                nme_mean=nme_mean,
                nme_per_landmark=(nme_mean,),
                failures=int(config.samples - ok.size),
                n_samples=config.samples,
                wall_time=total_time,
            )
            cells.append(
                BenchCell(d, resolution, report, mean_decode_us=total_time / config.samples * 1e6)
            )

    table = aggregate((c.decoder, c.resolution, c.report) for c in cells)
    return BenchResult(config, tuple(cells), table, wall_time=time.perf_counter() - started)


@dataclass(frozen=True)
class SweepConfig:
    """Kernel-size sweep parameters for the multilateration decoder.

    blob_scale widens the encoded Gaussian relative to the sigma the decoder
    assumes; noise is the standard deviation of additive pixel noise.  Both
    default to a mild degradation that separates the kernel sizes without
    drowning the signal.
    """

    resolutions: tuple[int, ...] = (64, 32, 16, 8, 4)
    kernels: tuple[int, ...] = (2, 3, 4, 5, 6)
    samples: int = 2000
    seed: int = 0
    sigma: float = 1.5
    blob_scale: float = 1.1
    noise: float = 1e-3
    normalization: EvalConfig = field(default_factory=EvalConfig)
    image_side: float = 256.0

    def __post_init__(self):
        object.__setattr__(self, "resolutions", tuple(int(r) for r in self.resolutions))
        object.__setattr__(self, "kernels", tuple(int(k) for k in self.kernels))
        if not self.resolutions or any(r < 2 for r in self.resolutions):
            raise InvalidConfigError(f"resolutions must be integers >= 2, got {self.resolutions}")
        if not self.kernels or any(k < 2 for k in self.kernels):
            raise InvalidConfigError(f"kernel sizes must be integers >= 2, got {self.kernels}")
        if not isinstance(self.samples, int) or self.samples < 1:
            raise InvalidConfigError(f"samples must be a positive integer, got {self.samples!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidConfigError(f"sigma must be a finite value > 0, got {self.sigma}")
        if not (math.isfinite(self.blob_scale) and self.blob_scale > 0):
            raise InvalidConfigError(f"blob_scale must be a finite value > 0, got {self.blob_scale}")
        if not (math.isfinite(self.noise) and self.noise >= 0):
            raise InvalidConfigError(f"noise must be a finite value >= 0, got {self.noise}")
        if not (math.isfinite(self.image_side) and self.image_side > 0):
            raise InvalidConfigError(f"image_side must be a finite value > 0, got {self.image_side}")


@dataclass(frozen=True)
class SweepResult:
    """NME per (kernel, resolution); None marks windows larger than the map."""

    config: SweepConfig
    kernels: tuple[int, ...]
    resolutions: tuple[int, ...]
    cells: tuple[tuple[float | None, ...], ...]  # rows by kernel, columns by resolution
    wall_time: float

    def value(self, kernel: int, resolution: int) -> float | None:
        return self.cells[self.kernels.index(kernel)][self.resolutions.index(resolution)]


def run_sweep(config: SweepConfig) -> SweepResult:
    started = time.perf_counter()
    kernels = tuple(sorted(set(config.kernels)))
    resolutions = tuple(sorted(set(config.resolutions), reverse=True))
    sums = {(k, r): 0.0 for k in kernels for r in resolutions}
    counts = {(k, r): 0 for k in kernels for r in resolutions}

    for resolution in resolutions:
        downsample = config.image_side / resolution
        rng = np.random.default_rng([config.seed, resolution])
        margin = interior_margin(resolution, config.sigma) * downsample
        points_image = rng.uniform(margin, config.image_side - margin, size=(config.samples, 2))
        enc = EncodingConfig(downsample=downsample, sigma=config.sigma * config.blob_scale)
        fitting = [k for k in kernels if k <= resolution]
        decode_configs = {
            k: DecodeConfig(
                decoder=Decoder.MULTILATERATION,
                kernel_size=k,
                anchor_count=k * k,
                sigma=config.sigma,
            )
            for k in fitting
        }
        d_norm = config.normalization.resolve_d(
            image_size=(config.image_side, config.image_side), heatmap_width=float(resolution)
        )
        for i in range(config.samples):
            u, v = points_image[i]
            clean = encode(Coordinate(float(u), float(v), Space.IMAGE), enc, resolution, resolution)
            values = clean.values
            if config.noise > 0.0:
                values = values + rng.normal(0.0, config.noise, size=values.shape)
            h = Heatmap(values) if values is not clean.values else clean
            for k in fitting:
                try:
                    result = decode(h, decode_configs[k])
                except HeatpointError:
                    continue
                pred = to_image_space(result, downsample)
                sums[(k, resolution)] += math.hypot(pred.x - u, pred.y - v) / d_norm
                counts[(k, resolution)] += 1

    cells = tuple(
        tuple(
            (sums[(k, r)] / counts[(k, r)] if counts[(k, r)] else 0.0) if k <= r else None
            for r in resolutions
        )
        for k in kernels
    )
    return SweepResult(config, kernels, resolutions, cells, wall_time=time.perf_counter() - started)


def _grid_text(title: str, corner: str, col_labels: Sequence[str], rows: Sequence[tuple[str, Sequence[str]]]) -> str:
    label_width = max(len(corner), *(len(r[0]) for r in rows))
    col_widths = [
        max(len(col_labels[j]), *(len(r[1][j]) for r in rows)) for j in range(len(col_labels))
    ]
    lines = [title]
    header = corner.ljust(label_width) + "".join(
        "  " + col_labels[j].rjust(col_widths[j]) for j in range(len(col_labels))
    )
    lines.append(header)
    for label, cells in rows:
        lines.append(
            label.ljust(label_width)
            + "".join("  " + cells[j].rjust(col_widths[j]) for j in range(len(col_labels)))
        )
    return "\n".join(lines) + "\n"


def _grid_csv(comment: str, corner: str, col_labels: Sequence[str], rows: Sequence[tuple[str, Sequence[str]]]) -> str:
    lines = [f"# {comment}", ",".join([corner, *col_labels])]
    for label, cells in rows:
        lines.append(",".join([label, *cells]))
    return "\n".join(lines) + "\n"


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.6g}"


def _nme_caption(result: BenchResult) -> str:
    c = result.config
    return (
        f"normalization: {c.normalization.label()}, space: {c.normalization.space.value}, "
        f"encoding: {c.encoding_mode.value}, samples: {c.samples}, seed: {c.seed}"
    )


def _nme_rows(result: BenchResult) -> tuple[list[str], list[tuple[str, list[str]]]]:
    table = result.table
    cols = [str(r) for r in table.col_labels]
    rows = [(label, [_fmt(v) for v in row]) for label, row in zip(table.row_labels, table.cells)]
    return cols, rows


def render_nme_text(result: BenchResult) -> str:
    cols, rows = _nme_rows(result)
    return _grid_text(f"NME ({_nme_caption(result)})", "decoder", cols, rows)


def render_nme_csv(result: BenchResult) -> str:
    cols, rows = _nme_rows(result)
    return _grid_csv(f"nme {_nme_caption(result)}", "decoder", cols, rows)


def _timing_rows(result: BenchResult) -> tuple[list[str], list[tuple[str, list[str]]]]:
    resolutions = list(result.config.resolutions)
    by_key = {(c.decoder, c.resolution): c.mean_decode_us for c in result.cells}
    cols = [str(r) for r in sorted(resolutions, reverse=True)]
    rows = [
        (d.value, [f"{by_key[(d, r)]:.3g}" for r in sorted(resolutions, reverse=True)])
        for d in result.config.decoders
    ]
    return cols, rows


def render_timing_text(result: BenchResult) -> str:
    cols, rows = _timing_rows(result)
    c = result.config
    title = f"mean decode time, microseconds per sample (samples: {c.samples}, workers: {c.workers})"
    return _grid_text(title, "decoder", cols, rows)


def render_timing_csv(result: BenchResult) -> str:
    cols, rows = _timing_rows(result)
    c = result.config
    return _grid_csv(f"decode-time-us samples: {c.samples}, workers: {c.workers}", "decoder", cols, rows)


def _sweep_caption(result: SweepResult) -> str:
    c = result.config
    return (
        f"multilateration NME by anchor window ({c.normalization.label()}, "
        f"blob_scale: {c.blob_scale:g}, noise: {c.noise:g}, samples: {c.samples}, seed: {c.seed})"
    )


def _sweep_rows(result: SweepResult) -> tuple[list[str], list[tuple[str, list[str]]]]:
    cols = [str(r) for r in result.resolutions]
    rows = [
        (f"{k}x{k}", [_fmt(v) for v in row]) for k, row in zip(result.kernels, result.cells)
    ]
    return cols, rows


def render_sweep_text(result: SweepResult) -> str:
    cols, rows = _sweep_rows(result)
    return _grid_text(_sweep_caption(result), "kernel", cols, rows)


def render_sweep_csv(result: SweepResult) -> str:
    cols, rows = _sweep_rows(result)
    return _grid_csv(_sweep_caption(result), "kernel", cols, rows)
