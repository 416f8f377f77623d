"""Request and response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

from ..bench import BenchConfig, SweepConfig
from ..core import EncodingMode
from ..decode import Decoder
from ..metrics import EvalConfig, NormalizationKind
from ..core import Space

DecoderName = Literal["one-hot", "two-hot", "distribution-aware", "multilateration"]
_ALL_DECODER_NAMES = [d.value for d in Decoder]


class NormalizationSettings(BaseModel):
    kind: Literal["constant", "image-diagonal", "heatmap-width"] = "constant"
    constant: Optional[float] = 256.0
    space: Literal["image", "heatmap"] = "image"

    def to_config(self) -> EvalConfig:
        return EvalConfig(
            kind=NormalizationKind(self.kind), constant=self.constant, space=Space(self.space)
        )


class BenchRequest(BaseModel):
    resolutions: list[int] = [64, 32, 16, 8, 4]
    decoders: list[DecoderName] = Field(default_factory=lambda: list(_ALL_DECODER_NAMES))
    encoding: Literal["unbiased", "biased"] = "unbiased"
    samples: int = 10000
    seed: int = 0
    sigma: float = 1.5
    kernel_size: int = 2
    anchor_count: int = 4
    normalization: NormalizationSettings = NormalizationSettings()
    image_side: float = 256.0
    workers: int = 1

    def to_config(self) -> BenchConfig:
        return BenchConfig(
            resolutions=tuple(self.resolutions),
            decoders=tuple(Decoder(d) for d in self.decoders),
            encoding_mode=EncodingMode(self.encoding),
            samples=self.samples,
            seed=self.seed,
            sigma=self.sigma,
            kernel_size=self.kernel_size,
            anchor_count=self.anchor_count,
            normalization=self.normalization.to_config(),
            image_side=self.image_side,
            workers=self.workers,
        )


class BenchCellOut(BaseModel):
    decoder: str
    resolution: int
    nme: float
    failures: int
    samples: int
    mean_decode_us: float


class BenchResponse(BaseModel):
    nme_text: str
    nme_csv: str
    timing_text: str
    timing_csv: str
    cells: list[BenchCellOut]
    wall_time: float


class SweepRequest(BaseModel):
    resolutions: list[int] = [64, 32, 16, 8, 4]
    kernels: list[int] = [2, 3, 4, 5, 6]
    samples: int = 2000
    seed: int = 0
    sigma: float = 1.5
    blob_scale: float = 1.1
    noise: float = 1e-3
    normalization: NormalizationSettings = NormalizationSettings()
    image_side: float = 256.0

    def to_config(self) -> SweepConfig:
        return SweepConfig(
            resolutions=tuple(self.resolutions),
            kernels=tuple(self.kernels),
            samples=self.samples,
            seed=self.seed,
            sigma=self.sigma,
            blob_scale=self.blob_scale,
            noise=self.noise,
            normalization=self.normalization.to_config(),
            image_side=self.image_side,
        )


class SweepCellOut(BaseModel):
    kernel: int
    resolution: int
    nme: Optional[float]


class SweepResponse(BaseModel):
    text: str
    csv: str
    cells: list[SweepCellOut]
    wall_time: float


class EncodeRequest(BaseModel):
    # records carry the raw annotation objects; the annotation schema itself is
    # validated by the same code path that reads annotation files, so malformed
    # content maps to the format error bucket, not request validation.
    records: list[Any]
    width: int
    height: int
    downsample: float = 4.0
    sigma: float = 1.5
    mode: Literal["unbiased", "biased"] = "unbiased"
    amplitude: float = 1.0


class DecodeResponse(BaseModel):
    records: list[Any]


class EvalRequest(BaseModel):
    gt: list[Any]
    predictions: list[Any]
    normalization: NormalizationSettings = NormalizationSettings()
    image_size: Optional[tuple[float, float]] = None
    heatmap_width: Optional[float] = None


class EvalResponse(BaseModel):
    nme_mean: float
    nme_per_landmark: list[Optional[float]]
    failures: int
    n_samples: int
    wall_time: float


class ErrorEnvelope(BaseModel):
    """Error shape returned by every endpoint on failure."""

    kind: str
    exit_code: int
    detail: str
    offset: Optional[int] = None
