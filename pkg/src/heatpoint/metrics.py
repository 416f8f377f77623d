"""Normalized mean error and result aggregation.

The normalized mean error of a landmark set is the mean Euclidean distance
between truth and estimate divided by a normalization length D:

    NME = (1/N) * sum_i ||beta_i - beta_hat_i|| / D

D comes from an EvalConfig: a constant, the image diagonal, or the heatmap
width.  All distances are taken in one declared coordinate space; mixing
spaces is an error, not a silent unit bug.  Batch evaluation excludes
landmarks flagged as failed from the mean and counts them separately.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import LandmarkSet, Space
from .errors import InvalidConfigError, InvalidInputError, SchemaError


class NormalizationKind(str, Enum):
    CONSTANT = "constant"
    IMAGE_DIAGONAL = "image-diagonal"
    HEATMAP_WIDTH = "heatmap-width"


@dataclass(frozen=True)
class EvalConfig:
    """Normalization rule plus the space distances are measured in."""

    kind: NormalizationKind = NormalizationKind.CONSTANT
    constant: float | None = 256.0
    space: Space = Space.IMAGE

    def __post_init__(self):
        if not isinstance(self.kind, NormalizationKind):
            raise InvalidConfigError(f"unknown normalization kind: {self.kind!r}")
        if not isinstance(self.space, Space):
            raise InvalidConfigError(f"unknown space: {self.space!r}")
        if self.kind is NormalizationKind.CONSTANT:
            if self.constant is None or not (math.isfinite(self.constant) and self.constant > 0):
                raise InvalidConfigError(f"constant normalization needs a finite D > 0, got {self.constant}")

    def resolve_d(self, image_size: tuple[float, float] | None = None, heatmap_width: float | None = None) -> float:
        """Return the normalization length D for the given context."""
        if self.kind is NormalizationKind.CONSTANT:
            return float(self.constant)
        if self.kind is NormalizationKind.IMAGE_DIAGONAL:
            if image_size is None:
                raise InvalidConfigError("image-diagonal normalization needs the image size")
            return math.hypot(image_size[0], image_size[1])
        if heatmap_width is None:
            raise InvalidConfigError("heatmap-width normalization needs the heatmap width")
        if heatmap_width <= 0:
            raise InvalidConfigError(f"heatmap width must be > 0, got {heatmap_width}")
        return float(heatmap_width)

    def label(self) -> str:
        """Human-readable description used in output headers."""
        if self.kind is NormalizationKind.CONSTANT:
            return f"constant D={self.constant:g}"
        if self.kind is NormalizationKind.IMAGE_DIAGONAL:
            return "image-diagonal D"
        return "heatmap-width D (per resolution)"


@dataclass(frozen=True)
class EvalReport:
    """Aggregated evaluation outcome for one condition."""

    nme_mean: float
    nme_per_landmark: tuple[float, ...]
    failures: int
    n_samples: int
    wall_time: float


def nme(
    gt: LandmarkSet,
    pred: LandmarkSet,
    config: EvalConfig,
    image_size: tuple[float, float] | None = None,
    heatmap_width: float | None = None,
) -> float:
    """Normalized mean error between two landmark sets of equal length."""
    if gt.count != pred.count:
        raise InvalidInputError(f"landmark counts differ: {gt.count} vs {pred.count}")
    if gt.count == 0:
        raise InvalidInputError("cannot compute NME of an empty landmark set")
    if gt.space is not config.space or pred.space is not config.space:
        raise InvalidInputError(
            f"landmarks must be in the configured {config.space.value} space"
        )
    d = config.resolve_d(image_size=image_size, heatmap_width=heatmap_width)
    total = 0.0
    for g, p in zip(gt.landmarks, pred.landmarks):
        total += math.hypot(g.x - p.x, g.y - p.y)
    return total / (gt.count * d)


def evaluate_records(
    gt_records,
    pred_records,
    config: EvalConfig,
    image_size: tuple[float, float] | None = None,
    heatmap_width: float | None = None,
) -> EvalReport:
    """Evaluate prediction records against ground-truth records, matched by id.

    Records are annotation records (id, landmarks, optional normalization,
    optional flags).  A ground-truth record's ``normalization`` overrides the
    configured D for that record.  Prediction landmarks flagged "failed" are
    excluded from the mean and counted in ``failures``.  Mismatched id sets
    are invalid input; mismatched landmark counts are a schema error.
    """
    start = time.perf_counter()
    preds = {}
    for rec in pred_records:
        if rec.id in preds:
            raise InvalidInputError(f"duplicate prediction id {rec.id!r}")
        preds[rec.id] = rec
    gt_ids = [rec.id for rec in gt_records]
    if len(set(gt_ids)) != len(gt_ids):
        raise InvalidInputError("duplicate ground-truth ids")
    if set(gt_ids) != set(preds):
        raise InvalidInputError("ground-truth and prediction ids do not match")

    n_landmarks = gt_records[0].landmarks.count if gt_records else 0
    per_record = []
    per_landmark = np.full((len(gt_ids), max(n_landmarks, 1)), np.nan)
    failures = 0
    for row, rec in enumerate(gt_records):
        pred = preds[rec.id]
        if rec.landmarks.count != n_landmarks or pred.landmarks.count != rec.landmarks.count:
            raise SchemaError(
                f"record {rec.id!r}: landmark counts differ "
                f"(ground truth {rec.landmarks.count}, prediction {pred.landmarks.count})"
            )
        if rec.landmarks.space is not config.space or pred.landmarks.space is not config.space:
            raise InvalidInputError(f"record {rec.id!r} is not in the configured {config.space.value} space")
        d = rec.normalization if rec.normalization is not None else config.resolve_d(
            image_size=image_size, heatmap_width=heatmap_width
        )
        flags = pred.flags or (None,) * n_landmarks
        errs = []
        for col, (g, p) in enumerate(zip(rec.landmarks.landmarks, pred.landmarks.landmarks)):
            if flags[col] == "failed":
                failures += 1
                continue
            err = math.hypot(g.x - p.x, g.y - p.y) / d
            per_landmark[row, col] = err
            errs.append(err)
        if errs:
            per_record.append(sum(errs) / len(errs))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-failed columns mean over empty
        landmark_means = np.nanmean(per_landmark, axis=0) if n_landmarks else np.empty(0)
    mean = sum(per_record) / len(per_record) if per_record else 0.0
    return EvalReport(
        nme_mean=mean,
        nme_per_landmark=tuple(float(v) for v in landmark_means[:n_landmarks]),
        failures=failures,
        n_samples=len(gt_ids),
        wall_time=time.perf_counter() - start,
    )


@dataclass(frozen=True)
class AggregateTable:
    """NME per (decoder, resolution): rows are decoders, columns resolutions."""

    row_labels: tuple[str, ...]
    col_labels: tuple[int, ...]
    cells: tuple[tuple[float, ...], ...]

    def value(self, decoder: str, resolution: int) -> float:
        return self.cells[self.row_labels.index(decoder)][self.col_labels.index(resolution)]


def aggregate(entries) -> AggregateTable:
    """Build the decoder-by-resolution table from (decoder, resolution, report) entries.

    Row order follows the Decoder enum, columns are resolutions descending.
    Duplicate keys warn and keep the last value.
    """
    from .decode import Decoder

    by_key = {}
    for decoder, resolution, report in entries:
        key = (Decoder(decoder).value, int(resolution))
        if key in by_key:
            warnings.warn(f"duplicate aggregate entry for {key}; keeping the last one", stacklevel=2)
        by_key[key] = report.nme_mean
    decoders = [d.value for d in Decoder if any(k[0] == d.value for k in by_key)]
    resolutions = sorted({k[1] for k in by_key}, reverse=True)
    missing = [(d, r) for d in decoders for r in resolutions if (d, r) not in by_key]
    if missing:
        raise InvalidInputError(f"aggregate grid is incomplete, missing {missing}")
    cells = tuple(tuple(by_key[(d, r)] for r in resolutions) for d in decoders)
    return AggregateTable(tuple(decoders), tuple(resolutions), cells)
