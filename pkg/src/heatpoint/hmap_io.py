"""Binary heatmap container (HMAP) and landmark annotation JSON.

HMAP layout, all integers little-endian:

    offset  size  field
    0       4     magic, the bytes "HMAP"
    4       4     format version, currently 1
    8       4     k, number of heatmaps (one per landmark)
    12      4     height in pixels
    16      4     width in pixels
    20      4     dtype code, 0 = float32
    24      ...   payload: k * height * width little-endian float32 values,
                  landmark-major, each map row-major

One file carries one landmark set.  Values are float64 in memory and float32
on disk, so a write/read round trip is bit-exact at float32 precision.
Malformed files are rejected with the byte offset of the offending field,
never repaired.

Annotations are a JSON list of records:

    [{"id": "sample-0",
      "landmarks": [[u, v], ...],
      "normalization": 60.0,          # optional per-record D
      "flags": [null, "failed", ...]  # optional, one entry per landmark
    }, ...]

Landmark coordinates are image-space pixels.  The schema is strict: unknown
keys, non-finite numbers, and inconsistent lengths are schema errors.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Coordinate, Heatmap, LandmarkSet, Space
from .errors import (
    BadMagicError,
    FormatError,
    InvalidInputError,
    SchemaError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)

MAGIC = b"HMAP"
VERSION = 1
DTYPE_FLOAT32 = 0
_HEADER = struct.Struct("<4s5I")
HEADER_SIZE = _HEADER.size  # 24 bytes


@dataclass(frozen=True)
class AnnotationRecord:
    """One sample's landmarks plus optional normalization and per-landmark flags."""

    id: str
    landmarks: LandmarkSet
    normalization: float | None = None
    flags: tuple[str | None, ...] | None = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise InvalidInputError(f"record id must be a non-empty string, got {self.id!r}")
        if self.landmarks.landmarks and self.landmarks.space is not Space.IMAGE:
            raise InvalidInputError("annotation landmarks must be in image space")
        if self.normalization is not None and not (
            math.isfinite(self.normalization) and self.normalization > 0
        ):
            raise InvalidInputError(f"normalization must be a finite value > 0, got {self.normalization}")
        if self.flags is not None:
            object.__setattr__(self, "flags", tuple(self.flags))
            if len(self.flags) != self.landmarks.count:
                raise InvalidInputError("flags length must match the landmark count")


def hmap_to_bytes(heatmaps: Sequence[Heatmap]) -> bytes:
    """Serialize heatmaps (all the same size) into the binary container."""
    maps = list(heatmaps)
    if not all(isinstance(h, Heatmap) for h in maps):
        raise InvalidInputError("hmap serialization expects Heatmap instances")
    if maps:
        height, width = maps[0].height, maps[0].width
        if any(h.height != height or h.width != width for h in maps):
            raise InvalidInputError("all heatmaps in one container must share a size")
    else:
        height = width = 0
    header = _HEADER.pack(MAGIC, VERSION, len(maps), height, width, DTYPE_FLOAT32)
    payload = b"".join(np.ascontiguousarray(h.values, dtype="<f4").tobytes() for h in maps)
    return header + payload


def hmap_from_bytes(data: bytes) -> list[Heatmap]:
    """Parse the binary container, rejecting malformed input with byte offsets."""
    if len(data) < HEADER_SIZE:
        raise TruncatedPayloadError(
            f"file too short for the {HEADER_SIZE}-byte header: got {len(data)} bytes",
            offset=len(data),
        )
    magic, version, k, height, width, dtype = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}, expected {VERSION}", offset=4)
    if dtype != DTYPE_FLOAT32:
        raise UnsupportedDtypeError(f"unsupported dtype code {dtype}, expected {DTYPE_FLOAT32}", offset=20)
    if k > 0 and (height < 1 or width < 1):
        raise FormatError(f"{k} heatmaps declared with empty dimensions {height}x{width}", offset=12)

    expected = 4 * k * height * width
    actual = len(data) - HEADER_SIZE
    if actual != expected:
        raise TruncatedPayloadError(
            f"payload length mismatch: expected {expected} bytes "
            f"(k={k}, {height}x{width}, float32), got {actual}",
            offset=HEADER_SIZE + min(actual, expected),
        )
    if k == 0:
        return []
    raw = np.frombuffer(data, dtype="<f4", count=k * height * width, offset=HEADER_SIZE)
    finite = np.isfinite(raw)
    if not finite.all():
        bad = int(np.argmin(finite))
        raise FormatError(
            f"payload value {bad} is not finite", offset=HEADER_SIZE + 4 * bad
        )
    grids = raw.astype(np.float64).reshape(k, height, width)
    return [Heatmap(grids[i], landmark_index=i) for i in range(k)]


def write_hmap(heatmaps: Sequence[Heatmap], path) -> None:
    Path(path).write_bytes(hmap_to_bytes(heatmaps))


def read_hmap(path) -> list[Heatmap]:
    return hmap_from_bytes(Path(path).read_bytes())


def _require(condition: bool, message: str):
    if not condition:
        raise SchemaError(message)


def _finite_number(value, context: str) -> float:
    _require(
        isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value),
        f"{context} must be a finite number, got {value!r}",
    )
    return float(value)


def parse_records(obj) -> list[AnnotationRecord]:
    """Validate a decoded JSON value against the annotation schema."""
    _require(isinstance(obj, list), f"annotations must be a JSON list, got {type(obj).__name__}")
    records = []
    for i, item in enumerate(obj):
        where = f"record {i}"
        _require(isinstance(item, dict), f"{where} must be an object, got {type(item).__name__}")
        unknown = set(item) - {"id", "landmarks", "normalization", "flags"}
        _require(not unknown, f"{where} has unknown keys {sorted(unknown)}")
        _require("id" in item and "landmarks" in item, f"{where} needs 'id' and 'landmarks'")
        rid = item["id"]
        _require(isinstance(rid, str) and rid != "", f"{where}: id must be a non-empty string")
        raw_landmarks = item["landmarks"]
        _require(isinstance(raw_landmarks, list), f"{where}: landmarks must be a list")
        points = []
        for j, pair in enumerate(raw_landmarks):
            _require(
                isinstance(pair, list) and len(pair) == 2,
                f"{where}: landmark {j} must be a [u, v] pair",
            )
            u = _finite_number(pair[0], f"{where}: landmark {j} u")
            v = _finite_number(pair[1], f"{where}: landmark {j} v")
            points.append(Coordinate(u, v, Space.IMAGE))
        normalization = None
        if item.get("normalization") is not None:
            normalization = _finite_number(item["normalization"], f"{where}: normalization")
            _require(normalization > 0, f"{where}: normalization must be > 0")
        flags = None
        if item.get("flags") is not None:
            raw_flags = item["flags"]
            _require(isinstance(raw_flags, list), f"{where}: flags must be a list")
            _require(
                len(raw_flags) == len(points),
                f"{where}: flags length {len(raw_flags)} does not match {len(points)} landmarks",
            )
            _require(
                all(f is None or isinstance(f, str) for f in raw_flags),
                f"{where}: flags entries must be strings or null",
            )
            flags = tuple(raw_flags)
        records.append(
            AnnotationRecord(
                id=rid,
                landmarks=LandmarkSet(tuple(points)),
                normalization=normalization,
                flags=flags,
            )
        )
    return records


def records_to_obj(records: Sequence[AnnotationRecord]) -> list[dict]:
    """Annotation records back to plain JSON-ready objects (lossless floats)."""
    out = []
    for rec in records:
        item = {"id": rec.id, "landmarks": [[c.x, c.y] for c in rec.landmarks.landmarks]}
        if rec.normalization is not None:
            item["normalization"] = rec.normalization
        if rec.flags is not None:
            item["flags"] = list(rec.flags)
        out.append(item)
    return out


def read_annotations(path) -> list[AnnotationRecord]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed annotation JSON: {exc}") from exc
    return parse_records(obj)


def write_annotations(records: Sequence[AnnotationRecord], path) -> None:
    Path(path).write_text(json.dumps(records_to_obj(records), indent=2) + "\n", encoding="utf-8")
