"""Gaussian distance-map keypoint encoding and sub-pixel decoding.

Encode continuous landmarks into Gaussian heatmaps whose pixel values carry
the distance to the true center, then decode them back with argmax, two-hot,
Newton-refinement, or true-range multilateration; the latter removes
heatmap quantization error entirely.  A benchmark, an HTTP service, and a
CLI wrap the core.
"""

__version__ = "0.1.0"

from .bench import (
    BenchCell,
    BenchConfig,
    BenchResult,
    SweepConfig,
    SweepResult,
    interior_margin,
    render_nme_csv,
    render_nme_text,
    render_sweep_csv,
    render_sweep_text,
    render_timing_csv,
    render_timing_text,
    run_bench,
    run_sweep,
)
from .core import (
    Coordinate,
    EncodingConfig,
    EncodingMode,
    Heatmap,
    LandmarkSet,
    OffGridWarning,
    Space,
    encode,
    quantize,
    to_heatmap_space,
)
from .decode import (
    AnchorSet,
    DecodeConfig,
    DecodeResult,
    Decoder,
    decode,
    decode_distribution_aware,
    decode_multilateration,
    decode_one_hot,
    decode_two_hot,
    invert_distance,
    multilaterate,
    sample_anchors,
    to_image_space,
)
from .errors import (
    BadMagicError,
    BoundaryPeakError,
    CollinearAnchorError,
    FlatHeatmapError,
    FormatError,
    HeatpointError,
    InvalidConfigError,
    InvalidInputError,
    SchemaError,
    SingularSystemError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)
from .hmap_io import (
    AnnotationRecord,
    hmap_from_bytes,
    hmap_to_bytes,
    parse_records,
    read_annotations,
    read_hmap,
    records_to_obj,
    write_annotations,
    write_hmap,
)
from .metrics import (
    AggregateTable,
    EvalConfig,
    EvalReport,
    NormalizationKind,
    aggregate,
    evaluate_records,
    nme,
)

__all__ = [
    "__version__",
    "AggregateTable",
    "AnchorSet",
    "AnnotationRecord",
    "BadMagicError",
    "BenchCell",
    "BenchConfig",
    "BenchResult",
    "BoundaryPeakError",
    "CollinearAnchorError",
    "Coordinate",
    "DecodeConfig",
    "DecodeResult",
    "Decoder",
    "EncodingConfig",
    "EncodingMode",
    "EvalConfig",
    "EvalReport",
    "FlatHeatmapError",
    "FormatError",
    "Heatmap",
    "HeatpointError",
    "InvalidConfigError",
    "InvalidInputError",
    "LandmarkSet",
    "NormalizationKind",
    "OffGridWarning",
    "SchemaError",
    "SingularSystemError",
    "Space",
    "SweepConfig",
    "SweepResult",
    "TruncatedPayloadError",
    "UnsupportedDtypeError",
    "UnsupportedVersionError",
    "aggregate",
    "decode",
    "decode_distribution_aware",
    "decode_multilateration",
    "decode_one_hot",
    "decode_two_hot",
    "encode",
    "evaluate_records",
    "hmap_from_bytes",
    "hmap_to_bytes",
    "interior_margin",
    "invert_distance",
    "multilaterate",
    "nme",
    "parse_records",
    "quantize",
    "read_annotations",
    "read_hmap",
    "records_to_obj",
    "render_nme_csv",
    "render_nme_text",
    "render_sweep_csv",
    "render_sweep_text",
    "render_timing_csv",
    "render_timing_text",
    "run_bench",
    "run_sweep",
    "sample_anchors",
    "to_heatmap_space",
    "to_image_space",
    "write_annotations",
    "write_hmap",
]
