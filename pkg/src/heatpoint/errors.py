"""Exception hierarchy for the heatpoint package.

Every error carries a stable machine-readable ``name`` (surfaced by the HTTP
service and in CLI messages) and an ``exit_code`` bucket used by the CLI:

* 1 -- invalid input or configuration,
* 2 -- I/O and file-format problems,
* 3 -- numerical failures inside a decoder.
"""

from __future__ import annotations


class HeatpointError(Exception):
    """Base class for all package errors."""

    name = "error"
    exit_code = 1


class InvalidInputError(HeatpointError):
    name = "invalid-input"
    exit_code = 1


class InvalidConfigError(HeatpointError):
    name = "invalid-config"
    exit_code = 1


class FlatHeatmapError(HeatpointError):
    """Raised when a heatmap carries no signal (max equals min)."""

    name = "flat-heatmap"
    exit_code = 3


class BoundaryPeakError(HeatpointError):
    """Raised when a decoder needs an interior argmax but the peak sits on the border."""

    name = "boundary-peak"
    exit_code = 3


class CollinearAnchorError(HeatpointError):
    """Raised when sampled anchors all lie on one line and cannot fix a 2-D point."""

    name = "collinear-anchors"
    exit_code = 3


class SingularSystemError(HeatpointError):
    """Raised when the multilateration normal equations are numerically singular."""

    name = "singular-system"
    exit_code = 3


class FormatError(HeatpointError):
    """Base class for binary and JSON container format violations.

    ``offset`` is the byte offset of the offending field when known.
    """

    name = "format"
    exit_code = 2

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class BadMagicError(FormatError):
    name = "bad-magic"


class UnsupportedVersionError(FormatError):
    name = "unsupported-version"


class UnsupportedDtypeError(FormatError):
    name = "unsupported-dtype"


class TruncatedPayloadError(FormatError):
    """Payload length disagrees with the header (short or trailing bytes)."""

    name = "truncated-payload"


class SchemaError(FormatError):
    """Annotation JSON does not follow the documented schema."""

    name = "annotation-schema"
