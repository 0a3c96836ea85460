"""Exception hierarchy for the p2c toolchain.

``InputError`` covers everything caused by bad user inputs (documents,
annotations, config, images); the CLI maps it to exit code 2. Any other
``P2cError`` (or unexpected exception) is an internal error, exit code 1.
"""

from __future__ import annotations


class P2cError(Exception):
    """Base class for all p2c errors."""


class InputError(P2cError):
    """An error attributable to user-supplied input."""


class SchemaError(InputError):
    """Input document violates the documented JSON schema."""


class DuplicateIdError(SchemaError):
    """Two layers share the same id."""


class NegativeSizeError(SchemaError):
    """A rectangle has negative width or height."""


class UnknownLayerIdError(InputError):
    """An annotation references a layer id absent from the document."""


class OverlappingMergeSetsError(InputError):
    """Two merge groups in an annotation set share a layer id."""


class UnknownGroupTypeError(InputError):
    """An annotation uses a perceptual-group type outside the known five."""


class UnknownLabelError(InputError):
    """A classification label is not part of the active taxonomy."""


class KeyMismatchError(InputError):
    """Prediction and ground-truth maps do not share the same key set."""


class ConfigError(InputError):
    """Invalid pipeline configuration or missing credentials."""


class DegenerateCanvasError(P2cError):
    """Canvas width or height is zero where a positive size is required."""


class UntypedNodeError(P2cError):
    """A layout node reached the emitter without an element-type label."""


class UnsupportedPropertyError(InputError):
    """A stylesheet uses a layout property outside the replayable subset."""


class UnparsableReplyError(P2cError):
    """A language-model reply contained no JSON object."""


class EmptyReplyError(P2cError):
    """A language-model reply was empty."""


class DimensionMismatchError(InputError):
    """Two raster images differ in size or channel count."""


class TooSmallError(InputError):
    """An image is smaller than the metric's sliding window."""
