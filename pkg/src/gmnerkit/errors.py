"""Exception hierarchy shared across the toolkit.

The CLI maps these onto distinct exit codes: config errors exit 2, input
errors exit 3, internal invariant violations exit 4.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ToolkitError):
    """Invalid configuration value, config file, or sweep grid entry."""


class InputError(ToolkitError):
    """Rejected input: bad box, malformed dataset, missing file, and the like."""


class InvalidBoxError(InputError):
    """Box with non-positive extent or non-finite coordinates."""


class DegenerateClipError(InputError):
    """Clipping to image bounds left the box with zero extent."""


class SerializationError(InputError):
    """Record cannot be serialized unambiguously (delimiter inside a field)."""


class DatasetError(InputError):
    """Dataset or generations file failed validation; message carries line context."""


class OracleSizeError(InputError):
    """Instance too large for the exhaustive matching oracle."""


class InvariantViolation(ToolkitError):
    """An internal consistency check failed; indicates a toolkit bug."""
