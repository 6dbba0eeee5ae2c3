"""Shared exception types."""


class GlyphvidError(Exception):
    """Base class for all package errors."""


class ConfigError(GlyphvidError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


class ShapeMismatchError(GlyphvidError):
    """Tensor shape incompatible with the codec or model contract."""


class SceneVisibilityError(GlyphvidError):
    """Scene trajectory leaves the subject invisible in too many frames."""


class NoDetectionError(GlyphvidError):
    """A crop contained no decodable subject (mirrors detector failure)."""


class CheckpointError(GlyphvidError):
    """Checkpoint file corrupt or incompatible with the requested config."""
