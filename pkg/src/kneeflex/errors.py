"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value is out of range or inconsistent."""


class ProjectionError(RuntimeError):
    """A point at or behind the camera plane cannot be projected."""


class FramingError(RuntimeError):
    """Keypoints could not be framed inside the raster within the retry budget."""


class CheckpointFormatError(ValueError):
    """A checkpoint file is malformed, truncated, or has the wrong magic."""
