"""Exception types shared across the package."""


class PerispaceError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(PerispaceError, ValueError):
    """An operation was called with arguments violating its preconditions."""


class SceneFormatError(PerispaceError, ValueError):
    """A scene document is malformed or violates a model invariant."""


class ConfigError(PerispaceError, ValueError):
    """A run configuration is malformed or inconsistent."""
