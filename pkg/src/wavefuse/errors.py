"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions violate an operation's shape contract."""


class FormatError(ValueError):
    """On-disk or textual input does not follow the expected format."""


class InputError(ValueError):
    """Argument values are outside an operation's domain."""


class KindError(ValueError):
    """A corruption kind was passed to the wrong signal generator."""


class GenerationError(RuntimeError):
    """Synthetic scene generation could not satisfy its constraints."""
